use ridgebeam::beam::{self, BeamSpec, CrossSection};
use ridgebeam::materials::{builtin_materials, find_material};
use ridgebeam::signal::{dominant_frequency, spectrum, Window};
use ridgebeam::simulate::{self, modal_impulse_response, ModalSet, SlideScenario};

fn st45b_square(side_mm: f64, length_mm: f64) -> BeamSpec {
    let m = find_material(&builtin_materials(), "ST45B")
        .unwrap()
        .clone();
    BeamSpec::new(
        m,
        CrossSection::square(side_mm * 1e-3).unwrap(),
        length_mm * 1e-3,
    )
    .unwrap()
}

#[test]
fn lightly_damped_peak_at_damped_frequency() {
    let zeta = 0.01;
    let set = ModalSet::new(vec![9_000.0], vec![zeta], vec![1.0]).unwrap();
    let rec = modal_impulse_response(&set, 0.2, 500_000.0).unwrap();
    let (peak, _) = dominant_frequency(&spectrum(&rec, Window::Hann), (1_000.0, 50_000.0)).unwrap();
    let fd = 9_000.0 * (1.0f64 - zeta * zeta).sqrt();
    assert!((peak - fd).abs() / fd < 1e-3, "{peak} vs {fd}");
}

/// Decay rate from a log-linear least-squares fit of the ring-down's local maxima.
fn fitted_decay_rate(zeta: f64) -> f64 {
    let set = ModalSet::new(vec![9_000.0], vec![zeta], vec![1.0]).unwrap();
    let rate = 2_000_000.0;
    let rec = modal_impulse_response(&set, 0.01, rate).unwrap();
    let s = rec.samples();
    let peaks: Vec<(f64, f64)> = (1..s.len() - 1)
        .filter(|&i| s[i] > s[i - 1] && s[i] >= s[i + 1] && s[i] > 1e-6)
        .map(|i| (i as f64 / rate, s[i].ln()))
        .collect();
    let n = peaks.len() as f64;
    let mt = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let my = peaks.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = peaks.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = peaks.iter().map(|p| (p.0 - mt).powi(2)).sum();
    -sxy / sxx
}

#[test]
fn doubling_damping_halves_time_constant() {
    let tau = 1.0 / fitted_decay_rate(0.01);
    let tau2 = 1.0 / fitted_decay_rate(0.02);
    assert!((tau2 / tau - 0.5).abs() < 0.005, "{tau} -> {tau2}");
    // and the fit recovers the analytic decay constant
    let expected = 1.0 / (2.0 * std::f64::consts::PI * 9_000.0 * 0.01);
    assert!((tau - expected).abs() / expected < 0.01);
}

#[test]
fn excitation_comb_spacing() {
    let beam = st45b_square(1.0, 4.0);
    let mut s = SlideScenario::new(beam);
    s.velocity = simulate::velocity_from_mm_per_s(953.3);
    s.pitch = 2.0e-3;
    s.modes = 1;
    s.damping = vec![0.02];
    s.mode_amplitudes = vec![1.0];
    s.noise_floor_db = None;
    s.duration = 0.5;
    let expected = s.excitation_rate();
    assert!((expected - 476.65).abs() < 1e-9);

    let spec = spectrum(&simulate::slide_signal(&s).unwrap(), Window::Hann);
    let df = spec.resolution();
    // strongest comb line, then its neighbour one comb spacing above
    let (first, _) = dominant_frequency(&spec, (1_000.0, 100_000.0)).unwrap();
    let (second, _) =
        dominant_frequency(&spec, (first + 0.5 * expected, first + 1.5 * expected)).unwrap();
    let (below, _) =
        dominant_frequency(&spec, (first - 1.5 * expected, first - 0.5 * expected)).unwrap();
    assert!((second - first - expected).abs() <= df, "{first} {second}");
    assert!((first - below - expected).abs() <= df, "{below} {first}");
}

#[test]
fn one_mode_slide_peak_within_a_bin() {
    // a slow slide spaces the impulses wider than the window, so the spectrum
    // is the ring-down itself rather than a comb sampling it
    let beam = st45b_square(1.0, 4.0);
    let mut s = SlideScenario::new(beam.clone());
    s.velocity = simulate::velocity_from_mm_per_s(10.0);
    s.modes = 1;
    s.damping = vec![0.02];
    s.mode_amplitudes = vec![1.0];
    s.noise_floor_db = None;
    s.duration = 0.2;
    let spec = spectrum(&simulate::slide_signal(&s).unwrap(), Window::Hann);
    let f1 = beam::natural_frequency(&beam, 1).unwrap().nominal;
    let fd = f1 * (1.0f64 - 0.02 * 0.02).sqrt();
    let (peak, _) = dominant_frequency(&spec, (1_000.0, 100_000.0)).unwrap();
    assert!(
        (peak - fd).abs() <= spec.resolution() + 1e-3 * fd,
        "{peak} vs {fd}"
    );
}

#[test]
fn noise_only_spectrum_is_flat_at_the_floor() {
    let mut s = SlideScenario::new(st45b_square(1.0, 4.0));
    s.mode_amplitudes = vec![0.0; 3];
    s.noise_floor_db = Some(-70.0);
    s.seed = 3;
    let spec = spectrum(&simulate::slide_signal(&s).unwrap(), Window::Rectangular);
    let mags: Vec<f64> = spec.magnitudes().collect();
    let inner = &mags[1..mags.len() - 1];
    let rms_db = |m: &[f64]| 10.0 * (m.iter().map(|x| x * x).sum::<f64>() / m.len() as f64).log10();
    assert!((rms_db(inner) + 70.0).abs() < 0.1, "{}", rms_db(inner));
    for chunk in inner.chunks_exact(inner.len() / 10) {
        assert!((rms_db(chunk) + 70.0).abs() < 0.5, "{}", rms_db(chunk));
    }
}
