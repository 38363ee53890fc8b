//! Whole-recording spectral analysis: magnitude spectra, spectrum averaging,
//! band-limited area under the curve and per-microphone baseline normalization.
//!
//! Magnitudes are single-sided and amplitude-calibrated: a sinusoid of
//! amplitude `A` centred on a bin reads `A` at that bin, for either window.
//! Decibels are `20·log10(magnitude / 1.0)`, i.e. relative to a full-scale
//! unit amplitude, floored at [`DB_FLOOR`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::ForceCode;

/// Reference amplitude for decibel values.
pub const DB_REFERENCE: f64 = 1.0;

/// Magnitudes at or below this read as [`DB_FLOOR`].
pub const MIN_MAGNITUDE: f64 = 1e-15;

/// dB value reported for zero magnitude.
pub const DB_FLOOR: f64 = -300.0;

/// Fingerprint label of the unmodified robot skin used as baseline.
pub const BASELINE_MATERIAL: &str = "Default";

/// Sampling rate of the recording setup, Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 500_000.0;

/// Default analysis band for AUC, Hz.
pub const DEFAULT_AUC_BAND: (f64, f64) = (0.0, 26_000.0);

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("sample rate must be positive and finite, got {0}")]
    SampleRate(f64),
    #[error("a recording needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("sample {0} is not finite")]
    NonFinite(usize),
    #[error("cannot average an empty list of spectra")]
    NoSpectra,
    #[error("spectrum {index} has a different grid ({detail})")]
    GridMismatch { index: usize, detail: String },
    #[error("invalid band [{low}, {high}] Hz for a spectrum up to {nyquist} Hz")]
    InvalidBand { low: f64, high: f64, nyquist: f64 },
    #[error("band [{low}, {high}] Hz contains no spectrum bins")]
    EmptyBand { low: f64, high: f64 },
    #[error("no `{BASELINE_MATERIAL}` baseline recordings for microphone {microphone}, object `{object}`")]
    MissingBaseline {
        microphone: Microphone,
        object: String,
    },
    #[error("baseline mean AUC is zero for microphone {microphone}, object `{object}`")]
    ZeroBaseline {
        microphone: Microphone,
        object: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Microphone {
    Left,
    Right,
    Palm,
}

impl Microphone {
    pub const ALL: [Microphone; 3] = [Microphone::Left, Microphone::Right, Microphone::Palm];
}

impl fmt::Display for Microphone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for Microphone {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Microphone::Left),
            "right" => Ok(Microphone::Right),
            "palm" => Ok(Microphone::Palm),
            other => Err(format!("unknown microphone `{other}` (left, right, palm)")),
        }
    }
}

/// Haptic exploration procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Procedure {
    LateralMotion,
    Enclosure,
    Pressure,
    UnsupportedHolding,
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub object: String,
    pub exploration_procedure: Option<Procedure>,
    pub force_code: Option<ForceCode>,
    pub fingerprint_material: String,
    pub microphone: Option<Microphone>,
    pub repetition: Option<u32>,
}

impl Default for RecordingMeta {
    fn default() -> Self {
        Self {
            object: String::new(),
            exploration_procedure: None,
            force_code: None,
            fingerprint_material: BASELINE_MATERIAL.to_string(),
            microphone: None,
            repetition: None,
        }
    }
}

/// A mono time series in ADC units.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    samples: Vec<f64>,
    sample_rate: f64,
    pub meta: RecordingMeta,
}

impl Recording {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self, SignalError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(SignalError::SampleRate(sample_rate));
        }
        if samples.len() < 2 {
            return Err(SignalError::TooShort(samples.len()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate,
            meta: RecordingMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: RecordingMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Copy with every sample multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * k).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Periodic (DFT-even) window coefficients.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }
}

impl std::str::FromStr for Window {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "none" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(format!("unknown window `{other}` (rectangular, hann)")),
        }
    }
}

pub fn magnitude_to_db(magnitude: f64) -> f64 {
    if magnitude <= MIN_MAGNITUDE {
        DB_FLOOR
    } else {
        20.0 * (magnitude / DB_REFERENCE).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumBin {
    pub frequency: f64,
    pub magnitude: f64,
    pub amplitude_db: f64,
}

/// Single-sided magnitude spectrum on the grid `0, Δf, 2Δf, … ≤ fs/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    bins: Vec<SpectrumBin>,
    resolution: f64,
    sample_rate: f64,
    n_samples: usize,
    window: Window,
    /// mean(w²) / mean(w)², converts magnitude power to signal power
    #[serde(skip)]
    power_factor: f64,
}

impl Spectrum {
    /// Builds a spectrum from linear magnitudes of an `n_samples`-long
    /// transform at `sample_rate`.
    pub fn from_magnitudes(
        sample_rate: f64,
        n_samples: usize,
        window: Window,
        magnitudes: Vec<f64>,
    ) -> Result<Self, SignalError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(SignalError::SampleRate(sample_rate));
        }
        let expected = n_samples / 2 + 1;
        if magnitudes.len() != expected {
            return Err(SignalError::GridMismatch {
                index: 0,
                detail: format!(
                    "{} bins for {} samples, expected {}",
                    magnitudes.len(),
                    n_samples,
                    expected
                ),
            });
        }
        let resolution = sample_rate / n_samples as f64;
        let bins = magnitudes
            .into_iter()
            .enumerate()
            .map(|(k, magnitude)| SpectrumBin {
                frequency: k as f64 * resolution,
                magnitude,
                amplitude_db: magnitude_to_db(magnitude),
            })
            .collect();
        let w = window.coefficients(n_samples);
        let cg = w.iter().sum::<f64>() / n_samples as f64;
        let npg = w.iter().map(|x| x * x).sum::<f64>() / n_samples as f64;
        Ok(Self {
            bins,
            resolution,
            sample_rate,
            n_samples,
            window,
            power_factor: npg / (cg * cg),
        })
    }

    pub fn bins(&self) -> &[SpectrumBin] {
        &self.bins
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Highest bin frequency.
    pub fn max_frequency(&self) -> f64 {
        self.bins[self.bins.len() - 1].frequency
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.bins.iter().map(|b| b.magnitude)
    }

    /// Estimate of the source's mean-square value from the magnitudes.
    /// Exact for the rectangular window; for other windows it holds on
    /// average, corrected by the window's noise power gain.
    pub fn mean_square_estimate(&self) -> f64 {
        let last = self.bins.len() - 1;
        let has_nyquist = self.n_samples.is_multiple_of(2);
        let sum: f64 = self
            .bins
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let m2 = b.magnitude * b.magnitude;
                if k == 0 || (k == last && has_nyquist) {
                    m2
                } else {
                    m2 / 2.0
                }
            })
            .sum();
        sum / self.power_factor
    }

    fn check_band(&self, band: (f64, f64)) -> Result<(), SignalError> {
        let (low, high) = band;
        let nyquist = self.max_frequency();
        if !(low.is_finite() && high.is_finite() && low >= 0.0 && low < high && high <= nyquist) {
            return Err(SignalError::InvalidBand { low, high, nyquist });
        }
        Ok(())
    }

    fn magnitude_at(&self, f: f64) -> f64 {
        let pos = f / self.resolution;
        let k = (pos.floor() as usize).min(self.bins.len() - 1);
        if k + 1 >= self.bins.len() {
            return self.bins[k].magnitude;
        }
        let t = pos - k as f64;
        let (a, b) = (self.bins[k].magnitude, self.bins[k + 1].magnitude);
        a + (b - a) * t
    }
}

/// Single-sided magnitude spectrum of the whole recording.
pub fn spectrum(rec: &Recording, window: Window) -> Spectrum {
    let n = rec.samples.len();
    let w = window.coefficients(n);
    let coherent_gain = w.iter().sum::<f64>() / n as f64;

    let mut buffer: Vec<Complex<f64>> = rec
        .samples
        .iter()
        .zip(&w)
        .map(|(x, w)| Complex::new(x * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);

    let half = n / 2;
    let scale = 1.0 / (n as f64 * coherent_gain);
    let magnitudes = buffer[..=half]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let single_sided = if k == 0 || (n.is_multiple_of(2) && k == half) {
                1.0
            } else {
                2.0
            };
            single_sided * c.norm() * scale
        })
        .collect();
    Spectrum::from_magnitudes(rec.sample_rate, n, window, magnitudes).expect("spectrum grid")
}

/// Bin-wise arithmetic mean of linear magnitudes.
pub fn mean_spectrum(specs: &[Spectrum]) -> Result<Spectrum, SignalError> {
    let first = specs.first().ok_or(SignalError::NoSpectra)?;
    for (index, s) in specs.iter().enumerate().skip(1) {
        if s.n_samples != first.n_samples
            || s.sample_rate != first.sample_rate
            || s.window != first.window
        {
            return Err(SignalError::GridMismatch {
                index,
                detail: format!(
                    "{} samples at {} Hz ({}) vs {} samples at {} Hz ({})",
                    s.n_samples,
                    s.sample_rate,
                    s.window.label(),
                    first.n_samples,
                    first.sample_rate,
                    first.window.label()
                ),
            });
        }
    }
    let count = specs.len() as f64;
    let magnitudes = (0..first.bins.len())
        .map(|k| specs.iter().map(|s| s.bins[k].magnitude).sum::<f64>() / count)
        .collect();
    Spectrum::from_magnitudes(first.sample_rate, first.n_samples, first.window, magnitudes)
}

/// Trapezoidal area under the linear magnitude over `[low, high]` Hz, with
/// the curve linearly interpolated at the band edges.
pub fn band_auc(spec: &Spectrum, band: (f64, f64)) -> Result<f64, SignalError> {
    spec.check_band(band)?;
    let (low, high) = band;
    let df = spec.resolution;
    let first_inner = (low / df).floor() as usize + 1;
    let mut prev_f = low;
    let mut prev_m = spec.magnitude_at(low);
    let mut area = 0.0;
    for bin in spec.bins.iter().skip(first_inner) {
        if bin.frequency >= high {
            break;
        }
        if bin.frequency <= low {
            continue;
        }
        area += 0.5 * (prev_m + bin.magnitude) * (bin.frequency - prev_f);
        prev_f = bin.frequency;
        prev_m = bin.magnitude;
    }
    area += 0.5 * (prev_m + spec.magnitude_at(high)) * (high - prev_f);
    Ok(area)
}

/// Peak frequency (Hz) and level (dB) inside `band`. The largest bin wins,
/// the lower frequency on ties, and the peak is refined by a parabola
/// through the dB values of the bin and its two neighbours.
pub fn dominant_frequency(spec: &Spectrum, band: (f64, f64)) -> Result<(f64, f64), SignalError> {
    let (low, high) = band;
    if !(low.is_finite() && high.is_finite() && low <= high) {
        return Err(SignalError::InvalidBand {
            low,
            high,
            nyquist: spec.max_frequency(),
        });
    }
    let mut best: Option<usize> = None;
    for (k, b) in spec.bins.iter().enumerate() {
        if b.frequency < low || b.frequency > high {
            continue;
        }
        if best.is_none_or(|j| b.magnitude > spec.bins[j].magnitude) {
            best = Some(k);
        }
    }
    let k = best.ok_or(SignalError::EmptyBand { low, high })?;
    let peak = spec.bins[k];
    if k == 0 || k + 1 >= spec.bins.len() {
        return Ok((peak.frequency, peak.amplitude_db));
    }
    let (a, b, c) = (
        spec.bins[k - 1].magnitude,
        peak.magnitude,
        spec.bins[k + 1].magnitude,
    );
    if a <= MIN_MAGNITUDE || b <= MIN_MAGNITUDE || c <= MIN_MAGNITUDE {
        return Ok((peak.frequency, peak.amplitude_db));
    }
    let (ya, yb, yc) = (magnitude_to_db(a), magnitude_to_db(b), magnitude_to_db(c));
    let denom = ya - 2.0 * yb + yc;
    if denom >= 0.0 {
        return Ok((peak.frequency, peak.amplitude_db));
    }
    let offset = (0.5 * (ya - yc) / denom).clamp(-0.5, 0.5);
    let level = yb - 0.25 * (ya - yc) * offset;
    Ok((peak.frequency + offset * spec.resolution, level))
}

/// One recording's AUC with the keys used for grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSample {
    pub microphone: Microphone,
    pub object: String,
    pub fingerprint_material: String,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub microphone: Microphone,
    pub object: String,
    pub fingerprint_material: String,
    pub count: usize,
    pub mean_auc: f64,
    /// Group mean AUC divided by the baseline mean; exactly 1.0 for the baseline.
    pub normalized_mean: f64,
    /// Sample standard deviation of the per-recording normalized AUCs
    /// (zero for single recordings).
    pub normalized_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedSample {
    #[serde(flatten)]
    pub sample: AucSample,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucReport {
    pub recordings: Vec<NormalizedSample>,
    pub groups: Vec<GroupSummary>,
}

type GroupKey = (Microphone, String, String);

/// Normalizes AUCs per microphone and object against the mean AUC of that
/// microphone's baseline (`Default`) recordings of the same object.
pub fn normalize_against_baseline(samples: &[AucSample]) -> Result<AucReport, SignalError> {
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for s in samples {
        groups
            .entry((
                s.microphone,
                s.object.clone(),
                s.fingerprint_material.clone(),
            ))
            .or_default()
            .push(s.auc);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let mut baselines: BTreeMap<(Microphone, String), f64> = BTreeMap::new();
    for (mic, object, _) in groups.keys() {
        let key = (*mic, object.clone());
        if baselines.contains_key(&key) {
            continue;
        }
        let base = groups
            .get(&(*mic, object.clone(), BASELINE_MATERIAL.to_string()))
            .ok_or_else(|| SignalError::MissingBaseline {
                microphone: *mic,
                object: object.clone(),
            })?;
        let m = mean(base);
        if m == 0.0 {
            return Err(SignalError::ZeroBaseline {
                microphone: *mic,
                object: object.clone(),
            });
        }
        baselines.insert(key, m);
    }

    let recordings = samples
        .iter()
        .map(|s| NormalizedSample {
            normalized: s.auc / baselines[&(s.microphone, s.object.clone())],
            sample: s.clone(),
        })
        .collect();

    let groups = groups
        .into_iter()
        .map(|((microphone, object, material), aucs)| {
            let base = baselines[&(microphone, object.clone())];
            let mean_auc = mean(&aucs);
            let normalized_mean = mean_auc / base;
            let normalized_std = if aucs.len() > 1 {
                let var = aucs
                    .iter()
                    .map(|a| (a / base - normalized_mean).powi(2))
                    .sum::<f64>()
                    / (aucs.len() - 1) as f64;
                var.sqrt()
            } else {
                0.0
            };
            GroupSummary {
                microphone,
                object,
                fingerprint_material: material,
                count: aucs.len(),
                mean_auc,
                normalized_mean,
                normalized_std,
            }
        })
        .collect();
    Ok(AucReport { recordings, groups })
}

impl AucReport {
    /// Normalized statistics nested as microphone → material → object.
    pub fn json_summary(&self) -> serde_json::Value {
        let mut root: BTreeMap<String, BTreeMap<String, BTreeMap<String, serde_json::Value>>> =
            BTreeMap::new();
        for g in &self.groups {
            root.entry(g.microphone.to_string())
                .or_default()
                .entry(g.fingerprint_material.clone())
                .or_default()
                .insert(
                    g.object.clone(),
                    serde_json::json!({
                        "count": g.count,
                        "mean_auc": g.mean_auc,
                        "normalized_mean": g.normalized_mean,
                        "normalized_std": g.normalized_std,
                    }),
                );
        }
        serde_json::to_value(root).expect("summary is plain data")
    }

    pub fn group(
        &self,
        microphone: Microphone,
        object: &str,
        material: &str,
    ) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| {
            g.microphone == microphone && g.object == object && g.fingerprint_material == material
        })
    }
}

/// Columns: `frequency_hz,magnitude,amplitude_db`.
pub fn write_spectrum_csv<W: Write>(spec: &Spectrum, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frequency_hz", "magnitude", "amplitude_db"])?;
    for b in &spec.bins {
        w.write_record([
            format!("{:.6}", b.frequency),
            format!("{:.9e}", b.magnitude),
            format!("{:.4}", b.amplitude_db),
        ])?;
    }
    w.flush()
}

/// Columns: `microphone,object,fingerprint_material,count,mean_auc,normalized_mean,normalized_std`.
pub fn write_groups_csv<W: Write>(report: &AucReport, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "microphone",
        "object",
        "fingerprint_material",
        "count",
        "mean_auc",
        "normalized_mean",
        "normalized_std",
    ])?;
    for g in &report.groups {
        w.write_record([
            g.microphone.to_string(),
            g.object.clone(),
            g.fingerprint_material.clone(),
            g.count.to_string(),
            format!("{:.9e}", g.mean_auc),
            format!("{:.9}", g.normalized_mean),
            format!("{:.9}", g.normalized_std),
        ])?;
    }
    w.flush()
}
