//! Synthetic body-borne vibration: damped modal ring-down of a fingerprint
//! beam, re-excited each time the next ridge catches and snaps back.
//!
//! The impulse response is a sum of damped sines at the beam's cantilever
//! natural frequencies,
//!
//! ```text
//! h(t) = Σ A_n · exp(−2π f_n ζ_n t) · sin(2π f_n sqrt(1 − ζ_n²) t)
//! ```
//!
//! and a slide launches one copy every `pitch / velocity` seconds. Damping
//! and modal amplitudes are modelling parameters, not material data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::beam::{self, BeamError, BeamSpec};
use crate::materials::{units, ForceCode, RobotHandSpec};
use crate::signal::{
    Microphone, Procedure, Recording, RecordingMeta, SignalError, DEFAULT_SAMPLE_RATE,
};

pub const DEFAULT_DAMPING: f64 = 0.02;
pub const DEFAULT_MODES: usize = 3;
pub const DEFAULT_AMPLITUDES: [f64; 3] = [1.0, 0.5, 0.25];

/// Ring-downs are truncated once the slowest envelope drops below this
/// fraction of its start value.
const ENVELOPE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error(
        "mode {mode} at {frequency:.1} Hz needs a sample rate above {needed:.1} Hz, got {rate} Hz"
    )]
    Nyquist {
        mode: usize,
        frequency: f64,
        needed: f64,
        rate: f64,
    },
    #[error("damping ratio for mode {mode} must lie in (0, 1), got {value}")]
    Damping { mode: usize, value: f64 },
    #[error("{what}: expected {expected} values, got {got}")]
    ParameterCount {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("mode amplitudes must be finite")]
    Amplitude,
    #[error("at least one mode is required")]
    NoModes,
    #[error("velocity {velocity} m/s exceeds the hand maximum {max} m/s")]
    TooFast { velocity: f64, max: f64 },
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

fn positive(what: &'static str, value: f64) -> Result<f64, SimulateError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(SimulateError::NonPositive { what, value })
    }
}

/// Modal parameters of one ring-down.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalSet {
    /// undamped natural frequencies, Hz
    pub frequencies: Vec<f64>,
    pub damping: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl ModalSet {
    /// Modes 1..=`modes` of `beam` at its nominal density.
    pub fn for_beam(
        beam: &BeamSpec,
        modes: usize,
        damping: &[f64],
        amplitudes: &[f64],
    ) -> Result<Self, SimulateError> {
        if modes == 0 {
            return Err(SimulateError::NoModes);
        }
        for (what, got) in [("damping", damping.len()), ("amplitudes", amplitudes.len())] {
            if got != modes {
                return Err(SimulateError::ParameterCount {
                    what,
                    expected: modes,
                    got,
                });
            }
        }
        let frequencies = (1..=modes)
            .map(|n| beam::natural_frequency(beam, n as i64).map(|f| f.nominal))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(frequencies, damping.to_vec(), amplitudes.to_vec())
    }

    pub fn new(
        frequencies: Vec<f64>,
        damping: Vec<f64>,
        amplitudes: Vec<f64>,
    ) -> Result<Self, SimulateError> {
        if frequencies.is_empty() {
            return Err(SimulateError::NoModes);
        }
        for (what, got) in [("damping", damping.len()), ("amplitudes", amplitudes.len())] {
            if got != frequencies.len() {
                return Err(SimulateError::ParameterCount {
                    what,
                    expected: frequencies.len(),
                    got,
                });
            }
        }
        for (i, &f) in frequencies.iter().enumerate() {
            positive("mode frequency", f)?;
            let z = damping[i];
            if !(z > 0.0 && z < 1.0) {
                return Err(SimulateError::Damping {
                    mode: i + 1,
                    value: z,
                });
            }
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(SimulateError::Amplitude);
        }
        Ok(Self {
            frequencies,
            damping,
            amplitudes,
        })
    }

    fn check_nyquist(&self, rate: f64) -> Result<(), SimulateError> {
        positive("sample rate", rate)?;
        for (i, &f) in self.frequencies.iter().enumerate() {
            if rate <= 2.0 * f {
                return Err(SimulateError::Nyquist {
                    mode: i + 1,
                    frequency: f,
                    needed: 2.0 * f,
                    rate,
                });
            }
        }
        Ok(())
    }

    /// h(t) for t ≥ 0.
    pub fn response_at(&self, t: f64) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.damping)
            .zip(&self.amplitudes)
            .map(|((&f, &z), &a)| {
                let w = 2.0 * PI * f;
                a * (-w * z * t).exp() * (w * (1.0 - z * z).sqrt() * t).sin()
            })
            .sum()
    }

    /// Time after which every mode's envelope is below the cutoff.
    fn ring_time(&self) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.damping)
            .map(|(&f, &z)| -ENVELOPE_CUTOFF.ln() / (2.0 * PI * f * z))
            .fold(0.0, f64::max)
    }
}

/// Damped modal ring-down of `beam` sampled at `rate` for `duration` seconds.
pub fn impulse_response(
    beam: &BeamSpec,
    modes: usize,
    damping: &[f64],
    amplitudes: &[f64],
    duration: f64,
    rate: f64,
) -> Result<Recording, SimulateError> {
    let set = ModalSet::for_beam(beam, modes, damping, amplitudes)?;
    modal_impulse_response(&set, duration, rate)
}

/// Ring-down of an explicit modal set.
pub fn modal_impulse_response(
    set: &ModalSet,
    duration: f64,
    rate: f64,
) -> Result<Recording, SimulateError> {
    set.check_nyquist(rate)?;
    positive("duration", duration)?;
    let n = (duration * rate).round() as usize;
    let samples = (0..n).map(|i| set.response_at(i as f64 / rate)).collect();
    Ok(Recording::new(samples, rate)?)
}

/// A finger sliding across a surface with a fingerprint patch of identical beams.
#[derive(Debug, Clone, Serialize)]
pub struct SlideScenario {
    pub beam: BeamSpec,
    /// beam centre spacing, m
    pub pitch: f64,
    /// sliding speed, m/s
    pub velocity: f64,
    /// s
    pub duration: f64,
    pub modes: usize,
    pub damping: Vec<f64>,
    pub mode_amplitudes: Vec<f64>,
    /// RMS single-sided bin magnitude of the added noise in a
    /// rectangular-window spectrum of the whole recording, dB re 1.0.
    /// `None` for a noise-free signal.
    pub noise_floor_db: Option<f64>,
    pub sample_rate: f64,
    pub seed: u64,
    pub hand: Option<RobotHandSpec>,
    pub microphone: Option<Microphone>,
    pub object: String,
    /// Label recorded as the fingerprint material; the beam material name if empty.
    pub fingerprint_label: String,
    pub repetition: Option<u32>,
}

impl SlideScenario {
    /// Defaults: pitch of twice the beam side, the hand's maximum velocity,
    /// 0.2 s, three modes with ζ = 0.02 and amplitudes 1, ½, ¼, −70 dB
    /// noise at 500 kHz.
    pub fn new(beam: BeamSpec) -> Self {
        let pitch = 2.0 * beam.section().dimension();
        let hand = RobotHandSpec::rh8d();
        Self {
            beam,
            pitch,
            velocity: hand.max_velocity,
            duration: 0.2,
            modes: DEFAULT_MODES,
            damping: vec![DEFAULT_DAMPING; DEFAULT_MODES],
            mode_amplitudes: DEFAULT_AMPLITUDES.to_vec(),
            noise_floor_db: Some(crate::mic::NOISE_FLOOR_DB),
            sample_rate: DEFAULT_SAMPLE_RATE,
            seed: 0,
            hand: Some(hand),
            microphone: None,
            object: String::new(),
            fingerprint_label: String::new(),
            repetition: None,
        }
    }

    /// Impulses per second, `velocity / pitch`.
    pub fn excitation_rate(&self) -> f64 {
        self.velocity / self.pitch
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        positive("pitch", self.pitch)?;
        positive("velocity", self.velocity)?;
        positive("duration", self.duration)?;
        if let Some(hand) = &self.hand {
            if self.velocity > hand.max_velocity {
                return Err(SimulateError::TooFast {
                    velocity: self.velocity,
                    max: hand.max_velocity,
                });
            }
        }
        let set = ModalSet::for_beam(&self.beam, self.modes, &self.damping, &self.mode_amplitudes)?;
        set.check_nyquist(self.sample_rate)
    }

    fn meta(&self) -> RecordingMeta {
        RecordingMeta {
            object: self.object.clone(),
            exploration_procedure: Some(Procedure::LateralMotion),
            force_code: ForceCode::new(400).ok(),
            fingerprint_material: if self.fingerprint_label.is_empty() {
                self.beam.material().name().to_string()
            } else {
                self.fingerprint_label.clone()
            },
            microphone: self.microphone,
            repetition: self.repetition,
        }
    }
}

/// Standard deviation of white noise whose rectangular-window single-sided
/// bin magnitudes have RMS `10^(db/20)` over `n` samples.
pub fn noise_sigma(noise_floor_db: f64, n: usize) -> f64 {
    10f64.powf(noise_floor_db / 20.0) * (n as f64).sqrt() / 2.0
}

/// Superposed ring-downs launched every `pitch / velocity` seconds, plus
/// seeded Gaussian noise.
pub fn slide_signal(scenario: &SlideScenario) -> Result<Recording, SimulateError> {
    scenario.validate()?;
    let set = ModalSet::for_beam(
        &scenario.beam,
        scenario.modes,
        &scenario.damping,
        &scenario.mode_amplitudes,
    )?;
    let rate = scenario.sample_rate;
    let n = (scenario.duration * rate).round() as usize;
    let period = 1.0 / scenario.excitation_rate();
    if scenario.duration < period {
        log::warn!(
            "duration {} s is shorter than one excitation period {} s; the signal holds a single ring-down",
            scenario.duration,
            period
        );
    }

    let ring = set.ring_time();
    let mut samples = vec![0.0; n];
    let mut k = 0usize;
    loop {
        let onset = k as f64 * period;
        if onset >= scenario.duration {
            break;
        }
        let first = (onset * rate).ceil() as usize;
        let last = (((onset + ring) * rate).ceil() as usize).min(n);
        for (i, s) in samples.iter_mut().enumerate().take(last).skip(first) {
            *s += set.response_at(i as f64 / rate - onset);
        }
        k += 1;
    }

    if let Some(db) = scenario.noise_floor_db {
        let sigma = noise_sigma(db, n);
        let normal = Normal::new(0.0, sigma).map_err(|_| SimulateError::NonPositive {
            what: "noise sigma",
            value: sigma,
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        for s in &mut samples {
            *s += normal.sample(&mut rng);
        }
    }

    Ok(Recording::new(samples, rate)?.with_meta(scenario.meta()))
}

/// Velocity given in mm/s.
pub fn velocity_from_mm_per_s(v: f64) -> f64 {
    v * units::MM
}
