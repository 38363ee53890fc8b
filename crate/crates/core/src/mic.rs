//! Contact microphone response curves: sensitivity bands above an amplitude
//! threshold and attenuation lookup over distance.
//!
//! Curves are piecewise linear in (x, dB). The same [`ResponseCurve`] type
//! carries frequency responses (x in Hz) and distance attenuation (x in m).

use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

/// Default amplitude threshold for the microphone, dB.
pub const DEFAULT_THRESHOLD_DB: f64 = -42.0;

/// Average noise floor of the microphone, dB.
pub const NOISE_FLOOR_DB: f64 = -70.0;

/// Synthetic two-band response bundled with the crate. Not a measurement:
/// a piecewise-linear curve whose −42 dB crossings sit at 3.2, 26, 110 and
/// 280 kHz with peaks at 9 kHz and 150 kHz.
pub const SAMPLE_RESPONSE_CSV: &str = include_str!("../data/mic_response_synthetic.csv");

/// Synthetic attenuation-over-distance curve at 9 kHz. Not a measurement.
pub const SAMPLE_ATTENUATION_CSV: &str = include_str!("../data/mic_attenuation_synthetic.csv");

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("a response curve needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("x values must be strictly increasing (point {index}: {x} after {prev})")]
    NotIncreasing { index: usize, prev: f64, x: f64 },
    #[error("non-finite value at point {0}")]
    NonFinite(usize),
    #[error("{x} lies outside the curve domain [{min}, {max}]")]
    OutOfRange { x: f64, min: f64, max: f64 },
    #[error("curve CSV: {0}")]
    Csv(String),
    #[error("cannot read curve {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// What the x column of a curve file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveAxis {
    FrequencyHz,
    DistanceM,
}

impl CurveAxis {
    pub fn column(self) -> &'static str {
        match self {
            CurveAxis::FrequencyHz => "frequency_hz",
            CurveAxis::DistanceM => "distance_m",
        }
    }
}

/// Sampled amplitude curve, strictly increasing in x.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseCurve {
    points: Vec<(f64, f64)>,
}

impl ResponseCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        if points.len() < 2 {
            return Err(CurveError::TooFewPoints(points.len()));
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(CurveError::NonFinite(i));
            }
            if i > 0 && x <= points[i - 1].0 {
                return Err(CurveError::NotIncreasing {
                    index: i,
                    prev: points[i - 1].0,
                    x,
                });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Linear interpolation at `x`; error outside the sampled domain.
    pub fn interpolate(&self, x: f64) -> Result<f64, CurveError> {
        let (min, max) = self.domain();
        if !(x >= min && x <= max) {
            return Err(CurveError::OutOfRange { x, min, max });
        }
        let k = self.points.partition_point(|p| p.0 <= x);
        if k == self.points.len() {
            return Ok(self.points[k - 1].1);
        }
        let (x0, y0) = self.points[k - 1];
        if x == x0 {
            return Ok(y0);
        }
        let (x1, y1) = self.points[k];
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// Parses a two-column CSV with a header. The header's first column
    /// decides the axis (`frequency_hz` or `distance_m`).
    pub fn from_csv_str(text: &str) -> Result<(CurveAxis, Self), CurveError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| CurveError::Csv(e.to_string()))?
            .clone();
        let axis = match (headers.get(0), headers.get(1)) {
            (Some("frequency_hz"), Some("amplitude_db")) => CurveAxis::FrequencyHz,
            (Some("distance_m"), Some("amplitude_db")) => CurveAxis::DistanceM,
            _ => {
                return Err(CurveError::Csv(format!(
                    "expected header `frequency_hz,amplitude_db` or `distance_m,amplitude_db`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                )))
            }
        };
        let mut points = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| CurveError::Csv(e.to_string()))?;
            if record.len() != 2 {
                return Err(CurveError::Csv(format!(
                    "row {}: expected 2 columns",
                    line + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| CurveError::Csv(format!("row {}: `{s}`: {e}", line + 1)))
            };
            points.push((parse(&record[0])?, parse(&record[1])?));
        }
        Ok((axis, Self::new(points)?))
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<(CurveAxis, Self), CurveError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CurveError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self, axis: CurveAxis) -> String {
        let mut out = format!("{},amplitude_db\n", axis.column());
        for (x, y) in &self.points {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }
}

/// The bundled synthetic frequency response.
pub fn sample_response_curve() -> ResponseCurve {
    ResponseCurve::from_csv_str(SAMPLE_RESPONSE_CSV)
        .expect("bundled response curve")
        .1
}

/// The bundled synthetic distance attenuation curve.
pub fn sample_attenuation_curve() -> ResponseCurve {
    ResponseCurve::from_csv_str(SAMPLE_ATTENUATION_CSV)
        .expect("bundled attenuation curve")
        .1
}

/// A contiguous frequency interval where the response meets a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityBand {
    pub low: f64,
    pub high: f64,
    pub peak_frequency: f64,
    pub peak_amplitude: f64,
}

impl SensitivityBand {
    /// A band with a designer-chosen peak. Requires `low < high` and the peak
    /// inside.
    pub fn new(low: f64, high: f64, peak_frequency: f64, peak_amplitude: f64) -> Option<Self> {
        (low <= high && low <= peak_frequency && peak_frequency <= high).then_some(Self {
            low,
            high,
            peak_frequency,
            peak_amplitude,
        })
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.low && f <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

impl fmt::Display for SensitivityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{:.1}, {:.1}] Hz, peak {:.1} dB at {:.1} Hz",
            self.low, self.high, self.peak_amplitude, self.peak_frequency
        )
    }
}

struct OpenBand {
    low: f64,
    peak: (f64, f64),
}

impl OpenBand {
    fn offer(&mut self, x: f64, y: f64) {
        if y > self.peak.1 {
            self.peak = (x, y);
        }
    }

    fn close(self, high: f64) -> Option<SensitivityBand> {
        (high > self.low).then_some(SensitivityBand {
            low: self.low,
            high,
            peak_frequency: self.peak.0,
            peak_amplitude: self.peak.1,
        })
    }
}

/// Maximal intervals where the interpolated curve is at or above `threshold`.
/// Edges are located on the connecting line segments; each band reports its
/// highest sample (lowest frequency on ties). Zero-width touches are dropped.
pub fn sensitive_bands(curve: &ResponseCurve, threshold: f64) -> Vec<SensitivityBand> {
    let pts = &curve.points;
    let mut bands = Vec::new();
    let mut open: Option<OpenBand> = None;

    let (x0, y0) = pts[0];
    if y0 >= threshold {
        open = Some(OpenBand {
            low: x0,
            peak: (x0, y0),
        });
    }
    for w in pts.windows(2) {
        let ((xa, ya), (xb, yb)) = (w[0], w[1]);
        let crossing = || xa + (threshold - ya) / (yb - ya) * (xb - xa);
        match open.take() {
            Some(mut band) => {
                if yb >= threshold {
                    band.offer(xb, yb);
                    open = Some(band);
                } else {
                    // ya >= threshold > yb
                    let edge = if ya == threshold { xa } else { crossing() };
                    bands.extend(band.close(edge));
                }
            }
            None => {
                if yb >= threshold {
                    // ya < threshold <= yb
                    let edge = if yb == threshold { xb } else { crossing() };
                    open = Some(OpenBand {
                        low: edge,
                        peak: (xb, yb),
                    });
                }
            }
        }
    }
    if let Some(band) = open {
        bands.extend(band.close(pts[pts.len() - 1].0));
    }
    bands
}

/// Amplitude at distance `d` (m) on an attenuation curve.
pub fn attenuation_at(distance_curve: &ResponseCurve, d: f64) -> Result<f64, CurveError> {
    distance_curve.interpolate(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> ResponseCurve {
        ResponseCurve::new(vec![(1000.0, -70.0), (9000.0, -30.0), (30000.0, -70.0)]).unwrap()
    }

    #[test]
    fn flat_curve_below_threshold() {
        let c = ResponseCurve::new(vec![(0.0, -70.0), (1e5, -70.0)]).unwrap();
        assert!(sensitive_bands(&c, -42.0).is_empty());
    }

    #[test]
    fn triangle_edges_match_line_intersections() {
        let bands = sensitive_bands(&triangle(), -42.0);
        assert_eq!(bands.len(), 1);
        let b = bands[0];
        // rising edge: -70 + 40 (x - 1000)/8000 = -42
        let up = 1000.0 + 28.0 / 40.0 * 8000.0;
        // falling edge: -30 - 40 (x - 9000)/21000 = -42
        let down = 9000.0 + 12.0 / 40.0 * 21000.0;
        assert!((b.low - up).abs() < 1e-9);
        assert!((b.high - down).abs() < 1e-9);
        assert_eq!(b.peak_frequency, 9000.0);
        assert_eq!(b.peak_amplitude, -30.0);
    }

    #[test]
    fn band_open_at_domain_edges() {
        let c = ResponseCurve::new(vec![(0.0, -10.0), (10.0, -50.0), (20.0, -10.0)]).unwrap();
        let bands = sensitive_bands(&c, -30.0);
        assert_eq!(bands.len(), 2);
        assert_eq!(bands[0].low, 0.0);
        assert_eq!(bands[1].high, 20.0);
    }

    #[test]
    fn touching_threshold_is_not_a_band() {
        let c = ResponseCurve::new(vec![(0.0, -50.0), (10.0, -42.0), (20.0, -50.0)]).unwrap();
        assert!(sensitive_bands(&c, -42.0).is_empty());
    }

    #[test]
    fn bundled_curve_has_two_bands() {
        let bands = sensitive_bands(&sample_response_curve(), DEFAULT_THRESHOLD_DB);
        assert_eq!(bands.len(), 2);
        assert_eq!(bands[0].peak_frequency, 9000.0);
        assert_eq!(bands[1].peak_frequency, 150000.0);
    }

    #[test]
    fn attenuation_lookup() {
        let c = ResponseCurve::new(vec![(0.0, -20.0), (0.1, -30.0), (0.2, -36.0)]).unwrap();
        assert_eq!(attenuation_at(&c, 0.1).unwrap(), -30.0);
        assert!((attenuation_at(&c, 0.15).unwrap() - (-33.0)).abs() < 1e-12);
        assert_eq!(attenuation_at(&c, 0.2).unwrap(), -36.0);
        assert!(matches!(
            attenuation_at(&c, 0.25),
            Err(CurveError::OutOfRange { .. })
        ));
        assert!(attenuation_at(&c, -0.01).is_err());
        let s = sample_attenuation_curve();
        assert!(attenuation_at(&s, 0.1).is_ok());
    }

    #[test]
    fn curve_validation() {
        assert!(matches!(
            ResponseCurve::new(vec![(0.0, 1.0)]),
            Err(CurveError::TooFewPoints(1))
        ));
        assert!(ResponseCurve::new(vec![(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(ResponseCurve::new(vec![(0.0, f64::NAN), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn csv_header_required() {
        assert!(ResponseCurve::from_csv_str("1,2\n3,4\n").is_err());
        let (axis, c) = ResponseCurve::from_csv_str("distance_m,amplitude_db\n0,1\n1,0\n").unwrap();
        assert_eq!(axis, CurveAxis::DistanceM);
        assert_eq!(c.points().len(), 2);
        let again = ResponseCurve::from_csv_str(&c.to_csv_string(axis))
            .unwrap()
            .1;
        assert_eq!(again, c);
    }
}
