//! Inverse design of solid square beams.
//!
//! The design space is the (side, length) rectangle, scanned exhaustively on
//! a regular grid. A point is feasible when its whole first-mode frequency
//! prediction (including any density interval) lies inside the target band.
//! Layouts pick, per hand segment, the widest feasible side and then the
//! longest feasible length under the segment's clearance cap.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{self, BeamError, BeamSpec, CrossSection, FrequencyPrediction, Shape};
use crate::materials::{units, Material, MaterialError, PrinterConstraints, SupportMode};
use crate::mic::SensitivityBand;

/// Grid values are snapped to whole nanometres so that e.g. 0.4 mm +
/// 6 × 0.1 mm compares equal to 1.0 mm.
const NM_PER_M: f64 = 1e9;

/// Lengths within this distance of a clearance cap count as meeting it.
const CAP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("{0} range is empty or invalid: [{1}, {2}]")]
    InvalidRange(&'static str, f64, f64),
    #[error("minimum side {side} m is below the printer minimum {min} m for {mode:?} printing")]
    BelowPrinterMinimum {
        side: f64,
        min: f64,
        mode: SupportMode,
    },
    #[error(
        "grid step {step} m must be positive and smaller than the {axis} range width {width} m"
    )]
    InvalidStep {
        step: f64,
        axis: &'static str,
        width: f64,
    },
    #[error(
        "no feasible design in band [{band_low:.1}, {band_high:.1}] Hz; nearest miss: side {side_mm:.3} mm, \
         length {length_mm:.3} mm at {frequency}"
    )]
    EmptyRegion {
        band_low: f64,
        band_high: f64,
        side_mm: f64,
        length_mm: f64,
        frequency: FrequencyPrediction,
    },
    #[error("segment {segment}: no feasible length at or below the {cap_mm:.3} mm cap")]
    NoPointUnderCap { segment: Segment, cap_mm: f64 },
    #[error("sweep needs at least 2 steps, got {0}")]
    TooFewSteps(usize),
    #[error("no built-in range preset for material `{0}`")]
    NoPreset(String),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Hand segments that carry a fingerprint patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    FingerTip,
    FingerPhalanx,
    ThumbPhalanx,
    Palm,
}

impl Segment {
    pub const ALL: [Segment; 4] = [
        Segment::FingerTip,
        Segment::FingerPhalanx,
        Segment::ThumbPhalanx,
        Segment::Palm,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Segment::FingerTip => "finger_tip",
            Segment::FingerPhalanx => "finger_phalanx",
            Segment::ThumbPhalanx => "thumb_phalanx",
            Segment::Palm => "palm",
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Segment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "tip" | "finger_tip" => Ok(Segment::FingerTip),
            "phalanx" | "finger_phalanx" | "finger_phalanges" => Ok(Segment::FingerPhalanx),
            "thumb" | "thumb_phalanx" | "thumb_phalanges" => Ok(Segment::ThumbPhalanx),
            "palm" => Ok(Segment::Palm),
            other => Err(format!(
                "unknown segment `{other}` (tip, phalanx, thumb, palm)"
            )),
        }
    }
}

/// Per-segment clearance caps on beam length, in metres.
pub type SegmentCaps = BTreeMap<Segment, f64>;

/// The microphone's low sensitive band, [3.2, 26] kHz with its 9 kHz peak.
pub fn default_target_band() -> SensitivityBand {
    SensitivityBand {
        low: 3.2 * units::KHZ,
        high: 26.0 * units::KHZ,
        peak_frequency: 9.0 * units::KHZ,
        peak_amplitude: -30.0,
    }
}

/// Inclusive closed interval in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn mm(min: f64, max: f64) -> Self {
        Self::new(min * units::MM, max * units::MM)
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    fn valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.min <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignConstraints {
    pub material: Material,
    pub printer: PrinterConstraints,
    pub support: SupportMode,
    pub target_band: SensitivityBand,
    /// Hz
    pub target_peak: f64,
    pub side_range: Range,
    pub length_range: Range,
}

impl DesignConstraints {
    pub fn new(
        material: Material,
        printer: PrinterConstraints,
        support: SupportMode,
        target_band: SensitivityBand,
        side_range: Range,
        length_range: Range,
    ) -> Result<Self, DesignError> {
        if !side_range.valid() {
            return Err(DesignError::InvalidRange(
                "side",
                side_range.min,
                side_range.max,
            ));
        }
        if !length_range.valid() {
            return Err(DesignError::InvalidRange(
                "length",
                length_range.min,
                length_range.max,
            ));
        }
        let min = printer.min_side(support);
        // snapped comparison: 0.4 mm typed by a user must pass a 0.4 mm minimum
        if snap(side_range.min) < snap(min) {
            return Err(DesignError::BelowPrinterMinimum {
                side: side_range.min,
                min,
                mode: support,
            });
        }
        Ok(Self {
            target_peak: target_band.peak_frequency,
            material,
            printer,
            support,
            target_band,
            side_range,
            length_range,
        })
    }

    /// Side and length ranges for solid square beams of the given material
    /// (PLA or ST45B: side 0.4 to 1.0 mm, length 3.4 to 4.0 mm; TPU: side
    /// 2.0 to 2.6 mm, length 1.4 to 2.0 mm), default band, supported printing.
    pub fn reference_ranges(material: &Material) -> Result<Self, DesignError> {
        let (side, length) = reference_ranges_mm(material.name())
            .ok_or_else(|| DesignError::NoPreset(material.name().to_string()))?;
        Self::new(
            material.clone(),
            PrinterConstraints::for_material(material),
            SupportMode::Supported,
            default_target_band(),
            side,
            length,
        )
    }

    /// Constraints used for per-segment layouts. Same as [`Self::reference_ranges`]
    /// except that the rigid materials' length range starts at 3.2 mm so the
    /// shortest (thumb) clearance cap is reachable.
    pub fn layout_ranges(material: &Material) -> Result<Self, DesignError> {
        let mut c = Self::reference_ranges(material)?;
        if is_rigid_preset(material.name()) {
            c.length_range = Range::mm(3.2, 4.0);
        }
        Ok(c)
    }
}

fn preset_key(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_uppercase())
        .collect()
}

fn is_rigid_preset(name: &str) -> bool {
    matches!(preset_key(name).as_str(), "PLA" | "ST45B")
}

fn reference_ranges_mm(name: &str) -> Option<(Range, Range)> {
    match preset_key(name).as_str() {
        "PLA" | "ST45B" => Some((Range::mm(0.4, 1.0), Range::mm(3.4, 4.0))),
        "TPU" => Some((Range::mm(2.0, 2.6), Range::mm(1.4, 2.0))),
        _ => None,
    }
}

/// Clearance caps of the final hand design, in metres.
pub fn preset_caps(material: &Material) -> Option<SegmentCaps> {
    let mm = match preset_key(material.name()).as_str() {
        "PLA" | "ST45B" => [4.0, 3.5, 3.2, 3.5],
        "TPU" => [2.0, 1.8, 1.6, 1.8],
        _ => return None,
    };
    Some(
        Segment::ALL
            .into_iter()
            .zip(mm.map(|v| v * units::MM))
            .collect(),
    )
}

fn snap(x: f64) -> f64 {
    (x * NM_PER_M).round() / NM_PER_M
}

/// Regular grid over a closed range, endpoints included when the width is a
/// multiple of the step.
#[derive(Debug, Clone, Copy)]
struct GridAxis {
    min: f64,
    step: f64,
    count: usize,
}

impl GridAxis {
    fn new(range: Range, step: f64, axis: &'static str) -> Result<Self, DesignError> {
        let width = range.width();
        if !(step.is_finite() && step > 0.0 && step < width) {
            return Err(DesignError::InvalidStep { step, axis, width });
        }
        let count = (width / step + 1e-9).floor() as usize + 1;
        Ok(Self {
            min: range.min,
            step,
            count,
        })
    }

    fn value(&self, i: usize) -> f64 {
        snap(self.min + i as f64 * self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasiblePoint {
    /// m
    pub side: f64,
    /// m
    pub length: f64,
    pub frequency: FrequencyPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleRegion {
    /// Feasible points in grid order (side-major).
    pub points: Vec<FeasiblePoint>,
    pub side_envelope: Range,
    pub length_envelope: Range,
    /// Number of grid points evaluated.
    pub evaluated: usize,
}

impl FeasibleRegion {
    pub fn contains(&self, side: f64, length: f64) -> bool {
        self.points
            .iter()
            .any(|p| p.side == snap(side) && p.length == snap(length))
    }
}

fn square_beam(material: &Material, side: f64, length: f64) -> Result<BeamSpec, BeamError> {
    BeamSpec::new(material.clone(), CrossSection::square(side)?, length)
}

/// First-mode frequency of a solid square beam.
pub fn square_beam_frequency(
    material: &Material,
    side: f64,
    length: f64,
) -> Result<FrequencyPrediction, BeamError> {
    beam::natural_frequency(&square_beam(material, side, length)?, 1)
}

/// Exhaustive scan of the (side, length) grid.
pub fn feasible_region(
    constraints: &DesignConstraints,
    grid_step: f64,
) -> Result<FeasibleRegion, DesignError> {
    let sides = GridAxis::new(constraints.side_range, grid_step, "side")?;
    let lengths = GridAxis::new(constraints.length_range, grid_step, "length")?;
    let band = &constraints.target_band;

    let evaluated: Vec<FeasiblePoint> = (0..sides.count * lengths.count)
        .into_par_iter()
        .map(|idx| {
            let side = sides.value(idx / lengths.count);
            let length = lengths.value(idx % lengths.count);
            square_beam_frequency(&constraints.material, side, length).map(|frequency| {
                FeasiblePoint {
                    side,
                    length,
                    frequency,
                }
            })
        })
        .collect::<Result<_, _>>()?;

    let total = evaluated.len();
    let (points, misses): (Vec<_>, Vec<_>) = evaluated
        .into_iter()
        .partition(|p| p.frequency.within(band.low, band.high));

    if points.is_empty() {
        let nearest = misses
            .iter()
            .min_by(|a, b| {
                let da = a.frequency.distance_outside(band.low, band.high);
                let db = b.frequency.distance_outside(band.low, band.high);
                da.total_cmp(&db)
            })
            .expect("grid has at least one point");
        return Err(DesignError::EmptyRegion {
            band_low: band.low,
            band_high: band.high,
            side_mm: nearest.side / units::MM,
            length_mm: nearest.length / units::MM,
            frequency: nearest.frequency,
        });
    }

    let envelope = |get: fn(&FeasiblePoint) -> f64| {
        let (lo, hi) = points
            .iter()
            .map(get)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        Range::new(lo, hi)
    };
    Ok(FeasibleRegion {
        side_envelope: envelope(|p| p.side),
        length_envelope: envelope(|p| p.length),
        points,
        evaluated: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentLayout {
    pub segment: Segment,
    /// m
    pub side: f64,
    /// m
    pub length: f64,
    /// Centre-to-centre spacing; beams are separated by one side width.
    pub pitch: f64,
    pub predicted_frequency: FrequencyPrediction,
}

#[derive(Debug)]
pub struct LayoutReport {
    pub material: String,
    pub layouts: Vec<SegmentLayout>,
    pub failures: Vec<DesignError>,
}

/// Chooses one beam per segment from the feasible region: the largest side
/// that has a feasible length under the segment cap, then the longest such
/// length. A segment without any point under its cap fails on its own.
pub fn segment_layouts(
    constraints: &DesignConstraints,
    caps: &SegmentCaps,
    grid_step: f64,
) -> Result<LayoutReport, DesignError> {
    let region = feasible_region(constraints, grid_step)?;
    let mut layouts = Vec::new();
    let mut failures = Vec::new();
    for (&segment, &cap) in caps {
        let best = region
            .points
            .iter()
            .filter(|p| p.length <= cap + CAP_TOLERANCE)
            .max_by(|a, b| {
                a.side
                    .total_cmp(&b.side)
                    .then(a.length.total_cmp(&b.length))
            });
        match best {
            Some(p) => layouts.push(SegmentLayout {
                segment,
                side: p.side,
                length: p.length,
                pitch: 2.0 * p.side,
                predicted_frequency: p.frequency,
            }),
            None => failures.push(DesignError::NoPointUnderCap {
                segment,
                cap_mm: cap / units::MM,
            }),
        }
    }
    Ok(LayoutReport {
        material: constraints.material.name().to_string(),
        layouts,
        failures,
    })
}

/// Plain-text rendering of a layout report.
pub fn render_layout_report(report: &LayoutReport, constraints: &DesignConstraints) -> String {
    let mut out = String::new();
    let band = &constraints.target_band;
    let _ = writeln!(out, "Fingerprint beam layout: {}", report.material);
    let _ = writeln!(
        out,
        "target band [{:.1}, {:.1}] kHz, peak {:.1} kHz",
        band.low / units::KHZ,
        band.high / units::KHZ,
        constraints.target_peak / units::KHZ
    );
    let _ = writeln!(
        out,
        "side range [{:.2}, {:.2}] mm, length range [{:.2}, {:.2}] mm",
        constraints.side_range.min / units::MM,
        constraints.side_range.max / units::MM,
        constraints.length_range.min / units::MM,
        constraints.length_range.max / units::MM
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<16} {:>9} {:>11} {:>9} {:>14}",
        "segment", "side_mm", "length_mm", "pitch_mm", "f1_khz"
    );
    for l in &report.layouts {
        let f = if l.predicted_frequency.is_interval() {
            format!(
                "{:.2}-{:.2}",
                l.predicted_frequency.min / units::KHZ,
                l.predicted_frequency.max / units::KHZ
            )
        } else {
            format!("{:.2}", l.predicted_frequency.nominal / units::KHZ)
        };
        let _ = writeln!(
            out,
            "{:<16} {:>9.2} {:>11.2} {:>9.2} {:>14}",
            l.segment.label(),
            l.side / units::MM,
            l.length / units::MM,
            l.pitch / units::MM,
            f
        );
    }
    for e in &report.failures {
        let _ = writeln!(out, "FAILED {e}");
    }
    out
}

/// Columns: `side_mm,length_mm,frequency_hz,frequency_min_hz,frequency_max_hz`.
pub fn write_region_csv<W: Write>(region: &FeasibleRegion, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "side_mm",
        "length_mm",
        "frequency_hz",
        "frequency_min_hz",
        "frequency_max_hz",
    ])?;
    for p in &region.points {
        w.write_record([
            format!("{:.4}", p.side / units::MM),
            format!("{:.4}", p.length / units::MM),
            format!("{:.3}", p.frequency.nominal),
            format!("{:.3}", p.frequency.min),
            format!("{:.3}", p.frequency.max),
        ])?;
    }
    w.flush()
}

/// Columns: `segment,side_mm,length_mm,pitch_mm,frequency_hz,frequency_min_hz,frequency_max_hz`.
pub fn write_layouts_csv<W: Write>(report: &LayoutReport, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "segment",
        "side_mm",
        "length_mm",
        "pitch_mm",
        "frequency_hz",
        "frequency_min_hz",
        "frequency_max_hz",
    ])?;
    for l in &report.layouts {
        w.write_record([
            l.segment.label().to_string(),
            format!("{:.4}", l.side / units::MM),
            format!("{:.4}", l.length / units::MM),
            format!("{:.4}", l.pitch / units::MM),
            format!("{:.3}", l.predicted_frequency.nominal),
            format!("{:.3}", l.predicted_frequency.min),
            format!("{:.3}", l.predicted_frequency.max),
        ])?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub shape: Shape,
    /// characteristic dimension, m
    pub dimension: f64,
    pub hollow_inner: Option<f64>,
    /// m
    pub length: f64,
    pub frequency: FrequencyPrediction,
}

/// Horizontal reference lines for a sweep plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepAnnotation {
    pub label: &'static str,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub material: String,
    pub rows: Vec<SweepRow>,
    pub annotations: Vec<SweepAnnotation>,
}

/// First-mode frequency of each section over `steps` evenly spaced lengths,
/// one series per section. Degenerate length ranges give one row per section.
pub fn frequency_sweep(
    material: &Material,
    sections: &[CrossSection],
    lengths: Range,
    steps: usize,
    band: &SensitivityBand,
) -> Result<SweepTable, DesignError> {
    if steps < 2 {
        return Err(DesignError::TooFewSteps(steps));
    }
    if !lengths.valid() {
        return Err(DesignError::InvalidRange(
            "length",
            lengths.min,
            lengths.max,
        ));
    }
    let grid: Vec<f64> = if lengths.width() == 0.0 {
        vec![lengths.min]
    } else {
        (0..steps)
            .map(|k| lengths.min + lengths.width() * k as f64 / (steps - 1) as f64)
            .collect()
    };
    let mut rows = Vec::with_capacity(sections.len() * grid.len());
    for section in sections {
        for &length in &grid {
            let spec = BeamSpec::new(material.clone(), *section, length)?;
            rows.push(SweepRow {
                shape: section.shape(),
                dimension: section.dimension(),
                hollow_inner: section.inner(),
                length,
                frequency: beam::natural_frequency(&spec, 1)?,
            });
        }
    }
    Ok(SweepTable {
        material: material.name().to_string(),
        rows,
        annotations: vec![
            SweepAnnotation {
                label: "band_low",
                frequency: band.low,
            },
            SweepAnnotation {
                label: "band_high",
                frequency: band.high,
            },
            SweepAnnotation {
                label: "band_peak",
                frequency: band.peak_frequency,
            },
        ],
    })
}

/// Long-format table. Columns:
/// `series,shape,dimension_mm,inner_mm,length_mm,frequency_hz,frequency_min_hz,frequency_max_hz`.
/// Series are `shape_dim[_inner]` in mm. Annotation rows have an empty
/// shape and the label in `series`.
pub fn write_sweep_csv<W: Write>(table: &SweepTable, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "series",
        "shape",
        "dimension_mm",
        "inner_mm",
        "length_mm",
        "frequency_hz",
        "frequency_min_hz",
        "frequency_max_hz",
    ])?;
    for r in &table.rows {
        let series = match r.hollow_inner {
            Some(inner) => format!(
                "{}_{:.3}_{:.3}",
                r.shape.label(),
                r.dimension / units::MM,
                inner / units::MM
            ),
            None => format!("{}_{:.3}", r.shape.label(), r.dimension / units::MM),
        };
        w.write_record([
            series,
            r.shape.label().to_string(),
            format!("{:.4}", r.dimension / units::MM),
            r.hollow_inner
                .map(|i| format!("{:.4}", i / units::MM))
                .unwrap_or_default(),
            format!("{:.4}", r.length / units::MM),
            format!("{:.3}", r.frequency.nominal),
            format!("{:.3}", r.frequency.min),
            format!("{:.3}", r.frequency.max),
        ])?;
    }
    for a in &table.annotations {
        let f = format!("{:.3}", a.frequency);
        w.write_record([a.label, "", "", "", "", f.as_str(), f.as_str(), f.as_str()])?;
    }
    w.flush()
}
