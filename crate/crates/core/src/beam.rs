//! Cross-section geometry and fixed-free (cantilever) Euler-Bernoulli modes.
//!
//! Natural frequencies come from the closed-form modal solution
//!
//! ```text
//! f_n = (β_n l)² / (2π) · sqrt(E I / (ρ A l⁴))
//! ```
//!
//! where `β_n l` is the n-th positive root of `cos(x)·cosh(x) = −1`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::{units, Material};

#[derive(Debug, Error, PartialEq)]
pub enum BeamError {
    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("hollow inner dimension {inner} must lie strictly between 0 and the outer dimension {outer}")]
    InvalidHollow { inner: f64, outer: f64 },
    #[error("mode index must be at least 1, got {0}")]
    ModeIndex(i64),
    #[error("force must be non-negative, got {0} N")]
    NegativeForce(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// characteristic dimension is the side
    Square,
    /// regular hexagon, characteristic dimension is the side
    Hexagon,
    /// characteristic dimension is the radius
    Circle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Hexagon, Shape::Circle];

    /// Area of a solid section with characteristic dimension `d`.
    fn area(self, d: f64) -> f64 {
        match self {
            Shape::Square => d * d,
            Shape::Hexagon => 1.5 * 3f64.sqrt() * d * d,
            Shape::Circle => PI * d * d,
        }
    }

    /// Centroidal second moment of a solid section, about the axis parallel
    /// to a flat for the polygons.
    fn second_moment(self, d: f64) -> f64 {
        let d4 = d.powi(4);
        match self {
            Shape::Square => d4 / 12.0,
            Shape::Hexagon => 5.0 * 3f64.sqrt() / 16.0 * d4,
            Shape::Circle => PI * d4 / 4.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Hexagon => "hexagon",
            Shape::Circle => "circle",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Shape {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "square" | "s" => Ok(Shape::Square),
            "hexagon" | "hex" | "h" => Ok(Shape::Hexagon),
            "circle" | "c" => Ok(Shape::Circle),
            other => Err(format!("unknown shape `{other}` (square, hexagon, circle)")),
        }
    }
}

/// Beam cross-section, optionally hollowed by a concentric copy of the same shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    shape: Shape,
    /// m
    dimension: f64,
    /// m, same meaning as `dimension`
    inner: Option<f64>,
}

fn check_positive(what: &'static str, value: f64) -> Result<f64, BeamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(BeamError::NonPositive { what, value })
    }
}

impl CrossSection {
    pub fn solid(shape: Shape, dimension: f64) -> Result<Self, BeamError> {
        check_positive("section dimension", dimension)?;
        Ok(Self {
            shape,
            dimension,
            inner: None,
        })
    }

    pub fn square(side: f64) -> Result<Self, BeamError> {
        Self::solid(Shape::Square, side)
    }

    pub fn hexagon(side: f64) -> Result<Self, BeamError> {
        Self::solid(Shape::Hexagon, side)
    }

    pub fn circle(radius: f64) -> Result<Self, BeamError> {
        Self::solid(Shape::Circle, radius)
    }

    /// Hollows the section with an inner dimension of the same shape.
    pub fn hollow(self, inner: f64) -> Result<Self, BeamError> {
        if !(inner.is_finite() && inner > 0.0 && inner < self.dimension) {
            return Err(BeamError::InvalidHollow {
                inner,
                outer: self.dimension,
            });
        }
        Ok(Self {
            inner: Some(inner),
            ..self
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dimension(&self) -> f64 {
        self.dimension
    }

    pub fn inner(&self) -> Option<f64> {
        self.inner
    }

    pub fn is_hollow(&self) -> bool {
        self.inner.is_some()
    }

    /// Wall thickness of a hollow section, measured along the characteristic
    /// dimension. `None` for solid sections.
    pub fn wall(&self) -> Option<f64> {
        self.inner.map(|i| self.dimension - i)
    }
}

impl fmt::Display for CrossSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} mm", self.shape, self.dimension / units::MM)?;
        if let Some(inner) = self.inner {
            write!(f, " (hollow, inner {} mm)", inner / units::MM)?;
        }
        Ok(())
    }
}

/// Cross-sectional area in m².
pub fn area(section: &CrossSection) -> f64 {
    let outer = section.shape.area(section.dimension);
    match section.inner {
        Some(i) => outer - section.shape.area(i),
        None => outer,
    }
}

/// Second moment of area in m⁴.
pub fn second_moment(section: &CrossSection) -> f64 {
    let outer = section.shape.second_moment(section.dimension);
    match section.inner {
        Some(i) => outer - section.shape.second_moment(i),
        None => outer,
    }
}

/// A single beam of the fingerprint array.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamSpec {
    material: Material,
    section: CrossSection,
    /// m
    length: f64,
}

impl BeamSpec {
    pub fn new(material: Material, section: CrossSection, length: f64) -> Result<Self, BeamError> {
        check_positive("beam length", length)?;
        Ok(Self {
            material,
            section,
            length,
        })
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn section(&self) -> &CrossSection {
        &self.section
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeConstant {
    pub mode_index: u32,
    /// Dimensionless product β_n·l.
    pub beta_l: f64,
}

/// `cos(x)·cosh(x) + 1` divided by `cosh(x)`. Same sign as the characteristic
/// function but bounded, so large modes do not overflow.
fn scaled_characteristic(x: f64) -> f64 {
    x.cos() + 1.0 / x.cosh()
}

/// Bisection down to adjacent floats. Returns `None` when the bracket has no
/// sign change.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return Some(lo);
    }
    let f_hi = f(hi);
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn solve_mode(n: u32) -> f64 {
    // The n-th root sits next to (n − 1/2)π; [(n − 1)π, nπ] always brackets
    // exactly one sign change of cos + sech.
    let lo = (n - 1) as f64 * PI;
    let hi = n as f64 * PI;
    bisect(scaled_characteristic, lo, hi).expect("fixed-free characteristic bracket")
}

static MODE_CACHE: OnceLock<Mutex<Vec<f64>>> = OnceLock::new();

/// n-th root of the fixed-free characteristic equation `cos(βl)·cosh(βl) = −1`.
pub fn mode_constant(n: i64) -> Result<ModeConstant, BeamError> {
    if n < 1 || n > u32::MAX as i64 {
        return Err(BeamError::ModeIndex(n));
    }
    let n = n as u32;
    let cache = MODE_CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut roots = cache.lock().unwrap_or_else(|e| e.into_inner());
    // keep the cache small; high modes are recomputed
    if n as usize <= 64 {
        while roots.len() < n as usize {
            let next = roots.len() as u32 + 1;
            roots.push(solve_mode(next));
        }
        Ok(ModeConstant {
            mode_index: n,
            beta_l: roots[n as usize - 1],
        })
    } else {
        drop(roots);
        Ok(ModeConstant {
            mode_index: n,
            beta_l: solve_mode(n),
        })
    }
}

/// Predicted frequency in Hz. For materials quoted with a density range,
/// `min`/`max` span the prediction over that range; otherwise all three
/// values coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPrediction {
    pub nominal: f64,
    pub min: f64,
    pub max: f64,
}

impl FrequencyPrediction {
    pub fn exact(f: f64) -> Self {
        Self {
            nominal: f,
            min: f,
            max: f,
        }
    }

    pub fn is_interval(&self) -> bool {
        self.min != self.max
    }

    /// True when the whole interval lies in `[low, high]`.
    pub fn within(&self, low: f64, high: f64) -> bool {
        self.min >= low && self.max <= high
    }

    /// Distance in Hz from the interval to `[low, high]`; zero when within.
    pub fn distance_outside(&self, low: f64, high: f64) -> f64 {
        (low - self.min).max(0.0).max(self.max - high)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            nominal: self.nominal * k,
            min: self.min * k,
            max: self.max * k,
        }
    }
}

impl fmt::Display for FrequencyPrediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_interval() {
            write!(
                f,
                "{:.1} Hz (range {:.1} to {:.1} Hz)",
                self.nominal, self.min, self.max
            )
        } else {
            write!(f, "{:.1} Hz", self.nominal)
        }
    }
}

/// Frequency of mode `n` at an explicit density, ignoring any density range.
pub fn natural_frequency_at_density(
    beam: &BeamSpec,
    n: i64,
    density: f64,
) -> Result<f64, BeamError> {
    check_positive("density", density)?;
    let beta_l = mode_constant(n)?.beta_l;
    let e = beam.material.youngs_modulus();
    let i = second_moment(&beam.section);
    let a = area(&beam.section);
    let l = beam.length;
    Ok(beta_l * beta_l / (2.0 * PI) * (e * i / (density * a * l.powi(4))).sqrt())
}

/// Natural frequency of mode `n` (1-based).
pub fn natural_frequency(beam: &BeamSpec, n: i64) -> Result<FrequencyPrediction, BeamError> {
    let nominal = natural_frequency_at_density(beam, n, beam.material.density())?;
    Ok(match beam.material.density_range() {
        // frequency falls with density
        Some((rho_min, rho_max)) => FrequencyPrediction {
            nominal,
            min: natural_frequency_at_density(beam, n, rho_max)?,
            max: natural_frequency_at_density(beam, n, rho_min)?,
        },
        None => FrequencyPrediction::exact(nominal),
    })
}

/// Static tip deflection `F l³ / (3 E I)` of a cantilever under end load, in m.
pub fn tip_deflection(beam: &BeamSpec, force: f64) -> Result<f64, BeamError> {
    if !force.is_finite() || force < 0.0 {
        return Err(BeamError::NegativeForce(force));
    }
    let ei = beam.material.youngs_modulus() * second_moment(&beam.section);
    Ok(force * beam.length.powi(3) / (3.0 * ei))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::builtin_materials;
    use approx::assert_relative_eq;

    fn st45b() -> Material {
        builtin_materials().remove(2)
    }

    /// Second moment about the x axis through the centroid of a simple
    /// polygon, via the standard triangulation sums.
    fn polygon_ixx(vertices: &[(f64, f64)]) -> (f64, f64) {
        let n = vertices.len();
        let (mut a2, mut cy_acc, mut ixx) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let (x0, y0) = vertices[k];
            let (x1, y1) = vertices[(k + 1) % n];
            let cross = x0 * y1 - x1 * y0;
            a2 += cross;
            cy_acc += (y0 + y1) * cross;
            ixx += (y0 * y0 + y0 * y1 + y1 * y1) * cross;
        }
        let area = a2 / 2.0;
        let cy = cy_acc / (6.0 * area);
        (area, ixx / 12.0 - area * cy * cy)
    }

    #[test]
    fn solid_areas() {
        assert_relative_eq!(
            area(&CrossSection::square(1e-3).unwrap()),
            1e-6,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            area(&CrossSection::circle(1e-3).unwrap()),
            PI * 1e-6,
            max_relative = 1e-12
        );
        let hollow = CrossSection::square(1e-3).unwrap().hollow(0.5e-3).unwrap();
        assert_relative_eq!(area(&hollow), 7.5e-7, max_relative = 1e-12);
    }

    #[test]
    fn second_moments() {
        assert_relative_eq!(
            second_moment(&CrossSection::square(1e-3).unwrap()),
            8.333_333_333_333e-14,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            second_moment(&CrossSection::circle(1e-3).unwrap()),
            7.853_981_633_974e-13,
            max_relative = 1e-10
        );
    }

    #[test]
    fn hexagon_matches_polygon_oracle() {
        // vertices of a regular hexagon with flats parallel to the x axis
        let s = 1e-3;
        let verts: Vec<(f64, f64)> = (0..6)
            .map(|k| {
                let t = PI / 3.0 * k as f64;
                (s * t.cos(), s * t.sin())
            })
            .collect();
        let (a, ixx) = polygon_ixx(&verts);
        let section = CrossSection::hexagon(s).unwrap();
        assert_relative_eq!(area(&section), a, max_relative = 1e-12);
        assert_relative_eq!(second_moment(&section), ixx, max_relative = 1e-12);
        assert_relative_eq!(ixx, 5.4127e-13, max_relative = 1e-4);
    }

    #[test]
    fn hollow_requires_inner_smaller_than_outer() {
        let sq = CrossSection::square(1e-3).unwrap();
        assert!(sq.hollow(1e-3).is_err());
        assert!(sq.hollow(0.0).is_err());
        assert!(CrossSection::square(-1.0).is_err());
    }

    #[test]
    fn mode_constants() {
        assert!((mode_constant(1).unwrap().beta_l - 1.875104).abs() < 1e-6);
        assert!((mode_constant(2).unwrap().beta_l - 4.694091).abs() < 1e-6);
        assert!((mode_constant(3).unwrap().beta_l - 7.854757).abs() < 1e-6);
        assert_eq!(mode_constant(0), Err(BeamError::ModeIndex(0)));
        assert_eq!(mode_constant(-3), Err(BeamError::ModeIndex(-3)));
    }

    #[test]
    fn mode_constants_increase_and_solve_characteristic() {
        let mut prev = 0.0;
        for n in 1..=80 {
            let b = mode_constant(n).unwrap().beta_l;
            assert!(b > prev);
            prev = b;
            if n <= 5 {
                assert!((b.cos() * b.cosh() + 1.0).abs() < 1e-6, "mode {n}");
            }
            // asymptote (n − 1/2)π
            if n >= 6 {
                assert!((b - (n as f64 - 0.5) * PI).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn st45b_reference_frequency() {
        let beam = BeamSpec::new(st45b(), CrossSection::square(1e-3).unwrap(), 3.5e-3).unwrap();
        let f = natural_frequency(&beam, 1).unwrap();
        assert!(!f.is_interval());
        assert!((f.nominal - 1.702e4).abs() < 10.0, "{f}");
    }

    #[test]
    fn pla_frequency_is_an_interval() {
        let pla = builtin_materials().remove(0);
        let beam = BeamSpec::new(pla, CrossSection::square(1e-3).unwrap(), 4e-3).unwrap();
        let f = natural_frequency(&beam, 1).unwrap();
        assert!(f.min < f.nominal && f.nominal < f.max);
        assert!((f.min - 1.4735e4).abs() < 10.0, "{f}");
        assert!((f.max - 1.5169e4).abs() < 10.0, "{f}");
    }

    #[test]
    fn deflection() {
        let beam = BeamSpec::new(st45b(), CrossSection::square(1e-3).unwrap(), 4e-3).unwrap();
        assert_eq!(tip_deflection(&beam, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            tip_deflection(&beam, 1.0).unwrap(),
            1.28e-4,
            max_relative = 1e-9
        );
        let long = BeamSpec::new(st45b(), CrossSection::square(1e-3).unwrap(), 8e-3).unwrap();
        assert_relative_eq!(
            tip_deflection(&long, 1.0).unwrap(),
            8.0 * tip_deflection(&beam, 1.0).unwrap(),
            max_relative = 1e-12
        );
        assert!(tip_deflection(&beam, -1.0).is_err());
    }

    #[test]
    fn frequency_scales_inverse_square_in_length() {
        let sec = CrossSection::hexagon(0.7e-3).unwrap();
        let a = BeamSpec::new(st45b(), sec, 3e-3).unwrap();
        let b = BeamSpec::new(st45b(), sec, 6e-3).unwrap();
        let fa = natural_frequency(&a, 2).unwrap().nominal;
        let fb = natural_frequency(&b, 2).unwrap().nominal;
        assert_relative_eq!(fa, 4.0 * fb, max_relative = 1e-9);
    }

    #[test]
    fn mm_input_path_matches_si() {
        let sec_si = CrossSection::square(0.8e-3).unwrap();
        let sec_mm = CrossSection::square(0.8 * units::MM).unwrap();
        let a = BeamSpec::new(st45b(), sec_si, 3.7e-3).unwrap();
        let b = BeamSpec::new(st45b(), sec_mm, 3.7 * units::MM).unwrap();
        let fa = natural_frequency(&a, 1).unwrap().nominal;
        let fb = natural_frequency(&b, 1).unwrap().nominal;
        assert_relative_eq!(fa, fb, max_relative = 1e-12);
    }
}
