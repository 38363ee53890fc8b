//! Printable materials, printer process limits and the robot hand envelope.
//!
//! Everything here is stored in SI units (m, kg, s, Pa). The material config
//! file and the CLI speak g/cm³, MPa and mm; [`units`] holds the only
//! conversion factors used at those boundaries.
//!
//! # Material config grammar
//!
//! The config is a TOML document with one table per material. The table name
//! is the material name; recognised keys are
//!
//! ```toml
//! [PLA]
//! density_g_cm3 = 1.205              # optional when a range is given
//! density_range_g_cm3 = [1.17, 1.24] # optional
//! youngs_modulus_mpa = 2641.0
//! ```
//!
//! Any other key is rejected. Entries override builtins with the same name.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Conversion factors between config/CLI units and SI.
pub mod units {
    /// metres per millimetre
    pub const MM: f64 = 1e-3;
    /// kg/m³ per g/cm³
    pub const G_PER_CM3: f64 = 1e3;
    /// pascals per megapascal
    pub const MPA: f64 = 1e6;
    /// hertz per kilohertz
    pub const KHZ: f64 = 1e3;
    /// kilograms per gram
    pub const GRAM: f64 = 1e-3;
}

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("material `{material}`: `{key}` must be positive and finite, got {value}")]
    NonPositive {
        material: String,
        key: &'static str,
        value: f64,
    },
    #[error("material `{material}`: `{key}` is malformed: {reason}")]
    Malformed {
        material: String,
        key: String,
        reason: String,
    },
    #[error(
        "material `{material}`: density {density} kg/m³ lies outside its range [{min}, {max}]"
    )]
    DensityOutsideRange {
        material: String,
        density: f64,
        min: f64,
        max: f64,
    },
    #[error("unknown material `{0}`")]
    Unknown(String),
    #[error("cannot read material config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("material config is not valid TOML: {0}")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("printer constraint `{key}` must be positive, got {value} m")]
    NonPositive { key: &'static str, value: f64 },
    #[error("min_side_supported ({supported} m) exceeds min_side_unsupported ({unsupported} m)")]
    SupportOrder { supported: f64, unsupported: f64 },
    #[error("hand spec `{key}` must be positive, got {value}")]
    HandNonPositive { key: &'static str, value: f64 },
    #[error("force code {0} exceeds the 12-bit ceiling 4095")]
    ForceCode(u32),
}

/// A printable material.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Material {
    name: String,
    /// kg/m³
    density: f64,
    /// Pa
    youngs_modulus: f64,
    /// kg/m³, for materials quoted as a range
    density_range: Option<(f64, f64)>,
}

fn positive(material: &str, key: &'static str, value: f64) -> Result<f64, MaterialError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(MaterialError::NonPositive {
            material: material.to_string(),
            key,
            value,
        })
    }
}

impl Material {
    /// Builds a material from SI values.
    pub fn new(
        name: impl Into<String>,
        density: f64,
        youngs_modulus: f64,
    ) -> Result<Self, MaterialError> {
        let name = name.into();
        positive(&name, "density", density)?;
        positive(&name, "youngs_modulus", youngs_modulus)?;
        Ok(Self {
            name,
            density,
            youngs_modulus,
            density_range: None,
        })
    }

    /// Material whose density is only known to lie in `[min, max]` kg/m³.
    /// The nominal density is the midpoint.
    pub fn with_density_range(
        name: impl Into<String>,
        min: f64,
        max: f64,
        youngs_modulus: f64,
    ) -> Result<Self, MaterialError> {
        let name = name.into();
        positive(&name, "density_range", min)?;
        positive(&name, "density_range", max)?;
        if min > max {
            return Err(MaterialError::Malformed {
                material: name,
                key: "density_range".into(),
                reason: format!("min {min} > max {max}"),
            });
        }
        let mut m = Self::new(name, 0.5 * (min + max), youngs_modulus)?;
        m.density_range = Some((min, max));
        Ok(m)
    }

    /// Replaces the nominal density, keeping the range check.
    pub fn with_nominal_density(mut self, density: f64) -> Result<Self, MaterialError> {
        positive(&self.name, "density", density)?;
        if let Some((min, max)) = self.density_range {
            if density < min || density > max {
                return Err(MaterialError::DensityOutsideRange {
                    material: self.name,
                    density,
                    min,
                    max,
                });
            }
        }
        self.density = density;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Nominal density in kg/m³.
    pub fn density(&self) -> f64 {
        self.density
    }

    /// Young's modulus in Pa.
    pub fn youngs_modulus(&self) -> f64 {
        self.youngs_modulus
    }

    pub fn density_range(&self) -> Option<(f64, f64)> {
        self.density_range
    }

    /// Copy of this material with a different Young's modulus.
    pub fn with_youngs_modulus(&self, youngs_modulus: f64) -> Result<Self, MaterialError> {
        positive(&self.name, "youngs_modulus", youngs_modulus)?;
        Ok(Self {
            youngs_modulus,
            ..self.clone()
        })
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (E = {} MPa, rho = {} g/cm3",
            self.name,
            self.youngs_modulus / units::MPA,
            self.density / units::G_PER_CM3
        )?;
        if let Some((lo, hi)) = self.density_range {
            write!(
                f,
                " in [{}, {}]",
                lo / units::G_PER_CM3,
                hi / units::G_PER_CM3
            )?;
        }
        write!(f, ")")
    }
}

/// PLA, TPU and ST45B resin, in that order.
pub fn builtin_materials() -> Vec<Material> {
    vec![
        Material::with_density_range("PLA", 1170.0, 1240.0, 2641.0 * units::MPA)
            .expect("builtin PLA constants"),
        Material::new("TPU", 1220.0, 9.0 * units::MPA).expect("builtin TPU constants"),
        Material::new("ST45B", 1200.0, 2000.0 * units::MPA).expect("builtin ST45B constants"),
    ]
}

/// Case-insensitive lookup that also ignores spaces, so `"ST 45B"` finds `ST45B`.
pub fn find_material<'a>(
    materials: &'a [Material],
    name: &str,
) -> Result<&'a Material, MaterialError> {
    let key = normalize_name(name);
    materials
        .iter()
        .find(|m| normalize_name(&m.name) == key)
        .ok_or_else(|| MaterialError::Unknown(name.to_string()))
}

fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Reads a material config file and merges it over the builtins.
pub fn load_material_config(path: impl AsRef<Path>) -> Result<Vec<Material>, MaterialError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MaterialError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_material_config(&text)
}

/// Parses config text and merges it over the builtins. User entries with a
/// builtin's name replace it in place; new names are appended in file order.
pub fn parse_material_config(text: &str) -> Result<Vec<Material>, MaterialError> {
    let mut merged = builtin_materials();
    for user in parse_config_entries(text)? {
        match merged
            .iter_mut()
            .find(|m| normalize_name(&m.name) == normalize_name(&user.name))
        {
            Some(slot) => *slot = user,
            None => merged.push(user),
        }
    }
    Ok(merged)
}

/// Parses only the entries present in the config text, without builtins.
pub fn parse_config_entries(text: &str) -> Result<Vec<Material>, MaterialError> {
    // toml::Table keeps keys sorted; preserve file order by walking the raw
    // document for table headers.
    let table: toml::Table =
        toml::from_str(text).map_err(|e| MaterialError::Parse(e.to_string()))?;
    let mut order: Vec<String> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('[') {
            if let Some(name) = rest.strip_suffix(']') {
                let name = name.trim().trim_matches('"').to_string();
                if table.contains_key(&name) && !order.contains(&name) {
                    order.push(name);
                }
            }
        }
    }
    for key in table.keys() {
        if !order.contains(key) {
            order.push(key.clone());
        }
    }

    order
        .iter()
        .map(|name| parse_entry(name, &table[name]))
        .collect()
}

fn parse_entry(name: &str, value: &toml::Value) -> Result<Material, MaterialError> {
    let malformed = |key: &str, reason: String| MaterialError::Malformed {
        material: name.to_string(),
        key: key.to_string(),
        reason,
    };
    let block = value
        .as_table()
        .ok_or_else(|| malformed(name, "expected a [material] table".into()))?;

    let number = |key: &str, v: &toml::Value| -> Result<f64, MaterialError> {
        v.as_float()
            .or_else(|| v.as_integer().map(|i| i as f64))
            .ok_or_else(|| malformed(key, format!("expected a number, got {v}")))
    };

    let mut density = None;
    let mut range = None;
    let mut modulus = None;
    for (key, v) in block {
        match key.as_str() {
            "density_g_cm3" => density = Some(number(key, v)? * units::G_PER_CM3),
            "youngs_modulus_mpa" => modulus = Some(number(key, v)? * units::MPA),
            "density_range_g_cm3" => {
                let arr = v
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| malformed(key, "expected [min, max]".into()))?;
                range = Some((
                    number(key, &arr[0])? * units::G_PER_CM3,
                    number(key, &arr[1])? * units::G_PER_CM3,
                ));
            }
            other => return Err(malformed(other, "unknown key".into())),
        }
    }

    let modulus = modulus.ok_or_else(|| malformed("youngs_modulus_mpa", "missing".into()))?;
    positive(name, "youngs_modulus", modulus)?;
    if let Some(d) = density {
        positive(name, "density", d)?;
    }
    match (density, range) {
        (_, Some((lo, hi))) => {
            let m = Material::with_density_range(name, lo, hi, modulus)?;
            match density {
                Some(d) => m.with_nominal_density(d),
                None => Ok(m),
            }
        }
        (Some(d), None) => Material::new(name, d, modulus),
        (None, None) => Err(malformed("density_g_cm3", "missing".into())),
    }
}

/// Renders materials in config units. Reading the result back reproduces the
/// SI values up to floating-point conversion error.
pub fn materials_to_config(materials: &[Material]) -> String {
    let mut out = String::new();
    for m in materials {
        out.push_str(&format!("[\"{}\"]\n", m.name));
        out.push_str(&format!(
            "density_g_cm3 = {:?}\n",
            m.density / units::G_PER_CM3
        ));
        if let Some((lo, hi)) = m.density_range {
            out.push_str(&format!(
                "density_range_g_cm3 = [{:?}, {:?}]\n",
                lo / units::G_PER_CM3,
                hi / units::G_PER_CM3
            ));
        }
        out.push_str(&format!(
            "youngs_modulus_mpa = {:?}\n\n",
            m.youngs_modulus / units::MPA
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrintProcess {
    #[serde(rename = "FDM")]
    Fdm,
    #[serde(rename = "SLA")]
    Sla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    Supported,
    Unsupported,
}

/// Minimum feature sizes a printer can reproduce, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrinterConstraints {
    process: PrintProcess,
    min_side_supported: f64,
    min_side_unsupported: f64,
    min_hole_diameter: f64,
}

impl PrinterConstraints {
    pub fn new(
        process: PrintProcess,
        min_side_supported: f64,
        min_side_unsupported: f64,
        min_hole_diameter: f64,
    ) -> Result<Self, ConstraintError> {
        for (key, value) in [
            ("min_side_supported", min_side_supported),
            ("min_side_unsupported", min_side_unsupported),
            ("min_hole_diameter", min_hole_diameter),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConstraintError::NonPositive { key, value });
            }
        }
        if min_side_supported > min_side_unsupported {
            return Err(ConstraintError::SupportOrder {
                supported: min_side_supported,
                unsupported: min_side_unsupported,
            });
        }
        Ok(Self {
            process,
            min_side_supported,
            min_side_unsupported,
            min_hole_diameter,
        })
    }

    /// Beam width ≥ 0.4 mm supported, ≥ 0.6 mm unsupported, holes ≥ 0.75 mm.
    pub fn guideline(process: PrintProcess) -> Self {
        Self::new(process, 0.4 * units::MM, 0.6 * units::MM, 0.75 * units::MM)
            .expect("guideline constants")
    }

    /// Usual process for a builtin material: SLA for resins, FDM otherwise.
    pub fn for_material(material: &Material) -> Self {
        if normalize_name(material.name()).starts_with("st45") {
            Self::guideline(PrintProcess::Sla)
        } else {
            Self::guideline(PrintProcess::Fdm)
        }
    }

    pub fn process(&self) -> PrintProcess {
        self.process
    }

    pub fn min_side(&self, mode: SupportMode) -> f64 {
        match mode {
            SupportMode::Supported => self.min_side_supported,
            SupportMode::Unsupported => self.min_side_unsupported,
        }
    }

    pub fn min_hole_diameter(&self) -> f64 {
        self.min_hole_diameter
    }
}

/// A 12-bit force setting of the hand. These are opaque controller codes and
/// have no known mapping to newtons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ForceCode(u16);

impl ForceCode {
    pub const MAX: u16 = 4095;

    pub fn new(code: u32) -> Result<Self, ConstraintError> {
        if code > Self::MAX as u32 {
            Err(ConstraintError::ForceCode(code))
        } else {
            Ok(Self(code as u16))
        }
    }

    pub fn get(self) -> u16 {
        self.0
    }
}

impl TryFrom<u32> for ForceCode {
    type Error = ConstraintError;
    fn try_from(code: u32) -> Result<Self, Self::Error> {
        Self::new(code)
    }
}

impl From<ForceCode> for u32 {
    fn from(code: ForceCode) -> u32 {
        code.0 as u32
    }
}

impl fmt::Display for ForceCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Operating envelope of the robot hand, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotHandSpec {
    /// m/s
    pub max_velocity: f64,
    /// N·m
    pub torque_at_max_velocity: f64,
    /// N·m
    pub max_force_torque: f64,
    /// m/s
    pub velocity_at_max_force: f64,
    /// kg
    pub finger_mass: f64,
    /// kg
    pub thumb_mass: f64,
    pub force_code_max: ForceCode,
}

impl RobotHandSpec {
    /// Estimated envelope of the RH8D adult hand: 953.3 mm/s at 134.5 N·mm,
    /// 473.5 N·mm at 270.7 mm/s, fingers 10.9 g, thumb 8.9 g.
    pub fn rh8d() -> Self {
        Self {
            max_velocity: 953.3 * units::MM,
            torque_at_max_velocity: 134.5 * units::MM,
            max_force_torque: 473.5 * units::MM,
            velocity_at_max_force: 270.7 * units::MM,
            finger_mass: 10.9 * units::GRAM,
            thumb_mass: 8.9 * units::GRAM,
            force_code_max: ForceCode(ForceCode::MAX),
        }
    }

    pub fn validate(&self) -> Result<(), ConstraintError> {
        for (key, value) in [
            ("max_velocity", self.max_velocity),
            ("torque_at_max_velocity", self.torque_at_max_velocity),
            ("max_force_torque", self.max_force_torque),
            ("velocity_at_max_force", self.velocity_at_max_force),
            ("finger_mass", self.finger_mass),
            ("thumb_mass", self.thumb_mass),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConstraintError::HandNonPositive { key, value });
            }
        }
        Ok(())
    }
}
