//! JSON manifest describing a haptic dataset: objects, repeated
//! observations, and per exploration procedure the audio file of each
//! microphone channel.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "fingerprint_material": "ST45B",
//!   "objects": [
//!     { "id": "apple", "name": "porcelain apple", "material_class": "porcelain",
//!       "image_path": "images/apple.jpg" }
//!   ],
//!   "observations": [
//!     { "object_id": "apple", "repetition": 1,
//!       "procedures": [
//!         { "procedure": "LateralMotion", "force_codes": [400],
//!           "channel_files": { "Left": "apple/1/lm_left.wav", "Palm": "apple/1/lm_palm.wav" },
//!           "motor_telemetry_path": "apple/1/lm_motors.csv" }
//!       ] }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. An observation
//! may override `fingerprint_material`; baseline recordings use `Default`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::wav::{read_wav, WavError};
use crate::materials::ForceCode;
use crate::signal::{Microphone, Procedure, Recording, RecordingMeta};

pub const SCHEMA_VERSION: u32 = 1;

/// Observations per object in the reference dataset.
pub const OBSERVATIONS_PER_OBJECT: usize = 5;

/// Default Enclosure hold time, s.
pub const ENCLOSURE_DURATION_S: f64 = 2.0;

pub const LATERAL_MOTION_FORCE: u16 = 400;
pub const ENCLOSURE_FORCE: u16 = 300;
pub const PRESSURE_FORCES: [u16; 4] = [400, 500, 600, 700];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest does not match the schema: {0}")]
    Schema(String),
    #[error("manifest has {} error(s):\n  {}", .errors.len(), .errors.join("\n  "))]
    Invalid {
        errors: Vec<String>,
        warnings: Vec<String>,
    },
    #[error("{path}: {source}")]
    Audio {
        path: String,
        #[source]
        source: WavError,
    },
    #[error("loaded {loaded} recordings but the manifest declares {declared}")]
    CountMismatch { declared: usize, loaded: usize },
    #[error("mapping file: {0}")]
    Mapping(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub id: String,
    pub name: String,
    pub material_class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureRecord {
    pub procedure: Procedure,
    pub force_codes: Vec<ForceCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    pub channel_files: BTreeMap<Microphone, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor_telemetry_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub object_id: String,
    pub repetition: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint_material: Option<String>,
    pub procedures: Vec<ProcedureRecord>,
}

fn default_fingerprint() -> String {
    "ST45B".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    #[serde(default = "default_fingerprint")]
    pub fingerprint_material: String,
    pub objects: Vec<ObjectEntry>,
    pub observations: Vec<Observation>,
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        serde_json::from_str(text).map_err(|e| ManifestError::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest is plain data")
    }

    /// Number of (observation, procedure, channel) recordings declared.
    pub fn declared_recordings(&self) -> usize {
        self.observations
            .iter()
            .flat_map(|o| &o.procedures)
            .map(|p| p.channel_files.len())
            .sum()
    }

    fn material_for(&self, obs: &Observation) -> String {
        obs.fingerprint_material
            .clone()
            .unwrap_or_else(|| self.fingerprint_material.clone())
    }
}

/// A manifest that passed validation, with any warnings and the directory
/// its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct ValidatedManifest {
    pub manifest: Manifest,
    pub base_dir: PathBuf,
    pub warnings: Vec<String>,
}

struct Findings {
    errors: Vec<String>,
    warnings: Vec<String>,
}

impl Findings {
    fn error(&mut self, msg: impl fmt::Display) {
        self.errors.push(msg.to_string());
    }
    fn warn(&mut self, msg: impl fmt::Display) {
        self.warnings.push(msg.to_string());
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Reads and cross-checks a manifest file.
pub fn validate_manifest(path: impl AsRef<Path>) -> Result<ValidatedManifest, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let manifest = Manifest::from_json(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    validate(manifest, &base)
}

/// Cross-checks an in-memory manifest. Fills the Enclosure duration default
/// where it is missing.
pub fn validate(
    mut manifest: Manifest,
    base_dir: &Path,
) -> Result<ValidatedManifest, ManifestError> {
    let mut f = Findings {
        errors: Vec::new(),
        warnings: Vec::new(),
    };

    if manifest.schema_version != SCHEMA_VERSION {
        f.error(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            manifest.schema_version
        ));
    }

    let mut ids = BTreeSet::new();
    for obj in &manifest.objects {
        if obj.id.trim().is_empty() {
            f.error("object with an empty id");
        } else if !ids.insert(obj.id.as_str()) {
            f.error(format!("duplicate object id `{}`", obj.id));
        }
        if let Some(img) = &obj.image_path {
            if !resolve(base_dir, img).is_file() {
                f.warn(format!("object `{}`: image {img} not found", obj.id));
            }
        }
    }

    let mut repetitions: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for (i, obs) in manifest.observations.iter().enumerate() {
        let tag = format!(
            "observation {} (`{}` #{})",
            i, obs.object_id, obs.repetition
        );
        if !ids.contains(obs.object_id.as_str()) {
            f.error(format!(
                "{tag}: references unknown object `{}`",
                obs.object_id
            ));
        }
        if obs.repetition == 0 {
            f.error(format!("{tag}: repetitions are numbered from 1"));
        } else if obs.repetition as usize > OBSERVATIONS_PER_OBJECT {
            f.warn(format!(
                "{tag}: repetition {} exceeds the {OBSERVATIONS_PER_OBJECT}-observations-per-object convention",
                obs.repetition
            ));
        }
        if !repetitions
            .entry(obs.object_id.as_str())
            .or_default()
            .insert(obs.repetition)
        {
            f.error(format!("{tag}: repetition {} listed twice", obs.repetition));
        }
        if obs.procedures.is_empty() {
            f.warn(format!("{tag}: no procedures recorded"));
        }
        let mut seen = BTreeSet::new();
        for p in &obs.procedures {
            let ptag = format!("{tag} {}", p.procedure);
            if !seen.insert(p.procedure) {
                f.error(format!("{ptag}: procedure listed twice"));
            }
            check_procedure(p, &ptag, base_dir, &mut f);
        }
    }
    for (object, reps) in &repetitions {
        if reps.len() > OBSERVATIONS_PER_OBJECT {
            f.warn(format!(
                "object `{object}` has {} observations; the reference dataset collects {OBSERVATIONS_PER_OBJECT} per object",
                reps.len()
            ));
        }
    }

    if !f.errors.is_empty() {
        return Err(ManifestError::Invalid {
            errors: f.errors,
            warnings: f.warnings,
        });
    }

    for obs in &mut manifest.observations {
        for p in &mut obs.procedures {
            if p.procedure == Procedure::Enclosure && p.duration_s.is_none() {
                p.duration_s = Some(ENCLOSURE_DURATION_S);
            }
        }
    }

    Ok(ValidatedManifest {
        manifest,
        base_dir: base_dir.to_path_buf(),
        warnings: f.warnings,
    })
}

fn check_procedure(p: &ProcedureRecord, tag: &str, base_dir: &Path, f: &mut Findings) {
    let codes: Vec<u16> = p.force_codes.iter().map(|c| c.get()).collect();
    match p.procedure {
        Procedure::LateralMotion if codes != [LATERAL_MOTION_FORCE] => f.warn(format!(
            "{tag}: force codes {codes:?} differ from the usual {LATERAL_MOTION_FORCE}"
        )),
        Procedure::Enclosure if codes != [ENCLOSURE_FORCE] => f.warn(format!(
            "{tag}: force codes {codes:?} differ from the usual {ENCLOSURE_FORCE}"
        )),
        Procedure::Pressure => {
            let odd: Vec<u16> = codes
                .iter()
                .copied()
                .filter(|c| !PRESSURE_FORCES.contains(c))
                .collect();
            if !odd.is_empty() {
                f.warn(format!(
                    "{tag}: force codes {odd:?} are outside the usual {PRESSURE_FORCES:?}"
                ));
            }
        }
        _ => {}
    }
    if let Some(d) = p.duration_s {
        if !(d.is_finite() && d > 0.0) {
            f.error(format!("{tag}: duration_s must be positive, got {d}"));
        }
    }
    if p.channel_files.is_empty() {
        f.error(format!("{tag}: no channel files"));
    }
    for (mic, file) in &p.channel_files {
        if !resolve(base_dir, file).is_file() {
            f.error(format!("{tag} {mic}: audio file {file} not found"));
        }
    }
    if let Some(t) = &p.motor_telemetry_path {
        if !t.to_ascii_lowercase().ends_with(".csv") {
            f.error(format!("{tag}: telemetry {t} is not a .csv path"));
        } else if !resolve(base_dir, t).is_file() {
            f.error(format!("{tag}: telemetry {t} not found"));
        }
    }
}

/// Loads one recording per declared (observation, procedure, channel), in
/// manifest order, with metadata filled from the manifest.
pub fn load_recordings(v: &ValidatedManifest) -> Result<Vec<Recording>, ManifestError> {
    let m = &v.manifest;
    let mut jobs = Vec::new();
    for obs in &m.observations {
        let material = m.material_for(obs);
        for p in &obs.procedures {
            for (&mic, file) in &p.channel_files {
                let meta = RecordingMeta {
                    object: obs.object_id.clone(),
                    exploration_procedure: Some(p.procedure),
                    force_code: p.force_codes.first().copied(),
                    fingerprint_material: material.clone(),
                    microphone: Some(mic),
                    repetition: Some(obs.repetition),
                };
                jobs.push((resolve(&v.base_dir, file), meta));
            }
        }
    }
    let recordings: Vec<Recording> = jobs
        .into_par_iter()
        .map(|(path, meta)| {
            read_wav(&path)
                .map(|r| r.with_meta(meta))
                .map_err(|source| ManifestError::Audio {
                    path: path.display().to_string(),
                    source,
                })
        })
        .collect::<Result<_, _>>()?;
    let declared = m.declared_recordings();
    if recordings.len() != declared {
        return Err(ManifestError::CountMismatch {
            declared,
            loaded: recordings.len(),
        });
    }
    Ok(recordings)
}

/// Builds a manifest from a flat mapping CSV, one row per audio file:
///
/// `object_id,object_name,material_class,repetition,procedure,force_codes,microphone,path[,fingerprint_material]`
///
/// `force_codes` is `;`-separated. Rows for the same (object, repetition,
/// procedure) merge into one procedure record. Lets an existing archive be
/// described without moving its files.
pub fn manifest_from_mapping(text: &str) -> Result<Manifest, ManifestError> {
    let err = |line: usize, msg: String| ManifestError::Mapping(format!("row {line}: {msg}"));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| ManifestError::Mapping(e.to_string()))?
        .clone();
    let expected = [
        "object_id",
        "object_name",
        "material_class",
        "repetition",
        "procedure",
        "force_codes",
        "microphone",
        "path",
    ];
    if headers.len() < expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(ManifestError::Mapping(format!(
            "header must start with `{}`",
            expected.join(",")
        )));
    }

    let mut objects: Vec<ObjectEntry> = Vec::new();
    let mut observations: BTreeMap<(String, u32), Observation> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or("").to_string();
        let object_id = field(0);
        if !objects.iter().any(|o| o.id == object_id) {
            objects.push(ObjectEntry {
                id: object_id.clone(),
                name: field(1),
                material_class: field(2),
                image_path: None,
            });
        }
        let repetition: u32 = field(3)
            .parse()
            .map_err(|e| err(line, format!("repetition: {e}")))?;
        let procedure: Procedure = serde_json::from_value(serde_json::Value::String(field(4)))
            .map_err(|e| err(line, format!("procedure: {e}")))?;
        let force_codes = field(5)
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                let code: u32 = s
                    .trim()
                    .parse()
                    .map_err(|e| err(line, format!("force code `{s}`: {e}")))?;
                ForceCode::new(code).map_err(|e| err(line, e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mic: Microphone = field(6).parse().map_err(|e: String| err(line, e))?;
        let path = field(7);
        let material = rec.get(8).filter(|s| !s.is_empty()).map(str::to_string);

        let obs = observations
            .entry((object_id.clone(), repetition))
            .or_insert_with(|| Observation {
                object_id,
                repetition,
                fingerprint_material: material.clone(),
                procedures: Vec::new(),
            });
        if obs.fingerprint_material != material {
            return Err(err(
                line,
                "conflicting fingerprint_material within one observation".into(),
            ));
        }
        match obs.procedures.iter_mut().find(|p| p.procedure == procedure) {
            Some(p) => {
                if p.channel_files.insert(mic, path).is_some() {
                    return Err(err(
                        line,
                        format!("duplicate {mic} channel for {procedure}"),
                    ));
                }
            }
            None => obs.procedures.push(ProcedureRecord {
                procedure,
                force_codes,
                duration_s: None,
                channel_files: BTreeMap::from([(mic, path)]),
                motor_telemetry_path: None,
            }),
        }
    }
    Ok(Manifest {
        schema_version: SCHEMA_VERSION,
        fingerprint_material: default_fingerprint(),
        objects,
        observations: observations.into_values().collect(),
    })
}
