//! Dataset I/O: mono WAV recordings and the JSON dataset manifest.

pub mod manifest;
pub mod wav;

pub use manifest::{
    load_recordings, manifest_from_mapping, validate, validate_manifest, Manifest, ManifestError,
    ObjectEntry, Observation, ProcedureRecord, ValidatedManifest,
};
pub use wav::{read_wav, write_wav, BitDepth, WavError};
