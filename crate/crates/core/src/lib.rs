//! Design and analysis toolkit for vibration-tuned 3D-printed robotic
//! fingerprints.
//!
//! * [`materials`]: printable materials, printer limits, robot hand envelope
//! * [`beam`]: cross-sections and cantilever natural frequencies
//! * [`mic`]: microphone response curves and sensitivity bands
//! * [`design`]: feasible (side, length) regions, sweeps and segment layouts
//! * [`signal`]: spectra, band AUC and baseline normalization
//! * [`simulate`]: synthetic slide recordings from a beam design
//! * [`dataset`]: WAV files and the dataset manifest
//! * [`cli`]: the `ridgebeam` command line

pub mod beam;
pub mod cli;
pub mod dataset;
pub mod design;
pub mod materials;
pub mod mic;
pub mod signal;
pub mod simulate;
