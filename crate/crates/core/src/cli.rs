//! The `ridgebeam` command line.
//!
//! Every subcommand writes its results into the output directory together
//! with `run.json`, a sidecar holding the argv, seed and a timestamp. Data
//! files never contain timestamps, so identical argv and seed give
//! byte-identical data files.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::beam::{self, BeamSpec, CrossSection, Shape};
use crate::dataset::{self, BitDepth};
use crate::design::{self, DesignConstraints, Range, Segment, SegmentCaps};
use crate::materials::{self, units, Material, PrinterConstraints, SupportMode};
use crate::mic::{self, ResponseCurve, SensitivityBand};
use crate::signal::{self, AucSample, Microphone, Recording, RecordingMeta, Window};
use crate::simulate::{self, SlideScenario};

pub const OUTPUT_DIR_ENV: &str = "RIDGEBEAM_OUTPUT_DIR";
pub const RUN_SIDECAR: &str = "run.json";

#[derive(Debug, Parser)]
#[command(
    name = "ridgebeam",
    version,
    about = "Design and analysis of vibration-tuned robotic fingerprints"
)]
pub struct Cli {
    /// Material config (TOML) merged over the built-in materials.
    #[arg(long, global = true, value_name = "PATH")]
    materials: Option<PathBuf>,
    /// Directory for result files and the run sidecar.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, default_value = "ridgebeam-out")]
    output_dir: PathBuf,
    /// Format of the tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Natural frequency of one cantilever beam.
    Freq(FreqArgs),
    /// Feasible (side, length) region and per-segment layouts.
    Design(DesignArgs),
    /// First-mode frequency against length for several cross-sections.
    Sweep(SweepArgs),
    /// Sensitivity bands of a microphone response curve.
    Bands(BandsArgs),
    /// Synthetic slide recording from a beam design.
    Simulate(SimulateArgs),
    /// Spectra, band AUC and baseline-normalized ratios of a set of recordings.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct ShapeArgs {
    /// Side of a square section.
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    square_side_mm: Option<f64>,
    /// Side of a regular hexagonal section.
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    hexagon_side_mm: Option<f64>,
    /// Radius of a circular section.
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    circle_radius_mm: Option<f64>,
}

#[derive(Debug, Args)]
struct SectionArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Inner dimension of a hollow section, same shape as the outer one.
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    inner_mm: Option<f64>,
}

impl SectionArgs {
    fn section(&self) -> Result<CrossSection, CliError> {
        let (shape, dim) = match (
            self.shape.square_side_mm,
            self.shape.hexagon_side_mm,
            self.shape.circle_radius_mm,
        ) {
            (Some(d), _, _) => (Shape::Square, d),
            (_, Some(d), _) => (Shape::Hexagon, d),
            (_, _, Some(d)) => (Shape::Circle, d),
            _ => {
                return Err(CliError::Usage(
                    "a cross-section dimension is required".into(),
                ))
            }
        };
        let solid = CrossSection::solid(shape, dim * units::MM).map_err(domain)?;
        match self.inner_mm {
            Some(i) => solid.hollow(i * units::MM).map_err(domain),
            None => Ok(solid),
        }
    }
}

#[derive(Debug, Args)]
struct FreqArgs {
    /// Material name (built-in or from --materials).
    #[arg(long)]
    material: String,
    #[command(flatten)]
    section: SectionArgs,
    /// Beam length from root to free end.
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    length_mm: f64,
    /// Mode number, 1 for the fundamental.
    #[arg(long, default_value_t = 1)]
    mode: i64,
}

#[derive(Debug, Args)]
struct BandOverride {
    /// Lower edge of the target band; defaults to the bundled microphone band.
    #[arg(long, value_name = "KHZ")]
    band_low_khz: Option<f64>,
    #[arg(long, value_name = "KHZ")]
    band_high_khz: Option<f64>,
    #[arg(long, value_name = "KHZ")]
    band_peak_khz: Option<f64>,
}

impl BandOverride {
    fn band(&self) -> Result<SensitivityBand, CliError> {
        let d = design::default_target_band();
        let low = self.band_low_khz.map_or(d.low, |v| v * units::KHZ);
        let high = self.band_high_khz.map_or(d.high, |v| v * units::KHZ);
        let peak = self
            .band_peak_khz
            .map_or(d.peak_frequency.clamp(low.min(high), high.max(low)), |v| {
                v * units::KHZ
            });
        SensitivityBand::new(low, high, peak, d.peak_amplitude).ok_or_else(|| {
            CliError::Domain(format!(
                "invalid target band [{low}, {high}] Hz with peak {peak} Hz"
            ))
        })
    }
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Material name (built-in or from --materials).
    #[arg(long)]
    material: String,
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    side_min_mm: Option<f64>,
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    side_max_mm: Option<f64>,
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    length_min_mm: Option<f64>,
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    length_max_mm: Option<f64>,
    #[arg(long, value_name = "MM", default_value_t = 0.1)]
    step_mm: f64,
    #[command(flatten)]
    band: BandOverride,
    /// Clearance caps as `segment=mm` pairs (tip, phalanx, thumb, palm);
    /// defaults to the material's preset.
    #[arg(long, value_delimiter = ',', value_name = "SEGMENT=MM")]
    caps: Vec<String>,
    /// Print without support material, which raises the minimum side.
    #[arg(long)]
    unsupported: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value = "PLA")]
    material: String,
    /// Sections as `shape:dim_mm[/inner_mm]`.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "square:1.0,hexagon:1.0,circle:1.0",
        value_name = "SHAPE:MM[/MM]"
    )]
    shapes: Vec<String>,
    #[arg(long, value_name = "MM", default_value_t = 2.0)]
    length_min_mm: f64,
    #[arg(long, value_name = "MM", default_value_t = 6.0)]
    length_max_mm: f64,
    #[arg(long, default_value_t = 41)]
    steps: usize,
    #[command(flatten)]
    band: BandOverride,
}

#[derive(Debug, Args)]
struct BandsArgs {
    /// Response curve CSV (`frequency_hz,amplitude_db`); the bundled
    /// synthetic curve when omitted.
    #[arg(long, value_name = "PATH")]
    curve: Option<PathBuf>,
    #[arg(long, value_name = "DB", default_value_t = mic::DEFAULT_THRESHOLD_DB, allow_negative_numbers = true)]
    threshold_db: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Material name (built-in or from --materials).
    #[arg(long)]
    material: String,
    #[command(flatten)]
    section: SectionArgs,
    /// Beam length from root to free end.
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    length_mm: f64,
    /// Beam centre spacing; twice the section dimension by default.
    #[arg(long, value_name = "MM", allow_negative_numbers = true)]
    pitch_mm: Option<f64>,
    /// Sliding speed; the hand's maximum by default.
    #[arg(long, value_name = "MM_PER_S")]
    velocity_mm_s: Option<f64>,
    #[arg(long, value_name = "S", default_value_t = 0.2)]
    duration_s: f64,
    #[arg(long, default_value_t = simulate::DEFAULT_MODES)]
    modes: usize,
    /// Damping ratio, one value for all modes or one per mode.
    #[arg(long, value_delimiter = ',', default_value = "0.02")]
    damping: Vec<f64>,
    /// Relative modal amplitudes; defaults to 1, 1/2, 1/4, ...
    #[arg(long, value_delimiter = ',')]
    mode_amplitudes: Vec<f64>,
    /// Overall amplitude factor applied to every mode. The default keeps
    /// overlapping ring-downs inside the WAV full-scale range.
    #[arg(long, default_value_t = 0.25)]
    gain: f64,
    /// Noise floor as a per-bin level relative to full scale.
    #[arg(long, value_name = "DB", default_value_t = mic::NOISE_FLOOR_DB, allow_negative_numbers = true)]
    noise_db: f64,
    /// Generate a noise-free signal.
    #[arg(long, conflicts_with = "noise_db")]
    no_noise: bool,
    #[arg(long, value_name = "HZ", default_value_t = signal::DEFAULT_SAMPLE_RATE)]
    sample_rate: f64,
    #[arg(long, default_value = "left")]
    microphone: Microphone,
    #[arg(long, default_value = "surface")]
    object: String,
    /// Fingerprint label stored in the metadata; the material name by default.
    #[arg(long)]
    fingerprint: Option<String>,
    /// Repetition number stored in the metadata.
    #[arg(long)]
    repetition: Option<u32>,
    #[arg(long, default_value = "float32")]
    bit_depth: BitDepth,
    /// File stem of the WAV and its metadata sidecar.
    #[arg(long, default_value = "slide")]
    name: String,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["manifest", "files"])))]
struct AnalyzeArgs {
    /// Dataset manifest (JSON); audio paths resolve against its directory.
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Glob of WAV files; metadata comes from `<stem>.json` sidecars.
    #[arg(long, value_name = "GLOB")]
    files: Option<String>,
    /// Analysis window applied before the transform.
    #[arg(long, default_value = "hann")]
    window: Window,
    /// Lower edge of the AUC band.
    #[arg(long, value_name = "KHZ", default_value_t = signal::DEFAULT_AUC_BAND.0 / units::KHZ)]
    auc_low_khz: f64,
    /// Upper edge of the AUC band.
    #[arg(long, value_name = "KHZ", default_value_t = signal::DEFAULT_AUC_BAND.1 / units::KHZ)]
    auc_high_khz: f64,
    /// Also write the mean spectrum of every group.
    #[arg(long)]
    spectra: bool,
    /// Worker threads for reading and transforming files.
    #[arg(long, default_value_t = 4)]
    jobs: usize,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => m,
        }
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Domain(format!("{}: {e}", path.display()))
}

/// Metadata sidecar written next to every simulated WAV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordingSidecar {
    pub meta: RecordingMeta,
    pub sample_rate_hz: f64,
    pub samples: usize,
    #[serde(default)]
    pub scenario: serde_json::Value,
}

/// Parses `argv` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let started = chrono::Utc::now();
    match execute(&cli) {
        Ok(outputs) => match write_run_sidecar(&cli, &argv, started, &outputs) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {}", e.message());
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let threads = match &cli.command {
        Command::Analyze(a) => a.jobs.max(1),
        _ => 1,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(domain)?;
    pool.install(|| {
        let mut out = Output::new(cli)?;
        match &cli.command {
            Command::Freq(a) => freq(cli, a, &mut out),
            Command::Design(a) => design_cmd(cli, a, &mut out),
            Command::Sweep(a) => sweep(cli, a, &mut out),
            Command::Bands(a) => bands(a, &mut out),
            Command::Simulate(a) => simulate_cmd(cli, a, &mut out),
            Command::Analyze(a) => analyze(a, &mut out),
        }?;
        Ok(out.written)
    })
}

struct Output {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        fs::create_dir_all(&cli.output_dir).map_err(io_err(&cli.output_dir))?;
        Ok(Self {
            dir: cli.output_dir.clone(),
            format: cli.format,
            written: Vec::new(),
        })
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.written.push(path);
        Ok(())
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(domain)?;
        self.write_bytes(name, &buf)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(domain)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }
}

fn write_run_sidecar(
    cli: &Cli,
    argv: &[OsString],
    started: chrono::DateTime<chrono::Utc>,
    outputs: &[PathBuf],
) -> Result<(), CliError> {
    let finished = chrono::Utc::now();
    let sidecar = json!({
        "tool": "ridgebeam",
        "version": env!("CARGO_PKG_VERSION"),
        "argv": argv.iter().map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "seed": cli.seed,
        "format": cli.format,
        "materials": cli.materials.as_ref().map(|p| p.display().to_string()),
        "outputs": outputs
            .iter()
            .map(|p| p.strip_prefix(&cli.output_dir).unwrap_or(p).display().to_string())
            .collect::<Vec<_>>(),
        "started_at": started.to_rfc3339(),
        "finished_at": finished.to_rfc3339(),
    });
    let path = cli.output_dir.join(RUN_SIDECAR);
    let text = serde_json::to_string_pretty(&sidecar).map_err(domain)?;
    fs::write(&path, text + "\n").map_err(io_err(&path))
}

fn load_materials(cli: &Cli) -> Result<Vec<Material>, CliError> {
    match &cli.materials {
        Some(path) => materials::load_material_config(path).map_err(domain),
        None => Ok(materials::builtin_materials()),
    }
}

fn material(cli: &Cli, name: &str) -> Result<Material, CliError> {
    let all = load_materials(cli)?;
    materials::find_material(&all, name)
        .cloned()
        .map_err(domain)
}

fn mm(x: f64) -> String {
    format!("{:.4}", x / units::MM)
}

fn hz(x: f64) -> String {
    format!("{x:.3}")
}

fn freq(cli: &Cli, a: &FreqArgs, out: &mut Output) -> Result<(), CliError> {
    let mat = material(cli, &a.material)?;
    let section = a.section.section()?;
    let spec = BeamSpec::new(mat, section, a.length_mm * units::MM).map_err(domain)?;
    let mode = beam::mode_constant(a.mode).map_err(domain)?;
    let f = beam::natural_frequency(&spec, a.mode).map_err(domain)?;

    match out.format {
        Format::Csv => out.write_with("freq.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record([
                "material",
                "shape",
                "dimension_mm",
                "inner_mm",
                "length_mm",
                "mode",
                "beta_l",
                "frequency_hz",
                "frequency_min_hz",
                "frequency_max_hz",
            ])?;
            w.write_record([
                spec.material().name().to_string(),
                section.shape().label().to_string(),
                mm(section.dimension()),
                section.inner().map(mm).unwrap_or_default(),
                mm(spec.length()),
                a.mode.to_string(),
                format!("{:.9}", mode.beta_l),
                hz(f.nominal),
                hz(f.min),
                hz(f.max),
            ])?;
            w.flush()
        })?,
        Format::Json => out.write_json(
            "freq.json",
            &json!({
                "material": spec.material().name(),
                "shape": section.shape().label(),
                "dimension_mm": section.dimension() / units::MM,
                "inner_mm": section.inner().map(|i| i / units::MM),
                "length_mm": spec.length() / units::MM,
                "mode": a.mode,
                "beta_l": mode.beta_l,
                "frequency_hz": f.nominal,
                "frequency_min_hz": f.min,
                "frequency_max_hz": f.max,
            }),
        )?,
    }
    if f.is_interval() {
        println!(
            "{:.3} kHz ({:.3}-{:.3} kHz over the density range)",
            f.nominal / units::KHZ,
            f.min / units::KHZ,
            f.max / units::KHZ
        );
    } else {
        println!("{:.3} kHz", f.nominal / units::KHZ);
    }
    Ok(())
}

fn parse_caps(items: &[String]) -> Result<SegmentCaps, CliError> {
    let mut caps = SegmentCaps::new();
    for item in items {
        let (seg, value) = item.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("cap `{item}` is not of the form segment=mm"))
        })?;
        let segment: Segment = seg.trim().parse().map_err(|e: String| CliError::Usage(e))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("cap `{item}` has a non-numeric value")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Domain(format!(
                "cap for {segment} must be positive, got {v} mm"
            )));
        }
        caps.insert(segment, v * units::MM);
    }
    Ok(caps)
}

fn design_cmd(cli: &Cli, a: &DesignArgs, out: &mut Output) -> Result<(), CliError> {
    let mat = material(cli, &a.material)?;
    let preset = DesignConstraints::layout_ranges(&mat).ok();
    let pick =
        |v: Option<f64>, f: fn(&DesignConstraints) -> f64, what: &str| -> Result<f64, CliError> {
            match (v, &preset) {
                (Some(v), _) => Ok(v * units::MM),
                (None, Some(p)) => Ok(f(p)),
                (None, None) => Err(CliError::Usage(format!(
                    "material `{}` has no preset ranges; pass --{what}",
                    mat.name()
                ))),
            }
        };
    let side = Range::new(
        pick(a.side_min_mm, |p| p.side_range.min, "side-min-mm")?,
        pick(a.side_max_mm, |p| p.side_range.max, "side-max-mm")?,
    );
    let length = Range::new(
        pick(a.length_min_mm, |p| p.length_range.min, "length-min-mm")?,
        pick(a.length_max_mm, |p| p.length_range.max, "length-max-mm")?,
    );
    let support = if a.unsupported {
        SupportMode::Unsupported
    } else {
        SupportMode::Supported
    };
    let constraints = DesignConstraints::new(
        mat.clone(),
        PrinterConstraints::for_material(&mat),
        support,
        a.band.band()?,
        side,
        length,
    )
    .map_err(domain)?;
    let caps = if a.caps.is_empty() {
        design::preset_caps(&mat).ok_or_else(|| {
            CliError::Usage(format!(
                "material `{}` has no preset caps; pass --caps",
                mat.name()
            ))
        })?
    } else {
        parse_caps(&a.caps)?
    };
    let step = a.step_mm * units::MM;
    let region = design::feasible_region(&constraints, step).map_err(domain)?;
    let report = design::segment_layouts(&constraints, &caps, step).map_err(domain)?;
    let text = design::render_layout_report(&report, &constraints);

    match out.format {
        Format::Csv => {
            out.write_with("feasible.csv", |buf| design::write_region_csv(&region, buf))?;
            out.write_with("layouts.csv", |buf| design::write_layouts_csv(&report, buf))?;
        }
        Format::Json => out.write_json(
            "design.json",
            &json!({
                "constraints": constraints,
                "region": region,
                "layouts": report.layouts,
                "failures": report.failures.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            }),
        )?,
    }
    out.write_bytes("layout.txt", text.as_bytes())?;
    print!("{text}");
    if let Some(first) = report.failures.first() {
        return Err(CliError::Domain(format!(
            "{} of {} segments have no layout; first: {first}",
            report.failures.len(),
            caps.len()
        )));
    }
    Ok(())
}

fn parse_section(spec: &str) -> Result<CrossSection, CliError> {
    let usage = || {
        CliError::Usage(format!(
            "section `{spec}` is not of the form shape:dim_mm[/inner_mm]"
        ))
    };
    let (shape, dims) = spec.split_once(':').ok_or_else(usage)?;
    let shape: Shape = shape
        .trim()
        .parse()
        .map_err(|e: String| CliError::Usage(e))?;
    let (outer, inner) = match dims.split_once('/') {
        Some((o, i)) => (o, Some(i)),
        None => (dims, None),
    };
    let outer: f64 = outer.trim().parse().map_err(|_| usage())?;
    let solid = CrossSection::solid(shape, outer * units::MM).map_err(domain)?;
    match inner {
        Some(i) => {
            let i: f64 = i.trim().parse().map_err(|_| usage())?;
            solid.hollow(i * units::MM).map_err(domain)
        }
        None => Ok(solid),
    }
}

fn sweep(cli: &Cli, a: &SweepArgs, out: &mut Output) -> Result<(), CliError> {
    let mat = material(cli, &a.material)?;
    let sections = a
        .shapes
        .iter()
        .map(|s| parse_section(s))
        .collect::<Result<Vec<_>, _>>()?;
    let band = a.band.band()?;
    let table = design::frequency_sweep(
        &mat,
        &sections,
        Range::mm(a.length_min_mm, a.length_max_mm),
        a.steps,
        &band,
    )
    .map_err(domain)?;
    match out.format {
        Format::Csv => out.write_with("sweep.csv", |buf| design::write_sweep_csv(&table, buf))?,
        Format::Json => out.write_json("sweep.json", &table)?,
    }
    println!(
        "{} rows for {} sections of {}",
        table.rows.len(),
        sections.len(),
        table.material
    );
    Ok(())
}

fn bands(a: &BandsArgs, out: &mut Output) -> Result<(), CliError> {
    let curve = match &a.curve {
        Some(path) => {
            let (axis, curve) = ResponseCurve::from_csv_path(path).map_err(domain)?;
            if axis != mic::CurveAxis::FrequencyHz {
                return Err(CliError::Domain(format!(
                    "{}: expected a frequency response curve, found a {} column",
                    path.display(),
                    axis.column()
                )));
            }
            curve
        }
        None => mic::sample_response_curve(),
    };
    let found = mic::sensitive_bands(&curve, a.threshold_db);
    match out.format {
        Format::Csv => out.write_with("bands.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["band", "low_hz", "high_hz", "peak_hz", "peak_db"])?;
            for (i, b) in found.iter().enumerate() {
                w.write_record([
                    (i + 1).to_string(),
                    hz(b.low),
                    hz(b.high),
                    hz(b.peak_frequency),
                    format!("{:.3}", b.peak_amplitude),
                ])?;
            }
            w.flush()
        })?,
        Format::Json => out.write_json(
            "bands.json",
            &json!({ "threshold_db": a.threshold_db, "bands": found }),
        )?,
    }
    if found.is_empty() {
        println!("no band above {} dB", a.threshold_db);
    }
    for b in &found {
        println!("{b}");
    }
    Ok(())
}

fn simulate_cmd(cli: &Cli, a: &SimulateArgs, out: &mut Output) -> Result<(), CliError> {
    let mat = material(cli, &a.material)?;
    let section = a.section.section()?;
    let spec = BeamSpec::new(mat, section, a.length_mm * units::MM).map_err(domain)?;
    let mut sc = SlideScenario::new(spec);
    if let Some(p) = a.pitch_mm {
        sc.pitch = p * units::MM;
    }
    if let Some(v) = a.velocity_mm_s {
        sc.velocity = simulate::velocity_from_mm_per_s(v);
    }
    sc.duration = a.duration_s;
    sc.modes = a.modes;
    sc.damping = if a.damping.len() == 1 {
        vec![a.damping[0]; a.modes]
    } else {
        a.damping.clone()
    };
    let base = if a.mode_amplitudes.is_empty() {
        (0..a.modes).map(|k| 0.5f64.powi(k as i32)).collect()
    } else {
        a.mode_amplitudes.clone()
    };
    sc.mode_amplitudes = base.iter().map(|x| x * a.gain).collect();
    sc.noise_floor_db = (!a.no_noise).then_some(a.noise_db);
    sc.sample_rate = a.sample_rate;
    sc.seed = cli.seed;
    sc.microphone = Some(a.microphone);
    sc.object = a.object.clone();
    sc.fingerprint_label = a.fingerprint.clone().unwrap_or_default();
    sc.repetition = a.repetition;

    let rec = simulate::slide_signal(&sc).map_err(domain)?;
    let wav = dataset::wav::encode_wav(&rec, a.bit_depth).map_err(domain)?;
    out.write_bytes(&format!("{}.wav", a.name), &wav)?;
    let sidecar = RecordingSidecar {
        meta: rec.meta.clone(),
        sample_rate_hz: rec.sample_rate(),
        samples: rec.samples().len(),
        scenario: serde_json::to_value(&sc).map_err(domain)?,
    };
    out.write_json(&format!("{}.json", a.name), &sidecar)?;
    println!(
        "{} samples at {} Hz, {:.1} impulses/s",
        rec.samples().len(),
        rec.sample_rate(),
        sc.excitation_rate()
    );
    Ok(())
}

/// A recording ready for analysis with a stable label.
struct Source {
    label: String,
    recording: Recording,
}

fn sources_from_manifest(path: &Path) -> Result<Vec<Source>, CliError> {
    let v = dataset::validate_manifest(path).map_err(domain)?;
    for w in &v.warnings {
        log::warn!("{w}");
    }
    let recs = dataset::load_recordings(&v).map_err(domain)?;
    Ok(recs
        .into_iter()
        .map(|r| {
            let m = &r.meta;
            let label = format!(
                "{}/{}/{}/{}",
                m.object,
                m.repetition.map(|x| x.to_string()).unwrap_or_default(),
                m.exploration_procedure
                    .map(|p| p.to_string())
                    .unwrap_or_default(),
                m.microphone.map(|p| p.to_string()).unwrap_or_default(),
            );
            Source {
                label,
                recording: r,
            }
        })
        .collect())
}

fn read_sidecar(wav: &Path) -> Result<Option<RecordingMeta>, CliError> {
    let path = wav.with_extension("json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let sidecar: RecordingSidecar = serde_json::from_str(&text)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    Ok(Some(sidecar.meta))
}

fn sources_from_glob(pattern: &str) -> Result<Vec<Source>, CliError> {
    let mut paths = glob::glob(pattern)
        .map_err(|e| CliError::Usage(format!("bad glob `{pattern}`: {e}")))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(domain)?;
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Domain(format!("no files match `{pattern}`")));
    }
    let base = glob_base(pattern);
    paths
        .par_iter()
        .map(|p| {
            let rec = dataset::read_wav(p)
                .map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))?;
            let meta = match read_sidecar(p)? {
                Some(m) => m,
                None => {
                    log::warn!(
                        "{}: no metadata sidecar; using the left microphone and the baseline skin",
                        p.display()
                    );
                    RecordingMeta {
                        object: p
                            .file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_default(),
                        microphone: Some(Microphone::Left),
                        ..RecordingMeta::default()
                    }
                }
            };
            Ok(Source {
                label: p.strip_prefix(&base).unwrap_or(p).display().to_string(),
                recording: rec.with_meta(meta),
            })
        })
        .collect()
}

/// Directory part of a glob before its first wildcard; source labels are
/// relative to it so they do not depend on where the dataset lives.
fn glob_base(pattern: &str) -> PathBuf {
    let literal = pattern
        .find(['*', '?', '['])
        .map_or(pattern, |i| &pattern[..i]);
    match literal.rfind(std::path::MAIN_SEPARATOR) {
        Some(i) => PathBuf::from(&literal[..=i]),
        None => PathBuf::new(),
    }
}

fn analyze(a: &AnalyzeArgs, out: &mut Output) -> Result<(), CliError> {
    let sources = match (&a.manifest, &a.files) {
        (Some(m), _) => sources_from_manifest(m)?,
        (None, Some(g)) => sources_from_glob(g)?,
        (None, None) => {
            return Err(CliError::Usage(
                "one of --manifest or --files is required".into(),
            ))
        }
    };
    let band = (a.auc_low_khz * units::KHZ, a.auc_high_khz * units::KHZ);
    let analysed = sources
        .par_iter()
        .map(|s| {
            let spec = signal::spectrum(&s.recording, a.window);
            let auc = signal::band_auc(&spec, band)
                .map_err(|e| CliError::Domain(format!("{}: {e}", s.label)))?;
            let m = &s.recording.meta;
            let microphone = m.microphone.ok_or_else(|| {
                CliError::Domain(format!("{}: recording has no microphone", s.label))
            })?;
            Ok((
                AucSample {
                    microphone,
                    object: m.object.clone(),
                    fingerprint_material: m.fingerprint_material.clone(),
                    auc,
                },
                spec,
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let samples: Vec<AucSample> = analysed.iter().map(|(s, _)| s.clone()).collect();
    let report = signal::normalize_against_baseline(&samples).map_err(domain)?;

    match out.format {
        Format::Csv => {
            out.write_with("auc.csv", |buf| {
                let mut w = csv::Writer::from_writer(buf);
                w.write_record([
                    "source",
                    "microphone",
                    "object",
                    "fingerprint_material",
                    "auc",
                    "normalized",
                ])?;
                for (src, r) in sources.iter().zip(&report.recordings) {
                    w.write_record([
                        src.label.clone(),
                        r.sample.microphone.to_string(),
                        r.sample.object.clone(),
                        r.sample.fingerprint_material.clone(),
                        format!("{:.9e}", r.sample.auc),
                        format!("{:.9}", r.normalized),
                    ])?;
                }
                w.flush()
            })?;
            out.write_with("groups.csv", |buf| signal::write_groups_csv(&report, buf))?;
        }
        Format::Json => out.write_json(
            "auc.json",
            &json!({
                "recordings": sources.iter().zip(&report.recordings).map(|(s, r)| {
                    json!({ "source": s.label, "sample": r })
                }).collect::<Vec<_>>(),
                "groups": report.groups,
            }),
        )?,
    }
    out.write_json("ratios.json", &report.json_summary())?;

    if a.spectra {
        for g in &report.groups {
            let specs: Vec<_> = analysed
                .iter()
                .filter(|(s, _)| {
                    s.microphone == g.microphone
                        && s.object == g.object
                        && s.fingerprint_material == g.fingerprint_material
                })
                .map(|(_, sp)| sp.clone())
                .collect();
            let mean = signal::mean_spectrum(&specs).map_err(domain)?;
            let name = format!(
                "spectra/{}_{}_{}.csv",
                file_safe(&g.microphone.to_string()),
                file_safe(&g.object),
                file_safe(&g.fingerprint_material)
            );
            out.write_with(&name, |buf| signal::write_spectrum_csv(&mean, buf))?;
        }
    }

    for g in &report.groups {
        println!(
            "{:<6} {:<16} {:<12} n={:<3} normalized AUC {:.3} ± {:.3}",
            g.microphone.to_string(),
            g.object,
            g.fingerprint_material,
            g.count,
            g.normalized_mean,
            g.normalized_std
        );
    }
    Ok(())
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
