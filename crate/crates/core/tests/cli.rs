use std::fs;
use std::path::Path;
use std::process::Command;

use ridgebeam::cli::run;

fn ridgebeam(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["ridgebeam", "--output-dir", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn header(path: impl AsRef<Path>) -> String {
    read(path).lines().next().unwrap().to_string()
}

#[test]
fn freq_golden() {
    let dir = tempfile::tempdir().unwrap();
    let code = ridgebeam(
        dir.path(),
        &[
            "freq",
            "--material",
            "ST45B",
            "--square-side-mm",
            "1.0",
            "--length-mm",
            "3.5",
        ],
    );
    assert_eq!(code, 0);
    assert_eq!(
        read(dir.path().join("freq.csv")),
        include_str!("golden/freq_st45b.csv")
    );
}

#[test]
fn freq_json_reports_interval() {
    let dir = tempfile::tempdir().unwrap();
    let code = ridgebeam(
        dir.path(),
        &[
            "--format",
            "json",
            "freq",
            "--material",
            "pla",
            "--square-side-mm",
            "1",
            "--length-mm",
            "4",
        ],
    );
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&read(dir.path().join("freq.json"))).unwrap();
    let lo = v["frequency_min_hz"].as_f64().unwrap();
    let hi = v["frequency_max_hz"].as_f64().unwrap();
    assert!(
        (14_700.0..14_800.0).contains(&lo) && (15_100.0..15_200.0).contains(&hi),
        "{lo} {hi}"
    );
    assert_eq!(v["material"], "PLA");
}

#[test]
fn bands_golden() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        ridgebeam(dir.path(), &["bands", "--threshold-db", "-42"]),
        0
    );
    assert_eq!(
        read(dir.path().join("bands.csv")),
        include_str!("golden/bands_bundled.csv")
    );

    // same curve passed as a file
    let curve = dir.path().join("mic.csv");
    fs::write(&curve, ridgebeam::mic::SAMPLE_RESPONSE_CSV).unwrap();
    let out = dir.path().join("from_file");
    assert_eq!(
        ridgebeam(
            &out,
            &[
                "bands",
                "--curve",
                curve.to_str().unwrap(),
                "--threshold-db",
                "-42"
            ]
        ),
        0
    );
    assert_eq!(
        read(out.join("bands.csv")),
        include_str!("golden/bands_bundled.csv")
    );
}

#[test]
fn design_golden() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ridgebeam(dir.path(), &["design", "--material", "ST45B"]), 0);
    assert_eq!(
        read(dir.path().join("layouts.csv")),
        include_str!("golden/layouts_st45b.csv")
    );
    assert_eq!(
        read(dir.path().join("layout.txt")),
        include_str!("golden/layout_st45b.txt")
    );
    let feasible = read(dir.path().join("feasible.csv"));
    assert_eq!(
        feasible.lines().next().unwrap(),
        "side_mm,length_mm,frequency_hz,frequency_min_hz,frequency_max_hz"
    );
    // 7 sides x 9 lengths, all in band
    assert_eq!(feasible.lines().count(), 1 + 63);

    let tpu = dir.path().join("tpu");
    assert_eq!(ridgebeam(&tpu, &["design", "--material", "TPU"]), 0);
    assert_eq!(
        read(tpu.join("layouts.csv")),
        include_str!("golden/layouts_tpu.csv")
    );
}

#[test]
fn design_with_unreachable_cap_fails_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let code = ridgebeam(
        dir.path(),
        &[
            "design",
            "--material",
            "ST45B",
            "--caps",
            "tip=4.0,thumb=2.0",
        ],
    );
    assert_eq!(code, 1);
    let layouts = read(dir.path().join("layouts.csv"));
    assert_eq!(layouts.lines().count(), 2);
    assert!(read(dir.path().join("layout.txt")).contains("FAILED"));
}

#[test]
fn sweep_golden() {
    let dir = tempfile::tempdir().unwrap();
    let code = ridgebeam(
        dir.path(),
        &[
            "sweep",
            "--material",
            "PLA",
            "--shapes",
            "square:1.0,hexagon:1.0,circle:1.0,square:1.0/0.5",
            "--length-min-mm",
            "3",
            "--length-max-mm",
            "4",
            "--steps",
            "3",
        ],
    );
    assert_eq!(code, 0);
    assert_eq!(
        read(dir.path().join("sweep.csv")),
        include_str!("golden/sweep_pla.csv")
    );
}

#[test]
fn materials_config_overrides_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("materials.toml");
    fs::write(
        &cfg,
        "[ST45B]\ndensity_g_cm3 = 1.2\nyoungs_modulus_mpa = 8000\n",
    )
    .unwrap();
    let code = ridgebeam(
        dir.path(),
        &[
            "--materials",
            cfg.to_str().unwrap(),
            "--format",
            "json",
            "freq",
            "--material",
            "ST45B",
            "--square-side-mm",
            "1",
            "--length-mm",
            "3.5",
        ],
    );
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&read(dir.path().join("freq.json"))).unwrap();
    // four times the modulus doubles the frequency
    let f = v["frequency_hz"].as_f64().unwrap();
    assert!((f / 17_024.272 - 2.0).abs() < 1e-6, "{f}");
}

fn simulate_into(dir: &Path, name: &str, fingerprint: &str, gain: &str, seed: &str) -> i32 {
    ridgebeam(
        dir,
        &[
            "--seed",
            seed,
            "simulate",
            "--material",
            "ST45B",
            "--square-side-mm",
            "1",
            "--length-mm",
            "4",
            "--duration-s",
            "0.02",
            "--gain",
            gain,
            "--fingerprint",
            fingerprint,
            "--name",
            name,
        ],
    )
}

#[test]
fn simulate_and_analyze_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(simulate_into(&data, "base", "Default", "0.1", "1"), 0);
    assert_eq!(simulate_into(&data, "tuned", "ST45B", "0.3", "2"), 0);
    assert!(data.join("base.wav").is_file());
    let sidecar: serde_json::Value = serde_json::from_str(&read(data.join("tuned.json"))).unwrap();
    assert_eq!(sidecar["meta"]["fingerprint_material"], "ST45B");
    assert_eq!(sidecar["sample_rate_hz"], 500_000.0);
    assert_eq!(sidecar["samples"], 10_000);

    let out = dir.path().join("out");
    let pattern = format!("{}/*.wav", data.display());
    assert_eq!(
        ridgebeam(&out, &["analyze", "--files", &pattern, "--spectra"]),
        0
    );
    assert_eq!(
        header(out.join("auc.csv")),
        "source,microphone,object,fingerprint_material,auc,normalized"
    );
    assert_eq!(
        header(out.join("groups.csv")),
        "microphone,object,fingerprint_material,count,mean_auc,normalized_mean,normalized_std"
    );
    assert_eq!(
        header(out.join("spectra/Left_surface_ST45B.csv")),
        "frequency_hz,magnitude,amplitude_db"
    );
    let ratios: serde_json::Value = serde_json::from_str(&read(out.join("ratios.json"))).unwrap();
    assert_eq!(ratios["Left"]["Default"]["surface"]["normalized_mean"], 1.0);
    let r = ratios["Left"]["ST45B"]["surface"]["normalized_mean"]
        .as_f64()
        .unwrap();
    assert!(r > 2.0 && r < 4.0, "{r}");
}

#[test]
fn run_sidecar_lists_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ridgebeam(dir.path(), &["--seed", "9", "bands"]), 0);
    let v: serde_json::Value = serde_json::from_str(&read(dir.path().join("run.json"))).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["outputs"][0], "bands.csv");
    assert_eq!(v["argv"][1], "--output-dir");
    assert!(v["started_at"].as_str().unwrap().contains('T'));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(ridgebeam(d, &["--no-such-flag", "bands"]), 2);
    assert_eq!(
        ridgebeam(d, &["freq", "--material", "PLA", "--length-mm", "4"]),
        2
    );
    assert_eq!(
        ridgebeam(
            d,
            &[
                "freq",
                "--material",
                "PLA",
                "--square-side-mm",
                "1",
                "--circle-radius-mm",
                "1",
                "--length-mm",
                "4"
            ]
        ),
        2
    );
    assert_eq!(
        ridgebeam(
            d,
            &[
                "freq",
                "--material",
                "PLA",
                "--square-side-mm",
                "one",
                "--length-mm",
                "4"
            ]
        ),
        2
    );
    assert_eq!(
        ridgebeam(d, &["design", "--material", "PLA", "--caps", "tip:4"]),
        2
    );
    assert_eq!(
        ridgebeam(d, &["design", "--material", "PLA", "--caps", "wrist=4"]),
        2
    );
    assert_eq!(ridgebeam(d, &["sweep", "--shapes", "triangle:1"]), 2);
    assert_eq!(ridgebeam(d, &["analyze"]), 2);
    assert_eq!(
        ridgebeam(d, &["analyze", "--manifest", "m.json", "--files", "*.wav"]),
        2
    );
    assert_eq!(ridgebeam(d, &["--format", "xml", "bands"]), 2);
}

#[test]
fn domain_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        ridgebeam(
            d,
            &[
                "freq",
                "--material",
                "Wood",
                "--square-side-mm",
                "1",
                "--length-mm",
                "4"
            ]
        ),
        1
    );
    assert_eq!(
        ridgebeam(
            d,
            &[
                "freq",
                "--material",
                "PLA",
                "--square-side-mm",
                "1",
                "--inner-mm",
                "1.5",
                "--length-mm",
                "4"
            ]
        ),
        1
    );
    assert_eq!(
        ridgebeam(
            d,
            &[
                "freq",
                "--material",
                "PLA",
                "--square-side-mm",
                "1",
                "--length-mm",
                "4",
                "--mode",
                "0"
            ]
        ),
        1
    );
    assert_eq!(
        ridgebeam(
            d,
            &[
                "freq",
                "--material",
                "PLA",
                "--square-side-mm",
                "-1",
                "--length-mm",
                "4"
            ]
        ),
        1
    );
    // third mode of a 3.5 mm beam is above the 250 kHz Nyquist limit
    assert_eq!(
        ridgebeam(
            d,
            &[
                "simulate",
                "--material",
                "ST45B",
                "--square-side-mm",
                "1",
                "--length-mm",
                "3.5"
            ]
        ),
        1
    );
    assert_eq!(
        ridgebeam(
            d,
            &["design", "--material", "ST45B", "--side-min-mm", "0.2"]
        ),
        1
    );
    let curve = d.join("distance.csv");
    fs::write(&curve, ridgebeam::mic::SAMPLE_ATTENUATION_CSV).unwrap();
    assert_eq!(
        ridgebeam(d, &["bands", "--curve", curve.to_str().unwrap()]),
        1
    );
    assert_eq!(
        ridgebeam(
            d,
            &["analyze", "--files", &format!("{}/none*.wav", d.display())]
        ),
        1
    );
}

#[test]
fn binary_uses_output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_ridgebeam"))
        .args([
            "freq",
            "--material",
            "TPU",
            "--square-side-mm",
            "2.6",
            "--length-mm",
            "2.0",
        ])
        .env("RIDGEBEAM_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&status.stdout).contains("9.019 kHz"));
    assert!(dir.path().join("freq.csv").is_file());
    assert!(dir.path().join("run.json").is_file());

    let status = Command::new(env!("CARGO_BIN_EXE_ridgebeam"))
        .arg("--bogus")
        .env("RIDGEBEAM_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn analyze_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    for (name, gain) in [("base", "0.05"), ("tuned", "0.25")] {
        let args = [
            "simulate",
            "--material",
            "ST45B",
            "--square-side-mm",
            "1",
            "--length-mm",
            "4",
            "--duration-s",
            "0.02",
            "--no-noise",
            "--gain",
            gain,
            "--name",
            name,
        ];
        assert_eq!(ridgebeam(&data, &args), 0);
    }
    let mapping = "object_id,object_name,material_class,repetition,procedure,force_codes,microphone,path,fingerprint_material\n\
                   stick,wooden stick,wood,1,LateralMotion,400,Palm,base.wav,Default\n\
                   stick,wooden stick,wood,2,LateralMotion,400,Palm,tuned.wav,ST45B\n";
    let manifest = ridgebeam::dataset::manifest_from_mapping(mapping).unwrap();
    let path = data.join("manifest.json");
    fs::write(&path, manifest.to_json()).unwrap();

    let out = dir.path().join("out");
    assert_eq!(
        ridgebeam(
            &out,
            &[
                "--format",
                "json",
                "analyze",
                "--manifest",
                path.to_str().unwrap()
            ]
        ),
        0
    );
    let auc: serde_json::Value = serde_json::from_str(&read(out.join("auc.json"))).unwrap();
    assert_eq!(auc["recordings"][0]["source"], "stick/1/LateralMotion/Palm");
    let ratios: serde_json::Value = serde_json::from_str(&read(out.join("ratios.json"))).unwrap();
    let r = ratios["Palm"]["ST45B"]["stick"]["normalized_mean"]
        .as_f64()
        .unwrap();
    // float32 samples limit agreement to about 1e-7 relative
    assert!((r - 5.0).abs() < 1e-6, "{r}");
}
