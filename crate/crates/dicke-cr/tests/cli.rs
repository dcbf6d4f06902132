//! End-to-end tests of the `dicke-cr` binary: happy paths for `simulate` and
//! `compare`, the manifest round trip, output-directory resolution, exit
//! codes, and spot checks of the file formats.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

/// Command for the compiled binary, isolated from the ambient environment.
fn bin(workdir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dicke-cr"));
    cmd.current_dir(workdir).env_remove("DICKE_CR_OUT");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary spawns")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("binary exits normally")
}

/// A fast, warning-free scenario: j = 1/2, a 21-level field, nine samples.
fn tiny_config(methods: &str, outputs: &str) -> String {
    format!(
        "# integration-test scenario\n\
         delta = 1.0\n\
         omega = 0.5\n\
         lambda = 0.05\n\
         two_j = 1\n\
         n_max = 20\n\
         theta0 = 1.0\n\
         phi0 = 0.5\n\
         alpha0 = 1.0,0.0\n\
         t_max = 2.0\n\
         n_samples = 9\n\
         methods = {methods}\n\
         outputs = {outputs}\n"
    )
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.conf");
    std::fs::write(&path, text).expect("config written");
    path
}

#[test]
fn simulate_writes_channel_files_summary_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &tiny_config("exact", "jz,norm"));
    let out = tmp.path().join("run");

    let output = run(bin(tmp.path()).args(["simulate", "--config"]).arg(&config).arg("--out").arg(&out));
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    assert!(String::from_utf8_lossy(&output.stdout).contains("wrote"));

    for name in ["exact_jz.dat", "exact_norm.dat", "summary.txt", "manifest.txt"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }

    // Channel files: a method/channel header, a column header, then one row
    // per sample with four columns (t, two rescaled times, value).
    let jz = std::fs::read_to_string(out.join("exact_jz.dat")).unwrap();
    let mut lines = jz.lines();
    assert_eq!(lines.next(), Some("# method: exact   channel: jz"));
    assert!(lines.next().unwrap().starts_with("# columns: t"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9, "one row per sample");
    let first: Vec<f64> = rows[0].split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(first.len(), 4);
    assert_eq!(first[0], 0.0);
    // ⟨Jz⟩(0) = j·cos(θ₀) for the coherent initial state.
    assert!((first[3] - 0.5 * 1.0f64.cos()).abs() < 1e-12);

    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("# dicke-cr scenario (resolved)"));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("t_e = "), "summary lists derived frequencies:\n{summary}");
}

#[test]
fn compare_adds_a_pairwise_report() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &tiny_config("exact,pert,sca", "jz"));
    let out = tmp.path().join("run");

    let output = run(bin(tmp.path()).args(["compare", "--config"]).arg(&config).arg("--out").arg(&out));
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));

    let report = std::fs::read_to_string(out.join("compare_report.txt")).unwrap();
    for key in ["sup_exact_pert_jz", "rms_exact_pert_jz", "sup_exact_sca_jz", "sup_pert_sca_jz"] {
        assert!(report.contains(key), "missing {key} in:\n{report}");
    }
    // Every method still writes its own channel file.
    for name in ["exact_jz.dat", "pert_jz.dat", "sca_jz.dat"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
}

#[test]
fn compare_rejects_a_single_method_scenario() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &tiny_config("exact", "jz"));
    let output = run(bin(tmp.path()).args(["compare", "--config"]).arg(&config));
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("at least two methods"));
}

#[test]
fn manifest_reruns_reproduce_outputs_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &tiny_config("exact,pert", "jz,entropy"));
    let (first, second) = (tmp.path().join("first"), tmp.path().join("second"));

    let output = run(bin(tmp.path()).args(["simulate", "--config"]).arg(&config).arg("--out").arg(&first));
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    let output = run(bin(tmp.path())
        .args(["simulate", "--config"])
        .arg(first.join("manifest.txt"))
        .arg("--out")
        .arg(&second));
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));

    let mut names: Vec<String> = std::fs::read_dir(&first)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 6, "expected a full output set, got {names:?}");
    for name in names {
        let a = std::fs::read(first.join(&name)).unwrap();
        let b = std::fs::read(second.join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between the run and its manifest rerun");
    }
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &tiny_config("exact", "jz"));
    let env_dir = tmp.path().join("from-env");

    let output = run(bin(tmp.path())
        .args(["simulate", "--config"])
        .arg(&config)
        .env("DICKE_CR_OUT", &env_dir));
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    assert!(env_dir.join("exact_jz.dat").is_file());

    // An explicit --out beats the environment.
    let flag_dir = tmp.path().join("from-flag");
    let output = run(bin(tmp.path())
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&flag_dir)
        .env("DICKE_CR_OUT", tmp.path().join("ignored")));
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    assert!(flag_dir.join("exact_jz.dat").is_file());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn missing_scenario_selection_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let output = run(bin(tmp.path()).arg("simulate"));
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("--preset"));
}

#[test]
fn unknown_preset_exits_with_the_config_code() {
    let tmp = TempDir::new().unwrap();
    let output = run(bin(tmp.path()).args(["simulate", "--preset", "fig99"]));
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("fig99"));
}

#[test]
fn malformed_config_exits_with_the_config_code() {
    let tmp = TempDir::new().unwrap();
    let text = format!("{}unheard_of = 1\n", tiny_config("exact", "jz"));
    let config = write_config(tmp.path(), &text);
    let output = run(bin(tmp.path()).args(["simulate", "--config"]).arg(&config));
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("unknown key"));
}

#[test]
fn overfull_coherent_amplitude_exits_with_the_numerical_code() {
    let tmp = TempDir::new().unwrap();
    // |α₀|² + 8|α₀| = 48 exceeds n_max = 20: the initial state cannot be
    // represented on the Fock grid.
    let text = tiny_config("exact", "jz").replace("alpha0 = 1.0,0.0", "alpha0 = 4.0,0.0");
    let config = write_config(tmp.path(), &text);
    let output = run(bin(tmp.path()).args(["simulate", "--config"]).arg(&config));
    assert_eq!(code(&output), 3);
    assert!(stderr(&output).contains("Fock cutoff"));
}

#[test]
fn strict_mode_escalates_warnings_to_failures() {
    let tmp = TempDir::new().unwrap();
    // |α₀| = 2 < 3 draws a perturbative-accuracy warning but still runs.
    let text = tiny_config("pert", "jz").replace("alpha0 = 1.0,0.0", "alpha0 = 2.0,0.0");
    let config = write_config(tmp.path(), &text);

    let out = tmp.path().join("lenient");
    let output = run(bin(tmp.path()).args(["simulate", "--config"]).arg(&config).arg("--out").arg(&out));
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    assert!(stderr(&output).contains("warning:"));
    assert!(out.join("pert_jz.dat").is_file());

    let strict_out = tmp.path().join("strict");
    let output = run(bin(tmp.path())
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&strict_out)
        .arg("--strict"));
    assert_eq!(code(&output), 3);
    assert!(stderr(&output).contains("strict mode"));
    // Strict failures abort before any file is written.
    assert!(!strict_out.exists());
}

#[test]
fn preset_smoke_test_runs_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("fig9");
    let output =
        run(bin(tmp.path()).args(["compare", "--preset", "fig9", "--parallel", "--out"]).arg(&out));
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    for name in ["exact_jz.dat", "sca_jz.dat", "driven_jz.dat", "compare_report.txt", "manifest.txt"]
    {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let report = std::fs::read_to_string(out.join("compare_report.txt")).unwrap();
    assert!(report.contains("sup_sca_driven_jz"));
}
