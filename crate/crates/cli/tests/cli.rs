use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BINARY: &str = env!("CARGO_BIN_EXE_ductpinn");

const TINY: &str = r#"
version = 1
[sweep]
profiles = ["sinusoidal"]
frequencies = [1000.0]
[network]
layers = 2
width = 6
[training]
collocation_points = 100
[training.optimizer]
max_iterations = 20
[velocity]
collocation_points = 50
[velocity.optimizer]
max_iterations = 10
[oracle]
steps = 2000
grid_points = 51
"#;

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn ductpinn(args: &[&str]) -> Output {
    Command::new(BINARY).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> usize {
    csv::Reader::from_path(path).unwrap().records().count()
}

#[test]
fn single_case_sweep_writes_one_row_and_two_fields() {
    let dir = scratch("single");
    let config = write_config(&dir, TINY);
    let out = dir.join("out");
    let run = ductpinn(&["sweep", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(csv_rows(&out.join("error_table.csv")), 1);
    let mut fields: Vec<String> = fs::read_dir(out.join("fields"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    fields.sort();
    assert_eq!(fields, ["sinusoidal_1000Hz_pressure.csv", "sinusoidal_1000Hz_velocity.csv"]);
    assert_eq!(csv_rows(&out.join("fields/sinusoidal_1000Hz_pressure.csv")), 51);
    assert!(out.join("config.toml").is_file());
}

#[test]
fn frequency_override_multiplies_cases() {
    let dir = scratch("override");
    let config = write_config(&dir, TINY);
    let out = dir.join("out");
    let run = ductpinn(&[
        "sweep",
        "--config",
        &config,
        "--freq",
        "500,1500",
        "--velocity-method",
        "direct",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(csv_rows(&out.join("error_table.csv")), 2);
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let dir = scratch("invalid");
    let config = write_config(&dir, "version = 1\n[network]\nlayers = 0\n");
    let run = ductpinn(&["sweep", "--config", &config, "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(!dir.join("out").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = scratch("unknown");
    let config = write_config(&dir, "version = 1\n[network]\nlayer = 4\n");
    assert_eq!(ductpinn(&["show-config", "--config", &config]).status.code(), Some(1));
}

#[test]
fn missing_config_file_is_a_validation_error() {
    let run = ductpinn(&["show-config", "--config", "/nonexistent/run.toml"]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn show_config_applies_overrides() {
    let run = ductpinn(&["show-config", "--profile", "linear", "--freq", "750", "--seed", "3"]);
    assert!(run.status.success());
    let text = String::from_utf8(run.stdout).unwrap();
    let value: toml::Table = text.parse().unwrap();
    assert_eq!(value["sweep"]["profiles"].as_array().unwrap().len(), 1);
    assert_eq!(value["sweep"]["frequencies"][0].as_float(), Some(750.0));
    assert_eq!(value["training"]["seed"].as_integer(), Some(3));
}

#[test]
fn oracle_only_writes_reference_fields() {
    let dir = scratch("oracle");
    let config = write_config(&dir, TINY);
    let out = dir.join("out");
    let run = ductpinn(&["oracle-only", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(csv_rows(&out.join("fields/sinusoidal_1000Hz_oracle.csv")), 51);
}

#[test]
fn check_subcommand_passes() {
    let run = ductpinn(&["check"]);
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}
