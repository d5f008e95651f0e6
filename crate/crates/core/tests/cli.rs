use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn epg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epg")).args(args).arg("--out-dir").arg(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_accepts_the_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = epg(dir.path(), &["validate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("configuration valid"));
}

#[test]
fn invalid_death_rate_names_the_condition() {
    let dir = tempfile::tempdir().unwrap();
    let o = epg(dir.path(), &["--delta", "0.02", "validate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("delta<omega"), "{}", stderr(&o));
}

#[test]
fn json_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let o = epg(dir.path(), &["--json-errors", "--cstar", "0.2", "validate"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert!(v.to_string().contains("budget"), "{v}");
}

#[test]
fn missing_config_file_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = epg(dir.path(), &["--config", "/nonexistent/run.toml", "validate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nonexistent"));
}

#[test]
fn equilibrium_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = epg(dir.path(), &["--grid-points", "12", "equilibrium"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("equilibrium.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("B,I_hat,R_hat,a,dI_dB,dR_dB,da_dB"));
    assert_eq!(lines.count(), 12);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("equilibrium.json")).unwrap()).unwrap();
    assert_eq!(json["allocation"]["xstar"], serde_json::json!([0.5, 0.5]));
}

#[test]
fn simulate_is_reproducible_and_certify_reads_its_csv() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--horizon", "300", "--stride", "50", "simulate"];
    let (o1, o2) = (epg(d1.path(), &args), epg(d2.path(), &args));
    assert!(o1.status.success() && o2.status.success(), "{}", stderr(&o1));
    assert!(stdout(&o1).contains("PASS"));
    let (a, b) =
        (fs::read(d1.path().join("trajectory.csv")).unwrap(), fs::read(d2.path().join("trajectory.csv")).unwrap());
    assert_eq!(a, b);
    let header = String::from_utf8_lossy(&a).lines().next().unwrap().to_string();
    assert_eq!(header, "t,I,R,x1,x2,q,B,cost,avg_cost,L");
    assert!(d1.path().join("manifest.json").exists());

    let csv = d1.path().join("trajectory.csv");
    let o = epg(d1.path(), &["certify", "--trajectory", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d1.path().join("certification.json")).unwrap()).unwrap();
    assert_eq!(rep["pass"], serde_json::json!(true));
}

#[test]
fn bounds_sweep_covers_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    let o = epg(dir.path(), &["bounds", "--upsilons", "1,2,6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("upsilon,beta_star,delta,alpha,pi_tilde"));
    assert_eq!(lines.count(), 15);
}

#[test]
fn config_file_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[policy]\ncstar = 0.05\nupsilon = 1.0\n").unwrap();
    let o = epg(dir.path(), &["--config", cfg.to_str().unwrap(), "validate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("x* = [0.25, 0.75]"), "{}", stdout(&o));
}

#[test]
fn shipped_example_config_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example1.toml");
    let o = epg(dir.path(), &["--config", cfg.to_str().unwrap(), "validate"]);
    assert!(o.status.success(), "{}", stderr(&o));
}
