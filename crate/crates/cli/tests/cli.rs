use std::path::Path;
use std::process::{Command, Output};

fn ppes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppes")).args(args).output().expect("spawn ppes")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn preset_round_trips_through_run() {
    let out = ppes(&["preset", "tgv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("case = \"tgv\""), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let small = text.replace("p = 3\n", "p = 2\n").replace("k = 4\n", "k = 2\nmax_steps = 2\n");
    let cfg = write_config(dir.path(), "tgv.toml", &small);
    let outdir = dir.path().join("out");
    let out = ppes(&["run", &cfg, "--seed", "9", "--out-dir", outdir.to_str().unwrap(), "--dump-operators"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("case=tgv steps=2"), "{stdout}");
    assert!(stdout.contains("audit positivity=true"), "{stdout}");
    let manifest = std::fs::read_to_string(outdir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 9"), "{manifest}");
    assert!(outdir.join("operators_p2_D.csv").exists());
}

#[test]
fn unknown_case_is_rejected() {
    let out = ppes(&["preset", "no_such_case"]);
    assert!(!out.status.success());
}

#[test]
fn bad_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "case = \"tgv\"\nbogus_key = 1\n");
    let out = ppes(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let missing = ppes(&["run", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failed_audit_exits_with_code_1() {
    // The unlimited scheme cannot hold the strong blast wave.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "blast.toml", "case = \"riemann_1d\"\nscheme = \"ESSC\"\nk = 20\nvtk = false\n");
    let out = ppes(&["audit", &cfg]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("completed=false"), "{stdout}");
}
