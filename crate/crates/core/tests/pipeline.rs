//! End-to-end pipeline tests driving the compiled binary: exit-code
//! contract, determinism of the emitted artifacts, and config validation.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaplab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary launches")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const SWEEP_CONFIG: &str = r#"
[lattice]
kind = "chain"
n = 6

[model]
kind = "xxz"
sector = 0
jxy = 1.0
jz = 4.0

[model.random]
seed = 7
jxy_range = [0.5, 1.0]
jz_range = [2.0, 3.0]

[tolerances]
eps_deg = 0.5
"#;

#[test]
fn sweep_outputs_are_deterministic_across_threads_and_reruns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SWEEP_CONFIG);
    let dirs = ["a", "b", "c"];
    let threads = ["1", "1", "4"];
    for (d, t) in dirs.iter().zip(threads) {
        let out = tmp.path().join(d);
        let res = run(&[
            "sweep",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--threads",
            t,
            "--seed",
            "42",
        ]);
        assert!(
            res.status.success(),
            "sweep failed: {}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let csv_a = read(&tmp.path().join("a"), "sweep.csv");
    let json_a = read(&tmp.path().join("a"), "sweep.json");
    for d in &dirs[1..] {
        assert_eq!(csv_a, read(&tmp.path().join(d), "sweep.csv"), "sweep.csv differs in {d}");
        assert_eq!(json_a, read(&tmp.path().join(d), "sweep.json"), "sweep.json differs in {d}");
    }
    // The seed override must actually steer the random coupling draw.
    let out = tmp.path().join("other-seed");
    let res = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "43"]);
    assert!(res.status.success());
    assert_ne!(csv_a, read(&out, "sweep.csv"), "different seeds must change the correlations");
}

#[test]
fn spectrum_exits_three_when_no_uniform_gap_exists() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "nogap.toml",
        r#"
[lattice]
kind = "chain"
n = 12
periodic = true

[model]
kind = "xxz"
sector = 0
jxy = 1.0
jz = 0.0

[tolerances]
gap_min = 2.0
"#,
    );
    let out = tmp.path().join("out");
    let res = run(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn configuration_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let malformed = write_config(tmp.path(), "malformed.toml", "not toml {{{");
    let res = run(&["spectrum", "--config", &malformed, "--out", out]);
    assert_eq!(res.status.code(), Some(2));

    let unknown_key = write_config(
        tmp.path(),
        "unknown.toml",
        "[lattice]\nkind = \"chain\"\nn = 4\nbogus = 1\n",
    );
    let res = run(&["lattice", "--config", &unknown_key, "--out", out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&res.stderr).contains("bogus"),
        "unknown-key diagnostics should name the key"
    );

    // The twist correction operators are only defined for transverse
    // exchange models; a hubbard config must be rejected up front.
    let hubbard = write_config(
        tmp.path(),
        "hubbard.toml",
        r#"
[lattice]
kind = "chain"
n = 4

[model]
kind = "hubbard"
sector = 4
t = 1.0
u = 6.0
"#,
    );
    let res = run(&["verify-lemmas", "--config", &hubbard, "--out", out]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn inadmissible_twist_grid_is_a_note_not_a_violation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "strong.toml",
        r#"
[lattice]
kind = "chain"
n = 6

[model]
kind = "xxz"
sector = 0
jxy = 1.0
jz = 8.0

[tolerances]
eps_deg = 0.5

[twist]
alpha_grid = [2.0]
"#,
    );
    let out = tmp.path().join("out");
    let res = run(&["verify-lemmas", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&read(&out, "lemmas.json")).expect("lemmas.json parses");
    assert!(report["alpha0"].is_null(), "alpha0 must be absent: {report}");
    assert!(
        report["note"].as_str().unwrap_or_default().contains("sufficiently-large-volume"),
        "explanatory note expected: {report}"
    );
}

#[test]
fn empty_twist_annulus_passes_with_vanishing_corrections() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tiny.toml",
        r#"
[lattice]
kind = "chain"
n = 2

[model]
kind = "xxz"
sector = 0
jxy = 1.0
jz = 8.0

[twist]
radius = 2
"#,
    );
    let out = tmp.path().join("out");
    let res = run(&["verify-lemmas", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&read(&out, "lemmas.json")).expect("lemmas.json parses");
    assert!(report["alpha0"].is_number(), "all strengths admissible: {report}");
}

#[test]
fn lattice_subcommand_needs_no_model_section() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "gasket.toml",
        "[lattice]\nkind = \"gasket\"\ngeneration = 2\n",
    );
    let out = tmp.path().join("out");
    let res = run(&["lattice", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&read(&out, "lattice.json")).expect("lattice.json parses");
    assert_eq!(report["schema_version"], "1");
    assert_eq!(report["n_sites"], 15);
    assert!(report["dimension"].is_number());

    // Model-dependent subcommands must ask for the missing section.
    let res = run(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&res.stderr).contains("[model]"),
        "stderr should point at the missing section"
    );
}

#[test]
fn csv_floats_are_emitted_with_full_precision() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "spec.toml",
        r#"
[lattice]
kind = "chain"
n = 6

[model]
kind = "xxz"
sector = 0
jxy = 1.0
jz = 4.0

[tolerances]
eps_deg = 0.5
"#,
    );
    let out = tmp.path().join("out");
    let res = run(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let csv = String::from_utf8(read(&out, "spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.split(',').count() >= 2, "header row expected, got {header}");
    let first = lines.next().expect("at least one energy row");
    let energy = first.split(',').last().unwrap();
    assert!(
        energy.contains('e') && energy.splitn(2, 'e').next().unwrap().len() >= 17,
        "16 fractional digits expected, got {energy}"
    );
}
