use std::path::Path;
use std::process::{Command, Output};

use ecgl::io::{manifest_config, parse_config, read_time_series};

const SMALL: &str = "\
[grid]
d = 3
n_per_axis = 16
half_length = 4.0

[stepper]
dt = 0.02
dt_min = 1e-6
decay_h1_threshold = 1e-2
max_time = 40.0

[experiment]
family = \"gaussian\"
sigma = 0.5
amplitudes = [0.1]
";

fn ecgl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecgl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn thresholds_prints_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", "[grid]\nd = 3\n");
    let o = ecgl(dir.path(), &["thresholds", "--config", &c]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .and_then(|v| v.trim_start_matches(" = ").parse().ok())
            .unwrap()
    };
    assert!((value("grad_norm_sq_W") - 12.8207).abs() < 1e-3);
    assert!((value("energy_W") - 4.2736).abs() < 1e-3);
}

#[test]
fn zero_datum_run_writes_start_and_terminal_rows() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", &SMALL.replace("[0.1]", "[0.0]"));
    let o = ecgl(dir.path(), &["run", "--config", &c, "--out", "z"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_time_series(&dir.path().join("z/trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].t, 0.0);
    assert_eq!(rows[1].kinetic, 0.0);
    let manifest = std::fs::read_to_string(dir.path().join("z/manifest.toml")).unwrap();
    assert!(manifest.contains("Decayed"));
    assert!(manifest.contains("code_version"));
}

#[test]
fn manifest_config_reparses_identically() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(
        dir.path(),
        "c.toml",
        &format!("{SMALL}\n[output]\ndirectory = \"m\"\n"),
    );
    let o = ecgl(dir.path(), &["run", "--config", &c, "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("m/manifest.toml")).unwrap();
    assert_eq!(
        manifest_config(&text).unwrap(),
        parse_config(&dir.path().join(&c)).unwrap()
    );
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(
        dir.path(),
        "c.toml",
        "[grid]\nd = 3\nn_per_axis = 7\n[z]\ntheta = 2.0\n",
    );
    let o = ecgl(dir.path(), &["run", "--config", &c]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("z.theta") && err.contains("even"), "{err}");

    let o = ecgl(dir.path(), &["run"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ecgl(dir.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));

    let c = write(dir.path(), "k.toml", SMALL);
    let o = ecgl(dir.path(), &["inviscid", "--config", &c]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.kind"));
}

#[test]
fn misclassified_sweep_exits_three_and_names_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    // too short a horizon for a trusted subcritical cell to decay
    let text = SMALL
        .replace("n_per_axis = 16", "n_per_axis = 32")
        .replace("half_length = 4.0", "half_length = 6.0")
        .replace("max_time = 40.0", "max_time = 0.1")
        .replace("decay_h1_threshold = 1e-2", "decay_h1_threshold = 1e-6");
    let c = write(dir.path(), "c.toml", &text);
    let o = ecgl(
        dir.path(),
        &["sweep", "--config", &c, "--out", "s", "--jobs", "2"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(
        err.contains("a = 0.1") && err.contains("misclassified") && err.contains("Decayed"),
        "{err}"
    );
    let summary = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(dir.path().join("s/cells/cell_000.csv").exists());
}

#[test]
fn passing_sweep_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", &SMALL.replace("[0.1]", "[0.05, 0.1]"));
    let o = ecgl(dir.path(), &["sweep", "--config", &c, "--out", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn resume_reaches_the_same_terminal_state() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[output]\nrecord_cadence = 10\ncheckpoint_cadence = 50\n");
    let c = write(dir.path(), "c.toml", &text);
    let o = ecgl(dir.path(), &["run", "--config", &c, "--out", "full"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = ecgl(
        dir.path(),
        &[
            "resume",
            "--config",
            &c,
            "--out",
            "rest",
            "--checkpoint",
            "full/checkpoint.bin",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let full = std::fs::read_to_string(dir.path().join("full/manifest.toml")).unwrap();
    let rest = std::fs::read_to_string(dir.path().join("rest/manifest.toml")).unwrap();
    let status = |m: &str| {
        m.lines()
            .find(|l| l.starts_with("status"))
            .unwrap()
            .to_string()
    };
    assert_eq!(status(&full), status(&rest));
    assert!(status(&full).contains("Decayed"));

    let a = read_time_series(&dir.path().join("full/trajectory.csv")).unwrap();
    let b = read_time_series(&dir.path().join("rest/trajectory.csv")).unwrap();
    let cadence_time = 10.0 * 0.02;
    assert!((a.last().unwrap().t - b.last().unwrap().t).abs() <= cadence_time + 1e-12);
    // resumed rows start after the checkpoint and retrace the original ones
    assert!(b[0].t > 0.0);
    let original = a.iter().find(|r| (r.t - b[0].t).abs() < 1e-9).unwrap();
    assert!((original.kinetic - b[0].kinetic).abs() <= 1e-10 * original.kinetic);
}

#[test]
fn finished_checkpoints_cannot_resume() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", &SMALL.replace("[0.1]", "[0.0]"));
    assert_eq!(
        ecgl(dir.path(), &["run", "--config", &c, "--out", "z"])
            .status
            .code(),
        Some(0)
    );
    let o = ecgl(
        dir.path(),
        &[
            "resume",
            "--config",
            &c,
            "--checkpoint",
            "z/final_state.bin",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}
