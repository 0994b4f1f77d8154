//! Drives the `xlmimo` binary the way a user would.

use std::path::Path;
use std::process::{Command, Output};

fn xlmimo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xlmimo"))
        .args(args)
        .current_dir(dir)
        .env_remove("XLMIMO_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const DESK: &str = "desk_scale = true\nseed = 3\n";

#[test]
fn run_scenario_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "desk.toml", DESK);
    for algo in ["rm-jgd", "sdr-rrs", "fdb"] {
        let out = dir.path().join(format!("{algo}.csv"));
        let o = xlmimo(
            &[
                "run-scenario",
                "--config",
                &config,
                "--algo",
                algo,
                "--seed",
                "5",
                "--out",
                out.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2, "{text}");
        assert!(lines[0].starts_with("axis,value,repetition"));
        assert!(
            lines[1].contains(",5,"),
            "seed override missing: {}",
            lines[1]
        );
    }
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.toml",
        "desk_scale = true\n[array]\nspacing_factor = 0.5\n",
    );
    let o = xlmimo(
        &[
            "run-scenario",
            "--config",
            &config,
            "--algo",
            "fdb",
            "--out",
            "x.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("spacing_factor"));

    let missing = xlmimo(&["sweep", "--spec", "nope.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(2));

    let algo = xlmimo(
        &[
            "run-scenario",
            "--config",
            &config,
            "--algo",
            "newton",
            "--out",
            "x.csv",
        ],
        dir.path(),
    );
    assert!(!algo.status.success());
}

#[test]
fn seeded_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.toml",
        "sweep_axis = \"scnr_threshold\"\nvalues = [0, 10]\nrepetitions = 2\nseed = 77\noutput_path = \"first.csv\"\n[base]\ndesk_scale = true\n",
    );
    let a = xlmimo(&["sweep", "--spec", &spec, "--workers", "1"], dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = xlmimo(
        &[
            "sweep",
            "--spec",
            &spec,
            "--out",
            "second.csv",
            "--workers",
            "2",
        ],
        dir.path(),
    );
    assert!(b.status.success());
    let first = std::fs::read(dir.path().join("first.csv")).unwrap();
    let second = std::fs::read(dir.path().join("second.csv")).unwrap();
    assert_eq!(first, second);
    assert_eq!(
        String::from_utf8(first).unwrap().lines().count(),
        1 + 2 * 3 * 2
    );
    assert!(dir.path().join("first.summary.csv").exists());
    assert!(stdout(&a).contains("12 rows"));
}

#[test]
fn music_writes_csv_and_binary_grids() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "desk.toml", DESK);
    let o = xlmimo(
        &[
            "music",
            "--config",
            &config,
            "--grid",
            "10:0.5:20,20:0.5:30",
            "--snapshots",
            "64",
            "--out",
            "scan.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 21 * 21);
    let bin = std::fs::read(dir.path().join("scan.bin")).unwrap();
    assert_eq!(bin.len(), 8 * (2 + 4 + 21 * 21));
    assert!(stdout(&o).contains("peak at"));

    let bad = xlmimo(
        &["music", "--config", &config, "--grid", "10:0:20,1:1:2"],
        dir.path(),
    );
    assert!(!bad.status.success());
}

#[test]
fn quick_validate_passes_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = xlmimo(
        &["validate", "--quick", "--report", "report.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("check,passed,wall_ms,detail"));
    assert!(!report.contains(",false,"));
}
