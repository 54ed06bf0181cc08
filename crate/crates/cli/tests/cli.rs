use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn phasekey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasekey"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_lists_every_config_key() {
    let out = phasekey(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (key, ..) in phasekey::harness::CONFIG_KEYS {
        assert!(text.contains(&format!("  {key} ")), "help misses `{key}`");
    }
}

#[test]
fn exchange_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "k = 16\nrounds = 50\n");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let run = phasekey(&[
            "exchange",
            "--config",
            &config,
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            run.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
        let stdout = String::from_utf8(run.stdout).unwrap();
        assert_eq!(stdout.lines().count(), 1);
        assert!(stdout.contains("PASS"));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = dir.path().join("c.csv");
    phasekey(&[
        "exchange",
        "--config",
        &config,
        "--seed",
        "10",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // A negative threshold can never be met.
    let config = write_config(dir.path(), "rounds = 2000\nk = 12\nmi_threshold = -1.0\n");
    let out = dir.path().join("leak.csv");
    let run = phasekey(&[
        "leakage",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        run.status.code(),
        Some(2),
        "negative threshold is a config error"
    );

    // Phase noise far beyond what the code corrects.
    let config = write_config(dir.path(), "rounds = 20\nk = 14\nsymbol_noise_std = 1.5\n");
    let run = phasekey(&[
        "exchange",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8(run.stdout).unwrap().contains("FAIL"));
    assert!(out.exists(), "report is written even when checks fail");
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(phasekey(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        phasekey(&["exchange", "--seed", "minus-one"]).status.code(),
        Some(2)
    );

    let config = write_config(dir.path(), "colour = 3\n");
    let run = phasekey(&["exchange", "--config", &config]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8(run.stderr).unwrap().contains("colour"));

    let config = write_config(dir.path(), "l = 128\nr = 127\n");
    let run = phasekey(&["exchange", "--config", &config]);
    assert_eq!(run.status.code(), Some(2));

    let missing = dir.path().join("nope.toml");
    assert_eq!(
        phasekey(&["exchange", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    // Replay without a trace names the missing field.
    let out = dir.path().join("r.csv");
    let run = phasekey(&["replay", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8(run.stderr).unwrap().contains("trace"));
}

#[test]
fn replay_fixture_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            "trace = {:?}\n",
            fixture("biased_trace.csv").to_str().unwrap()
        ),
    );
    let out = dir.path().join("replay.csv");
    let run = phasekey(&[
        "replay",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let report = fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "400");
    assert_eq!(row[1], "320");
}

#[test]
fn relative_trace_resolves_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture("biased_trace.csv"), dir.path().join("t.csv")).unwrap();
    let config = write_config(dir.path(), "trace = \"t.csv\"\n");
    let out = dir.path().join("replay.csv");
    let run = phasekey(&[
        "replay",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
}
