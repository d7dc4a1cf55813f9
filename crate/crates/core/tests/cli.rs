use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const M1: &str = "[model]\npremium_rate = 2.0\nclaim_intensity = 1.0\n[model.claims]\nkind = \"exponential\"\n[model.claims.params]\nrate = 1.0\n";

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, format!("{M1}\n{body}")).unwrap();
    path
}

fn ruinlab(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruinlab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("RUINLAB_WORKERS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ruin_run_writes_a_table_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[command]\nname = \"ruin\"\nu = [0, 4]\npaths = 20000\nmethod = \"tilted\"\n");
    let out = dir.path().join("out");
    let o = ruinlab(&["ruin", "--workers", "2", "--seed", "3"], &config, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("ruin.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# ruinlab ") && first.contains("command=ruin") && first.contains("seed=3"), "{first}");
    assert_eq!(text.lines().nth(1).unwrap().split(',').next(), Some("u"));
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[command]\nname = \"ruin\"\nu = [1]\ncolour = 2\n");
    let o = ruinlab(&[], &config, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("command.colour") && err.contains("line"), "{err}");
}

#[test]
fn command_mismatch_and_missing_file_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[command]\nname = \"limits\"\n");
    let o = ruinlab(&["ruin"], &config, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("command.name"));
    let o = ruinlab(&[], &dir.path().join("absent.toml"), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.toml"));
}

#[test]
fn underpowered_validation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[command]\nname = \"validate\"\npaths = 100\nexcursions = 100\n");
    let out = dir.path().join("out");
    let o = ruinlab(&["--format", "json"], &config, &out);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("insufficient_power"));
    assert!(out.join("validate.json").exists());
}

#[test]
fn worker_count_comes_from_the_environment_when_the_flag_is_absent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[command]\nname = \"ruin\"\nu = [2]\npaths = 2000\n");
    let run = |env: &str, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ruinlab"));
        cmd.arg("--config").arg(&config).arg("--out").arg(dir.path().join("out")).env("RUINLAB_WORKERS", env);
        if let Some(w) = flag {
            cmd.args(["--workers", w]);
        }
        cmd.output().unwrap()
    };
    // an unparsable value is read, and rejected, only without the flag
    assert_eq!(run("many", None).status.code(), Some(1));
    assert_eq!(run("many", Some("2")).status.code(), Some(0));
    assert_eq!(run("3", None).status.code(), Some(0));
}
