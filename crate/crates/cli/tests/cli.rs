//! End-to-end runs of the `rmt` binary on the shipped example configs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const COMMANDS: [&str; 7] = ["sample", "spectrum", "semicircle", "density", "opnorm", "oracle", "perturb"];

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"))
}

fn rmt(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmt"))
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).expect("readable"))
        })
        .collect();
    files.sort();
    files
}

#[test]
fn every_subcommand_succeeds_and_reruns_identically() {
    let tmp = tempfile::tempdir().expect("tempdir");
    for cmd in COMMANDS {
        let a = tmp.path().join(format!("{cmd}_a"));
        let b = tmp.path().join(format!("{cmd}_b"));
        let first = rmt(cmd, &config(cmd), &a, &["--threads", "2"]);
        assert_eq!(first.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&first.stderr));
        let second = rmt(cmd, &config(cmd), &b, &[]);
        assert_eq!(second.status.code(), Some(0), "{cmd}");
        let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
        assert!(!fa.is_empty(), "{cmd} wrote nothing");
        assert_eq!(fa, fb, "{cmd} output differs between runs");
    }
}

#[test]
fn seed_override_changes_the_sample() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(rmt("sample", &config("sample"), &a, &[]).status.success());
    assert!(rmt("sample", &config("sample"), &b, &["--seed", "99"]).status.success());
    assert_ne!(fs::read(a.join("sample.json")).unwrap(), fs::read(b.join("sample.json")).unwrap());
}

#[test]
fn failed_acceptance_exits_with_one() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let text = fs::read_to_string(config("opnorm")).unwrap().replace("\"max\": 2.3", "\"max\": 1.0");
    let path = tmp.path().join("strict.json");
    fs::write(&path, text).unwrap();
    let out = rmt("opnorm", &path, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cases = [
        ("semicircle", fs::read_to_string(config("semicircle")).unwrap().replace("\"q\": 0.8", "\"q\": 1.5")),
        ("opnorm", fs::read_to_string(config("semicircle")).unwrap()),
        ("oracle", "{ \"n\": 4 ".to_string()),
        ("sample", fs::read_to_string(config("sample")).unwrap().replace("\"half_width\": 2", "\"half_width\": 20")),
    ];
    for (i, (cmd, text)) in cases.iter().enumerate() {
        let path = tmp.path().join(format!("bad{i}.json"));
        fs::write(&path, text).unwrap();
        let out = rmt(cmd, &path, &tmp.path().join(format!("out{i}")), &[]);
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = rmt("perturb", &tmp.path().join("absent.json"), &tmp.path().join("o"), &[]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn low_growth_exponent_warns() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let text = fs::read_to_string(config("semicircle")).unwrap().replace("\"q\": 0.8", "\"q\": 0.3");
    let path = tmp.path().join("low_q.json");
    fs::write(&path, text).unwrap();
    let out = rmt("semicircle", &path, &tmp.path().join("out"), &[]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}
