use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hyperlab_harness::output::{Comparison, Verdict, VerdictFile};

fn hyperlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperlab")).args(args).output().expect("binary runs")
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn write_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(default_config()).unwrap();
    let path = dir.join("config.toml");
    std::fs::write(&path, edit(text)).unwrap();
    path
}

fn write_verdicts(path: &Path, hash: &str, pass: bool) {
    let mut v = Verdict::new("lemma.jordan", 0.0, Comparison::AtMost, 1e-12, 0.0);
    v.pass = pass;
    let file = VerdictFile {
        command: "lemma".into(),
        config: "config.toml".into(),
        config_hash: hash.into(),
        seed: 1,
        files: vec![],
        verdicts: vec![v],
    };
    std::fs::write(path, serde_json::to_string_pretty(&file).unwrap()).unwrap();
}

#[test]
fn the_shipped_config_parses() {
    hyperlab_harness::config::load(&default_config()).unwrap();
}

#[test]
fn empty_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    std::fs::write(&path, "").unwrap();
    let out = hyperlab(&["run", "lemma", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), |t| t.replace("[lemma]\n", "[lemma]\nmatrix_count = 3\n"));
    let out = hyperlab(&["run", "lemma", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("matrix_count"));
}

#[test]
fn out_of_range_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), |t| t.replace("mass = 1.0", "mass = -1.0"));
    let out = hyperlab(&["run", "lemma", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn claim_filter_restricts_the_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = hyperlab(&["run", "lemma", "--config", default_config().to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--claims", "lemma.jordan"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let vf: VerdictFile = serde_json::from_str(&std::fs::read_to_string(out_dir.join("verdicts.json")).unwrap()).unwrap();
    assert_eq!(vf.verdicts.len(), 1);
    assert_eq!(vf.verdicts[0].claim, "lemma.jordan");
    assert!(vf.files.is_empty());
}

#[test]
fn claims_from_another_command_are_usage_errors() {
    let out = hyperlab(&["run", "lemma", "--config", default_config().to_str().unwrap(), "--claims", "geom.bounds"]);
    assert_eq!(out.status.code(), Some(2));
    let out = hyperlab(&["run", "lemma", "--config", default_config().to_str().unwrap(), "--claims", "lemma.nothing"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_name_the_claim() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), |t| t.replace("reach = 30.0\nseparation", "reach = 2.0\nseparation"));
    let out = hyperlab(&["run", "decay", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "--claims", "decay.template"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("decay.template"));
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = default_config();
    for (out, jobs) in [(&a, "1"), (&b, "2")] {
        let o = hyperlab(&["run", "geom", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(a.join("geom.csv")).unwrap(), std::fs::read(b.join("geom.csv")).unwrap());
    let first = std::fs::read_to_string(a.join("geom.csv")).unwrap();
    assert!(first.starts_with("# config_sha256="));
}

#[test]
fn report_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (good, bad, other) = (dir.path().join("good.json"), dir.path().join("bad.json"), dir.path().join("other.json"));
    write_verdicts(&good, "aa", true);
    write_verdicts(&bad, "aa", false);
    write_verdicts(&other, "bb", true);
    let p = |x: &PathBuf| x.to_str().unwrap().to_string();

    let out = hyperlab(&["report", &p(&good)]);
    assert_eq!(out.status.code(), Some(0));
    let table = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(table.contains("lemma.jordan") && table.contains("PASS"));

    let out = hyperlab(&["report", &p(&good), &p(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));

    assert_eq!(hyperlab(&["report", &p(&good), &p(&other)]).status.code(), Some(2));
    assert_eq!(hyperlab(&["report", &p(&dir.path().join("missing.json"))]).status.code(), Some(2));
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(hyperlab(&["report", &p(&bad)]).status.code(), Some(2));
}
