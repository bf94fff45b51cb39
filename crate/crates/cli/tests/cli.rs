use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chromalayer"));
    c.env_remove("RUST_LOG");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn only_sample(root: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1);
    dirs.pop().unwrap()
}

#[test]
fn synth_then_verify_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&["synth", "--seed", "7", "--out", "d"], tmp.path()).status.success());
    let out = run(&["verify", "d"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains(": ok"));
}

#[test]
fn run_on_empty_url_list_produces_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("empty.txt"), "# nothing here\n\n").unwrap();
    let out = run(&["run", "--url-list", "empty.txt", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(tmp.path().join("o")).unwrap().count(), 0);
}

#[test]
fn verify_reports_a_loose_bbox() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&["synth", "--seed", "3", "--out", "d"], tmp.path()).status.success());
    let path = only_sample(&tmp.path().join("d")).join("bboxes.json");
    let mut doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let w = doc["annotations"][0]["bbox"][2].as_i64().unwrap();
    doc["annotations"][0]["bbox"][2] = (w + 2).into();
    std::fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();

    let out = run(&["verify", "d"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("[bbox-tight]"));
}

#[test]
fn pipeline_output_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let steps: [&[&str]; 4] = [&["synth", "--seed", "42", "--count", "3", "--out", name], &["derive", name], &["layerize", name], &["export", name]];
        for args in steps {
            let out = run(args, tmp.path());
            assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let (a, b) = (tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
    assert!(a.len() > 3 * 9);
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{} differs", k.display());
    }
    assert!(run(&["verify", "a"], tmp.path()).status.success());
}

#[test]
fn keep_going_continues_past_a_broken_sample() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&["synth", "--seed", "1", "--count", "2", "--out", "d"], tmp.path()).status.success());
    let mut samples: Vec<PathBuf> = std::fs::read_dir(tmp.path().join("d")).unwrap().map(|e| e.unwrap().path()).collect();
    samples.sort();
    std::fs::write(samples[0].join("capture.json"), "{").unwrap();

    let out = run(&["derive", "d", "--keep-going", "--jobs", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capture.json"));
    assert!(samples[1].join("meta.json").is_file());
    assert!(!samples[1].join("manifest.json").exists(), "derive clears downstream outputs");
}

#[test]
fn bad_inputs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["run", "--url-list", "missing.txt", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));
    assert!(!run(&["synth", "--bogus"], tmp.path()).status.success());
    assert!(!run(&["synth", "--out", "d", "--elements", "5-2"], tmp.path()).status.success());
}

#[test]
fn config_file_and_env_are_applied() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "[derivation]\nepsilon = 0\n").unwrap();
    let out = run(&["--config", "c.toml", "synth", "--out", "d"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    let out = bin().args(["synth", "--out", "d"]).env("CHROMALAYER_CAPTURE_VIEWPORT", "[0, 10]").current_dir(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(tmp.path().join("c.toml"), "[derivation]\nwhite_tolerance = 1\n").unwrap();
    assert!(run(&["--config", "c.toml", "synth", "--out", "d"], tmp.path()).status.success());
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(only_sample(&tmp.path().join("d")).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}
