use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn small_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/small.json")
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_learning-egm"));
    cmd.args(args).env("RUST_LOG", "error");
    if let Some(n) = threads {
        cmd.env("LEARNING_EGM_THREADS", n);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn edited_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(small_config()).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join("edited.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn missing_or_bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["check", "--out", out], None)), 2);
    assert_eq!(code(&run(&["check", "--preset", "nope", "--out", out], None)), 2);

    let bad = edited_config(dir.path(), |v| v["grids"]["extra"] = 1.into());
    let o = run(&["check", "--config", bad.to_str().unwrap(), "--out", out], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("extra"));

    let bad = edited_config(dir.path(), |v| v["candidates"]["matrices"][1][0] = serde_json::json!([0.5, 0.6]));
    let o = run(&["check", "--config", bad.to_str().unwrap(), "--out", out], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("candidates.matrices[1][0]"));
}

#[test]
fn infeasible_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited_config(dir.path(), |v| v["grids"]["s_median"] = 30.0.into());
    let o = run(&["grid-info", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn oversized_oracle_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let o = run(
        &["oracle-compare", "--wealth-points", "200000", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unstable_calibration_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited_config(dir.path(), |v| v["model"]["beta"] = 0.9999.into());
    let o = run(&["check", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn iteration_cap_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited_config(dir.path(), |v| v["solver"]["max_iter"] = 3.into());
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code(&o), 4);
}

#[test]
fn pipeline_is_reproducible_across_thread_counts() {
    let cfg = small_config();
    let cfg = cfg.to_str().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        for args in [
            vec!["grid-info"],
            vec!["check"],
            vec!["solve"],
            vec!["solve", "--full-info"],
        ] {
            let o = run(&[&args[..], &["--config", cfg, "--out", out]].concat(), Some(threads));
            assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let policy = dir.path().join("policy.csv");
        let bench = dir.path().join("policy_full_info.csv");
        let p = policy.to_str().unwrap();
        let o = run(&["analyze", "--strict", "--config", cfg, "--out", out, "--policy", p], Some(threads));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        let o = run(
            &["simulate", "--config", cfg, "--out", out, "--policy", p, "--benchmark", bench.to_str().unwrap()],
            Some(threads),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let o = run(&["simulate", "--config", cfg, "--out", out, "--policy", p, "--seed", "5"], Some(threads));
        assert_eq!(code(&o), 0);

        let mut files: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        let contents: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(f).unwrap()))
            .collect();
        outputs.push(contents);
    }
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    for expected in ["paired.csv", "paths.csv", "policy.csv", "policy.json", "diagnostics.csv", "stability.json"] {
        assert!(names.contains(&expected), "missing {expected} in {names:?}");
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn analyze_rejects_policy_from_another_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = small_config();
    assert_eq!(code(&run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out], None)), 0);
    let other = edited_config(dir.path(), |v| v["solver"]["tol"] = 1e-6.into());
    let policy = dir.path().join("policy.csv");
    let o = run(
        &["analyze", "--config", other.to_str().unwrap(), "--out", out, "--policy", policy.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 2);

    // the seed is not part of the solve, so a reseeded run may reuse it
    let o = run(
        &["simulate", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out, "--policy", policy.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 0);
}
