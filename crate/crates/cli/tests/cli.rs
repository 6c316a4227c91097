use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn selftune(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selftune"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn missing_plant_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = selftune(dir.path(), &["simulate", "--plant", "does-not-exist.json", "--gains", "1,1,1"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn learn_without_model_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = selftune(dir.path(), &["learn", "--preset", "case-a"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("train"));
}

#[test]
fn train_without_dataset_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = selftune(dir.path(), &["train"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn zero_gains_give_zero_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = selftune(dir.path(), &["simulate", "--preset", "case-a", "--gains", "0,0,0", "--horizon", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let y = header.iter().position(|h| *h == "y").expect("y column");
    for line in lines {
        let v: f64 = line.split(',').nth(y).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn certify_reports_member_and_non_member() {
    let dir = tempfile::tempdir().unwrap();
    let o = selftune(dir.path(), &["certify", "--L", "1,1", "--theta", "5,1,5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cert: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["report"]["member"], true);
    assert_eq!(cert["seed"], 0);

    let o = selftune(dir.path(), &["certify", "--L", "1,1", "--theta", "0.1,1,5"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn pipeline_is_deterministic_per_seed() {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        let p = d.path();
        assert_eq!(code(&selftune(p, &["--seed", "5", "gen-dataset", "--samples", "120"])), 0);
        assert_eq!(code(&selftune(p, &["--seed", "5", "train", "--epochs", "5"])), 0);
        let o = selftune(p, &["--seed", "5", "learn", "--start", "random", "--max-iterations", "3"]);
        assert!(matches!(code(&o), 0 | 1), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["dataset.csv", "model.json", "learn-case-a-random/report.csv", "learn-case-a-random/report.json"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert!(a == b, "{name} differs between identical runs");
    }

    let report = dirs[0].path().join("learn-case-a-random/report.json");
    let o = selftune(dirs[0].path(), &["replay", "--report", report.to_str().unwrap(), "--preset", "case-a"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
