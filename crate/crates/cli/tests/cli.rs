use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cqnn::QuadraticModel;
use tempfile::TempDir;

fn cqnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn train_synth(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--synth-len", "2000", "--d", "5", "--f", "3"];
    args.extend_from_slice(extra);
    cqnn(dir, &args)
}

#[test]
fn train_writes_model_and_metrics() {
    let dir = TempDir::new().unwrap();
    let out = train_synth(dir.path(), &["--out", "m.json", "--metrics", "met.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = QuadraticModel::deserialize(&fs::read_to_string(dir.path().join("m.json")).unwrap())
        .unwrap();
    assert_eq!(model.spec().n(), 10);
    assert_eq!(model.spec().f(), 3);
    let rows = csv_rows(&dir.path().join("met.csv"));
    assert_eq!(rows.len(), 1);
    let test_mse: f64 = rows[0][2].parse().unwrap();
    assert!(test_mse.is_finite() && test_mse < 1e-3);
}

#[test]
fn training_is_deterministic() {
    let dir = TempDir::new().unwrap();
    train_synth(dir.path(), &["--out", "a.json"]);
    train_synth(dir.path(), &["--out", "b.json"]);
    let a = fs::read(dir.path().join("a.json")).unwrap();
    let b = fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn beta_sweep_writes_one_model_per_beta_with_shrinking_norm() {
    let dir = TempDir::new().unwrap();
    let out = train_synth(
        dir.path(),
        &["--beta", "0.1,1,10,100", "--out", "m.json", "--metrics", "met.csv"],
    );
    assert_eq!(code(&out), 0);
    for b in ["0.1", "1", "10", "100"] {
        assert!(dir.path().join(format!("m_beta{b}.json")).exists());
    }
    let norms: Vec<f64> = csv_rows(&dir.path().join("met.csv"))
        .iter()
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert_eq!(norms.len(), 4);
    assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{norms:?}");
}

#[test]
fn predict_reproduces_training_mse() {
    let dir = TempDir::new().unwrap();
    train_synth(dir.path(), &["--out", "m.json", "--metrics", "met.csv"]);
    let train_mse: f64 = csv_rows(&dir.path().join("met.csv"))[0][1].parse().unwrap();
    let out = cqnn(
        dir.path(),
        &["predict", "--model", "m.json", "--synth-len", "2000", "--part", "train", "--out", "p.csv"],
    );
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&dir.path().join("p.csv"));
    let mse = rows
        .iter()
        .map(|r| {
            let (y, p): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
            (y - p) * (y - p)
        })
        .sum::<f64>()
        / rows.len() as f64;
    assert!((mse - train_mse).abs() <= 1e-12 * train_mse.max(1e-300) + 1e-18);
}

#[test]
fn predict_table_zero_row_gives_constant_term() {
    let dir = TempDir::new().unwrap();
    train_synth(dir.path(), &["--out", "m.json"]);
    let model = QuadraticModel::deserialize(&fs::read_to_string(dir.path().join("m.json")).unwrap())
        .unwrap();
    let header: Vec<String> = (0..10).map(|i| format!("x{i}")).collect();
    fs::write(
        dir.path().join("t.csv"),
        format!("{}\n{}\n", header.join(","), ["0"; 10].join(",")),
    )
    .unwrap();
    let out = cqnn(
        dir.path(),
        &["predict", "--model", "m.json", "--mode", "table", "--data", "t.csv"],
    );
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let value: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let want = model.params().c() * model.zbar4();
    assert!((value - want).abs() <= 1e-12 * want.abs().max(1.0));
}

#[test]
fn predict_dimension_mismatch_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    train_synth(dir.path(), &["--out", "m.json"]);
    fs::write(dir.path().join("t.csv"), "x0,x1\n1,2\n").unwrap();
    let out = cqnn(
        dir.path(),
        &["predict", "--model", "m.json", "--mode", "table", "--data", "t.csv"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn sensitivity_at_origin_is_linear_term() {
    let dir = TempDir::new().unwrap();
    train_synth(dir.path(), &["--out", "m.json"]);
    let model = QuadraticModel::deserialize(&fs::read_to_string(dir.path().join("m.json")).unwrap())
        .unwrap();
    let header: Vec<String> = (0..10).map(|i| format!("x{i}")).collect();
    fs::write(
        dir.path().join("x0.csv"),
        format!("{}\n{}\n{}\n", header.join(","), ["0"; 10].join(","), ["1"; 10].join(",")),
    )
    .unwrap();
    let out = cqnn(
        dir.path(),
        &["sensitivity", "--model", "m.json", "--x0", "x0.csv", "--out", "g.csv", "--summary", "s.csv"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("g.csv"));
    assert_eq!(rows.len(), 2);
    let b = model.params().b();
    for (j, z2) in model.zbar2().iter().enumerate() {
        let g: f64 = rows[0][j + 1].parse().unwrap();
        assert!((g - b * z2).abs() <= 1e-12 * (b * z2).abs().max(1.0));
    }
    assert_eq!(csv_rows(&dir.path().join("s.csv")).len(), 10);
}

#[test]
fn sensitivity_empty_file_is_an_error() {
    let dir = TempDir::new().unwrap();
    train_synth(dir.path(), &["--out", "m.json"]);
    fs::write(dir.path().join("x0.csv"), "x0,x1,x2,x3,x4,x5,x6,x7,x8,x9\n").unwrap();
    let out = cqnn(dir.path(), &["sensitivity", "--model", "m.json", "--x0", "x0.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = cqnn(dir.path(), &["verify", "--seed", "3", "--instances", "30"]);
    let b = cqnn(dir.path(), &["verify", "--seed", "3", "--instances", "30"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().filter(|l| l.starts_with("PASS")).count(), 5);
}

#[test]
fn verify_with_zero_instances_warns() {
    let dir = TempDir::new().unwrap();
    let out = cqnn(dir.path(), &["verify", "--instances", "0"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn bench_table_and_config_errors() {
    let dir = TempDir::new().unwrap();
    let args = ["bench", "--synth-len", "600", "--f-list", "3", "--repeats", "1", "--out", "b.csv"];
    assert_eq!(code(&cqnn(dir.path(), &args)), 0);
    let first = csv_rows(&dir.path().join("b.csv"));
    assert_eq!(first.len(), 2);
    assert_eq!(first[0][0], "ls-cqnn");
    assert_eq!(first[1][0], "ls-qnn");
    assert_eq!(first[1][2], "10");

    assert_eq!(code(&cqnn(dir.path(), &args)), 0);
    let second = csv_rows(&dir.path().join("b.csv"));
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a[..6], b[..6]);
    }

    let out = cqnn(dir.path(), &["bench", "--synth-len", "600", "--f-list", "11"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn exit_codes_for_usage_and_data_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&cqnn(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&cqnn(dir.path(), &["--help"])), 0);
    assert_eq!(code(&cqnn(dir.path(), &["train", "--synth-len", "500", "--a", "-1"])), 1);
    assert_eq!(code(&cqnn(dir.path(), &["train", "--synth-len", "500", "--beta", "-1"])), 1);
    assert_eq!(code(&cqnn(dir.path(), &["train", "--synth-len", "500", "--f", "11"])), 1);
    assert_eq!(code(&cqnn(dir.path(), &["train", "--data", "missing.csv"])), 2);
    fs::write(dir.path().join("bad.csv"), "u,y\n1,2\n3,oops\n").unwrap();
    assert_eq!(code(&cqnn(dir.path(), &["train", "--data", "bad.csv"])), 2);
    fs::write(dir.path().join("m.json"), "{ not json").unwrap();
    let out = cqnn(
        dir.path(),
        &["predict", "--model", "m.json", "--synth-len", "500"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn csv_input_and_window_mode() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("u,y\n");
    let (mut y1, mut y2, mut u1) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..300 {
        let u = ((t as f64) * 0.37).sin();
        let y = 0.5 * y1 - 0.2 * y2 + 0.7 * u1 + 0.1 * u1 * u1;
        text.push_str(&format!("{u},{y}\n"));
        (y2, y1, u1) = (y1, y, u);
    }
    fs::write(dir.path().join("d.csv"), text).unwrap();
    let out = cqnn(
        dir.path(),
        &["train", "--data", "d.csv", "--d", "3", "--f", "2", "--out", "m.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = cqnn(
        dir.path(),
        &["train", "--synth-len", "3000", "--mode", "window", "--r", "2", "--label", "lat",
          "--channels", "ax,tz", "--f", "2", "--out", "w.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = QuadraticModel::deserialize(&fs::read_to_string(dir.path().join("w.json")).unwrap())
        .unwrap();
    assert_eq!(model.spec().n(), 4);
}
