use std::path::Path;
use std::process::{Command, Output};

fn idfd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idfd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

const QUICK: &[&str] = &["--epochs", "4", "--data_n", "60", "--eval_every", "2"];

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--seed", "5", "--out", out];
    args.extend(QUICK);
    args.extend(extra);
    idfd(dir, &args)
}

#[test]
fn train_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train(dir.path(), "a", &[])), 0);
    assert_eq!(code(&train(dir.path(), "b", &[])), 0);
    for file in ["history.csv", "correlation.csv", "embeddings.csv", "assignments.csv"] {
        assert_eq!(read(dir.path().join("a").join(file)), read(dir.path().join("b").join(file)), "{file}");
    }
    let report = |run: &str| -> serde_json::Value {
        serde_json::from_str::<serde_json::Value>(&read(dir.path().join(run).join("summary.json"))).unwrap()["report"].clone()
    };
    assert_eq!(report("a"), report("b"));
    let history = read(dir.path().join("a/history.csv"));
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,L_I,L_F,acc,nmi,ari,lr"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].contains(",,,"), "epoch 0 is not evaluated: {}", rows[0]);
    assert!(!rows[1].contains(",,"), "epoch 1 is evaluated: {}", rows[1]);
}

#[test]
fn disabled_evaluation_drops_metric_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = idfd(
        dir.path(),
        &["train", "--seed", "1", "--out", "r", "--epochs", "2", "--data_n", "40", "--eval_every", "0", "--mode", "ID"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let history = read(dir.path().join("r/history.csv"));
    assert_eq!(history.lines().next(), Some("epoch,L_I,lr"));
    assert_eq!(history.lines().count(), 3);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&idfd(dir.path(), &["train"])), 2, "missing --seed");
    assert_eq!(code(&idfd(dir.path(), &["sweep", "--param", "tau", "--values", "1"])), 2);
    std::fs::write(dir.path().join("c.txt"), "tau = 1\nunknown_key = 3\n").unwrap();
    let out = idfd(dir.path(), &["train", "--seed", "1", "--config", "c.txt"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_key"));
    assert_eq!(code(&idfd(dir.path(), &["train", "--seed", "1", "--tau", "-1"])), 2);
    assert_eq!(code(&idfd(dir.path(), &["train", "--seed", "1", "--batch_size", "1"])), 2);
    assert_eq!(code(&idfd(dir.path(), &["train", "--seed", "1", "--config", "absent.txt"])), 2);
    assert_eq!(code(&idfd(dir.path(), &["analyze", "--n", "10", "--k", "3"])), 2);
}

#[test]
fn runtime_failure_exits_with_3_and_leaves_marker() {
    let dir = tempfile::tempdir().unwrap();
    let out = idfd(dir.path(), &["train", "--seed", "1", "--out", "r", "--data", "missing.csv"]);
    assert_eq!(code(&out), 3);
    assert!(dir.path().join("r/FAILED").exists());
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), "# desk run\nmode = IDFO\nalpha = 10\nepochs = 2\ndata_n = 40\n").unwrap();
    let out = idfd(dir.path(), &["train", "--seed", "9", "-c", "c.txt", "--alpha", "5", "--out", "r"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = read(dir.path().join("r/config.txt"));
    assert!(cfg.contains("mode = IDFO"));
    assert!(cfg.contains("alpha = 5.0"));
    assert!(cfg.contains("seed = 9"));
    assert!(read(dir.path().join("r/history.csv")).starts_with("epoch,L_I,L_FO,"));
}

#[test]
fn sweep_writes_one_run_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--seed", "2", "--out", "s", "--param", "tau2", "--values", "0.5,2"];
    args.extend(QUICK);
    let out = idfd(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path().join("s/sweep.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "parameter,value,acc_mean,acc_std,final_acc,final_nmi,final_ari,feature_corr");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("tau2,0.5,"));
    assert!(dir.path().join("s/tau2=2.0/history.csv").exists());

    // A singleton sweep reproduces the plain run.
    let mut args = vec!["sweep", "--seed", "2", "--out", "single", "--param", "tau2", "--values", "0.5"];
    args.extend(QUICK);
    assert_eq!(code(&idfd(dir.path(), &args)), 0);
    let mut args = vec!["train", "--seed", "2", "--out", "plain", "--tau2", "0.5"];
    args.extend(QUICK);
    assert_eq!(code(&idfd(dir.path(), &args)), 0);
    assert_eq!(
        read(dir.path().join("single/tau2=0.5/history.csv")),
        read(dir.path().join("plain/history.csv"))
    );
}

#[test]
fn analyze_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = idfd(dir.path(), &["analyze", "--out", "t", "--taus", "0.5,1"]);
    assert_eq!(code(&out), 0);
    let table = read(dir.path().join("t/temperature.csv"));
    assert!(table.starts_with("tau,uniform,compact,gap\n"));
    assert_eq!(table.lines().count(), 3);
    assert_eq!(read(dir.path().join("t/profiles.csv")).lines().count(), 1 + 2 * 361);

    assert_eq!(code(&train(dir.path(), "r", &[])), 0);
    let out = idfd(dir.path(), &["eval", "r/embeddings.csv", "--out", "m.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path().join("m.json"))).unwrap();
    assert_eq!(json["k"], 4);
    assert_eq!(json["n"], 60);
    assert!(json["acc"].as_f64().unwrap() > 0.25);
    let out = idfd(dir.path(), &["eval", "r/embeddings.csv", "--spectral", "1"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn generated_images_train() {
    let dir = tempfile::tempdir().unwrap();
    let out = idfd(dir.path(), &["gen", "--out", "img.idfd", "--image", "4x4x2", "--n", "40", "--seed", "3"]);
    assert_eq!(code(&out), 0);
    let bytes = std::fs::read(dir.path().join("img.idfd")).unwrap();
    assert_eq!(&bytes[..4], b"IDFD");
    assert_eq!(bytes.len(), 15 + 40 * 32 + 40);
    let out = idfd(
        dir.path(),
        &["train", "--seed", "1", "--data", "img.idfd", "--epochs", "2", "--augment", "flip:0.5,crop:1,noise:0.05", "--out", "r"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&idfd(dir.path(), &["gen", "--out", "x.csv", "--k", "3", "--dim", "1", "--separation", "3"])), 3);
}
