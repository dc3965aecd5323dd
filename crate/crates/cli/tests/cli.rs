use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn kge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn toy_dataset(dir: &Path) {
    fs::write(
        dir.join("train.txt"),
        "alice\tknows\tbob\nbob\tknows\tcarol\ncarol\tlikes\talice\ndave\tknows\talice\nbob\tlikes\tdave\n",
    )
    .unwrap();
    fs::write(dir.join("valid.txt"), "alice\tlikes\tcarol\n").unwrap();
    fs::write(
        dir.join("test.txt"),
        "bob\tlikes\tbob\ncarol\tknows\tdave\n",
    )
    .unwrap();
}

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    kge(&args)
}

#[test]
fn train_writes_checkpoint_log_and_config() {
    let tmp = TempDir::new().unwrap();
    toy_dataset(tmp.path());
    let out = tmp.path().join("run");
    let o = train(
        tmp.path(),
        &out,
        &[
            "--model", "distmult", "--dim", "8", "--epochs", "5", "--seed", "1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(&fs::read(out.join("model.kge")).unwrap()[..4], b"KGE1");
    let log = fs::read_to_string(out.join("epochs.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 5);
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert!(first["loss"].as_f64().unwrap() > 0.0);
    let config = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("model = distmult"));
    assert!(config.contains("dim = 8"));
}

#[test]
fn identical_runs_give_identical_checkpoints() {
    let tmp = TempDir::new().unwrap();
    toy_dataset(tmp.path());
    let flags = [
        "--model",
        "compgcn+distmult",
        "--comp",
        "corr",
        "--layers",
        "2",
        "--bases",
        "3",
        "--dim",
        "8",
        "--epochs",
        "3",
        "--seed",
        "7",
        "--set",
        "encoder_dropout=0.2",
    ];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(train(tmp.path(), &a, &flags).status.success());
    assert!(train(tmp.path(), &b, &flags).status.success());
    assert_eq!(
        fs::read(a.join("model.kge")).unwrap(),
        fs::read(b.join("model.kge")).unwrap()
    );

    let c = tmp.path().join("c");
    let mut other = flags.to_vec();
    other[13] = "8";
    assert!(train(tmp.path(), &c, &other).status.success());
    assert_ne!(
        fs::read(a.join("model.kge")).unwrap(),
        fs::read(c.join("model.kge")).unwrap()
    );
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    toy_dataset(tmp.path());
    let first = tmp.path().join("first");
    let o = train(
        tmp.path(),
        &first,
        &[
            "--model",
            "conve",
            "--dim",
            "8",
            "--filters",
            "2",
            "--epochs",
            "2",
            "--seed",
            "3",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let second = tmp.path().join("second");
    let cfg = first.join("config.txt");
    let o = kge(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(first.join("model.kge")).unwrap(),
        fs::read(second.join("model.kge")).unwrap()
    );
    let strip_out = |p: &Path| {
        fs::read_to_string(p.join("config.txt"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("out ="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip_out(&first), strip_out(&second));
}

#[test]
fn eval_emits_ranking_report() {
    let tmp = TempDir::new().unwrap();
    toy_dataset(tmp.path());
    let run = tmp.path().join("run");
    assert!(train(
        tmp.path(),
        &run,
        &["--model", "transe", "--dim", "8", "--epochs", "2"]
    )
    .status
    .success());
    let report_path = tmp.path().join("report.json");
    let o = kge(&[
        "eval",
        "--run",
        run.to_str().unwrap(),
        "--side",
        "both",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["overall"]["count"], 4);
    assert_eq!(report["head"]["count"], 2);
    assert!(report["per_category"].is_array());
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn bad_composition_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    toy_dataset(tmp.path());
    let o = train(
        tmp.path(),
        &tmp.path().join("r"),
        &["--model", "compgcn+distmult", "--comp", "rotate"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rotate"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    toy_dataset(tmp.path());
    let cfg = tmp.path().join("c.txt");
    fs::write(&cfg, "dim = 8\nlearning_rate = 0.1\n").unwrap();
    let o = kge(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("c.txt:2"));
    assert_eq!(kge(&["train", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn missing_data_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let o = train(
        &tmp.path().join("absent"),
        &tmp.path().join("r"),
        &["--epochs", "1"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.txt"));
}

#[test]
fn analyze_passes_and_reports_json() {
    let o = kge(&[
        "analyze",
        "--max-n",
        "8",
        "--samples",
        "20",
        "--chains",
        "8:2",
        "--points",
        "4:3",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["closed_form"].as_array().unwrap().len() > 10);
    assert_eq!(kge(&["analyze", "--chains", "8"]).status.code(), Some(1));
}

#[test]
fn gradcheck_passes_at_small_dim() {
    let o = kge(&["gradcheck", "--dim", "4"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["cases"].as_array().unwrap().len() >= 20);
}

#[test]
fn gradcheck_fails_with_impossible_tolerance() {
    let o = kge(&["gradcheck", "--dim", "4", "--tolerance", "1e-300"]);
    assert_eq!(o.status.code(), Some(3));
}
