use std::path::Path;
use std::process::{Command, Output};

fn kws(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kws"))
        .args(args)
        .env("KWS_NUM_WORKERS", "2")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn params_of_default_gru() {
    let o = kws(&[
        "params",
        "--encoder",
        "gru",
        "--layers",
        "2",
        "--nodes",
        "64",
        "--attention",
        "soft",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "53442");
    let o = kws(&["params", "--kind", "deep_kws", "--encoder", "dnn"]);
    assert!(o.status.success());
    assert!(stdout(&o).trim().parse::<usize>().unwrap() > 0);
}

#[test]
fn exit_codes() {
    assert_eq!(kws(&[]).status.code(), Some(1));
    assert_eq!(kws(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(kws(&["params", "--encoder", "transformer"]).status.code(), Some(1));
    assert_eq!(kws(&["--set", "nodez=3", "params"]).status.code(), Some(1));
    assert_eq!(kws(&["--help"]).status.code(), Some(0));
    assert_eq!(kws(&["--version"]).status.code(), Some(0));
    let o = kws(&["featurize", "--wav", "/nonexistent.wav", "--out", "/tmp/x.kwsf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn dumped_config_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = kws(&["--dump-config", "--set", "nodes=32", "--seed", "9"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("nodes = 32") && text.contains("seed = 9"));
    let path = dir.path().join("run.toml");
    std::fs::write(&path, &text).unwrap();
    let again = kws(&["--config", p(&path), "--dump-config"]);
    assert_eq!(stdout(&again), text);
    let o = kws(&["--config", p(&path), "params"]);
    assert_eq!(stdout(&o), stdout(&kws(&["params", "--nodes", "32"])));
}

#[test]
fn end_to_end_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = d.join("corpus");
    let o = kws(&[
        "synth",
        "--out",
        p(&corpus),
        "--positives",
        "6",
        "--negatives",
        "6",
        "--negative-secs",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = corpus.join("manifest.tsv");

    let train_args = |out: &Path, metrics: &Path| {
        kws(&[
            "--set",
            "batch_size=4",
            "--set",
            "max_steps=4",
            "--set",
            "eval_every=2",
            "--seed",
            "3",
            "train",
            "--train",
            p(&manifest),
            "--val",
            p(&manifest),
            "--out",
            p(out),
            "--metrics",
            p(metrics),
            "--encoder",
            "gru",
            "--layers",
            "1",
            "--nodes",
            "8",
        ])
    };
    let (ck1, ck2) = (d.join("a.kwsc"), d.join("b.kwsc"));
    let o = train_args(&ck1, &d.join("a.csv"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(train_args(&ck2, &d.join("b.csv")).status.success());
    assert_eq!(std::fs::read(&ck1).unwrap(), std::fs::read(&ck2).unwrap());
    let metrics = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(metrics, std::fs::read_to_string(d.join("b.csv")).unwrap());
    assert!(metrics.starts_with("step,train_loss,val_loss,lr,grad_norm\n"));
    assert_eq!(metrics.lines().count(), 5);

    let prefix = d.join("report");
    let o = kws(&[
        "eval",
        "--checkpoint",
        p(&ck1),
        "--manifest",
        p(&manifest),
        "--out-prefix",
        p(&prefix),
        "--window",
        "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("frr_at_fa\t1\t"));
    for ext in ["csv", "svg", "scores.csv"] {
        assert!(d.join(format!("report.{ext}")).exists(), "{ext}");
    }

    let o = kws(&[
        "roc",
        "--scores",
        p(&d.join("report.scores.csv")),
        "--scores",
        p(&d.join("report.scores.csv")),
        "--out-prefix",
        p(&d.join("both")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("both.csv")).unwrap();
    assert!(csv.starts_with("series,threshold,frr,fa_per_hour\n"));

    let wav = corpus.join("pos_0000.wav");
    let o = kws(&[
        "stream",
        "--checkpoint",
        p(&ck1),
        "--wav",
        p(&wav),
        "--threshold",
        "0.01",
        "--window",
        "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for line in stdout(&o).lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3, "{line}");
        cols[0].parse::<usize>().unwrap();
    }
    assert_eq!(
        kws(&[
            "stream",
            "--checkpoint",
            p(&ck1),
            "--wav",
            p(&wav),
            "--threshold",
            "1.5"
        ])
        .status
        .code(),
        Some(1)
    );

    let feats = d.join("pos.kwsf");
    let o = kws(&["featurize", "--wav", p(&wav), "--out", p(&feats)]);
    assert!(o.status.success());
    assert!(stdout(&o).trim().ends_with("x40"));
    assert!(std::fs::metadata(&feats).unwrap().len() > 0);
}
