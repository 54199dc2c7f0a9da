//! Replays the checked-in fuzz corpus through every parser so seed inputs
//! stay valid (or cleanly rejected) without a fuzzing toolchain.

use std::path::PathBuf;

use attkws::config::RunConfig;
use attkws::evaluation::{parse_roc_csv, parse_scores_csv};
use attkws::features::{decode_wav, FeatureMatrix};
use attkws::models::checkpoint;
use attkws::training::Manifest;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn wav_seeds() {
    for (name, b) in seeds("wav") {
        assert_eq!(decode_wav(&b).is_ok(), !name.starts_with("truncated"), "{name}");
    }
}

#[test]
fn kwsf_seeds() {
    for (name, b) in seeds("kwsf") {
        match FeatureMatrix::from_bytes(&b) {
            Ok(fm) => assert_eq!(fm.to_bytes(), b, "{name}"),
            Err(_) => assert!(name.starts_with("truncated"), "{name}"),
        }
    }
}

#[test]
fn kwsc_seeds() {
    for (name, b) in seeds("kwsc") {
        let m = checkpoint::from_bytes(&b, None).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(checkpoint::to_bytes(&m), b);
    }
}

#[test]
fn manifest_seeds() {
    for (name, b) in seeds("manifest") {
        let m = Manifest::parse(text(&b), None).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(
            Manifest::parse(&m.to_text(), None).unwrap().entries,
            m.entries,
            "{name}"
        );
    }
}

#[test]
fn config_seeds() {
    for (name, b) in seeds("config") {
        let c = RunConfig::from_toml(text(&b)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(RunConfig::from_toml(&c.dump()).unwrap(), c);
    }
}

#[test]
fn csv_seeds() {
    for (name, b) in seeds("roc_csv") {
        let t = text(&b);
        assert!(parse_roc_csv(t, "x").is_ok() || parse_scores_csv(t).is_ok(), "{name}");
    }
}
