#![no_main]
use attkws::evaluation::{parse_roc_csv, parse_scores_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_roc_csv(text, "fuzz");
        let _ = parse_scores_csv(text);
    }
});
