#![no_main]
use attkws::training::Manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = Manifest::parse(text, None) {
            assert_eq!(Manifest::parse(&m.to_text(), None).unwrap().entries, m.entries);
        }
    }
});
