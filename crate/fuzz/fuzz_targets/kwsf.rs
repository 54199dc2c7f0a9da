#![no_main]
use attkws::features::FeatureMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(fm) = FeatureMatrix::from_bytes(data) {
        assert_eq!(
            FeatureMatrix::from_bytes(&fm.to_bytes()).unwrap().to_bytes(),
            fm.to_bytes()
        );
    }
});
