#![no_main]
use attkws::models::checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = checkpoint::from_bytes(data, None) {
        let again = checkpoint::to_bytes(&model);
        assert!(checkpoint::from_bytes(&again, Some(model.config())).is_ok());
    }
});
