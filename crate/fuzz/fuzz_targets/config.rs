#![no_main]
use attkws::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_toml(text) {
            let _ = cfg.model_config();
            assert_eq!(RunConfig::from_toml(&cfg.dump()).unwrap(), cfg);
        }
    }
});
