#![no_main]

use ensemble_repeater::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        // Anything accepted must survive a round trip unchanged.
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).expect("re-parse of serialized config");
        assert_eq!(again, cfg);
    }
});
