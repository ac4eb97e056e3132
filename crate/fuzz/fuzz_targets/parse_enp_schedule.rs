#![no_main]

use ensemble_repeater::config::{format_enp_schedule, parse_enp_schedule};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(steps) = parse_enp_schedule(text) {
        assert_eq!(parse_enp_schedule(&format_enp_schedule(&steps)).expect("canonical form parses"), steps);
    }
});
