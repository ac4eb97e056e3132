#![no_main]

use ensemble_repeater::pattern::PatternState;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(state) = PatternState::from_record(text) {
        let again = PatternState::from_record(&state.to_record()).expect("re-parse of serialized state");
        assert_eq!(again, state);
    }
});
