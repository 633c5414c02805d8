//! Arbitrary text into the experiment config parser.
//!
//! ```bash
//! cargo +nightly fuzz run fuzz_config
//! ```

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ringheat::cli::parse_config(text) {
            let _ = cfg.check_names();
        }
    }
});
