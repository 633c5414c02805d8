//! Arbitrary bytes into the snapshot dump decoder.

#![no_main]

use libfuzzer_sys::fuzz_target;
use ringheat::field::ScalarField;

fuzz_target!(|data: &[u8]| {
    let _ = ringheat::dump::decode_header(data);
    if let Ok(field) = ringheat::dump::decode(data) {
        let (lo, hi) = field.time_window();
        let p = ringheat::SpaceTimePoint::at(0.0, 0.0, 0.5 * (lo + hi));
        let _ = field.extended_value(&p);
        let _ = ringheat::dump::encode(&field);
    }
});
