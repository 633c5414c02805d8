#![no_main]

use libfuzzer_sys::fuzz_target;
use ringheat::cli::Summary;
use ringheat::convexity::ConvexityReport;

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = serde_json::from_slice::<ConvexityReport>(data) {
        let _ = r.canonical_json();
        let _ = r.worst_csv();
    }
    if let Ok(s) = serde_json::from_slice::<Summary>(data) {
        let _ = s.canonical_json();
    }
});
