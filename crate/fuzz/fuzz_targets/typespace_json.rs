#![no_main]
use libfuzzer_sys::fuzz_target;

use auction_core::{fixture_ex1, LinearTypeSpace};

fuzz_target!(|data: &[u8]| {
    let Ok(spaces) = serde_json::from_slice::<Vec<LinearTypeSpace>>(data) else {
        return;
    };
    let (instance, _) = fixture_ex1();
    for ts in &spaces {
        // Validation against a real instance must not panic on any shape.
        let _ = ts.validate(&instance);
        let _ = ts.constrained_bundle_indices();
        let _ = ts.satisfied_by_true_bids(&instance);
    }
});
