#![no_main]
use libfuzzer_sys::fuzz_target;

use auction_core::Instance;

fuzz_target!(|data: &[u8]| {
    let Ok(instance) = serde_json::from_slice::<Instance>(data) else {
        return;
    };
    // Validation reports problems, it never panics, even on hostile indices.
    let violations = instance.validate();
    // Bundles canonicalize on the way in, so re-serialization is stable.
    let json = serde_json::to_string(&instance).unwrap();
    let again: Instance = serde_json::from_str(&json).unwrap();
    assert_eq!(again, instance);
    assert_eq!(again.validate(), violations);
});
