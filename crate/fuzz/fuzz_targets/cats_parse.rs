#![no_main]
use libfuzzer_sys::fuzz_target;

use auction_core::cats;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Parsing must never panic; errors are the expected outcome.
    let Ok((file, _warnings)) = cats::parse_cats(text) else {
        return;
    };
    // A parsed file maps to an instance and survives a canonical round trip.
    let instance = cats::to_instance(&file);
    let _ = instance.validate();
    let canonical = cats::write_cats(&file);
    let (reparsed, warnings) = cats::parse_cats(&canonical).expect("canonical form reparses");
    assert!(warnings.is_empty());
    assert_eq!(reparsed, file);
    assert_eq!(cats::to_instance(&reparsed), instance);
});
