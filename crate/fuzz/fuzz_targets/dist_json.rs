#![no_main]

use compagency::io::to_json;
use compagency::Dist;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = serde_json::from_slice::<Dist>(data) {
        let back: Dist = serde_json::from_str(&to_json(&d)).expect("re-parse");
        assert_eq!(back.p(), d.p());
    }
});
