#![no_main]

use compagency::Decomposition;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = serde_json::from_slice::<Decomposition>(data) {
        let _ = d.repool();
    }
});
