#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = gsvin::gridworld::decode_dataset(data) {
        let again = gsvin::gridworld::encode_dataset(&ds);
        assert_eq!(gsvin::gridworld::decode_dataset(&again).unwrap(), ds);
    }
});
