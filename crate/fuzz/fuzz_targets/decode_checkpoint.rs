#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = gsvin::models::decode_checkpoint(data) {
        let again = gsvin::models::encode_checkpoint(&ck);
        assert_eq!(gsvin::models::decode_checkpoint(&again).unwrap(), ck);
    }
});
