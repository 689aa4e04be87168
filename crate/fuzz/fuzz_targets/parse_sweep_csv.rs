#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = gsvin::evaluation::parse_csv(text) {
        let _ = gsvin::evaluation::accuracy_table(&rows);
        let again = gsvin::evaluation::to_csv(&rows);
        assert_eq!(gsvin::evaluation::parse_csv(&again).unwrap().len(), rows.len());
    }
});
