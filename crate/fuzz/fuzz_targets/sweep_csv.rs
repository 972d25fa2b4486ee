//! Sweep CSV reader: arbitrary bytes must yield Ok or Err, never a
//! panic, and parsed rows must survive a write/read cycle.

#![no_main]

use biasmark::{rows_from_csv_string, rows_to_csv_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = rows_from_csv_string(s) {
        let csv = rows_to_csv_string(&rows).expect("rows serialize");
        let again = rows_from_csv_string(&csv).expect("serialized rows reparse");
        assert_eq!(rows.len(), again.len());
    }
});
