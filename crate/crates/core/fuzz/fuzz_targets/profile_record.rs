#![no_main]

use libfuzzer_sys::fuzz_target;
use poshs::preference::ProfileRecord;

fuzz_target!(|data: &str| {
    if let Ok((id, profile)) = ProfileRecord::parse_line(data) {
        let line = profile.to_record(&id).to_line().unwrap();
        let (id2, back) = ProfileRecord::parse_line(&line).unwrap();
        assert_eq!(back.to_record(&id2).to_line().unwrap(), line);
    }
});
