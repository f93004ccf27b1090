//! Single records and whole multi-line logs.

#![no_main]

use libfuzzer_sys::fuzz_target;
use poshs::records::{parse_log_line, read_episode_logs};

fuzz_target!(|data: &str| {
    for line in data.lines() {
        let _ = parse_log_line(line);
    }
    let _ = read_episode_logs(data.as_bytes());
});
