#![no_main]

use libfuzzer_sys::fuzz_target;
use poshs::harness::ExperimentConfig;

fuzz_target!(|data: &str| {
    if let Ok(config) = ExperimentConfig::from_toml(data) {
        let text = config.to_toml().unwrap();
        let again = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(again.to_toml().unwrap(), text);
    }
});
