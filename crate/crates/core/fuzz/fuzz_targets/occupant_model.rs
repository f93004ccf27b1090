#![no_main]

use libfuzzer_sys::fuzz_target;
use poshs::occupant::HumanModel;

fuzz_target!(|data: &str| {
    if let Ok(model) = HumanModel::from_json(data) {
        let text = model.to_json().unwrap();
        let back = HumanModel::from_json(&text).unwrap();
        assert_eq!(back.to_json().unwrap(), text);
    }
});
