#![no_main]

use libfuzzer_sys::fuzz_target;
use poshs::records::AgentSnapshot;

fuzz_target!(|data: &str| {
    let Ok(snapshot) = AgentSnapshot::from_json(data) else {
        return;
    };
    if let Ok((agent, labels)) = snapshot.restore() {
        let text = AgentSnapshot::capture(&agent, &labels).to_json().unwrap();
        let (agent2, labels2) = AgentSnapshot::from_json(&text).unwrap().restore().unwrap();
        assert_eq!(AgentSnapshot::capture(&agent2, &labels2).to_json().unwrap(), text);
    }
});
