#![no_main]

use libfuzzer_sys::fuzz_target;
use qmri_core::formats::parse_key_values;
use qmri_core::pipeline::{TrainConfig, CONFIG_KEYS};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(kv) = parse_key_values(text, CONFIG_KEYS) {
        let reparsed = parse_key_values(&kv.render(), CONFIG_KEYS).expect("rendered config parses");
        assert_eq!(reparsed.len(), kv.len());
    }
    if let Ok(config) = TrainConfig::from_text(text) {
        let resolved = TrainConfig::from_text(&config.resolved_text()).expect("resolved config parses");
        assert_eq!(resolved.config_hash(), config.config_hash());
    }
});
