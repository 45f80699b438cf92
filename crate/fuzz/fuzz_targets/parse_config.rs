#![no_main]
use libfuzzer_sys::fuzz_target;
use simplex_kde_cli::{parse_config, RunConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(map) = parse_config(text) {
            let _ = RunConfig::from_map(&map);
        }
    }
});
