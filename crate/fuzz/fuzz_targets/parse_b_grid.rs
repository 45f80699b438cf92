#![no_main]
use libfuzzer_sys::fuzz_target;
use simplex_kde_cli::parse_b_grid;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(grid) = parse_b_grid(text) {
            assert!(!grid.is_empty());
            assert!(grid.windows(2).all(|w| w[0] < w[1]));
            assert!(grid.iter().all(|b| *b > 0.0 && *b < 1.0));
        }
    }
});
