#![no_main]
use libfuzzer_sys::fuzz_target;
use simplex_kde::io::{read_dataset, ResponseLayout};

fuzz_target!(|data: &[u8]| {
    for layout in [ResponseLayout::Implicit, ResponseLayout::Full] {
        if let Ok(report) = read_dataset(data, layout) {
            let ds = &report.dataset;
            assert_eq!(ds.responses().len(), ds.n());
            for (_, y) in ds.observed() {
                let sum: f64 = y.coords().iter().sum();
                assert!(y.coords().iter().all(|v| *v >= 0.0) && sum <= 1.0 + 1e-9);
            }
        }
    }
});
