#![no_main]

use libfuzzer_sys::fuzz_target;
use meanred::suite::Suite;
use meanred::SolverConfig;

fuzz_target!(|data: &str| {
    let Ok(suite) = Suite::from_json(data) else { return };
    let text = serde_json::to_string(&suite).expect("suite serializes");
    Suite::from_json(&text).expect("own output parses");

    // Building a case validates every mean it names without sampling.
    let cfg = SolverConfig::default().with_max_iter(200);
    for (i, case) in suite.cases.iter().take(8).enumerate() {
        let _ = case.build(suite.seed.wrapping_add(i as u64), &cfg);
    }
});
