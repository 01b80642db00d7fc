#![no_main]

use libfuzzer_sys::fuzz_target;
use meanred::descriptor::MeanDescriptor;
use meanred::{Point, SolverConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(d) = serde_json::from_slice::<MeanDescriptor>(data) else { return };
    let text = serde_json::to_string(&d).expect("descriptor serializes");
    let back: MeanDescriptor = serde_json::from_str(&text).expect("own output parses");
    assert_eq!(back, d);

    // Keep solves short; errors are fine, panics are not.
    let n = d.arity().unwrap_or(2);
    if n == 0 || n > 8 || d.dim() == 0 || d.dim() > 4 {
        return;
    }
    let cfg = SolverConfig::default().with_max_iter(200);
    let Ok(m) = d.build(&cfg) else { return };
    let x: Vec<Point> = (0..n)
        .map(|i| Point::new(vec![1.0 + i as f64; d.dim()]).unwrap())
        .collect();
    let _ = m.eval_report(&x);
});
