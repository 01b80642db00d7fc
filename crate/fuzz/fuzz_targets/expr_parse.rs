#![no_main]

use libfuzzer_sys::fuzz_target;
use meanred::expr::Expr;

fuzz_target!(|data: &str| {
    let Ok(e) = Expr::parse(data) else { return };
    // The stored source must parse to the same tree.
    let again = Expr::parse(e.source()).expect("source re-parses");
    assert_eq!(e.root(), again.root());

    let names: Vec<String> = e.variables().into_iter().collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let f = e.bind(&refs).expect("own variables bind");
    for v in [0.0, 1.0, -2.5, 1e300] {
        let _ = f.eval(&vec![v; refs.len()]);
    }
});
