//! One line per acceptance criterion; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use meanred::lab::violates;
use meanred::mean::MeanFn;
use meanred::reduction::{check_prop_a, check_thm_rgd, reduce, CheckOptions, DeviationFamily};
use meanred::scalar::{
    bajraktarevic_mean, deviation_mean, deviation_sign, gini_mean, holder_mean,
    make_bajraktarevic_deviation, weighted_arith_mean_points, DeviationTuple, GeneratorFn,
    ScalarDeviation, WeightFn,
};
use meanred::suite::{builtin, reevaluate, Expect, RunOptions, Suite, BUILTIN_SUITES};
use meanred::vector::{
    gen_deviation_mean, gen_deviation_mean_from, grid_oracle_mean, lattice_spacing,
    make_norm_sq_potential, make_potential_deviation, potential_mean, verify_vi, GenDeviation,
    Init, PotentialFn,
};
use meanred::{Injection, Interval, Point, SolverConfig};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn positives(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| (rng.random_range(-2.3f64..2.3)).exp())
        .collect()
}

fn points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new((0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap())
        .collect()
}

fn exponent(rng: &mut ChaCha8Rng) -> f64 {
    let p: f64 = rng.random_range(-3.0..3.0);
    (p * 4.0).round() / 4.0
}

fn injection(rng: &mut ChaCha8Rng, n: usize) -> Injection {
    let k = rng.random_range(1..=n);
    let mut slots: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        slots.swap(i, rng.random_range(0..=i));
    }
    slots.truncate(k);
    Injection::new(n, &slots).unwrap()
}

fn power_weight(rng: &mut ChaCha8Rng) -> WeightFn {
    let (a, b) = (rng.random_range(0.2..5.0), rng.random_range(-2.0..2.0));
    WeightFn::new(Interval::positive(), format!("{a}*u^{b}"), move |u: f64| {
        a * u.powf(b)
    })
    .unwrap()
}

fn point_weight(rng: &mut ChaCha8Rng, d: usize) -> WeightFn {
    match rng.random_range(0..3) {
        0 => WeightFn::constant(rng.random_range(0.2..5.0)).unwrap(),
        1 => {
            let (a, b) = (rng.random_range(0.2..5.0), rng.random_range(-0.3..0.3));
            WeightFn::over_points(
                Interval::real_line(),
                d,
                format!("{a}*exp({b}*u1)"),
                move |u: &[f64]| a * (b * u[0]).exp(),
            )
            .unwrap()
        }
        _ => {
            let a = rng.random_range(0.2..5.0);
            WeightFn::over_points(
                Interval::real_line(),
                d,
                format!("{a}*(1+|u|^2)"),
                move |u: &[f64]| a * (1.0 + u.iter().map(|c| c * c).sum::<f64>()),
            )
            .unwrap()
        }
    }
}

fn scalar_deviation(rng: &mut ChaCha8Rng) -> ScalarDeviation {
    match rng.random_range(0..4) {
        0 => ScalarDeviation::holder(exponent(rng)).unwrap(),
        1 => ScalarDeviation::gini(exponent(rng), exponent(rng)).unwrap(),
        2 => ScalarDeviation::quasi_arithmetic(&GeneratorFn::power(exponent(rng)).unwrap()),
        _ => make_bajraktarevic_deviation(
            &GeneratorFn::power(exponent(rng)).unwrap(),
            &power_weight(rng),
        )
        .unwrap(),
    }
}

fn criterion_1() -> Outcome {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 4];
    let per_family = 1000;
    for _ in 0..per_family {
        let n = rng.random_range(2..=6);
        let x = positives(&mut rng, n);

        let f = GeneratorFn::power(exponent(&mut rng)).unwrap();
        let w: Vec<WeightFn> = (0..n).map(|_| power_weight(&mut rng)).collect();
        let e = DeviationTuple::new(
            w.iter()
                .map(|wi| make_bajraktarevic_deviation(&f, wi).unwrap())
                .collect(),
        )
        .unwrap();
        let got = deviation_mean(&e, &x, &cfg).unwrap().value;
        worst[0] = worst[0].max(rel_err(got, bajraktarevic_mean(&f, &w, &x).unwrap()));

        // affine images a_i g + b_i of one generator invert in closed form
        let g = GeneratorFn::power(exponent(&mut rng)).unwrap();
        let ab: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.2..5.0), rng.random_range(-3.0..3.0)))
            .collect();
        let fs: Vec<GeneratorFn> = ab.iter().map(|&(a, b)| g.affine(a, b).unwrap()).collect();
        let e = DeviationTuple::new(fs.iter().map(ScalarDeviation::quasi_arithmetic).collect())
            .unwrap();
        let got = deviation_mean(&e, &x, &cfg).unwrap().value;
        let a_sum: f64 = ab.iter().map(|p| p.0).sum();
        let b_sum: f64 = ab.iter().map(|p| p.1).sum();
        let s: f64 = fs.iter().zip(&x).map(|(fi, &xi)| fi.eval(xi)).sum();
        worst[1] = worst[1].max(rel_err(got, g.inverse((s - b_sum) / a_sum)));

        let p = exponent(&mut rng);
        let e = DeviationTuple::repeat(ScalarDeviation::holder(p).unwrap(), n).unwrap();
        let got = deviation_mean(&e, &x, &cfg).unwrap().value;
        worst[2] = worst[2].max(rel_err(got, holder_mean(p, &x).unwrap()));

        let (p, q) = (exponent(&mut rng), exponent(&mut rng));
        let e = DeviationTuple::repeat(ScalarDeviation::gini(p, q).unwrap(), n).unwrap();
        let got = deviation_mean(&e, &x, &cfg).unwrap().value;
        worst[3] = worst[3].max(rel_err(got, gini_mean(p, q, &x).unwrap()));
    }
    let worst_all = worst.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst_all <= 1e-9,
        format!(
            "{per_family} instances per family; max rel err bajraktarevic {:.1e}, matkowski {:.1e}, holder {:.1e}, gini {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut max_dev: f64 = 0.0;
    let mut failures = 0usize;
    let (mut scalar_runs, mut vector_runs) = (0usize, 0usize);
    for i in 0..500 {
        let n = rng.random_range(2..=6);
        let e = DeviationTuple::new((0..n).map(|_| scalar_deviation(&mut rng)).collect()).unwrap();
        let opts = CheckOptions {
            samples: 1,
            tol: 1e-8,
            seed: i,
            ..CheckOptions::default()
        };
        let rep =
            check_thm_rgd(&DeviationFamily::Scalar(e), &injection(&mut rng, n), &opts).unwrap();
        scalar_runs += rep.samples;
        max_dev = max_dev.max(rep.max_deviation);
        failures += usize::from(!rep.passed);
    }
    for i in 0..200 {
        let (n, d) = (rng.random_range(2..=6), rng.random_range(1..=5));
        let e: Vec<GenDeviation> = (0..n)
            .map(|_| GenDeviation::inner_product(d, &point_weight(&mut rng, d)).unwrap())
            .collect();
        let opts = CheckOptions {
            samples: 1,
            tol: 1e-8,
            seed: 1000 + i,
            ..CheckOptions::default()
        };
        let rep =
            check_thm_rgd(&DeviationFamily::Vector(e), &injection(&mut rng, n), &opts).unwrap();
        vector_runs += rep.samples;
        max_dev = max_dev.max(rep.max_deviation);
        failures += usize::from(!rep.passed);
    }
    outcome(
        failures == 0,
        format!("{scalar_runs} scalar + {vector_runs} vector instances; {failures} failures; max deviation {max_dev:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut failures, mut max_dev, mut runs) = (0usize, 0.0f64, 0usize);
    for i in 0..500 {
        let n = rng.random_range(1..=6);
        let d = rng.random_range(1..=3);
        let w: Vec<WeightFn> = (0..n).map(|_| point_weight(&mut rng, d)).collect();
        let opts = CheckOptions {
            samples: 2,
            tol: 1e-9,
            seed: i,
            ..CheckOptions::default()
        };
        let rep = check_prop_a(&w, &injection(&mut rng, n), d, &opts).unwrap();
        runs += rep.samples;
        max_dev = max_dev.max(rep.max_deviation);
        failures += usize::from(!rep.passed);
    }
    outcome(
        failures == 0,
        format!(
            "500 weight tuples, {runs} samples; {failures} failures; max deviation {max_dev:.1e}"
        ),
    )
}

fn gen_deviation(rng: &mut ChaCha8Rng, d: usize) -> GenDeviation {
    match rng.random_range(0..3) {
        0 => GenDeviation::inner_product(d, &point_weight(rng, d)).unwrap(),
        1 => {
            // separable deviations live on positive boxes; shift into R via exp-free forms
            let parts = (0..d)
                .map(|_| match rng.random_range(0..2) {
                    0 => ScalarDeviation::arithmetic(),
                    _ => {
                        let a = rng.random_range(0.5..2.0);
                        ScalarDeviation::new(
                            Interval::real_line(),
                            "u-v + a(u^3-v^3)",
                            move |u, v| u - v + a * (u * u * u - v * v * v),
                        )
                        .unwrap()
                    }
                })
                .collect();
            GenDeviation::separable(parts).unwrap()
        }
        _ => make_potential_deviation(&quartic_potential(rng, d)).unwrap(),
    }
}

// w(u) (|v - u|^2 + c |v - u|^4)
fn quartic_potential(rng: &mut ChaCha8Rng, d: usize) -> PotentialFn {
    let w = point_weight(rng, d);
    let c = rng.random_range(0.0..0.5);
    let label = format!("{}(|v-u|^2+{c}|v-u|^4)", w.label());
    let (wf, wg) = (w.clone(), w);
    PotentialFn::new(
        d,
        Interval::real_line(),
        label,
        move |u: &[f64], v: &[f64]| {
            let r2: f64 = u.iter().zip(v).map(|(a, b)| (b - a) * (b - a)).sum();
            wf.eval(u) * (r2 + c * r2 * r2)
        },
        Some(std::sync::Arc::new(move |u: &[f64], v: &[f64]| {
            let r2: f64 = u.iter().zip(v).map(|(a, b)| (b - a) * (b - a)).sum();
            let s = wg.eval(u) * (2.0 + 4.0 * c * r2);
            u.iter().zip(v).map(|(a, b)| s * (b - a)).collect()
        })),
    )
    .unwrap()
}

// sum_k w_k(u) cosh(v_k - u_k) - 1: no analytic gradient supplied
fn cosh_potential(rng: &mut ChaCha8Rng, d: usize) -> PotentialFn {
    let a: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    PotentialFn::new(
        d,
        Interval::real_line(),
        "sum a_k (cosh(v_k-u_k)-1)",
        move |u: &[f64], v: &[f64]| {
            u.iter()
                .zip(v)
                .zip(&a)
                .map(|((p, q), ak)| ak * ((q - p).cosh() - 1.0))
                .sum()
        },
        None,
    )
    .unwrap()
}

fn criterion_4() -> Outcome {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut spread, mut worst_slack, mut failures) = (0.0f64, f64::NEG_INFINITY, 0usize);
    for i in 0..200u64 {
        let (n, d) = (rng.random_range(2..=6), rng.random_range(1..=4));
        let e: Vec<GenDeviation> = (0..n).map(|_| gen_deviation(&mut rng, d)).collect();
        let x = points(&mut rng, n, d);
        let base = gen_deviation_mean(&e, &x, &cfg)
            .unwrap()
            .into_result()
            .unwrap()
            .value
            .point;
        for s in 0..3 {
            let y = gen_deviation_mean_from(&e, &x, &cfg, &Init::Random(i * 7 + s))
                .unwrap()
                .into_result()
                .unwrap()
                .value
                .point;
            spread = spread.max(y.dist(&base));
        }
        let scale = 1.0 + x.iter().map(Point::norm).fold(0.0, f64::max);
        let rep = verify_vi(&e, &x, &base, 1e-8 * scale).unwrap();
        worst_slack = worst_slack.max(rep.worst_slack / scale);
        failures += usize::from(!rep.holds);
    }
    outcome(
        spread <= 1e-7 && failures == 0,
        format!("200 instances, 4 starts each; max disagreement {spread:.1e}; max scaled slack {worst_slack:.1e}"),
    )
}

fn criterion_5() -> Outcome {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut route_gap: f64 = 0.0;
    for _ in 0..200 {
        let (n, d) = (rng.random_range(2..=6), rng.random_range(1..=4));
        let f: Vec<PotentialFn> = (0..n)
            .map(|_| {
                if rng.random_bool(0.3) {
                    cosh_potential(&mut rng, d)
                } else {
                    quartic_potential(&mut rng, d)
                }
            })
            .collect();
        let x = points(&mut rng, n, d);
        let a = potential_mean(&f, &x, &cfg)
            .unwrap()
            .into_result()
            .unwrap()
            .value
            .point;
        let e: Vec<GenDeviation> = f
            .iter()
            .map(|fi| make_potential_deviation(fi).unwrap())
            .collect();
        let b = gen_deviation_mean(&e, &x, &cfg)
            .unwrap()
            .into_result()
            .unwrap()
            .value
            .point;
        route_gap = route_gap.max(a.dist(&b));
    }
    let (mut grid_fail, mut worst_ratio) = (0usize, 0.0f64);
    for _ in 0..50 {
        let (n, d) = (rng.random_range(2..=3), rng.random_range(1..=3));
        let f: Vec<PotentialFn> = (0..n).map(|_| quartic_potential(&mut rng, d)).collect();
        let x = points(&mut rng, n, d);
        let res = if n == 3 {
            601
        } else {
            cfg.grid_oracle_resolution
        };
        let a = potential_mean(&f, &x, &cfg)
            .unwrap()
            .into_result()
            .unwrap()
            .value
            .point;
        let g = grid_oracle_mean(&f, &x, res).unwrap();
        let h = lattice_spacing(&x, res);
        worst_ratio = worst_ratio.max(a.dist(&g) / h);
        grid_fail += usize::from(a.dist(&g) > h);
    }
    outcome(
        route_gap <= 1e-8 && grid_fail == 0,
        format!("200 route pairs, max gap {route_gap:.1e}; 50 grid instances, worst distance {worst_ratio:.2} lattice spacings"),
    )
}

fn criterion_6() -> Outcome {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let (n, d) = (rng.random_range(1..=6), rng.random_range(1..=5));
        let w: Vec<WeightFn> = (0..n).map(|_| point_weight(&mut rng, d)).collect();
        let f: Vec<PotentialFn> = w
            .iter()
            .map(|wi| make_norm_sq_potential(d, wi).unwrap())
            .collect();
        let m = MeanFn::potential(f, cfg.clone()).unwrap();
        let x = points(&mut rng, n, d);
        let y = m.eval(&x).unwrap();
        worst = worst.max(y.dist(&weighted_arith_mean_points(&w, &x).unwrap()));
    }
    outcome(
        worst <= 1e-9,
        format!("500 instances; max distance {worst:.1e}"),
    )
}

fn criterion_7() -> Outcome {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let band = 1e-9;
    let (mut checked, mut wrong) = (0usize, 0usize);
    // sgn e_sum(E, x, u) = sgn(D^E(x) - u)
    while checked < 1000 {
        let n = rng.random_range(1..=6);
        let e = DeviationTuple::new((0..n).map(|_| scalar_deviation(&mut rng)).collect()).unwrap();
        let x = positives(&mut rng, n);
        let dm = deviation_mean(&e, &x, &cfg).unwrap().value;
        let u = rng.random_range(0.05..12.0);
        if (u - dm).abs() <= band * (1.0 + dm.abs()) {
            continue;
        }
        checked += 1;
        wrong += usize::from(deviation_sign(&e, &x, u).unwrap() != (dm - u).signum() as i8);
    }
    // sgn(m_{x,M}(y) - y) = sgn(M_chi(x) - y) for deviation means
    let mut lem4 = 0usize;
    while lem4 < 1000 {
        let n = rng.random_range(2..=5);
        let e = DeviationTuple::new((0..n).map(|_| scalar_deviation(&mut rng)).collect()).unwrap();
        let m = MeanFn::deviation(e, cfg.clone()).unwrap();
        let chi = injection(&mut rng, n);
        let x: Vec<Point> = positives(&mut rng, chi.k())
            .into_iter()
            .map(|t| Point::scalar(t).unwrap())
            .collect();
        let k = reduce(&m, &chi, &x, &cfg).unwrap().reduced_value.first();
        let lo = x.iter().map(Point::first).fold(f64::INFINITY, f64::min);
        let hi = x.iter().map(Point::first).fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..5 {
            let y = if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            };
            if (y - k).abs() <= band * (1.0 + k.abs()) {
                continue;
            }
            let my = meanred::reduction::spliced_eval(&m, &chi, &x, &Point::scalar(y).unwrap())
                .unwrap()
                .first();
            lem4 += 1;
            wrong += usize::from((my - y).signum() != (k - y).signum());
        }
    }
    outcome(
        wrong == 0,
        format!("{checked} deviation-sign + {lem4} spliced-sign triples; {wrong} wrong signs"),
    )
}

fn corpus() -> Vec<Suite> {
    BUILTIN_SUITES
        .iter()
        .map(|(name, _)| builtin(name).unwrap().unwrap())
        .collect()
}

fn criterion_8() -> Outcome {
    let mut counts = [0usize; 3];
    let (mut violations, mut errors) = (Vec::new(), Vec::new());
    for suite in corpus() {
        let rep = suite.run(&RunOptions {
            tol: Some(1e-9),
            ..RunOptions::default()
        });
        for (case, r) in suite.cases.iter().zip(&rep.cases) {
            let slot = match case.check.type_name() {
                "convexity" => 0,
                "compare" => 1,
                "hm" => 2,
                _ => continue,
            };
            if r.reduced.is_some() {
                counts[slot] += 1;
            }
            if r.implication_violated {
                violations.push(format!("{}/{}", suite.name, r.name));
            }
            if let Some(e) = &r.error {
                errors.push(format!("{}/{}: {e}", suite.name, r.name));
            }
        }
    }
    outcome(
        counts.iter().all(|&c| c >= 20) && violations.is_empty() && errors.is_empty(),
        format!(
            "{} convexity, {} comparison, {} hm cases with reductions; implication violations {violations:?}; errors {errors:?}",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn criterion_9() -> Outcome {
    let opts = RunOptions {
        seed: Some(20_261_015),
        trials: Some(60),
        tol: None,
    };
    let mut differing = Vec::new();
    let mut bytes = 0;
    for suite in corpus() {
        let a = serde_json::to_string_pretty(&suite.run(&opts)).unwrap();
        let b = serde_json::to_string_pretty(&suite.run(&opts)).unwrap();
        bytes += a.len();
        if a != b {
            differing.push(suite.name.clone());
        }
    }
    outcome(
        differing.is_empty(),
        format!("{bytes} report bytes; differing suites {differing:?}"),
    )
}

fn criterion_10() -> Outcome {
    let suite = builtin("counterexamples").unwrap().unwrap();
    let rep = suite.run(&RunOptions::default());
    let mut confirmed = 0;
    let mut problems = Vec::new();
    for (i, (case, r)) in suite.cases.iter().zip(&rep.cases).enumerate() {
        if case.expect != Expect::Fail {
            continue;
        }
        let full = r.full.as_ref();
        let Some(x) = full.filter(|f| f.found).and_then(|f| f.witness.clone()) else {
            problems.push(format!("{}: no counterexample", case.name));
            continue;
        };
        // rebuild from the suite file and evaluate afresh
        let lab = case.build(suite.seed + i as u64, &suite.solver).unwrap();
        match reevaluate(&lab, &x, false) {
            Ok(s) if violates(s.lhs, s.rhs, r.tol) && s.lhs > s.rhs => confirmed += 1,
            Ok(s) => problems.push(format!("{}: lhs {} rhs {}", case.name, s.lhs, s.rhs)),
            Err(e) => problems.push(format!("{}: {e}", case.name)),
        }
    }
    outcome(
        confirmed >= 5 && problems.is_empty(),
        format!("{confirmed} witnesses re-verified; problems {problems:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 10] = [
        (
            "closed forms vs deviation solver",
            criterion_1,
            Some(Duration::from_secs(10)),
        ),
        (
            "reduction of deviation means",
            criterion_2,
            Some(Duration::from_secs(30)),
        ),
        ("reduction of weighted arithmetic means", criterion_3, None),
        (
            "uniqueness of generalized deviation means",
            criterion_4,
            None,
        ),
        ("potential route consistency", criterion_5, None),
        (
            "norm-squared potentials give weighted centroids",
            criterion_6,
            None,
        ),
        ("sign laws", criterion_7, None),
        (
            "full inequality implies reduced inequality",
            criterion_8,
            None,
        ),
        ("deterministic verify reports", criterion_9, None),
        (
            "deliberate failures give verified witnesses",
            criterion_10,
            None,
        ),
    ];
    let mut all = true;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        // a panic inside one criterion is reported as its failure
        let mut o = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|m| m.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        if let Some(b) = budget {
            if took > *b {
                o.passed = false;
                o.detail
                    .push_str(&format!("; over the {}s budget", b.as_secs()));
            }
        }
        all &= o.passed;
        println!(
            "criterion {:>2} {}: {} ({}; {:.2}s)",
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            name,
            o.detail,
            took.as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
