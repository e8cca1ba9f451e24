//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wdro::bench::{generate_stream, holdout_sample, StreamFamily, StreamSpec};
use wdro::budget::{solve_subproblem, wasserstein_oracle};
use wdro::distribution::DiscreteDistribution;
use wdro::learner::{run, Problem, RunOptions};
use wdro::model::{
    make_separable_loss, AmbiguitySpec, CoupledAffinePiece, DecisionSpace, DecisionTerm, LossModel, LossPiece,
    SampleBuffer, SampleTerm, SeparablePiece,
};
use wdro::oracle_pairs::{eval_s, ToleranceConfig};
use wdro::reference::{brute_force_master, discrete_w1, finite_diff_check, w1_flow, w1_sorted, GapEstimator, GridSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(name: &str, started: Instant, out: Outcome) -> bool {
    println!(
        "{} {name}: {} [{:.1}s]",
        if out.pass { "PASS" } else { "FAIL" },
        out.detail,
        started.elapsed().as_secs_f64()
    );
    out.pass
}

fn uvec(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(lo..hi)).collect()
}

fn random_piece(rng: &mut ChaCha8Rng, m: usize) -> (DecisionTerm, SampleTerm) {
    let decision = if rng.gen_bool(0.5) {
        DecisionTerm::Affine { slope: uvec(rng, 1, -1.0, 1.0), offset: rng.gen_range(-0.5..0.5) }
    } else {
        DecisionTerm::AbsDeviation { scale: rng.gen_range(0.2..1.0), center: uvec(rng, 1, -1.0, 1.0) }
    };
    let (height, slope, center) = (rng.gen_range(-0.5..0.5), rng.gen_range(0.5..2.0), uvec(rng, m, -1.5, 1.5));
    let sample = if rng.gen_bool(0.5) {
        SampleTerm::Cone { height, slope, center }
    } else {
        SampleTerm::Hyperbolic { height, slope, center }
    };
    (decision, sample)
}

fn random_loss(rng: &mut ChaCha8Rng, k: usize, m: usize) -> LossModel {
    make_separable_loss((0..k).map(|_| random_piece(rng, m)).collect()).unwrap()
}

fn random_samples(rng: &mut ChaCha8Rng, t: usize, m: usize) -> SampleBuffer {
    SampleBuffer::from_rows(m, (0..t).map(|_| uvec(rng, m, -1.5, 1.5))).unwrap()
}

/// Oracle equivalence with grid search and transport feasibility of the
/// returned distribution, on the same instances.
fn oracle_vs_grid() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tol = ToleranceConfig::new(1e-3);
    let radii = [0.0, 0.1, 0.5, 1.0];
    let (mut worst_excess, mut fails, mut worst_w1_excess, mut w1_fails) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY, 0);
    let mut max_dev: f64 = 0.0;
    // Grid points are feasible, so the grid value never exceeds the true
    // supremum and the oracle may sit at most δ below it.
    let mut min_signed = f64::INFINITY;
    let n = 200;
    for i in 0..n {
        let m = if i % 4 == 3 { 2 } else { 1 };
        let (k, t) = (rng.gen_range(1..=3), rng.gen_range(1..=4));
        let rho = radii[i % radii.len()];
        let loss = random_loss(&mut rng, k, m);
        let samples = random_samples(&mut rng, t, m);
        let x = uvec(&mut rng, 1, -1.0, 1.0);
        let at = loss.at(&x).unwrap();
        let amb = AmbiguitySpec::new(rho).unwrap();
        let out = wasserstein_oracle(&at, &samples, &amb, &tol).unwrap();
        let grid = GridSpec::new(200, if m == 1 { 400 } else { 200 }, 200).unwrap();
        let brute = brute_force_master(&at, &samples, rho, &grid).unwrap();
        let dev = (out.value - brute.value).abs();
        max_dev = max_dev.max(dev);
        min_signed = min_signed.min(out.value - brute.value);
        let excess = dev - (tol.delta + brute.resolution);
        worst_excess = worst_excess.max(excess);
        if excess > 0.0 {
            fails += 1;
            eprintln!("oracle mismatch on instance {i}: oracle {} grid {} resolution {}", out.value, brute.value, brute.resolution);
        }
        let w = discrete_w1(&out.distribution, &samples.empirical().unwrap()).unwrap();
        let w_excess = w - (rho + tol.eta_b(loss.lip_xi()) + 1e-8);
        worst_w1_excess = worst_w1_excess.max(w_excess);
        if w_excess > 0.0 {
            w1_fails += 1;
            eprintln!("transport violation on instance {i}: W1 {w} radius {rho}");
        }
    }
    (
        Outcome {
            pass: fails == 0,
            detail: format!(
                "{n} instances, {fails} outside delta + grid resolution; max |oracle - grid| = {max_dev:.2e}, min (oracle - grid) = {min_signed:.2e}, worst slack {:.2e}",
                -worst_excess
            ),
        },
        Outcome {
            pass: w1_fails == 0,
            detail: format!("{n} instances, {w1_fails} with W1(Q, P_t) > rho + eta_b + 1e-8; worst slack {:.2e}", -worst_w1_excess),
        },
    )
}

fn utility_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let tol = ToleranceConfig::new(1e-3);
    let de = tol.delta_eval();
    let (mut mono, mut conc, mut lips) = (0, 0, 0);
    let (mut worst_mono, mut worst_conc, mut worst_lip): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let n = 120;
    for _ in 0..n {
        let m = rng.gen_range(1..=2);
        let k = rng.gen_range(1..=3);
        let loss = random_loss(&mut rng, k, m);
        let x = uvec(&mut rng, 1, -1.0, 1.0);
        let at = loss.at(&x).unwrap();
        let xi = uvec(&mut rng, m, -1.5, 1.5);
        let (mut b0, mut b1) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        if b0 > b1 {
            std::mem::swap(&mut b0, &mut b1);
        }
        let s = |b: f64| eval_s(&at, &xi, b, &tol).unwrap().0;
        let (s0, s1, sm) = (s(b0), s(b1), s(0.5 * (b0 + b1)));
        let drop = s0 - s1;
        worst_mono = worst_mono.max(drop);
        if drop > 0.0 {
            mono += 1;
        }
        let c = 0.5 * (s0 + s1) - sm;
        worst_conc = worst_conc.max(c);
        if c > 12.0 * de {
            conc += 1;
        }
        let l = (s1 - s0).abs() - loss.lip_xi() * (b1 - b0);
        worst_lip = worst_lip.max(l);
        if l > 8.0 * de {
            lips += 1;
        }
    }
    Outcome {
        pass: mono + conc + lips == 0,
        detail: format!(
            "{n} triples; violations: monotone {mono} (worst drop {worst_mono:.1e}), midpoint concavity {conc} (worst {worst_conc:.1e} vs {:.1e}), Lipschitz {lips} (worst {worst_lip:.1e} vs {:.1e})",
            12.0 * de,
            8.0 * de
        ),
    }
}

fn dual_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let tol = ToleranceConfig::new(1e-3);
    let (mut fails, mut worst) = (0, f64::NEG_INFINITY);
    let n = 30;
    for _ in 0..n {
        let m = rng.gen_range(1..=2);
        let t = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=3);
        let loss = random_loss(&mut rng, k, m);
        let samples = random_samples(&mut rng, t, m);
        let x = uvec(&mut rng, 1, -1.0, 1.0);
        let at = loss.at(&x).unwrap();
        let rho_t = [0.1, 0.5, 1.0][rng.gen_range(0..3)] * t as f64;
        let lip = loss.lip_xi();
        let slack = 2.0 * t as f64 * tol.eta_b(lip);
        let mut prev = f64::INFINITY;
        for j in 0..=24 {
            let lambda = lip * j as f64 / 20.0;
            let total: f64 = samples.iter().map(|xi| solve_subproblem(&at, xi, lambda, rho_t, &tol).unwrap().0).sum();
            let rise = total - prev;
            worst = worst.max(rise - slack);
            if rise > slack {
                fails += 1;
            }
            prev = total;
        }
    }
    Outcome { pass: fails == 0, detail: format!("{n} instances x 25 prices, {fails} increases beyond 2t*eta_b; worst slack {:.2e}", -worst) }
}

/// One-dimensional reference problem: decision in [-1, 1], samples N(0.3, 1),
/// radius 0.2, pieces `|x ∓ 0.5| − √(1 + (ξ ∓ 1)²)`.
fn reference_problem(delta: f64) -> Problem {
    let piece = |c: f64| {
        (
            DecisionTerm::AbsDeviation { scale: 1.0, center: vec![0.5 * c] },
            SampleTerm::Hyperbolic { height: 0.0, slope: 1.0, center: vec![c] },
        )
    };
    Problem::new(
        make_separable_loss(vec![piece(1.0), piece(-1.0)]).unwrap(),
        DecisionSpace::boxed(vec![-1.0], vec![1.0]).unwrap(),
        AmbiguitySpec::new(0.2).unwrap(),
        ToleranceConfig::new(delta),
    )
    .unwrap()
}

fn reference_stream() -> StreamSpec {
    StreamSpec { seed: 0, family: StreamFamily::Gaussian { mean: vec![0.3], std: vec![1.0] } }
}

fn regret_bound(estimator: &GapEstimator<'_>) -> Outcome {
    let problem = reference_problem(1e-3);
    let (argmin, _) = estimator.minimum().unwrap();
    let horizon = 400;
    let stream = generate_stream(&reference_stream(), 101, horizon).unwrap();
    let opts = RunOptions { comparator: Some(argmin.clone()), ..RunOptions::default() };
    let started = Instant::now();
    let trace = run(&stream, horizon, &problem, &opts).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let (g, d) = (problem.loss.lip_x(), problem.space.diameter());
    let mut pass = secs < 120.0;
    let mut parts = Vec::new();
    for t in [50, 100, 200, 400] {
        let r = trace.average_regret(t).unwrap();
        let tf = t as f64;
        let bound = g * d * (1.0 + tf.ln()) / tf.sqrt() + 2.0 * problem.tolerance.delta;
        pass &= r <= bound;
        parts.push(format!("T={t}: {r:.4} <= {bound:.4}"));
    }
    Outcome { pass, detail: format!("comparator x = {:.4}; {}; run time {secs:.1}s", argmin[0], parts.join(", ")) }
}

fn gap_rate(estimator: &GapEstimator<'_>) -> Outcome {
    let problem = reference_problem(1e-2);
    let checkpoints = [50usize, 100, 200, 400, 800];
    let seeds = [11u64, 12, 13, 14, 15];
    let mut gaps = vec![0.0; checkpoints.len()];
    for seed in seeds {
        let stream = generate_stream(&reference_stream(), seed, 800).unwrap();
        let trace = run(&stream, 800, &problem, &RunOptions::default()).unwrap();
        for (j, &t) in checkpoints.iter().enumerate() {
            let x_bar = trace.rows[..t].iter().map(|r| r.x[0]).sum::<f64>() / t as f64;
            gaps[j] += estimator.gap(&[x_bar]).unwrap().gap / seeds.len() as f64;
        }
    }
    let pts: Vec<(f64, f64)> = checkpoints.iter().zip(&gaps).map(|(&t, &g)| ((t as f64).ln(), g.max(1e-12).ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let listed: Vec<String> = checkpoints.iter().zip(&gaps).map(|(t, g)| format!("T={t}: {g:.2e}")).collect();
    Outcome { pass: slope <= -0.35, detail: format!("log-log slope {slope:.3} (need <= -0.35); mean gap {}", listed.join(", ")) }
}

fn zero_radius_matches_subgradient_descent() -> Outcome {
    let loss = LossModel::new(vec![
        std::sync::Arc::new(CoupledAffinePiece { x_coef: vec![1.0, 0.0], xi_coef: vec![-1.0, 0.0], offset: 0.0 }),
        std::sync::Arc::new(CoupledAffinePiece { x_coef: vec![-1.0, 0.0], xi_coef: vec![1.0, 0.0], offset: 0.0 }),
        std::sync::Arc::new(CoupledAffinePiece { x_coef: vec![0.0, 1.0], xi_coef: vec![0.0, -1.0], offset: 0.0 }),
        std::sync::Arc::new(CoupledAffinePiece { x_coef: vec![0.0, -1.0], xi_coef: vec![0.0, 1.0], offset: 0.0 }),
    ])
    .unwrap();
    let radius = 0.8;
    let problem = Problem::new(
        loss,
        DecisionSpace::ball(vec![0.0, 0.0], radius).unwrap(),
        AmbiguitySpec::new(0.0).unwrap(),
        ToleranceConfig::new(1e-3),
    )
    .unwrap();
    let horizon = 100;
    let spec = StreamSpec { seed: 0, family: StreamFamily::Gaussian { mean: vec![0.4, -0.2], std: vec![1.0, 0.7] } };
    let stream = generate_stream(&spec, 5, horizon).unwrap();
    let trace = run(&stream, horizon, &problem, &RunOptions::default()).unwrap();

    // Standalone: ℓ(x, ξ) = ‖x − ξ‖_∞ over the ball, full-sample subgradients.
    let (g, d) = (1.0, 2.0 * radius);
    let mut x = [0.0f64, 0.0];
    let mut worst: f64 = 0.0;
    for t in 1..=horizon {
        let row = &trace.rows[t - 1];
        worst = worst.max((row.x[0] - x[0]).abs()).max((row.x[1] - x[1]).abs());
        let mut grad = [0.0; 2];
        for xi in &stream[..t] {
            let (a, b) = (x[0] - xi[0], x[1] - xi[1]);
            // First maximal piece in the order x−ξ, ξ−x per coordinate.
            let vals = [a, -a, b, -b];
            let k = (0..4).fold(0, |best, k| if vals[k] > vals[best] { k } else { best });
            grad[k / 2] += if k % 2 == 0 { 1.0 } else { -1.0 };
        }
        let eta = d / (g * (t as f64).sqrt());
        let y = [x[0] - eta * grad[0] / t as f64, x[1] - eta * grad[1] / t as f64];
        let n = (y[0] * y[0] + y[1] * y[1]).sqrt();
        x = if n > radius { [y[0] * radius / n, y[1] * radius / n] } else { y };
    }
    Outcome { pass: worst <= 1e-10, detail: format!("{horizon} rounds, max iterate difference {worst:.2e}") }
}

fn random_dist(rng: &mut ChaCha8Rng, dim: usize) -> DiscreteDistribution {
    let n = rng.gen_range(1..=12);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    DiscreteDistribution::new(dim, uvec(rng, n * dim, -2.0, 2.0), raw.iter().map(|w| w / s).collect()).unwrap()
}

fn validators() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut axiom_fails = 0;
    let mut agree: f64 = 0.0;
    for i in 0..100 {
        let dim = 1 + i % 2;
        let (p, q, r) = (random_dist(&mut rng, dim), random_dist(&mut rng, dim), random_dist(&mut rng, dim));
        let w = |a: &DiscreteDistribution, b: &DiscreteDistribution| discrete_w1(a, b).unwrap();
        let (pq, qp, pr, rq) = (w(&p, &q), w(&q, &p), w(&p, &r), w(&r, &q));
        let ok = w(&p, &p).abs() <= 1e-9 && pq > 0.0 && (pq - qp).abs() <= 1e-9 && pq <= pr + rq + 1e-9;
        if !ok {
            axiom_fails += 1;
        }
        if dim == 1 {
            agree = agree.max((w1_sorted(&p, &q).unwrap() - w1_flow(&p, &q).unwrap()).abs());
        }
    }
    let mut fd_worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.gen_range(1..=2);
        let piece = SeparablePiece::new(
            DecisionTerm::Affine { slope: vec![0.3], offset: 0.0 },
            SampleTerm::Hyperbolic { height: rng.gen_range(-1.0..1.0), slope: rng.gen_range(0.2..3.0), center: uvec(&mut rng, m, -2.0, 2.0) },
        )
        .unwrap();
        let at: &dyn LossPiece = &piece;
        fd_worst = fd_worst.max(finite_diff_check(at, &[0.1], &uvec(&mut rng, m, -3.0, 3.0), 1e-5).unwrap());
    }
    Outcome {
        pass: axiom_fails == 0 && agree <= 1e-8 && fd_worst <= 1e-6,
        detail: format!(
            "100 W1 triples with {axiom_fails} axiom violations (sorted vs flow max diff {agree:.1e}); finite-difference max deviation {fd_worst:.1e}"
        ),
    }
}

fn main() {
    let mut all = true;

    let t0 = Instant::now();
    let (eq, feas) = oracle_vs_grid();
    all &= report("oracle equivalence with grid search", t0, eq);
    all &= report("transport feasibility of the worst case", t0, feas);

    let t0 = Instant::now();
    all &= report("utility monotone, concave, Lipschitz", t0, utility_structure());

    let t0 = Instant::now();
    all &= report("allocated budget non-increasing in the price", t0, dual_monotonicity());

    // Hold-out stand-in for the true law: 2000 stratified quantiles.
    let t0 = Instant::now();
    let holdout_problem = reference_problem(1e-3);
    let estimator = GapEstimator::new(&holdout_problem, holdout_sample(&reference_stream(), 2000).unwrap(), 11, true).unwrap();
    let (argmin, min_value) = estimator.minimum().unwrap();
    println!("info reference minimizer x = {:.5}, value {min_value:.6} [{:.1}s]", argmin[0], t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    all &= report("average regret within the step-size bound", t0, regret_bound(&estimator));

    let t0 = Instant::now();
    all &= report("gap proxy decays with the horizon", t0, gap_rate(&estimator));

    let t0 = Instant::now();
    all &= report("zero radius reduces to projected subgradient descent", t0, zero_radius_matches_subgradient_descent());

    let t0 = Instant::now();
    all &= report("validator self-consistency", t0, validators());

    if !all {
        std::process::exit(1);
    }
}
