//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::time::{Duration, Instant};

use blsmo::descriptor::{compute_t, verify_structure_identity};
use blsmo::linalg::{self, Mat, Vector};
use blsmo::multipliers::{
    check_iqc, imm_cone_constraints, imm_lipschitz, imm_polytope_constraints, imm_positively_real, imm_quasi_lipschitz,
    imm_sector, BlockConstraintSet, IqcSampler,
};
use blsmo::observer::{self, check_step_convergence};
use blsmo::pipeline;
use blsmo::reconstruction::{discontinuity_mask, filter_signal, taps, Kernel, KernelKind};
use blsmo::scenario::{example1, example2, ScenarioConfig};
use blsmo::synthesis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MU_EXAMPLE1: f64 = 18.5268;
const MU_EXAMPLE2: f64 = 4.71;
const BOUND_EXAMPLE1: f64 = 0.082;
const BOUND_EXAMPLE2: f64 = 0.1048;

type Outcome = Result<String, String>;
type Nonlinearity = Box<dyn Fn(&Vector) -> Vector>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random `(E_bar, A_bar, C_bar)` with `n_x <= 8` and `n_y >= m_y`.
fn random_descriptors(count: usize) -> Vec<(Mat, Mat, Mat)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..count)
        .map(|_| {
            let n_x = rng.gen_range(1..=8);
            let n_y = rng.gen_range(1..=8);
            let m_y = rng.gen_range(1..=n_y.min(3));
            let a = random_mat(&mut rng, n_x, n_x);
            let c = random_mat(&mut rng, n_y, n_x);
            let d = random_mat(&mut rng, n_y, m_y);
            let e_bar = linalg::hstack(&Mat::identity(n_x, n_x), &Mat::zeros(n_x, m_y));
            let a_bar = linalg::hstack(&a, &Mat::zeros(n_x, m_y));
            let c_bar = linalg::hstack(&c, &d);
            (e_bar, a_bar, c_bar)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for (e, _, c) in random_descriptors(100) {
        let (t1, t2, _) = compute_t(&e, &c).map_err(|e| e.to_string())?;
        let n = e.ncols();
        worst = worst.max(linalg::max_abs(&(&t1 * &e - &t2 * &c - Mat::identity(n, n))));
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-10, || format!("identity residual {worst:e}"))?;
    within(elapsed, 1.0)?;
    Ok(format!(
        "max residual {worst:.2e} over 100 systems, {:.3} s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for (e, a, c) in random_descriptors(100) {
        let (t1, t2, _) = compute_t(&e, &c).map_err(|e| e.to_string())?;
        let l1 = random_mat(&mut rng, e.ncols(), c.nrows()) * 10.0;
        worst = worst.max(verify_structure_identity(&t1, &t2, &a, &c, &l1).map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-9, || format!("structure residual {worst:e}"))?;
    Ok(format!("max residual {worst:.2e} over 100 systems with random L1"))
}

fn scalar(f: fn(f64) -> f64) -> impl Fn(&Vector) -> Vector {
    move |q: &Vector| q.map(f)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let sampler = IqcSampler::default();
    let n = 10_000;
    let one = Mat::identity(1, 1);
    let e = |err: blsmo::Error| err.to_string();

    let lipschitz = imm_lipschitz(1.0, 1, 1).map_err(e)?.instantiate(1.0).unwrap();
    let quasi = imm_quasi_lipschitz(0.0, &(-&one), &one)
        .map_err(e)?
        .instantiate(1.0)
        .unwrap();
    let sector = imm_sector(&one, &one, &one, &(-&one), &(&one * 0.5))
        .map_err(e)?
        .instantiate(1.0)
        .unwrap();
    let positive = imm_positively_real(&one, 1.0).map_err(e)?.instantiate(1.0).unwrap();

    // block classes: exhibit a concrete M and check it meets the side constraints
    let polytope_set = imm_polytope_constraints(&[-&one, one.clone()]).map_err(e)?;
    let polytope = BlockConstraintSet::assemble(&one, &Mat::zeros(1, 1), &(-&one));
    let cone_set = imm_cone_constraints(std::slice::from_ref(&one)).map_err(e)?;
    let cone = BlockConstraintSet::assemble(&Mat::zeros(1, 1), &one, &Mat::zeros(1, 1));
    for (name, set, m) in [("polytope", &polytope_set, &polytope), ("cone", &cone_set, &cone)] {
        let v = set.violation(
            &m.view((0, 0), (1, 1)).into_owned(),
            &m.view((0, 1), (1, 1)).into_owned(),
            &m.view((1, 1), (1, 1)).into_owned(),
        );
        ensure(v <= 1e-12, || {
            format!("{name} multiplier violates its block constraints by {v:e}")
        })?;
    }

    let cases: Vec<(&str, &Mat, Nonlinearity)> = vec![
        ("lipschitz/cos", &lipschitz, Box::new(scalar(f64::cos))),
        ("quasi_lipschitz/q|q|", &quasi, Box::new(scalar(|q| q * q.abs()))),
        ("sector/sin", &sector, Box::new(scalar(f64::sin))),
        ("positively_real/q^3", &positive, Box::new(scalar(|q| q * q * q))),
        ("polytope/sin", &polytope, Box::new(scalar(f64::sin))),
        ("cone/atan", &cone, Box::new(scalar(f64::atan))),
    ];
    let mut lines = Vec::new();
    for (name, m, f) in &cases {
        let r = check_iqc(m, f.as_ref(), 1, sampler, n).map_err(e)?;
        ensure(r.min_form_value >= -1e-9, || {
            format!("{name}: min form {:e}", r.min_form_value)
        })?;
        lines.push(format!("{name} {:.1e}", r.min_form_value));
    }
    let mismatch = check_iqc(&lipschitz, scalar(|q| q * q), 1, sampler, n).map_err(e)?;
    ensure(!mismatch.passed(), || {
        "q^2 against the Lipschitz multiplier was not flagged".into()
    })?;
    within(start.elapsed(), 5.0)?;
    Ok(format!(
        "min forms: {}; q^2 vs Lipschitz flagged (min {:.2e})",
        lines.join(", "),
        mismatch.min_form_value
    ))
}

fn synth_check(config: &ScenarioConfig, reference_mu: f64) -> Result<(synthesis::SynthesisResult, f64), String> {
    let start = Instant::now();
    let r = pipeline::synthesize(config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(r.gains.mu <= 1.1 * reference_mu, || {
        format!("mu = {} > 1.1 x {reference_mu}", r.gains.mu)
    })?;
    ensure(r.verification.passes(1e-6), || {
        format!("verification failed: {:?}", r.verification)
    })?;
    ensure(elapsed < 30.0, || format!("took {elapsed:.2} s"))?;
    Ok((r, elapsed))
}

fn criterion_4() -> Outcome {
    let (r, t) = synth_check(&example1(), MU_EXAMPLE1)?;
    Ok(format!(
        "mu = {:.4} (limit {:.4}), decay residual {:.1e}, matching {:.1e}, {t:.2} s",
        r.gains.mu,
        1.1 * MU_EXAMPLE1,
        r.verification.decay,
        r.verification.matching
    ))
}

fn criterion_5() -> Outcome {
    let config = example2();
    let (r, t) = synth_check(&config, MU_EXAMPLE2)?;
    ensure(r.lambda1 > 0.0, || format!("lambda1 = {}", r.lambda1))?;
    let d = pipeline::descriptor_of(&config).map_err(|e| e.to_string())?;
    let t1g = &d.t1 * &d.plant.m.g;
    ensure(linalg::has_full_column_rank(&t1g), || "T1 G is rank deficient".into())?;
    Ok(format!(
        "mu = {:.4} (limit {:.4}), lambda1 = {:.4}, rank T1 G = {}, {t:.2} s",
        r.gains.mu,
        1.1 * MU_EXAMPLE2,
        r.lambda1,
        linalg::rank(&t1g)
    ))
}

struct SimCheck {
    sup: f64,
    t_s: f64,
    bound: f64,
    halving_change: f64,
    seconds: f64,
}

fn simulate_example(config: &ScenarioConfig, reference_bound: f64) -> Result<SimCheck, String> {
    let e = |err: blsmo::Error| err.to_string();
    let start = Instant::now();
    let o = pipeline::run(config, None).map_err(e)?;
    let seconds = start.elapsed().as_secs_f64();
    let m = &o.metrics.error;
    ensure(m.terminal_sup_error <= reference_bound, || {
        format!("terminal |e| = {:e} > {reference_bound}", m.terminal_sup_error)
    })?;
    let t_s = m.t_s.ok_or("the trace never stays inside the boundary layer")?;
    let i = o.trace.index_at(t_s);
    ensure(o.trace.sigma_norm[i..].iter().all(|s| *s < o.gains.eta), || {
        "|sigma| leaves the boundary layer after t_S".into()
    })?;
    let d = pipeline::descriptor_of(config).map_err(e)?;
    let scenario = pipeline::scenario_of(config, d, o.gains.clone()).map_err(e)?;
    let halving_change = check_step_convergence(&scenario, config.simulation.trailing_fraction, 0.01).map_err(e)?;
    Ok(SimCheck {
        sup: m.terminal_sup_error,
        t_s,
        bound: m.bound,
        halving_change,
        seconds,
    })
}

fn criterion_6() -> Outcome {
    let config = example1();
    let c = simulate_example(&config, BOUND_EXAMPLE1)?;
    ensure(c.seconds < 60.0, || format!("simulation took {:.1} s", c.seconds))?;
    Ok(format!(
        "terminal |e| = {:.3e} <= {BOUND_EXAMPLE1} (own bound {:.4}), t_S = {:.3} s, step {} s, halving changes it by {:.3}%, {:.1} s",
        c.sup,
        c.bound,
        c.t_s,
        config.simulation.step,
        100.0 * c.halving_change,
        c.seconds
    ))
}

fn criterion_7() -> Outcome {
    let config = example2();
    let c = simulate_example(&config, BOUND_EXAMPLE2)?;
    let rho_x = 34f64.sqrt();
    let at_reference = synthesis::ultimate_bound(MU_EXAMPLE2, 1e-4, rho_x, 0.5).map_err(|e| e.to_string())?;
    Ok(format!(
        "terminal |e| = {:.3e} <= {BOUND_EXAMPLE2}; bound formula gives {at_reference:.4} with the reference mu and {:.4} with ours; t_S = {:.3} s, halving changes it by {:.3}%",
        c.sup,
        c.bound,
        c.t_s,
        100.0 * c.halving_change
    ))
}

fn criterion_8() -> Outcome {
    let o = pipeline::run(&example1(), None).map_err(|e| e.to_string())?;
    let r = o.metrics.reconstruction.ok_or("no reconstruction block")?;
    let mse = r.mse.ok_or("no samples scored")?;
    ensure((r.onset - 20.0).abs() < 1e-12, || format!("scored from {}", r.onset))?;
    ensure(mse <= 1e-3, || format!("mse {mse:e}"))?;
    Ok(format!(
        "mse = {mse:.3e} over [{}, {:.2}] s, {} samples outside jump neighborhoods",
        r.onset, r.end, r.samples_scored
    ))
}

fn grid(t0: f64, tf: f64, step: f64) -> Vec<f64> {
    let n = ((tf - t0) / step).round() as usize;
    (0..=n).map(|i| t0 + i as f64 * step).collect()
}

fn interior_sup(out: &blsmo::reconstruction::Filtered, truth: &[f64]) -> f64 {
    (0..truth.len())
        .filter_map(|i| out.get(i).map(|v| (v - truth[i]).abs()))
        .fold(0.0, f64::max)
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let e = |err: blsmo::Error| err.to_string();
    let k = Kernel::new(KernelKind::StandardBump);
    let step = 1e-3;
    let w = taps(&k, 0.3, step).map_err(e)?;
    let norm_err = (w.iter().sum::<f64>() * step - 1.0).abs();
    ensure(norm_err <= 1e-6, || format!("taps integrate to 1 + {norm_err:e}"))?;
    ensure((k.c - 2.25228).abs() < 1e-4, || format!("c = {}", k.c))?;

    let g = grid(0.0, 10.0, step);
    let constant = vec![-1.75; g.len()];
    let const_err = interior_sup(&filter_signal(&constant, 0.3, &k, step).map_err(e)?, &constant);
    ensure(const_err <= 1e-6, || format!("constant signal error {const_err:e}"))?;

    let beta = 0.1;
    let s: Vec<f64> = g.iter().map(|t| t.sin()).collect();
    let sin_err = interior_sup(&filter_signal(&s, beta, &k, step).map_err(e)?, &s);
    let modulus = 2.0 * (beta / 2.0).sin();
    ensure(sin_err <= modulus + 1e-6, || {
        format!("sin error {sin_err:e} > {modulus:e}")
    })?;

    // bounded piecewise signal: sin plus a unit jump at t = 5
    let beta = 0.3;
    let p: Vec<f64> = g.iter().map(|&t| t.sin() + if t < 5.0 { 0.0 } else { 1.0 }).collect();
    let sup_p = p.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let out = filter_signal(&p, beta, &k, step).map_err(e)?;
    let mask = discontinuity_mask(&[5.0], beta, &g).map_err(e)?;
    let (mut inside, mut outside) = (0.0_f64, 0.0_f64);
    for i in 0..g.len() {
        if let Some(v) = out.get(i) {
            let err = (v - p[i]).abs();
            if mask[i] {
                inside = inside.max(err);
            } else {
                outside = outside.max(err);
            }
        }
    }
    let modulus_p = 2.0 * (beta / 2.0).sin();
    ensure(inside <= 2.0 * sup_p + 1e-9, || {
        format!("in-mask error {inside} > {}", 2.0 * sup_p)
    })?;
    ensure(outside <= modulus_p + 1e-6, || {
        format!("off-mask error {outside} > {modulus_p}")
    })?;
    within(start.elapsed(), 5.0)?;
    Ok(format!(
        "normalization {norm_err:.1e}, constant {const_err:.1e}, sin {sin_err:.4} <= {:.4}, jump in-mask {inside:.3} <= {:.3}, off-mask {outside:.4} <= {modulus_p:.4}",
        2.0 * (0.05f64).sin(),
        2.0 * sup_p
    ))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn criterion_10() -> Outcome {
    let e = |err: blsmo::Error| err.to_string();
    let etas = [1e-2, 1e-3, 1e-4];
    let rows = pipeline::sweep(&example1(), pipeline::SweepParameter::Eta, &etas, 3).map_err(e)?;
    let errs: Vec<f64> = rows.iter().map(|r| r.terminal_sup_error).collect();
    ensure(strictly_decreasing(&errs), || format!("eta sweep errors {errs:?}"))?;

    // continuous channel of example 2 (3 cos t), scored on a common window
    let mut config = example2();
    let gains = pipeline::synthesize(&config).map_err(e)?.gains;
    config.reconstruction.as_mut().unwrap().onset = Some(20.0);
    let trace = {
        let d = pipeline::descriptor_of(&config).map_err(e)?;
        observer::simulate(&pipeline::scenario_of(&config, d, gains).map_err(e)?).map_err(e)?
    };
    let k = Kernel::new(KernelKind::StandardBump);
    let channel: Vec<f64> = trace.w_hat.iter().map(|v| v[0]).collect();
    let truth: Vec<f64> = trace.t.iter().map(|t| 3.0 * t.cos()).collect();
    let lo = trace.index_at(20.0);
    let mut beta_errs = Vec::new();
    for beta in [0.4, 0.2, 0.1] {
        let out = filter_signal(&channel, beta, &k, trace.step()).map_err(e)?;
        let err = (lo..trace.len())
            .filter_map(|i| out.get(i).map(|v| (v - truth[i]).abs()))
            .fold(0.0, f64::max);
        beta_errs.push(err);
    }
    ensure(strictly_decreasing(&beta_errs), || {
        format!("beta sweep errors {beta_errs:?}")
    })?;
    Ok(format!(
        "eta {{1e-2,1e-3,1e-4}} -> terminal |e| {:.2e}, {:.2e}, {:.2e}; beta {{0.4,0.2,0.1}} -> sup error {:.2e}, {:.2e}, {:.2e}",
        errs[0], errs[1], errs[2], beta_errs[0], beta_errs[1], beta_errs[2]
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("descriptor identity on random systems", criterion_1),
        ("structure identity for random L1", criterion_2),
        ("multiplier IQC suite", criterion_3),
        ("example 1 synthesis", criterion_4),
        ("example 2 synthesis", criterion_5),
        ("example 1 simulation", criterion_6),
        ("example 2 simulation", criterion_7),
        ("example 1 reconstruction", criterion_8),
        ("reconstruction properties", criterion_9),
        ("eta and beta trends", criterion_10),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let t = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail} [{t:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {title}: {detail} [{t:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
