//! Observer gain synthesis by semidefinite programming.
//!
//! Decision variables are `P`, `Y1 = P L1`, `F`, the multiplier variables and
//! `mu`. The matrix inequality is linear in all of them once `L2` and `alpha`
//! are fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorSystem;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::multipliers::{BlockConstraintSet, ConstraintSense, MatrixExpr, MultiplierSpec, Scale, MIN_SCALE};
use crate::sdp::{AffineMatrix, SdpProblem, SdpSolver, SolveStatus, Variable};

/// Margin for the strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-9;
/// `P` with a larger condition number is rejected.
pub const MAX_P_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    pub alpha: f64,
    /// Fixed innovation gain, `n_q x n_y`.
    pub l2: Mat,
    pub multiplier: MultiplierSpec,
    pub rho_x: f64,
    pub eta: f64,
    /// Requested sliding gain; raised to at least `rho_x * rho_safety`.
    pub rho: Option<f64>,
    pub rho_safety: f64,
    pub minimize_mu: bool,
    /// Relative tolerance of the post-solve verification.
    pub solver_tolerance: f64,
    /// Upper bound `P <= p_max I`. Without it, minimizing `mu` is unbounded
    /// below because every other constraint is homogeneous in `P`.
    pub p_max: Option<f64>,
    /// Weight of `||Y1||_F` in the objective; keeps `L1` moderate.
    pub y1_weight: f64,
}

impl SynthesisConfig {
    pub fn new(alpha: f64, l2: Mat, multiplier: MultiplierSpec, rho_x: f64, eta: f64) -> Self {
        Self {
            alpha,
            l2,
            multiplier,
            rho_x,
            eta,
            rho: None,
            rho_safety: 1.0,
            minimize_mu: true,
            solver_tolerance: 1e-6,
            p_max: Some(40.0),
            y1_weight: 0.01,
        }
    }

    pub fn validate(&self, d: &DescriptorSystem) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::ConfigInvalid(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::ConfigInvalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.rho_x >= 0.0) {
            return Err(Error::ConfigInvalid(format!("rho_x must be >= 0, got {}", self.rho_x)));
        }
        if let Some(p) = self.p_max {
            if !(p > 0.0) {
                return Err(Error::ConfigInvalid(format!("p_max must be > 0, got {p}")));
            }
        }
        let n_q = d.plant.n_q();
        let n_f = d.plant.n_f();
        if self.l2.shape() != (n_q, d.n_y()) {
            return Err(Error::DimensionMismatch(format!(
                "L2 is {}x{}, expected {n_q}x{}",
                self.l2.nrows(),
                self.l2.ncols(),
                d.n_y()
            )));
        }
        let (mq, mf) = self.multiplier.dims();
        if (mq, mf) != (n_q, n_f) {
            return Err(Error::MultiplierDimensionMismatch {
                expected: n_q + n_f,
                got: mq + mf,
            });
        }
        Ok(())
    }
}

/// Multiplier decision variables.
#[derive(Debug, Clone)]
pub enum MultiplierVars {
    Scale(Variable),
    Pinned(f64),
    Blocks {
        m11: Variable,
        m12: Variable,
        m22: Variable,
    },
}

/// The assembled program with handles to its variables.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub sdp: SdpProblem,
    pub p: Variable,
    pub y1: Variable,
    pub f: Variable,
    pub mu: Variable,
    pub multiplier: MultiplierVars,
    /// Epigraph variable of `||Y1||_F` when it is penalized.
    pub y1_norm: Option<Variable>,
}

/// `Phi = [[C_q E - L2 C, 0], [0, I]]`.
pub fn phi_matrix(d: &DescriptorSystem, l2: &Mat) -> Mat {
    let n_f = d.plant.n_f();
    let top = d.cq_e() - l2 * &d.c_bar;
    linalg::block2x2(
        &top,
        &Mat::zeros(top.nrows(), n_f),
        &Mat::zeros(n_f, top.ncols()),
        &Mat::identity(n_f, n_f),
    )
}

/// `Xi + Phi^T M Phi` over generic matrix expressions.
fn main_lmi<E: MatrixExpr + Clone>(
    d: &DescriptorSystem,
    alpha: f64,
    phi: &Mat,
    p: &E,
    y1: &E,
    m: &E,
    blocks: impl Fn(&E, &E, &E, &E) -> E,
) -> E {
    let ta = &d.t1 * &d.a_bar;
    let pta = E::rmul(p, &ta);
    let y1c = E::rmul(y1, &d.c_bar);
    let two_alpha_p = E::rmul(p, &(Mat::identity(d.n_aug(), d.n_aug()) * (2.0 * alpha)));
    let xi11 = pta
        .add(&pta.transpose())
        .add(&E::rmul(&y1c, &-Mat::identity(d.n_aug(), d.n_aug())))
        .add(&E::rmul(&y1c.transpose(), &-Mat::identity(d.n_aug(), d.n_aug())))
        .add(&two_alpha_p);
    let xi12 = E::rmul(p, &(&d.t1 * &d.plant.m.b_f));
    let n_f = d.plant.n_f();
    let zero = E::rmul(&E::lmul(&Mat::zeros(n_f, d.n_aug()), p), &Mat::zeros(d.n_aug(), n_f));
    let xi = blocks(&xi11, &xi12, &xi12.transpose(), &zero);
    let pmp = E::lmul(&phi.transpose(), &E::rmul(m, phi));
    xi.add(&pmp)
}

fn affine_blocks(a: &AffineMatrix, b: &AffineMatrix, c: &AffineMatrix, d: &AffineMatrix) -> AffineMatrix {
    AffineMatrix::blocks(&[vec![a.clone(), b.clone()], vec![c.clone(), d.clone()]])
}

fn mat_blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    linalg::block2x2(a, b, c, d)
}

/// `diag(eps I_n, 0)`: the margin applies to the error block only, since
/// multipliers such as the positively real one have a zero `f`-block.
fn margin_matrix(n: usize, n_f: usize, eps: f64) -> Mat {
    let mut m = Mat::zeros(n + n_f, n + n_f);
    for i in 0..n {
        m[(i, i)] = eps;
    }
    m
}

pub fn assemble_lmi(d: &DescriptorSystem, config: &SynthesisConfig) -> Result<SynthesisProblem> {
    config.validate(d)?;
    // G^T T1^T P = F C with P > 0 gives F C T1 G = (T1 G)^T P T1 G > 0
    let t1g = &d.t1 * &d.plant.m.g;
    let ct1g = &d.c_bar * &t1g;
    let sigma_min = linalg::singular_values(&ct1g).min();
    if sigma_min <= 1e-10 * linalg::op_norm(&d.c_bar) * linalg::op_norm(&t1g) {
        return Err(Error::Infeasible(
            "G^T T1^T P = F C has no solution with P > 0: C T1 G lacks full column rank".into(),
        ));
    }
    let n = d.n_aug();
    let n_y = d.n_y();
    let m_x = d.plant.m_x();
    let n_f = d.plant.n_f();
    let mut sdp = SdpProblem::new();
    let p = sdp.symmetric("P", n);
    let y1 = sdp.matrix("Y1", n, n_y);
    let f = sdp.matrix("F", m_x, n_y);
    let mu = sdp.scalar("mu");

    let (multiplier, m_expr) = match &config.multiplier {
        MultiplierSpec::Pattern { pattern, scale, .. } => match scale {
            Scale::Free => {
                let z = sdp.scalar("zeta");
                sdp.nonnegative("zeta_min", z.expr().add_constant(&Mat::from_element(1, 1, -MIN_SCALE)))?;
                let e = z.expr().scalar_times(pattern);
                (MultiplierVars::Scale(z), e)
            }
            Scale::Pinned(v) => (MultiplierVars::Pinned(*v), AffineMatrix::constant(pattern * *v)),
        },
        MultiplierSpec::Blocks(set) => {
            let m11 = sdp.symmetric("M11", set.n_q);
            let m12 = sdp.matrix("M12", set.n_q, set.n_f);
            let m22 = sdp.symmetric("M22", set.n_f);
            add_block_constraints(&mut sdp, set, &m11.expr(), &m12.expr(), &m22.expr())?;
            let e = affine_blocks(&m11.expr(), &m12.expr(), &m12.expr().transpose(), &m22.expr());
            (MultiplierVars::Blocks { m11, m12, m22 }, e)
        }
    };

    let phi = phi_matrix(d, &config.l2);
    let lmi = main_lmi(d, config.alpha, &phi, &p.expr(), &y1.expr(), &m_expr, affine_blocks);
    sdp.nsd("decay", lmi.add_constant(&margin_matrix(n, n_f, STRICT_MARGIN)))?;

    // G^T T1^T P = F C
    let gt = (&d.t1 * &d.plant.m.g).transpose();
    let lhs = AffineMatrix::lmul(&gt, &p.expr());
    let rhs = AffineMatrix::rmul(&f.expr(), &d.c_bar);
    sdp.equal_zero("matching", lhs.sub(&rhs))?;

    let eye = AffineMatrix::constant(Mat::identity(n, n));
    sdp.psd(
        "mu_bound",
        affine_blocks(&p.expr(), &eye, &eye, &mu.expr().scalar_times(&Mat::identity(n, n))),
    )?;
    sdp.psd("p_pos", p.expr().add_constant(&(Mat::identity(n, n) * -STRICT_MARGIN)))?;
    if let Some(pm) = config.p_max {
        sdp.psd("p_max", p.expr().neg().add_constant(&(Mat::identity(n, n) * pm)))?;
    }

    let mut y1_norm = None;
    if config.minimize_mu {
        sdp.minimize_scalar(&mu, 1.0);
        if config.y1_weight > 0.0 {
            let t = sdp.scalar("y1_norm");
            let vec_y1 = AffineMatrix::rmul(
                &AffineMatrix::lmul(&Mat::identity(n, n), &y1.expr()),
                &Mat::identity(n_y, n_y),
            );
            // stack [t; vec(Y1)]
            let cols: Vec<Vec<AffineMatrix>> = std::iter::once(vec![t.expr()])
                .chain((0..n_y).map(|j| vec![column(&vec_y1, j)]))
                .collect();
            sdp.second_order("y1_epigraph", AffineMatrix::blocks(&cols))?;
            sdp.minimize_scalar(&t, config.y1_weight);
            y1_norm = Some(t);
        }
    }
    Ok(SynthesisProblem {
        sdp,
        p,
        y1,
        f,
        mu,
        multiplier,
        y1_norm,
    })
}

fn column(e: &AffineMatrix, j: usize) -> AffineMatrix {
    let mut sel = Mat::zeros(e.ncols(), 1);
    sel[(j, 0)] = 1.0;
    AffineMatrix::rmul(e, &sel)
}

fn add_block_constraints(
    sdp: &mut SdpProblem,
    set: &BlockConstraintSet,
    m11: &AffineMatrix,
    m12: &AffineMatrix,
    m22: &AffineMatrix,
) -> Result<()> {
    for (k, c) in set.constraints.iter().enumerate() {
        let e = c.expr(m11, m12, m22);
        let name = format!("multiplier_{k}");
        match c.sense() {
            ConstraintSense::PositiveSemidefinite => sdp.psd(&name, e)?,
            ConstraintSense::NegativeSemidefinite => sdp.nsd(&name, e)?,
            ConstraintSense::Zero => sdp.equal_zero(&name, e)?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    #[serde(rename = "P", with = "linalg::rows")]
    pub p: Mat,
    #[serde(rename = "L1", with = "linalg::rows")]
    pub l1: Mat,
    #[serde(rename = "L2", with = "linalg::rows")]
    pub l2: Mat,
    #[serde(rename = "F", with = "linalg::rows")]
    pub f: Mat,
    pub rho: f64,
    pub eta: f64,
    pub mu: f64,
    pub alpha: f64,
    /// The concrete multiplier.
    #[serde(rename = "M", with = "linalg::rows")]
    pub m: Mat,
    /// Multiplier scale, for pattern multipliers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
}

/// Residuals of the four synthesis conditions at a candidate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verification {
    /// Largest eigenvalue of `Xi + Phi^T M Phi`, relative to its scale.
    pub decay: f64,
    /// `max |G^T T1^T P - F C|`, relative to `max |P|`.
    pub matching: f64,
    /// Negative part of the smallest eigenvalue of `[[P, I], [I, mu I]]`, relative.
    pub mu_bound: f64,
    pub p_min_eigenvalue: f64,
    pub p_condition: f64,
    /// `rho - rho_x`.
    pub rho_margin: f64,
}

impl Verification {
    pub fn passes(&self, tol: f64) -> bool {
        self.decay <= tol
            && self.matching <= tol
            && self.mu_bound <= tol
            && self.p_min_eigenvalue > 0.0
            && self.rho_margin >= 0.0
    }
}

/// Checks the gains against the original conditions, with `Y1 = P L1`.
pub fn verify_gains(d: &DescriptorSystem, gains: &ObserverGains, rho_x: f64) -> Verification {
    let n = d.n_aug();
    let y1 = &gains.p * &gains.l1;
    let phi = phi_matrix(d, &gains.l2);
    let lmi = linalg::symmetrize(&main_lmi(d, gains.alpha, &phi, &gains.p, &y1, &gains.m, mat_blocks));
    let scale = 1.0_f64.max(linalg::max_abs(&lmi));
    let decay = linalg::max_eigenvalue(&lmi).max(0.0) / scale;

    let gt = (&d.t1 * &d.plant.m.g).transpose();
    let resid = &gt * &gains.p - &gains.f * &d.c_bar;
    let matching = linalg::max_abs(&resid) / 1.0_f64.max(linalg::max_abs(&gains.p));

    let eye = Mat::identity(n, n);
    let c = linalg::block2x2(&gains.p, &eye, &eye, &(&eye * gains.mu));
    let mu_bound = (-linalg::min_eigenvalue(&c)).max(0.0) / 1.0_f64.max(linalg::max_abs(&c));
    Verification {
        decay,
        matching,
        mu_bound,
        p_min_eigenvalue: linalg::min_eigenvalue(&gains.p),
        p_condition: linalg::condition_number(&gains.p),
        rho_margin: gains.rho - rho_x,
    }
}

/// Everything produced by one synthesis run.
#[derive(Debug, Clone, Serialize)]
pub struct SynthesisResult {
    pub gains: ObserverGains,
    pub verification: Verification,
    pub lambda1: f64,
    /// `sqrt(mu eta rho_x / alpha)`.
    pub ultimate_bound: f64,
    /// `sqrt(2 mu eta rho_x / alpha)`, reported alongside for comparison.
    pub ultimate_bound_doubled: f64,
    pub solver_status: String,
    pub solver_iterations: u32,
    pub objective: f64,
}

impl SynthesisResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn solve_synthesis(
    d: &DescriptorSystem,
    problem: &SynthesisProblem,
    config: &SynthesisConfig,
    solver: &dyn SdpSolver,
) -> Result<SynthesisResult> {
    let sol = solver.solve(&problem.sdp)?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::AlmostOptimal => {}
        SolveStatus::Infeasible => {
            return Err(Error::Infeasible(format!(
                "solver returned a primal infeasibility certificate ({})",
                sol.detail
            )))
        }
        SolveStatus::Unbounded | SolveStatus::Failed => {
            return Err(Error::NumericalFailure(format!("solver stopped with {}", sol.detail)))
        }
    }
    let x = &sol.x;
    let p = linalg::symmetrize(&problem.p.value(x));
    let cond = linalg::condition_number(&p);
    if !cond.is_finite() || cond > MAX_P_CONDITION || linalg::min_eigenvalue(&p) <= 0.0 {
        return Err(Error::PNotInvertible { cond });
    }
    let y1 = problem.y1.value(x);
    let l1 = p.clone().cholesky().ok_or(Error::PNotInvertible { cond })?.solve(&y1);
    let (m, zeta) = match &problem.multiplier {
        MultiplierVars::Scale(z) => {
            let zv = z.scalar_value(x);
            (config.multiplier.instantiate(zv).expect("pattern multiplier"), Some(zv))
        }
        MultiplierVars::Pinned(v) => (config.multiplier.instantiate(*v).expect("pattern multiplier"), Some(*v)),
        MultiplierVars::Blocks { m11, m12, m22 } => (
            BlockConstraintSet::assemble(
                &linalg::symmetrize(&m11.value(x)),
                &m12.value(x),
                &linalg::symmetrize(&m22.value(x)),
            ),
            None,
        ),
    };
    let rho = (config.rho_x * config.rho_safety).max(config.rho.unwrap_or(0.0));
    let gains = ObserverGains {
        p,
        l1,
        l2: config.l2.clone(),
        f: problem.f.value(x),
        rho,
        eta: config.eta,
        mu: problem.mu.scalar_value(x),
        alpha: config.alpha,
        m,
        zeta,
    };
    let verification = verify_gains(d, &gains, config.rho_x);
    if !verification.passes(config.solver_tolerance) {
        return Err(Error::NumericalFailure(format!(
            "solution fails verification: {verification:?}"
        )));
    }
    if let MultiplierSpec::Blocks(set) = &config.multiplier {
        let (n_q, n_f) = (set.n_q, set.n_f);
        let viol = set.violation(
            &gains.m.view((0, 0), (n_q, n_q)).into_owned(),
            &gains.m.view((0, n_q), (n_q, n_f)).into_owned(),
            &gains.m.view((n_q, n_q), (n_f, n_f)).into_owned(),
        );
        if viol > config.solver_tolerance * 1.0_f64.max(linalg::max_abs(&gains.m)) {
            return Err(Error::NumericalFailure(format!(
                "multiplier block constraints violated by {viol:e}"
            )));
        }
    }
    let lambda1 = compute_lambda1(&gains.p, &d.t1, &d.plant.m.g)?;
    let (bound, doubled) = if config.rho_x > 0.0 {
        (
            ultimate_bound(gains.mu, gains.eta, config.rho_x, gains.alpha)?,
            ultimate_bound(gains.mu, gains.eta, 2.0 * config.rho_x, gains.alpha)?,
        )
    } else {
        (0.0, 0.0)
    };
    Ok(SynthesisResult {
        gains,
        verification,
        lambda1,
        ultimate_bound: bound,
        ultimate_bound_doubled: doubled,
        solver_status: sol.detail,
        solver_iterations: sol.iterations,
        objective: sol.objective,
    })
}

/// Assembles and solves in one call.
pub fn synthesize(d: &DescriptorSystem, config: &SynthesisConfig, solver: &dyn SdpSolver) -> Result<SynthesisResult> {
    let problem = assemble_lmi(d, config)?;
    solve_synthesis(d, &problem, config, solver)
}

/// Solves for each candidate `L2` and keeps the smallest `mu`. Infeasible
/// candidates are skipped; returns the winning index.
pub fn search_l2(
    d: &DescriptorSystem,
    config: &SynthesisConfig,
    candidates: &[Mat],
    solver: &dyn SdpSolver,
) -> Result<(usize, SynthesisResult)> {
    let mut best: Option<(usize, SynthesisResult)> = None;
    let mut last_err = None;
    for (i, l2) in candidates.iter().enumerate() {
        let mut c = config.clone();
        c.l2 = l2.clone();
        match synthesize(d, &c, solver) {
            Ok(r) => {
                if best.as_ref().is_none_or(|(_, b)| r.gains.mu < b.gains.mu) {
                    best = Some((i, r));
                }
            }
            Err(e @ (Error::Infeasible(_) | Error::NumericalFailure(_) | Error::PNotInvertible { .. })) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::ConfigInvalid("no L2 candidates".into())))
}

/// `sqrt(mu eta rho_x / alpha)`.
pub fn ultimate_bound(mu: f64, eta: f64, rho_x: f64, alpha: f64) -> Result<f64> {
    for (name, v) in [("mu", mu), ("eta", eta), ("rho_x", rho_x), ("alpha", alpha)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveArgument(name));
        }
    }
    Ok((mu * eta * rho_x / alpha).sqrt())
}

/// `lambda_min(G^T T1^T P T1 G)`.
pub fn compute_lambda1(p: &Mat, t1: &Mat, g: &Mat) -> Result<f64> {
    let t1g = t1 * g;
    if !linalg::has_full_column_rank(&t1g) {
        return Err(Error::RankDeficientT1G);
    }
    let l = linalg::min_eigenvalue(&linalg::symmetrize(&(t1g.transpose() * p * &t1g)));
    if l <= 0.0 {
        return Err(Error::RankDeficientT1G);
    }
    Ok(l)
}

/// Sliding gain large enough for the reaching condition, from the
/// triangle-inequality bound with error envelope `e_sup` and modulus `gamma_f`.
/// Never below `rho_x`.
pub fn select_rho(
    gains: &ObserverGains,
    d: &DescriptorSystem,
    e_sup: f64,
    gamma_f: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let rho_x = d.plant.rho_x;
    let lambda1 = compute_lambda1(&gains.p, &d.t1, &d.plant.m.g)?;
    let s = &gains.f * &d.c_bar;
    let q = d.q_matrix(&gains.l1);
    let arg = linalg::op_norm(&(d.cq_e() - &gains.l2 * &d.c_bar)) * e_sup;
    let gamma = gamma_f(arg);
    if !gamma.is_finite() {
        return Err(Error::NonFiniteModulus);
    }
    let total = linalg::op_norm(&(&s * q)) * e_sup
        + linalg::op_norm(&(&s * &d.t1 * &d.plant.m.g)) * rho_x
        + linalg::op_norm(&(&s * &d.t1 * &d.plant.m.b_f)) * gamma;
    Ok((total / lambda1).max(rho_x))
}

/// Tabulated under-approximation of the modulus of continuity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusTable {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl ModulusTable {
    /// Value at the smallest tabulated radius `>= r` (the last value beyond the grid).
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let i = self.radii.partition_point(|&x| x < r);
        self.values[i.min(self.values.len() - 1)]
    }
}

/// Samples `||f(q1) - f(q2)||` at separations up to each radius. `q1` is
/// drawn from `[-domain, domain]^n_q`; values are made non-decreasing.
pub fn estimate_modulus(
    f: &dyn Fn(&Vector) -> Vector,
    n_q: usize,
    radii: &[f64],
    domain: f64,
    samples_per_radius: usize,
    seed: u64,
) -> ModulusTable {
    let mut radii: Vec<f64> = radii.iter().copied().filter(|r| *r >= 0.0).collect();
    radii.sort_by(f64::total_cmp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(radii.len());
    let mut running = 0.0_f64;
    for &r in &radii {
        for _ in 0..samples_per_radius {
            let q1 = Vector::from_fn(n_q, |_, _| rng.gen_range(-domain..=domain));
            let mut dir = Vector::from_fn(n_q, |_, _| rng.gen_range(-1.0..=1.0));
            let nrm = dir.norm();
            if nrm == 0.0 {
                continue;
            }
            dir /= nrm;
            // half the samples at the full separation, where the sup usually sits
            let dist = if rng.gen_bool(0.5) { r } else { r * rng.gen::<f64>() };
            let q2 = &q1 + dir * dist;
            running = running.max((f(&q1) - f(&q2)).norm());
        }
        values.push(if r == 0.0 { 0.0 } else { running });
    }
    ModulusTable { radii, values }
}
