//! Incremental multiplier matrices.
//!
//! A symmetric `M` of size `(n_q + n_f)` certifies a nonlinearity when
//! `[dq; df]^T M [dq; df] >= 0` for all pairs of arguments. Scalar-pattern
//! classes produce `M = kappa * pattern` with `kappa > 0` left free for the
//! synthesis problem; the polytope and cone classes produce matrix
//! inequalities on the blocks `M11`, `M12`, `M22` instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Lower bound on a free multiplier scale.
pub const MIN_SCALE: f64 = 1e-6;
/// Symmetry is asserted to this tolerance after construction.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    Lipschitz,
    QuasiLipschitz,
    Sector,
    PositivelyReal,
    PolytopeDerivative,
    ConeDerivative,
    Fixed,
}

/// How the positive scale of a pattern multiplier is decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Decision variable with `kappa >= MIN_SCALE`.
    Free,
    Pinned(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierSpec {
    Pattern {
        kind: MultiplierKind,
        n_q: usize,
        n_f: usize,
        pattern: Mat,
        scale: Scale,
    },
    Blocks(BlockConstraintSet),
}

impl MultiplierSpec {
    pub fn kind(&self) -> MultiplierKind {
        match self {
            Self::Pattern { kind, .. } => *kind,
            Self::Blocks(set) => set.kind,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::Pattern { n_q, n_f, .. } => (*n_q, *n_f),
            Self::Blocks(set) => (set.n_q, set.n_f),
        }
    }

    pub fn with_scale(mut self, s: Scale) -> Self {
        if let Self::Pattern { scale, .. } = &mut self {
            *scale = s;
        }
        self
    }

    /// `kappa * pattern`; `None` for block-constrained classes.
    pub fn instantiate(&self, kappa: f64) -> Option<Mat> {
        match self {
            Self::Pattern { pattern, .. } => Some(pattern * kappa),
            Self::Blocks(_) => None,
        }
    }
}

fn pattern(kind: MultiplierKind, m: Mat, n_q: usize) -> Result<MultiplierSpec> {
    if linalg::asymmetry(&m) > SYMMETRY_TOL * (1.0 + linalg::max_abs(&m)) {
        return Err(Error::AsymmetricM);
    }
    let n_f = m.nrows() - n_q;
    Ok(MultiplierSpec::Pattern {
        kind,
        n_q,
        n_f,
        pattern: linalg::symmetrize(&m),
        scale: Scale::Free,
    })
}

/// `kappa * [[L_f^2 I, 0], [0, -I]]`.
pub fn imm_lipschitz(l_f: f64, n_q: usize, n_f: usize) -> Result<MultiplierSpec> {
    if !(l_f > 0.0) {
        return Err(Error::NonPositiveConstant(l_f));
    }
    let mut m = Mat::zeros(n_q + n_f, n_q + n_f);
    for i in 0..n_q {
        m[(i, i)] = l_f * l_f;
    }
    for i in n_q..n_q + n_f {
        m[(i, i)] = -1.0;
    }
    pattern(MultiplierKind::Lipschitz, m, n_q)
}

/// `kappa * [[2 L_f R, -Q], [-Q^T, 0]]` for `dq^T Q df <= L_f dq^T R dq`.
pub fn imm_quasi_lipschitz(l_f: f64, q: &Mat, r: &Mat) -> Result<MultiplierSpec> {
    let n_q = q.nrows();
    let n_f = q.ncols();
    if r.shape() != (n_q, n_q) {
        return Err(Error::DimensionMismatch(format!(
            "R must be {n_q}x{n_q}, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    if linalg::asymmetry(r) > SYMMETRY_TOL * (1.0 + linalg::max_abs(r)) {
        return Err(Error::AsymmetricR);
    }
    let m = linalg::block2x2(&(r * (2.0 * l_f)), &(-q), &(-q.transpose()), &Mat::zeros(n_f, n_f));
    pattern(MultiplierKind::QuasiLipschitz, m, n_q)
}

/// Incrementally sector bounded:
/// `(M11 dq + M12 df)^T X (M21 dq + M22 df) >= 0`.
pub fn imm_sector(m11: &Mat, m12: &Mat, m21: &Mat, m22: &Mat, x: &Mat) -> Result<MultiplierSpec> {
    let n_q = m11.ncols();
    let n_f = m12.ncols();
    let k = x.nrows();
    let ok = m11.nrows() == k
        && m12.nrows() == k
        && x.ncols() == m21.nrows()
        && m21.nrows() == m22.nrows()
        && m21.ncols() == n_q
        && m22.ncols() == n_f;
    if !ok {
        return Err(Error::DimensionMismatch(
            "sector blocks M11, M12, M21, M22 and X are not conformal".into(),
        ));
    }
    let xt = x.transpose();
    let ma = m11.transpose() * x * m21 + m21.transpose() * x * m11;
    let mb = m11.transpose() * x * m22 + m21.transpose() * &xt * m12;
    let mc = m12.transpose() * x * m22 + m22.transpose() * &xt * m12;
    let m = linalg::block2x2(&ma, &mb, &mb.transpose(), &mc);
    // a non-symmetric X leaves Ma, Mc asymmetric; keep the symmetric part
    let m = linalg::symmetrize(&m);
    pattern(MultiplierKind::Sector, m, n_q)
}

/// `kappa * [[0, X^T], [X, 0]]` for `df^T X dq >= 0`; `X` is `n_f x n_q`.
pub fn imm_positively_real(x: &Mat, kappa: f64) -> Result<MultiplierSpec> {
    if !(kappa > 0.0) {
        return Err(Error::NonPositiveConstant(kappa));
    }
    let n_f = x.nrows();
    let n_q = x.ncols();
    let m = linalg::block2x2(&Mat::zeros(n_q, n_q), &x.transpose(), x, &Mat::zeros(n_f, n_f));
    Ok(pattern(MultiplierKind::PositivelyReal, m, n_q)?
        .with_scale(Scale::Free)
        .scaled_by(kappa))
}

/// A user-supplied multiplier, used as-is.
pub fn imm_fixed(m: &Mat, n_q: usize) -> Result<MultiplierSpec> {
    if !m.is_square() || m.nrows() <= n_q {
        return Err(Error::DimensionMismatch(
            "fixed multiplier must be square and larger than n_q".into(),
        ));
    }
    Ok(pattern(MultiplierKind::Fixed, m.clone(), n_q)?.with_scale(Scale::Pinned(1.0)))
}

impl MultiplierSpec {
    fn scaled_by(self, c: f64) -> Self {
        match self {
            Self::Pattern {
                kind,
                n_q,
                n_f,
                pattern,
                scale,
            } => Self::Pattern {
                kind,
                n_q,
                n_f,
                pattern: pattern * c,
                scale,
            },
            other => other,
        }
    }
}

/// One matrix (in)equality on the multiplier blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockConstraint {
    /// `M22 <= 0`
    M22NegativeSemidefinite,
    /// `M11 + M12 theta + theta^T M12^T + theta^T M22 theta >= 0`
    PolytopeVertex { theta: Mat },
    /// `M22 omega = 0`
    ConeNullspace { omega: Mat },
    /// `M12 omega + omega^T M12^T >= 0`
    ConeVertex { omega: Mat },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSense {
    PositiveSemidefinite,
    NegativeSemidefinite,
    Zero,
}

/// Minimal algebra shared by concrete matrices and affine SDP expressions,
/// so the block constraints are written once.
pub trait MatrixExpr: Sized {
    fn lmul(a: &Mat, e: &Self) -> Self;
    fn rmul(e: &Self, a: &Mat) -> Self;
    fn transpose(&self) -> Self;
    fn add(&self, other: &Self) -> Self;
}

impl MatrixExpr for Mat {
    fn lmul(a: &Mat, e: &Self) -> Self {
        a * e
    }
    fn rmul(e: &Self, a: &Mat) -> Self {
        e * a
    }
    fn transpose(&self) -> Self {
        Mat::transpose(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
}

impl BlockConstraint {
    pub fn sense(&self) -> ConstraintSense {
        match self {
            Self::M22NegativeSemidefinite => ConstraintSense::NegativeSemidefinite,
            Self::PolytopeVertex { .. } | Self::ConeVertex { .. } => ConstraintSense::PositiveSemidefinite,
            Self::ConeNullspace { .. } => ConstraintSense::Zero,
        }
    }

    /// The constrained matrix expressed in the blocks.
    pub fn expr<E: MatrixExpr + Clone>(&self, m11: &E, m12: &E, m22: &E) -> E {
        match self {
            Self::M22NegativeSemidefinite => m22.clone(),
            Self::PolytopeVertex { theta } => {
                let m12t = E::rmul(m12, theta);
                let quad = E::lmul(&theta.transpose(), &E::rmul(m22, theta));
                m11.add(&m12t).add(&m12t.transpose()).add(&quad)
            }
            Self::ConeNullspace { omega } => E::rmul(m22, omega),
            Self::ConeVertex { omega } => {
                let m12w = E::rmul(m12, omega);
                m12w.add(&m12w.transpose())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockConstraintSet {
    pub kind: MultiplierKind,
    pub n_q: usize,
    pub n_f: usize,
    pub constraints: Vec<BlockConstraint>,
}

impl BlockConstraintSet {
    pub fn count(&self, sense: ConstraintSense) -> usize {
        self.constraints.iter().filter(|c| c.sense() == sense).count()
    }

    /// Worst violation of the set by concrete blocks (0 when satisfied).
    pub fn violation(&self, m11: &Mat, m12: &Mat, m22: &Mat) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let e = c.expr(m11, m12, m22);
                match c.sense() {
                    ConstraintSense::PositiveSemidefinite => (-linalg::min_eigenvalue(&e)).max(0.0),
                    ConstraintSense::NegativeSemidefinite => linalg::max_eigenvalue(&e).max(0.0),
                    ConstraintSense::Zero => linalg::max_abs(&e),
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn assemble(m11: &Mat, m12: &Mat, m22: &Mat) -> Mat {
        linalg::block2x2(m11, m12, &m12.transpose(), m22)
    }
}

fn vertex_dims(vertices: &[Mat]) -> Result<(usize, usize)> {
    let first = vertices.first().ok_or(Error::EmptyVertexList)?;
    let (n_f, n_q) = first.shape();
    if vertices.iter().any(|v| v.shape() != (n_f, n_q)) {
        return Err(Error::DimensionMismatch("vertex matrices differ in shape".into()));
    }
    Ok((n_q, n_f))
}

/// Derivative in the polytope spanned by `theta_k` (each `n_f x n_q`).
pub fn imm_polytope_constraints(vertices: &[Mat]) -> Result<BlockConstraintSet> {
    let (n_q, n_f) = vertex_dims(vertices)?;
    let mut constraints = vec![BlockConstraint::M22NegativeSemidefinite];
    constraints.extend(
        vertices
            .iter()
            .map(|t| BlockConstraint::PolytopeVertex { theta: t.clone() }),
    );
    Ok(BlockConstraintSet {
        kind: MultiplierKind::PolytopeDerivative,
        n_q,
        n_f,
        constraints,
    })
}

/// Derivative in the cone spanned by `omega_k` (each `n_f x n_q`).
pub fn imm_cone_constraints(vertices: &[Mat]) -> Result<BlockConstraintSet> {
    let (n_q, n_f) = vertex_dims(vertices)?;
    let mut constraints = Vec::with_capacity(2 * vertices.len());
    for w in vertices {
        constraints.push(BlockConstraint::ConeNullspace { omega: w.clone() });
    }
    for w in vertices {
        constraints.push(BlockConstraint::ConeVertex { omega: w.clone() });
    }
    Ok(BlockConstraintSet {
        kind: MultiplierKind::ConeDerivative,
        n_q,
        n_f,
        constraints,
    })
}

/// Scenario-file description of a multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MultiplierConfig {
    Lipschitz {
        #[serde(rename = "L_f")]
        l_f: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zeta: Option<f64>,
    },
    QuasiLipschitz {
        #[serde(rename = "L_f")]
        l_f: f64,
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        #[serde(rename = "R")]
        r: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zeta: Option<f64>,
    },
    Sector {
        #[serde(rename = "M11")]
        m11: Vec<Vec<f64>>,
        #[serde(rename = "M12")]
        m12: Vec<Vec<f64>>,
        #[serde(rename = "M21")]
        m21: Vec<Vec<f64>>,
        #[serde(rename = "M22")]
        m22: Vec<Vec<f64>>,
        #[serde(rename = "X")]
        x: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zeta: Option<f64>,
    },
    PositivelyReal {
        #[serde(rename = "X")]
        x: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zeta: Option<f64>,
    },
    Polytope {
        vertices: Vec<Vec<Vec<f64>>>,
    },
    Cone {
        vertices: Vec<Vec<Vec<f64>>>,
    },
    Fixed {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
    },
}

fn mat(name: &str, rows: &[Vec<f64>]) -> Result<Mat> {
    linalg::from_rows(rows).ok_or_else(|| Error::ConfigInvalid(format!("{name}: ragged matrix")))
}

fn with_zeta(spec: MultiplierSpec, zeta: Option<f64>) -> Result<MultiplierSpec> {
    match zeta {
        None => Ok(spec),
        Some(z) if z > 0.0 => Ok(spec.with_scale(Scale::Pinned(z))),
        Some(z) => Err(Error::NonPositiveConstant(z)),
    }
}

impl MultiplierConfig {
    /// Builds the spec for a nonlinearity with argument size `n_q` and output size `n_f`.
    pub fn build(&self, n_q: usize, n_f: usize) -> Result<MultiplierSpec> {
        let spec = match self {
            Self::Lipschitz { l_f, zeta } => with_zeta(imm_lipschitz(*l_f, n_q, n_f)?, *zeta)?,
            Self::QuasiLipschitz { l_f, q, r, zeta } => {
                with_zeta(imm_quasi_lipschitz(*l_f, &mat("Q", q)?, &mat("R", r)?)?, *zeta)?
            }
            Self::Sector {
                m11,
                m12,
                m21,
                m22,
                x,
                zeta,
            } => with_zeta(
                imm_sector(
                    &mat("M11", m11)?,
                    &mat("M12", m12)?,
                    &mat("M21", m21)?,
                    &mat("M22", m22)?,
                    &mat("X", x)?,
                )?,
                *zeta,
            )?,
            Self::PositivelyReal { x, zeta } => with_zeta(imm_positively_real(&mat("X", x)?, 1.0)?, *zeta)?,
            Self::Polytope { vertices } => MultiplierSpec::Blocks(imm_polytope_constraints(
                &vertices.iter().map(|v| mat("vertex", v)).collect::<Result<Vec<_>>>()?,
            )?),
            Self::Cone { vertices } => MultiplierSpec::Blocks(imm_cone_constraints(
                &vertices.iter().map(|v| mat("vertex", v)).collect::<Result<Vec<_>>>()?,
            )?),
            Self::Fixed { m } => imm_fixed(&mat("M", m)?, n_q)?,
        };
        let got = spec.dims();
        if got != (n_q, n_f) {
            return Err(Error::MultiplierDimensionMismatch {
                expected: n_q + n_f,
                got: got.0 + got.1,
            });
        }
        Ok(spec)
    }
}

/// Outcome of sampling the incremental quadratic constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IqcReport {
    pub samples: usize,
    pub min_form_value: f64,
    /// First sampled pair `(q1, q2, value)` with value below `-VIOLATION_TOL`.
    pub violating_pair: Option<(Vec<f64>, Vec<f64>, f64)>,
}

impl IqcReport {
    pub fn passed(&self) -> bool {
        self.violating_pair.is_none()
    }
}

pub const VIOLATION_TOL: f64 = 1e-9;

/// Uniform sampling of argument pairs on the hypercube `[-radius, radius]^n_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IqcSampler {
    pub radius: f64,
    pub seed: u64,
}

impl Default for IqcSampler {
    fn default() -> Self {
        Self {
            radius: 10.0,
            seed: 0x5eed,
        }
    }
}

/// Evaluates `[dq; df]^T M [dq; df]` over sampled pairs. A clean report is
/// necessary but not sufficient evidence that `M` is a multiplier for `f`.
pub fn check_iqc(
    m: &Mat,
    f: impl Fn(&Vector) -> Vector,
    n_q: usize,
    sampler: IqcSampler,
    n_samples: usize,
) -> Result<IqcReport> {
    if !m.is_square() || m.nrows() <= n_q {
        return Err(Error::DimensionMismatch(format!(
            "M is {}x{}, expected square with more than n_q = {n_q} rows",
            m.nrows(),
            m.ncols()
        )));
    }
    if linalg::asymmetry(m) > SYMMETRY_TOL * (1.0 + linalg::max_abs(m)) {
        return Err(Error::AsymmetricM);
    }
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut min_value = f64::INFINITY;
    let mut violating = None;
    let mut xi = Vector::zeros(n);
    for _ in 0..n_samples {
        let q1 = Vector::from_fn(n_q, |_, _| rng.gen_range(-sampler.radius..=sampler.radius));
        let q2 = Vector::from_fn(n_q, |_, _| rng.gen_range(-sampler.radius..=sampler.radius));
        let df = f(&q1) - f(&q2);
        if df.len() + n_q != n {
            return Err(Error::DimensionMismatch(format!(
                "f returns {} values, M expects {}",
                df.len(),
                n - n_q
            )));
        }
        xi.rows_mut(0, n_q).copy_from(&(&q1 - &q2));
        xi.rows_mut(n_q, n - n_q).copy_from(&df);
        let value = xi.dot(&(m * &xi));
        if value < min_value {
            min_value = value;
        }
        if value < -VIOLATION_TOL && violating.is_none() {
            violating = Some((q1.as_slice().to_vec(), q2.as_slice().to_vec(), value));
        }
    }
    Ok(IqcReport {
        samples: n_samples,
        min_form_value: min_value,
        violating_pair: violating,
    })
}
