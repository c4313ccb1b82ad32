//! Solver-facing normal form for small semidefinite programs.
//!
//! Decision variables are stacked into one vector `x`. Every constraint is an
//! affine matrix expression `F(x) = F0 + sum_i x_i F_i` restricted to a cone:
//! positive semidefinite, zero, nonnegative (entrywise) or second-order.

mod clarabel;

use std::collections::BTreeMap;
use std::fmt::Write as _;

pub use self::clarabel::ClarabelSolver;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::multipliers::MatrixExpr;

/// `constant + sum_k x_k * terms[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    constant: Mat,
    terms: BTreeMap<usize, Mat>,
}

impl AffineMatrix {
    pub fn constant(m: Mat) -> Self {
        Self {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    pub fn zeros(r: usize, c: usize) -> Self {
        Self::constant(Mat::zeros(r, c))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn constant_part(&self) -> &Mat {
        &self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &Mat)> {
        self.terms.iter().map(|(k, m)| (*k, m))
    }

    fn add_term(&mut self, var: usize, m: Mat) {
        match self.terms.get_mut(&var) {
            Some(t) => *t += m,
            None => {
                self.terms.insert(var, m);
            }
        }
    }

    fn map(&self, f: impl Fn(&Mat) -> Mat) -> Self {
        Self {
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(k, m)| (*k, f(m))).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|m| m * c)
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        MatrixExpr::add(self, &other.neg())
    }

    pub fn add_constant(&self, m: &Mat) -> Self {
        let mut out = self.clone();
        out.constant += m;
        out
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrize(&self) -> Self {
        self.map(linalg::symmetrize)
    }

    /// A 1x1 expression times a constant matrix.
    pub fn scalar_times(&self, m: &Mat) -> Self {
        assert_eq!(self.shape(), (1, 1), "scalar_times needs a 1x1 expression");
        self.map(|s| m * s[(0, 0)])
    }

    /// Assembles a block matrix; every row of blocks must be conformal.
    pub fn blocks(rows: &[Vec<AffineMatrix>]) -> Self {
        let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
        let widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
        let (h, w) = (heights.iter().sum(), widths.iter().sum());
        let mut out = Self::zeros(h, w);
        let mut r0 = 0;
        for (bi, row) in rows.iter().enumerate() {
            let mut c0 = 0;
            for (bj, b) in row.iter().enumerate() {
                assert_eq!(b.shape(), (heights[bi], widths[bj]), "non-conformal block ({bi},{bj})");
                out.constant.view_mut((r0, c0), b.shape()).copy_from(&b.constant);
                for (k, m) in &b.terms {
                    let mut full = Mat::zeros(h, w);
                    full.view_mut((r0, c0), b.shape()).copy_from(m);
                    out.add_term(*k, full);
                }
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut out = self.constant.clone();
        for (k, m) in &self.terms {
            out += m * x[*k];
        }
        out
    }

    /// Largest asymmetry over the constant and all coefficients.
    pub fn asymmetry(&self) -> f64 {
        std::iter::once(&self.constant)
            .chain(self.terms.values())
            .map(linalg::asymmetry)
            .fold(0.0, f64::max)
    }
}

impl MatrixExpr for AffineMatrix {
    fn lmul(a: &Mat, e: &Self) -> Self {
        e.map(|m| a * m)
    }
    fn rmul(e: &Self, a: &Mat) -> Self {
        e.map(|m| m * a)
    }
    fn transpose(&self) -> Self {
        self.map(|m| m.transpose())
    }
    fn add(&self, other: &Self) -> Self {
        assert_eq!(
            self.shape(),
            other.shape(),
            "adding affine matrices of different shapes"
        );
        let mut out = self.clone();
        out.constant += &other.constant;
        for (k, m) in &other.terms {
            out.add_term(*k, m.clone());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarShape {
    Scalar,
    Symmetric(usize),
    Full(usize, usize),
}

/// A named block of decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub shape: VarShape,
    pub offset: usize,
}

impl Variable {
    pub fn len(&self) -> usize {
        match self.shape {
            VarShape::Scalar => 1,
            VarShape::Symmetric(n) => n * (n + 1) / 2,
            VarShape::Full(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dims(&self) -> (usize, usize) {
        match self.shape {
            VarShape::Scalar => (1, 1),
            VarShape::Symmetric(n) => (n, n),
            VarShape::Full(r, c) => (r, c),
        }
    }

    pub fn expr(&self) -> AffineMatrix {
        let (r, c) = self.dims();
        let mut e = AffineMatrix::zeros(r, c);
        let mut k = self.offset;
        match self.shape {
            VarShape::Symmetric(n) => {
                for j in 0..n {
                    for i in 0..=j {
                        let mut m = Mat::zeros(n, n);
                        m[(i, j)] = 1.0;
                        m[(j, i)] = 1.0;
                        e.add_term(k, m);
                        k += 1;
                    }
                }
            }
            _ => {
                for j in 0..c {
                    for i in 0..r {
                        let mut m = Mat::zeros(r, c);
                        m[(i, j)] = 1.0;
                        e.add_term(k, m);
                        k += 1;
                    }
                }
            }
        }
        e
    }

    pub fn value(&self, x: &[f64]) -> Mat {
        self.expr().eval(x)
    }

    pub fn scalar_value(&self, x: &[f64]) -> f64 {
        x[self.offset]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// Symmetric expression, `F(x) >= 0` in the semidefinite order.
    Psd,
    /// Every entry zero.
    Zero,
    /// Every entry nonnegative.
    Nonnegative,
    /// Column `[t; v]` with `t >= ||v||`.
    SecondOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub cone: Cone,
    pub expr: AffineMatrix,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Minimized linear objective `c^T x`; all zeros for a feasibility problem.
    pub objective: Vec<f64>,
    n_vars: usize,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn add_variable(&mut self, name: &str, shape: VarShape) -> Variable {
        let v = Variable {
            name: name.to_string(),
            shape,
            offset: self.n_vars,
        };
        self.n_vars += v.len();
        self.objective.resize(self.n_vars, 0.0);
        self.variables.push(v.clone());
        v
    }

    pub fn scalar(&mut self, name: &str) -> Variable {
        self.add_variable(name, VarShape::Scalar)
    }

    pub fn symmetric(&mut self, name: &str, n: usize) -> Variable {
        self.add_variable(name, VarShape::Symmetric(n))
    }

    pub fn matrix(&mut self, name: &str, r: usize, c: usize) -> Variable {
        self.add_variable(name, VarShape::Full(r, c))
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    fn push(&mut self, name: &str, cone: Cone, expr: AffineMatrix) -> Result<()> {
        if cone == Cone::Psd && (!expr.constant.is_square() || expr.asymmetry() > 1e-12) {
            return Err(Error::DimensionMismatch(format!(
                "semidefinite constraint '{name}' is not symmetric"
            )));
        }
        if cone == Cone::SecondOrder && (expr.ncols() != 1 || expr.nrows() < 1) {
            return Err(Error::DimensionMismatch(format!(
                "second-order constraint '{name}' must be a column"
            )));
        }
        self.constraints.push(Constraint {
            name: name.to_string(),
            cone,
            expr,
        });
        Ok(())
    }

    /// `expr >= 0`; the expression is symmetrized first.
    pub fn psd(&mut self, name: &str, expr: AffineMatrix) -> Result<()> {
        if !expr.constant.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "semidefinite constraint '{name}' is not square"
            )));
        }
        self.push(name, Cone::Psd, expr.symmetrize())
    }

    /// `expr <= 0`.
    pub fn nsd(&mut self, name: &str, expr: AffineMatrix) -> Result<()> {
        self.psd(name, expr.neg())
    }

    pub fn equal_zero(&mut self, name: &str, expr: AffineMatrix) -> Result<()> {
        self.push(name, Cone::Zero, expr)
    }

    pub fn nonnegative(&mut self, name: &str, expr: AffineMatrix) -> Result<()> {
        self.push(name, Cone::Nonnegative, expr)
    }

    pub fn second_order(&mut self, name: &str, expr: AffineMatrix) -> Result<()> {
        self.push(name, Cone::SecondOrder, expr)
    }

    /// Adds `weight * v` to the objective for a scalar variable.
    pub fn minimize_scalar(&mut self, v: &Variable, weight: f64) {
        self.objective[v.offset] += weight;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Worst cone violation of each constraint at `x`.
    pub fn violations(&self, x: &[f64]) -> Vec<(String, f64)> {
        self.constraints
            .iter()
            .map(|c| {
                let v = c.expr.eval(x);
                let viol = match c.cone {
                    Cone::Psd => (-linalg::min_eigenvalue(&v)).max(0.0),
                    Cone::Zero => linalg::max_abs(&v),
                    Cone::Nonnegative => v.iter().fold(0.0_f64, |a, e| a.max(-e)),
                    Cone::SecondOrder => {
                        let tail = v.rows(1, v.nrows() - 1).norm();
                        (tail - v[(0, 0)]).max(0.0)
                    }
                };
                (c.name.clone(), viol)
            })
            .collect()
    }

    /// SDPA sparse format. Zero and nonnegative constraints become diagonal
    /// blocks (equalities as a two-sided pair), second-order constraints
    /// their arrow-matrix LMI.
    pub fn to_sdpa(&self) -> String {
        // SDPA primal: sum_i x_i F_i - F_0 >= 0
        // (signed block size, entries (matrix, row, col, value))
        type Entry = (usize, usize, usize, f64);
        let mut blocks: Vec<(i64, Vec<Entry>)> = Vec::new();
        for c in &self.constraints {
            let mut entries = Vec::new();
            let mut emit = |mat: usize, i: usize, j: usize, v: f64| {
                if v != 0.0 {
                    entries.push((mat, i, j, v));
                }
            };
            let coeffs = |k: usize| -> Mat {
                if k == 0 {
                    -c.expr.constant.clone()
                } else {
                    c.expr.terms.get(&(k - 1)).cloned().unwrap_or_else(|| Mat::zeros(0, 0))
                }
            };
            let mats: Vec<usize> = std::iter::once(0).chain(c.expr.terms.keys().map(|k| k + 1)).collect();
            let size: i64 = match c.cone {
                Cone::Psd => {
                    for &k in &mats {
                        let m = coeffs(k);
                        for j in 0..m.ncols() {
                            for i in 0..=j {
                                emit(k, i + 1, j + 1, m[(i, j)]);
                            }
                        }
                    }
                    c.expr.nrows() as i64
                }
                Cone::Nonnegative | Cone::Zero => {
                    let two_sided = c.cone == Cone::Zero;
                    let n = c.expr.nrows() * c.expr.ncols();
                    for &k in &mats {
                        let m = coeffs(k);
                        for (idx, v) in m.iter().enumerate() {
                            emit(k, idx + 1, idx + 1, *v);
                            if two_sided {
                                emit(k, n + idx + 1, n + idx + 1, -*v);
                            }
                        }
                    }
                    -((if two_sided { 2 } else { 1 } * n) as i64)
                }
                Cone::SecondOrder => {
                    let n = c.expr.nrows();
                    for &k in &mats {
                        let m = coeffs(k);
                        for i in 0..n {
                            emit(k, i + 1, i + 1, m[(0, 0)]);
                        }
                        for i in 1..n {
                            emit(k, 1, i + 1, m[(i, 0)]);
                        }
                    }
                    n as i64
                }
            };
            blocks.push((size, entries));
        }
        let mut s = String::new();
        let _ = writeln!(s, "\"{} constraints\"", self.constraints.len());
        let _ = writeln!(s, "{}", self.n_vars);
        let _ = writeln!(s, "{}", blocks.len());
        let sizes: Vec<String> = blocks.iter().map(|(n, _)| n.to_string()).collect();
        let _ = writeln!(s, "{}", sizes.join(" "));
        // SDPA maximizes b^T y in the dual; the primal objective is c^T x
        let c: Vec<String> = self.objective.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", c.join(" "));
        for (b, (_, entries)) in blocks.iter().enumerate() {
            for (k, i, j, v) in entries {
                let _ = writeln!(s, "{k} {} {i} {j} {v:e}", b + 1);
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Converged to reduced accuracy.
    AlmostOptimal,
    Infeasible,
    Unbounded,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub detail: String,
}

/// A backend that solves the normal form.
pub trait SdpSolver {
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution>;
}
