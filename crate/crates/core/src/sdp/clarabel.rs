//! Adapter for the Clarabel interior-point solver.
//!
//! Clarabel solves `min c^T x` subject to `A x + s = b`, `s` in a product of
//! cones. With `s = F(x) = F0 + sum x_i F_i` this gives `b = vec(F0)` and
//! column `i` of `A` equal to `-vec(F_i)`, for every cone kind.

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SecondOrderConeT, SolverStatus,
    SupportedConeT, ZeroConeT,
};

use super::{Cone, SdpProblem, SdpSolution, SdpSolver, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClarabelSolver {
    pub max_iter: u32,
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub verbose: bool,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            verbose: false,
        }
    }
}

/// Packs the entries the cone reads, in the cone's order.
fn pack(cone: Cone, m: &Mat) -> Vec<f64> {
    match cone {
        // upper triangle, column-major, off-diagonals scaled by sqrt(2)
        Cone::Psd => {
            let n = m.nrows();
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for j in 0..n {
                for i in 0..=j {
                    let v = if i == j {
                        m[(i, j)]
                    } else {
                        m[(i, j)] * std::f64::consts::SQRT_2
                    };
                    out.push(v);
                }
            }
            out
        }
        _ => m.iter().copied().collect(),
    }
}

impl SdpSolver for ClarabelSolver {
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution> {
        let n = problem.n_vars();
        let mut b = Vec::new();
        let mut cols: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        for c in &problem.constraints {
            let row0 = b.len();
            let constant = pack(c.cone, c.expr.constant_part());
            let len = constant.len();
            b.extend(constant);
            for (k, coef) in c.expr.terms() {
                for (r, v) in pack(c.cone, coef).into_iter().enumerate() {
                    if v != 0.0 {
                        *cols[k].entry(row0 + r).or_insert(0.0) -= v;
                    }
                }
            }
            cones.push(match c.cone {
                Cone::Psd => PSDTriangleConeT(c.expr.nrows()),
                Cone::Zero => ZeroConeT(len),
                Cone::Nonnegative => NonnegativeConeT(len),
                Cone::SecondOrder => SecondOrderConeT(len),
            });
        }
        let m = b.len();
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for col in &cols {
            for (r, v) in col {
                rowval.push(*r);
                nzval.push(*v);
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let p = CscMatrix::zeros((n, n));
        let settings = DefaultSettings {
            verbose: self.verbose,
            max_iter: self.max_iter,
            tol_gap_abs: self.tol_gap,
            tol_gap_rel: self.tol_gap,
            tol_feas: self.tol_feas,
            ..Default::default()
        };
        let mut solver = DefaultSolver::new(&p, &problem.objective, &a, &b, &cones, settings)
            .map_err(|e| Error::NumericalFailure(format!("solver setup: {e}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::AlmostOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::Failed,
        };
        Ok(SdpSolution {
            status,
            x: sol.x.clone(),
            objective: sol.obj_val,
            iterations: sol.iterations,
            detail: format!("{:?}", sol.status),
        })
    }
}
