//! Nonlinear plant `x' = A x + B_f f(t,u,y,C_q x) + B_g g(t,u,y) + G w_x`,
//! `y = C x + D w_y`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::nonlinearity::{KnownNonlinearity, KnownNonlinearitySpec, StateNonlinearity, StateNonlinearitySpec};
use crate::signal::VectorSignal;

pub type SignalFn = Arc<dyn Fn(f64) -> Vector + Send + Sync>;

/// A disturbance channel vector: either a named generator or a host closure.
#[derive(Clone)]
pub enum Disturbance {
    Generated(VectorSignal),
    Custom { dim: usize, func: SignalFn },
}

impl Disturbance {
    pub fn zeros(dim: usize) -> Self {
        Self::Generated(VectorSignal::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Generated(s) => s.dim(),
            Self::Custom { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, t: f64) -> Vector {
        match self {
            Self::Generated(s) => s.eval(t),
            Self::Custom { func, .. } => func(t),
        }
    }

    /// Per-channel jump times in `[t0, tf]`; empty for custom closures.
    pub fn jump_times(&self, t0: f64, tf: f64) -> Vec<Vec<f64>> {
        match self {
            Self::Generated(s) => s.channels.iter().map(|c| c.jump_times(t0, tf)).collect(),
            Self::Custom { dim, .. } => vec![Vec::new(); *dim],
        }
    }
}

impl fmt::Debug for Disturbance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Generated(s) => f.debug_tuple("Generated").field(s).finish(),
            Self::Custom { dim, .. } => f.debug_struct("Custom").field("dim", dim).finish(),
        }
    }
}

/// The constant matrices of the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantMatrices {
    pub a: Mat,
    pub b_f: Mat,
    pub b_g: Mat,
    pub g: Mat,
    pub c: Mat,
    pub d: Mat,
    pub c_q: Mat,
}

#[derive(Debug, Clone)]
pub struct PlantModel {
    pub m: PlantMatrices,
    pub f: StateNonlinearity,
    pub g: KnownNonlinearity,
    /// Bound with `||w_x(.)||_inf <= rho_x`.
    pub rho_x: f64,
    pub w_x: Disturbance,
    pub w_y: Disturbance,
}

impl PlantModel {
    /// Validates dimensions and the rank assumptions on `G` and `D`.
    pub fn new(
        m: PlantMatrices,
        f: StateNonlinearity,
        g: KnownNonlinearity,
        rho_x: f64,
        w_x: Disturbance,
        w_y: Disturbance,
    ) -> Result<Self> {
        let plant = Self {
            m,
            f,
            g,
            rho_x,
            w_x,
            w_y,
        };
        plant.validate()?;
        Ok(plant)
    }

    pub fn n_x(&self) -> usize {
        self.m.a.nrows()
    }
    pub fn n_y(&self) -> usize {
        self.m.c.nrows()
    }
    pub fn m_x(&self) -> usize {
        self.m.g.ncols()
    }
    pub fn m_y(&self) -> usize {
        self.m.d.ncols()
    }
    pub fn n_q(&self) -> usize {
        self.m.c_q.nrows()
    }
    pub fn n_f(&self) -> usize {
        self.m.b_f.ncols()
    }
    pub fn n_g(&self) -> usize {
        self.m.b_g.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.m;
        let n_x = m.a.nrows();
        let dim = |cond: bool, msg: String| {
            if cond {
                Ok(())
            } else {
                Err(Error::DimensionMismatch(msg))
            }
        };
        dim(
            m.a.ncols() == n_x,
            format!("A is {}x{}, must be square", n_x, m.a.ncols()),
        )?;
        dim(n_x > 0, "A is empty".into())?;
        dim(
            m.b_f.nrows() == n_x,
            format!("B_f has {} rows, expected {n_x}", m.b_f.nrows()),
        )?;
        dim(
            m.b_g.nrows() == n_x,
            format!("B_g has {} rows, expected {n_x}", m.b_g.nrows()),
        )?;
        dim(
            m.g.nrows() == n_x,
            format!("G has {} rows, expected {n_x}", m.g.nrows()),
        )?;
        dim(
            m.c.ncols() == n_x,
            format!("C has {} columns, expected {n_x}", m.c.ncols()),
        )?;
        dim(
            m.d.nrows() == m.c.nrows(),
            format!("D has {} rows, expected {}", m.d.nrows(), m.c.nrows()),
        )?;
        dim(
            m.c_q.ncols() == n_x,
            format!("C_q has {} columns, expected {n_x}", m.c_q.ncols()),
        )?;
        dim(m.g.ncols() > 0, "G has no columns".into())?;
        dim(m.d.ncols() > 0, "D has no columns".into())?;
        dim(
            self.w_x.dim() == m.g.ncols(),
            format!("w_x has {} channels, G has {} columns", self.w_x.dim(), m.g.ncols()),
        )?;
        dim(
            self.w_y.dim() == m.d.ncols(),
            format!("w_y has {} channels, D has {} columns", self.w_y.dim(), m.d.ncols()),
        )?;
        let probe = self.f.eval(
            0.0,
            &Vector::zeros(0),
            &Vector::zeros(m.c.nrows()),
            &Vector::zeros(m.c_q.nrows()),
        );
        dim(
            probe.len() == m.b_f.ncols(),
            format!("f returns {} values, B_f has {} columns", probe.len(), m.b_f.ncols()),
        )?;
        let probe = self.g.eval(0.0, &Vector::zeros(0), &Vector::zeros(m.c.nrows()));
        dim(
            probe.len() == m.b_g.ncols(),
            format!("g returns {} values, B_g has {} columns", probe.len(), m.b_g.ncols()),
        )?;
        if !(self.rho_x >= 0.0) || !self.rho_x.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "rho_x must be finite and >= 0, got {}",
                self.rho_x
            )));
        }

        if m.c.nrows() < m.d.ncols() {
            return Err(Error::TooFewOutputs {
                n_y: m.c.nrows(),
                m_y: m.d.ncols(),
            });
        }
        for (which, mat) in [("G", &m.g), ("D", &m.d)] {
            let r = linalg::rank(mat);
            if r < mat.ncols() {
                return Err(Error::RankDeficient {
                    which,
                    rank: r,
                    expected: mat.ncols(),
                });
            }
        }
        Ok(())
    }

    /// Plant vector field.
    pub fn rhs(&self, t: f64, x: &Vector, u: &Vector) -> Vector {
        let w_y = self.w_y.eval(t);
        let y = self.output(x, &w_y);
        let q = &self.m.c_q * x;
        let f = self.f.eval(t, u, &y, &q);
        let g = self.g.eval(t, u, &y);
        &self.m.a * x + &self.m.b_f * f + &self.m.b_g * g + &self.m.g * self.w_x.eval(t)
    }

    pub fn output(&self, x: &Vector, w_y: &Vector) -> Vector {
        &self.m.c * x + &self.m.d * w_y
    }
}

/// Serializable plant description: row-major matrices and registry names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B_f")]
    pub b_f: Vec<Vec<f64>>,
    #[serde(rename = "B_g", default, skip_serializing_if = "Option::is_none")]
    pub b_g: Option<Vec<Vec<f64>>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(rename = "C_q")]
    pub c_q: Vec<Vec<f64>>,
    pub f: StateNonlinearitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_known: Option<KnownNonlinearitySpec>,
    /// Defaults to the peak norm of `w_x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_x: Option<f64>,
    pub w_x: VectorSignal,
    pub w_y: VectorSignal,
}

fn parse_matrix(name: &str, rows: &[Vec<f64>]) -> Result<Mat> {
    linalg::from_rows(rows).ok_or_else(|| Error::DimensionMismatch(format!("{name}: ragged rows")))
}

impl PlantSpec {
    pub fn build(&self) -> Result<PlantModel> {
        let a = parse_matrix("A", &self.a)?;
        let n_x = a.nrows();
        let b_g = match &self.b_g {
            Some(rows) => parse_matrix("B_g", rows)?,
            None => Mat::zeros(n_x, 1),
        };
        let g_known = self
            .g_known
            .clone()
            .unwrap_or(KnownNonlinearitySpec::Zero { dim: b_g.ncols() });
        let m = PlantMatrices {
            a,
            b_f: parse_matrix("B_f", &self.b_f)?,
            b_g,
            g: parse_matrix("G", &self.g)?,
            c: parse_matrix("C", &self.c)?,
            d: parse_matrix("D", &self.d)?,
            c_q: parse_matrix("C_q", &self.c_q)?,
        };
        let rho_x = self.rho_x.unwrap_or_else(|| self.w_x.sup_norm());
        PlantModel::new(
            m,
            StateNonlinearity::from_spec(&self.f),
            KnownNonlinearity::from_spec(&g_known),
            rho_x,
            Disturbance::Generated(self.w_x.clone()),
            Disturbance::Generated(self.w_y.clone()),
        )
    }
}
