//! Registry of built-in nonlinearities.
//!
//! Callbacks cannot be serialized, so scenario files name a nonlinearity and
//! its parameters; host code may also wrap any closure directly.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::linalg::Vector;

/// `f(t, u, y, q)`: nonlinearity whose argument `q = C_q x` must be estimated.
pub type StateFn = Arc<dyn Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync>;
/// `g(t, u, y)`: nonlinearity of measured quantities only.
pub type KnownFn = Arc<dyn Fn(f64, &Vector, &Vector) -> Vector + Send + Sync>;

/// Named unknown-argument nonlinearity. Element-wise entries map R^n to R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateNonlinearitySpec {
    /// `gain * cos(q_i)`
    CosOfQ {
        #[serde(default = "one")]
        gain: f64,
    },
    /// `gain * sin(q_i)`
    SinOfQ {
        #[serde(default = "one")]
        gain: f64,
    },
    /// `gain * q_i |q_i|`
    QAbsQ {
        #[serde(default = "one")]
        gain: f64,
    },
    /// `gain * q_i^3`
    Cube {
        #[serde(default = "one")]
        gain: f64,
    },
    /// `gain * q_i^2`
    Square {
        #[serde(default = "one")]
        gain: f64,
    },
    /// `gain * q_i`
    Identity {
        #[serde(default = "one")]
        gain: f64,
    },
    /// `[sin q_1, cos q_2]`
    SinCos,
    /// `[q_1, q_2^5 / 5]`
    Quintic,
    /// Zero map into R^dim.
    Zero { dim: usize },
}

fn one() -> f64 {
    1.0
}

impl StateNonlinearitySpec {
    /// Output dimension given the argument dimension `n_q`.
    pub fn output_dim(&self, n_q: usize) -> usize {
        match self {
            Self::SinCos | Self::Quintic => 2,
            Self::Zero { dim } => *dim,
            _ => n_q,
        }
    }

    pub fn eval_q(&self, q: &Vector) -> Vector {
        match *self {
            Self::CosOfQ { gain } => q.map(|v| gain * v.cos()),
            Self::SinOfQ { gain } => q.map(|v| gain * v.sin()),
            Self::QAbsQ { gain } => q.map(|v| gain * v * v.abs()),
            Self::Cube { gain } => q.map(|v| gain * v * v * v),
            Self::Square { gain } => q.map(|v| gain * v * v),
            Self::Identity { gain } => q * gain,
            Self::SinCos => Vector::from_vec(vec![q[0].sin(), q[1].cos()]),
            Self::Quintic => Vector::from_vec(vec![q[0], q[1].powi(5) / 5.0]),
            Self::Zero { dim } => Vector::zeros(dim),
        }
    }

    pub fn build(&self) -> StateFn {
        let spec = self.clone();
        Arc::new(move |_t, _u, _y, q| spec.eval_q(q))
    }
}

/// Named known-argument nonlinearity `g(t, u, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum KnownNonlinearitySpec {
    /// `gain * sin(y[index])`, scalar output.
    SinOfY {
        #[serde(default)]
        index: usize,
        #[serde(default = "one")]
        gain: f64,
    },
    Zero {
        dim: usize,
    },
}

impl KnownNonlinearitySpec {
    pub fn output_dim(&self) -> usize {
        match self {
            Self::SinOfY { .. } => 1,
            Self::Zero { dim } => *dim,
        }
    }

    pub fn eval_y(&self, y: &Vector) -> Vector {
        match *self {
            Self::SinOfY { index, gain } => Vector::from_element(1, gain * y[index].sin()),
            Self::Zero { dim } => Vector::zeros(dim),
        }
    }

    pub fn build(&self) -> KnownFn {
        let spec = self.clone();
        Arc::new(move |_t, _u, y| spec.eval_y(y))
    }
}

/// A state nonlinearity with a display label.
#[derive(Clone)]
pub struct StateNonlinearity {
    pub label: String,
    pub func: StateFn,
}

impl StateNonlinearity {
    pub fn from_spec(spec: &StateNonlinearitySpec) -> Self {
        Self {
            label: format!("{spec:?}"),
            func: spec.build(),
        }
    }

    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            func: Arc::new(f),
        }
    }

    pub fn eval(&self, t: f64, u: &Vector, y: &Vector, q: &Vector) -> Vector {
        (self.func)(t, u, y, q)
    }
}

impl fmt::Debug for StateNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateNonlinearity").field("label", &self.label).finish()
    }
}

#[derive(Clone)]
pub struct KnownNonlinearity {
    pub label: String,
    pub func: KnownFn,
}

impl KnownNonlinearity {
    pub fn from_spec(spec: &KnownNonlinearitySpec) -> Self {
        Self {
            label: format!("{spec:?}"),
            func: spec.build(),
        }
    }

    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(f64, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            func: Arc::new(f),
        }
    }

    pub fn eval(&self, t: f64, u: &Vector, y: &Vector) -> Vector {
        (self.func)(t, u, y)
    }
}

impl fmt::Debug for KnownNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnownNonlinearity").field("label", &self.label).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_parse() {
        let s: StateNonlinearitySpec = serde_json::from_str(r#"{"name":"q_abs_q","gain":0.25}"#).unwrap();
        assert_eq!(s, StateNonlinearitySpec::QAbsQ { gain: 0.25 });
        let s: StateNonlinearitySpec = serde_json::from_str(r#"{"name":"cos_of_q"}"#).unwrap();
        assert_eq!(s, StateNonlinearitySpec::CosOfQ { gain: 1.0 });
        assert!(serde_json::from_str::<StateNonlinearitySpec>(r#"{"name":"tanh"}"#).is_err());
    }

    #[test]
    fn q_abs_q_values() {
        let f = StateNonlinearitySpec::QAbsQ { gain: 1.0 };
        let v = f.eval_q(&Vector::from_vec(vec![-2.0, 3.0]));
        assert_eq!(v.as_slice(), &[-4.0, 9.0]);
    }

    #[test]
    fn sin_of_y_reads_index() {
        let g = KnownNonlinearitySpec::SinOfY { index: 1, gain: 2.0 };
        let v = g.eval_y(&Vector::from_vec(vec![0.0, std::f64::consts::FRAC_PI_2]));
        assert!((v[0] - 2.0).abs() < 1e-15);
    }
}
