//! Fixed-step ODE integrators.
//!
//! Inside the boundary layer the injection term has slope `rho / eta`, which
//! makes the coupled plant/observer system very stiff. The default is the
//! three-stage, L-stable, stiffly accurate SDIRK method of Alexander; classical
//! RK4 is kept for non-stiff use and needs a step well below `eta / rho`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Sdirk3,
    Rk4,
}

// root of x^3 - 3x^2 + 3x/2 - 1/6 in (1/6, 1/2)
const GAMMA: f64 = 0.435_866_521_508_459;

/// Lower-triangular coefficients `a[i][j]`, `j < i`, and nodes `c`.
fn tableau() -> ([[f64; 3]; 3], [f64; 3]) {
    let g = GAMMA;
    let b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
    let b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
    (
        [[0.0; 3], [(1.0 - g) / 2.0, 0.0, 0.0], [b1, b2, 0.0]],
        [g, (1.0 + g) / 2.0, 1.0],
    )
}

/// A vector field `y' = f(t, y)`.
pub trait VectorField {
    fn eval(&self, t: f64, y: &Vector) -> Vector;
}

impl<F: Fn(f64, &Vector) -> Vector> VectorField for F {
    fn eval(&self, t: f64, y: &Vector) -> Vector {
        self(t, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepper {
    pub method: Method,
    /// Newton convergence, relative to `1 + |Y|_inf`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// How many times a failing step may be halved.
    pub max_splits: u32,
}

impl Default for Stepper {
    fn default() -> Self {
        Self {
            method: Method::Sdirk3,
            newton_tol: 1e-12,
            max_newton: 10,
            max_splits: 10,
        }
    }
}

fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn jacobian(f: &dyn VectorField, t: f64, y: &Vector, f0: &Vector) -> Mat {
    let n = y.len();
    let mut j = Mat::zeros(n, n);
    let mut yp = y.clone();
    for c in 0..n {
        let d = f64::EPSILON.sqrt() * y[c].abs().max(1.0);
        yp[c] = y[c] + d;
        let col = (f.eval(t, &yp) - f0) / d;
        j.set_column(c, &col);
        yp[c] = y[c];
    }
    j
}

impl Stepper {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// Advances `y` from `t` to `t + h`.
    pub fn step(&self, f: &dyn VectorField, t: f64, y: &Vector, h: f64) -> Result<Vector> {
        let out = match self.method {
            Method::Rk4 => Some(rk4(f, t, y, h)),
            Method::Sdirk3 => self.sdirk_split(f, t, y, h, 0),
        };
        match out {
            Some(v) if all_finite(&v) => Ok(v),
            Some(_) => Err(Error::NonFiniteState {
                t: t + h,
                detail: "state became NaN or infinite".into(),
            }),
            None => Err(Error::IntegratorFailure {
                t,
                detail: format!("Newton iteration diverged after {} step halvings", self.max_splits),
            }),
        }
    }

    fn sdirk_split(&self, f: &dyn VectorField, t: f64, y: &Vector, h: f64, depth: u32) -> Option<Vector> {
        if let Some(v) = self.sdirk(f, t, y, h) {
            return Some(v);
        }
        if depth >= self.max_splits {
            return None;
        }
        let mid = self.sdirk_split(f, t, y, h / 2.0, depth + 1)?;
        self.sdirk_split(f, t + h / 2.0, &mid, h / 2.0, depth + 1)
    }

    fn sdirk(&self, f: &dyn VectorField, t: f64, y: &Vector, h: f64) -> Option<Vector> {
        let (a, c) = tableau();
        let n = y.len();
        let hg = h * GAMMA;
        let f0 = f.eval(t, y);
        if !all_finite(&f0) {
            return None;
        }
        let factor = |j: Mat| (Mat::identity(n, n) - j * hg).lu();
        let mut lu = factor(jacobian(f, t, y, &f0));
        let mut k: Vec<Vector> = Vec::with_capacity(3);
        let mut last = y.clone();
        for i in 0..3 {
            let mut base = y.clone();
            for (j, kj) in k.iter().enumerate() {
                base.axpy(h * a[i][j], kj, 1.0);
            }
            let ti = t + c[i] * h;
            let guess = k.last().unwrap_or(&f0);
            let mut yi = &base + guess * hg;
            let mut converged = false;
            let mut prev = f64::INFINITY;
            for _ in 0..self.max_newton {
                let fy = f.eval(ti, &yi);
                let g = &yi - &base - &fy * hg;
                let delta = lu.solve(&g)?;
                yi -= &delta;
                if !all_finite(&yi) {
                    return None;
                }
                let size = delta.amax();
                if size <= self.newton_tol * (1.0 + yi.amax()) {
                    converged = true;
                    break;
                }
                // slow contraction: the Jacobian is stale (e.g. across a saturation kink)
                if size > 0.25 * prev {
                    let fy = f.eval(ti, &yi);
                    lu = factor(jacobian(f, ti, &yi, &fy));
                }
                prev = size;
            }
            if !converged {
                return None;
            }
            k.push((&yi - &base) / hg);
            last = yi;
        }
        // stiffly accurate: the last stage is the new state
        Some(last)
    }
}

fn rk4(f: &dyn VectorField, t: f64, y: &Vector, h: f64) -> Vector {
    let k1 = f.eval(t, y);
    let k2 = f.eval(t + h / 2.0, &(y + &k1 * (h / 2.0)));
    let k3 = f.eval(t + h / 2.0, &(y + &k2 * (h / 2.0)));
    let k4 = f.eval(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(method: Method, f: &dyn VectorField, y0: Vector, tf: f64, n: usize) -> Vector {
        let s = Stepper::new(method);
        let h = tf / n as f64;
        let mut y = y0;
        for i in 0..n {
            y = s.step(f, i as f64 * h, &y, h).unwrap();
        }
        y
    }

    #[test]
    fn gamma_is_the_cubic_root() {
        let g = GAMMA;
        assert!((g.powi(3) - 3.0 * g * g + 1.5 * g - 1.0 / 6.0).abs() < 1e-14);
        let (a, c) = tableau();
        // stage nodes match row sums (with the diagonal gamma)
        for i in 0..3 {
            assert!((a[i].iter().sum::<f64>() + GAMMA - c[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn third_order_convergence_on_linear_decay() {
        let f = |_t: f64, y: &Vector| -y;
        let exact = (-1.0f64).exp();
        let e1 = (integrate(Method::Sdirk3, &f, Vector::from_element(1, 1.0), 1.0, 20)[0] - exact).abs();
        let e2 = (integrate(Method::Sdirk3, &f, Vector::from_element(1, 1.0), 1.0, 40)[0] - exact).abs();
        let order = (e1 / e2).log2();
        assert!(order > 2.7 && order < 3.3, "order {order}");
    }

    #[test]
    fn rk4_fourth_order() {
        let f = |t: f64, _y: &Vector| Vector::from_element(1, t.cos());
        let e1 = (integrate(Method::Rk4, &f, Vector::zeros(1), 2.0, 10)[0] - 2f64.sin()).abs();
        let e2 = (integrate(Method::Rk4, &f, Vector::zeros(1), 2.0, 20)[0] - 2f64.sin()).abs();
        assert!((e1 / e2).log2() > 3.7);
    }

    #[test]
    fn l_stable_on_stiff_decay() {
        // lambda h = -1e6: RK4 blows up, SDIRK damps
        let f = |_t: f64, y: &Vector| y * -1e6;
        let y = integrate(Method::Sdirk3, &f, Vector::from_element(1, 1.0), 1.0, 10);
        assert!(y[0].abs() < 1e-6);
        let s = Stepper::new(Method::Rk4);
        let mut y = Vector::from_element(1, 1.0);
        let mut err = None;
        for i in 0..200 {
            match s.step(&f, i as f64 * 0.1, &y, 0.1) {
                Ok(v) => y = v,
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        assert!(matches!(err, Some(Error::NonFiniteState { .. })));
    }

    #[test]
    fn saturated_stiff_relay_settles() {
        // y' = -rho * sat(y / eta), the scalar boundary-layer relay
        let (rho, eta) = (100.0, 1e-4);
        let f = move |_t: f64, y: &Vector| {
            let s = y[0];
            let v = if s.abs() >= eta {
                rho * s.signum()
            } else {
                rho * s / eta
            };
            Vector::from_element(1, -v)
        };
        let y = integrate(Method::Sdirk3, &f, Vector::from_element(1, 1.0), 0.1, 100);
        assert!(y[0].abs() < 1e-9);
    }
}
