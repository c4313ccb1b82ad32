//! Boundary-layer sliding-mode observer and the coupled plant/observer
//! simulation.
//!
//! The observer state `z` has dimension `n_x + m_y`; its estimate of the
//! augmented state `[x; w_y]` is `z - T2 y`.

use std::io::Write;

use serde::Serialize;

use crate::descriptor::DescriptorSystem;
use crate::error::{Error, Result};
use crate::integrator::{Method, Stepper};
use crate::linalg::{Mat, Vector};
use crate::plant::SignalFn;
use crate::synthesis::{self, ObserverGains};

/// Continuous relay: `rho v / |v|` outside the layer `|v| < eta`, `rho v / eta` inside,
/// with `v = F e_y`.
pub fn injection_term(f: &Mat, e_y: &Vector, rho: f64, eta: f64) -> Vector {
    let v = f * e_y;
    let n = v.norm();
    if n >= eta {
        v * (rho / n)
    } else {
        v * (rho / eta)
    }
}

/// Observer matrices precomputed from gains and descriptor.
#[derive(Debug, Clone)]
pub struct Observer {
    pub descriptor: DescriptorSystem,
    pub gains: ObserverGains,
    /// `T1 A - L1 C`
    pub q: Mat,
    /// `L1 - Q T2`
    pub r: Mat,
    t1_bf: Mat,
    t1_bg: Mat,
    t1_g: Mat,
    cq_e: Mat,
}

/// One evaluation of the observer equations.
#[derive(Debug, Clone)]
pub struct ObserverOutput {
    pub z_dot: Vector,
    pub xbar_hat: Vector,
    pub e_y: Vector,
    pub w_hat: Vector,
}

impl Observer {
    pub fn new(descriptor: DescriptorSystem, gains: ObserverGains) -> Result<Self> {
        let n = descriptor.n_aug();
        let n_y = descriptor.n_y();
        let m_x = descriptor.plant.m_x();
        if gains.l1.shape() != (n, n_y) || gains.f.shape() != (m_x, n_y) || gains.p.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "gains do not match the plant: P {:?}, L1 {:?}, F {:?}",
                gains.p.shape(),
                gains.l1.shape(),
                gains.f.shape()
            )));
        }
        if gains.l2.shape() != (descriptor.plant.n_q(), n_y) {
            return Err(Error::DimensionMismatch(format!("L2 is {:?}", gains.l2.shape())));
        }
        if !(gains.eta > 0.0) || !(gains.rho >= 0.0) {
            return Err(Error::ConfigInvalid("gains need eta > 0 and rho >= 0".into()));
        }
        let q = descriptor.q_matrix(&gains.l1);
        let r = &gains.l1 - &q * &descriptor.t2;
        let m = &descriptor.plant.m;
        Ok(Self {
            t1_bf: &descriptor.t1 * &m.b_f,
            t1_bg: &descriptor.t1 * &m.b_g,
            t1_g: &descriptor.t1 * &m.g,
            cq_e: descriptor.cq_e(),
            q,
            r,
            descriptor,
            gains,
        })
    }

    pub fn estimate(&self, z: &Vector, y: &Vector) -> Vector {
        z - &self.descriptor.t2 * y
    }

    pub fn rhs(&self, t: f64, z: &Vector, y: &Vector, u: &Vector) -> ObserverOutput {
        let plant = &self.descriptor.plant;
        let xbar_hat = self.estimate(z, y);
        let e_y = y - &self.descriptor.c_bar * &xbar_hat;
        let w_hat = injection_term(&self.gains.f, &e_y, self.gains.rho, self.gains.eta);
        let q_hat = &self.cq_e * &xbar_hat + &self.gains.l2 * &e_y;
        let f_hat = plant.f.eval(t, u, y, &q_hat);
        let g = plant.g.eval(t, u, y);
        let z_dot = &self.q * z + &self.r * y + &self.t1_bg * g + &self.t1_bf * f_hat + &self.t1_g * &w_hat;
        ObserverOutput {
            z_dot,
            xbar_hat,
            e_y,
            w_hat,
        }
    }
}

/// `z' ` from the observer equations.
pub fn observer_rhs(observer: &Observer, t: f64, z: &Vector, y: &Vector, u: &Vector) -> Result<Vector> {
    let out = observer.rhs(t, z, y, u);
    if out.z_dot.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState {
            t,
            detail: format!("observer derivative non-finite at z = {z:?}"),
        });
    }
    Ok(out.z_dot)
}

#[derive(Clone)]
pub struct Scenario {
    pub observer: Observer,
    pub x0: Vector,
    /// Defaults to zero.
    pub z0: Option<Vector>,
    pub t0: f64,
    pub tf: f64,
    pub step: f64,
    /// Samples are recorded every `record_every` steps.
    pub record_every: usize,
    pub method: Method,
    /// Control input; zero-dimensional when absent.
    pub u: Option<SignalFn>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("x0", &self.x0)
            .field("z0", &self.z0)
            .field("t0", &self.t0)
            .field("tf", &self.tf)
            .field("step", &self.step)
            .field("record_every", &self.record_every)
            .field("method", &self.method)
            .finish()
    }
}

impl Scenario {
    pub fn new(observer: Observer, x0: Vector, t0: f64, tf: f64, step: f64) -> Self {
        Self {
            observer,
            x0,
            z0: None,
            t0,
            tf,
            step,
            record_every: 1,
            method: Method::default(),
            u: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n_x = self.observer.descriptor.n_x();
        if !(self.tf > self.t0) {
            return Err(Error::ConfigInvalid(format!(
                "empty time span [{}, {}]",
                self.t0, self.tf
            )));
        }
        if !(self.step > 0.0) || self.step > self.tf - self.t0 {
            return Err(Error::ConfigInvalid(format!(
                "step must be in (0, tf - t0], got {}",
                self.step
            )));
        }
        if self.record_every == 0 {
            return Err(Error::ConfigInvalid("record_every must be >= 1".into()));
        }
        if self.x0.len() != n_x {
            return Err(Error::DimensionMismatch(format!(
                "x0 has {} entries, expected {n_x}",
                self.x0.len()
            )));
        }
        if let Some(z0) = &self.z0 {
            if z0.len() != self.observer.descriptor.n_aug() {
                return Err(Error::DimensionMismatch(format!("z0 has {} entries", z0.len())));
            }
        }
        Ok(())
    }

    /// `z0` that makes the estimate exact at `t0`.
    pub fn consistent_z0(&self) -> Vector {
        let d = &self.observer.descriptor;
        let w_y = d.plant.w_y.eval(self.t0);
        let y = d.plant.output(&self.x0, &w_y);
        let mut xbar = Vector::zeros(d.n_aug());
        xbar.rows_mut(0, d.n_x()).copy_from(&self.x0);
        xbar.rows_mut(d.n_x(), w_y.len()).copy_from(&w_y);
        xbar + &d.t2 * y
    }

    fn input(&self, t: f64) -> Vector {
        self.u.as_ref().map_or_else(|| Vector::zeros(0), |u| u(t))
    }
}

/// Sampled trajectories; the error `x_bar - x_bar_hat` is derived on demand.
#[derive(Debug, Clone, Default)]
pub struct SimulationTrace {
    pub t: Vec<f64>,
    pub x: Vec<Vector>,
    /// True sensor disturbance.
    pub w_y: Vec<Vector>,
    /// True state disturbance.
    pub w_x: Vec<Vector>,
    pub xbar_hat: Vec<Vector>,
    /// Injection term, the raw disturbance estimate.
    pub w_hat: Vec<Vector>,
    /// `|F e_y|`, the sliding variable norm.
    pub sigma_norm: Vec<f64>,
    pub eta: f64,
    pub n_x: usize,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn xbar(&self, i: usize) -> Vector {
        let n = self.x[i].len() + self.w_y[i].len();
        let mut v = Vector::zeros(n);
        v.rows_mut(0, self.n_x).copy_from(&self.x[i]);
        v.rows_mut(self.n_x, self.w_y[i].len()).copy_from(&self.w_y[i]);
        v
    }

    pub fn e_bar(&self, i: usize) -> Vector {
        self.xbar(i) - &self.xbar_hat[i]
    }

    pub fn e_bar_norm(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.e_bar(i).norm()).collect()
    }

    /// First sample time after which `|sigma| < eta` holds to the end.
    pub fn reaching_time(&self) -> Option<f64> {
        let last_out = self.sigma_norm.iter().rposition(|s| *s >= self.eta);
        match last_out {
            None => self.t.first().copied(),
            Some(i) if i + 1 < self.len() => Some(self.t[i + 1]),
            Some(_) => None,
        }
    }

    pub fn step(&self) -> f64 {
        if self.len() < 2 {
            0.0
        } else {
            (self.t[self.len() - 1] - self.t[0]) / (self.len() - 1) as f64
        }
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.t.partition_point(|&s| s < t - 1e-12)
    }

    /// Columns `t, x_i, xhat_i, wyhat_i, what_i, |e_bar|, |sigma|`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if self.is_empty() {
            out.flush()?;
            return Ok(());
        }
        let m_y = self.w_y[0].len();
        let m_x = self.w_hat[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n_x).map(|i| format!("x{}", i + 1)));
        header.extend((0..self.n_x).map(|i| format!("x_hat{}", i + 1)));
        header.extend((0..m_y).map(|i| format!("w_y_hat{}", i + 1)));
        header.extend((0..m_x).map(|i| format!("w_x_hat{}", i + 1)));
        header.push("e_bar_norm".into());
        header.push("sigma_norm".into());
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![format!("{:.9e}", self.t[i])];
            row.extend(self.x[i].iter().map(|v| format!("{v:.9e}")));
            row.extend(self.xbar_hat[i].iter().map(|v| format!("{v:.9e}")));
            row.extend(self.w_hat[i].iter().map(|v| format!("{v:.9e}")));
            row.push(format!("{:.9e}", self.e_bar(i).norm()));
            row.push(format!("{:.9e}", self.sigma_norm[i]));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn simulate(scenario: &Scenario) -> Result<SimulationTrace> {
    scenario.validate()?;
    let obs = &scenario.observer;
    let d = &obs.descriptor;
    let plant = &d.plant;
    let n_x = d.n_x();
    let n = d.n_aug();
    let z0 = scenario.z0.clone().unwrap_or_else(|| Vector::zeros(n));
    let mut state = Vector::zeros(n_x + n);
    state.rows_mut(0, n_x).copy_from(&scenario.x0);
    state.rows_mut(n_x, n).copy_from(&z0);

    let field = |t: f64, s: &Vector| -> Vector {
        let x = s.rows(0, n_x).into_owned();
        let z = s.rows(n_x, n).into_owned();
        let u = scenario.input(t);
        let y = plant.output(&x, &plant.w_y.eval(t));
        let mut out = Vector::zeros(n_x + n);
        out.rows_mut(0, n_x).copy_from(&plant.rhs(t, &x, &u));
        out.rows_mut(n_x, n).copy_from(&obs.rhs(t, &z, &y, &u).z_dot);
        out
    };

    let steps = ((scenario.tf - scenario.t0) / scenario.step).round() as usize;
    let h = (scenario.tf - scenario.t0) / steps as f64;
    let stepper = Stepper::new(scenario.method);
    let mut trace = SimulationTrace {
        eta: obs.gains.eta,
        n_x,
        ..Default::default()
    };
    let rho_x = plant.rho_x;
    let record = |trace: &mut SimulationTrace, t: f64, s: &Vector| -> Result<()> {
        let x = s.rows(0, n_x).into_owned();
        let z = s.rows(n_x, n).into_owned();
        let w_y = plant.w_y.eval(t);
        let w_x = plant.w_x.eval(t);
        if w_x.norm() > rho_x * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::ConfigInvalid(format!(
                "|w_x({t})| = {} exceeds rho_x = {rho_x}",
                w_x.norm()
            )));
        }
        let y = plant.output(&x, &w_y);
        let o = obs.rhs(t, &z, &y, &scenario.input(t));
        trace.sigma_norm.push((&obs.gains.f * &o.e_y).norm());
        trace.t.push(t);
        trace.x.push(x);
        trace.w_y.push(w_y);
        trace.w_x.push(w_x);
        trace.xbar_hat.push(o.xbar_hat);
        trace.w_hat.push(o.w_hat);
        Ok(())
    };
    record(&mut trace, scenario.t0, &state)?;
    for k in 0..steps {
        let t = scenario.t0 + k as f64 * h;
        state = stepper.step(&field, t, &state, h)?;
        if (k + 1) % scenario.record_every == 0 || k + 1 == steps {
            record(&mut trace, scenario.t0 + (k + 1) as f64 * h, &state)?;
        }
    }
    Ok(trace)
}

/// Reruns with half the step and compares the trailing error sup.
/// Returns the relative change, or `StepTooLarge` when it exceeds `max_rel`.
pub fn check_step_convergence(scenario: &Scenario, trailing_fraction: f64, max_rel: f64) -> Result<f64> {
    let coarse = simulate(scenario)?;
    let mut fine_s = scenario.clone();
    fine_s.step = scenario.step / 2.0;
    fine_s.record_every = scenario.record_every * 2;
    let fine = simulate(&fine_s)?;
    let a = trailing_sup(&coarse, trailing_fraction)?;
    let b = trailing_sup(&fine, trailing_fraction)?;
    let rel = (a - b).abs() / b.max(f64::MIN_POSITIVE);
    if rel > max_rel {
        return Err(Error::StepTooLarge {
            rel_change: rel * 100.0,
        });
    }
    Ok(rel)
}

fn trailing_sup(trace: &SimulationTrace, fraction: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let t0 = trace.t[0];
    let tf = trace.t[trace.len() - 1];
    let start = trace.index_at(tf - fraction * (tf - t0));
    Ok((start..trace.len()).map(|i| trace.e_bar(i).norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorMetrics {
    /// `max |e_bar|` over the trailing window.
    pub terminal_sup_error: f64,
    /// `max |x - x_hat|` over the trailing window.
    pub terminal_state_error: f64,
    /// `max |w_y - w_y_hat|` over the trailing window.
    pub terminal_sensor_error: f64,
    /// `sqrt(mu eta rho_x / alpha)`.
    pub bound: f64,
    /// `sqrt(2 mu eta rho_x / alpha)`.
    pub bound_doubled: f64,
    pub within_bound: bool,
    pub t_s: Option<f64>,
    pub trailing_fraction: f64,
}

pub fn error_metrics(
    trace: &SimulationTrace,
    gains: &ObserverGains,
    rho_x: f64,
    trailing_fraction: f64,
) -> Result<ErrorMetrics> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let t0 = trace.t[0];
    let tf = trace.t[trace.len() - 1];
    let start = trace.index_at(tf - trailing_fraction * (tf - t0));
    let n_x = trace.n_x;
    let (mut sup, mut sx, mut sy) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in start..trace.len() {
        let e = trace.e_bar(i);
        sup = sup.max(e.norm());
        sx = sx.max(e.rows(0, n_x).norm());
        sy = sy.max(e.rows(n_x, e.len() - n_x).norm());
    }
    let (bound, bound_doubled) = if rho_x > 0.0 {
        (
            synthesis::ultimate_bound(gains.mu, gains.eta, rho_x, gains.alpha)?,
            synthesis::ultimate_bound(gains.mu, gains.eta, 2.0 * rho_x, gains.alpha)?,
        )
    } else {
        (0.0, 0.0)
    };
    Ok(ErrorMetrics {
        terminal_sup_error: sup,
        terminal_state_error: sx,
        terminal_sensor_error: sy,
        bound,
        bound_doubled,
        within_bound: sup <= bound,
        t_s: trace.reaching_time(),
        trailing_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::build_descriptor;
    use crate::nonlinearity::{KnownNonlinearity, KnownNonlinearitySpec, StateNonlinearity, StateNonlinearitySpec};
    use crate::plant::{Disturbance, PlantMatrices, PlantModel};

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    #[test]
    fn injection_zero_and_boundary() {
        let f = m(1, 2, &[1.0, 0.0]);
        assert_eq!(injection_term(&f, &Vector::zeros(2), 5.0, 0.1), Vector::zeros(1));
        let e = Vector::from_vec(vec![0.1, 3.0]);
        let v = injection_term(&f, &e, 5.0, 0.1);
        assert!((v[0] - 5.0).abs() < 1e-14);
        let v = injection_term(&f, &Vector::from_vec(vec![0.05, 0.0]), 5.0, 0.1);
        assert!((v[0] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn injection_with_example_gain_row() {
        let f = m(1, 3, &[1.32, 0.21, 0.2]);
        let v = injection_term(&f, &Vector::from_vec(vec![1.0, 0.0, 0.0]), 100.0, 1e-4);
        assert!((v[0] - 100.0).abs() < 1e-12);
    }

    fn scalar_observer(l1: Mat, f_gain: Mat, rho: f64) -> Observer {
        let plant = PlantModel::new(
            PlantMatrices {
                a: m(1, 1, &[1.0]),
                b_f: m(1, 1, &[0.0]),
                b_g: m(1, 1, &[0.0]),
                g: m(1, 1, &[1.0]),
                c: m(1, 1, &[1.0]),
                d: m(1, 1, &[1.0]),
                c_q: m(1, 1, &[1.0]),
            },
            StateNonlinearity::from_spec(&StateNonlinearitySpec::Zero { dim: 1 }),
            KnownNonlinearity::from_spec(&KnownNonlinearitySpec::Zero { dim: 1 }),
            0.0,
            Disturbance::zeros(1),
            Disturbance::zeros(1),
        )
        .unwrap();
        let d = build_descriptor(&plant).unwrap();
        let gains = ObserverGains {
            p: Mat::identity(2, 2),
            l1,
            l2: Mat::zeros(1, 1),
            f: f_gain,
            rho,
            eta: 1e-3,
            mu: 1.0,
            alpha: 0.5,
            m: Mat::zeros(2, 2),
            zeta: None,
        };
        Observer::new(d, gains).unwrap()
    }

    #[test]
    fn zero_gains_zero_output() {
        let obs = scalar_observer(Mat::zeros(2, 1), Mat::zeros(1, 1), 0.0);
        // with L1 = 0, Q = T1 A = [1, -1]^T [1 0]; z = 0, y = 0 gives 0
        let zd = observer_rhs(&obs, 0.0, &Vector::zeros(2), &Vector::zeros(1), &Vector::zeros(0)).unwrap();
        assert_eq!(zd, Vector::zeros(2));
    }

    #[test]
    fn scalar_rhs_matches_hand_expansion() {
        // T1 = [1, -1]^T, T2 = [0, -1]^T, A_bar = [1 0], C_bar = [1 1]
        let l1 = m(2, 1, &[2.0, 0.5]);
        let obs = scalar_observer(l1.clone(), Mat::zeros(1, 1), 0.0);
        let t1 = m(2, 1, &[1.0, -1.0]);
        let t2 = m(2, 1, &[0.0, -1.0]);
        let q = &t1 * m(1, 2, &[1.0, 0.0]) - &l1 * m(1, 2, &[1.0, 1.0]);
        let r = &l1 - &q * &t2;
        assert!(crate::linalg::max_abs(&(&obs.q - &q)) < 1e-14);
        let z = Vector::from_vec(vec![0.3, -0.7]);
        let y = Vector::from_vec(vec![1.1]);
        let expect = &q * &z + &r * &y;
        let got = observer_rhs(&obs, 0.0, &z, &y, &Vector::zeros(0)).unwrap();
        assert!((got - expect).amax() < 1e-14);
    }

    #[test]
    fn consistent_start_stays_exact() {
        // Hurwitz Q: L1 picked so that T1 A - L1 C is stable
        let obs = scalar_observer(m(2, 1, &[2.0, -1.0]), m(1, 1, &[1.0]), 1.0);
        let mut s = Scenario::new(obs, Vector::from_vec(vec![0.5]), 0.0, 1.0, 1e-3);
        s.z0 = Some(s.consistent_z0());
        let tr = simulate(&s).unwrap();
        let worst = tr.e_bar_norm().into_iter().fold(0.0, f64::max);
        assert!(worst <= 1e-9, "{worst}");
    }

    #[test]
    fn empty_span_rejected() {
        let obs = scalar_observer(Mat::zeros(2, 1), Mat::zeros(1, 1), 0.0);
        let s = Scenario::new(obs, Vector::zeros(1), 1.0, 1.0, 1e-3);
        assert!(matches!(simulate(&s), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn reaching_time_from_samples() {
        let tr = SimulationTrace {
            t: vec![0.0, 1.0, 2.0, 3.0],
            sigma_norm: vec![1.0, 0.5, 1e-5, 1e-6],
            eta: 1e-4,
            ..Default::default()
        };
        assert_eq!(tr.reaching_time(), Some(2.0));
        let tr = SimulationTrace {
            t: vec![0.0, 1.0],
            sigma_norm: vec![0.0, 1.0],
            eta: 1e-4,
            ..Default::default()
        };
        assert_eq!(tr.reaching_time(), None);
    }
}
