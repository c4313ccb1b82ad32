//! State-disturbance reconstruction: the injection term is convolved with a
//! smooth, compactly supported window `h_beta(t) = h(t / beta) / beta`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::observer::SimulationTrace;

/// Quadrature nodes used to normalize kernels on [-1, 1].
const NORMALIZATION_NODES: usize = 20_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `exp(-1 / (1 - t^2))`, C-infinity.
    StandardBump,
    /// `(1 - t^2)^8`: only C^7, but cheap and with a closed-form integral.
    PolynomialBump,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard_bump" => Ok(Self::StandardBump),
            "polynomial_bump" => Ok(Self::PolynomialBump),
            other => Err(Error::UnknownKernel(other.to_string())),
        }
    }
}

const POLY_POWER: i32 = 8;

/// Kernel on [-1, 1], scaled to unit integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub kind: KernelKind,
    /// Normalization constant `c`.
    pub c: f64,
}

fn raw(kind: KernelKind, t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - t * t;
    match kind {
        KernelKind::StandardBump => (-1.0 / s).exp(),
        KernelKind::PolynomialBump => s.powi(POLY_POWER),
    }
}

impl Kernel {
    pub fn new(kind: KernelKind) -> Self {
        // trapezoid rule; for the bump all derivatives vanish at +-1, so it
        // converges faster than any power of the node spacing
        let n = NORMALIZATION_NODES;
        let dt = 2.0 / (n - 1) as f64;
        let integral: f64 = (0..n).map(|i| raw(kind, -1.0 + i as f64 * dt)).sum::<f64>() * dt;
        Self {
            kind,
            c: 1.0 / integral,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.c * raw(self.kind, t)
    }

    /// `h_beta(t) = h(t / beta) / beta`.
    pub fn scaled(&self, t: f64, beta: f64) -> f64 {
        self.eval(t / beta) / beta
    }
}

pub fn make_window(kind: &str) -> Result<Kernel> {
    Ok(Kernel::new(kind.parse()?))
}

/// Taps `h_beta(j step)`, `j = -r..=r`, renormalized so that `sum * step = 1`.
pub fn taps(kernel: &Kernel, beta: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(beta >= 2.0 * step) {
        return Err(Error::BetaTooSmall { beta, step });
    }
    let r = (beta / step + 1e-9).floor() as i64;
    let mut w: Vec<f64> = (-r..=r).map(|j| kernel.scaled(j as f64 * step, beta)).collect();
    let s: f64 = w.iter().sum::<f64>() * step;
    for v in &mut w {
        *v /= s;
    }
    Ok(w)
}

/// Filter output on the interior grid: `values[k]` belongs to sample `offset + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub offset: usize,
    pub values: Vec<f64>,
}

impl Filtered {
    pub fn get(&self, i: usize) -> Option<f64> {
        i.checked_sub(self.offset).and_then(|k| self.values.get(k).copied())
    }
}

pub fn filter_signal(signal: &[f64], beta: f64, kernel: &Kernel, step: f64) -> Result<Filtered> {
    let w = taps(kernel, beta, step)?;
    let r = w.len() / 2;
    if signal.len() < w.len() {
        return Err(Error::SignalTooShort);
    }
    let values = (r..signal.len() - r)
        .map(|i| {
            let window = &signal[i - r..=i + r];
            // symmetric kernel: correlation equals convolution
            window.iter().zip(&w).map(|(s, h)| s * h).sum::<f64>() * step
        })
        .collect();
    Ok(Filtered { offset: r, values })
}

/// Per-channel widths plus the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFilter {
    pub kernel: Kernel,
    pub betas: Vec<f64>,
}

impl WindowFilter {
    pub fn new(kernel: Kernel, betas: Vec<f64>) -> Self {
        Self { kernel, betas }
    }

    pub fn beta_max(&self) -> f64 {
        self.betas.iter().copied().fold(0.0, f64::max)
    }
}

/// Grid points within `beta` of a declared jump.
pub fn discontinuity_mask(times: &[f64], beta: f64, grid: &[f64]) -> Result<Vec<bool>> {
    for pair in times.windows(2) {
        let gap = pair[1] - pair[0];
        if !(gap > 2.0 * beta) {
            return Err(Error::GapTooSmall {
                gap,
                twice_beta: 2.0 * beta,
            });
        }
    }
    let tol = 1e-9 * beta.max(1.0);
    Ok(grid
        .iter()
        .map(|&t| {
            let k = times.partition_point(|&s| s < t);
            let near = |j: usize| times.get(j).is_some_and(|&s| (t - s).abs() <= beta + tol);
            near(k) || (k > 0 && near(k - 1))
        })
        .collect())
}

#[derive(Debug, Clone, Default)]
pub struct ReconstructionOptions {
    /// Start of the scored interval; defaults to `t_S + 5 beta_max`.
    pub onset: Option<f64>,
    /// End of the scored interval; defaults to `tf - beta_max`.
    pub end: Option<f64>,
    /// Declared jump times per channel.
    pub discontinuities: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelMetrics {
    pub beta: f64,
    /// Mean of the squared error over unmasked scored samples.
    pub mse: Option<f64>,
    /// Largest error outside the jump neighborhoods.
    pub sup_error_unmasked: Option<f64>,
    /// Largest error inside the jump neighborhoods.
    pub sup_error_masked: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    #[serde(skip)]
    pub t: Vec<f64>,
    /// Filtered estimate per channel, `None` near the ends of the span.
    #[serde(skip)]
    pub w_hat: Vec<Vec<Option<f64>>>,
    #[serde(skip)]
    pub truth: Option<Vec<Vector>>,
    #[serde(skip)]
    pub mask: Vec<Vec<bool>>,
    pub onset: f64,
    pub end: f64,
    /// Mean over scored samples of `|w_x - w_hat|^2`, samples inside any
    /// channel's jump neighborhood excluded.
    pub mse: Option<f64>,
    pub samples_scored: usize,
    pub channels: Vec<ChannelMetrics>,
}

pub fn reconstruct_wx(
    trace: &SimulationTrace,
    filter: &WindowFilter,
    truth: Option<&dyn Fn(f64) -> Vector>,
    options: &ReconstructionOptions,
) -> Result<ReconstructionReport> {
    let m_x = trace.w_hat.first().map_or(0, |v| v.len());
    if trace.len() < 2 || m_x == 0 || trace.w_hat.len() != trace.len() {
        return Err(Error::TraceLacksInjection);
    }
    if filter.betas.len() != m_x {
        return Err(Error::ConfigInvalid(format!(
            "{} window widths for {m_x} disturbance channels",
            filter.betas.len()
        )));
    }
    let step = trace.step();
    let tf = trace.t[trace.len() - 1];
    let beta_max = filter.beta_max();
    let onset = match options.onset {
        Some(t) => t,
        None => trace.reaching_time().unwrap_or(tf) + 5.0 * beta_max,
    };
    let end = options.end.unwrap_or(tf - beta_max).min(tf - beta_max);
    if onset >= end {
        return Err(Error::TBeyondSpan { t: onset });
    }

    let mut w_hat = Vec::with_capacity(m_x);
    let mut mask = Vec::with_capacity(m_x);
    for (k, &beta) in filter.betas.iter().enumerate() {
        let channel: Vec<f64> = trace.w_hat.iter().map(|v| v[k]).collect();
        let out = filter_signal(&channel, beta, &filter.kernel, step)?;
        w_hat.push((0..trace.len()).map(|i| out.get(i)).collect::<Vec<_>>());
        let times = options.discontinuities.get(k).map_or(&[][..], |v| v.as_slice());
        mask.push(discontinuity_mask(times, beta, &trace.t)?);
    }

    let truth_samples = truth.map(|f| trace.t.iter().map(|&t| f(t)).collect::<Vec<Vector>>());
    let mut channels: Vec<ChannelMetrics> = filter
        .betas
        .iter()
        .map(|&beta| ChannelMetrics {
            beta,
            mse: None,
            sup_error_unmasked: None,
            sup_error_masked: None,
        })
        .collect();
    let mut mse = None;
    let mut scored = 0;
    if let Some(ts) = &truth_samples {
        let lo = trace.index_at(onset);
        let mut total = 0.0;
        let mut per = vec![(0.0, 0usize); m_x];
        for i in lo..trace.len() {
            if trace.t[i] > end + 1e-12 {
                break;
            }
            let masked_any = mask.iter().any(|m| m[i]);
            let mut sq = 0.0;
            for k in 0..m_x {
                let Some(v) = w_hat[k][i] else { continue };
                let err = (ts[i][k] - v).abs();
                let c = &mut channels[k];
                if mask[k][i] {
                    c.sup_error_masked = Some(c.sup_error_masked.unwrap_or(0.0).max(err));
                } else {
                    c.sup_error_unmasked = Some(c.sup_error_unmasked.unwrap_or(0.0).max(err));
                    per[k].0 += err * err;
                    per[k].1 += 1;
                }
                sq += err * err;
            }
            if !masked_any {
                total += sq;
                scored += 1;
            }
        }
        for (c, (s, n)) in channels.iter_mut().zip(per) {
            c.mse = (n > 0).then(|| s / n as f64);
        }
        mse = (scored > 0).then(|| total / scored as f64);
    }
    Ok(ReconstructionReport {
        t: trace.t.clone(),
        w_hat,
        truth: truth_samples,
        mask,
        onset,
        end,
        mse,
        samples_scored: scored,
        channels,
    })
}

impl ReconstructionReport {
    /// Columns `t`, then per channel `w_hat_k, truth_k, masked_k`; rows
    /// without a filtered value are skipped.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let m = self.w_hat.len();
        let mut header = vec!["t".to_string()];
        for k in 1..=m {
            header.push(format!("w_x_hat{k}"));
            header.push(format!("w_x{k}"));
            header.push(format!("masked{k}"));
        }
        out.write_record(&header)?;
        for i in 0..self.t.len() {
            if self.w_hat.iter().any(|c| c[i].is_none()) {
                continue;
            }
            let mut row = vec![format!("{:.9e}", self.t[i])];
            for k in 0..m {
                row.push(format!("{:.9e}", self.w_hat[k][i].unwrap_or(f64::NAN)));
                row.push(match &self.truth {
                    Some(ts) => format!("{:.9e}", ts[i][k]),
                    None => String::new(),
                });
                row.push(u8::from(self.mask[k][i]).to_string());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t0: f64, tf: f64, step: f64) -> Vec<f64> {
        let n = ((tf - t0) / step).round() as usize;
        (0..=n).map(|i| t0 + i as f64 * step).collect()
    }

    #[test]
    fn bump_constant() {
        let k = make_window("standard_bump").unwrap();
        assert!((k.c - 2.25228).abs() < 1e-4, "{}", k.c);
        assert!((k.eval(0.0) - k.c * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(k.eval(1.0), 0.0);
        assert_eq!(k.eval(-1.0), 0.0);
        assert_eq!(k.eval(1.5), 0.0);
    }

    #[test]
    fn polynomial_bump_matches_closed_form() {
        // int (1-t^2)^8 = 2 * 16!! / 17!! = 65536 / 109395
        let k = Kernel::new(KernelKind::PolynomialBump);
        assert!((1.0 / k.c - 65536.0 / 109395.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_kernel() {
        assert!(matches!(make_window("gaussian"), Err(Error::UnknownKernel(_))));
    }

    #[test]
    fn taps_normalized() {
        let k = Kernel::new(KernelKind::StandardBump);
        let w = taps(&k, 0.24, 1e-3).unwrap();
        assert_eq!(w.len(), 481);
        assert!((w.iter().sum::<f64>() * 1e-3 - 1.0).abs() < 1e-12);
        assert!(matches!(taps(&k, 1e-3, 1e-3), Err(Error::BetaTooSmall { .. })));
    }

    #[test]
    fn constant_and_short() {
        let k = Kernel::new(KernelKind::StandardBump);
        let out = filter_signal(&[3.5; 200], 0.01, &k, 1e-3).unwrap();
        assert_eq!(out.offset, 10);
        assert_eq!(out.values.len(), 180);
        assert!(out.values.iter().all(|v| (v - 3.5).abs() < 1e-12));
        assert!(matches!(
            filter_signal(&[1.0; 10], 0.01, &k, 1e-3),
            Err(Error::SignalTooShort)
        ));
    }

    #[test]
    fn mask_counts() {
        let g = grid(0.0, 10.0, 0.1);
        let m = discontinuity_mask(&[5.0], 0.3, &g).unwrap();
        assert_eq!(m.iter().filter(|b| **b).count(), 7);
        assert!(discontinuity_mask(&[], 0.3, &g).unwrap().iter().all(|b| !b));
        assert!(matches!(
            discontinuity_mask(&[1.0, 1.5], 0.3, &g),
            Err(Error::GapTooSmall { .. })
        ));
    }

    #[test]
    fn step_signal_bounds() {
        let step = 1e-3;
        let g = grid(0.0, 10.0, step);
        let s: Vec<f64> = g.iter().map(|&t| if t < 5.0 { 0.0 } else { 1.0 }).collect();
        let k = Kernel::new(KernelKind::StandardBump);
        let out = filter_signal(&s, 0.3, &k, step).unwrap();
        let mask = discontinuity_mask(&[5.0], 0.3, &g).unwrap();
        for (i, &t) in g.iter().enumerate() {
            let Some(v) = out.get(i) else { continue };
            let err = (v - s[i]).abs();
            if mask[i] {
                assert!(err <= 2.0 + 1e-9);
            } else {
                // a constant on each side, so the modulus is zero
                assert!(err <= 1e-6, "t={t} err={err}");
            }
        }
    }

    #[test]
    fn sin_within_modulus() {
        let step = 1e-3;
        let g = grid(0.0, 20.0, step);
        let s: Vec<f64> = g.iter().map(|t| t.sin()).collect();
        let k = Kernel::new(KernelKind::StandardBump);
        let beta = 0.1;
        let out = filter_signal(&s, beta, &k, step).unwrap();
        let worst = (0..g.len())
            .filter_map(|i| out.get(i).map(|v| (v - s[i]).abs()))
            .fold(0.0, f64::max);
        assert!(worst <= 2.0 * (beta / 2.0).sin() + 1e-6);
    }
}
