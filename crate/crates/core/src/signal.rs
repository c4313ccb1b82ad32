//! Exogenous signal generators used for the disturbance channels.
//!
//! Phase conventions: `sawtooth` has period 2π and rises linearly from -1 to 1,
//! `square` has period 2π and takes the value 1 on the first half period and
//! -1 on the second. Each channel evaluates `amplitude * wave(freq * t + phase)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Sawtooth,
    Square,
    Sin,
    Cos,
    Constant,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub wave: Waveform,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

pub fn sawtooth(x: f64) -> f64 {
    -1.0 + x.rem_euclid(TAU) / PI
}

pub fn square(x: f64) -> f64 {
    if x.rem_euclid(TAU) < PI {
        1.0
    } else {
        -1.0
    }
}

impl Channel {
    pub fn new(wave: Waveform, amplitude: f64, freq: f64, phase: f64) -> Self {
        Self {
            wave,
            amplitude,
            freq,
            phase,
        }
    }

    pub fn zero() -> Self {
        Self::new(Waveform::Zero, 0.0, 1.0, 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let x = self.freq * t + self.phase;
        let w = match self.wave {
            Waveform::Sawtooth => sawtooth(x),
            Waveform::Square => square(x),
            Waveform::Sin => x.sin(),
            Waveform::Cos => x.cos(),
            Waveform::Constant => 1.0,
            Waveform::Zero => 0.0,
        };
        self.amplitude * w
    }

    /// Least upper bound of `|channel(t)|` over all t.
    pub fn sup_abs(&self) -> f64 {
        match self.wave {
            Waveform::Zero => 0.0,
            _ => self.amplitude.abs(),
        }
    }

    /// Jump discontinuity times inside `[t0, tf]`, increasing.
    pub fn jump_times(&self, t0: f64, tf: f64) -> Vec<f64> {
        // sawtooth jumps where the argument crosses 2πk, square also at π + 2πk
        let spacing = match self.wave {
            Waveform::Sawtooth => TAU,
            Waveform::Square => PI,
            _ => return Vec::new(),
        };
        if self.freq == 0.0 || self.amplitude == 0.0 {
            return Vec::new();
        }
        let (x0, x1) = {
            let a = self.freq * t0 + self.phase;
            let b = self.freq * tf + self.phase;
            (a.min(b), a.max(b))
        };
        let mut k = (x0 / spacing).ceil();
        let mut out = Vec::new();
        while k * spacing <= x1 {
            let t = (k * spacing - self.phase) / self.freq;
            if t >= t0 && t <= tf {
                out.push(t);
            }
            k += 1.0;
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }
}

/// A vector of independent channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorSignal {
    pub channels: Vec<Channel>,
}

impl VectorSignal {
    pub fn new(channels: Vec<Channel>) -> Self {
        Self { channels }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![Channel::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn eval(&self, t: f64) -> Vector {
        Vector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.eval(t)))
    }

    /// Upper bound on `sup_t ||w(t)||_2`, tight when every channel attains
    /// its peak simultaneously.
    pub fn sup_norm(&self) -> f64 {
        self.channels.iter().map(|c| c.sup_abs().powi(2)).sum::<f64>().sqrt()
    }
}
