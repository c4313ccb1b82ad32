// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod descriptor;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod multipliers;
pub mod nonlinearity;
pub mod observer;
pub mod pipeline;
pub mod plant;
pub mod reconstruction;
pub mod scenario;
pub mod sdp;
pub mod signal;
pub mod synthesis;

// force the BLAS/LAPACK symbols used by the SDP backend to be linked
extern crate openblas_src;

pub use error::{Error, Result};
