use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{which} is rank deficient (rank {rank} < {expected} columns)")]
    RankDeficient {
        which: &'static str,
        rank: usize,
        expected: usize,
    },
    #[error("too few outputs: n_y = {n_y} < m_y = {m_y}")]
    TooFewOutputs { n_y: usize, m_y: usize },
    #[error("normal equations singular (condition number {cond:.3e})")]
    SingularNormalEquations { cond: f64 },

    #[error("constant must be positive, got {0}")]
    NonPositiveConstant(f64),
    #[error("matrix R must be symmetric")]
    AsymmetricR,
    #[error("multiplier matrix M must be symmetric")]
    AsymmetricM,
    #[error("vertex list is empty")]
    EmptyVertexList,
    #[error("multiplier dimension mismatch: expected {expected}x{expected}, got {got}x{got}")]
    MultiplierDimensionMismatch { expected: usize, got: usize },

    #[error("synthesis problem infeasible: {0}")]
    Infeasible(String),
    #[error("solver numerical failure: {0}")]
    NumericalFailure(String),
    #[error("P is not invertible (condition number {cond:.3e})")]
    PNotInvertible { cond: f64 },
    #[error("argument `{0}` must be positive")]
    NonPositiveArgument(&'static str),
    #[error("T1*G is rank deficient")]
    RankDeficientT1G,
    #[error("modulus of continuity returned a non-finite value")]
    NonFiniteModulus,

    #[error("non-finite state at t = {t}: {detail}")]
    NonFiniteState { t: f64, detail: String },
    #[error("implicit step failed to converge at t = {t}: {detail}")]
    IntegratorFailure { t: f64, detail: String },
    #[error("integration step too large: halving it changed terminal error by {rel_change:.1}%")]
    StepTooLarge { rel_change: f64 },
    #[error("trace is empty")]
    EmptyTrace,

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
    #[error("window width beta = {beta} is smaller than two grid steps ({step})")]
    BetaTooSmall { beta: f64, step: f64 },
    #[error("signal too short for window width")]
    SignalTooShort,
    #[error("trace carries no injection-term samples")]
    TraceLacksInjection,
    #[error("onset time T = {t} lies beyond the simulated span")]
    TBeyondSpan { t: f64 },
    #[error("discontinuities too close: gap {gap} must exceed 2*beta = {twice_beta}")]
    GapTooSmall { gap: f64, twice_beta: f64 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("unknown registry entry `{0}`")]
    UnknownRegistryName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit codes, one per error family.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const MODEL: i32 = 3;
    pub const SOLVER: i32 = 4;
    pub const SIMULATION: i32 = 5;
    pub const RECONSTRUCTION: i32 = 6;
    pub const IO: i32 = 7;
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            ConfigInvalid(_) | UnknownParameter(_) | UnknownRegistryName(_) | Json(_) => exit_code::CONFIG,
            // construction errors on the plant are reported as config errors
            DimensionMismatch(_) | RankDeficient { .. } | TooFewOutputs { .. } | SingularNormalEquations { .. } => {
                exit_code::CONFIG
            }
            Infeasible(_) => exit_code::INFEASIBLE,
            NonPositiveConstant(_)
            | AsymmetricR
            | AsymmetricM
            | EmptyVertexList
            | MultiplierDimensionMismatch { .. }
            | NonPositiveArgument(_)
            | RankDeficientT1G
            | NonFiniteModulus => exit_code::MODEL,
            NumericalFailure(_) | PNotInvertible { .. } => exit_code::SOLVER,
            NonFiniteState { .. } | IntegratorFailure { .. } | StepTooLarge { .. } | EmptyTrace => {
                exit_code::SIMULATION
            }
            UnknownKernel(_)
            | BetaTooSmall { .. }
            | SignalTooShort
            | TraceLacksInjection
            | TBeyondSpan { .. }
            | GapTooSmall { .. } => exit_code::RECONSTRUCTION,
            Io(_) | Csv(_) => exit_code::IO,
        }
    }
}
