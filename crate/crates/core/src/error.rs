use thiserror::Error;

/// Every failure the analysis pipeline can report.
///
/// The `Display` text starts with a stable kebab-case tag so that callers
/// (and the CLI) can match on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse-error: line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid-model: {0}")]
    InvalidModel(String),

    #[error("assumption-violated: {0}")]
    AssumptionViolated(String),

    #[error("trivial-problem: no transition from the transient states into good or bad")]
    TrivialProblem,

    #[error("degenerate-generator: the transient block has an all-zero diagonal")]
    DegenerateGenerator,

    #[error("empty-problem: good is unreachable from every target state")]
    EmptyProblem,

    #[error("schur-no-convergence: {0}")]
    SchurNoConvergence(String),

    #[error("perron-no-convergence: residual {residual:e} after {iterations} iterations")]
    PerronNoConvergence { iterations: usize, residual: f64 },

    #[error("certificate-invalid: {0}")]
    CertificateInvalid(String),

    #[error("not-a-bisimulation: block {block}, states {first} and {second} differ")]
    NotABisimulation {
        block: usize,
        first: usize,
        second: usize,
    },

    #[error("uniformization-step-underflow: step {step:e} below minimum {min_step:e} at t = {time}")]
    UniformizationStepUnderflow {
        step: f64,
        min_step: f64,
        time: f64,
    },

    #[error("oracle-overflow: matrix exponential is not finite")]
    OracleOverflow,

    #[error("dwell-too-short: tau = {tau} but log(mu)/kappa = {required}")]
    DwellTooShort { tau: f64, required: f64 },

    #[error("recursion-divergent: mu*g = {0} >= 1")]
    RecursionDivergent(f64),

    #[error("identity-M-infeasible: decision {decision}: {detail}")]
    IdentityMInfeasible { decision: usize, detail: String },

    #[error("tolerance-not-met: best bound {bound:e} exceeds {eps_max:e}")]
    ToleranceNotMet { bound: f64, eps_max: f64 },

    #[error("singular-matrix: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
