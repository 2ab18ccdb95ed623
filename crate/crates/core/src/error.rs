use thiserror::Error;

/// Crate-wide error type. Variants map one-to-one onto the failure modes of
/// the parser, geometry stencils, path sampler, and spectral solvers.
#[derive(Debug, Error)]
pub enum MyersError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("domain error: `{op}` of {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("variable `{name}` is not defined on manifold `{manifold}`")]
    UnavailableVariable { name: String, manifold: String },
    #[error("metric is not positive definite at ({u}, {v}): min eigenvalue {min_eig:e}")]
    NonSpdMetric { u: f64, v: f64, min_eig: f64 },
    #[error("metric entry {entry} is not periodic: mismatch {diff:e} at {at}")]
    NonPeriodicMetric {
        entry: &'static str,
        at: String,
        diff: f64,
    },
    #[error("point ({u}, {v}) in chart {chart} too close to the chart boundary (margin {margin:e})")]
    ChartBoundary {
        chart: usize,
        u: f64,
        v: f64,
        margin: f64,
    },
    #[error("no chart contains the stepped point (chart {chart}, coords ({u}, {v}))")]
    StepOutOfAtlas { chart: usize, u: f64, v: f64 },
    #[error("{count} of {total} paths excluded ({percent:.4}%), above the 0.1% budget")]
    TooManyExcludedPaths {
        count: usize,
        total: usize,
        percent: f64,
    },
    #[error("mesh too coarse: node {node} has non-positive row weight {weight:e}")]
    MeshTooCoarse { node: usize, weight: f64 },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("criterion fails: lambda0 = {lambda0} is not below -1e-6, U1 diverges")]
    CriterionFails { lambda0: f64 },
    #[error("insufficient decay window: {found} samples in [{t0}, {t1}], need {need}")]
    InsufficientDecayWindow {
        found: usize,
        need: usize,
        t0: f64,
        t1: f64,
    },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl MyersError {
    /// Process exit code for the CLI: 1 config, 2 numerical, per the driver contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            MyersError::Syntax { .. }
            | MyersError::UnknownIdentifier { .. }
            | MyersError::UnavailableVariable { .. }
            | MyersError::Config { .. }
            | MyersError::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, MyersError>;
