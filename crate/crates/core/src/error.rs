use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("Euler kinematics singular: |c²ψ·cφ + s²ψ| = {denominator:e} is below the guard")]
    EulerSingularity { denominator: f64 },
    #[error("integration step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("integration exceeded {steps} steps at t = {t}")]
    TooManySteps { t: f64, steps: usize },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("integration interval must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("B_d entry ({row}, {col}) = {value:e} lies outside the sparsity template")]
    TemplateViolation { row: usize, col: usize, value: f64 },
    #[error("state matrix is not nilpotent of index four (A⁴ has entry {0:e})")]
    NotNilpotent(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlsError {
    #[error("covariance lost positive definiteness (min eigenvalue {min_eigenvalue:e}, asymmetry {asymmetry:e})")]
    CovarianceNotPositiveDefinite { min_eigenvalue: f64, asymmetry: f64 },
    #[error("innovation matrix is not invertible")]
    SingularInnovation,
    #[error("invalid forgetting configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Hessian is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("problem is unbounded below")]
    Unbounded,
    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("QP solver stopped with status {status:?} after {iterations} iterations (KKT residual {kkt_residual:e})")]
    SolverFault {
        status: crate::qp::QpStatus,
        iterations: usize,
        kkt_residual: f64,
    },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Cause of an aborted closed-loop run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimFault {
    #[error("plant: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("identification: {0}")]
    Identification(#[from] RlsError),
    #[error("controller: {0}")]
    Control(#[from] ControlError),
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {message}")]
    Write {
        path: std::path::PathBuf,
        message: String,
    },
    #[error("cannot read {path}: {message}")]
    Read {
        path: std::path::PathBuf,
        message: String,
    },
}
