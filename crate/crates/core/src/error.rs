use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-positive Jacobian determinant {det:.3e} at ({x:.4}, {y:.4}, {z:.4})")]
    NonPositiveJacobian { det: f64, x: f64, y: f64, z: f64 },

    #[error("inverse map did not converge after {iterations} iterations (residual {residual:.3e})")]
    InverseMapDiverged { iterations: usize, residual: f64 },

    #[error("collocation matrix is numerically singular")]
    SingularSystem,

    #[error("rigid mass matrix is not positive definite")]
    MassMatrixSingular,

    #[error("interior correction library cannot match the moments (residual {residual:.3e})")]
    CorrectionBasisDeficient { residual: f64 },

    #[error("inertia targets {targets:?} cannot be reached by a positive density")]
    InertiaTargetInfeasible { targets: [f64; 3] },

    #[error("base deformation is not centred: first moment {norm:.3e}")]
    BaseNotCentered { norm: f64 },

    #[error("closed-form bracket not available for pair ({i}, {j})")]
    Unsupported { i: usize, j: usize },

    #[error("configuration is not controllable: rank {rank} < {required}")]
    NotControllable { rank: usize, required: usize },

    #[error("tracking tolerance not met: sup error {sup_error:.3e}, endpoint error {endpoint_error:.3e}")]
    ToleranceNotMet {
        sup_error: f64,
        endpoint_error: f64,
        schedule: Box<crate::dynamics::ControlSchedule>,
    },

    #[error("integration failed at t = {time}: {source}")]
    IntegrationFailed {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
