//! Physics-informed neural network solver for 1-D duct acoustics with an
//! axial mean-temperature gradient and mean flow.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`, which every driver in this workspace uses.

pub mod coefficients;
pub mod lbfgs;
pub mod medium;
pub mod network;
pub mod oracle;
pub mod pinn;
pub mod scalar;
pub mod velocity;

pub use coefficients::{
    angular_frequency, momentum_coeffs_at, validity_check, zeta_at, CoefficientError, MomentumCoefficients,
    ZetaCoefficients,
};
pub use medium::{
    alpha_at, beta_at, dmach_dx_at, mean_density, mean_pressure, sample, solve_mean_velocity, InletConditions,
    MeanFlow, MeanFlowSample, MediumError, ProfileKind, TemperatureProfile,
};
pub use lbfgs::{LbfgsConfig, LbfgsOutcome, Termination};
pub use network::{
    forward_jet, init_he, loss_and_param_gradient, Activation, JetObjective, NetworkArchitecture, NetworkError,
    NetworkJet, NetworkParameters,
};
pub use oracle::{
    amplitude, analytic_uniform, oracle_velocity, solve_bvp_shooting, FieldSolution, OracleError, PeakEnvelope,
    Provenance,
};
pub use pinn::{
    relative_error, residual_loss, train, trial_pressure, BoundaryData, CollocationSet, FrequencyCase, PinnError,
    TrainingConfig, TrainingReport,
};
pub use scalar::Real;
pub use velocity::{
    train_velocity_transfer, velocity_direct, velocity_direct_field, VelocityField, VelocityMethod, VelocityNetwork,
};

pub type TemperatureProfile64 = TemperatureProfile<f64>;
pub type InletConditions64 = InletConditions<f64>;
pub type MeanFlow64 = MeanFlow<f64>;
pub type MeanFlowSample64 = MeanFlowSample<f64>;
pub type ZetaCoefficients64 = ZetaCoefficients<f64>;
pub type MomentumCoefficients64 = MomentumCoefficients<f64>;
pub type NetworkParameters64 = NetworkParameters<f64>;
pub type BoundaryData64 = BoundaryData<f64>;
pub type CollocationSet64 = CollocationSet<f64>;
pub type FrequencyCase64 = FrequencyCase<f64>;
pub type FieldSolution64 = FieldSolution<f64>;
pub type VelocityField64 = VelocityField<f64>;
pub type VelocityNetwork64 = VelocityNetwork<f64>;
