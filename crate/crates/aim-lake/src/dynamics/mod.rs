//! Time integration of the Galerkin system and empirical absorbing-set constants.

mod absorbing;
mod checkpoint;
mod convergence;
mod integrate;
mod model;

pub use absorbing::{
    cutoff_constants, estimate_absorbing, random_direction, random_state_h, rng_for, sample_attractor, AbsorbingEstimates,
    AbsorbingOptions, CutoffConstants,
};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use convergence::{energy_law_residual, richardson, self_convergence, SelfConvergence};
pub use integrate::{advance, integrate, ledger_row, step, IntegrateOptions, LedgerRow, TrajectoryRecord};
pub use model::{advection_theta, theta, GalerkinModel, LakeModel, PreparedNonlinearity};
