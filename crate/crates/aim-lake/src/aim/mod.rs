//! Discrete Lyapunov–Perron construction of the approximate inertial manifolds `Φ_N`.

mod audit;
mod config;
mod evaluator;
mod toy;

pub use audit::*;
pub use config::*;
pub use evaluator::*;
pub use toy::*;
