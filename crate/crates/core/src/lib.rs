//! Energy-optimal distribution of a Map-Reduce computing task over heterogeneous
//! wireless devices that must finish before a hard deadline.
//!
//! Each device maps a share of the input with a tunable CPU frequency, uploads its
//! intermediate results over its own uplink, and runs a final Reduce step. The crate
//! provides the energy model, capacity and feasibility tests, the closed-form dual
//! subproblems with KKT residual checks, a certified convex solver, four baseline
//! schemes, and the Monte-Carlo harness behind the `mrfog` binary.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`). The aliases below
//! fix the scalar to `f64`, which the certified tolerances require.

pub mod energy;
pub mod error;
pub mod feasibility;
pub mod harness;
pub mod kkt;
pub mod model;
pub mod scalar;
pub mod schemes;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Real;
pub use schemes::{participation_fraction, scheme_feasible, scheme_lmax, solve_scheme, SchemeId};
pub use solver::{solve_opt, SolveStatus};

pub type DeviceParams = model::DeviceParams<f64>;
pub type SystemConfig = model::SystemConfig<f64>;
pub type Allocation = model::Allocation<f64>;
pub type Multipliers = model::Multipliers<f64>;
pub type EnergyBreakdown = model::EnergyBreakdown<f64>;
pub type Solution = solver::Solution<f64>;
pub type SolverOptions = solver::SolverOptions<f64>;

pub type DeviceParamsF32 = model::DeviceParams<f32>;
pub type SystemConfigF32 = model::SystemConfig<f32>;
