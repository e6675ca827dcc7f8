//! Numerical laboratory for multi-dimensional Bayesian sequential testing and
//! quickest detection of Wiener drifts.
//!
//! The posterior process `Π` of `n` independent hidden two-state chains lives
//! in the unit cube `[0,1]ⁿ`. For a penalty pair `(g, h)` the cost function
//!
//! ```text
//! V(π) = inf_τ E_π[ g(Π_τ) + ∫₀^τ h(Π_s) ds ]
//! ```
//!
//! solves the obstacle problem `min(LV + h, g − V) = 0`. This crate
//!
//! * builds the catalog penalties ([`catalog`]) and checks their standing
//!   assumptions ([`model`]),
//! * solves the obstacle problem on tensor grids ([`solver`]),
//! * simulates the hidden chain, observations and filters ([`sde`]),
//! * extracts stopping regions and verifies their geometry ([`regions`],
//!   [`suite`]).

pub mod catalog;
pub mod error;
pub mod io;
pub mod lattice;
pub mod model;
pub mod regions;
pub mod sde;
pub mod solver;
pub mod suite;

pub use catalog::{build_penalty, penalty_symmetries, CoordMap, OneDSolution, ProblemKind, ProblemSpec};
pub use error::{Error, Result};
pub use model::{check_assumption, validate_params, HypercubePoint, ModelParams, PenaltyPair};
pub use regions::{CheckReport, StoppingMask};
pub use solver::{build_grid, DiscreteGenerator, SolveReport, SolverOptions, TensorGrid, ValueField};
