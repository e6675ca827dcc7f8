//! Obstacle-problem solver for the cost function on tensor grids.

mod field;
mod generator;
mod grid;
mod obstacle;
mod one_d;

pub use field::ValueField;
pub use generator::{discretize_generator, DiscreteGenerator};
pub use grid::{build_grid, TensorGrid};
pub use obstacle::{obstacle_residual, solve_obstacle, ObstacleSolution, SolveMethod, SolveReport, SolverOptions};
pub use one_d::{solve_1d_qd, solve_1d_qd_with, solve_1d_st, solve_1d_st_with};
