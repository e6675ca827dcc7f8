//! Stopping regions, their boundaries and the structural checks run on
//! solved fields.

mod boundary;
mod checks;
mod lower_bound;
mod mask;

pub use boundary::{extract_boundary, BoundaryCurve, Clip, Convention, Semicontinuity, Window};
pub use checks::{
    check_column_structure, check_containment, check_containment_with, check_lipschitz, check_monotone_shape, check_symmetry, check_unilateral_concavity, Anchor, CheckReport, Containment, Shape,
};
pub use lower_bound::{lower_bound_region, lower_bound_region_with, KINK_TOL};
pub use mask::StoppingMask;
