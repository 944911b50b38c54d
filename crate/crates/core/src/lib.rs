//! Discrete model of the linear thermo-piezo-electro-magnetic system
//! `(∂₀M₀ + M₁ + A)U = F` on box grids.
//!
//! The crate builds the material operators `M₀`, `M₁` from constitutive
//! coefficients, the skew spatial operator `A` from boundary-conditioned
//! difference stencils, certifies the positivity condition
//! `νM₀ + Re M₁ ≫ 0`, integrates the system with a θ-method while logging the
//! discrete energy balance, and implements the quasi-electrostatic reduction.

// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficient;
pub mod error;
pub mod evolution;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod material;
pub mod operators;
pub mod quasistatic;
pub mod solver;
pub mod sparse;
pub mod voigt;
pub mod wellposedness;

pub use coefficient::{gaussian_convolution_block, BlockKind, CoefficientBlock};
pub use error::{Error, Result};
pub use field::{Field, FieldKind, Slot, StateLayout, StateVector};
pub use grid::{make_grid, Grid};
pub use material::{
    assemble_m0, assemble_m0_piezomagnetic, assemble_m1, invert_constitutive, AssembledOperators,
    InvertedLaw, MaterialBlocks, MaterialConfig,
};
pub use solver::{solve_linear, SolverMethod};
pub use sparse::{LinearOperator, SparseOperator, TripletBuilder};
pub use voigt::{voigt_decode, voigt_encode};
