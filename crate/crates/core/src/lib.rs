//! Exact desk-scale laboratory for transfer-operator PEPS states and their
//! continuum limit.
//!
//! The crate builds discrete transfer-operator states exactly on small
//! lattices ([`fock`]), contracts the same networks as Grassmann path
//! integrals ([`oracle`]), and checks the analytic structure around them:
//! the hopping-kernel spectrum ([`spectrum`]), the Clifford-algebra
//! continuation between Lorentz and Euclidean signature ([`clifford`],
//! [`action`]), entanglement bounds ([`entanglement`]) and the square-lattice
//! construction ([`square`]). One-dimensional cMPS live in [`cmps`].

// NaN-rejecting guards read as `!(x > 0.0)`; index loops mirror the formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod action;
pub mod cli;
pub mod clifford;
pub mod cmps;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod grassmann;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod spectrum;
pub mod square;
pub mod statefile;

pub use error::{Budget, Error, Result};
pub use model::{BoundaryCondition, CouplingFields, LatticeSpec, ModeIndex, ModelSpec, Species};
