#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Finite-matrix realizations of pseudosupersymmetric quantum mechanics and
//! numerical certification of their defining relations.

pub mod fock;
pub mod grid;
pub mod linalg;
pub mod realizations;
pub mod spectra;
pub mod superpotential;
pub mod verify;
