// `!(x > 0.0)` rejects NaN as well as nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod basis;
pub mod config;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod hamiltonian;
pub mod observables;
pub mod optimize;
pub mod oracle;
pub mod perturbative;
pub mod phonon;
pub mod seed;
pub mod simulate;
pub mod sparse;
pub mod validate;
