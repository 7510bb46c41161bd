// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic_dists;
pub mod censoring_selection;
pub mod chirality;
pub mod cli;
pub mod densities;
pub mod error;
pub mod fokker_planck;
pub mod ou_skew;
pub mod quad;
pub mod sde_engine;
pub mod skew_family;
pub mod validation;

pub use chirality::Chirality;
pub use error::{Result, SkewError};
