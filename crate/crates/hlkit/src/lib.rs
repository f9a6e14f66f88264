//! Circle-method toolkit for diagonal systems in prime variables.
//!
//! The crate evaluates every finite object in the standard major/minor
//! arc analysis of Σ_i u_ij p_i^{k_j} = 0: prime-weighted exponential
//! sums and their bilinear decomposition, Dirichlet characters and
//! complete sums, the arc dissection, local solution densities with the
//! singular series, oscillatory integrals with the normalized singular
//! integral, exact mean-value and solution counts, and an experiment
//! pipeline comparing measured counts against the predicted main term
//! S · c_J · P^{s-K}.

pub mod arith;
pub mod arcs;
pub mod counting;
pub mod error;
pub mod expsums;
pub mod localdata;
pub mod meanvalue;
pub mod oscint;
pub mod report;
pub mod sysmodel;

pub use error::{Error, Result};
