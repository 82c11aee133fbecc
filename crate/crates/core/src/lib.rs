//! Information-bottleneck and neural-collapse analysis of learned
//! representations.
//!
//! * [`repr_io`] loads and saves labelled feature matrices.
//! * [`synth`] generates simplex-ETF mixtures and linearly related pairs.
//! * [`gib`] solves the Gaussian information bottleneck in closed form.
//! * [`copula`] lifts it to arbitrary marginals through a Gaussian copula.
//! * [`identifiability`] measures how linearly related two representations are.
//! * [`nc_metrics`] computes neural-collapse geometry and classifier probes.
//! * [`info_oracle`] provides reference mutual-information values.

// `!(x > 0.0)` style guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copula;
pub mod error;
pub mod gib;
pub mod identifiability;
pub mod info_oracle;
pub mod linalg;
pub mod nc_metrics;
pub mod repr_io;
pub mod synth;

pub use error::{Error, Result};
pub use repr_io::RepresentationSet;
