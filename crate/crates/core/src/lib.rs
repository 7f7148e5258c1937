//! Sphere-packing lower bounds on the block error probability of optimal
//! codes over a RIS-aided cascaded Rician fading channel.
//!
//! The exact bound is a two-dimensional integral per channel realisation,
//! averaged over the cascade coefficient. The crate evaluates it directly
//! (the reference path) and through a chain of accelerations
//! (saddle-point radial integral, Gauss–Chebyshev angular rule, Gamma-fit
//! closed-form expectation, and an asymptotic form), each checked against
//! the reference.

pub mod bound;
pub mod channel;
pub mod cli;
pub mod codesim;
pub mod error;
pub mod quad;
pub mod reference_na;
pub mod spheregeom;
pub mod validate;
pub mod specfun;

pub use error::{Error, Result};
