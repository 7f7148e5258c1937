//! Special functions used across the crate. Everything that can overflow at
//! blocklengths in the hundreds either works in log domain or returns a
//! [`SignedLogValue`].

mod gamma;
mod gaussian;
mod kummer;
mod laguerre;
mod signed_log;

pub use gamma::{gamma_p, log_double_factorial, log_gamma};
pub(crate) use gamma::lgamma;
pub use gaussian::{gaussian_q, log_gaussian_q, normal_cdf};
pub use kummer::{kummer_1f1, MAX_TERMS as KUMMER_MAX_TERMS};
pub use laguerre::laguerre_half;
pub use signed_log::{Sign, SignedLogValue};
