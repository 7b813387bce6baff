//! Riemann theta functions, Klein prime forms and Szegő kernels on the
//! Riemann sphere and on complex tori, together with numerical checks of
//! the identities these kernels satisfy.

pub mod algebra;
pub mod curves;
pub mod error;
pub mod expansions;
pub mod identities;
pub mod kernels;
pub mod sampling;
pub mod theta;

pub use error::{Error, Result};
