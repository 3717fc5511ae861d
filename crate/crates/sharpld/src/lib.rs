//! Sharp large-deviation approximations for the loss of a threshold factor
//! credit portfolio, with Monte Carlo oracles, Gibbs-conditioning
//! diagnostics and second-order VaR / ES.

pub mod cgfcore;
pub mod config;
pub mod dist;
pub mod gibbs;
pub mod mc;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod risk;
pub mod saddle;
pub mod sharp;
