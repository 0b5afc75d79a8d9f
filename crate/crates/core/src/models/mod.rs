//! Concrete one-factor models.

pub mod bessel;
pub mod black_scholes;
pub mod density;
pub mod variance_gamma;

pub use black_scholes::{
    bs_call, bs_d2strike_put, bs_delta, bs_dstrike_put, bs_gamma, bs_gamma_d2vol, bs_gamma_dvol,
    bs_put, BlackScholesModel,
};
pub use density::{DensityTable, SamplingTable};
pub use variance_gamma::{VarianceGammaModel, VgParams};
