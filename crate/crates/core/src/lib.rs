//! Pricing and semi-static hedging of withdrawal guarantees on a fund.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod contract;
pub mod error;
pub mod fund;
pub mod hedge;
pub mod mc;
pub mod model;
pub mod models;
pub mod quad;
pub mod rollup;
pub mod sensitivities;
pub mod weights;

pub use adjoint::{
    dual_put_weights, gamma_kernel_checks, price_via_adjoint, put_on_contribution_fund_via_adjoint,
    put_on_contribution_fund_via_weights, sample_adjoint_fund, self_adjointness_error,
    AdjointModel,
};
pub use contract::{guarantee_base, GuaranteeSpec, Rollup, Schedule};
pub use error::{Error, Result};
pub use fund::{claim_amount, depletion_time, step_contribution_fund, step_fund, FundState};
pub use hedge::{HedgeLeg, HedgePortfolio, LegType};
pub use mc::{mc_guarantee_value, McConfig, PricingResult};
pub use model::OneFactorModel;
pub use models::{BlackScholesModel, VarianceGammaModel, VgParams};
pub use rollup::{
    build_rollup_coefficients, mc_rollup_guarantee, RollupCoefficients, RollupConfig,
};
pub use sensitivities::{
    net_volga_after_varswap_hedge, volga_by_moneyness, GreekMethod, SensitivityConfig, VolgaReport,
};
pub use weights::{
    backward_markov_value, build_weights, MarkovConfig, WeightConfig, WeightCurve, WeightSet,
};
