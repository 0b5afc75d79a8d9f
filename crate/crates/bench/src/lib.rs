//! Shared fixtures for the benchmarks.

use gmwb_core::{BlackScholesModel, GuaranteeSpec, VarianceGammaModel, VgParams};

/// Black-Scholes with a flat annual vol over `n` yearly periods.
pub fn black_scholes(vol: f64, n: usize) -> BlackScholesModel {
    BlackScholesModel::constant(vol, 1.0, n).expect("valid fixture")
}

/// Variance gamma with the parameters used throughout the tests.
pub fn variance_gamma(dt: f64, n: usize) -> VarianceGammaModel {
    let params = VgParams::new(0.1213, 0.1686, -0.1436).expect("valid fixture");
    VarianceGammaModel::new(params, dt, n).expect("valid fixture")
}

/// At-the-money plain guarantee with `w = 10`.
pub fn atm_spec(n: usize) -> GuaranteeSpec {
    GuaranteeSpec::plain(n, 1.0, 10.0, 10.0 * n as f64).expect("valid fixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use gmwb_core::OneFactorModel;

    #[test]
    fn fixtures_build() {
        assert_eq!(black_scholes(0.3, 5).n_periods(), 5);
        assert_eq!(variance_gamma(0.25, 4).n_periods(), 4);
        assert_eq!(atm_spec(5).initial_capital(), 50.0);
    }
}
