//! The one-factor pricing interface consumed by every pipeline.
//!
//! Period `t` is the interval `(T_t, T_{t+1}]`. `put(t, K, S)` is the value at `T_t` of a put
//! expiring at `T_{t+1}` when the asset trades at `S` at `T_t`.

use crate::error::{Error, Result};

pub trait OneFactorModel: Send + Sync {
    /// Short identifier used in reports.
    fn name(&self) -> &str;

    fn n_periods(&self) -> usize;

    /// Year fraction of period `t`.
    fn period_length(&self, t: usize) -> f64;

    /// One-period discount factor for period `t`.
    fn discount_factor(&self, _t: usize) -> f64 {
        1.0
    }

    fn put(&self, t: usize, strike: f64, spot: f64) -> f64;

    fn call(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.put(t, strike, spot) + spot - self.discount_factor(t) * strike
    }

    /// Spot derivative of the put.
    fn delta(&self, t: usize, strike: f64, spot: f64) -> f64;

    /// Second spot derivative of the put, `Γ_t(K|S)`.
    fn gamma(&self, t: usize, strike: f64, spot: f64) -> f64;

    fn dstrike_put(&self, t: usize, strike: f64, spot: f64) -> f64;

    fn d2strike_put(&self, t: usize, strike: f64, spot: f64) -> f64;

    /// Density of `ln(S_{t+1}/S_t)`.
    fn log_return_density(&self, t: usize, xi: f64) -> f64;

    fn log_return_cdf(&self, t: usize, xi: f64) -> f64;

    /// Interval outside of which the log-return density is below `1e-12`.
    fn log_return_range(&self, t: usize) -> (f64, f64);

    fn log_return_variance(&self, t: usize) -> f64;

    fn satisfies_a1(&self) -> bool {
        true
    }

    fn satisfies_a2(&self) -> bool;

    /// `Γ_{t0,t1}(K|S)` for the multi-period option from `T_{t0}` to `T_{t1}`, when available.
    fn composite_gamma(&self, _t0: usize, _t1: usize, _strike: f64, _spot: f64) -> Option<f64> {
        None
    }

    /// True when every period has a unit discount factor.
    fn zero_rates(&self) -> bool {
        (0..self.n_periods()).all(|t| self.discount_factor(t) == 1.0)
    }
}

pub(crate) fn require_a2(model: &dyn OneFactorModel, pipeline: &str) -> Result<()> {
    if model.satisfies_a2() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{pipeline} needs positively homogeneous option prices; model {} does not provide them",
            model.name()
        )))
    }
}

pub(crate) fn require_zero_rates(model: &dyn OneFactorModel, pipeline: &str) -> Result<()> {
    if model.zero_rates() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{pipeline} is implemented for zero interest rates only"
        )))
    }
}

pub(crate) fn require_periods(model: &dyn OneFactorModel, n_periods: usize) -> Result<()> {
    if model.n_periods() == n_periods {
        Ok(())
    } else {
        Err(Error::invalid(
            "model",
            format!(
                "model has {} periods, contract has {n_periods}",
                model.n_periods()
            ),
        ))
    }
}
