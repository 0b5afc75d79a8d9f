use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::bessel::ln_bessel_k;
use super::density::{DensityTable, DEFAULT_TABLE_NODES};
use crate::error::{ensure_positive, Error, Result};
use crate::model::OneFactorModel;
use crate::quad::adaptive_simpson;

/// Variance-gamma parameters: Brownian volatility `σ`, variance rate `ν` of the gamma clock
/// and drift `θ` of the time-changed Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgParams {
    pub sigma: f64,
    pub nu: f64,
    pub theta: f64,
}

impl VgParams {
    pub fn new(sigma: f64, nu: f64, theta: f64) -> Result<Self> {
        ensure_positive("sigma", sigma)?;
        ensure_positive("nu", nu)?;
        if !theta.is_finite() {
            return Err(Error::invalid(
                "theta",
                format!("must be finite, got {theta}"),
            ));
        }
        let p = Self { sigma, nu, theta };
        if !(p.compensator_base() > 0.0) {
            return Err(Error::invalid(
                "theta",
                format!(
                    "1 − θν − σ²ν/2 = {} must be positive for the exponential moment to exist",
                    p.compensator_base()
                ),
            ));
        }
        Ok(p)
    }

    fn compensator_base(&self) -> f64 {
        1.0 - self.theta * self.nu - 0.5 * self.sigma * self.sigma * self.nu
    }

    /// Annual drift `ω = ln(1 − θν − σ²ν/2)/ν` that makes `e^ξ` a martingale.
    pub fn martingale_drift(&self) -> f64 {
        self.compensator_base().ln() / self.nu
    }

    /// Mean, variance and third central moment of the log return over `dt`.
    pub fn cumulants(&self, dt: f64) -> (f64, f64, f64) {
        let (s, n, th) = (self.sigma, self.nu, self.theta);
        (
            (self.martingale_drift() + th) * dt,
            (s * s + n * th * th) * dt,
            (2.0 * th.powi(3) * n * n + 3.0 * s * s * th * n) * dt,
        )
    }

    /// Density of the martingale-corrected log return over `dt` years.
    pub fn log_return_density(&self, xi: f64, dt: f64) -> f64 {
        let (s, n, th) = (self.sigma, self.nu, self.theta);
        let x = xi - self.martingale_drift() * dt;
        let shape = dt / n;
        let order = shape - 0.5;
        let c = 2.0 * s * s / n + th * th;
        let head = std::f64::consts::LN_2 + th * x / (s * s)
            - shape * n.ln()
            - 0.5 * (2.0 * std::f64::consts::PI).ln()
            - s.ln()
            - ln_gamma(shape);
        let tail = if x.abs() < 1e-14 {
            if order <= 0.0 {
                return f64::INFINITY;
            }
            // (x²/c)^{order/2} K_order(z) → Γ(order)/2 · (2σ²/c)^order as x → 0
            ln_gamma(order) - std::f64::consts::LN_2 + order * (2.0 * s * s / c).ln()
        } else {
            let z = x.abs() * c.sqrt() / (s * s);
            0.5 * order * (x * x / c).ln() + ln_bessel_k(order, z)
        };
        (head + tail).exp()
    }
}

#[derive(Debug, Clone)]
pub struct VarianceGammaModel {
    params: VgParams,
    dt: f64,
    n_periods: usize,
    table: Arc<DensityTable>,
}

impl VarianceGammaModel {
    /// Stationary model with `n_periods` periods of `dt` years each.
    ///
    /// Requires `dt/ν > 1/2`, which keeps the period density bounded.
    pub fn new(params: VgParams, dt: f64, n_periods: usize) -> Result<Self> {
        ensure_positive("dt", dt)?;
        if n_periods == 0 {
            return Err(Error::invalid("n_periods", "must be at least 1"));
        }
        if dt / params.nu <= 0.5 {
            return Err(Error::invalid(
                "nu",
                format!(
                    "dt/nu = {} must exceed 1/2; the period density is unbounded otherwise",
                    dt / params.nu
                ),
            ));
        }
        let (mean, var, _) = params.cumulants(dt);
        let table = DensityTable::build(
            |x| params.log_return_density(x, dt),
            mean,
            var.sqrt(),
            DEFAULT_TABLE_NODES,
        )?;
        if (table.mass() - 1.0).abs() > 1e-6 {
            return Err(Error::tolerance(
                "vg density mass",
                format!("dt={dt}"),
                table.mass() - 1.0,
                1e-6,
            ));
        }
        if (table.exp_mass() - 1.0).abs() > 1e-6 {
            return Err(Error::tolerance(
                "vg martingale condition",
                format!("dt={dt}"),
                table.exp_mass() - 1.0,
                1e-6,
            ));
        }
        Ok(Self {
            params,
            dt,
            n_periods,
            table: Arc::new(table),
        })
    }

    pub fn params(&self) -> VgParams {
        self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn table(&self) -> &DensityTable {
        &self.table
    }

    /// Put by adaptive Simpson on `∫(K − S e^ξ)^+ q(ξ) dξ` with the exact density; returns the
    /// value and the quadrature's error estimate.
    pub fn put_by_quadrature(&self, strike: f64, spot: f64, tol: f64) -> Result<(f64, f64)> {
        ensure_positive("spot", spot)?;
        if !(strike >= 0.0) {
            return Err(Error::invalid(
                "strike",
                format!("must be >= 0, got {strike}"),
            ));
        }
        if strike == 0.0 {
            return Ok((0.0, 0.0));
        }
        let (lo, _) = self.table.support();
        let y = (strike / spot).ln();
        if y <= lo {
            return Ok((0.0, 0.0));
        }
        let f = |xi: f64| (strike - spot * xi.exp()) * self.params.log_return_density(xi, self.dt);
        // split at the cusp of the density
        let cusp = self.params.martingale_drift() * self.dt;
        let mut value = 0.0;
        let mut err = 0.0;
        let mut a = lo;
        for b in [cusp, y] {
            let b = b.min(y);
            if b > a {
                let (v, e) = adaptive_simpson(&f, a, b, 0.5 * tol, 40)?;
                value += v;
                err += e;
                a = b;
            }
        }
        Ok((value, err))
    }
}

impl OneFactorModel for VarianceGammaModel {
    fn name(&self) -> &str {
        "variance_gamma"
    }

    fn n_periods(&self) -> usize {
        self.n_periods
    }

    fn period_length(&self, _t: usize) -> f64 {
        self.dt
    }

    fn put(&self, _t: usize, strike: f64, spot: f64) -> f64 {
        self.table.put(strike, spot)
    }

    fn delta(&self, _t: usize, strike: f64, spot: f64) -> f64 {
        self.table.delta(strike, spot)
    }

    fn gamma(&self, _t: usize, strike: f64, spot: f64) -> f64 {
        self.table.gamma(strike, spot)
    }

    fn dstrike_put(&self, _t: usize, strike: f64, spot: f64) -> f64 {
        self.table.dstrike_put(strike, spot)
    }

    fn d2strike_put(&self, _t: usize, strike: f64, spot: f64) -> f64 {
        self.table.d2strike_put(strike, spot)
    }

    fn log_return_density(&self, _t: usize, xi: f64) -> f64 {
        self.params.log_return_density(xi, self.dt)
    }

    fn log_return_cdf(&self, _t: usize, xi: f64) -> f64 {
        self.table.cdf(xi)
    }

    fn log_return_range(&self, _t: usize) -> (f64, f64) {
        self.table.support()
    }

    fn log_return_variance(&self, _t: usize) -> f64 {
        self.params.cumulants(self.dt).1
    }

    fn satisfies_a2(&self) -> bool {
        true
    }

    fn composite_gamma(&self, t0: usize, t1: usize, strike: f64, spot: f64) -> Option<f64> {
        if t0 >= t1 || t1 > self.n_periods || strike <= 0.0 || spot <= 0.0 {
            return None;
        }
        let dt = self.dt * (t1 - t0) as f64;
        Some(strike / (spot * spot) * self.params.log_return_density((strike / spot).ln(), dt))
    }
}
