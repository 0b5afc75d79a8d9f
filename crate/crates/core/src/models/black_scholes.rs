use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::model::OneFactorModel;
use crate::quad::{norm_cdf, norm_pdf};

/// Black-Scholes with deterministic per-period volatilities and an optional flat rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackScholesModel {
    vols: Vec<f64>,
    dt: f64,
    rate: f64,
}

impl BlackScholesModel {
    pub fn new(vols: Vec<f64>, dt: f64) -> Result<Self> {
        if vols.is_empty() {
            return Err(Error::invalid("vols", "need at least one period"));
        }
        for &v in &vols {
            ensure_positive("vol", v)?;
        }
        ensure_positive("dt", dt)?;
        Ok(Self {
            vols,
            dt,
            rate: 0.0,
        })
    }

    pub fn constant(vol: f64, dt: f64, n_periods: usize) -> Result<Self> {
        Self::new(vec![vol; n_periods], dt)
    }

    pub fn with_rate(mut self, rate: f64) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::invalid(
                "rate",
                format!("must be finite, got {rate}"),
            ));
        }
        self.rate = rate;
        Ok(self)
    }

    pub fn vols(&self) -> &[f64] {
        &self.vols
    }

    pub fn vol(&self, t: usize) -> f64 {
        self.vols[t]
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Same model with `Σ_t` replaced.
    pub fn bumped(&self, t: usize, vol: f64) -> Result<Self> {
        ensure_positive("vol", vol)?;
        let mut out = self.clone();
        out.vols[t] = vol;
        Ok(out)
    }

    pub fn total_vol(&self, t: usize) -> f64 {
        self.vols[t] * self.dt.sqrt()
    }

    fn quote(&self, t: usize) -> Quote {
        Quote {
            v: self.total_vol(t),
            rdt: self.rate * self.dt,
        }
    }
}

/// Total volatility and the per-period rate `r·ΔT`.
#[derive(Debug, Clone, Copy)]
struct Quote {
    v: f64,
    rdt: f64,
}

impl Quote {
    fn df(&self) -> f64 {
        (-self.rdt).exp()
    }

    fn d1d2(&self, strike: f64, spot: f64) -> (f64, f64) {
        let d1 = ((spot / strike).ln() + self.rdt) / self.v + 0.5 * self.v;
        (d1, d1 - self.v)
    }

    fn put(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 {
            return 0.0;
        }
        if spot <= 0.0 {
            return self.df() * strike;
        }
        let (d1, d2) = self.d1d2(strike, spot);
        (self.df() * strike * norm_cdf(-d2) - spot * norm_cdf(-d1)).max(0.0)
    }

    fn delta(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 {
            return 0.0;
        }
        if spot <= 0.0 {
            return -1.0;
        }
        let (d1, _) = self.d1d2(strike, spot);
        -norm_cdf(-d1)
    }

    fn gamma(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 || spot <= 0.0 {
            return 0.0;
        }
        let (d1, _) = self.d1d2(strike, spot);
        norm_pdf(d1) / (spot * self.v)
    }

    fn dstrike(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 {
            return 0.0;
        }
        if spot <= 0.0 {
            return self.df();
        }
        let (_, d2) = self.d1d2(strike, spot);
        self.df() * norm_cdf(-d2)
    }

    fn d2strike(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 || spot <= 0.0 {
            return 0.0;
        }
        let (_, d2) = self.d1d2(strike, spot);
        self.df() * norm_pdf(d2) / (strike * self.v)
    }
}

fn zero_rate(total_vol: f64) -> Result<Quote> {
    ensure_positive("total_vol", total_vol)?;
    Ok(Quote {
        v: total_vol,
        rdt: 0.0,
    })
}

fn check_inputs(strike: f64, spot: f64) -> Result<()> {
    if !(strike >= 0.0) || !strike.is_finite() {
        return Err(Error::invalid(
            "strike",
            format!("must be finite and >= 0, got {strike}"),
        ));
    }
    ensure_positive("spot", spot)
}

/// Zero-rate Black-Scholes put with total volatility `Σ√Δt`.
pub fn bs_put(strike: f64, spot: f64, total_vol: f64) -> Result<f64> {
    check_inputs(strike, spot)?;
    Ok(zero_rate(total_vol)?.put(strike, spot))
}

pub fn bs_call(strike: f64, spot: f64, total_vol: f64) -> Result<f64> {
    Ok(bs_put(strike, spot, total_vol)? + spot - strike)
}

/// Put delta.
pub fn bs_delta(strike: f64, spot: f64, total_vol: f64) -> Result<f64> {
    check_inputs(strike, spot)?;
    Ok(zero_rate(total_vol)?.delta(strike, spot))
}

pub fn bs_gamma(strike: f64, spot: f64, total_vol: f64) -> Result<f64> {
    check_inputs(strike, spot)?;
    Ok(zero_rate(total_vol)?.gamma(strike, spot))
}

pub fn bs_dstrike_put(strike: f64, spot: f64, total_vol: f64) -> Result<f64> {
    check_inputs(strike, spot)?;
    Ok(zero_rate(total_vol)?.dstrike(strike, spot))
}

pub fn bs_d2strike_put(strike: f64, spot: f64, total_vol: f64) -> Result<f64> {
    check_inputs(strike, spot)?;
    Ok(zero_rate(total_vol)?.d2strike(strike, spot))
}

/// `∂_Σ Γ = (d1 d2 − 1) Γ / Σ` with `Σ` annualized.
pub fn bs_gamma_dvol(strike: f64, spot: f64, vol: f64, dt: f64) -> Result<f64> {
    ensure_positive("dt", dt)?;
    let q = zero_rate(vol * dt.sqrt())?;
    check_inputs(strike, spot)?;
    Ok(gamma_dvol(&q, strike, spot, vol))
}

/// `∂²_Σ Γ = [2 + (d1 d2)² − 3 d1 d2 − d1² − d2²] Γ / Σ²`.
pub fn bs_gamma_d2vol(strike: f64, spot: f64, vol: f64, dt: f64) -> Result<f64> {
    ensure_positive("dt", dt)?;
    let q = zero_rate(vol * dt.sqrt())?;
    check_inputs(strike, spot)?;
    Ok(gamma_d2vol(&q, strike, spot, vol))
}

fn gamma_dvol(q: &Quote, strike: f64, spot: f64, vol: f64) -> f64 {
    if strike <= 0.0 || spot <= 0.0 {
        return 0.0;
    }
    let (d1, d2) = q.d1d2(strike, spot);
    (d1 * d2 - 1.0) * q.gamma(strike, spot) / vol
}

fn gamma_d2vol(q: &Quote, strike: f64, spot: f64, vol: f64) -> f64 {
    if strike <= 0.0 || spot <= 0.0 {
        return 0.0;
    }
    let (d1, d2) = q.d1d2(strike, spot);
    let p = d1 * d2;
    (2.0 + p * p - 3.0 * p - d1 * d1 - d2 * d2) * q.gamma(strike, spot) / (vol * vol)
}

impl BlackScholesModel {
    /// `∂_{Σ_t} Γ_t(K|S)`.
    pub fn gamma_dvol(&self, t: usize, strike: f64, spot: f64) -> f64 {
        gamma_dvol(&self.quote(t), strike, spot, self.vols[t])
    }

    /// `∂²_{Σ_t} Γ_t(K|S)`.
    pub fn gamma_d2vol(&self, t: usize, strike: f64, spot: f64) -> f64 {
        gamma_d2vol(&self.quote(t), strike, spot, self.vols[t])
    }
}

impl OneFactorModel for BlackScholesModel {
    fn name(&self) -> &str {
        "black_scholes"
    }

    fn n_periods(&self) -> usize {
        self.vols.len()
    }

    fn period_length(&self, _t: usize) -> f64 {
        self.dt
    }

    fn discount_factor(&self, _t: usize) -> f64 {
        (-self.rate * self.dt).exp()
    }

    fn put(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.quote(t).put(strike, spot)
    }

    fn delta(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.quote(t).delta(strike, spot)
    }

    fn gamma(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.quote(t).gamma(strike, spot)
    }

    fn dstrike_put(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.quote(t).dstrike(strike, spot)
    }

    fn d2strike_put(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.quote(t).d2strike(strike, spot)
    }

    fn log_return_density(&self, t: usize, xi: f64) -> f64 {
        let q = self.quote(t);
        norm_pdf((xi - q.rdt + 0.5 * q.v * q.v) / q.v) / q.v
    }

    fn log_return_cdf(&self, t: usize, xi: f64) -> f64 {
        let q = self.quote(t);
        norm_cdf((xi - q.rdt + 0.5 * q.v * q.v) / q.v)
    }

    fn log_return_range(&self, t: usize) -> (f64, f64) {
        let q = self.quote(t);
        // n(z)/v < 1e-12 beyond |z| ≈ 7.4 + ln(1/v)
        let z = (2.0 * (1e12 * crate::quad::norm_pdf(0.0) / q.v).ln()).sqrt();
        let m = q.rdt - 0.5 * q.v * q.v;
        (m - z * q.v, m + z * q.v)
    }

    fn log_return_variance(&self, t: usize) -> f64 {
        let v = self.total_vol(t);
        v * v
    }

    fn satisfies_a2(&self) -> bool {
        true
    }

    fn composite_gamma(&self, t0: usize, t1: usize, strike: f64, spot: f64) -> Option<f64> {
        if t0 >= t1 || t1 > self.vols.len() {
            return None;
        }
        let var: f64 = (t0..t1).map(|t| self.total_vol(t).powi(2)).sum();
        let q = Quote {
            v: var.sqrt(),
            rdt: self.rate * self.dt * (t1 - t0) as f64,
        };
        Some(q.gamma(strike, spot))
    }
}
