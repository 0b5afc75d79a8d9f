//! Withdrawal-guarantee contract terms.
//!
//! Money is in currency units and time in years. The asset starts at `S_0 = 1`, so the
//! fund-to-spot ratio `ζ_0` equals the initial capital.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Equidistant withdrawal calendar `T_1 < ... < T_N` with a fixed amount per date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    n_periods: usize,
    dt: f64,
    withdrawal: f64,
}

impl Schedule {
    pub fn new(n_periods: usize, dt: f64, withdrawal: f64) -> Result<Self> {
        if n_periods == 0 {
            return Err(Error::invalid("n_periods", "must be at least 1"));
        }
        ensure_positive("dt", dt)?;
        ensure_positive("withdrawal", withdrawal)?;
        Ok(Self {
            n_periods,
            dt,
            withdrawal,
        })
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn maturity(&self) -> f64 {
        self.n_periods as f64 * self.dt
    }

    pub fn withdrawal(&self) -> f64 {
        self.withdrawal
    }

    /// Annualized withdrawal rate `w / ΔT`.
    pub fn annualized_rate(&self) -> f64 {
        self.withdrawal / self.dt
    }

    /// Sum of all guaranteed withdrawals.
    pub fn total_withdrawals(&self) -> f64 {
        self.withdrawal * self.n_periods as f64
    }
}

/// Roll-up (ratchet) terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rollup {
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeSpec {
    schedule: Schedule,
    initial_capital: f64,
    rollup: Option<Rollup>,
}

impl GuaranteeSpec {
    pub fn new(schedule: Schedule, initial_capital: f64) -> Result<Self> {
        ensure_positive("initial_capital", initial_capital)?;
        Ok(Self {
            schedule,
            initial_capital,
            rollup: None,
        })
    }

    pub fn with_rollup(mut self, rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate <= -1.0 {
            return Err(Error::invalid(
                "rollup_rate",
                format!("must exceed -1, got {rate}"),
            ));
        }
        self.rollup = Some(Rollup { rate });
        for t in 0..self.schedule.n_periods {
            let a = self.guarantee_base(t)?;
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::invalid(
                    "rollup_rate",
                    format!("guarantee base A_{t} = {a} is not a positive finite number"),
                ));
            }
        }
        Ok(self)
    }

    /// Convenience constructor from raw contract terms.
    pub fn plain(n_periods: usize, dt: f64, withdrawal: f64, initial_capital: f64) -> Result<Self> {
        Self::new(Schedule::new(n_periods, dt, withdrawal)?, initial_capital)
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn n_periods(&self) -> usize {
        self.schedule.n_periods
    }

    pub fn withdrawal(&self) -> f64 {
        self.schedule.withdrawal
    }

    pub fn initial_capital(&self) -> f64 {
        self.initial_capital
    }

    pub fn rollup(&self) -> Option<Rollup> {
        self.rollup
    }

    /// Moneyness of the guarantee: total guaranteed withdrawals over initial capital.
    pub fn moneyness(&self) -> f64 {
        self.schedule.total_withdrawals() / self.initial_capital
    }

    /// Same contract with a different initial capital.
    pub fn with_initial_capital(&self, initial_capital: f64) -> Result<Self> {
        ensure_positive("initial_capital", initial_capital)?;
        Ok(Self {
            initial_capital,
            ..*self
        })
    }

    /// Guarantee base `A_t`; a contract without roll-up uses `r_R = 0`.
    pub fn guarantee_base(&self, t: usize) -> Result<f64> {
        let rate = self.rollup.map_or(0.0, |r| r.rate);
        guarantee_base(t, self.schedule.n_periods, rate)
    }

    /// `A_0, ..., A_N` with `A_N = ∞`.
    pub fn guarantee_bases(&self) -> Result<Vec<f64>> {
        (0..=self.schedule.n_periods)
            .map(|t| self.guarantee_base(t))
            .collect()
    }
}

/// `A_t = Σ_{u=t+1}^{N} (1 + r_R)^{-(u-t)}`, the value of the remaining unit withdrawals
/// discounted at the roll-up rate. `A_N` is `+∞` so that no roll-up happens at maturity.
pub fn guarantee_base(t: usize, n_periods: usize, rollup_rate: f64) -> Result<f64> {
    if !rollup_rate.is_finite() || rollup_rate <= -1.0 {
        return Err(Error::invalid(
            "rollup_rate",
            format!("must exceed -1, got {rollup_rate}"),
        ));
    }
    if t > n_periods {
        return Err(Error::invalid(
            "t",
            format!("{t} exceeds the number of periods {n_periods}"),
        ));
    }
    if t == n_periods {
        return Ok(f64::INFINITY);
    }
    let discount = 1.0 / (1.0 + rollup_rate);
    let mut factor = 1.0;
    let mut sum = 0.0;
    for _ in t + 1..=n_periods {
        factor *= discount;
        sum += factor;
    }
    Ok(sum)
}
