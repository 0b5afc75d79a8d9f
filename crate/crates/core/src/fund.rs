//! Withdrawal and multi-contribution fund dynamics and the guarantee claims they generate.

use crate::error::{ensure_positive, Error, Result};

/// Fund state right after the withdrawal at date `T_period`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundState {
    pub period: usize,
    /// `X_t`; keeps propagating arithmetically (and may go negative) after depletion.
    pub fund_value: f64,
    pub spot: f64,
    /// `ζ_t = X_t / S_t`.
    pub zeta: f64,
    /// Set once `X_u ≤ 0` for some `u ≤ period`; never cleared.
    pub depleted: bool,
}

impl FundState {
    /// State at `T_0` with `S_0 = 1`.
    pub fn initial(initial_capital: f64) -> Result<Self> {
        ensure_positive("initial_capital", initial_capital)?;
        Ok(Self {
            period: 0,
            fund_value: initial_capital,
            spot: 1.0,
            zeta: initial_capital,
            depleted: false,
        })
    }

    /// Fund value before the withdrawal, `X_{t-} = X_t + w`.
    pub fn before_withdrawal(&self, withdrawal: f64) -> f64 {
        self.fund_value + withdrawal
    }
}

/// One period of `X_{t+1} = X_t · S_{t+1}/S_t − w`.
pub fn step_fund(state: FundState, gross_return: f64, withdrawal: f64) -> Result<FundState> {
    ensure_positive("gross_return", gross_return)?;
    let spot = state.spot * gross_return;
    let fund_value = state.fund_value * gross_return - withdrawal;
    Ok(FundState {
        period: state.period + 1,
        fund_value,
        spot,
        zeta: state.zeta - withdrawal / spot,
        depleted: state.depleted || fund_value <= 0.0,
    })
}

/// Path of fund values `X_1..X_N` and the depletion time `τ = inf{t : X_t ≤ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepletionPath {
    pub tau: Option<usize>,
    /// `X_0, X_1, ..., X_N`.
    pub fund_values: Vec<f64>,
}

pub fn depletion_time(
    initial_capital: f64,
    gross_returns: &[f64],
    withdrawal: f64,
) -> Result<DepletionPath> {
    if gross_returns.is_empty() {
        return Err(Error::invalid("gross_returns", "empty return sequence"));
    }
    let mut state = FundState::initial(initial_capital)?;
    let mut tau = None;
    let mut fund_values = Vec::with_capacity(gross_returns.len() + 1);
    fund_values.push(initial_capital);
    for &r in gross_returns {
        state = step_fund(state, r, withdrawal)?;
        if tau.is_none() && state.depleted {
            tau = Some(state.period);
        }
        fund_values.push(state.fund_value);
    }
    Ok(DepletionPath { tau, fund_values })
}

/// Closed form `X_t = S_t (X_0 − w Σ_{u=1}^t 1/S_u)` for all `t`, given `S_u` from the returns.
pub fn fund_values_closed_form(
    initial_capital: f64,
    gross_returns: &[f64],
    withdrawal: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(gross_returns.len() + 1);
    out.push(initial_capital);
    let mut spot = 1.0;
    let mut harmonic = 0.0;
    for &r in gross_returns {
        spot *= r;
        harmonic += 1.0 / spot;
        out.push(spot * (initial_capital - withdrawal * harmonic));
    }
    out
}

/// Claim `Z^(t) = w·1{τ ≤ t−1} + X_t^−·1{τ = t}`; `Z^(0) = 0`.
pub fn claim_amount(t: usize, tau: Option<usize>, fund_value_at_t: f64, withdrawal: f64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    match tau {
        Some(tau) if tau < t => withdrawal,
        Some(tau) if tau == t => (-fund_value_at_t).max(0.0),
        _ => 0.0,
    }
}

/// Total claims `w (N − τ)^+ + X_τ^− 1{τ ≤ N}` of a path.
pub fn total_claims(path: &DepletionPath, withdrawal: f64) -> f64 {
    let n = path.fund_values.len() - 1;
    match path.tau {
        Some(tau) if tau <= n => withdrawal * (n - tau) as f64 + (-path.fund_values[tau]).max(0.0),
        _ => 0.0,
    }
}

/// One period of the multi-contribution fund, `Y_{t+1} = Y_t · S̃_{t+1}/S̃_t + p`.
pub fn step_contribution_fund(
    fund_value: f64,
    gross_return: f64,
    contribution: f64,
) -> Result<f64> {
    ensure_positive("gross_return", gross_return)?;
    if !(fund_value >= contribution) {
        return Err(Error::invalid(
            "fund_value",
            format!("contribution fund {fund_value} is below the contribution {contribution}"),
        ));
    }
    Ok(fund_value * gross_return + contribution)
}

/// Closed form `Y_t = p S̃_t Σ_{u=0}^t 1/S̃_u` for `t = 0..=len`, with `S̃_0 = 1`.
pub fn contribution_fund_closed_form(contribution: f64, gross_returns: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(gross_returns.len() + 1);
    let mut spot = 1.0;
    let mut harmonic = 1.0;
    out.push(contribution);
    for &r in gross_returns {
        spot *= r;
        harmonic += 1.0 / spot;
        out.push(contribution * spot * harmonic);
    }
    out
}
