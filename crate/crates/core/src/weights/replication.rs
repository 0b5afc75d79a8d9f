//! Payout of an expired put strip and the self-financing identity it satisfies.

use serde::Serialize;

use super::curve::WeightCurve;
use super::recursion::{value_from_weights, WeightSet};
use crate::error::{Error, Result};
use crate::model::OneFactorModel;

// 8-point Gauss-Legendre on [-1, 1]
const GL_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `∫ g(k) (k − X_{t−})^+ dk` for the strip bought one period earlier, where
/// `X_{t−} = ζ_{t−1} S_t` is the fund just before the withdrawal.
pub fn expired_portfolio_value(curve: &WeightCurve, zeta_prev: f64, spot: f64) -> f64 {
    let x = zeta_prev * spot;
    let atom = curve
        .atom()
        .map_or(0.0, |a| a.mass * (a.location - x).max(0.0));
    let Some(grid) = curve.grid() else {
        return atom;
    };
    let nodes = grid.nodes();
    let weights = grid.weights();
    let g = curve.density();
    let n = nodes.len();
    if x <= nodes[0] {
        let full: f64 = (0..n).map(|i| weights[i] * g[i] * (nodes[i] - x)).sum();
        return full + atom;
    }
    if x >= nodes[n - 1] {
        return atom;
    }
    // Simpson panels are node pairs [2j, 2j+2]; integrate whole panels above x with the
    // grid weights and the panel containing x by Gauss-Legendre on the interpolated density.
    let p = grid.position(x);
    let panel = ((p / 2.0).floor() as usize).min((n - 3) / 2);
    let start = 2 * panel + 2;
    let mut total = 0.0;
    for i in start..n {
        // the panel boundary node keeps only its share of the upper panel
        let wi = match i {
            i if i == start && i == n - 1 => 0.0,
            i if i == start => 0.5 * weights[i],
            _ => weights[i],
        };
        total += wi * g[i] * (nodes[i] - x);
    }
    let s_lo = grid.coordinate(x);
    let s_hi = grid.coordinate(nodes[start]);
    let half = 0.5 * (s_hi - s_lo);
    let mid = 0.5 * (s_hi + s_lo);
    for (&xi, &wi) in GL_X.iter().zip(&GL_W) {
        for s in [mid - half * xi, mid + half * xi] {
            let k = s.exp() - grid.shift();
            total += wi * half * curve.density_at(k) * (k - x) * (k + grid.shift());
        }
    }
    total + atom
}

/// One point of the replication check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationPoint {
    pub period: usize,
    pub fund_before_withdrawal: f64,
    pub expired_value: f64,
    pub claim: f64,
    pub continuation: f64,
}

impl ReplicationPoint {
    pub fn error(&self) -> f64 {
        self.expired_value - self.claim - self.continuation
    }
}

/// Check `∫ g_{t−1}(k)(k − X_{t−})^+ dk = Z^(t) + [1_{X_t>0} V_t(X_t) + 1_{X_t≤0} V_t(0+)]` at
/// each fund level; `V_t(0+)` is the value of all remaining withdrawals.
pub fn replication_check(
    model: &dyn OneFactorModel,
    weights: &WeightSet,
    t: usize,
    funds_before_withdrawal: &[f64],
) -> Result<Vec<ReplicationPoint>> {
    let n = weights.n_periods();
    if t == 0 || t > n {
        return Err(Error::invalid(
            "t",
            format!("replication is defined for 1..={n}, got {t}"),
        ));
    }
    let w = weights.withdrawal();
    let expired = weights.curve(t - 1);
    funds_before_withdrawal
        .iter()
        .map(|&x_minus| {
            let x = x_minus - w;
            let claim = (-x).max(0.0);
            let continuation = if t == n {
                0.0
            } else if x > 0.0 {
                value_from_weights(model, weights.curve(t), x)?
            } else {
                remaining_withdrawals_value(model, weights.curve(t))
            };
            Ok(ReplicationPoint {
                period: t,
                fund_before_withdrawal: x_minus,
                expired_value: expired_portfolio_value(expired, x_minus, 1.0),
                claim,
                continuation,
            })
        })
        .collect()
}

/// `V_t(0+) = ∫ g_t(k) P_t(k | 0) dk = DF · m_t`.
fn remaining_withdrawals_value(model: &dyn OneFactorModel, curve: &WeightCurve) -> f64 {
    model.discount_factor(curve.period()) * curve.integrate(|k| k)
}
