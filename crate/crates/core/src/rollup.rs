//! Guarantees whose withdrawal level ratchets up to `X_t/A_t` when the fund outperforms.
//!
//! With the level normalized to one, `f_t(x) = V̄_t(1, x)` is represented by constants
//! `α_t, β_t` and a weight `g^R_t` on `k ∈ [1, 1 + A_{t+1}]`:
//!
//! `V̄_t(w, X) = α_t [w + C_t(w(1+A_{t+1}) | X)/A_{t+1}] + β_t P_t(w(1+A_{t+1}) | X)
//!             + ∫ P_t(wk | X) g^R_t(k) dk`
//!
//! where `α_t = f_{t+1}(A_{t+1})`, `β_t = −f'_{t+1}(A_{t+1}−)` and `g^R_t(k) = f''_{t+1}(k − 1)`.

use serde::{Deserialize, Serialize};

use crate::contract::GuaranteeSpec;
use crate::error::{ensure_positive, Error, Result};
use crate::hedge::{HedgeLeg, HedgePortfolio, LegType};
use crate::mc::{simulate, McConfig, PricingResult, ReturnSampler};
use crate::model::{require_a2, require_zero_rates, OneFactorModel};
use crate::quad::{odd_at_least, LogGrid};
use crate::weights::recursion::integrate_kernel;
use crate::weights::WeightCurve;

/// `w_t = max(w_{t−1}, X_t / A_t)`; an infinite base never ratchets.
pub fn rollup_withdrawal_update(w_prev: f64, fund_value: f64, base: f64) -> f64 {
    if base.is_infinite() {
        w_prev
    } else {
        w_prev.max(fund_value / base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollupConfig {
    pub min_points: usize,
    pub max_points: usize,
    pub points_per_std: f64,
}

impl Default for RollupConfig {
    fn default() -> Self {
        Self {
            min_points: 1001,
            max_points: 16_001,
            points_per_std: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollupStep {
    pub period: usize,
    pub alpha: f64,
    pub beta: f64,
    pub weight: WeightCurve,
}

/// Coefficients for `t = 0..N−1` and the bases `A_0..A_{N−1}` (`A_N = ∞`).
#[derive(Debug, Clone, PartialEq)]
pub struct RollupCoefficients {
    bases: Vec<f64>,
    steps: Vec<RollupStep>,
}

impl RollupCoefficients {
    pub fn steps(&self) -> &[RollupStep] {
        &self.steps
    }

    pub fn step(&self, t: usize) -> &RollupStep {
        &self.steps[t]
    }

    pub fn n_periods(&self) -> usize {
        self.steps.len()
    }

    /// `A_t`, infinite for `t = N`.
    pub fn base(&self, t: usize) -> f64 {
        self.bases.get(t).copied().unwrap_or(f64::INFINITY)
    }

    /// `V̄_t(w_t, X_t)`.
    pub fn value(
        &self,
        model: &dyn OneFactorModel,
        t: usize,
        level: f64,
        fund_value: f64,
    ) -> Result<f64> {
        self.portfolio(t, level, fund_value)?.value(model)
    }

    /// `V^R_t(w_{t−1}, X_t)` for a live fund: the level ratchets first (`t ≥ 1`).
    pub fn value_before_rollup(
        &self,
        model: &dyn OneFactorModel,
        t: usize,
        previous_level: f64,
        fund_value: f64,
    ) -> Result<f64> {
        if t == 0 {
            return Err(Error::invalid("t", "there is no roll-up event at T_0"));
        }
        let level = rollup_withdrawal_update(previous_level, fund_value, self.base(t));
        self.value(model, t, level, fund_value)
    }

    /// Positions: cash `α_t w_t`, `α_t/A_{t+1}` calls and `β_t` puts struck at
    /// `w_t(1 + A_{t+1})`, and the put strip on strikes `w_t k`.
    pub fn portfolio(&self, t: usize, level: f64, fund_value: f64) -> Result<HedgePortfolio> {
        let n = self.n_periods();
        if t >= n {
            return Err(Error::invalid("t", format!("{t} outside 0..{n}")));
        }
        ensure_positive("withdrawal level", level)?;
        ensure_positive("fund_value", fund_value)?;
        let s = &self.steps[t];
        let a = self.base(t + 1);
        let mut legs = Vec::new();
        if a.is_finite() {
            let strike = level * (1.0 + a);
            legs.push(HedgeLeg {
                leg_type: LegType::Cash,
                strike: 0.0,
                quantity: s.alpha * level,
            });
            legs.push(HedgeLeg {
                leg_type: LegType::Call,
                strike,
                quantity: s.alpha / a,
            });
            legs.push(HedgeLeg {
                leg_type: LegType::Put,
                strike,
                quantity: s.beta,
            });
        }
        let mut strip = HedgePortfolio::from_weights(&s.weight, fund_value);
        for l in &mut strip.legs {
            l.strike *= level;
        }
        legs.extend(strip.legs);
        Ok(HedgePortfolio {
            period: t,
            fund_value,
            legs,
        })
    }
}

/// Coefficients for the bases of `spec`.
pub fn build_rollup_coefficients(
    model: &dyn OneFactorModel,
    spec: &GuaranteeSpec,
    cfg: &RollupConfig,
) -> Result<RollupCoefficients> {
    if spec.rollup().is_none() {
        return Err(Error::invalid("rollup", "contract has no roll-up feature"));
    }
    let bases = spec.guarantee_bases()?;
    build_rollup_coefficients_from_bases(model, &bases[..spec.n_periods()], cfg)
}

/// Coefficients for explicit bases `A_0..A_{N−1}`.
pub fn build_rollup_coefficients_from_bases(
    model: &dyn OneFactorModel,
    bases: &[f64],
    cfg: &RollupConfig,
) -> Result<RollupCoefficients> {
    require_a2(model, "the roll-up recursion")?;
    require_zero_rates(model, "the roll-up recursion")?;
    let n = model.n_periods();
    if bases.len() != n {
        return Err(Error::invalid(
            "bases",
            format!("{} bases for {n} periods", bases.len()),
        ));
    }
    if let Some(b) = bases.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::invalid(
            "bases",
            format!("guarantee bases must be positive and finite, got {b}"),
        ));
    }
    let base = |t: usize| bases.get(t).copied().unwrap_or(f64::INFINITY);
    let mut rev = vec![RollupStep {
        period: n - 1,
        alpha: 0.0,
        beta: 0.0,
        weight: WeightCurve::point_mass(n - 1, 1.0, 1.0),
    }];
    for t in (0..n - 1).rev() {
        let next = rev.last().unwrap();
        let s = t + 1;
        let a1 = base(t + 1);
        let a2 = base(t + 2);
        let c = 1.0 + a2;
        let call_qty = if a2.is_finite() { next.alpha / a2 } else { 0.0 };
        let has_kink = a2.is_finite();

        let strip = |f: &dyn Fn(f64) -> f64| next.weight.integrate(f);
        let mut alpha = strip(&|k| model.put(s, k, a1));
        let mut slope = strip(&|k| model.delta(s, k, a1));
        if has_kink {
            alpha +=
                next.alpha * (1.0 + model.call(s, c, a1) / a2) + next.beta * model.put(s, c, a1);
            let dp = model.delta(s, c, a1);
            slope += call_qty * (dp + 1.0) + next.beta * dp;
        }

        let periods = t + 1..n;
        let v_min = periods
            .map(|j| model.log_return_variance(j).sqrt())
            .fold(f64::INFINITY, f64::min);
        let wanted = ((1.0 + a1).ln() / (v_min / cfg.points_per_std)).ceil() as usize;
        let grid = LogGrid::new(
            1.0,
            1.0 + a1,
            0.0,
            odd_at_least(wanted.min(cfg.max_points), cfg.min_points),
        )?;
        let mut density = integrate_kernel(
            &next.weight,
            1.0,
            &grid,
            model.log_return_range(s),
            |k, x| model.gamma(s, k, x),
        );
        if has_kink {
            for (g, &k) in density.iter_mut().zip(grid.nodes()) {
                if k > 1.0 {
                    *g += (call_qty + next.beta) * model.gamma(s, c, k - 1.0);
                }
            }
        }
        if let Some(&bad) = density.iter().find(|&&g| g < -1e-10) {
            return Err(Error::tolerance(
                "roll-up weight sign",
                format!("t={t}"),
                bad,
                1e-10,
            ));
        }
        let density = density.into_iter().map(|g: f64| g.max(0.0)).collect();
        rev.push(RollupStep {
            period: t,
            alpha,
            beta: -slope,
            weight: WeightCurve::new(t, grid, density)?,
        });
    }
    rev.reverse();
    Ok(RollupCoefficients {
        bases: bases.to_vec(),
        steps: rev,
    })
}

/// Direct Monte-Carlo value with pathwise ratcheting levels; `bases[t] = A_t`.
pub fn mc_rollup_value(
    model: &dyn OneFactorModel,
    withdrawal: f64,
    initial_capital: f64,
    bases: &[f64],
    cfg: &McConfig,
) -> Result<PricingResult> {
    ensure_positive("withdrawal", withdrawal)?;
    ensure_positive("initial_capital", initial_capital)?;
    let n = model.n_periods();
    if bases.len() < n {
        return Err(Error::invalid(
            "bases",
            format!("{} bases for {n} periods", bases.len()),
        ));
    }
    let sampler = ReturnSampler::new(model)?;
    simulate("mc_rollup", cfg, n, |u, claims| {
        let mut x = initial_capital;
        let mut level = withdrawal;
        let mut df = 1.0;
        for t in 1..=n {
            df *= sampler.discount_factor(t - 1);
            x = x * sampler.log_return(t - 1, u.uniform()).exp() - level;
            if x <= 0.0 {
                claims[t - 1] = -x * df;
                let mut d = df;
                for s in t + 1..=n {
                    d *= sampler.discount_factor(s - 1);
                    claims[s - 1] = level * d;
                }
                break;
            }
            if t < n {
                level = rollup_withdrawal_update(level, x, bases[t]);
            }
        }
        claims.iter().sum()
    })
}

/// [`mc_rollup_value`] for the bases of `spec`.
pub fn mc_rollup_guarantee(
    model: &dyn OneFactorModel,
    spec: &GuaranteeSpec,
    cfg: &McConfig,
) -> Result<PricingResult> {
    let bases = spec.guarantee_bases()?;
    mc_rollup_value(
        model,
        spec.withdrawal(),
        spec.initial_capital(),
        &bases,
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::mc_claims_value;
    use crate::models::BlackScholesModel;
    use crate::weights::{build_weights, WeightConfig};

    fn bs(n: usize) -> BlackScholesModel {
        BlackScholesModel::constant(0.3, 1.0, n).unwrap()
    }

    #[test]
    fn level_update() {
        assert_eq!(rollup_withdrawal_update(10.0, 40.0, 5.0), 10.0);
        assert_eq!(rollup_withdrawal_update(10.0, 100.0, 5.0), 20.0);
        assert_eq!(rollup_withdrawal_update(10.0, 1e9, f64::INFINITY), 10.0);
    }

    #[test]
    fn terminal_step_is_a_put() {
        let m = bs(3);
        let c =
            build_rollup_coefficients_from_bases(&m, &[3.0, 2.0, 1.0], &RollupConfig::default())
                .unwrap();
        let last = c.step(2);
        assert_eq!((last.alpha, last.beta), (0.0, 0.0));
        for &(w, x) in &[(10.0, 12.0), (3.0, 1.0), (7.0, 30.0)] {
            assert_eq!(c.value(&m, 2, w, x).unwrap(), m.put(2, w, x));
        }
        // first backward step: α = P(1 | A), β = −Δ^P(1 | A), g = Γ(1 | k − 1)
        let s = c.step(1);
        assert!((s.alpha - m.put(2, 1.0, 1.0)).abs() < 1e-14);
        assert!((s.beta + m.delta(2, 1.0, 1.0)).abs() < 1e-14);
        let k = s.weight.strikes()[100];
        assert!((s.weight.density()[100] - m.gamma(2, 1.0, k - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn coefficients_match_value_surface() {
        let m = bs(3);
        let c =
            build_rollup_coefficients_from_bases(&m, &[3.0, 2.0, 1.0], &RollupConfig::default())
                .unwrap();
        // α_0 = V̄_1(1, A_1), β_0 = −∂_X V̄_1(1, A_1−), g_0(k) = ∂²_X V̄_1(1, k − 1)
        let f = |x: f64| c.value(&m, 1, 1.0, x).unwrap();
        let a1 = 2.0;
        assert!((c.step(0).alpha - f(a1)).abs() < 1e-6);
        let h = 1e-4;
        let left = (3.0 * f(a1) - 4.0 * f(a1 - h) + f(a1 - 2.0 * h)) / (2.0 * h);
        assert!(
            (c.step(0).beta + left).abs() < 1e-5,
            "{} {left}",
            c.step(0).beta
        );
        let g0 = &c.step(0).weight;
        let k = 2.0;
        let h = 1e-3;
        let fd = (f(k - 1.0 + h) - 2.0 * f(k - 1.0) + f(k - 1.0 - h)) / (h * h);
        assert!(
            (g0.density_at(k) - fd).abs() < 1e-4 * fd.abs().max(1e-2),
            "{} {fd}",
            g0.density_at(k)
        );
    }

    #[test]
    fn homogeneity_and_linear_region() {
        let m = bs(3);
        let c =
            build_rollup_coefficients_from_bases(&m, &[3.0, 2.0, 1.0], &RollupConfig::default())
                .unwrap();
        let v = c.value(&m, 0, 10.0, 30.0).unwrap();
        let v2 = c.value(&m, 0, 20.0, 60.0).unwrap();
        assert!((v2 - 2.0 * v).abs() < 1e-9 * v2);
        // beyond A_t w_{t−1} the value is linear in X_t
        let g = |x: f64| c.value_before_rollup(&m, 1, 10.0, x).unwrap();
        let (x, h) = (40.0, 2.0);
        assert!((g(x + h) - 2.0 * g(x) + g(x - h)).abs() < 1e-10 * g(x));
    }

    #[test]
    fn large_bases_reduce_to_plain_guarantee() {
        let m = bs(3);
        let spec = GuaranteeSpec::plain(3, 1.0, 10.0, 30.0).unwrap();
        let plain = build_weights(&m, &spec, &WeightConfig::default())
            .unwrap()
            .value(&m, 30.0)
            .unwrap();
        let big = vec![3.0e3; 3];
        let c = build_rollup_coefficients_from_bases(&m, &big, &RollupConfig::default()).unwrap();
        let r = c.value(&m, 0, 10.0, 30.0).unwrap();
        assert!((r - plain).abs() < 0.01 * plain, "{r} {plain}");
        let small =
            build_rollup_coefficients_from_bases(&m, &[3.0, 2.0, 1.0], &RollupConfig::default())
                .unwrap();
        assert!(small.value(&m, 0, 10.0, 30.0).unwrap() >= plain);
    }

    #[test]
    fn matches_monte_carlo() {
        let m = bs(3);
        let spec = GuaranteeSpec::plain(3, 1.0, 10.0, 30.0)
            .unwrap()
            .with_rollup(0.0)
            .unwrap();
        let c = build_rollup_coefficients(&m, &spec, &RollupConfig::default()).unwrap();
        let v = c.value(&m, 0, 10.0, 30.0).unwrap();
        let cfg = McConfig::new(100_000, 4, true).unwrap();
        let r = mc_rollup_guarantee(&m, &spec, &cfg).unwrap();
        assert!(
            (r.value - v).abs() < 3.0 * r.std_error.unwrap(),
            "{v} {r:?}"
        );
        let inf = mc_rollup_value(&m, 10.0, 30.0, &[f64::INFINITY; 3], &cfg).unwrap();
        assert_eq!(
            inf.value,
            mc_claims_value(&m, 10.0, 30.0, &cfg).unwrap().value
        );
    }

    #[test]
    fn rejects_rates_and_bad_bases() {
        let m = bs(2).with_rate(0.02).unwrap();
        assert!(
            build_rollup_coefficients_from_bases(&m, &[2.0, 1.0], &RollupConfig::default())
                .is_err()
        );
        assert!(
            build_rollup_coefficients_from_bases(&bs(2), &[2.0], &RollupConfig::default()).is_err()
        );
        assert!(build_rollup_coefficients_from_bases(
            &bs(2),
            &[2.0, f64::INFINITY],
            &RollupConfig::default()
        )
        .is_err());
    }
}
