//! Forward vega and volga of the plain guarantee under Black-Scholes, and the net volga left
//! after hedging each forward vega with a forward variance swap.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::contract::GuaranteeSpec;
use crate::error::{Error, Result};
use crate::model::{require_periods, OneFactorModel};
use crate::models::BlackScholesModel;
use crate::weights::recursion::integrate_kernel;
use crate::weights::{
    build_weights, rebuild_below, recurse_weight, WeightConfig, WeightCurve, WeightSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreekMethod {
    /// Kernel route at the last period, bump-and-revalue elsewhere.
    Auto,
    /// Differentiate `Γ_s` in `Σ_s` and carry the derivative curves down the recursion.
    Kernel,
    /// Central differences of the weight pipeline on frozen grids.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub method: GreekMethod,
    /// Absolute volatility bump.
    pub bump: f64,
    /// Largest relative change of the volga when the bump is halved.
    pub richardson_tolerance: f64,
    pub weights: WeightConfig,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            method: GreekMethod::Auto,
            bump: 1e-3,
            richardson_tolerance: 0.01,
            weights: WeightConfig::default(),
        }
    }
}

/// `∂_{Σ_s} V_0` and `∂²_{Σ_s} V_0` for one forward period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForwardGreeks {
    pub period: usize,
    pub vol: f64,
    pub vega: f64,
    pub volga: f64,
    /// `vega/Σ − volga`.
    pub net_volga: f64,
}

impl ForwardGreeks {
    fn new(period: usize, vol: f64, vega: f64, volga: f64) -> Self {
        Self {
            period,
            vol,
            vega,
            volga,
            net_volga: vega / vol - volga,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolgaReport {
    /// Total withdrawals over initial capital.
    pub moneyness: f64,
    pub periods: Vec<ForwardGreeks>,
    pub vega_total: f64,
    pub volga_total: f64,
    pub net_volga: f64,
}

impl VolgaReport {
    fn new(moneyness: f64, periods: Vec<ForwardGreeks>) -> Self {
        let vega_total = periods.iter().map(|g| g.vega).sum();
        let volga_total = periods.iter().map(|g| g.volga).sum();
        let net_volga = periods.iter().map(|g| g.net_volga).sum();
        Self {
            moneyness,
            periods,
            vega_total,
            volga_total,
            net_volga,
        }
    }

    pub const CSV_HEADER: &'static str = "moneyness,vega_total,volga_total,net_volga";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.moneyness, self.vega_total, self.volga_total, self.net_volga
        )
    }
}

/// CSV with one row per report.
pub fn volga_csv(reports: &[VolgaReport]) -> String {
    let mut out = format!("{}\n", VolgaReport::CSV_HEADER);
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

fn check_target(model: &BlackScholesModel, t_target: usize) -> Result<()> {
    let n = model.n_periods();
    if t_target == 0 || t_target >= n {
        return Err(Error::invalid(
            "t_target",
            format!(
                "forward periods are 1..{}, got {t_target}",
                n.saturating_sub(1)
            ),
        ));
    }
    Ok(())
}

/// Vega and volga with respect to `Σ_{t_target}` by the chosen method.
pub fn forward_vega_volga(
    model: &BlackScholesModel,
    spec: &GuaranteeSpec,
    t_target: usize,
    cfg: &SensitivityConfig,
) -> Result<ForwardGreeks> {
    require_periods(model, spec.n_periods())?;
    check_target(model, t_target)?;
    let base = build_weights(model, spec, &cfg.weights)?;
    greeks_on(model, spec, &base, t_target, cfg)
}

fn greeks_on(
    model: &BlackScholesModel,
    spec: &GuaranteeSpec,
    base: &WeightSet,
    t_target: usize,
    cfg: &SensitivityConfig,
) -> Result<ForwardGreeks> {
    let use_kernel = match cfg.method {
        GreekMethod::Kernel => true,
        GreekMethod::FiniteDifference => false,
        GreekMethod::Auto => t_target + 1 == model.n_periods(),
    };
    let (vega, volga) = if use_kernel {
        kernel_greeks(model, spec, base, t_target)?
    } else {
        bumped_greeks(model, spec, base, t_target, cfg)?
    };
    Ok(ForwardGreeks::new(
        t_target,
        model.vol(t_target),
        vega,
        volga,
    ))
}

/// Derivative curves `∂g_{s−1} = ∫ ∂Γ_s(k' | k − w) g_s(k') dk'`, pushed down to `t = 0` by the
/// (linear) recursion and priced against `P_0(· | X_0)`.
fn kernel_greeks(
    model: &BlackScholesModel,
    spec: &GuaranteeSpec,
    base: &WeightSet,
    s: usize,
) -> Result<(f64, f64)> {
    let w = spec.withdrawal();
    let x0 = spec.initial_capital();
    let grid = base
        .curve(s - 1)
        .grid()
        .cloned()
        .ok_or_else(|| Error::invalid("weights", format!("g_{} has no grid", s - 1)))?;
    let range = model.log_return_range(s);
    let next = base.curve(s);
    let mut out = [0.0; 2];
    for (order, slot) in out.iter_mut().enumerate() {
        let density = integrate_kernel(next, w, &grid, range, |k, x| {
            if order == 0 {
                model.gamma_dvol(s, k, x)
            } else {
                model.gamma_d2vol(s, k, x)
            }
        });
        let mut curve = WeightCurve::new(s - 1, grid.clone(), density)?;
        for t in (0..s - 1).rev() {
            let g = base
                .curve(t)
                .grid()
                .cloned()
                .expect("continuous curve below N-1");
            curve = recurse_weight(model, &curve, w, g)?;
        }
        *slot = curve.integrate(|k| model.put(0, k, x0));
    }
    Ok((out[0], out[1]))
}

fn bumped_value(
    model: &BlackScholesModel,
    base: &WeightSet,
    s: usize,
    vol: f64,
    x0: f64,
    cfg: &WeightConfig,
) -> Result<f64> {
    let bumped = model.bumped(s, vol)?;
    rebuild_below(&bumped, base, s, cfg)?.value(&bumped, x0)
}

fn bumped_greeks(
    model: &BlackScholesModel,
    spec: &GuaranteeSpec,
    base: &WeightSet,
    s: usize,
    cfg: &SensitivityConfig,
) -> Result<(f64, f64)> {
    let x0 = spec.initial_capital();
    let vol = model.vol(s);
    let v0 = base.value(model, x0)?;
    let diff = |h: f64| -> Result<(f64, f64)> {
        let up = bumped_value(model, base, s, vol + h, x0, &cfg.weights)?;
        let dn = bumped_value(model, base, s, vol - h, x0, &cfg.weights)?;
        Ok(((up - dn) / (2.0 * h), (up - 2.0 * v0 + dn) / (h * h)))
    };
    let h = cfg.bump;
    if !(h > 0.0 && h < vol) {
        return Err(Error::invalid(
            "bump",
            format!("need 0 < bump < {vol}, got {h}"),
        ));
    }
    let (vega, volga) = diff(h)?;
    let (_, half) = diff(0.5 * h)?;
    let floor = 1e-6 * spec.withdrawal();
    let change = (half - volga).abs();
    if change > cfg.richardson_tolerance * volga.abs().max(floor) {
        return Err(Error::tolerance(
            "volga bump stability",
            format!("period {s}, bump {h}"),
            change / volga.abs().max(floor),
            cfg.richardson_tolerance,
        ));
    }
    Ok((vega, volga))
}

/// Forward greeks of every period `1..N−1` and the net volga after variance-swap hedges.
pub fn net_volga_after_varswap_hedge(
    model: &BlackScholesModel,
    spec: &GuaranteeSpec,
    cfg: &SensitivityConfig,
) -> Result<VolgaReport> {
    require_periods(model, spec.n_periods())?;
    let n = spec.n_periods();
    if n < 2 {
        return Err(Error::invalid(
            "n_periods",
            "forward volatilities need N >= 2",
        ));
    }
    let base = build_weights(model, spec, &cfg.weights)?;
    let periods = (1..n)
        .map(|s| greeks_on(model, spec, &base, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(VolgaReport::new(spec.moneyness(), periods))
}

/// Reports for a list of moneyness levels `N w / X_0`.
pub fn volga_by_moneyness(
    model: &BlackScholesModel,
    spec: &GuaranteeSpec,
    moneyness: &[f64],
    cfg: &SensitivityConfig,
) -> Result<Vec<VolgaReport>> {
    let total = spec.schedule().total_withdrawals();
    moneyness
        .iter()
        .map(|&m| {
            if !(m > 0.0) {
                return Err(Error::invalid(
                    "moneyness",
                    format!("must be positive, got {m}"),
                ));
            }
            net_volga_after_varswap_hedge(model, &spec.with_initial_capital(total / m)?, cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, x0: f64) -> (BlackScholesModel, GuaranteeSpec) {
        (
            BlackScholesModel::constant(0.3, 1.0, n).unwrap(),
            GuaranteeSpec::plain(n, 1.0, 10.0, x0).unwrap(),
        )
    }

    #[test]
    fn kernel_and_bump_routes_agree() {
        for n in [2, 3] {
            let (m, spec) = setup(n, 10.0 * n as f64);
            for s in 1..n {
                let k = forward_vega_volga(
                    &m,
                    &spec,
                    s,
                    &SensitivityConfig {
                        method: GreekMethod::Kernel,
                        ..Default::default()
                    },
                )
                .unwrap();
                let f = forward_vega_volga(
                    &m,
                    &spec,
                    s,
                    &SensitivityConfig {
                        method: GreekMethod::FiniteDifference,
                        ..Default::default()
                    },
                )
                .unwrap();
                assert!(
                    (k.vega - f.vega).abs() < 1e-4 * k.vega.abs(),
                    "n={n} s={s}: {k:?} {f:?}"
                );
                assert!(
                    (k.volga - f.volga).abs() < 1e-2 * k.volga.abs(),
                    "n={n} s={s}: {k:?} {f:?}"
                );
            }
        }
    }

    #[test]
    fn two_period_vega_signs() {
        let (m, atm) = setup(2, 20.0);
        let g = forward_vega_volga(&m, &atm, 1, &SensitivityConfig::default()).unwrap();
        assert!(g.vega > 0.0);
        let (_, otm) = setup(2, 400.0);
        let far = forward_vega_volga(&m, &otm, 1, &SensitivityConfig::default()).unwrap();
        assert!(far.vega.abs() < 1e-6 * g.vega, "{far:?}");
    }

    #[test]
    fn report_totals_and_csv() {
        let (m, spec) = setup(3, 30.0);
        let r = net_volga_after_varswap_hedge(&m, &spec, &SensitivityConfig::default()).unwrap();
        assert_eq!(r.periods.len(), 2);
        let s: f64 = r.periods.iter().map(|p| p.vega).sum();
        assert!((s - r.vega_total).abs() <= 1e-10 * s.abs());
        let csv = volga_csv(&[r]);
        assert!(csv.starts_with("moneyness,vega_total,volga_total,net_volga\n1,"));
        assert!(forward_vega_volga(&m, &spec, 0, &SensitivityConfig::default()).is_err());
    }
}
