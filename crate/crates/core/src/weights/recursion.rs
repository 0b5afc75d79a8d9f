//! Backward recursion of the put-weight functions under (A2).
//!
//! `g_{N−1} = δ_w` and `g_t(k) = ∫ Γ_{t+1}(k' | k − w) g_{t+1}(k') dk'`; the period-`t` hedge is
//! the strip of puts `P_t(k | X_t)` weighted by `g_t`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curve::WeightCurve;
use crate::contract::GuaranteeSpec;
use crate::error::{ensure_positive, Error, Result};
use crate::model::{require_a2, require_periods, OneFactorModel};
use crate::quad::{odd_at_least, LogGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    /// Lower bound on the strike-grid size.
    pub min_points: usize,
    pub max_points: usize,
    /// Grid points per standard deviation of the narrowest one-period log return.
    pub points_per_std: f64,
    /// Upper strike as multiples of the accumulated log-return standard deviation.
    pub tail_std: f64,
    /// Largest tolerated `|∫g − 1|` before the recursion aborts.
    pub mass_tolerance: f64,
    /// Largest tolerated relative mean drift.
    pub mean_tolerance: f64,
    /// Rescale each curve to unit mass (shape preserved).
    pub renormalize: bool,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            min_points: 2001,
            max_points: 16_001,
            points_per_std: 40.0,
            tail_std: 12.0,
            mass_tolerance: 1e-5,
            mean_tolerance: 1e-3,
            renormalize: false,
        }
    }
}

/// Mass and mean drift of one backward step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub period: usize,
    pub points: usize,
    pub mass: f64,
    pub mean: f64,
    pub expected_mean: f64,
}

impl StepDiagnostics {
    pub fn mass_error(&self) -> f64 {
        self.mass - 1.0
    }

    pub fn mean_error(&self) -> f64 {
        self.mean - self.expected_mean
    }
}

/// All weight curves `g_0, ..., g_{N−1}` of one contract.
#[derive(Debug, Clone)]
pub struct WeightSet {
    withdrawal: f64,
    curves: Vec<WeightCurve>,
    diagnostics: Vec<StepDiagnostics>,
}

impl WeightSet {
    pub fn withdrawal(&self) -> f64 {
        self.withdrawal
    }

    pub fn curves(&self) -> &[WeightCurve] {
        &self.curves
    }

    pub fn curve(&self, t: usize) -> &WeightCurve {
        &self.curves[t]
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    pub fn n_periods(&self) -> usize {
        self.curves.len()
    }

    /// `V_0` at initial capital `x0`.
    pub fn value(&self, model: &dyn OneFactorModel, x0: f64) -> Result<f64> {
        value_from_weights(model, &self.curves[0], x0)
    }

    /// Strike grids of the continuous curves, reusable for bump-and-revalue.
    pub fn grids(&self) -> Vec<Option<LogGrid>> {
        self.curves.iter().map(|c| c.grid().cloned()).collect()
    }
}

/// Expected curve means `m_t`: `m_{N−1} = w`, `m_t = w + DF_{t+1} m_{t+1}`; `(N−t)·w` at zero rates.
pub fn expected_means(model: &dyn OneFactorModel, w: f64) -> Vec<f64> {
    let n = model.n_periods();
    let mut m = vec![0.0; n];
    m[n - 1] = w;
    for t in (0..n - 1).rev() {
        m[t] = w + model.discount_factor(t + 1) * m[t + 1];
    }
    m
}

/// Log-spaced strike grid on `[w, k_max]` for `g_t`, `t ≤ N−2`.
pub fn weight_grid(
    model: &dyn OneFactorModel,
    w: f64,
    t: usize,
    cfg: &WeightConfig,
) -> Result<LogGrid> {
    let n = model.n_periods();
    if t + 2 > n {
        return Err(Error::invalid(
            "period",
            format!("g_{t} is a point mass for N = {n}"),
        ));
    }
    let periods = t + 1..n;
    let var: f64 = periods.clone().map(|j| model.log_return_variance(j)).sum();
    let v_min = periods
        .map(|j| model.log_return_variance(j).sqrt())
        .fold(f64::INFINITY, f64::min);
    let upper = (n - t) as f64 * w * (cfg.tail_std * var.sqrt()).exp();
    let range = (upper / w).ln();
    let wanted = (range / (v_min / cfg.points_per_std)).ceil() as usize;
    let points = odd_at_least(wanted.min(cfg.max_points), cfg.min_points);
    LogGrid::new(w, upper, 0.0, points)
}

/// `g_{N−2}(k) = Γ_{N−1}(w | k − w)`.
pub fn terminal_weight(model: &dyn OneFactorModel, w: f64, grid: LogGrid) -> Result<WeightCurve> {
    require_a2(model, "the weight recursion")?;
    let n = model.n_periods();
    if n < 2 {
        return Err(Error::invalid("n_periods", "terminal weight needs N >= 2"));
    }
    let density: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&k| {
            if k <= w {
                0.0
            } else {
                model.gamma(n - 1, w, k - w)
            }
        })
        .collect();
    WeightCurve::new(n - 2, grid, density)
}

/// One backward step `g_{t+1} → g_t` onto `grid`.
pub fn recurse_weight(
    model: &dyn OneFactorModel,
    next: &WeightCurve,
    w: f64,
    grid: LogGrid,
) -> Result<WeightCurve> {
    require_a2(model, "the weight recursion")?;
    let s = next.period();
    if s == 0 || s >= model.n_periods() {
        return Err(Error::invalid(
            "period",
            format!("cannot step back from period {s}"),
        ));
    }
    let density = integrate_kernel(next, w, &grid, model.log_return_range(s), |k, x| {
        model.gamma(s, k, x)
    });
    WeightCurve::new(s - 1, grid, density)
}

/// `∫ kernel(k', k − w) g_{t+1}(k') dk'` on every node `k` of `grid`; the kernel is assumed to
/// vanish unless `ln(k'/(k − w))` lies in `log_range`.
pub(crate) fn integrate_kernel<F>(
    next: &WeightCurve,
    w: f64,
    grid: &LogGrid,
    log_range: (f64, f64),
    kernel: F,
) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let (lo, hi) = log_range;
    grid.nodes()
        .par_iter()
        .map(|&k| {
            let x = k - w;
            if x <= 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            if let Some(src) = next.grid() {
                let nodes = src.nodes();
                let weights = src.weights();
                let g = next.density();
                for j in src.index_range(x * lo.exp(), x * hi.exp()) {
                    if g[j] != 0.0 {
                        acc += weights[j] * g[j] * kernel(nodes[j], x);
                    }
                }
            }
            if let Some(a) = next.atom() {
                acc += a.mass * kernel(a.location, x);
            }
            acc
        })
        .collect()
}

fn check_curve(
    curve: &WeightCurve,
    expected_mean: f64,
    cfg: &WeightConfig,
) -> Result<StepDiagnostics> {
    let diag = StepDiagnostics {
        period: curve.period(),
        points: curve.strikes().len(),
        mass: curve.mass(),
        mean: curve.mean(),
        expected_mean,
    };
    if diag.mass_error().abs() > cfg.mass_tolerance {
        return Err(Error::tolerance(
            "weight mass",
            format!("t={}", curve.period()),
            diag.mass_error(),
            cfg.mass_tolerance,
        ));
    }
    if (diag.mean_error() / expected_mean).abs() > cfg.mean_tolerance {
        return Err(Error::tolerance(
            "weight mean",
            format!("t={}", curve.period()),
            diag.mean_error() / expected_mean,
            cfg.mean_tolerance,
        ));
    }
    Ok(diag)
}

/// Run the full recursion for a contract.
pub fn build_weights(
    model: &dyn OneFactorModel,
    spec: &GuaranteeSpec,
    cfg: &WeightConfig,
) -> Result<WeightSet> {
    require_periods(model, spec.n_periods())?;
    let w = spec.withdrawal();
    let n = spec.n_periods();
    let grids = (0..n)
        .map(|t| {
            if t + 1 < n {
                weight_grid(model, w, t, cfg).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    build_weights_on_grids(model, w, &grids, cfg)
}

/// Recursion on caller-supplied grids (`grids[t]` for `t ≤ N−2`, `None` for `N−1`).
pub fn build_weights_on_grids(
    model: &dyn OneFactorModel,
    w: f64,
    grids: &[Option<LogGrid>],
    cfg: &WeightConfig,
) -> Result<WeightSet> {
    ensure_positive("withdrawal", w)?;
    require_a2(model, "the weight recursion")?;
    let n = model.n_periods();
    if grids.len() != n {
        return Err(Error::invalid(
            "grids",
            format!("{} grids for {n} periods", grids.len()),
        ));
    }
    let terminal = WeightCurve::point_mass(n - 1, w, 1.0);
    let base = WeightSet {
        withdrawal: w,
        curves: vec![terminal],
        diagnostics: vec![StepDiagnostics {
            period: n - 1,
            points: 0,
            mass: 1.0,
            mean: w,
            expected_mean: w,
        }],
    };
    extend_backwards(model, base, grids, cfg, 0)
}

/// Recompute `g_t` for `t < t_start` on the grids of `base`, keeping `g_t` for `t ≥ t_start`.
/// A volatility bump of period `s` only changes the curves below `s`.
pub fn rebuild_below(
    model: &dyn OneFactorModel,
    base: &WeightSet,
    t_start: usize,
    cfg: &WeightConfig,
) -> Result<WeightSet> {
    let n = base.n_periods();
    if t_start == 0 || t_start > n {
        return Err(Error::invalid(
            "t_start",
            format!("{t_start} outside 1..={n}"),
        ));
    }
    let grids = base.grids();
    let kept = WeightSet {
        withdrawal: base.withdrawal,
        curves: base.curves[t_start..].to_vec(),
        diagnostics: base.diagnostics[t_start..].to_vec(),
    };
    extend_backwards(model, kept, &grids, cfg, 0)
}

/// `partial` holds `g_s, ..., g_{N−1}`; prepend curves down to `t_min`.
fn extend_backwards(
    model: &dyn OneFactorModel,
    partial: WeightSet,
    grids: &[Option<LogGrid>],
    cfg: &WeightConfig,
    t_min: usize,
) -> Result<WeightSet> {
    let w = partial.withdrawal;
    let means = expected_means(model, w);
    let mut rev_curves: Vec<WeightCurve> = partial.curves.into_iter().rev().collect();
    let mut rev_diag: Vec<StepDiagnostics> = partial.diagnostics.into_iter().rev().collect();
    let mut s = rev_curves.last().expect("non-empty").period();
    while s > t_min {
        let t = s - 1;
        let grid = grids[t]
            .clone()
            .ok_or_else(|| Error::invalid("grids", format!("missing grid for g_{t}")))?;
        let next = rev_curves.last().unwrap();
        let mut curve = recurse_weight(model, next, w, grid)?;
        if cfg.renormalize {
            curve = curve.renormalized();
        }
        rev_diag.push(check_curve(&curve, means[t], cfg)?);
        rev_curves.push(curve);
        s = t;
    }
    rev_curves.reverse();
    rev_diag.reverse();
    Ok(WeightSet {
        withdrawal: w,
        curves: rev_curves,
        diagnostics: rev_diag,
    })
}

/// `V_t = ∫ g_t(k) P_t(k | X_t) dk`.
pub fn value_from_weights(
    model: &dyn OneFactorModel,
    curve: &WeightCurve,
    fund_value: f64,
) -> Result<f64> {
    if !(fund_value > 0.0) || !fund_value.is_finite() {
        return Err(Error::invalid(
            "fund_value",
            format!("the hedge value needs a positive fund, got {fund_value}"),
        ));
    }
    let t = curve.period();
    Ok(curve.integrate(|k| model.put(t, k, fund_value)))
}
