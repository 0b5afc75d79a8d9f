//! Backward recursion of the guarantee value as a function of spot and fund-to-spot ratio,
//! for one-factor Markov models without the homogeneity property.
//!
//! `V_t(S | ζ)` is the value at `T_t` of the claims `Z^(t), ..., Z^(N)` when the fund before the
//! withdrawal is `ζ S`. It is linear, `(N−t+1)w − ζS`, for `S ≤ w/ζ`; above the kink it is stored
//! as `U_t(x, ζ)` with `x = ζS − w` the fund after the withdrawal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contract::GuaranteeSpec;
use crate::error::{Error, Result};
use crate::model::{require_periods, OneFactorModel};
use crate::quad::{odd_at_least, LogGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovConfig {
    /// First fund-grid size; doubled until `V_0` moves less than `rel_tol`.
    pub start_points: usize,
    pub max_points: usize,
    pub rel_tol: f64,
    /// Number of `ζ` slices, log-spaced on `[zeta_floor·ζ_0, ζ_0]`.
    pub n_zeta: usize,
    pub zeta_floor: f64,
    /// Lowest fund node `w·exp(−lower_std·v)` with `v` the largest one-period log std.
    pub lower_std: f64,
    pub tail_std: f64,
    pub boundary: BoundaryTolerances,
}

impl Default for MarkovConfig {
    fn default() -> Self {
        Self {
            start_points: 201,
            max_points: 1601,
            rel_tol: 1e-3,
            n_zeta: 17,
            zeta_floor: 1e-3,
            lower_std: 8.0,
            tail_std: 12.0,
            boundary: BoundaryTolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTolerances {
    /// On `V(0)` and `V'(0)`, relative to `w` and `ζ`.
    pub at_zero: f64,
    /// Jump of `V` at the kink, relative to `w`.
    pub kink_value: f64,
    /// Jump of `V'` at the kink, relative to `ζ`.
    pub kink_slope: f64,
    /// `V(S_max)` and `S_max·V'(S_max)`, relative to `w`.
    pub tail: f64,
}

impl Default for BoundaryTolerances {
    fn default() -> Self {
        Self {
            at_zero: 1e-6,
            kink_value: 1e-3,
            kink_slope: 1e-3,
            tail: 1e-4,
        }
    }
}

/// `V_t` on a fund grid for a set of `ζ_{t−1}` slices.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    period: usize,
    n_periods: usize,
    withdrawal: f64,
    funds: LogGrid,
    zetas: LogGrid,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    curvatures: Vec<Vec<f64>>,
}

impl ValueSurface {
    fn new(
        period: usize,
        n_periods: usize,
        withdrawal: f64,
        funds: LogGrid,
        zetas: LogGrid,
        values: Vec<Vec<f64>>,
    ) -> Self {
        let (slopes, curvatures) = values.iter().map(|v| funds.derivatives(v)).unzip();
        Self {
            period,
            n_periods,
            withdrawal,
            funds,
            zetas,
            values,
            slopes,
            curvatures,
        }
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn fund_grid(&self) -> &LogGrid {
        &self.funds
    }

    pub fn zeta_grid(&self) -> &LogGrid {
        &self.zetas
    }

    /// Values `U_t(x_i, ζ_j)` for slice `j`.
    pub fn slice(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    /// `(N − t + 1)·w`, the value at `S = 0`.
    pub fn value_at_zero(&self) -> f64 {
        (self.n_periods - self.period + 1) as f64 * self.withdrawal
    }

    fn column(&self, rows: &[Vec<f64>], zeta: f64, out: &mut [f64]) {
        let (j0, wz) = self.zetas.stencil(zeta);
        for (i, o) in out.iter_mut().enumerate() {
            *o = wz[0] * rows[j0][i]
                + wz[1] * rows[j0 + 1][i]
                + wz[2] * rows[j0 + 2][i]
                + wz[3] * rows[j0 + 3][i];
        }
    }

    fn fund_value(&self, x: f64, zeta: f64) -> f64 {
        let (j0, wz) = self.zetas.stencil(zeta);
        (0..4)
            .map(|l| wz[l] * self.funds.interpolate(&self.values[j0 + l], x))
            .sum()
    }

    /// `V_t(S | ζ)`.
    pub fn value(&self, spot: f64, zeta: f64) -> f64 {
        let x = zeta * spot - self.withdrawal;
        if x <= 0.0 {
            return self.value_at_zero() - zeta * spot;
        }
        if x < self.funds.lower() {
            // below the first node the convex part is negligible by construction of the grid
            return self.value_at_zero() - self.withdrawal - x;
        }
        self.fund_value(x, zeta)
    }

    /// `∂_S V_t(S | ζ)`.
    pub fn spot_derivative(&self, spot: f64, zeta: f64) -> f64 {
        let x = zeta * spot - self.withdrawal;
        if x < self.funds.lower() {
            return -zeta;
        }
        let (j0, wz) = self.zetas.stencil(zeta);
        let dx: f64 = (0..4)
            .map(|l| wz[l] * self.funds.interpolate(&self.slopes[j0 + l], x))
            .sum();
        zeta * dx
    }

    /// Largest spread of `U_t(x, ·)` across the `ζ` slices; zero up to round-off under (A2).
    pub fn collapse_deviation(&self) -> f64 {
        let n = self.funds.len();
        (0..n)
            .map(|i| {
                let (lo, hi) = self
                    .values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                        (a.min(v[i]), b.max(v[i]))
                    });
                hi - lo
            })
            .fold(0.0, f64::max)
    }
}

/// Outcome of the boundary checks of one `ζ` slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub period: usize,
    pub zeta: f64,
    pub value_at_zero_error: f64,
    pub slope_at_zero_error: f64,
    pub kink_value_jump: f64,
    pub kink_slope_jump: f64,
    pub tail_value: f64,
    pub tail_flux: f64,
}

impl BoundaryReport {
    pub fn check(&self, w: f64, tol: &BoundaryTolerances) -> Result<()> {
        let at = |what: &str| format!("t={} zeta={:.6} ({what})", self.period, self.zeta);
        let checks = [
            (
                "V(0) = (N-t+1)w",
                self.value_at_zero_error.abs(),
                tol.at_zero * w,
                at("S=0"),
            ),
            (
                "V'(0) = -zeta",
                self.slope_at_zero_error.abs(),
                tol.at_zero * self.zeta,
                at("S=0"),
            ),
            (
                "V continuous at w/zeta",
                self.kink_value_jump.abs(),
                tol.kink_value * w,
                at("kink"),
            ),
            (
                "V' continuous at w/zeta",
                self.kink_slope_jump.abs(),
                tol.kink_slope * self.zeta,
                at("kink"),
            ),
            (
                "V(S_max) -> 0",
                self.tail_value.abs(),
                tol.tail * w,
                at("S_max"),
            ),
            (
                "S V'(S) -> 0",
                self.tail_flux.abs(),
                tol.tail * w,
                at("S_max"),
            ),
        ];
        for (name, err, bound, loc) in checks {
            if !(err <= bound) {
                return Err(Error::tolerance(name, loc, err, bound));
            }
        }
        Ok(())
    }
}

/// Evaluate the boundary and smoothness conditions of `V_t(· | ζ)` for one slice.
pub fn verify_boundary_conditions(surface: &ValueSurface, j: usize) -> BoundaryReport {
    let w = surface.withdrawal;
    let zeta = surface.zetas.nodes()[j];
    let funds = surface.funds.nodes();
    let n = funds.len();
    let v = &surface.values[j];
    let d = &surface.slopes[j];
    let linear_at = |x: f64| surface.value_at_zero() - w - x;
    BoundaryReport {
        period: surface.period,
        zeta,
        value_at_zero_error: surface.value(0.0, zeta) - surface.value_at_zero(),
        slope_at_zero_error: surface.spot_derivative(0.0, zeta) + zeta,
        kink_value_jump: v[0] - linear_at(funds[0]),
        // dV/dS = ζ dU/dx; the linear branch has slope −ζ
        kink_slope_jump: zeta * (d[0] + 1.0),
        tail_value: v[n - 1],
        tail_flux: (funds[n - 1] + w) * d[n - 1],
    }
}

/// Result of the surface recursion.
#[derive(Debug, Clone)]
pub struct MarkovResult {
    pub value: f64,
    /// Fund-grid sizes tried and the `V_0` each produced.
    pub refinement: Vec<(usize, f64)>,
    /// `V_1, ..., V_{N−1}` of the finest run.
    pub surfaces: Vec<ValueSurface>,
    pub boundary: Vec<BoundaryReport>,
}

/// Surface recursion with fund-grid doubling until `V_0` settles.
pub fn backward_markov_value(
    model: &dyn OneFactorModel,
    spec: &GuaranteeSpec,
    cfg: &MarkovConfig,
) -> Result<MarkovResult> {
    require_periods(model, spec.n_periods())?;
    if !model.satisfies_a1() {
        return Err(Error::Unsupported(format!(
            "model {} is not one-factor Markov",
            model.name()
        )));
    }
    if cfg.n_zeta < 4 || !(cfg.zeta_floor > 0.0 && cfg.zeta_floor < 1.0) {
        return Err(Error::invalid(
            "n_zeta",
            "need at least 4 slices and 0 < zeta_floor < 1",
        ));
    }
    let n = spec.n_periods();
    let w = spec.withdrawal();
    let x0 = spec.initial_capital();
    if n == 1 {
        let v = model.put(0, w, x0);
        return Ok(MarkovResult {
            value: v,
            refinement: vec![(0, v)],
            surfaces: Vec::new(),
            boundary: Vec::new(),
        });
    }
    let mut refinement = Vec::new();
    let mut points = odd_at_least(cfg.start_points, 5);
    let mut last: Option<(f64, Vec<ValueSurface>)> = None;
    loop {
        let (value, surfaces) = run(model, spec, cfg, points)?;
        refinement.push((points, value));
        let converged = last.as_ref().is_some_and(|(prev, _)| {
            (value - prev).abs() <= cfg.rel_tol * value.abs().max(1e-12 * w)
        });
        last = Some((value, surfaces));
        let next = odd_at_least(2 * points - 1, 5);
        if converged || next > cfg.max_points {
            break;
        }
        points = next;
    }
    let (value, surfaces) = last.expect("at least one run");
    if refinement.len() > 1 {
        let (_, prev) = refinement[refinement.len() - 2];
        if (value - prev).abs() > cfg.rel_tol * value.abs().max(1e-12 * w) {
            return Err(Error::tolerance(
                "surface refinement",
                format!("{points} fund nodes"),
                (value - prev) / value,
                cfg.rel_tol,
            ));
        }
    }
    let mut boundary = Vec::new();
    for s in &surfaces {
        for j in 0..s.zetas.len() {
            let r = verify_boundary_conditions(s, j);
            r.check(w, &cfg.boundary)?;
            boundary.push(r);
        }
    }
    let _ = x0;
    Ok(MarkovResult {
        value,
        refinement,
        surfaces,
        boundary,
    })
}

fn run(
    model: &dyn OneFactorModel,
    spec: &GuaranteeSpec,
    cfg: &MarkovConfig,
    points: usize,
) -> Result<(f64, Vec<ValueSurface>)> {
    let n = spec.n_periods();
    let w = spec.withdrawal();
    let zeta0 = spec.initial_capital();
    let v_max = (0..n)
        .map(|t| model.log_return_variance(t).sqrt())
        .fold(0.0, f64::max);
    let var: f64 = (1..n).map(|t| model.log_return_variance(t)).sum();
    let x_lo = w * (-cfg.lower_std * v_max).exp();
    let x_hi = n as f64 * w * (cfg.tail_std * var.sqrt()).exp();
    let funds = LogGrid::new(x_lo, x_hi, 0.0, points)?;
    let zetas = LogGrid::new(
        zeta0 * cfg.zeta_floor,
        zeta0,
        0.0,
        odd_at_least(cfg.n_zeta, 5),
    )?;

    // terminal surface t = N−1
    let terminal: Vec<Vec<f64>> = zetas
        .nodes()
        .par_iter()
        .map(|&zeta| {
            funds
                .nodes()
                .iter()
                .map(|&x| {
                    let spot = (x + w) / zeta;
                    let z_next = x / spot;
                    z_next * model.put(n - 1, w / z_next, spot)
                })
                .collect()
        })
        .collect();
    let mut surfaces = vec![ValueSurface::new(
        n - 1,
        n,
        w,
        funds.clone(),
        zetas.clone(),
        terminal,
    )];

    for t in (1..n - 1).rev() {
        let next = surfaces.last().unwrap();
        let values: Vec<Vec<f64>> = zetas
            .nodes()
            .par_iter()
            .map(|&zeta| {
                let mut col = vec![0.0; funds.len()];
                funds
                    .nodes()
                    .iter()
                    .map(|&x| {
                        let spot = (x + w) / zeta;
                        let z_next = zeta * x / (x + w);
                        next.column(&next.curvatures, z_next, &mut col);
                        continuation(model, t, &funds, &col, w, z_next, spot)
                    })
                    .collect()
            })
            .collect();
        surfaces.push(ValueSurface::new(
            t,
            n,
            w,
            funds.clone(),
            zetas.clone(),
            values,
        ));
    }
    surfaces.reverse();
    let first = &surfaces[0];
    let mut col = vec![0.0; funds.len()];
    first.column(&first.curvatures, zeta0, &mut col);
    let value = continuation(model, 0, &funds, &col, w, zeta0, 1.0);
    Ok((value, surfaces))
}

/// `∫ ζ' P_t((x' + w)/ζ' | S) ∂²_x U_{t+1}(x', ζ') dx'`.
fn continuation(
    model: &dyn OneFactorModel,
    t: usize,
    funds: &LogGrid,
    curvature: &[f64],
    w: f64,
    zeta: f64,
    spot: f64,
) -> f64 {
    let (lo, _) = model.log_return_range(t);
    let floor = spot * lo.exp();
    funds
        .nodes()
        .iter()
        .zip(funds.weights())
        .zip(curvature)
        .map(|((&x, &wt), &c)| {
            let k = (x + w) / zeta;
            if k <= floor {
                0.0
            } else {
                wt * zeta * model.put(t, k, spot) * c
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BlackScholesModel;
    use crate::weights::recursion::{build_weights, WeightConfig};

    fn small_cfg() -> MarkovConfig {
        MarkovConfig {
            n_zeta: 5,
            ..MarkovConfig::default()
        }
    }

    #[test]
    fn two_period_surface_matches_weights() {
        let m = BlackScholesModel::constant(0.25, 1.0, 2).unwrap();
        let spec = GuaranteeSpec::plain(2, 1.0, 10.0, 20.0).unwrap();
        let res = backward_markov_value(&m, &spec, &small_cfg()).unwrap();
        let v = build_weights(&m, &spec, &WeightConfig::default())
            .unwrap()
            .value(&m, 20.0)
            .unwrap();
        assert!((res.value - v).abs() < 2e-3 * v, "{} vs {v}", res.value);
    }

    #[test]
    fn linear_region_is_exact() {
        let m = BlackScholesModel::constant(0.3, 1.0, 3).unwrap();
        let spec = GuaranteeSpec::plain(3, 1.0, 10.0, 30.0).unwrap();
        let res = backward_markov_value(&m, &spec, &small_cfg()).unwrap();
        for s in &res.surfaces {
            let zeta = s.zeta_grid().nodes()[2];
            let spot = 0.5 * 10.0 / zeta;
            let exact = (3 - s.period() + 1) as f64 * 10.0 - zeta * spot;
            assert_eq!(s.value(spot, zeta), exact);
        }
    }

    #[test]
    fn homogeneous_model_collapses_in_zeta() {
        let m = BlackScholesModel::constant(0.3, 1.0, 3).unwrap();
        let spec = GuaranteeSpec::plain(3, 1.0, 10.0, 30.0).unwrap();
        let res = backward_markov_value(&m, &spec, &small_cfg()).unwrap();
        for s in &res.surfaces {
            assert!(
                s.collapse_deviation() < 1e-3 * 10.0,
                "t={} {}",
                s.period(),
                s.collapse_deviation()
            );
        }
    }

    #[test]
    fn single_period_is_one_put() {
        let m = BlackScholesModel::constant(0.3, 1.0, 1).unwrap();
        let spec = GuaranteeSpec::plain(1, 1.0, 10.0, 12.0).unwrap();
        let res = backward_markov_value(&m, &spec, &small_cfg()).unwrap();
        assert_eq!(res.value, m.put(0, 10.0, 12.0));
    }
}
