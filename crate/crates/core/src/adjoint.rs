//! Reverse Γ-adjoint of a model with independent returns, the multi-contribution fund it
//! drives, and the two dualities between withdrawal and contribution funds.
//!
//! Adjoint period `j` mirrors base period `N−1−j`; its log-return density is
//! `q̃_j(ξ) = e^{−ξ} q_{N−1−j}(−ξ)`. With `Y_0 = w` and `Y_{s+1} = Y_s R̃_{s+1} + w`, the law of
//! `Y_s` is the weight curve `g_{N−s−1}`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};
use crate::mc::{sample_paths, simulate, McConfig, PricingResult, ReturnSampler};
use crate::model::{require_a2, require_zero_rates, OneFactorModel};
use crate::models::density::{DensityTable, DEFAULT_TABLE_NODES};
use crate::quad::{odd_at_least, simpson_coefficients, LogGrid};
use crate::weights::recursion::{integrate_kernel, WeightConfig};
use crate::weights::WeightCurve;

/// `e^{−ξ} q_{N−1−j}(−ξ)` straight from the base density.
pub fn adjoint_density(model: &dyn OneFactorModel, j: usize, xi: f64) -> f64 {
    let n = model.n_periods();
    (-xi).exp() * model.log_return_density(n - 1 - j, -xi)
}

/// Tabulated reverse Γ-adjoint model.
#[derive(Debug, Clone)]
pub struct AdjointModel {
    name: String,
    lengths: Vec<f64>,
    tables: Vec<Arc<DensityTable>>,
}

impl AdjointModel {
    pub fn new(model: &dyn OneFactorModel) -> Result<Self> {
        Self::with_nodes(model, DEFAULT_TABLE_NODES)
    }

    pub fn with_nodes(model: &dyn OneFactorModel, nodes: usize) -> Result<Self> {
        require_a2(model, "the adjoint construction")?;
        require_zero_rates(model, "the adjoint construction")?;
        let n = model.n_periods();
        let mut tables: Vec<Arc<DensityTable>> = Vec::with_capacity(n);
        let mut seen: Vec<(Vec<f64>, Arc<DensityTable>)> = Vec::new();
        for j in 0..n {
            let b = n - 1 - j;
            let (lo, hi) = model.log_return_range(b);
            // periods with identical densities share one table
            let probe: Vec<f64> = [-0.3, -0.1, 0.0, 0.05, 0.2]
                .iter()
                .map(|&x| model.log_return_density(b, x))
                .chain([lo, hi])
                .collect();
            if let Some((_, t)) = seen.iter().find(|(p, _)| *p == probe) {
                tables.push(t.clone());
                continue;
            }
            let table =
                DensityTable::on_interval(|x| adjoint_density(model, j, x), -hi, -lo, nodes)?;
            let loc = format!("adjoint period {j}");
            if (table.mass() - 1.0).abs() > 1e-5 {
                return Err(Error::tolerance(
                    "adjoint density mass",
                    loc,
                    table.mass() - 1.0,
                    1e-5,
                ));
            }
            if (table.exp_mass() - 1.0).abs() > 1e-5 {
                return Err(Error::tolerance(
                    "adjoint martingale condition",
                    loc,
                    table.exp_mass() - 1.0,
                    1e-5,
                ));
            }
            let table = Arc::new(table);
            seen.push((probe, table.clone()));
            tables.push(table);
        }
        Ok(Self {
            name: format!("{}_adjoint", model.name()),
            lengths: (0..n).map(|j| model.period_length(n - 1 - j)).collect(),
            tables,
        })
    }

    pub fn table(&self, j: usize) -> &DensityTable {
        &self.tables[j]
    }
}

impl OneFactorModel for AdjointModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_periods(&self) -> usize {
        self.tables.len()
    }

    fn period_length(&self, t: usize) -> f64 {
        self.lengths[t]
    }

    fn put(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.tables[t].put(strike, spot)
    }

    fn delta(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.tables[t].delta(strike, spot)
    }

    fn gamma(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.tables[t].gamma(strike, spot)
    }

    fn dstrike_put(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.tables[t].dstrike_put(strike, spot)
    }

    fn d2strike_put(&self, t: usize, strike: f64, spot: f64) -> f64 {
        self.tables[t].d2strike_put(strike, spot)
    }

    fn log_return_density(&self, t: usize, xi: f64) -> f64 {
        self.tables[t].pdf(xi)
    }

    fn log_return_cdf(&self, t: usize, xi: f64) -> f64 {
        self.tables[t].cdf(xi)
    }

    fn log_return_range(&self, t: usize) -> (f64, f64) {
        self.tables[t].support()
    }

    fn log_return_variance(&self, t: usize) -> f64 {
        self.tables[t].moments().1
    }

    fn satisfies_a2(&self) -> bool {
        true
    }
}

/// Largest `|q̃_j − q_j|` over each period's support; zero for self-adjoint models.
pub fn self_adjointness_error(model: &dyn OneFactorModel) -> f64 {
    let n = model.n_periods();
    (0..n)
        .map(|j| {
            let (lo, hi) = model.log_return_range(j);
            (0..=2000)
                .map(|i| {
                    let xi = lo + (hi - lo) * i as f64 / 2000.0;
                    (adjoint_density(model, j, xi) - model.log_return_density(j, xi)).abs()
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// `(mean, variance, third central moment)` of the base log return of period `t`.
pub fn log_return_moments(model: &dyn OneFactorModel, t: usize) -> Result<(f64, f64, f64)> {
    let (lo, hi) = model.log_return_range(t);
    Ok(DensityTable::on_interval(
        |x| model.log_return_density(t, x),
        lo,
        hi,
        DEFAULT_TABLE_NODES,
    )?
    .moments())
}

/// Results of the Γ-kernel identities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaKernelReport {
    /// `max_t |∫ Γ_t(K|s) ds − 1|`.
    pub mass_error: f64,
    /// `max_t |∫ s Γ_t(K|s) ds − K| / K`.
    pub moment_error: f64,
    /// Largest Chapman-Kolmogorov defect, `None` if the model has no composite kernels.
    pub chapman_kolmogorov_error: Option<f64>,
}

impl GammaKernelReport {
    pub fn check(&self, tol: f64) -> Result<()> {
        if !(self.mass_error <= tol) {
            return Err(Error::tolerance(
                "gamma kernel mass",
                "all periods",
                self.mass_error,
                tol,
            ));
        }
        if !(self.moment_error <= tol) {
            return Err(Error::tolerance(
                "gamma kernel first moment",
                "all periods",
                self.moment_error,
                tol,
            ));
        }
        if let Some(e) = self.chapman_kolmogorov_error {
            if !(e <= tol) {
                return Err(Error::tolerance(
                    "Chapman-Kolmogorov",
                    "sampled strikes",
                    e,
                    tol,
                ));
            }
        }
        Ok(())
    }
}

fn simpson(n: usize, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = odd_at_least(n, 3);
    let h = (hi - lo) / (n - 1) as f64;
    simpson_coefficients(n)
        .iter()
        .enumerate()
        .map(|(i, c)| c * h * f(lo + i as f64 * h))
        .sum()
}

/// Mass, first moment and Chapman-Kolmogorov property of the Γ kernels.
pub fn gamma_kernel_checks(model: &dyn OneFactorModel) -> GammaKernelReport {
    let n = model.n_periods();
    let strike = 1.0;
    let mut mass_error: f64 = 0.0;
    let mut moment_error: f64 = 0.0;
    for t in 0..n {
        let (lo, hi) = model.log_return_range(t);
        // s = K e^{−ξ}, ds = s dξ
        let mass = simpson(8001, lo, hi, |xi| {
            let s = strike * (-xi).exp();
            model.gamma(t, strike, s) * s
        });
        let moment = simpson(8001, lo, hi, |xi| {
            let s = strike * (-xi).exp();
            model.gamma(t, strike, s) * s * s
        });
        mass_error = mass_error.max((mass - 1.0).abs());
        moment_error = moment_error.max((moment / strike - 1.0).abs());
    }
    let mut ck: Option<f64> = None;
    for t in 0..n.saturating_sub(1) {
        let (lo, hi) = model.log_return_range(t);
        for &(k, s) in &[(1.0, 1.0), (0.8, 1.0), (1.25, 1.0), (1.0, 0.9)] {
            let Some(exact) = model.composite_gamma(t, t + 2, k, s) else {
                continue;
            };
            // m = S e^ξ, dm = m dξ
            let composed = simpson(8001, lo, hi, |xi| {
                let m = s * xi.exp();
                model.gamma(t + 1, k, m) * model.gamma(t, m, s) * m
            });
            let e = (composed - exact).abs();
            ck = Some(ck.map_or(e, |c| c.max(e)));
        }
    }
    GammaKernelReport {
        mass_error,
        moment_error,
        chapman_kolmogorov_error: ck,
    }
}

/// Samples of a fund driven by adjoint returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalFundDistribution {
    pub samples: Vec<f64>,
    pub seed: u64,
    pub antithetic: bool,
}

impl EmpiricalFundDistribution {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Standard error of the mean; antithetic twins are averaged first.
    pub fn std_error(&self) -> f64 {
        let units: Vec<f64> = if self.antithetic {
            self.samples
                .chunks(2)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect()
        } else {
            self.samples.clone()
        };
        let n = units.len() as f64;
        let m = units.iter().sum::<f64>() / n;
        let var = units.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }

    /// Kolmogorov-Smirnov distance to the distribution of `curve`.
    pub fn ks_distance(&self, curve: &WeightCurve) -> f64 {
        let mut xs = self.samples.clone();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = curve.cdf_at(x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// `Y_{n_steps}` of the contribution fund with `Y_0 = w`, driven by the adjoint returns.
pub fn sample_adjoint_fund(
    adjoint: &AdjointModel,
    withdrawal: f64,
    n_steps: usize,
    cfg: &McConfig,
) -> Result<EmpiricalFundDistribution> {
    ensure_positive("withdrawal", withdrawal)?;
    if n_steps >= adjoint.n_periods() {
        return Err(Error::invalid(
            "n_steps",
            format!("at most {} steps, got {n_steps}", adjoint.n_periods() - 1),
        ));
    }
    let sampler = ReturnSampler::new(adjoint)?;
    let samples = sample_paths(cfg, |u| {
        let mut y = withdrawal;
        for s in 0..n_steps {
            y = y * sampler.log_return(s, u.uniform()).exp() + withdrawal;
        }
        y
    })?;
    Ok(EmpiricalFundDistribution {
        samples,
        seed: cfg.seed,
        antithetic: cfg.antithetic,
    })
}

/// `V_t = E^Q̃[P_t(Y_{N−t−1} | X_t)]`.
pub fn price_via_adjoint(
    model: &dyn OneFactorModel,
    adjoint: &AdjointModel,
    withdrawal: f64,
    t: usize,
    fund_value: f64,
    cfg: &McConfig,
) -> Result<PricingResult> {
    check_pair(model, adjoint)?;
    ensure_positive("withdrawal", withdrawal)?;
    ensure_positive("fund_value", fund_value)?;
    let n = model.n_periods();
    if t >= n {
        return Err(Error::invalid("t", format!("{t} outside 0..{n}")));
    }
    let sampler = ReturnSampler::new(adjoint)?;
    simulate("adjoint", cfg, 0, |u, _| {
        let mut y = withdrawal;
        for s in 0..n - t - 1 {
            y = y * sampler.log_return(s, u.uniform()).exp() + withdrawal;
        }
        model.put(t, y, fund_value)
    })
}

fn check_pair(model: &dyn OneFactorModel, adjoint: &AdjointModel) -> Result<()> {
    if model.n_periods() != adjoint.n_periods() {
        return Err(Error::invalid(
            "adjoint",
            format!(
                "{} adjoint periods for a {}-period model",
                adjoint.n_periods(),
                model.n_periods()
            ),
        ));
    }
    require_zero_rates(model, "adjoint pricing")
}

/// Histogram of the samples as a weight curve: one log-spaced bucket per Simpson panel.
pub fn empirical_weight_from_adjoint(
    samples: &EmpiricalFundDistribution,
    buckets: usize,
    period: usize,
) -> Result<WeightCurve> {
    if buckets == 0 || samples.len() < 10 * buckets {
        return Err(Error::invalid(
            "samples",
            format!(
                "{} samples for {buckets} buckets; need at least 10 per bucket",
                samples.len()
            ),
        ));
    }
    let (lo, hi) = samples
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if !(hi > lo * (1.0 + 1e-12)) {
        return Ok(WeightCurve::point_mass(period, lo, 1.0));
    }
    let grid = LogGrid::new(lo, hi, 0.0, 2 * buckets + 1)?;
    let nodes = grid.nodes();
    let mut counts = vec![0.0; buckets];
    let (l0, l1) = (lo.ln(), hi.ln());
    for &x in &samples.samples {
        let b = (((x.ln() - l0) / (l1 - l0)) * buckets as f64).floor() as usize;
        counts[b.min(buckets - 1)] += 1.0;
    }
    let n = samples.len() as f64;
    let dens: Vec<f64> = (0..buckets)
        .map(|b| counts[b] / n / (nodes[2 * b + 2] - nodes[2 * b]))
        .collect();
    let mut g = vec![0.0; nodes.len()];
    for b in 0..buckets {
        g[2 * b + 1] = dens[b];
    }
    for j in 0..=buckets {
        let left = if j > 0 { dens[j - 1] } else { dens[0] };
        let right = if j < buckets {
            dens[j]
        } else {
            dens[buckets - 1]
        };
        g[2 * j] = 0.5 * (left + right);
    }
    WeightCurve::new(period, grid, g)
}

/// Weights `g̃_t` of the put `(K − Y_{N−})^+` on a contribution fund with contribution `p`:
/// `g̃_{N−1} = δ_K`, `g̃_t(k) = ∫ Γ_{t+1}(k' | k + p) g̃_{t+1}(k') dk'` for `k > 0`.
pub fn dual_put_weights(
    model: &dyn OneFactorModel,
    contribution: f64,
    strike: f64,
    cfg: &WeightConfig,
) -> Result<Vec<WeightCurve>> {
    require_a2(model, "the dual put recursion")?;
    require_zero_rates(model, "the dual put recursion")?;
    ensure_positive("contribution", contribution)?;
    ensure_positive("strike", strike)?;
    let n = model.n_periods();
    let p = contribution;
    let mut rev = vec![WeightCurve::point_mass(n - 1, strike, 1.0)];
    for t in (0..n - 1).rev() {
        let periods = t + 1..n;
        let var: f64 = periods.clone().map(|j| model.log_return_variance(j)).sum();
        let v_min = periods
            .map(|j| model.log_return_variance(j).sqrt())
            .fold(f64::INFINITY, f64::min);
        let upper = strike * (cfg.tail_std * var.sqrt()).exp();
        let range = ((upper + p) / p).ln();
        let wanted = (range / (v_min / cfg.points_per_std)).ceil() as usize;
        let grid = LogGrid::new(
            0.0,
            upper,
            p,
            odd_at_least(wanted.min(cfg.max_points), cfg.min_points),
        )?;
        let next = rev.last().unwrap();
        let s = t + 1;
        let density = integrate_kernel(next, -p, &grid, model.log_return_range(s), |k, x| {
            model.gamma(s, k, x)
        });
        rev.push(WeightCurve::new(t, grid, density)?);
    }
    rev.reverse();
    Ok(rev)
}

/// `Ṽ_0 = ∫ g̃_0(k) P_0(k | p) dk`.
pub fn put_on_contribution_fund_via_weights(
    model: &dyn OneFactorModel,
    contribution: f64,
    strike: f64,
    cfg: &WeightConfig,
) -> Result<PricingResult> {
    let curves = dual_put_weights(model, contribution, strike, cfg)?;
    let v = curves[0].integrate(|k| model.put(0, k, contribution));
    Ok(PricingResult::deterministic("dual_weights", v))
}

/// `Ṽ_0 = E^Q̃[P_0(X̃_{N−1} | p) 1_{X̃ > 0}]` with the adjoint withdrawal fund
/// `X̃_0 = K`, `X̃_{s+1} = X̃_s R̃_{s+1} − p`, killed at depletion.
pub fn put_on_contribution_fund_via_adjoint(
    model: &dyn OneFactorModel,
    adjoint: &AdjointModel,
    contribution: f64,
    strike: f64,
    cfg: &McConfig,
) -> Result<PricingResult> {
    check_pair(model, adjoint)?;
    ensure_positive("contribution", contribution)?;
    ensure_positive("strike", strike)?;
    let n = model.n_periods();
    let sampler = ReturnSampler::new(adjoint)?;
    simulate("dual_adjoint", cfg, 0, |u, _| {
        let mut x = strike;
        for s in 0..n - 1 {
            x = x * sampler.log_return(s, u.uniform()).exp() - contribution;
            if x <= 0.0 {
                return 0.0;
            }
        }
        model.put(0, x, contribution)
    })
}
