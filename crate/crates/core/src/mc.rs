//! Monte-Carlo oracle: simulates period log returns by inverse-CDF lookup and values the
//! guarantee claims, puts on contribution funds and vanilla puts directly.
//!
//! Path (or antithetic pair) `i` draws from a ChaCha8 stream `i` keyed by the master seed, and
//! per-chunk statistics are merged in a fixed order, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contract::GuaranteeSpec;
use crate::error::{ensure_positive, Error, Result};
use crate::model::{require_periods, OneFactorModel};
use crate::models::density::{SamplingTable, DEFAULT_SAMPLING_NODES};

const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 20_240_601,
            antithetic: false,
        }
    }
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64, antithetic: bool) -> Result<Self> {
        let cfg = Self {
            n_paths,
            seed,
            antithetic,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 100 {
            return Err(Error::invalid(
                "n_paths",
                format!("need at least 100 paths, got {}", self.n_paths),
            ));
        }
        Ok(())
    }

    /// Independent samples: paths, or pairs when antithetic.
    fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

/// Value with its standard error and per-claim breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub pipeline: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub n_paths: usize,
    pub seed: Option<u64>,
    /// `E[Z^(t)]` for `t = 1..N` when the pipeline produces it.
    pub breakdown: Vec<f64>,
}

impl PricingResult {
    pub fn deterministic(pipeline: impl Into<String>, value: f64) -> Self {
        Self {
            pipeline: pipeline.into(),
            value,
            std_error: None,
            n_paths: 0,
            seed: None,
            breakdown: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// `|self − other|` in units of the combined standard error (infinite if neither has one).
    pub fn z_score(&self, other: &PricingResult) -> f64 {
        let se =
            (self.std_error.unwrap_or(0.0).powi(2) + other.std_error.unwrap_or(0.0).powi(2)).sqrt();
        let d = (self.value - other.value).abs();
        if se > 0.0 {
            d / se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Inverse-CDF samplers for every period of a model, with the tabulation drift removed so
/// that `E[e^ξ]` equals `1/DF_t` exactly.
#[derive(Debug, Clone)]
pub struct ReturnSampler {
    tables: Vec<SamplingTable>,
    shifts: Vec<f64>,
    discount: Vec<f64>,
}

impl ReturnSampler {
    pub fn new(model: &dyn OneFactorModel) -> Result<Self> {
        Self::with_nodes(model, DEFAULT_SAMPLING_NODES)
    }

    pub fn with_nodes(model: &dyn OneFactorModel, nodes: usize) -> Result<Self> {
        let n = model.n_periods();
        let mut tables = Vec::with_capacity(n);
        let mut shifts = Vec::with_capacity(n);
        let mut discount = Vec::with_capacity(n);
        for t in 0..n {
            let (lo, hi) = model.log_return_range(t);
            let table = SamplingTable::from_cdf(|x| model.log_return_cdf(t, x), lo, hi, nodes)?;
            let df = model.discount_factor(t);
            shifts.push(-(table.exp_mean() * df).ln());
            tables.push(table);
            discount.push(df);
        }
        Ok(Self {
            tables,
            shifts,
            discount,
        })
    }

    pub fn n_periods(&self) -> usize {
        self.tables.len()
    }

    /// Log return of period `t` for the uniform variate `u`.
    pub fn log_return(&self, t: usize, u: f64) -> f64 {
        self.tables[t].sample(u) + self.shifts[t]
    }

    pub fn discount_factor(&self, t: usize) -> f64 {
        self.discount[t]
    }
}

/// Source of uniforms for one path; the antithetic twin replays the same stream as `1 − u`.
pub struct Uniforms {
    rng: ChaCha8Rng,
    flip: bool,
}

impl Uniforms {
    pub fn uniform(&mut self) -> f64 {
        let u: f64 = self.rng.random();
        if self.flip {
            1.0 - u
        } else {
            u
        }
    }
}

#[derive(Debug, Clone)]
struct Stats {
    n: f64,
    mean: f64,
    m2: f64,
    parts: Vec<f64>,
}

impl Stats {
    fn new(k: usize) -> Self {
        Self {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
            parts: vec![0.0; k],
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Stats) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
        for (a, b) in self.parts.iter_mut().zip(&o.parts) {
            *a += b;
        }
    }
}

/// Generic simulation driver. `path` draws its uniforms, writes per-claim amounts into the
/// slice (length `n_parts`) and returns the path payoff.
pub fn simulate<F>(pipeline: &str, cfg: &McConfig, n_parts: usize, path: F) -> Result<PricingResult>
where
    F: Fn(&mut Uniforms, &mut [f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let units = cfg.units();
    let chunks: Vec<Stats> = (0..units.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut st = Stats::new(n_parts);
            let mut parts = vec![0.0; n_parts];
            for i in c * CHUNK..((c + 1) * CHUNK).min(units) {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(i as u64);
                parts.iter_mut().for_each(|p| *p = 0.0);
                let x = if cfg.antithetic {
                    let mut a = Uniforms {
                        rng: rng.clone(),
                        flip: false,
                    };
                    let mut b = Uniforms { rng, flip: true };
                    let mut pb = vec![0.0; n_parts];
                    let va = path(&mut a, &mut parts);
                    let vb = path(&mut b, &mut pb);
                    for (p, q) in parts.iter_mut().zip(&pb) {
                        *p = 0.5 * (*p + q);
                    }
                    0.5 * (va + vb)
                } else {
                    path(&mut Uniforms { rng, flip: false }, &mut parts)
                };
                st.push(x);
                for (s, p) in st.parts.iter_mut().zip(&parts) {
                    *s += p;
                }
            }
            st
        })
        .collect();
    let mut total = Stats::new(n_parts);
    for c in &chunks {
        total.merge(c);
    }
    let var = total.m2 / (total.n - 1.0);
    Ok(PricingResult {
        pipeline: pipeline.to_string(),
        value: total.mean,
        std_error: Some((var / total.n).sqrt()),
        n_paths: if cfg.antithetic { 2 * units } else { units },
        seed: Some(cfg.seed),
        breakdown: total.parts.iter().map(|s| s / total.n).collect(),
    })
}

/// Draw one value per path; antithetic twins sit next to each other.
pub fn sample_paths<F>(cfg: &McConfig, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut Uniforms) -> f64 + Sync,
{
    cfg.validate()?;
    let per_unit: Vec<Vec<f64>> = (0..cfg.units())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            if cfg.antithetic {
                let a = f(&mut Uniforms {
                    rng: rng.clone(),
                    flip: false,
                });
                let b = f(&mut Uniforms { rng, flip: true });
                vec![a, b]
            } else {
                vec![f(&mut Uniforms { rng, flip: false })]
            }
        })
        .collect();
    Ok(per_unit.into_iter().flatten().collect())
}

/// Discounted guarantee claims `Σ_t DF(0,T_t) Z^(t)` with withdrawal `w ≥ 0`.
pub fn mc_claims_value(
    model: &dyn OneFactorModel,
    withdrawal: f64,
    initial_capital: f64,
    cfg: &McConfig,
) -> Result<PricingResult> {
    ensure_positive("initial_capital", initial_capital)?;
    if !(withdrawal >= 0.0) || !withdrawal.is_finite() {
        return Err(Error::invalid(
            "withdrawal",
            format!("must be >= 0, got {withdrawal}"),
        ));
    }
    let sampler = ReturnSampler::new(model)?;
    let n = model.n_periods();
    simulate("mc", cfg, n, |u, claims| {
        let mut x = initial_capital;
        let mut df = 1.0;
        for t in 1..=n {
            df *= sampler.discount_factor(t - 1);
            x = x * sampler.log_return(t - 1, u.uniform()).exp() - withdrawal;
            if x <= 0.0 {
                claims[t - 1] = -x * df;
                let mut d = df;
                for s in t + 1..=n {
                    d *= sampler.discount_factor(s - 1);
                    claims[s - 1] = withdrawal * d;
                }
                break;
            }
        }
        claims.iter().sum()
    })
}

/// Direct Monte-Carlo value of the plain guarantee.
pub fn mc_guarantee_value(
    model: &dyn OneFactorModel,
    spec: &GuaranteeSpec,
    cfg: &McConfig,
) -> Result<PricingResult> {
    require_periods(model, spec.n_periods())?;
    mc_claims_value(model, spec.withdrawal(), spec.initial_capital(), cfg)
}

/// `E[(K − Y_{N−})^+]` with `Y_0 = p`, `Y_{t+1} = Y_t R_{t+1} + p` and `Y_{N−} = Y_N − p`.
pub fn mc_put_on_contribution_fund(
    model: &dyn OneFactorModel,
    contribution: f64,
    strike: f64,
    cfg: &McConfig,
) -> Result<PricingResult> {
    ensure_positive("contribution", contribution)?;
    if !(strike >= 0.0) {
        return Err(Error::invalid(
            "strike",
            format!("must be >= 0, got {strike}"),
        ));
    }
    let sampler = ReturnSampler::new(model)?;
    let n = model.n_periods();
    simulate("mc", cfg, 0, |u, _| {
        let mut y = contribution;
        let mut df = 1.0;
        for t in 0..n {
            df *= sampler.discount_factor(t);
            y *= sampler.log_return(t, u.uniform()).exp();
            if t + 1 < n {
                y += contribution;
            }
        }
        df * (strike - y).max(0.0)
    })
}

/// Put on the asset over the first `periods` periods.
pub fn mc_vanilla_put(
    model: &dyn OneFactorModel,
    strike: f64,
    spot: f64,
    periods: usize,
    cfg: &McConfig,
) -> Result<PricingResult> {
    ensure_positive("spot", spot)?;
    if periods == 0 || periods > model.n_periods() {
        return Err(Error::invalid(
            "periods",
            format!("need 1..={}, got {periods}", model.n_periods()),
        ));
    }
    let sampler = ReturnSampler::new(model)?;
    simulate("mc", cfg, 0, |u, _| {
        let mut xi = 0.0;
        let mut df = 1.0;
        for t in 0..periods {
            xi += sampler.log_return(t, u.uniform());
            df *= sampler.discount_factor(t);
        }
        df * (strike - spot * xi.exp()).max(0.0)
    })
}

/// `E[S_N/S_0]` discounted; one by construction up to sampling error.
pub fn mc_martingale_check(model: &dyn OneFactorModel, cfg: &McConfig) -> Result<PricingResult> {
    let sampler = ReturnSampler::new(model)?;
    let n = model.n_periods();
    simulate("mc", cfg, 0, |u, _| {
        (0..n)
            .map(|t| sampler.discount_factor(t) * sampler.log_return(t, u.uniform()).exp())
            .product()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BlackScholesModel, VarianceGammaModel, VgParams};

    fn cfg(n: usize) -> McConfig {
        McConfig::new(n, 7, true).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(99, 1, false).is_err());
        assert!(McConfig::new(100, 1, false).is_ok());
    }

    #[test]
    fn deterministic_and_breakdown_sums() {
        let m = BlackScholesModel::constant(0.3, 1.0, 4).unwrap();
        let a = mc_claims_value(&m, 10.0, 40.0, &cfg(5000)).unwrap();
        let b = mc_claims_value(&m, 10.0, 40.0, &cfg(5000)).unwrap();
        assert_eq!(a, b);
        let s: f64 = a.breakdown.iter().sum();
        assert!((s - a.value).abs() <= 1e-10 * a.value);
        assert_eq!(a.breakdown.len(), 4);
    }

    #[test]
    fn degenerate_cases() {
        let m = BlackScholesModel::constant(0.3, 1.0, 3).unwrap();
        assert_eq!(
            mc_claims_value(&m, 0.0, 10.0, &cfg(1000)).unwrap().value,
            0.0
        );
        let quiet = BlackScholesModel::constant(1e-6, 1.0, 3).unwrap();
        assert_eq!(
            mc_claims_value(&quiet, 10.0, 30.0 * 1.01, &cfg(1000))
                .unwrap()
                .value,
            0.0
        );
        // X_0 < w depletes at once: N w − X_0
        let v = mc_claims_value(&quiet, 10.0, 4.0, &cfg(1000))
            .unwrap()
            .value;
        assert!((v - 26.0).abs() < 1e-3, "{v}");
        let p = mc_put_on_contribution_fund(&quiet, 10.0, 35.0, &cfg(1000))
            .unwrap()
            .value;
        assert!((p - 5.0).abs() < 1e-3, "{p}");
        assert_eq!(
            mc_put_on_contribution_fund(&m, 10.0, 0.0, &cfg(1000))
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn vanilla_puts_match_models() {
        let bs = BlackScholesModel::constant(0.2, 1.0, 1).unwrap();
        let r = mc_vanilla_put(&bs, 1.0, 1.0, 1, &cfg(100_000)).unwrap();
        assert!(
            (r.value - 0.079_655_674_554_057_7).abs() < 3.0 * r.std_error.unwrap(),
            "{r:?}"
        );
        let vg = VarianceGammaModel::new(VgParams::new(0.1213, 0.1686, -0.1436).unwrap(), 1.0, 1)
            .unwrap();
        let r = mc_vanilla_put(&vg, 0.9, 1.0, 1, &cfg(100_000)).unwrap();
        assert!(
            (r.value - vg.put(0, 0.9, 1.0)).abs() < 3.0 * r.std_error.unwrap(),
            "{r:?}"
        );
    }

    #[test]
    fn martingale_and_rates() {
        let bs = BlackScholesModel::constant(0.3, 1.0, 3)
            .unwrap()
            .with_rate(0.03)
            .unwrap();
        let r = mc_martingale_check(&bs, &cfg(20_000)).unwrap();
        assert!((r.value - 1.0).abs() < 3.0 * r.std_error.unwrap(), "{r:?}");
        let p = mc_vanilla_put(&bs, 1.0, 1.0, 1, &cfg(100_000)).unwrap();
        assert!((p.value - bs.put(0, 1.0, 1.0)).abs() < 3.0 * p.std_error.unwrap());
    }

    #[test]
    fn standard_error_scales_with_paths() {
        let m = BlackScholesModel::constant(0.3, 1.0, 2).unwrap();
        let se = |n| {
            mc_claims_value(&m, 10.0, 20.0, &McConfig::new(n, 3, false).unwrap())
                .unwrap()
                .std_error
                .unwrap()
        };
        let (a, b) = (se(1_000), se(100_000));
        assert!((a / b / 10.0 - 1.0).abs() < 0.2, "{a} {b}");
    }
}
