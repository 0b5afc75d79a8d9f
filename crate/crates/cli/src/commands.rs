use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use gmwb_core::adjoint::AdjointModel;
use gmwb_core::rollup::RollupCoefficients;
use gmwb_core::weights::replication_check;
use gmwb_core::{
    backward_markov_value, build_rollup_coefficients, build_weights, gamma_kernel_checks,
    mc_guarantee_value, mc_rollup_guarantee, price_via_adjoint, volga_by_moneyness, HedgePortfolio,
    OneFactorModel, PricingResult, RollupConfig, SensitivityConfig,
};
use serde::Serialize;

use crate::config::{Model, RunConfig};

/// A verification or comparison outside tolerance; maps to exit code 2.
#[derive(Debug)]
pub struct Breach(pub String);

impl std::fmt::Display for Breach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Breach {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pipeline {
    Weights,
    Adjoint,
    Markov,
    All,
}

fn write(cfg: &RunConfig, name: &str, contents: &str) -> Result<()> {
    let is_csv = name.ends_with(".csv");
    if (is_csv && !cfg.csv) || (!is_csv && !cfg.json) {
        return Ok(());
    }
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let path = cfg.out_dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

fn rollup(cfg: &RunConfig, model: &dyn OneFactorModel) -> Result<RollupCoefficients> {
    Ok(build_rollup_coefficients(
        model,
        &cfg.spec()?,
        &RollupConfig::default(),
    )?)
}

fn price_one(
    cfg: &RunConfig,
    model: &dyn OneFactorModel,
    pipeline: Pipeline,
) -> Result<PricingResult> {
    let spec = cfg.spec()?;
    let (w, x0) = (cfg.withdrawal, cfg.initial_capital);
    Ok(match pipeline {
        Pipeline::Weights => {
            let v = build_weights(model, &spec, &cfg.weights)?.value(model, x0)?;
            PricingResult::deterministic("weights", v)
        }
        Pipeline::Adjoint => {
            let adj = AdjointModel::new(model)?;
            price_via_adjoint(model, &adj, w, 0, x0, &cfg.mc)?
        }
        Pipeline::Markov => PricingResult::deterministic(
            "markov",
            backward_markov_value(model, &spec, &cfg.markov)?.value,
        ),
        Pipeline::All => unreachable!("expanded by the caller"),
    })
}

#[derive(Serialize)]
struct PriceSummary {
    values: Vec<(String, f64)>,
    max_relative_difference: f64,
}

pub fn price(cfg: &RunConfig, pipeline: Pipeline) -> Result<()> {
    let model = cfg.model()?;
    let m = model.as_dyn();
    let results = if cfg.rollup_rate.is_some() {
        let statics = match pipeline {
            Pipeline::Weights | Pipeline::All => {
                let v = rollup(cfg, m)?.value(m, 0, cfg.withdrawal, cfg.initial_capital)?;
                PricingResult::deterministic("rollup", v)
            }
            other => bail!(gmwb_core::Error::Unsupported(format!(
                "roll-up contracts are priced by the weights pipeline, not {other:?}"
            ))),
        };
        let mut out = vec![statics];
        if pipeline == Pipeline::All {
            out.push(mc_rollup_guarantee(m, &cfg.spec()?, &cfg.mc)?);
        }
        out
    } else {
        let list = match pipeline {
            Pipeline::All => vec![Pipeline::Weights, Pipeline::Adjoint, Pipeline::Markov],
            p => vec![p],
        };
        list.into_iter()
            .map(|p| price_one(cfg, m, p))
            .collect::<Result<Vec<_>>>()?
    };
    for r in &results {
        write(
            cfg,
            &format!("price_{}.json", r.pipeline),
            &(r.to_json() + "\n"),
        )?;
        match r.std_error {
            Some(se) => println!(
                "{}: {:.6} (se {:.6}, {} paths)",
                r.pipeline, r.value, se, r.n_paths
            ),
            None => println!("{}: {:.6}", r.pipeline, r.value),
        }
    }
    if results.len() > 1 {
        let mut max_rel: f64 = 0.0;
        for (i, a) in results.iter().enumerate() {
            for b in &results[i + 1..] {
                max_rel = max_rel.max((a.value - b.value).abs() / a.value.abs().max(b.value.abs()));
            }
        }
        let summary = PriceSummary {
            values: results
                .iter()
                .map(|r| (r.pipeline.clone(), r.value))
                .collect(),
            max_relative_difference: max_rel,
        };
        write(cfg, "price_summary.json", &to_json(&summary))?;
        println!("max pairwise relative difference: {max_rel:.3e}");
    }
    Ok(())
}

pub fn weights(cfg: &RunConfig) -> Result<()> {
    let model = cfg.model()?;
    let m = model.as_dyn();
    if cfg.rollup_rate.is_some() {
        let c = rollup(cfg, m)?;
        for s in c.steps() {
            let mut text = format!("# alpha,{}\n# beta,{}\n", s.alpha, s.beta);
            text.push_str(&s.weight.to_csv());
            write(cfg, &format!("rollup_t{}.csv", s.period), &text)?;
            println!("t={}: alpha {:.6}, beta {:.6}", s.period, s.alpha, s.beta);
        }
        return Ok(());
    }
    let set = build_weights(m, &cfg.spec()?, &cfg.weights)?;
    for g in set.curves() {
        write(cfg, &format!("weights_t{}.csv", g.period()), &g.to_csv())?;
        println!(
            "t={}: mass {:.8}, mean {:.6}, variance {:.6}",
            g.period(),
            g.mass(),
            g.mean(),
            g.variance()
        );
    }
    write(
        cfg,
        "weights_diagnostics.json",
        &to_json(&set.diagnostics()),
    )?;
    Ok(())
}

pub fn hedge(cfg: &RunConfig, t: usize, fund: Option<f64>, level: Option<f64>) -> Result<()> {
    let model = cfg.model()?;
    let m = model.as_dyn();
    if t >= cfg.n_periods {
        bail!(gmwb_core::Error::InvalidInput {
            field: "t",
            reason: format!("hedge dates are 0..{}, got {t}", cfg.n_periods - 1),
        });
    }
    let fund = fund.unwrap_or(cfg.initial_capital);
    let portfolio = if cfg.rollup_rate.is_some() {
        rollup(cfg, m)?.portfolio(t, level.unwrap_or(cfg.withdrawal), fund)?
    } else {
        let set = build_weights(m, &cfg.spec()?, &cfg.weights)?;
        HedgePortfolio::from_weights(set.curve(t), fund)
    };
    write(cfg, &format!("hedge_t{t}.csv"), &portfolio.to_csv())?;
    println!(
        "t={t}: {} legs, value {:.6} at fund value {fund}",
        portfolio.legs.len(),
        portfolio.value(m)?
    );
    Ok(())
}

pub fn sensitivities(cfg: &RunConfig, moneyness: &[f64]) -> Result<()> {
    let Model::BlackScholes(bs) = cfg.model()? else {
        bail!(gmwb_core::Error::Unsupported(
            "forward vega and volga are defined for the black_scholes model".into()
        ));
    };
    let list = if moneyness.is_empty() {
        &cfg.moneyness[..]
    } else {
        moneyness
    };
    let spec = gmwb_core::GuaranteeSpec::plain(
        cfg.n_periods,
        cfg.dt,
        cfg.withdrawal,
        cfg.initial_capital,
    )?;
    let sens = SensitivityConfig {
        weights: cfg.weights,
        ..Default::default()
    };
    let reports = volga_by_moneyness(&bs, &spec, list, &sens)?;
    write(
        cfg,
        "volga.csv",
        &gmwb_core::sensitivities::volga_csv(&reports),
    )?;
    write(cfg, "sensitivities.json", &to_json(&reports))?;
    for r in &reports {
        println!(
            "moneyness {}: vega {:.6}, volga {:.6}, net volga {:.6}",
            r.moneyness, r.vega_total, r.volga_total, r.net_volga
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: String,
    status: &'static str,
    detail: String,
}

fn check(name: &str, outcome: Result<String>) -> Check {
    let (status, detail) = match outcome {
        Ok(d) => ("pass", d),
        Err(e) => match e.downcast_ref::<gmwb_core::Error>() {
            Some(gmwb_core::Error::Unsupported(why)) => ("skip", why.clone()),
            _ => ("fail", format!("{e:#}")),
        },
    };
    Check {
        name: name.to_string(),
        status,
        detail,
    }
}

fn ensure(ok: bool, msg: String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Breach(msg).into())
    }
}

pub fn verify(cfg: &RunConfig) -> Result<()> {
    let model = cfg.model()?;
    let m = model.as_dyn();
    let spec = gmwb_core::GuaranteeSpec::plain(
        cfg.n_periods,
        cfg.dt,
        cfg.withdrawal,
        cfg.initial_capital,
    )?;
    let (n, w) = (cfg.n_periods, cfg.withdrawal);
    let set = build_weights(m, &spec, &cfg.weights);
    let mut checks = Vec::new();

    checks.push(check(
        "weight curve mass and mean",
        (|| {
            let set = set.as_ref().map_err(Clone::clone)?;
            let mut mass: f64 = 0.0;
            let mut mean: f64 = 0.0;
            for g in set.curves() {
                mass = mass.max((g.mass() - 1.0).abs());
                let expected = set.diagnostics()[g.period()].expected_mean;
                mean = mean.max((g.mean() - expected).abs());
            }
            ensure(mass <= 1e-6, format!("mass error {mass:.3e}"))?;
            ensure(mean <= 1e-3 * w, format!("mean error {mean:.3e}"))?;
            let vars: Vec<f64> = set.curves().iter().map(|g| g.variance()).collect();
            ensure(
                vars.windows(2).all(|p| p[0] > p[1]),
                "variance is not increasing backwards in time".into(),
            )?;
            Ok(format!("mass error {mass:.1e}, mean error {mean:.1e}"))
        })(),
    ));

    checks.push(check(
        "replication identity",
        (|| {
            let set = set.as_ref().map_err(Clone::clone)?;
            let spots: Vec<f64> = (1..=50)
                .map(|i| i as f64 * 2.0 * n as f64 * w / 50.0)
                .collect();
            let mut worst: f64 = 0.0;
            for t in 1..=n {
                for p in replication_check(m, set, t, &spots)? {
                    worst = worst.max(p.error().abs());
                }
            }
            ensure(worst <= 1e-4 * w, format!("worst error {worst:.3e}"))?;
            Ok(format!("worst error {worst:.1e} over 50 spots"))
        })(),
    ));

    checks.push(check(
        "gamma kernel identities",
        (|| {
            let r = gamma_kernel_checks(m);
            r.check(1e-4)?;
            Ok(format!(
                "mass {:.1e}, moment {:.1e}, Chapman-Kolmogorov {}",
                r.mass_error,
                r.moment_error,
                r.chapman_kolmogorov_error
                    .map_or("n/a".into(), |e| format!("{e:.1e}"))
            ))
        })(),
    ));

    checks.push(check(
        "adjoint mass and martingale",
        (|| {
            if !m.zero_rates() {
                bail!(gmwb_core::Error::Unsupported(
                    "the adjoint needs zero rates".into()
                ));
            }
            let adj = AdjointModel::new(m)?;
            let worst = (0..n)
                .map(|j| {
                    (adj.table(j).mass() - 1.0)
                        .abs()
                        .max((adj.table(j).exp_mass() - 1.0).abs())
                })
                .fold(0.0, f64::max);
            ensure(worst <= 1e-5, format!("worst defect {worst:.3e}"))?;
            Ok(format!("worst defect {worst:.1e}"))
        })(),
    ));

    checks.push(check(
        "surface boundary conditions",
        (|| {
            if n < 2 {
                bail!(gmwb_core::Error::Unsupported(
                    "needs at least two periods".into()
                ));
            }
            let res = backward_markov_value(m, &spec, &cfg.markov)?;
            for r in &res.boundary {
                r.check(w, &cfg.markov.boundary)?;
            }
            let v = set
                .as_ref()
                .map_err(Clone::clone)?
                .value(m, cfg.initial_capital)?;
            let rel = (res.value - v).abs() / v;
            ensure(
                rel <= 5e-3,
                format!("surface {:.6} vs weights {v:.6}", res.value),
            )?;
            Ok(format!(
                "{} slices, surface vs weights {rel:.1e}",
                res.boundary.len()
            ))
        })(),
    ));

    checks.push(check(
        "monte carlo agreement",
        (|| {
            let v = set
                .as_ref()
                .map_err(Clone::clone)?
                .value(m, cfg.initial_capital)?;
            let r = mc_guarantee_value(m, &spec, &cfg.mc)?;
            let se = r.std_error.unwrap_or(0.0);
            ensure(
                (v - r.value).abs() <= 3.0 * se,
                format!("weights {v:.6} vs MC {:.6} (se {se:.6})", r.value),
            )?;
            Ok(format!("weights {v:.6}, MC {:.6} (se {se:.6})", r.value))
        })(),
    ));

    if cfg.rollup_rate.is_some() {
        checks.push(check(
            "roll-up homogeneity and terminal put",
            (|| {
                let c = rollup(cfg, m)?;
                let x = cfg.initial_capital;
                let v = c.value(m, 0, w, x)?;
                let v2 = c.value(m, 0, 2.0 * w, 2.0 * x)?;
                ensure(
                    (v2 - 2.0 * v).abs() <= 1e-9 * v2,
                    format!("{v2} vs 2 x {v}"),
                )?;
                let last = c.value(m, n - 1, w, x)?;
                ensure(last == m.put(n - 1, w, x), format!("terminal value {last}"))?;
                Ok(format!("value {v:.6}"))
            })(),
        ));
    }

    write(cfg, "verify.json", &to_json(&checks))?;
    let mut failed = 0;
    for c in &checks {
        println!("{:<4} {}: {}", c.status.to_uppercase(), c.name, c.detail);
        failed += usize::from(c.status == "fail");
    }
    if failed > 0 {
        return Err(Breach(format!("{failed} invariant checks failed")).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct CompareRow {
    n_periods: usize,
    maturity: f64,
    moneyness: f64,
    initial_capital: f64,
    static_value: f64,
    mc_value: f64,
    std_error: f64,
    relative_difference: f64,
    within_tolerance: bool,
}

pub fn compare_mc(cfg: &RunConfig) -> Result<()> {
    let mut rows = Vec::new();
    for &n in &cfg.maturities {
        let model = cfg.model_with_periods(n)?;
        let m = model.as_dyn();
        for &mny in &cfg.moneyness {
            let x0 = n as f64 * cfg.withdrawal / mny;
            let mut spec = gmwb_core::GuaranteeSpec::plain(n, cfg.dt, cfg.withdrawal, x0)?;
            let (statics, mc) = if let Some(r) = cfg.rollup_rate {
                spec = spec.with_rollup(r)?;
                let c = build_rollup_coefficients(m, &spec, &RollupConfig::default())?;
                (
                    c.value(m, 0, cfg.withdrawal, x0)?,
                    mc_rollup_guarantee(m, &spec, &cfg.mc)?,
                )
            } else {
                let v = build_weights(m, &spec, &cfg.weights)?.value(m, x0)?;
                (v, mc_guarantee_value(m, &spec, &cfg.mc)?)
            };
            let se = mc.std_error.unwrap_or(0.0);
            let diff = (statics - mc.value).abs();
            rows.push(CompareRow {
                n_periods: n,
                maturity: n as f64 * cfg.dt,
                moneyness: mny,
                initial_capital: x0,
                static_value: statics,
                mc_value: mc.value,
                std_error: se,
                relative_difference: diff / statics.abs(),
                within_tolerance: diff <= (3.0 * se).max(5e-3 * statics.abs()),
            });
        }
    }
    let mut csv = String::from(
        "n_periods,maturity,moneyness,initial_capital,static_value,mc_value,std_error,relative_difference,within_tolerance\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.n_periods,
            r.maturity,
            r.moneyness,
            r.initial_capital,
            r.static_value,
            r.mc_value,
            r.std_error,
            r.relative_difference,
            r.within_tolerance
        );
        println!(
            "N={} T={} moneyness {}: static {:.6}, MC {:.6} (se {:.6}){}",
            r.n_periods,
            r.maturity,
            r.moneyness,
            r.static_value,
            r.mc_value,
            r.std_error,
            if r.within_tolerance {
                ""
            } else {
                "  OUTSIDE TOLERANCE"
            }
        );
    }
    write(cfg, "compare_mc.csv", &csv)?;
    write(cfg, "compare_mc.json", &to_json(&rows))?;
    let bad = rows.iter().filter(|r| !r.within_tolerance).count();
    if bad > 0 {
        return Err(Breach(format!("{bad} cells outside max(3 SE, 0.5%)")).into());
    }
    Ok(())
}
