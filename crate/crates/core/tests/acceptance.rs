//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gmwb_core::adjoint::{log_return_moments, AdjointModel};
use gmwb_core::mc::mc_put_on_contribution_fund;
use gmwb_core::rollup::build_rollup_coefficients_from_bases;
use gmwb_core::weights::{replication_check, verify_boundary_conditions, BoundaryTolerances};
use gmwb_core::*;

const SEED: u64 = 20_240_601;

fn mc_cfg() -> McConfig {
    McConfig::new(100_000, SEED, true).unwrap()
}

fn bs(vol: f64, n: usize) -> BlackScholesModel {
    BlackScholesModel::constant(vol, 1.0, n).unwrap()
}

fn vg(n: usize) -> VarianceGammaModel {
    VarianceGammaModel::new(VgParams::new(0.1213, 0.1686, -0.1436).unwrap(), 1.0, n).unwrap()
}

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within_se(
    label: &str,
    exact: f64,
    mc: &PricingResult,
    k: f64,
) -> std::result::Result<(), String> {
    let se = mc.std_error.unwrap();
    let d = (exact - mc.value).abs();
    ensure(
        d <= k * se,
        format!(
            "{label}: {exact:.6} vs MC {:.6} differ by {:.2} SE",
            mc.value,
            d / se
        ),
    )
}

fn criterion_1() -> Outcome {
    let n = 5;
    let m = bs(0.3, n);
    let spec = GuaranteeSpec::plain(n, 1.0, 10.0, 50.0).unwrap();
    let start = Instant::now();
    let set = build_weights(&m, &spec, &WeightConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut worst_mass: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    for t in 0..n {
        let g = set.curve(t);
        worst_mass = worst_mass.max((g.mass() - 1.0).abs());
        worst_mean = worst_mean.max((g.mean() - (n - t) as f64 * 10.0).abs());
    }
    ensure(worst_mass <= 1e-6, format!("mass error {worst_mass:e}"))?;
    ensure(worst_mean <= 0.01, format!("mean error {worst_mean:e}"))?;
    let vars: Vec<f64> = (0..n).map(|t| set.curve(t).variance()).collect();
    ensure(
        vars.windows(2).all(|p| p[0] > p[1]),
        format!("variances not decreasing in t: {vars:?}"),
    )?;
    ensure(
        elapsed < Duration::from_secs(5),
        format!("runtime {elapsed:?}"),
    )?;
    Ok(format!(
        "mass err {worst_mass:.1e}, mean err {worst_mean:.1e}, runtime {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cases: Vec<(&str, Box<dyn OneFactorModel>, usize)> = vec![
        ("BS 0.25 N=2", Box::new(bs(0.25, 2)), 2),
        ("BS 0.3 N=5", Box::new(bs(0.3, 5)), 5),
        ("VG N=5", Box::new(vg(5)), 5),
    ];
    let mut worst: f64 = 0.0;
    for (label, model, n) in &cases {
        for m in [0.7, 1.0, 1.3] {
            let spec = GuaranteeSpec::plain(*n, 1.0, 10.0, *n as f64 * 10.0 / m).unwrap();
            let v = build_weights(model.as_ref(), &spec, &WeightConfig::default())
                .and_then(|s| s.value(model.as_ref(), spec.initial_capital()))
                .map_err(|e| e.to_string())?;
            let mc =
                mc_guarantee_value(model.as_ref(), &spec, &mc_cfg()).map_err(|e| e.to_string())?;
            within_se(&format!("{label} moneyness {m}"), v, &mc, 3.0)?;
            worst = worst.max((v - mc.value).abs() / mc.std_error.unwrap());
        }
    }
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(60),
        format!("runtime {elapsed:?}"),
    )?;
    Ok(format!(
        "9 cases, worst {worst:.2} SE, runtime {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_3() -> Outcome {
    let n = 5;
    let m = bs(0.3, n);
    let spec = GuaranteeSpec::plain(n, 1.0, 10.0, 50.0).unwrap();
    let err = |e: Error| e.to_string();
    let weights = build_weights(&m, &spec, &WeightConfig::default())
        .and_then(|s| s.value(&m, 50.0))
        .map_err(err)?;
    let adj = AdjointModel::new(&m).map_err(err)?;
    let sampled = price_via_adjoint(&m, &adj, 10.0, 0, 50.0, &mc_cfg()).map_err(err)?;
    let markov = backward_markov_value(&m, &spec, &MarkovConfig::default())
        .map_err(err)?
        .value;
    let se = sampled.std_error.unwrap();
    let pairs = [
        ("weights/adjoint", weights, sampled.value),
        ("markov/adjoint", markov, sampled.value),
        ("weights/markov", weights, markov),
    ];
    for (label, a, b) in pairs {
        let tol = (3.0 * se).max(0.005 * a.abs().max(b.abs()));
        ensure((a - b).abs() <= tol, format!("{label}: {a:.6} vs {b:.6}"))?;
    }
    Ok(format!(
        "weights {weights:.5}, adjoint {:.5} ± {se:.5}, markov {markov:.5}",
        sampled.value
    ))
}

fn criterion_4() -> Outcome {
    let n = 5;
    let w = 10.0;
    let m = bs(0.3, n);
    let spec = GuaranteeSpec::plain(n, 1.0, w, 50.0).unwrap();
    let set = build_weights(&m, &spec, &WeightConfig::default()).map_err(|e| e.to_string())?;
    let spots: Vec<f64> = (1..=50)
        .map(|i| i as f64 * 2.0 * n as f64 * w / 50.0)
        .collect();
    let mut worst: f64 = 0.0;
    for t in 1..=n {
        for p in replication_check(&m, &set, t, &spots).map_err(|e| e.to_string())? {
            worst = worst.max(p.error().abs());
        }
    }
    ensure(worst <= 1e-4 * w, format!("replication error {worst:e}"))?;
    Ok(format!("t=1..{n}, 50 spots, worst error {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let m = bs(0.3, 2);
    let w = 10.0;
    let spec = GuaranteeSpec::plain(2, 1.0, w, 20.0).unwrap();
    let res =
        backward_markov_value(&m, &spec, &MarkovConfig::default()).map_err(|e| e.to_string())?;
    let surface = &res.surfaces[0];
    let tol = BoundaryTolerances::default();
    let v0 = surface.value_at_zero();
    ensure(
        (v0 - 2.0 * w).abs() <= tol.at_zero * w,
        format!("V_1(0) = {v0}"),
    )?;
    let slices = surface.zeta_grid().len();
    for j in 0..slices {
        verify_boundary_conditions(surface, j)
            .check(w, &tol)
            .map_err(|e| e.to_string())?;
    }
    Ok(format!("V_1(0) = {v0}, {slices} zeta slices checked"))
}

fn criterion_6() -> Outcome {
    let err = |e: Error| e.to_string();
    let b = bs(0.3, 5);
    let v = vg(5);
    let mut notes = Vec::new();
    for (label, model) in [("BS", &b as &dyn OneFactorModel), ("VG", &v)] {
        let r = gamma_kernel_checks(model);
        r.check(1e-4).map_err(|e| format!("{label}: {e}"))?;
        ensure(
            r.chapman_kolmogorov_error.is_some(),
            format!("{label}: no Chapman-Kolmogorov samples"),
        )?;
        let adj = AdjointModel::new(model).map_err(err)?;
        for j in 0..model.n_periods() {
            let t = adj.table(j);
            let mass = (t.mass() - 1.0).abs();
            let mart = (t.exp_mass() - 1.0).abs();
            ensure(
                mass <= 1e-5 && mart <= 1e-5,
                format!("{label} adjoint period {j}: mass {mass:e}, martingale {mart:e}"),
            )?;
        }
        notes.push(format!(
            "{label} mass {:.0e} CK {:.0e}",
            r.mass_error,
            r.chapman_kolmogorov_error.unwrap()
        ));
    }
    let sa = self_adjointness_error(&b);
    ensure(sa < 1e-8, format!("BS self-adjointness {sa:e}"))?;
    let adj = AdjointModel::new(&v).map_err(err)?;
    let (_, _, skew) = log_return_moments(&v, 0).map_err(err)?;
    let (_, _, skew_adj) = log_return_moments(&adj, 0).map_err(err)?;
    ensure(
        skew * skew_adj < 0.0,
        format!("VG third moments {skew:e} and {skew_adj:e} have the same sign"),
    )?;
    Ok(format!(
        "{}, BS self-adjoint {sa:.0e}, VG skew {skew:.2e} -> {skew_adj:.2e}",
        notes.join(", ")
    ))
}

fn criterion_7() -> Outcome {
    let err = |e: Error| e.to_string();
    let n = 5;
    let (w, x0) = (10.0, 50.0);
    let m = bs(0.3, n);
    let spec = GuaranteeSpec::plain(n, 1.0, w, x0)
        .unwrap()
        .with_rollup(0.0)
        .map_err(err)?;
    let c = build_rollup_coefficients(&m, &spec, &RollupConfig::default()).map_err(err)?;
    for &(level, x) in &[(10.0, 12.0), (3.0, 1.0), (7.0, 30.0)] {
        let v = c.value(&m, n - 1, level, x).map_err(err)?;
        ensure(
            v == m.put(n - 1, level, x),
            format!("terminal value {v} is not the put"),
        )?;
    }
    let v = c.value(&m, 0, w, x0).map_err(err)?;
    let v2 = c.value(&m, 0, 2.0 * w, 2.0 * x0).map_err(err)?;
    ensure(
        (v2 - 2.0 * v).abs() <= 1e-9 * v2,
        format!("homogeneity {v2} vs 2 x {v}"),
    )?;
    let plain_spec = GuaranteeSpec::plain(n, 1.0, w, x0).unwrap();
    let plain = build_weights(&m, &plain_spec, &WeightConfig::default())
        .and_then(|s| s.value(&m, x0))
        .map_err(err)?;
    let big = build_rollup_coefficients_from_bases(
        &m,
        &vec![1e3 * n as f64; n],
        &RollupConfig::default(),
    )
    .and_then(|c| c.value(&m, 0, w, x0))
    .map_err(err)?;
    ensure(
        (big - plain).abs() <= 0.01 * plain,
        format!("large-A value {big} vs plain {plain}"),
    )?;
    let mc = mc_rollup_guarantee(&m, &spec, &mc_cfg()).map_err(err)?;
    within_se("roll-up", v, &mc, 3.0)?;
    let mc_plain = mc_guarantee_value(&m, &plain_spec, &mc_cfg()).map_err(err)?;
    ensure(
        v >= plain && mc.value >= mc_plain.value,
        format!(
            "roll-up {v} (MC {}) below plain {plain} (MC {})",
            mc.value, mc_plain.value
        ),
    )?;
    Ok(format!(
        "roll-up {v:.5}, MC {:.5} ± {:.5}, plain {plain:.5}, large-A {big:.5}",
        mc.value,
        mc.std_error.unwrap()
    ))
}

fn criterion_8() -> Outcome {
    let err = |e: Error| e.to_string();
    let m = bs(0.25, 2);
    let (p, k) = (10.0, 20.0);
    let v =
        put_on_contribution_fund_via_weights(&m, p, k, &WeightConfig::default()).map_err(err)?;
    let mc = mc_put_on_contribution_fund(&m, p, k, &mc_cfg()).map_err(err)?;
    within_se("dual put", v.value, &mc, 3.0)?;
    Ok(format!(
        "weights {:.5}, MC {:.5} ± {:.5}",
        v.value,
        mc.value,
        mc.std_error.unwrap()
    ))
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    for n in [2, 5] {
        let m = bs(0.3, n);
        let spec = GuaranteeSpec::plain(n, 1.0, 10.0, n as f64 * 10.0).unwrap();
        let reports = volga_by_moneyness(&m, &spec, &[1.0, 0.6], &SensitivityConfig::default())
            .map_err(|e| e.to_string())?;
        let (atm, otm) = (reports[0].net_volga, reports[1].net_volga);
        ensure(
            atm > 0.0,
            format!("N={n}: net volga {atm:e} at moneyness 1.0"),
        )?;
        ensure(
            otm < 0.0,
            format!("N={n}: net volga {otm:e} at moneyness 0.6"),
        )?;
        notes.push(format!("N={n}: {atm:.3e} / {otm:.3e}"));
    }
    Ok(notes.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("weight-curve laws", criterion_1),
        ("weights vs Monte Carlo", criterion_2),
        ("three-pipeline agreement", criterion_3),
        ("replication identity", criterion_4),
        ("boundary conditions", criterion_5),
        ("gamma kernel and adjoint", criterion_6),
        ("roll-up", criterion_7),
        ("dual put", criterion_8),
        ("volga sign pattern", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail}) [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
