use gmwb_core::weights::{parse_weight_csv, replication_check};
use gmwb_core::*;

fn mc() -> McConfig {
    McConfig::new(100_000, 11, true).unwrap()
}

#[test]
fn weights_match_monte_carlo_with_interest() {
    let m = BlackScholesModel::constant(0.25, 1.0, 4)
        .unwrap()
        .with_rate(0.03)
        .unwrap();
    let spec = GuaranteeSpec::plain(4, 1.0, 10.0, 40.0).unwrap();
    let set = build_weights(&m, &spec, &WeightConfig::default()).unwrap();
    let v = set.value(&m, 40.0).unwrap();
    let r = mc_guarantee_value(&m, &spec, &mc()).unwrap();
    assert!(
        (v - r.value).abs() < 3.0 * r.std_error.unwrap(),
        "{v} {r:?}"
    );
    for t in 1..=4 {
        for p in replication_check(&m, &set, t, &[5.0, 15.0, 40.0, 90.0]).unwrap() {
            assert!(p.error().abs() < 1e-4 * 10.0, "{p:?}");
        }
    }
}

#[test]
fn rate_sensitive_pipelines_refuse_rates() {
    let m = BlackScholesModel::constant(0.25, 1.0, 3)
        .unwrap()
        .with_rate(0.03)
        .unwrap();
    assert!(AdjointModel::new(&m).is_err());
    let spec = GuaranteeSpec::plain(3, 1.0, 10.0, 30.0)
        .unwrap()
        .with_rollup(0.0)
        .unwrap();
    assert!(build_rollup_coefficients(&m, &spec, &RollupConfig::default()).is_err());
}

#[test]
fn hedge_portfolio_prices_the_guarantee() {
    let m =
        VarianceGammaModel::new(VgParams::new(0.1213, 0.1686, -0.1436).unwrap(), 1.0, 3).unwrap();
    let spec = GuaranteeSpec::plain(3, 1.0, 10.0, 30.0).unwrap();
    let set = build_weights(&m, &spec, &WeightConfig::default()).unwrap();
    let v = set.value(&m, 30.0).unwrap();
    let h = HedgePortfolio::from_weights(set.curve(0), 30.0);
    assert!((h.value(&m).unwrap() - v).abs() < 1e-10 * v);
    let csv = h.to_csv();
    assert_eq!(csv.lines().count(), h.legs.len() + 1);
}

#[test]
fn weight_csv_round_trips_through_text() {
    let m = BlackScholesModel::constant(0.3, 1.0, 3).unwrap();
    let spec = GuaranteeSpec::plain(3, 1.0, 10.0, 30.0).unwrap();
    let set = build_weights(&m, &spec, &WeightConfig::default()).unwrap();
    for g in set.curves() {
        let (k, w, atom) = parse_weight_csv(&g.to_csv()).unwrap();
        assert_eq!(k, g.strikes());
        assert_eq!(w, g.density());
        assert_eq!(atom, g.atom());
    }
}

#[test]
fn pricing_results_serialize() {
    let m = BlackScholesModel::constant(0.3, 1.0, 2).unwrap();
    let spec = GuaranteeSpec::plain(2, 1.0, 10.0, 20.0).unwrap();
    let r = mc_guarantee_value(&m, &spec, &McConfig::new(1_000, 3, false).unwrap()).unwrap();
    let back: PricingResult = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.breakdown.len(), 2);
    let again = mc_guarantee_value(&m, &spec, &McConfig::new(1_000, 3, false).unwrap()).unwrap();
    assert_eq!(again.value, r.value);
}
