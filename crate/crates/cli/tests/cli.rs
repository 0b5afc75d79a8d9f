use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gmwb_core::weights::parse_weight_csv;
use tempfile::TempDir;

const BS: &str = "\
[model]
kind = black_scholes
vol = 0.3

[guarantee]
n_periods = 5
dt = 1
withdrawal = 10
initial_capital = 50

[numerics]
mc_paths = 20000
seed = 5
antithetic = true
";

fn setup(config: &str) -> (TempDir, std::path::PathBuf) {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("run.ini");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn gmwb(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmwb"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn price_writes_tagged_json() {
    let (dir, cfg) = setup(BS);
    let out = dir.path().join("out");
    let o = gmwb(&cfg, &out, &["price"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json(&out.join("price_weights.json"));
    assert_eq!(v["pipeline"], "weights");
    let value = v["value"].as_f64().unwrap();
    assert!(value > 8.0 && value < 9.5, "{value}");
}

#[test]
fn all_pipelines_report_their_spread() {
    let (dir, cfg) = setup(BS);
    let out = dir.path().join("out");
    let o = gmwb(&cfg, &out, &["price", "--pipeline", "all"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for p in ["weights", "adjoint", "markov"] {
        assert_eq!(json(&out.join(format!("price_{p}.json")))["pipeline"], p);
    }
    let s = json(&out.join("price_summary.json"));
    assert_eq!(s["values"].as_array().unwrap().len(), 3);
    assert!(s["max_relative_difference"].as_f64().unwrap() < 0.02);
}

#[test]
fn invalid_vol_exits_with_validation_code() {
    let (dir, cfg) = setup(&BS.replace("vol = 0.3", "vol = 0"));
    let o = gmwb(&cfg, dir.path(), &["price"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vol"));
    let (dir, cfg) = setup(BS);
    let missing = Command::new(env!("CARGO_BIN_EXE_gmwb"))
        .arg("price")
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let bad_t = gmwb(&cfg, dir.path(), &["hedge", "--t", "9"]);
    assert_eq!(bad_t.status.code(), Some(1));
}

#[test]
fn tolerance_breach_exits_with_numerical_code() {
    let coarse = BS.replace(
        "antithetic = true",
        "antithetic = true\nmin_points = 11\nmax_points = 11\npoints_per_std = 1",
    );
    let (dir, cfg) = setup(&coarse);
    let o = gmwb(&cfg, dir.path(), &["weights"]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = gmwb(&cfg, dir.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn weight_files_have_the_expected_means() {
    let (dir, cfg) = setup(BS);
    let out = dir.path().join("w");
    let o = gmwb(&cfg, &out, &["weights"]);
    assert_eq!(o.status.code(), Some(0));
    for t in 0..5 {
        let (k, g, atom) =
            parse_weight_csv(&fs::read_to_string(out.join(format!("weights_t{t}.csv"))).unwrap())
                .unwrap();
        let mut mass = atom.map_or(0.0, |a| a.mass);
        let mut first = atom.map_or(0.0, |a| a.mass * a.location);
        for i in 1..k.len() {
            let h = k[i] - k[i - 1];
            mass += 0.5 * h * (g[i] + g[i - 1]);
            first += 0.5 * h * (g[i] * k[i] + g[i - 1] * k[i - 1]);
        }
        let expected = 10.0 * (5 - t) as f64;
        assert!(
            (first / mass - expected).abs() < 0.05,
            "t={t}: {}",
            first / mass
        );
    }
    assert!(!out.join("weights_t5.csv").exists());
}

#[test]
fn outputs_are_reproducible_and_seeded() {
    let (dir, cfg) = setup(BS);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for d in [&a, &b] {
        assert_eq!(
            gmwb(&cfg, d, &["price", "--pipeline", "adjoint"])
                .status
                .code(),
            Some(0)
        );
        assert_eq!(
            gmwb(&cfg, d, &["hedge", "--t", "1", "--fund", "35"])
                .status
                .code(),
            Some(0)
        );
    }
    for f in ["price_adjoint.json", "hedge_t1.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(
        gmwb(&cfg, &c, &["--seed", "6", "price", "--pipeline", "adjoint"])
            .status
            .code(),
        Some(0)
    );
    let (va, vc) = (
        json(&a.join("price_adjoint.json")),
        json(&c.join("price_adjoint.json")),
    );
    assert_eq!(vc["seed"], 6);
    assert_ne!(va["value"], vc["value"]);
}

#[test]
fn verify_passes_on_defaults() {
    let (dir, cfg) = setup(BS);
    let o = gmwb(&cfg, dir.path(), &["verify"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    let checks = json(&dir.path().join("verify.json"));
    assert!(checks
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["status"] != "fail"));
}

#[test]
fn variance_gamma_quarterly_matches_monte_carlo() {
    let config = "\
[model]
kind = variance_gamma
sigma = 0.1213
nu = 0.1686
theta = -0.1436

[guarantee]
n_periods = 8
dt = 0.25
withdrawal = 2.5
initial_capital = 20

[numerics]
mc_paths = 100000
antithetic = true

[compare]
maturities = 4, 8
moneyness = 0.7, 1.0, 1.3
";
    let (dir, cfg) = setup(config);
    let o = gmwb(&cfg, dir.path(), &["compare-mc"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let csv = fs::read_to_string(dir.path().join("compare_mc.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
    let s = gmwb(&cfg, dir.path(), &["sensitivities"]);
    assert_eq!(s.status.code(), Some(1));
}

#[test]
fn rollup_and_sensitivity_outputs() {
    let (dir, cfg) = setup(&BS.replace(
        "initial_capital = 50",
        "initial_capital = 50\nrollup_rate = 0",
    ));
    let o = gmwb(&cfg, dir.path(), &["price", "--pipeline", "all"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(&dir.path().join("price_rollup.json"))["value"]
        .as_f64()
        .unwrap();
    let mc = json(&dir.path().join("price_mc_rollup.json"));
    let se = mc["std_error"].as_f64().unwrap();
    assert!((r - mc["value"].as_f64().unwrap()).abs() < 3.0 * se);
    assert_eq!(
        gmwb(&cfg, dir.path(), &["price", "--pipeline", "markov"])
            .status
            .code(),
        Some(1)
    );
    let h = gmwb(
        &cfg,
        dir.path(),
        &["hedge", "--t", "1", "--fund", "40", "--level", "12"],
    );
    assert_eq!(h.status.code(), Some(0));
    let legs = fs::read_to_string(dir.path().join("hedge_t1.csv")).unwrap();
    assert!(legs.starts_with("leg_type,strike,quantity\ncash,"));

    let (dir, cfg) = setup(&BS.replace("n_periods = 5", "n_periods = 2"));
    let o = gmwb(
        &cfg,
        dir.path(),
        &["sensitivities", "--moneyness", "0.6,1.0"],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("volga.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0][3] < 0.0 && rows[1][3] > 0.0);
}
