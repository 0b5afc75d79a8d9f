//! INI run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gmwb_core::{
    BlackScholesModel, GuaranteeSpec, MarkovConfig, McConfig, OneFactorModel, VarianceGammaModel,
    VgParams, WeightConfig,
};
use ini::Ini;

/// Bad or missing configuration entry; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    BlackScholes { vols: Vec<f64>, rate: f64 },
    VarianceGamma { params: VgParams },
}

pub enum Model {
    BlackScholes(BlackScholesModel),
    VarianceGamma(VarianceGammaModel),
}

impl Model {
    pub fn as_dyn(&self) -> &dyn OneFactorModel {
        match self {
            Model::BlackScholes(m) => m,
            Model::VarianceGamma(m) => m,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub n_periods: usize,
    pub dt: f64,
    pub withdrawal: f64,
    pub initial_capital: f64,
    pub rollup_rate: Option<f64>,
    pub weights: WeightConfig,
    pub markov: MarkovConfig,
    pub mc: McConfig,
    pub out_dir: PathBuf,
    pub maturities: Vec<usize>,
    pub moneyness: Vec<f64>,
    pub csv: bool,
    pub json: bool,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("model", &["kind", "vol", "rate", "sigma", "nu", "theta"]),
    (
        "guarantee",
        &[
            "n_periods",
            "dt",
            "withdrawal",
            "initial_capital",
            "rollup_rate",
        ],
    ),
    (
        "numerics",
        &[
            "min_points",
            "max_points",
            "points_per_std",
            "tail_std",
            "markov_start_points",
            "markov_max_points",
            "markov_rel_tol",
            "mc_paths",
            "seed",
            "antithetic",
        ],
    ),
    ("output", &["directory", "formats"]),
    ("compare", &["maturities", "moneyness"]),
];

struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, String>,
}

impl Section<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| bad(format!("[{}] {key}: cannot parse {v:?}", self.name)))
            })
            .transpose()
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.parse(key)?
            .ok_or_else(|| bad(format!("[{}] {key} is required", self.name)))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<T>()
                            .map_err(|_| bad(format!("[{}] {key}: cannot parse {x:?}", self.name)))
                    })
                    .collect()
            })
            .transpose()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| bad(format!("malformed config: {e}")))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(bad(format!("key {k:?} appears before any [section]")));
                }
                continue;
            };
            let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == name) else {
                return Err(bad(format!("unknown section [{name}]")));
            };
            let entries = sections.entry(name.to_string()).or_default();
            for (k, v) in props.iter() {
                if !keys.contains(&k) {
                    return Err(bad(format!(
                        "unknown key {k:?} in [{name}]; expected one of {}",
                        keys.join(", ")
                    )));
                }
                entries.insert(k.to_string(), v.trim().to_string());
            }
        }
        let section =
            |name: &'static str, required: bool| -> Result<Section<'static>, ConfigError> {
                match sections.get(name) {
                    Some(entries) => Ok(Section {
                        name,
                        entries: entries.clone(),
                    }),
                    None if required => Err(bad(format!("missing section [{name}]"))),
                    None => Ok(Section {
                        name,
                        entries: BTreeMap::new(),
                    }),
                }
            };

        let m = section("model", true)?;
        let model = match m.require::<String>("kind")?.as_str() {
            "black_scholes" => {
                let vols: Vec<f64> = m
                    .list("vol")?
                    .ok_or_else(|| bad("[model] vol is required"))?;
                for &v in &vols {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(bad(format!("[model] vol must be > 0, got {v}")));
                    }
                }
                ModelSpec::BlackScholes {
                    vols,
                    rate: m.parse("rate")?.unwrap_or(0.0),
                }
            }
            "variance_gamma" => {
                let params =
                    VgParams::new(m.require("sigma")?, m.require("nu")?, m.require("theta")?)
                        .map_err(|e| bad(format!("[model] {e}")))?;
                if m.raw("rate").is_some_and(|r| r.parse::<f64>() != Ok(0.0)) {
                    return Err(bad(
                        "[model] rate: the variance gamma model is priced with zero rates",
                    ));
                }
                ModelSpec::VarianceGamma { params }
            }
            other => {
                return Err(bad(format!(
                    "[model] kind: expected black_scholes or variance_gamma, got {other:?}"
                )))
            }
        };

        let g = section("guarantee", true)?;
        let n_periods: usize = g.require("n_periods")?;
        let mut cfg = RunConfig {
            model,
            n_periods,
            dt: g.require("dt")?,
            withdrawal: g.require("withdrawal")?,
            initial_capital: g.require("initial_capital")?,
            rollup_rate: g.parse("rollup_rate")?,
            weights: WeightConfig::default(),
            markov: MarkovConfig::default(),
            mc: McConfig::default(),
            out_dir: PathBuf::from("out"),
            maturities: vec![n_periods],
            moneyness: vec![0.7, 1.0, 1.3],
            csv: true,
            json: true,
        };

        let n = section("numerics", false)?;
        let w = &mut cfg.weights;
        w.min_points = n.parse("min_points")?.unwrap_or(w.min_points);
        w.max_points = n.parse("max_points")?.unwrap_or(w.max_points);
        w.points_per_std = n.parse("points_per_std")?.unwrap_or(w.points_per_std);
        w.tail_std = n.parse("tail_std")?.unwrap_or(w.tail_std);
        let mk = &mut cfg.markov;
        mk.start_points = n.parse("markov_start_points")?.unwrap_or(mk.start_points);
        mk.max_points = n.parse("markov_max_points")?.unwrap_or(mk.max_points);
        mk.rel_tol = n.parse("markov_rel_tol")?.unwrap_or(mk.rel_tol);
        cfg.mc = McConfig {
            n_paths: n.parse("mc_paths")?.unwrap_or(cfg.mc.n_paths),
            seed: n.parse("seed")?.unwrap_or(cfg.mc.seed),
            antithetic: n.parse("antithetic")?.unwrap_or(cfg.mc.antithetic),
        };

        let o = section("output", false)?;
        if let Some(d) = o.raw("directory") {
            cfg.out_dir = PathBuf::from(d);
        }
        if let Some(formats) = o.list::<String>("formats")? {
            if let Some(f) = formats
                .iter()
                .find(|f| !matches!(f.as_str(), "csv" | "json"))
            {
                return Err(bad(format!(
                    "[output] formats: unsupported format {f:?}; use csv, json"
                )));
            }
            cfg.csv = formats.iter().any(|f| f == "csv");
            cfg.json = formats.iter().any(|f| f == "json");
        }

        let c = section("compare", false)?;
        if let Some(m) = c.list("maturities")? {
            cfg.maturities = m;
        }
        if let Some(m) = c.list("moneyness")? {
            cfg.moneyness = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |e: gmwb_core::Error| bad(format!("[guarantee] {e}"));
        self.spec().map_err(wrap)?;
        self.model().map_err(|e| bad(format!("[model] {e}")))?;
        self.mc
            .validate()
            .map_err(|e| bad(format!("[numerics] {e}")))?;
        if self.maturities.contains(&0) {
            return Err(bad("[compare] maturities must be >= 1"));
        }
        if let Some(&m) = self.moneyness.iter().find(|&&m| !(m > 0.0)) {
            return Err(bad(format!("[compare] moneyness must be > 0, got {m}")));
        }
        Ok(())
    }

    pub fn spec(&self) -> gmwb_core::Result<GuaranteeSpec> {
        let spec = GuaranteeSpec::plain(
            self.n_periods,
            self.dt,
            self.withdrawal,
            self.initial_capital,
        )?;
        match self.rollup_rate {
            Some(r) => spec.with_rollup(r),
            None => Ok(spec),
        }
    }

    pub fn model(&self) -> gmwb_core::Result<Model> {
        self.model_with_periods(self.n_periods)
    }

    /// The configured model over `n` periods; a single BS vol is repeated.
    pub fn model_with_periods(&self, n: usize) -> gmwb_core::Result<Model> {
        Ok(match &self.model {
            ModelSpec::BlackScholes { vols, rate } => {
                let vols = if vols.len() == 1 {
                    vec![vols[0]; n]
                } else if vols.len() >= n {
                    vols[..n].to_vec()
                } else {
                    return Err(gmwb_core::Error::InvalidInput {
                        field: "vol",
                        reason: format!("{} vols for {n} periods", vols.len()),
                    });
                };
                Model::BlackScholes(BlackScholesModel::new(vols, self.dt)?.with_rate(*rate)?)
            }
            ModelSpec::VarianceGamma { params } => {
                Model::VarianceGamma(VarianceGammaModel::new(*params, self.dt, n)?)
            }
        })
    }
}
