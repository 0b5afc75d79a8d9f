//! Tabulated log-return densities and the vanilla prices they imply under (A2).
//!
//! With `y = ln(K/S)`, `F(y) = ∫_{-∞}^y q` and `G(y) = ∫_{-∞}^y e^ξ q(ξ) dξ`, a zero-rate put is
//! `P = K F(y) − S G(y)`; spot and strike derivatives follow from the same two functions.

use crate::error::{Error, Result};
use crate::quad::find_support;

pub const DEFAULT_TABLE_NODES: usize = 16_385;
pub const DENSITY_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    lo: f64,
    h: f64,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    exp_cdf: Vec<f64>,
}

impl DensityTable {
    /// Tabulate `density` on the interval where it exceeds [`DENSITY_CUTOFF`], searching
    /// outward from `center` in steps of `scale`.
    pub fn build<F: Fn(f64) -> f64>(
        density: F,
        center: f64,
        scale: f64,
        n_nodes: usize,
    ) -> Result<Self> {
        if !(scale > 0.0) || !center.is_finite() {
            return Err(Error::invalid(
                "density",
                format!("bad center {center} or scale {scale}"),
            ));
        }
        let (lo, hi) = find_support(&density, center, 0.5 * scale, DENSITY_CUTOFF);
        Self::on_interval(density, lo, hi, n_nodes)
    }

    pub fn on_interval<F: Fn(f64) -> f64>(
        density: F,
        lo: f64,
        hi: f64,
        n_nodes: usize,
    ) -> Result<Self> {
        if !(hi > lo) || n_nodes < 3 {
            return Err(Error::invalid(
                "density",
                format!("empty table interval [{lo}, {hi}]"),
            ));
        }
        let n = n_nodes;
        let h = (hi - lo) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
        let pdf: Vec<f64> = xs.iter().map(|&x| density(x)).collect();
        if let Some(bad) = pdf.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid(
                "density",
                format!("density is {} at ξ = {}", pdf[bad], xs[bad]),
            ));
        }
        let mut cdf = Vec::with_capacity(n);
        let mut exp_cdf = Vec::with_capacity(n);
        let (mut f, mut g) = (0.0, 0.0);
        cdf.push(0.0);
        exp_cdf.push(0.0);
        for i in 0..n - 1 {
            let xm = xs[i] + 0.5 * h;
            let pm = density(xm);
            f += h / 6.0 * (pdf[i] + 4.0 * pm + pdf[i + 1]);
            g += h / 6.0
                * (pdf[i] * xs[i].exp() + 4.0 * pm * xm.exp() + pdf[i + 1] * xs[i + 1].exp());
            cdf.push(f);
            exp_cdf.push(g);
        }
        Ok(Self {
            lo,
            h,
            pdf,
            cdf,
            exp_cdf,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.lo + self.h * (self.pdf.len() - 1) as f64)
    }

    pub fn len(&self) -> usize {
        self.pdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pdf.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.h
    }

    /// `∫ q` over the tabulated support.
    pub fn mass(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    /// `∫ e^ξ q` over the tabulated support.
    pub fn exp_mass(&self) -> f64 {
        *self.exp_cdf.last().unwrap()
    }

    fn locate(&self, xi: f64) -> Option<(usize, f64)> {
        let n = self.pdf.len();
        let p = (xi - self.lo) / self.h;
        if p < 0.0 || p > (n - 1) as f64 {
            return None;
        }
        let i = (p.floor() as usize).min(n - 2);
        Some((i, p - i as f64))
    }

    /// Density by Catmull-Rom interpolation of the nodal values, clamped at zero.
    pub fn pdf(&self, xi: f64) -> f64 {
        let Some((i, f)) = self.locate(xi) else {
            return 0.0;
        };
        let n = self.pdf.len();
        let p1 = self.pdf[i];
        let p2 = self.pdf[i + 1];
        let p0 = if i > 0 {
            self.pdf[i - 1]
        } else {
            2.0 * p1 - p2
        };
        let p3 = if i + 2 < n {
            self.pdf[i + 2]
        } else {
            2.0 * p2 - p1
        };
        let v = p1
            + 0.5
                * f
                * (p2 - p0
                    + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
        v.max(0.0)
    }

    fn hermite(&self, values: &[f64], slope: impl Fn(usize) -> f64, xi: f64) -> f64 {
        match self.locate(xi) {
            None if xi < self.lo => 0.0,
            None => *values.last().unwrap(),
            Some((i, f)) => {
                let f2 = f * f;
                let f3 = f2 * f;
                let h00 = 2.0 * f3 - 3.0 * f2 + 1.0;
                let h10 = f3 - 2.0 * f2 + f;
                let h01 = -2.0 * f3 + 3.0 * f2;
                let h11 = f3 - f2;
                h00 * values[i]
                    + h10 * self.h * slope(i)
                    + h01 * values[i + 1]
                    + h11 * self.h * slope(i + 1)
            }
        }
    }

    /// `F(ξ) = ∫_{-∞}^ξ q`, cubic Hermite between nodes.
    pub fn cdf(&self, xi: f64) -> f64 {
        self.hermite(&self.cdf, |i| self.pdf[i], xi)
    }

    /// `G(ξ) = ∫_{-∞}^ξ e^u q(u) du`.
    pub fn exp_cdf(&self, xi: f64) -> f64 {
        self.hermite(&self.exp_cdf, |i| self.pdf[i] * self.node(i).exp(), xi)
    }

    /// Zero-rate put `E[(K − S e^ξ)^+]`.
    pub fn put(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 {
            return 0.0;
        }
        if spot <= 0.0 {
            return strike;
        }
        let y = (strike / spot).ln();
        (strike * self.cdf(y) - spot * self.exp_cdf(y)).max(0.0)
    }

    pub fn delta(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 {
            return 0.0;
        }
        if spot <= 0.0 {
            return -self.exp_mass();
        }
        -self.exp_cdf((strike / spot).ln())
    }

    pub fn gamma(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 || spot <= 0.0 {
            return 0.0;
        }
        strike / (spot * spot) * self.pdf((strike / spot).ln())
    }

    pub fn dstrike_put(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 {
            return 0.0;
        }
        if spot <= 0.0 {
            return self.mass();
        }
        self.cdf((strike / spot).ln())
    }

    pub fn d2strike_put(&self, strike: f64, spot: f64) -> f64 {
        if strike <= 0.0 || spot <= 0.0 {
            return 0.0;
        }
        self.pdf((strike / spot).ln()) / strike
    }

    /// Mean and central moments `(mean, var, third)` by Simpson over the nodes.
    pub fn moments(&self) -> (f64, f64, f64) {
        let n = self.pdf.len();
        let w = |i: usize| {
            if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let integrate = |f: &dyn Fn(f64) -> f64| -> f64 {
            let s: f64 = (0..n).map(|i| w(i) * self.pdf[i] * f(self.node(i))).sum();
            s * self.h / 3.0
        };
        let mass = integrate(&|_| 1.0);
        let mean = integrate(&|x| x) / mass;
        let var = integrate(&|x| (x - mean).powi(2)) / mass;
        let third = integrate(&|x| (x - mean).powi(3)) / mass;
        (mean, var, third)
    }
}

/// Inverse-CDF sampler: `n` equally spaced log-return nodes with the CDF at each node,
/// linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingTable {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

pub const DEFAULT_SAMPLING_NODES: usize = 4096;

impl SamplingTable {
    /// Build from a CDF on `[lo, hi]`; the CDF is rescaled to run exactly from 0 to 1.
    pub fn from_cdf<F: Fn(f64) -> f64>(cdf: F, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 16 || !(hi > lo) {
            return Err(Error::invalid(
                "sampling_table",
                format!("need n >= 16 and lo < hi, got {n} [{lo}, {hi}]"),
            ));
        }
        let xs: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let raw: Vec<f64> = xs.iter().map(|&x| cdf(x)).collect();
        let (a, b) = (raw[0], raw[n - 1]);
        if !(b > a) {
            return Err(Error::invalid(
                "sampling_table",
                "CDF is flat on the table interval",
            ));
        }
        let mut out: Vec<f64> = raw.iter().map(|c| (c - a) / (b - a)).collect();
        for i in 1..n {
            if out[i] < out[i - 1] {
                out[i] = out[i - 1];
            }
        }
        out[n - 1] = 1.0;
        Ok(Self { xs, cdf: out })
    }

    pub fn from_table(table: &DensityTable, n: usize) -> Result<Self> {
        let (lo, hi) = table.support();
        Self::from_cdf(|x| table.cdf(x), lo, hi, n)
    }

    /// Log return for a uniform variate `u ∈ [0, 1]`.
    pub fn sample(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        let j = self.cdf.partition_point(|&c| c < u);
        if j == 0 {
            return self.xs[0];
        }
        if j >= n {
            return self.xs[n - 1];
        }
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[j - 1] + f * (self.xs[j] - self.xs[j - 1])
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `E[e^ξ]` under the piecewise-uniform density implied by the table.
    pub fn exp_mean(&self) -> f64 {
        let mut s = 0.0;
        for i in 1..self.xs.len() {
            let (a, b) = (self.xs[i - 1], self.xs[i]);
            let p = self.cdf[i] - self.cdf[i - 1];
            if p > 0.0 {
                s += p * (b.exp() - a.exp()) / (b - a);
            }
        }
        s
    }
}
