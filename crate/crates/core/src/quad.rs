//! Quadrature rules, grids and small special functions shared by the pipelines.

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Composite Simpson coefficients (1, 4, 2, ..., 4, 1) / 3 for an odd node count.
pub fn simpson_coefficients(n: usize) -> Vec<f64> {
    assert!(
        n >= 3 && n % 2 == 1,
        "simpson needs an odd node count >= 3, got {n}"
    );
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                1.0 / 3.0
            } else if i % 2 == 1 {
                4.0 / 3.0
            } else {
                2.0 / 3.0
            }
        })
        .collect()
}

/// Round up to the next odd integer, at least `min`.
pub fn odd_at_least(n: usize, min: usize) -> usize {
    let n = n.max(min);
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// Nodes uniformly spaced in `s = ln(k + shift)` between `lower` and `upper`,
/// carrying Simpson weights for `∫ f(k) dk` (the Jacobian `k + shift` is folded in).
#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    shift: f64,
    s0: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LogGrid {
    pub fn new(lower: f64, upper: f64, shift: f64, n_points: usize) -> Result<Self> {
        if !(lower + shift > 0.0) || !(upper > lower) || !upper.is_finite() {
            return Err(Error::invalid(
                "grid",
                format!("need 0 < lower + shift and lower < upper, got [{lower}, {upper}] shift {shift}"),
            ));
        }
        let n = odd_at_least(n_points, 3);
        let s0 = (lower + shift).ln();
        let s1 = (upper + shift).ln();
        let h = (s1 - s0) / (n - 1) as f64;
        let coeffs = simpson_coefficients(n);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (i, c) in coeffs.iter().enumerate() {
            let e = if i == n - 1 {
                upper + shift
            } else {
                (s0 + i as f64 * h).exp()
            };
            let k = if i == 0 { lower } else { e - shift };
            nodes.push(k);
            weights.push(c * h * (k + shift));
        }
        Ok(Self {
            shift,
            s0,
            h,
            nodes,
            weights,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.nodes[0]
    }

    pub fn upper(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Spacing in the log coordinate.
    pub fn log_step(&self) -> f64 {
        self.h
    }

    /// Log coordinate of a point.
    pub fn coordinate(&self, k: f64) -> f64 {
        (k + self.shift).ln()
    }

    /// Fractional node position of `k` (may fall outside `[0, len-1]`).
    pub fn position(&self, k: f64) -> f64 {
        (self.coordinate(k) - self.s0) / self.h
    }

    /// Half-open index range of nodes whose value lies in `[lo, hi]`.
    pub fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let n = self.nodes.len();
        let start = if lo + self.shift <= 0.0 {
            0
        } else {
            self.position(lo).floor().max(0.0) as usize
        };
        let end = if hi + self.shift <= 0.0 {
            0
        } else {
            let p = self.position(hi).ceil();
            if p < 0.0 {
                0
            } else {
                ((p as usize) + 1).min(n)
            }
        };
        start.min(n)..end.max(start.min(n))
    }

    /// Four-point interpolation stencil at `k`: first node index and Lagrange weights in the
    /// log coordinate, clamped to the end nodes outside the grid. Needs at least four nodes.
    pub fn stencil(&self, k: f64) -> (usize, [f64; 4]) {
        let n = self.nodes.len();
        debug_assert!(n >= 4);
        if k <= self.nodes[0] {
            return (0, [1.0, 0.0, 0.0, 0.0]);
        }
        if k >= self.nodes[n - 1] {
            return (n - 4, [0.0, 0.0, 0.0, 1.0]);
        }
        let p = self.position(k);
        let i = (p.floor() as usize).min(n - 2);
        let f = p - i as f64;
        // keep the stencil inside the grid
        if i == 0 {
            (0, lagrange4(f - 1.0))
        } else if i + 2 >= n {
            (n - 4, lagrange4(f + 1.0))
        } else {
            (i - 1, lagrange4(f))
        }
    }

    /// Cubic (four-point Lagrange) interpolation of nodal values in the log coordinate,
    /// clamped to the end values outside the grid.
    pub fn interpolate(&self, values: &[f64], k: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        let n = values.len();
        if n < 4 {
            if k <= self.nodes[0] {
                return values[0];
            }
            if k >= self.nodes[n - 1] {
                return values[n - 1];
            }
            let p = self.position(k);
            let i = (p.floor() as usize).min(n - 2);
            let f = p - i as f64;
            return values[i] * (1.0 - f) + values[i + 1] * f;
        }
        let (i0, w) = self.stencil(k);
        w[0] * values[i0] + w[1] * values[i0 + 1] + w[2] * values[i0 + 2] + w[3] * values[i0 + 3]
    }

    /// First and second derivatives in `k` of nodal values, by central differences in the
    /// log coordinate and second-order one-sided stencils at the edges.
    pub fn derivatives(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = values.len();
        assert!(n >= 4);
        let h = self.h;
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for i in 0..n {
            let (vs, vss) = if i == 0 {
                (
                    (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h),
                    (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / (h * h),
                )
            } else if i == n - 1 {
                (
                    (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h),
                    (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3]
                        - values[n - 4])
                        / (h * h),
                )
            } else {
                (
                    (values[i + 1] - values[i - 1]) / (2.0 * h),
                    (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h),
                )
            };
            let x = self.nodes[i] + self.shift;
            d1[i] = vs / x;
            d2[i] = (vss - vs) / (x * x);
        }
        (d1, d2)
    }
}

/// Four-point Lagrange weights for nodes at -1, 0, 1, 2 evaluated at `f`.
pub fn lagrange4(f: f64) -> [f64; 4] {
    [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ]
}

/// Adaptive Simpson quadrature on `[a, b]`; returns the value and an error estimate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<(f64, f64)> {
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> (f64, f64, bool) {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 {
            return (left + right + delta / 15.0, delta.abs() / 15.0, false);
        }
        if delta.abs() <= 15.0 * tol {
            return (left + right + delta / 15.0, delta.abs() / 15.0, true);
        }
        let (lv, le, lok) = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
        let (rv, re, rok) = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        (lv + rv, le + re, lok && rok)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let (value, err, ok) = recurse(f, a, b, fa, fm, fb, whole, tol, max_depth);
    if ok {
        Ok((value, err))
    } else {
        Err(Error::Quadrature {
            estimate: err,
            requested: tol,
        })
    }
}

/// Expand `[center - step, center + step]` outward in multiples of `step` until `f`
/// drops below `threshold` at both ends.
pub fn find_support<F: Fn(f64) -> f64>(f: F, center: f64, step: f64, threshold: f64) -> (f64, f64) {
    let mut lo = center - step;
    let mut hi = center + step;
    let mut iter = 0;
    while f(lo) > threshold && iter < 400 {
        lo -= step;
        iter += 1;
    }
    iter = 0;
    while f(hi) > threshold && iter < 400 {
        hi += step;
        iter += 1;
    }
    (lo, hi)
}

/// Kahan-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}
