use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::LogGrid;

/// Point mass of a weight curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Put weights `g_t` on a strike grid, plus an optional point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightCurve {
    period: usize,
    grid: Option<LogGrid>,
    density: Vec<f64>,
    atom: Option<Atom>,
}

impl WeightCurve {
    pub fn new(period: usize, grid: LogGrid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::invalid(
                "density",
                format!("{} values for {} grid points", density.len(), grid.len()),
            ));
        }
        if let Some(i) = density.iter().position(|g| !g.is_finite()) {
            return Err(Error::invalid(
                "density",
                format!("non-finite weight at strike {}", grid.nodes()[i]),
            ));
        }
        Ok(Self {
            period,
            grid: Some(grid),
            density,
            atom: None,
        })
    }

    /// Pure point mass, e.g. `g_{N−1} = δ_w`.
    pub fn point_mass(period: usize, location: f64, mass: f64) -> Self {
        Self {
            period,
            grid: None,
            density: Vec::new(),
            atom: Some(Atom { location, mass }),
        }
    }

    pub fn with_atom(mut self, atom: Atom) -> Self {
        self.atom = Some(atom);
        self
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn grid(&self) -> Option<&LogGrid> {
        self.grid.as_ref()
    }

    pub fn strikes(&self) -> &[f64] {
        self.grid.as_ref().map_or(&[], |g| g.nodes())
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn atom(&self) -> Option<Atom> {
        self.atom
    }

    /// `∫ f(k) g(k) dk` over the continuous part plus the atom contribution.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let continuous = match &self.grid {
            Some(grid) => grid
                .nodes()
                .iter()
                .zip(grid.weights())
                .zip(&self.density)
                .map(|((&k, &w), &g)| if g == 0.0 { 0.0 } else { w * g * f(k) })
                .sum(),
            None => 0.0,
        };
        continuous + self.atom.map_or(0.0, |a| a.mass * f(a.location))
    }

    pub fn mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|k| k) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.integrate(|k| (k - m) * (k - m)) / self.mass()
    }

    /// Interpolated density at `k` (zero outside the grid).
    pub fn density_at(&self, k: f64) -> f64 {
        match &self.grid {
            Some(grid) if k >= grid.lower() && k <= grid.upper() => {
                grid.interpolate(&self.density, k).max(0.0)
            }
            _ => 0.0,
        }
    }

    /// Distribution function of the normalized curve; the continuous part is integrated with
    /// the trapezoid rule in `k` and interpolated linearly between nodes.
    pub fn cdf_at(&self, k: f64) -> f64 {
        let mut acc = self
            .atom
            .map_or(0.0, |a| if k >= a.location { a.mass } else { 0.0 });
        if let Some(grid) = &self.grid {
            let x = grid.nodes();
            let g = &self.density;
            for i in 1..x.len() {
                if x[i - 1] >= k {
                    break;
                }
                let hi = x[i].min(k);
                let gk = g[i - 1] + (g[i] - g[i - 1]) * (hi - x[i - 1]) / (x[i] - x[i - 1]);
                acc += 0.5 * (g[i - 1] + gk) * (hi - x[i - 1]);
            }
        }
        acc / self.mass()
    }

    /// Scale the continuous part and the atom so the total mass is one.
    pub fn renormalized(&self) -> Self {
        let m = self.mass();
        let mut out = self.clone();
        for g in &mut out.density {
            *g /= m;
        }
        if let Some(a) = &mut out.atom {
            a.mass /= m;
        }
        out
    }

    /// CSV with header `strike,weight`; the atom goes on a `# atom,<location>,<mass>` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strike,weight\n");
        if let Some(a) = self.atom {
            let _ = writeln!(out, "# atom,{:?},{:?}", a.location, a.mass);
        }
        for (k, g) in self.strikes().iter().zip(&self.density) {
            let _ = writeln!(out, "{k:?},{g:?}");
        }
        out
    }
}

/// Parsed CSV weight file: `(strikes, weights, atom)`.
pub fn parse_weight_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>, Option<Atom>)> {
    let mut strikes = Vec::new();
    let mut weights = Vec::new();
    let mut atom = None;
    let bad = |line: &str| Error::invalid("csv", format!("malformed line {line:?}"));
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line == "strike,weight" {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# atom,") {
            let mut it = rest.split(',').map(|v| v.trim().parse::<f64>());
            match (it.next(), it.next()) {
                (Some(Ok(location)), Some(Ok(mass))) => atom = Some(Atom { location, mass }),
                _ => return Err(bad(line)),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',').map(|v| v.trim().parse::<f64>());
        match (it.next(), it.next()) {
            (Some(Ok(k)), Some(Ok(g))) => {
                strikes.push(k);
                weights.push(g);
            }
            _ => return Err(bad(line)),
        }
    }
    Ok((strikes, weights, atom))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let grid = LogGrid::new(10.0, 100.0, 0.0, 5).unwrap();
        let c = WeightCurve::new(2, grid, vec![0.0, 0.1, 0.2, 0.1, 0.0])
            .unwrap()
            .with_atom(Atom {
                location: 10.0,
                mass: 0.25,
            });
        let (k, g, a) = parse_weight_csv(&c.to_csv()).unwrap();
        assert_eq!(k, c.strikes());
        assert_eq!(g, c.density());
        assert_eq!(a, c.atom());
        assert!(parse_weight_csv("strike,weight\n1,x\n").is_err());
    }

    #[test]
    fn point_mass_moments() {
        let c = WeightCurve::point_mass(4, 10.0, 1.0);
        assert_eq!(c.mass(), 1.0);
        assert_eq!(c.mean(), 10.0);
        assert_eq!(c.variance(), 0.0);
        assert_eq!(c.density_at(10.0), 0.0);
        assert!(c.to_csv().contains("# atom,10.0,1.0"));
    }
}
