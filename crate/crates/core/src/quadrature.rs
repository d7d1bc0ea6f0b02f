//! Gauss-Legendre and composite Simpson rules on a finite interval.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// `nodes`-point Gauss-Legendre on each of `panels` equal panels; exact for
    /// polynomials of degree `2·nodes - 1` per panel.
    GaussLegendre { nodes: usize, panels: usize },
    /// Composite Simpson over `panels` (even) subintervals, error `O(h^4)`.
    CompositeSimpson { panels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub a: f64,
    pub b: f64,
    pub rule: Rule,
}

impl QuadratureSpec {
    /// 64-node Gauss-Legendre on a single panel.
    pub fn gauss(a: f64, b: f64) -> Self {
        Self::gauss_panels(a, b, 64, 1)
    }

    pub fn gauss_panels(a: f64, b: f64, nodes: usize, panels: usize) -> Self {
        QuadratureSpec {
            a,
            b,
            rule: Rule::GaussLegendre { nodes, panels },
        }
    }

    pub fn simpson(a: f64, b: f64, panels: usize) -> Self {
        QuadratureSpec {
            a,
            b,
            rule: Rule::CompositeSimpson { panels },
        }
    }

    /// Same rule on `[a, b']`.
    pub fn with_interval(&self, a: f64, b: f64) -> Self {
        QuadratureSpec { a, b, ..*self }
    }

    /// Twice the panels (Gauss) or subintervals (Simpson).
    pub fn refined(&self) -> Self {
        let rule = match self.rule {
            Rule::GaussLegendre { nodes, panels } => Rule::GaussLegendre {
                nodes,
                panels: panels * 2,
            },
            Rule::CompositeSimpson { panels } => Rule::CompositeSimpson { panels: panels * 2 },
        };
        QuadratureSpec { rule, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::NonFinite(format!("interval [{}, {}]", self.a, self.b)));
        }
        if self.a >= self.b {
            return Err(invalid(format!("need a < b, got [{}, {}]", self.a, self.b)));
        }
        match self.rule {
            Rule::GaussLegendre { nodes, panels } if nodes < 2 || panels < 1 => Err(invalid(
                format!("Gauss-Legendre needs ≥ 2 nodes and ≥ 1 panel, got {nodes}/{panels}"),
            )),
            Rule::CompositeSimpson { panels } if panels < 2 || panels % 2 == 1 => Err(invalid(
                format!("Simpson needs an even panel count ≥ 2, got {panels}"),
            )),
            _ => Ok(()),
        }
    }

    /// `∫_a^b f`. Panels are evaluated in parallel and summed in order, so the
    /// result does not depend on scheduling.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        self.validate()?;
        let parts: Vec<f64> = match self.rule {
            Rule::GaussLegendre { nodes, panels } => {
                let (x, w) = gauss_legendre(nodes);
                let width = (self.b - self.a) / panels as f64;
                (0..panels)
                    .into_par_iter()
                    .map(|i| {
                        let lo = self.a + i as f64 * width;
                        let half = width / 2.0;
                        let mid = lo + half;
                        half * x.iter().zip(&w).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
                    })
                    .collect()
            }
            Rule::CompositeSimpson { panels } => {
                let h = (self.b - self.a) / panels as f64;
                let sum: f64 = (0..=panels)
                    .map(|i| {
                        let weight = if i == 0 || i == panels {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        weight * f(self.a + i as f64 * h)
                    })
                    .sum();
                vec![sum * h / 3.0]
            }
        };
        let total: f64 = parts.iter().sum();
        if !total.is_finite() {
            return Err(Error::NonFinite(format!(
                "integral over [{}, {}] is {total}",
                self.a, self.b
            )));
        }
        Ok(total)
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// found by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_two_and_nodes_are_symmetric() {
        for n in [2, 3, 7, 64] {
            let (x, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            for i in 0..n {
                assert_abs_diff_eq!(x[i], -x[n - 1 - i], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn gauss_is_exact_on_polynomials() {
        let q = QuadratureSpec::gauss_panels(-1.0, 2.0, 4, 1);
        let v = q.integrate(|t| t.powi(7) - 2.0 * t.powi(3) + 1.0).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (16.0 - 1.0) / 2.0 + 3.0;
        assert_abs_diff_eq!(v, exact, epsilon = 1e-11);
    }

    #[test]
    fn simpson_converges_at_fourth_order() {
        let exact = 1.0 - (-1.0f64).exp();
        let e1 = (QuadratureSpec::simpson(0.0, 1.0, 8).integrate(|t| (-t).exp()).unwrap() - exact).abs();
        let e2 = (QuadratureSpec::simpson(0.0, 1.0, 16).integrate(|t| (-t).exp()).unwrap() - exact).abs();
        assert!((e1 / e2 - 16.0).abs() < 0.5);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(QuadratureSpec::gauss(1.0, 0.0).validate().is_err());
        assert!(QuadratureSpec::simpson(0.0, 1.0, 3).validate().is_err());
        assert!(QuadratureSpec::gauss_panels(0.0, 1.0, 1, 1).validate().is_err());
        assert!(QuadratureSpec::gauss(0.0, 1.0).integrate(|_| f64::NAN).is_err());
    }
}
