//! Elementary test functions with closed-form derivatives of every order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{invalid, Error, Result};
use crate::jet::leibniz;

/// Exact descriptor of a smooth test function of one real variable.
///
/// Every variant can produce `∂^m f(t)` for arbitrary `m` from a closed-form
/// rule; products and sums are differentiated with the Leibniz and linearity
/// rules on the derivative values of their parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `e^{rate·t}`
    Exponential { rate: f64 },
    /// `amplitude · cos(omega·t + phase)`
    Cosine { amplitude: f64, omega: f64, phase: f64 },
    /// `Σ coeffs[i] · t^i`
    Polynomial { coeffs: Vec<f64> },
    /// `exp(-((t - center)/sigma)^2)`
    Gaussian { sigma: f64, center: f64 },
    Product { factors: Vec<Generator> },
    Sum { terms: Vec<Generator> },
}

impl Generator {
    pub fn exp(rate: f64) -> Self {
        Generator::Exponential { rate }
    }

    pub fn cos(amplitude: f64, omega: f64, phase: f64) -> Self {
        Generator::Cosine {
            amplitude,
            omega,
            phase,
        }
    }

    pub fn poly(coeffs: impl Into<Vec<f64>>) -> Self {
        Generator::Polynomial {
            coeffs: coeffs.into(),
        }
    }

    pub fn gaussian(sigma: f64, center: f64) -> Self {
        Generator::Gaussian { sigma, center }
    }

    pub fn product(factors: Vec<Generator>) -> Self {
        Generator::Product { factors }
    }

    pub fn sum(terms: Vec<Generator>) -> Self {
        Generator::Sum { terms }
    }

    /// Checks parameter invariants (finite parameters, `sigma > 0`, non-empty lists).
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonFinite(format!("generator parameter {name} = {v}")))
            }
        };
        match self {
            Generator::Exponential { rate } => finite("rate", *rate),
            Generator::Cosine {
                amplitude,
                omega,
                phase,
            } => {
                finite("amplitude", *amplitude)?;
                finite("omega", *omega)?;
                finite("phase", *phase)
            }
            Generator::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(invalid("polynomial needs at least one coefficient"));
                }
                coeffs.iter().try_for_each(|c| finite("coefficient", *c))
            }
            Generator::Gaussian { sigma, center } => {
                finite("sigma", *sigma)?;
                finite("center", *center)?;
                if *sigma <= 0.0 {
                    return Err(invalid(format!("gaussian sigma must be > 0, got {sigma}")));
                }
                Ok(())
            }
            Generator::Product { factors: parts } | Generator::Sum { terms: parts } => {
                if parts.is_empty() {
                    return Err(invalid("composite generator needs at least one part"));
                }
                parts.iter().try_for_each(Generator::validate)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivatives(t, 0)[0]
    }

    /// Derivative values `[f(t), f'(t), ..., f^{(order)}(t)]`.
    pub fn derivatives(&self, t: f64, order: usize) -> Vec<f64> {
        match self {
            Generator::Exponential { rate } => {
                let e = (rate * t).exp();
                let mut out = Vec::with_capacity(order + 1);
                let mut scale = 1.0;
                for _ in 0..=order {
                    out.push(scale * e);
                    scale *= rate;
                }
                out
            }
            Generator::Cosine {
                amplitude,
                omega,
                phase,
            } => {
                let theta = omega * t + phase;
                let (s, c) = theta.sin_cos();
                (0..=order)
                    .map(|m| amplitude * omega.powi(m as i32) * quarter_turn(c, s, m as i64))
                    .collect()
            }
            Generator::Polynomial { coeffs } => {
                let mut current = coeffs.clone();
                let mut out = Vec::with_capacity(order + 1);
                for _ in 0..=order {
                    out.push(horner(&current, t));
                    current = differentiate_coeffs(&current);
                }
                out
            }
            Generator::Gaussian { sigma, center } => {
                let u = (t - center) / sigma;
                let g = (-u * u).exp();
                // physicists' Hermite recurrence: H_{m+1} = 2u H_m - 2m H_{m-1}
                let mut h_prev = 1.0;
                let mut h = 2.0 * u;
                let mut out = Vec::with_capacity(order + 1);
                let step = -1.0 / sigma;
                let mut scale = 1.0;
                for m in 0..=order {
                    let hm = if m == 0 { h_prev } else { h };
                    out.push(scale * hm * g);
                    scale *= step;
                    if m >= 1 {
                        let next = 2.0 * u * h - 2.0 * m as f64 * h_prev;
                        h_prev = h;
                        h = next;
                    }
                }
                out
            }
            Generator::Product { factors } => {
                let mut acc = vec![0.0; order + 1];
                acc[0] = 1.0;
                for factor in factors {
                    acc = leibniz(&acc, &factor.derivatives(t, order));
                }
                acc
            }
            Generator::Sum { terms } => {
                let mut acc = vec![0.0; order + 1];
                for term in terms {
                    for (a, d) in acc.iter_mut().zip(term.derivatives(t, order)) {
                        *a += d;
                    }
                }
                acc
            }
        }
    }

    /// Closed-form antiderivative values `[∂^{-1} f(t), ..., ∂^{-depth} f(t)]`.
    ///
    /// Constants are the natural ones: zero-mean for cosines, `a^{-m} e^{at}` for
    /// exponentials, `∫_{-∞}^t` for gaussians (depth ≤ 2) and zero at `t = 0`
    /// for polynomials. Returns `None` where no closed form is implemented.
    pub fn antiderivatives(&self, t: f64, depth: usize) -> Option<Vec<f64>> {
        if depth == 0 {
            return Some(Vec::new());
        }
        match self {
            Generator::Exponential { rate } => {
                if *rate == 0.0 {
                    return None;
                }
                let e = (rate * t).exp();
                Some((1..=depth).map(|m| e / rate.powi(m as i32)).collect())
            }
            Generator::Cosine {
                amplitude,
                omega,
                phase,
            } => {
                if *omega == 0.0 {
                    return None;
                }
                let (s, c) = (omega * t + phase).sin_cos();
                Some(
                    (1..=depth)
                        .map(|m| {
                            amplitude / omega.powi(m as i32) * quarter_turn(c, s, -(m as i64))
                        })
                        .collect(),
                )
            }
            Generator::Polynomial { coeffs } => {
                let mut current = coeffs.clone();
                let mut out = Vec::with_capacity(depth);
                for _ in 0..depth {
                    current = integrate_coeffs(&current);
                    out.push(horner(&current, t));
                }
                Some(out)
            }
            Generator::Gaussian { sigma, center } => {
                if depth > 2 {
                    return None;
                }
                let u = (t - center) / sigma;
                let half_sqrt_pi = 0.5 * std::f64::consts::PI.sqrt();
                let first = sigma * half_sqrt_pi * (1.0 + erf(u));
                let mut out = vec![first];
                if depth == 2 {
                    let inner = u * (1.0 + erf(u)) + (-u * u).exp() / std::f64::consts::PI.sqrt();
                    out.push(sigma * sigma * half_sqrt_pi * inner);
                }
                Some(out)
            }
            Generator::Product { .. } => None,
            Generator::Sum { terms } => {
                let mut acc = vec![0.0; depth];
                for term in terms {
                    let part = term.antiderivatives(t, depth)?;
                    for (a, p) in acc.iter_mut().zip(part) {
                        *a += p;
                    }
                }
                Some(acc)
            }
        }
    }

    /// Whether the function and all its derivatives decay faster than any
    /// polynomial as `t → -∞` (membership in the one-sided Schwartz class).
    pub fn decays_on_negative_axis(&self) -> bool {
        match self {
            Generator::Exponential { rate } => *rate > 0.0,
            Generator::Gaussian { .. } => true,
            Generator::Cosine { amplitude, .. } => *amplitude == 0.0,
            Generator::Polynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            Generator::Product { factors } => {
                let decaying = factors.iter().any(Generator::decays_on_negative_axis);
                let tame = factors.iter().all(|f| {
                    f.decays_on_negative_axis()
                        || matches!(f, Generator::Cosine { .. } | Generator::Polynomial { .. })
                });
                // polynomial and bounded factors are absorbed by a gaussian or
                // a decaying exponential
                decaying && tame
            }
            Generator::Sum { terms } => terms.iter().all(Generator::decays_on_negative_axis),
        }
    }
}

/// `m`-th quarter-turn derivative of `cos θ` given `(cos θ, sin θ)`.
/// Negative `m` gives the zero-mean antiderivatives.
fn quarter_turn(c: f64, s: f64, m: i64) -> f64 {
    match m.rem_euclid(4) {
        0 => c,
        1 => -s,
        2 => -c,
        _ => s,
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn differentiate_coeffs(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.len() <= 1 {
        return vec![0.0];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * i as f64)
        .collect()
}

fn integrate_coeffs(coeffs: &[f64]) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c / (i as f64 + 1.0)),
        )
        .collect()
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Exponential { rate } => write!(f, "exp:{rate}"),
            Generator::Cosine {
                amplitude,
                omega,
                phase,
            } => write!(f, "cos:{omega}:{phase}:{amplitude}"),
            Generator::Polynomial { coeffs } => {
                write!(f, "poly")?;
                for c in coeffs {
                    write!(f, ":{c}")?;
                }
                Ok(())
            }
            Generator::Gaussian { sigma, center } => write!(f, "gauss:{sigma}:{center}"),
            Generator::Product { factors } => {
                let parts: Vec<String> = factors.iter().map(|g| g.to_string()).collect();
                write!(f, "({})", parts.join("*"))
            }
            Generator::Sum { terms } => {
                let parts: Vec<String> = terms.iter().map(|g| g.to_string()).collect();
                write!(f, "({})", parts.join("+"))
            }
        }
    }
}

/// Parses the command-line spelling of a generator:
///
/// * `exp:RATE`
/// * `cos:OMEGA[:PHASE[:AMPLITUDE]]`
/// * `gauss:SIGMA[:CENTER]`
/// * `poly:C0[:C1...]`
impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default();
        let nums: Vec<f64> = parts
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad number {p:?} in generator {s:?}")))
            })
            .collect::<Result<_>>()?;
        let arg = |i: usize, default: Option<f64>| {
            nums.get(i)
                .copied()
                .or(default)
                .ok_or_else(|| invalid(format!("generator {s:?} is missing parameter {}", i + 1)))
        };
        let gen = match kind {
            "exp" => {
                if nums.len() > 1 {
                    return Err(invalid(format!("too many parameters in {s:?}")));
                }
                Generator::exp(arg(0, None)?)
            }
            "cos" => {
                if nums.len() > 3 {
                    return Err(invalid(format!("too many parameters in {s:?}")));
                }
                Generator::cos(arg(2, Some(1.0))?, arg(0, None)?, arg(1, Some(0.0))?)
            }
            "gauss" => {
                if nums.len() > 2 {
                    return Err(invalid(format!("too many parameters in {s:?}")));
                }
                Generator::gaussian(arg(0, None)?, arg(1, Some(0.0))?)
            }
            "poly" => {
                if nums.is_empty() {
                    return Err(invalid(format!("polynomial {s:?} has no coefficients")));
                }
                Generator::poly(nums)
            }
            other => return Err(invalid(format!("unsupported generator kind {other:?}"))),
        };
        gen.validate()?;
        Ok(gen)
    }
}
