//! Energy integrals `∫ (f^n)²`, the energy inequality between consecutive
//! plus operators, a ratio-test diagnostic for Taylor series of `f^{2n}`, and
//! sampled kernel-membership probes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::generator::Generator;
use crate::jet::{AntiderivPolicy, ExtendedJet, JetConfig};
use crate::ops::{generalized_op, psi, RecursionConvention, Sign};
use crate::quadrature::QuadratureSpec;

/// Default membership threshold on max-normalized images.
pub const MEMBERSHIP_THRESHOLD: f64 = 1e-10;

/// Both sides of an inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop2Outcome {
    /// `E(Ψ_{k+1}^+(f))`
    pub lhs: f64,
    /// `E(∂ Ψ_k^+(f))`
    pub rhs: f64,
    pub holds: bool,
    /// `E(∂^k Ψ_k^+(f))`, reported only.
    pub statement_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostic {
    /// Ratio for `k = 1..=K`; `None` where `∂^{k-1} f^{2n}(q) = 0`.
    pub ratios: Vec<Option<f64>>,
    pub converging: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub p: i32,
    pub probed_k: Vec<i32>,
    /// Smallest normalized sup-norm image over the families probed at each k.
    pub min_abs_image: BTreeMap<i32, f64>,
    pub is_candidate_member: bool,
    pub threshold: f64,
}

fn check_power(n: i32) -> Result<()> {
    if n < 1 {
        return Err(invalid(format!("energy needs n ≥ 1, got {n}")));
    }
    Ok(())
}

fn finite(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what()))
    }
}

/// `E(f^n) = ∫_a^b (f^n(t))² dt`.
pub fn energy(gen: &Generator, n: i32, q: &QuadratureSpec) -> Result<f64> {
    check_power(n)?;
    gen.validate()?;
    q.integrate(|t| gen.value(t).powi(2 * n))
}

/// `(∫ f^n)² ≤ (b - a) E(f^n)`.
pub fn cauchy_schwarz_check(gen: &Generator, n: i32, q: &QuadratureSpec) -> Result<Inequality> {
    check_power(n)?;
    gen.validate()?;
    let mean = q.integrate(|t| gen.value(t).powi(n))?;
    let lhs = mean * mean;
    let rhs = (q.b - q.a) * energy(gen, n, q)?;
    Ok(Inequality {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * rhs.max(1.0),
    })
}

/// Compares `E(Ψ_{k+1}^+(f))` with `E(∂ Ψ_k^+(f))` on the quadrature interval.
///
/// Integrands come from exact generator derivatives at each node; the
/// antiderivative needed at `k = 0` uses the generator's closed form.
pub fn prop2_check(gen: &Generator, k: i32, q: &QuadratureSpec) -> Result<Prop2Outcome> {
    if k < 0 {
        return Err(invalid(format!("energy inequality needs k ≥ 0, got {k}")));
    }
    gen.validate()?;
    let cfg = JetConfig::new(2 * k as usize + 3, 2, AntiderivPolicy::Natural);
    let images = |t: f64| -> Result<[f64; 3]> {
        let f = ExtendedJet::from_generator(gen, t, &cfg)?;
        let up = psi(&f, k + 1, Sign::Plus)?.deriv(0)?;
        let here = psi(&f, k, Sign::Plus)?;
        Ok([up, here.deriv(1)?, here.deriv(k)?])
    };
    // surface jet failures instead of integrating NaN
    images(q.a)?;
    let side = |i: usize| {
        q.integrate(|t| match images(t) {
            Ok(v) => v[i] * v[i],
            Err(_) => f64::NAN,
        })
    };
    let lhs = side(0)?;
    let rhs = side(1)?;
    let statement_rhs = side(2)?;
    Ok(Prop2Outcome {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-8 * rhs.max(1.0),
        statement_rhs,
    })
}

/// Ratios `|∂^k f^{2n}(q) / ∂^{k-1} f^{2n}(q) · (p - q)/(k + 1)|` for `k = 1..=K`.
///
/// The series is flagged converging when the last quarter of the available
/// ratios are all below one (or are all gaps).
pub fn taylor_convergence_diagnostic(
    gen: &Generator,
    n: i32,
    q_point: f64,
    p_point: f64,
    order: usize,
) -> Result<ConvergenceDiagnostic> {
    check_power(n)?;
    if order < 1 {
        return Err(invalid("diagnostic needs K ≥ 1"));
    }
    let cfg = JetConfig::new(order, 0, AntiderivPolicy::Zeros);
    let f = ExtendedJet::from_generator(gen, q_point, &cfg)?;
    let d = f.int_pow(2 * n)?;
    let d = d.derivs();
    let span = p_point - q_point;
    let ratios: Vec<Option<f64>> = (1..=order)
        .map(|k| {
            if d[k - 1] == 0.0 {
                None
            } else {
                Some((d[k] / d[k - 1] * span / (k as f64 + 1.0)).abs())
            }
        })
        .collect();
    for r in ratios.iter().flatten() {
        finite(*r, || format!("convergence ratio {r}"))?;
    }
    let tail = order.div_ceil(4);
    let converging = ratios[order - tail..].iter().flatten().all(|r| *r < 1.0);
    Ok(ConvergenceDiagnostic { ratios, converging })
}

/// `n` Chebyshev points of the first kind mapped to `[a, b]`.
pub fn chebyshev_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64;
            0.5 * (a + b) + 0.5 * (b - a) * theta.cos()
        })
        .collect()
}

/// Samples `[[f]^p]_k^±` at the given points and records, per `k`, the smaller
/// of the plus and minus sup-norms after normalizing by the largest image
/// seen. The minus family at `k = 1` is skipped. A function is a candidate
/// member when no probed image falls to `threshold`.
///
/// Jets use closed-form antiderivative constants, so exponentials sit in
/// every minus kernel including `k ≤ 0`.
pub fn membership_probe(
    gen: &Generator,
    p: i32,
    k_range: &[i32],
    sample_points: &[f64],
    threshold: f64,
    conv: RecursionConvention,
) -> Result<MembershipReport> {
    if k_range.is_empty() || sample_points.is_empty() {
        return Err(invalid("membership probe needs k values and sample points"));
    }
    gen.validate()?;
    let k_max = k_range.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(1);
    let order = 2 * (p.max(0) as usize + 2) * (k_max + 1) + 4;
    let cfg = JetConfig::new(order, k_max + 4, AntiderivPolicy::Natural);
    let jets: Vec<ExtendedJet> = sample_points
        .iter()
        .map(|&t| ExtendedJet::from_generator(gen, t, &cfg))
        .collect::<Result<_>>()?;

    let mut sup: BTreeMap<(i32, Sign), f64> = BTreeMap::new();
    for &k in k_range {
        for sign in [Sign::Plus, Sign::Minus] {
            if sign == Sign::Minus && k == 1 {
                continue;
            }
            let mut m = 0.0f64;
            for f in &jets {
                m = m.max(generalized_op(f, p, k, sign, conv)?.deriv(0)?.abs());
            }
            sup.insert((k, sign), m);
        }
    }
    let global = sup.values().fold(0.0f64, |a, b| a.max(*b));
    let mut min_abs_image = BTreeMap::new();
    for (&(k, _), &v) in &sup {
        let normalized = if global > 0.0 { v / global } else { 0.0 };
        let e = min_abs_image.entry(k).or_insert(f64::INFINITY);
        *e = f64::min(*e, normalized);
    }
    let is_candidate_member = min_abs_image.values().all(|v| *v > threshold);
    let mut probed_k = k_range.to_vec();
    probed_k.sort_unstable();
    probed_k.dedup();
    Ok(MembershipReport {
        p,
        probed_k,
        min_abs_image,
        is_candidate_member,
        threshold,
    })
}
