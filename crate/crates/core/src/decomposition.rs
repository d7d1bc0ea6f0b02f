//! Derivative-of-power decompositions: `∂^s g^n` rebuilt from bracket images
//! of the base `g = [[f]^{p-1}]_1^+` and compared against direct jet powers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::jet::{binomial, ExtendedJet, SINGULARITY_THRESHOLD};
use crate::ops::{base_iterate, bracket, generalized_op, RecursionConvention, Sign};

/// Which bracket families enter the right-hand side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    PlusOnly,
    PlusMinus,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::PlusOnly => "plus_only",
            Family::PlusMinus => "plus_minus",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub p: i32,
    pub n: i32,
    pub s: i32,
    pub family: Family,
    pub lhs: f64,
    pub rhs: f64,
    /// Every summand of `rhs`, in summation order.
    pub terms: Vec<Term>,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub convention: RecursionConvention,
    /// Sum of the minus-family counterparts of the plus terms; zero in exact
    /// arithmetic for every identity built here.
    pub minus_sum: f64,
}

impl DecompositionReport {
    fn assemble(
        (p, n, s): (i32, i32, i32),
        family: Family,
        lhs: f64,
        parts: Parts,
        convention: RecursionConvention,
    ) -> Self {
        let minus_sum = paired_sum(&parts.minus.iter().map(|t| t.value).collect::<Vec<_>>());
        let mut terms = parts.plus;
        if family == Family::PlusMinus {
            terms.extend(parts.minus);
        }
        let rhs = terms.iter().fold(0.0, |acc, t| acc + t.value);
        let abs_residual = (lhs - rhs).abs();
        DecompositionReport {
            p,
            n,
            s,
            family,
            lhs,
            rhs,
            terms,
            abs_residual,
            rel_residual: abs_residual / lhs.abs().max(1e-30),
            convention,
            minus_sum,
        }
    }
}

/// Least-squares coefficients of `S_k = β₁ [[f]^p]_k^+ + β₂ [[f]^p]_k^-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFit {
    pub beta1: f64,
    pub beta2: f64,
    /// Largest misfit over the row-equilibrated system, relative to its largest
    /// target entry; infinite when a sample is nonzero where both images vanish.
    pub fit_residual: f64,
    pub k_list: Vec<i32>,
}

struct Parts {
    plus: Vec<Term>,
    minus: Vec<Term>,
}

/// Sums mirror entries `v[i] + v[len-1-i]` first, so antisymmetric sequences
/// vanish exactly.
fn paired_sum(v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n / 2 {
        acc += v[i] + v[n - 1 - i];
    }
    if n % 2 == 1 {
        acc += v[n / 2];
    }
    acc
}

fn sign_char(sign: Sign) -> char {
    match sign {
        Sign::Plus => '+',
        Sign::Minus => '-',
    }
}

/// `[[f]^{p-1}]_1^+`, or `f` itself when `p = 0`.
fn power_base(f: &ExtendedJet, p: i32, conv: RecursionConvention) -> Result<ExtendedJet> {
    if p < 0 {
        return Err(invalid(format!("depth p must be ≥ 0, got {p}")));
    }
    base_iterate(f, p, 1, Sign::Plus, conv)
}

/// `∂^s g^n` at `t0` for `g = [[f]^{p-1}]_1^+`, by Leibniz products only.
pub fn direct_power_derivative(
    f: &ExtendedJet,
    p: i32,
    n: i32,
    s: i32,
    conv: RecursionConvention,
) -> Result<f64> {
    if n == 0 {
        return Err(invalid("power n = 0 is degenerate"));
    }
    if s < 0 {
        return Err(invalid(format!("derivative order s must be ≥ 0, got {s}")));
    }
    let g = power_base(f, p, conv)?;
    g.int_pow(n)?.deriv(s)
}

fn square_parts(g: &ExtendedJet, s: i32) -> Result<Parts> {
    let mut plus = Vec::with_capacity(s as usize);
    let mut minus = Vec::with_capacity(s as usize);
    for k in 0..s {
        let c = binomial((s - 1) as usize, k as usize);
        let j = s - k - 1;
        let order = 2 * (k + 1) - s;
        let h = g.shift(j)?;
        for (sign, out) in [(Sign::Plus, &mut plus), (Sign::Minus, &mut minus)] {
            let value = c * bracket(&h, &h, order, sign)?.deriv(0)?;
            out.push(Term {
                label: format!("C({},{k})[D^{j} g]_{order}^{}", s - 1, sign_char(sign)),
                value,
            });
        }
    }
    Ok(Parts { plus, minus })
}

fn cube_parts(g: &ExtendedJet, s: i32) -> Result<Parts> {
    let mut plus = Vec::with_capacity(s as usize);
    let mut minus = Vec::with_capacity(s as usize);
    let images = [
        (Sign::Plus, bracket(g, g, 1, Sign::Plus)?),
        (Sign::Minus, bracket(g, g, 1, Sign::Minus)?),
    ];
    for k in 0..s {
        let c = binomial((s - 1) as usize, k as usize);
        let tail = g.deriv(s - 1 - k)?;
        for (sign, image) in &images {
            let a = 1.5 * image.deriv(k)?;
            let term = Term {
                label: format!("C({},{k})A_{}^{} D^{} g", s - 1, k + 1, sign_char(*sign), s - 1 - k),
                value: c * a * tail,
            };
            match sign {
                Sign::Plus => plus.push(term),
                Sign::Minus => minus.push(term),
            }
        }
    }
    Ok(Parts { plus, minus })
}

/// `∂^r g^m` either from the jet power or, in deep mode, re-expanded through
/// the square, cube and power identities.
fn power_factor(g: &ExtendedJet, m: i32, r: i32, deep: bool) -> Result<f64> {
    if !deep || r == 0 || m < 2 {
        return g.int_pow(m)?.deriv(r);
    }
    let parts = match m {
        2 => square_parts(g, r)?,
        3 => cube_parts(g, r)?,
        _ => power_parts(g, m, r - 1, true)?,
    };
    Ok(parts.plus.iter().fold(0.0, |acc, t| acc + t.value))
}

fn power_parts(g: &ExtendedJet, l: i32, s: i32, deep: bool) -> Result<Parts> {
    let mut plus = Vec::with_capacity(s as usize + 1);
    let mut minus = Vec::with_capacity(s as usize + 1);
    let images = [
        (Sign::Plus, bracket(g, g, 1, Sign::Plus)?),
        (Sign::Minus, bracket(g, g, 1, Sign::Minus)?),
    ];
    let lf = l as f64;
    for k in 0..=s {
        let c = binomial(s as usize, k as usize) * lf / (lf - 1.0);
        let factor = power_factor(g, l - 2, s - k, deep)?;
        for (sign, image) in &images {
            let b = (lf - 1.0) / 2.0 * image.deriv(k)?;
            let term = Term {
                label: format!(
                    "C({s},{k})(L/(L-1))B_{}^{} D^{} g^{}",
                    k + 1,
                    sign_char(*sign),
                    s - k,
                    l - 2
                ),
                value: c * b * factor,
            };
            match sign {
                Sign::Plus => plus.push(term),
                Sign::Minus => minus.push(term),
            }
        }
    }
    Ok(Parts { plus, minus })
}

/// `∂^s g²` as `Σ_k C(s-1,k) [∂^{s-k-1} g]_{2(k+1)-s}^+`, optionally with the
/// minus terms (whose total vanishes) added.
pub fn decompose_square(
    f: &ExtendedJet,
    p: i32,
    s: i32,
    family: Family,
    conv: RecursionConvention,
) -> Result<DecompositionReport> {
    if s < 1 {
        return Err(invalid(format!("square decomposition needs s ≥ 1, got {s}")));
    }
    let g = power_base(f, p, conv)?;
    let lhs = g.int_pow(2)?.deriv(s)?;
    let parts = square_parts(&g, s)?;
    Ok(DecompositionReport::assemble((p, 2, s), family, lhs, parts, conv))
}

/// `∂^s g³ = Σ_k C(s-1,k) A_{k+1}^+ ∂^{s-1-k} g` with `A_{k+1}^+ = (3/2) ∂^k [g]_1^+`.
pub fn decompose_cube(
    f: &ExtendedJet,
    p: i32,
    s: i32,
    conv: RecursionConvention,
) -> Result<DecompositionReport> {
    if s < 1 {
        return Err(invalid(format!("cube decomposition needs s ≥ 1, got {s}")));
    }
    let g = power_base(f, p, conv)?;
    let lhs = g.int_pow(3)?.deriv(s)?;
    let parts = cube_parts(&g, s)?;
    Ok(DecompositionReport::assemble((p, 3, s), Family::PlusOnly, lhs, parts, conv))
}

/// `∂^{s+1} g^L = Σ_k C(s,k) (L/(L-1)) B_{k+1}^± ∂^{s-k} g^{L-2}` with
/// `B_{k+1}^± = ((L-1)/2) ∂^k [g]_1^±`; the `g^{L-2}` factors come from jet powers.
pub fn decompose_power(
    f: &ExtendedJet,
    p: i32,
    l: i32,
    s: i32,
    family: Family,
    conv: RecursionConvention,
) -> Result<DecompositionReport> {
    power_report(f, p, l, s, family, conv, false)
}

/// [`decompose_power`] with every `∂^{s-k} g^{L-2}` factor itself rebuilt by
/// the power, cube or square identity, recursively.
pub fn decompose_power_deep(
    f: &ExtendedJet,
    p: i32,
    l: i32,
    s: i32,
    family: Family,
    conv: RecursionConvention,
) -> Result<DecompositionReport> {
    power_report(f, p, l, s, family, conv, true)
}

fn power_report(
    f: &ExtendedJet,
    p: i32,
    l: i32,
    s: i32,
    family: Family,
    conv: RecursionConvention,
    deep: bool,
) -> Result<DecompositionReport> {
    if l <= 3 {
        return Err(invalid(format!("power decomposition needs L > 3, got {l}")));
    }
    if s < 0 {
        return Err(invalid(format!("derivative order s must be ≥ 0, got {s}")));
    }
    let g = power_base(f, p, conv)?;
    let lhs = g.int_pow(l)?.deriv(s + 1)?;
    let parts = power_parts(&g, l, s, deep)?;
    Ok(DecompositionReport::assemble((p, l, s + 1), family, lhs, parts, conv))
}

/// `∂^s g^m` through the matching identity (plus family), `m ≥ 1`.
fn identity_value(g: &ExtendedJet, m: i32, s: i32) -> Result<f64> {
    if s == 0 || m == 1 {
        return g.int_pow(m)?.deriv(s);
    }
    let parts = match m {
        2 => square_parts(g, s)?,
        3 => cube_parts(g, s)?,
        _ => power_parts(g, m, s - 1, false)?,
    };
    Ok(parts.plus.iter().fold(0.0, |acc, t| acc + t.value))
}

/// Powers `n ∈ {1, -1}` and `n ≤ -2` of `g = [[f]^p]_1^+`, written through
/// `h = 1/g`: `g = g³ h²`, `1/g = g² h³` and `g^n = h^{|n|}`.
pub fn decompose_negative_or_unit(
    f: &ExtendedJet,
    p: i32,
    n: i32,
    s: i32,
    conv: RecursionConvention,
) -> Result<DecompositionReport> {
    if n == 0 || n > 1 {
        return Err(invalid(format!(
            "negative/unit route takes n ∈ {{1, -1}} or n ≤ -2, got {n}"
        )));
    }
    if s < 0 {
        return Err(invalid(format!("derivative order s must be ≥ 0, got {s}")));
    }
    if p < 0 {
        return Err(invalid(format!("depth p must be ≥ 0, got {p}")));
    }
    let g = base_iterate(f, p + 1, 1, Sign::Plus, conv)?;
    let d0 = g.deriv(0)?.abs();
    if d0 < SINGULARITY_THRESHOLD {
        return Err(Error::Singular {
            value: d0,
            threshold: SINGULARITY_THRESHOLD,
        });
    }
    let h = g.reciprocal(SINGULARITY_THRESHOLD)?;
    let lhs = g.int_pow(n)?.deriv(s)?;
    let mut plus = Vec::new();
    match n {
        1 | -1 => {
            let (a, b) = if n == 1 { (3, 2) } else { (2, 3) };
            for j in 0..=s {
                let c = binomial(s as usize, j as usize);
                let value = c * identity_value(&g, a, j)? * identity_value(&h, b, s - j)?;
                plus.push(Term {
                    label: format!("C({s},{j}) D^{j} g^{a} D^{} h^{b}", s - j),
                    value,
                });
            }
        }
        _ => plus.push(Term {
            label: format!("D^{s} h^{}", -n),
            value: identity_value(&h, -n, s)?,
        }),
    }
    let parts = Parts {
        plus,
        minus: Vec::new(),
    };
    Ok(DecompositionReport::assemble((p, n, s), Family::PlusOnly, lhs, parts, conv))
}

/// Routes `∂^s g^n` to the identity that covers `n`: square, cube, the power
/// ladder at `(L = n, s - 1)`, or the negative/unit route.
pub fn decompose(
    f: &ExtendedJet,
    p: i32,
    n: i32,
    s: i32,
    family: Family,
    conv: RecursionConvention,
) -> Result<DecompositionReport> {
    match n {
        0 => Err(invalid("power n = 0 is degenerate")),
        2 => decompose_square(f, p, s, family, conv),
        3 => decompose_cube(f, p, s, conv),
        n if n >= 4 => {
            if s < 1 {
                return Err(invalid(format!("power decomposition needs s ≥ 1, got {s}")));
            }
            decompose_power(f, p, n, s - 1, family, conv)
        }
        _ => decompose_negative_or_unit(f, p, n, s, conv),
    }
}

/// Fits `S_k = β₁ [[f]^p]_k^+ + β₂ [[f]^p]_k^-` by least squares over every
/// stored derivative entry of every sample.
pub fn fit_basis(
    samples: &[(i32, ExtendedJet)],
    f: &ExtendedJet,
    p: i32,
    conv: RecursionConvention,
) -> Result<BasisFit> {
    if samples.is_empty() {
        return Err(invalid("fit needs at least one sample"));
    }
    if samples.iter().all(|(k, _)| *k == 1) {
        return Err(Error::DegenerateFit(
            "only k = 1 probed, where the minus image vanishes identically".into(),
        ));
    }
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut target = Vec::new();
    let mut rows_outside_span = false;
    for (k, s_jet) in samples {
        let a = generalized_op(f, p, *k, Sign::Plus, conv)?;
        let b = generalized_op(f, p, *k, Sign::Minus, conv)?;
        let len = s_jet.derivs().len().min(a.derivs().len()).min(b.derivs().len());
        for r in 0..len {
            let (x, y, t) = (a.derivs()[r], b.derivs()[r], s_jet.derivs()[r]);
            // equilibrate rows so high orders do not swamp the low ones
            let w = x.abs().max(y.abs());
            if w == 0.0 {
                if t != 0.0 {
                    rows_outside_span = true;
                }
                continue;
            }
            plus.push(x / w);
            minus.push(y / w);
            target.push(t / w);
        }
    }
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let norm = |x: &[f64]| dot(x, x).sqrt();
    let (np, nm) = (norm(&plus), norm(&minus));
    if np == 0.0 {
        return Err(Error::DegenerateFit("plus images vanish at every probed k".into()));
    }
    if nm <= 1e-12 * np {
        return Err(Error::DegenerateFit(
            "minus images vanish at every probed k: f lies in the minus kernels (not in s_p^-)"
                .into(),
        ));
    }
    // Gram-Schmidt on the two normalized columns
    let u: Vec<f64> = plus.iter().map(|v| v / np).collect();
    let w: Vec<f64> = minus.iter().map(|v| v / nm).collect();
    let uw = dot(&u, &w);
    let q: Vec<f64> = w.iter().zip(&u).map(|(w, u)| w - uw * u).collect();
    let nq = norm(&q);
    if nq <= 1e-10 {
        return Err(Error::DegenerateFit(
            "plus and minus images are collinear over the probed k".into(),
        ));
    }
    let q: Vec<f64> = q.iter().map(|v| v / nq).collect();
    let cu = dot(&target, &u);
    let cq = dot(&target, &q);
    // target ≈ cu u + cq q, with w = uw u + nq q
    let c2 = cq / nq;
    let c1 = cu - c2 * uw;
    let beta1 = c1 / np;
    let beta2 = c2 / nm;
    let scale = target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut misfit = target
        .iter()
        .zip(plus.iter().zip(&minus))
        .map(|(t, (a, b))| (t - beta1 * a - beta2 * b).abs())
        .fold(0.0, f64::max);
    if rows_outside_span {
        misfit = f64::INFINITY;
    }
    let mut k_list: Vec<i32> = samples.iter().map(|(k, _)| *k).collect();
    k_list.sort_unstable();
    k_list.dedup();
    Ok(BasisFit {
        beta1,
        beta2,
        fit_residual: misfit / scale.max(f64::MIN_POSITIVE),
        k_list,
    })
}
