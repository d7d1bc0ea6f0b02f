//! Brackets `[g,h]_k^±`, differential energy operators `Ψ_k^±` and the
//! generalized operators `[[f]^p]_k^±`, plus the η and θ families.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::jet::ExtendedJet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// How the inner iterates of `[[f]^p]_k^±` are built.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecursionConvention {
    /// Inner iterates are order-1 plus brackets; only the outermost bracket
    /// uses order `k` and the requested sign. The decomposition identities
    /// over powers of `[[f]^{p-1}]_1^+` hold under this convention.
    #[default]
    OrderOnePlus,
    /// Every level uses order `k` and the requested sign:
    /// `[[f]^1]_k^± = [Ψ_k^±(f), Ψ_k^±(f)]_k^±`.
    SameK,
}

impl fmt::Display for RecursionConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecursionConvention::OrderOnePlus => "order_one_plus",
            RecursionConvention::SameK => "same_k",
        })
    }
}

/// Names `[[·]^p]_k^±`; depth 0 is `Ψ_k^±`, depth -1 (plus, order 1) is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatorId {
    pub sign: Sign,
    pub order: i32,
    pub depth: i32,
}

impl OperatorId {
    pub fn new(sign: Sign, order: i32, depth: i32) -> Result<Self> {
        if depth < -1 {
            return Err(invalid(format!("operator depth must be ≥ -1, got {depth}")));
        }
        if depth == -1 && (sign != Sign::Plus || order != 1) {
            return Err(invalid("depth -1 only names the identity [[f]^-1]_1^+"));
        }
        Ok(OperatorId { sign, order, depth })
    }

    pub fn psi(sign: Sign, order: i32) -> Self {
        OperatorId {
            sign,
            order,
            depth: 0,
        }
    }

    pub fn apply(&self, f: &ExtendedJet, conv: RecursionConvention) -> Result<ExtendedJet> {
        if self.depth == -1 {
            return Ok(f.clone());
        }
        generalized_op(f, self.depth, self.order, self.sign, conv)
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[.]^{}]_{}^{}", self.depth, self.order, self.sign)
    }
}

/// `[g, h]_k^± = ∂g · ∂^{k-1} h ± g · ∂^k h`.
pub fn bracket(g: &ExtendedJet, h: &ExtendedJet, k: i32, sign: Sign) -> Result<ExtendedJet> {
    let first = g.shift(1)?.mul(&h.shift(k - 1)?)?;
    let second = g.mul(&h.shift(k)?)?;
    match sign {
        Sign::Plus => first.add(&second),
        Sign::Minus => first.sub(&second),
    }
}

/// `Ψ_k^±(f) = [f, f]_k^±`.
pub fn psi(f: &ExtendedJet, k: i32, sign: Sign) -> Result<ExtendedJet> {
    bracket(f, f, k, sign)
}

/// The argument of the outermost bracket of `[[f]^p]_k^±`: `f` for `p = 0`,
/// otherwise the depth-`(p-1)` iterate built under `conv`.
pub fn base_iterate(
    f: &ExtendedJet,
    p: i32,
    k: i32,
    sign: Sign,
    conv: RecursionConvention,
) -> Result<ExtendedJet> {
    if p < 0 {
        return Err(invalid(format!("iterate depth must be ≥ 0, got {p}")));
    }
    let (inner_k, inner_sign) = match conv {
        RecursionConvention::OrderOnePlus => (1, Sign::Plus),
        RecursionConvention::SameK => (k, sign),
    };
    let mut g = f.clone();
    for _ in 0..p {
        g = bracket(&g, &g, inner_k, inner_sign)?;
    }
    Ok(g)
}

/// `[[f]^p]_k^±`. Depth `-1` is accepted only as the identity at order 1, plus.
pub fn generalized_op(
    f: &ExtendedJet,
    p: i32,
    k: i32,
    sign: Sign,
    conv: RecursionConvention,
) -> Result<ExtendedJet> {
    if p == -1 {
        OperatorId::new(sign, k, p)?;
        return Ok(f.clone());
    }
    let g = base_iterate(f, p, k, sign, conv)?;
    bracket(&g, &g, k, sign)
}

/// `3 ∂g ∂^{k-1} g - g ∂^k g` with `g` the plus base iterate at depth `p`.
pub fn eta(f: &ExtendedJet, k: i32, p: i32, conv: RecursionConvention) -> Result<ExtendedJet> {
    let g = base_iterate(f, p, k, Sign::Plus, conv)?;
    let first = g.shift(1)?.mul(&g.shift(k - 1)?)?.scale(3.0);
    let second = g.mul(&g.shift(k)?)?;
    first.sub(&second)
}

/// `θ_k^±(f) = ((L - 1)/2) [[f]^p]_k^±`.
pub fn theta(
    f: &ExtendedJet,
    k: i32,
    l: i32,
    sign: Sign,
    p: i32,
    conv: RecursionConvention,
) -> Result<ExtendedJet> {
    if l <= 1 {
        return Err(invalid(format!("θ requires L > 1, got {l}")));
    }
    Ok(generalized_op(f, p, k, sign, conv)?.scale((l as f64 - 1.0) / 2.0))
}

/// Outcome of a chain-rule check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainRuleCheck {
    /// Order-0 entry of `∂ [g,g]_k`.
    pub lhs: f64,
    /// Order-0 entry of `[g,g]_{k+1} + [∂g,∂g]_{k-1}`.
    pub rhs: f64,
    /// `max_r |∂G_k - G_{k+1} - G_{k-1}(∂·)|` over the stored orders.
    pub abs: f64,
    /// Largest magnitude among the three compared jets.
    pub scale: f64,
    /// `max_r |diff_r| / max(c_r, 1)` where `c_r` is entry `r` of the same
    /// three brackets evaluated on `|g|`, the size of the summands whose
    /// cancellation produces roundoff.
    pub rel: f64,
}

/// Checks `∂ [g,g]_k = [g,g]_{k+1} + [∂g, ∂g]_{k-1}` where `g` is the base
/// iterate of the depth-`p` operator, over every stored order.
pub fn chain_rule_check(
    f: &ExtendedJet,
    k: i32,
    sign: Sign,
    p: i32,
    conv: RecursionConvention,
) -> Result<ChainRuleCheck> {
    let g = base_iterate(f, p, k, sign, conv)?;
    let sides = |g: &ExtendedJet, sign: Sign| -> Result<[ExtendedJet; 3]> {
        let dg = g.shift(1)?;
        Ok([
            bracket(g, g, k, sign)?.shift(1)?,
            bracket(g, g, k + 1, sign)?,
            bracket(&dg, &dg, k - 1, sign)?,
        ])
    };
    let [lhs, up, down] = sides(&g, sign)?;
    let [cl, cu, cd] = sides(&g.abs(), Sign::Plus)?;
    let rhs = up.add(&down)?;
    let cond = cl.add(&cu)?.add(&cd)?;
    let mut abs = 0.0f64;
    let mut rel = 0.0f64;
    for ((l, r), c) in lhs.derivs().iter().zip(rhs.derivs()).zip(cond.derivs()) {
        let d = (l - r).abs();
        abs = abs.max(d);
        rel = rel.max(d / c.max(1.0));
    }
    let scale = lhs.max_abs().max(up.max_abs()).max(down.max_abs());
    Ok(ChainRuleCheck {
        lhs: lhs.deriv(0)?,
        rhs: rhs.deriv(0)?,
        abs,
        scale,
        rel,
    })
}

/// Absolute chain-rule residual; see [`chain_rule_check`].
pub fn chain_rule_residual(
    f: &ExtendedJet,
    k: i32,
    sign: Sign,
    p: i32,
    conv: RecursionConvention,
) -> Result<f64> {
    Ok(chain_rule_check(f, k, sign, p, conv)?.abs)
}
