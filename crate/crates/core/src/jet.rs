//! Truncated Taylor jets stored as derivative values at a point.
//!
//! An [`ExtendedJet`] holds `∂^m f(t0)` for every order `m` in a contiguous
//! range `[-M, N]`. Negative orders are antiderivative values with explicitly
//! chosen integration constants. Differentiation and integration are pure
//! re-indexing, so `∂^{-1} ∂ f` is `f` entry for entry and antiderivative
//! constants introduced once are carried consistently through every shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::generator::Generator;

/// Default reciprocal threshold separating kernel membership from roundoff.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

/// How antiderivative constants are chosen for negative orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum AntiderivPolicy {
    /// Every integration constant is zero.
    Zeros,
    /// Constants drawn uniformly from `[-1, 1]`, deterministically from the
    /// seed and the jet's stored derivative values.
    Randomized { seed: u64 },
    /// Closed-form antiderivatives of the generator where available, zeros
    /// otherwise (including every derived jet).
    Natural,
}

/// Depth and policy used to populate negative orders of jets produced by
/// arithmetic (products, powers, reciprocals).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub depth: usize,
    pub policy: AntiderivPolicy,
}

impl Default for Fill {
    fn default() -> Self {
        Fill {
            depth: 6,
            policy: AntiderivPolicy::Zeros,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetConfig {
    /// Highest stored derivative order `N`.
    pub order: usize,
    /// Number of stored antiderivative orders `M`.
    pub neg_depth: usize,
    pub policy: AntiderivPolicy,
}

impl Default for JetConfig {
    fn default() -> Self {
        JetConfig {
            order: 16,
            neg_depth: 6,
            policy: AntiderivPolicy::Zeros,
        }
    }
}

impl JetConfig {
    pub fn new(order: usize, neg_depth: usize, policy: AntiderivPolicy) -> Self {
        JetConfig {
            order,
            neg_depth,
            policy,
        }
    }

    /// Smallest configuration able to evaluate every nested operator of a
    /// sweep bounded by `s_max`, `p_max` and `k_max`.
    pub fn for_sweep(s_max: usize, p_max: usize, k_max: usize, policy: AntiderivPolicy) -> Self {
        let order = (s_max + 2 * (p_max + 1) * k_max.max(1)).max(2);
        JetConfig {
            order,
            neg_depth: k_max.max(2) + 4,
            policy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(invalid("jet order must be at least 1"));
        }
        Ok(())
    }

    pub fn fill(&self) -> Fill {
        Fill {
            depth: self.neg_depth,
            policy: self.policy,
        }
    }
}

/// Derivative values `∂^m f(t0)` for `m ∈ [low, high]`, with `low ≤ 0 ≤ high`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedJet {
    t0: f64,
    low: i32,
    values: Vec<f64>,
    fill: Fill,
}

impl ExtendedJet {
    /// Builds a jet from derivative values `derivs[m] = ∂^m f(t0)` and
    /// antiderivative constants `neg_consts[i] = ∂^{-(i+1)} f(t0)`.
    pub fn from_parts(t0: f64, derivs: Vec<f64>, neg_consts: Vec<f64>) -> Result<Self> {
        let fill = Fill {
            depth: neg_consts.len(),
            policy: AntiderivPolicy::Zeros,
        };
        Self::assemble(t0, derivs, neg_consts, fill)
    }

    fn assemble(t0: f64, derivs: Vec<f64>, neg_consts: Vec<f64>, fill: Fill) -> Result<Self> {
        if derivs.is_empty() {
            return Err(invalid("a jet needs at least the order-0 value"));
        }
        if !t0.is_finite() {
            return Err(Error::NonFinite(format!("expansion point {t0}")));
        }
        let low = -(neg_consts.len() as i32);
        let mut values = neg_consts;
        values.reverse();
        values.extend(derivs);
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "jet entry of order {} is {v}",
                low + i as i32
            )));
        }
        Ok(ExtendedJet {
            t0,
            low,
            values,
            fill,
        })
    }

    pub fn from_generator(gen: &Generator, t0: f64, cfg: &JetConfig) -> Result<Self> {
        cfg.validate()?;
        gen.validate()?;
        let derivs = gen.derivatives(t0, cfg.order);
        let neg = match cfg.policy {
            AntiderivPolicy::Natural => gen
                .antiderivatives(t0, cfg.neg_depth)
                .unwrap_or_else(|| vec![0.0; cfg.neg_depth]),
            _ => fill_values(cfg.fill(), &derivs),
        };
        Self::assemble(t0, derivs, neg, cfg.fill())
    }

    /// The jet of the constant function `c`.
    pub fn constant(t0: f64, c: f64, order: usize) -> Self {
        let mut derivs = vec![0.0; order + 1];
        derivs[0] = c;
        ExtendedJet {
            t0,
            low: 0,
            values: derivs,
            fill: Fill::default(),
        }
    }

    pub fn with_fill(mut self, fill: Fill) -> Self {
        self.fill = fill;
        self
    }

    pub fn fill(&self) -> Fill {
        self.fill
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Highest stored order `N`.
    pub fn order(&self) -> i32 {
        self.low + self.values.len() as i32 - 1
    }

    /// Lowest stored order `-M`.
    pub fn low(&self) -> i32 {
        self.low
    }

    pub fn neg_depth(&self) -> usize {
        (-self.low) as usize
    }

    pub fn deriv(&self, m: i32) -> Result<f64> {
        if m < self.low || m > self.order() {
            return Err(Error::OrderExhausted {
                requested: m,
                low: self.low,
                high: self.order(),
            });
        }
        Ok(self.values[(m - self.low) as usize])
    }

    /// Derivative values of orders `0..=N`.
    pub fn derivs(&self) -> &[f64] {
        &self.values[(-self.low) as usize..]
    }

    /// Antiderivative values, order `-1` first.
    pub fn neg_consts(&self) -> Vec<f64> {
        self.values[..(-self.low) as usize]
            .iter()
            .rev()
            .copied()
            .collect()
    }

    /// Taylor coefficient `d_j / j!`.
    pub fn taylor_coeff(&self, j: usize) -> Result<f64> {
        let d = self.deriv(j as i32)?;
        Ok(d / factorial(j))
    }

    /// The jet of `∂^m f`: entry `r` of the result is entry `m + r` of `self`.
    pub fn shift(&self, m: i32) -> Result<Self> {
        if m < self.low || m > self.order() {
            return Err(Error::OrderExhausted {
                requested: m,
                low: self.low,
                high: self.order(),
            });
        }
        Ok(ExtendedJet {
            t0: self.t0,
            low: self.low - m,
            values: self.values.clone(),
            fill: self.fill,
        })
    }

    /// Keeps derivative orders up to `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let keep = ((order as i32 - self.low + 1) as usize).min(self.values.len());
        ExtendedJet {
            t0: self.t0,
            low: self.low,
            values: self.values[..keep].to_vec(),
            fill: self.fill,
        }
    }

    fn check_point(&self, other: &Self) -> Result<()> {
        if self.t0 != other.t0 {
            return Err(Error::MismatchedPoint(self.t0, other.t0));
        }
        Ok(())
    }

    /// Entry-wise sum over the common order range (antiderivatives included).
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    fn combine(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_point(other)?;
        let low = self.low.max(other.low);
        let high = self.order().min(other.order());
        let values = (low..=high)
            .map(|m| {
                op(
                    self.values[(m - self.low) as usize],
                    other.values[(m - other.low) as usize],
                )
            })
            .collect();
        Ok(ExtendedJet {
            t0: self.t0,
            low,
            values,
            fill: self.fill,
        })
    }

    pub fn scale(&self, a: f64) -> Self {
        ExtendedJet {
            t0: self.t0,
            low: self.low,
            values: self.values.iter().map(|v| a * v).collect(),
            fill: self.fill,
        }
    }

    /// Product by the general Leibniz rule; result order is the smaller of the
    /// operands'. Antiderivative orders of the product are populated by the
    /// left operand's [`Fill`].
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_point(other)?;
        let derivs = leibniz(self.derivs(), other.derivs());
        self.derived(derivs)
    }

    fn derived(&self, derivs: Vec<f64>) -> Result<Self> {
        let neg = fill_values(self.fill, &derivs);
        Self::assemble(self.t0, derivs, neg, self.fill)
    }

    /// Integer power with the default singularity threshold.
    pub fn int_pow(&self, n: i32) -> Result<Self> {
        self.int_pow_with_threshold(n, SINGULARITY_THRESHOLD)
    }

    pub fn int_pow_with_threshold(&self, n: i32, threshold: f64) -> Result<Self> {
        match n {
            0 => {
                let one = ExtendedJet::constant(self.t0, 1.0, self.order().max(0) as usize);
                self.derived(one.derivs().to_vec())
            }
            1 => Ok(self.clone()),
            n if n > 1 => {
                let mut acc = self.clone();
                for _ in 1..n {
                    acc = acc.mul(self)?;
                }
                Ok(acc)
            }
            n => self.reciprocal(threshold)?.int_pow_with_threshold(-n, threshold),
        }
    }

    /// `1/f` by solving `Σ C(r,i) f_i h_{r-i} = δ_{r0}` order by order.
    pub fn reciprocal(&self, threshold: f64) -> Result<Self> {
        let d = self.derivs();
        let d0 = d[0];
        if d0.abs() < threshold {
            return Err(Error::Singular {
                value: d0.abs(),
                threshold,
            });
        }
        let mut h = Vec::with_capacity(d.len());
        h.push(1.0 / d0);
        let mut row = vec![1.0];
        for r in 1..d.len() {
            row = pascal_next(&row);
            let s: f64 = (1..=r).map(|i| row[i] * d[i] * h[r - i]).sum();
            h.push(-s / d0);
        }
        self.derived(h)
    }

    /// Truncated Taylor polynomial `Σ_{r=0}^{N} d_r (t - t0)^r / r!`.
    pub fn eval(&self, t: f64) -> f64 {
        let dt = t - self.t0;
        let mut term = 1.0;
        let mut acc = 0.0;
        for (r, d) in self.derivs().iter().enumerate() {
            if r > 0 {
                term *= dt / r as f64;
            }
            acc += d * term;
        }
        acc
    }

    /// Largest absolute difference over the common non-negative orders.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.derivs()
            .iter()
            .zip(other.derivs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Entry-wise absolute values; products of such jets bound the roundoff
    /// scale of the corresponding signed products.
    pub fn abs(&self) -> Self {
        ExtendedJet {
            t0: self.t0,
            low: self.low,
            values: self.values.iter().map(|v| v.abs()).collect(),
            fill: self.fill,
        }
    }

    /// Largest absolute derivative value over non-negative orders.
    pub fn max_abs(&self) -> f64 {
        self.derivs().iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Binomial convolution `(fg)^{(r)} = Σ_i C(r,i) f^{(i)} g^{(r-i)}`.
///
/// Mirror indices `i` and `r - i` are summed as a pair, so swapping the
/// operands gives a bit-identical result and `f ∂g - ∂g f` cancels exactly.
pub(crate) fn leibniz(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    let mut out = Vec::with_capacity(n);
    let mut row = vec![1.0];
    for r in 0..n {
        if r > 0 {
            row = pascal_next(&row);
        }
        let mut s = 0.0;
        for i in 0..(r + 1) / 2 {
            s += row[i] * (a[i] * b[r - i] + a[r - i] * b[i]);
        }
        if r % 2 == 0 {
            s += row[r / 2] * (a[r / 2] * b[r / 2]);
        }
        out.push(s);
    }
    out
}

fn pascal_next(row: &[f64]) -> Vec<f64> {
    let mut next = Vec::with_capacity(row.len() + 1);
    next.push(1.0);
    for w in row.windows(2) {
        next.push(w[0] + w[1]);
    }
    next.push(1.0);
    next
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

fn fill_values(fill: Fill, derivs: &[f64]) -> Vec<f64> {
    match fill.policy {
        AntiderivPolicy::Zeros | AntiderivPolicy::Natural => vec![0.0; fill.depth],
        AntiderivPolicy::Randomized { seed } => {
            // FNV-1a over the seed and the stored values keeps the draw a pure
            // function of the jet
            let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
            for word in std::iter::once(seed).chain(derivs.iter().map(|v| v.to_bits())) {
                for byte in word.to_le_bytes() {
                    hash ^= byte as u64;
                    hash = hash.wrapping_mul(0x0100_0000_01b3);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(hash);
            (0..fill.depth).map(|_| rng.gen_range(-1.0..=1.0)).collect()
        }
    }
}

/// Central finite-difference estimate of `∂^order f(t)` with one Richardson
/// extrapolation step (`(4 D(h/2) - D(h)) / 3`), error `O(h^4)`.
pub fn finite_difference(f: impl Fn(f64) -> f64, order: usize, t: f64, h: f64) -> f64 {
    if order == 0 {
        return f(t);
    }
    let central = |h: f64| {
        let half = order as f64 / 2.0;
        let sum: f64 = (0..=order)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(order, i) * f(t + (half - i as f64) * h)
            })
            .sum();
        sum / h.powi(order as i32)
    };
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}

/// Independent derivative oracle for generators; valid for `order ≤ 6`.
pub fn finite_difference_oracle(gen: &Generator, order: usize, t: f64, h: f64) -> Result<f64> {
    if order > 6 {
        return Err(invalid(format!("finite-difference oracle supports order ≤ 6, got {order}")));
    }
    if h <= 0.0 {
        return Err(invalid(format!("step must be positive, got {h}")));
    }
    Ok(finite_difference(|x| gen.value(x), order, t, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(order: usize) -> JetConfig {
        JetConfig::new(order, 3, AntiderivPolicy::Zeros)
    }

    fn exp_jet(order: usize) -> ExtendedJet {
        ExtendedJet::from_generator(&Generator::exp(1.0), 0.0, &cfg(order)).unwrap()
    }

    #[test]
    fn jet_from_generator_examples() {
        assert_eq!(exp_jet(3).derivs(), &[1.0, 1.0, 1.0, 1.0]);
        let p = ExtendedJet::from_generator(&Generator::poly(vec![1.0, 1.0]), 0.0, &cfg(2)).unwrap();
        assert_eq!(p.derivs(), &[1.0, 1.0, 0.0]);
        let c = ExtendedJet::from_generator(&Generator::cos(1.0, 2.0, 0.0), 0.0, &cfg(4)).unwrap();
        for (a, b) in c.derivs().iter().zip([1.0, 0.0, -4.0, 0.0, 16.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn invalid_generator_rejected() {
        let err = ExtendedJet::from_generator(&Generator::gaussian(0.0, 0.0), 0.0, &cfg(2));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        let zero_order = JetConfig::new(0, 0, AntiderivPolicy::Zeros);
        assert!(ExtendedJet::from_generator(&Generator::exp(1.0), 0.0, &zero_order).is_err());
    }

    #[test]
    fn shift_examples() {
        let j = ExtendedJet::from_parts(0.0, vec![1.0; 4], vec![0.0]).unwrap();
        let up = j.shift(1).unwrap();
        assert_eq!(up.derivs(), &[1.0, 1.0, 1.0]);
        let down = j.shift(-1).unwrap();
        assert_eq!(down.derivs(), &[0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(up.shift(-1).unwrap(), j);
        assert_eq!(down.shift(1).unwrap(), j);
    }

    #[test]
    fn shift_exhaustion_is_an_error() {
        let j = ExtendedJet::from_parts(0.0, vec![1.0; 4], vec![0.0]).unwrap();
        assert!(matches!(j.shift(4), Err(Error::OrderExhausted { .. })));
        assert!(matches!(j.shift(-2), Err(Error::OrderExhausted { .. })));
        assert!(matches!(j.deriv(9), Err(Error::OrderExhausted { requested: 9, .. })));
    }

    #[test]
    fn product_examples() {
        let p = ExtendedJet::from_parts(0.0, vec![1.0, 1.0, 0.0], vec![]).unwrap();
        assert_eq!(p.mul(&p).unwrap().derivs(), &[1.0, 2.0, 2.0]);
        let one = ExtendedJet::constant(0.0, 1.0, 2);
        assert_eq!(p.mul(&one).unwrap().derivs(), p.derivs());
        assert_eq!(exp_jet(3).mul(&exp_jet(3)).unwrap().derivs(), &[1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn mismatched_point_rejected() {
        let a = ExtendedJet::constant(0.0, 1.0, 2);
        let b = ExtendedJet::constant(1.0, 1.0, 2);
        assert!(matches!(a.mul(&b), Err(Error::MismatchedPoint(..))));
        assert!(matches!(a.add(&b), Err(Error::MismatchedPoint(..))));
    }

    #[test]
    fn int_pow_examples() {
        let p = ExtendedJet::from_parts(0.0, vec![1.0, 1.0, 0.0, 0.0], vec![]).unwrap();
        assert_eq!(p.int_pow(-1).unwrap().derivs(), &[1.0, -1.0, 2.0, -6.0]);
        let e = exp_jet(2);
        assert_eq!(e.int_pow(1).unwrap(), e);
        assert_eq!(e.int_pow(3).unwrap().derivs(), &[1.0, 3.0, 9.0]);
        assert_eq!(e.int_pow(0).unwrap().derivs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn reciprocal_of_kernel_function_is_singular() {
        let z = ExtendedJet::from_parts(0.0, vec![1e-13, 1.0], vec![]).unwrap();
        assert!(matches!(z.int_pow(-2), Err(Error::Singular { .. })));
        assert!(z.int_pow_with_threshold(-2, 1e-14).is_ok());
    }

    #[test]
    fn eval_examples() {
        assert_abs_diff_eq!(exp_jet(10).eval(0.1), 0.1f64.exp(), epsilon = 1e-9);
        let c = ExtendedJet::from_generator(&Generator::cos(1.0, 2.0, 0.3), 0.5, &cfg(4)).unwrap();
        assert_eq!(c.eval(0.5), c.derivs()[0]);
        let p = ExtendedJet::from_parts(0.0, vec![1.0, 1.0, 0.0], vec![]).unwrap();
        assert_eq!(p.eval(2.0), 3.0);
    }

    #[test]
    fn taylor_coefficients() {
        let e = exp_jet(4);
        assert_abs_diff_eq!(e.taylor_coeff(4).unwrap(), 1.0 / 24.0, epsilon = 1e-16);
    }

    #[test]
    fn finite_difference_examples() {
        let c = Generator::cos(1.0, 2.0, 0.0);
        assert_abs_diff_eq!(finite_difference_oracle(&c, 2, 0.0, 1e-3).unwrap(), -4.0, epsilon = 1e-6);
        assert_eq!(finite_difference_oracle(&c, 0, 0.3, 1e-3).unwrap(), c.value(0.3));
        let e = Generator::exp(1.0);
        assert_abs_diff_eq!(finite_difference_oracle(&e, 1, 0.0, 1e-3).unwrap(), 1.0, epsilon = 1e-8);
        assert!(finite_difference_oracle(&e, 7, 0.0, 1e-3).is_err());
        assert!(finite_difference_oracle(&e, 1, 0.0, 0.0).is_err());
    }

    #[test]
    fn randomized_fill_is_deterministic() {
        let c = JetConfig::new(4, 3, AntiderivPolicy::Randomized { seed: 7 });
        let a = ExtendedJet::from_generator(&Generator::exp(0.7), 0.0, &c).unwrap();
        let b = ExtendedJet::from_generator(&Generator::exp(0.7), 0.0, &c).unwrap();
        assert_eq!(a, b);
        assert!(a.neg_consts().iter().all(|v| v.abs() <= 1.0));
        assert!(a.neg_consts().iter().any(|v| *v != 0.0));
        let other = JetConfig::new(4, 3, AntiderivPolicy::Randomized { seed: 8 });
        let d = ExtendedJet::from_generator(&Generator::exp(0.7), 0.0, &other).unwrap();
        assert_ne!(a.neg_consts(), d.neg_consts());
    }

    #[test]
    fn natural_policy_uses_closed_form() {
        let c = JetConfig::new(3, 2, AntiderivPolicy::Natural);
        let j = ExtendedJet::from_generator(&Generator::exp(2.0), 0.0, &c).unwrap();
        assert_eq!(j.neg_consts(), vec![0.5, 0.25]);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(30, 15), 155117520.0);
        assert_eq!(binomial(3, 4), 0.0);
    }
}
