use proptest::prelude::*;

use deo_core::decomposition::fit_basis;
use deo_core::energy_space::cauchy_schwarz_check;
use deo_core::jet::binomial;
use deo_core::ops::{bracket, generalized_op, RecursionConvention, Sign};
use deo_core::quadrature::QuadratureSpec;
use deo_core::{AntiderivPolicy, ExtendedJet, Generator, JetConfig};

const CONV: RecursionConvention = RecursionConvention::OrderOnePlus;

fn generator() -> impl Strategy<Value = Generator> {
    prop_oneof![
        (-1.5..1.5f64).prop_map(Generator::exp),
        (0.5..2.0f64, 0.5..3.0f64, -PI..PI).prop_map(|(a, w, phi)| Generator::cos(a, w, phi)),
        (0.5..2.0f64, -1.0..1.0f64).prop_map(|(s, c)| Generator::gaussian(s, c)),
    ]
}

const PI: f64 = std::f64::consts::PI;

fn jet(g: &Generator, t0: f64, order: usize) -> ExtendedJet {
    ExtendedJet::from_generator(g, t0, &JetConfig::new(order, 4, AntiderivPolicy::Randomized { seed: 7 }))
        .unwrap()
}

/// Integer-valued entries keep every Leibniz sum exact in binary floating point.
fn integer_jet() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-50i32..=50).prop_map(f64::from), 13)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn leibniz_is_exact_binomial_convolution(a in integer_jet(), b in integer_jet()) {
        let ja = ExtendedJet::from_parts(0.0, a.clone(), vec![]).unwrap();
        let jb = ExtendedJet::from_parts(0.0, b.clone(), vec![]).unwrap();
        let prod = ja.mul(&jb).unwrap();
        for r in 0..a.len() {
            let naive: f64 = (0..=r).map(|i| binomial(r, i) * a[i] * b[r - i]).sum();
            prop_assert_eq!(prod.derivs()[r], naive);
        }
    }

    #[test]
    fn products_commute_bit_for_bit(f in generator(), g in generator(), t0 in -1.0..1.0f64) {
        let (a, b) = (jet(&f, t0, 12), jet(&g, t0, 12));
        let ab = a.mul(&b).unwrap();
        let ba = b.mul(&a).unwrap();
        for (x, y) in ab.derivs().iter().zip(ba.derivs()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn shift_round_trip(f in generator(), t0 in -1.0..1.0f64) {
        let j = jet(&f, t0, 10);
        let up_down = j.shift(1).unwrap().shift(-1).unwrap();
        let down_up = j.shift(-1).unwrap().shift(1).unwrap();
        for m in -3..=9 {
            prop_assert_eq!(up_down.deriv(m).unwrap(), j.deriv(m).unwrap());
        }
        for m in -4..=10 {
            prop_assert_eq!(down_up.deriv(m).unwrap(), j.deriv(m).unwrap());
        }
    }

    // 1e-12 relative to the summands of each order, which is what cancellation leaves
    #[test]
    fn reciprocal_times_self_is_one(rate in -1.5..1.5f64, sigma in 0.5..2.0f64, t0 in -1.0..1.0f64) {
        for g in [Generator::exp(rate), Generator::gaussian(sigma, 0.0)] {
            let j = jet(&g, t0, 8);
            let inv = j.int_pow(-1).unwrap();
            let one = inv.mul(&j).unwrap();
            let size = inv.abs().mul(&j.abs()).unwrap();
            for (r, (v, c)) in one.derivs().iter().zip(size.derivs()).enumerate() {
                let want = if r == 0 { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() <= 1e-12 * c.max(1.0), "order {r}: {v} (scale {c})");
            }
        }
    }

    #[test]
    fn bracket_is_bilinear(
        f in generator(), g in generator(), h in generator(),
        a in -3.0..3.0f64, k in -2i32..=4, t0 in -1.0..1.0f64,
    ) {
        let (g1, g2, h) = (jet(&f, t0, 12), jet(&g, t0, 12), jet(&h, t0, 12));
        for sign in [Sign::Plus, Sign::Minus] {
            let left = bracket(&g1.scale(a).add(&g2).unwrap(), &h, k, sign).unwrap();
            let right = bracket(&g1, &h, k, sign).unwrap().scale(a)
                .add(&bracket(&g2, &h, k, sign).unwrap()).unwrap();
            let size = bracket(&g1.abs().scale(a.abs()).add(&g2.abs()).unwrap(), &h.abs(), k, Sign::Plus).unwrap();
            for ((l, r), c) in left.derivs().iter().zip(right.derivs()).zip(size.derivs()) {
                prop_assert!((l - r).abs() <= 1e-12 * c.max(1.0), "{l} vs {r} (scale {c})");
            }
        }
    }

    #[test]
    fn fit_recovers_random_coefficients(
        b1 in -5.0..5.0f64, b2 in -5.0..5.0f64,
        w in 0.5..3.0f64, phi in -PI..PI, t0 in -1.0..1.0f64, p in 0i32..=1,
    ) {
        let f = jet(&Generator::cos(1.0, w, phi), t0, 16);
        let samples: Vec<_> = [-1, 0, 2, 3]
            .iter()
            .map(|&k| {
                let plus = generalized_op(&f, p, k, Sign::Plus, CONV).unwrap();
                let minus = generalized_op(&f, p, k, Sign::Minus, CONV).unwrap();
                (k, plus.scale(b1).add(&minus.scale(b2)).unwrap())
            })
            .collect();
        let fit = fit_basis(&samples, &f, p, CONV).unwrap();
        prop_assert!((fit.beta1 - b1).abs() <= 1e-8, "beta1 {} vs {b1}", fit.beta1);
        prop_assert!((fit.beta2 - b2).abs() <= 1e-8, "beta2 {} vs {b2}", fit.beta2);
    }

    #[test]
    fn cauchy_schwarz_holds(f in generator(), n in 1i32..=4, a in -5.0..-1.0f64, len in 0.5..4.0f64) {
        let q = QuadratureSpec::gauss_panels(a, a + len, 32, 2);
        let r = cauchy_schwarz_check(&f, n, &q).unwrap();
        prop_assert!(r.holds, "{} > {}", r.lhs, r.rhs);
    }
}
