use ergolab::linearization::{md_apply, xi, Conjugacy};
use ergolab::optimizer::beta_periodic;
use ergolab::{birkhoff_sum, DadicInt, ExpandingMap, HFamily, Potential, TrigPoly};
use proptest::prelude::*;
use std::sync::OnceLock;

const K: usize = 64;

static CONJ: OnceLock<Conjugacy> = OnceLock::new();

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(n)
    }
}

fn perturbed() -> ExpandingMap {
    ExpandingMap::new(2, TrigPoly::sine(1, 0.05)).unwrap()
}

fn dadic(base: u32, depth: usize) -> impl Strategy<Value = DadicInt> {
    prop::collection::vec(0..base, depth).prop_map(move |d| DadicInt::new(base, d).unwrap())
}

fn dadic_triple() -> impl Strategy<Value = (DadicInt, DadicInt, DadicInt)> {
    prop_oneof![Just(2u32), Just(3u32), Just(5u32)]
        .prop_flat_map(|d| (dadic(d, 24), dadic(d, 24), dadic(d, 24)))
}

proptest! {
    #![proptest_config(cases(512))]

    #[test]
    fn group_axioms((a, b, c) in dadic_triple()) {
        let zero = DadicInt::zero(a.base(), a.depth());
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
        prop_assert_eq!(a.add(&zero).unwrap(), a.clone());
        prop_assert!(a.add(&a.neg()).unwrap().is_zero());
        prop_assert_eq!(a.sub(&b).unwrap().add(&b).unwrap(), a.clone());
        prop_assert_eq!(a.adding_machine(), a.add(&DadicInt::iota(1, a.base(), a.depth())).unwrap());
    }

    #[test]
    fn iota_is_an_injective_homomorphism(m in 0u64..1 << 40, n in 0u64..1 << 40, d in 2u32..7) {
        let (im, in_) = (DadicInt::iota(m, d, K), DadicInt::iota(n, d, K));
        prop_assert_eq!(im.add(&in_).unwrap(), DadicInt::iota(m + n, d, K));
        prop_assert_eq!(im.prefix_value(K), Some(m as u128));
        prop_assert_eq!(im == in_, m == n);
    }

    #[test]
    fn display_round_trips(a in dadic(3, 16)) {
        prop_assert_eq!(a.to_string().parse::<DadicInt>().unwrap(), a);
    }

    #[test]
    fn md_shifts_the_inverse_limit_coordinates(a in dadic(2, K), x in 0.0f64..1.0, m in 0usize..20) {
        let (k1, x1) = md_apply(&a, x).unwrap();
        let lhs = xi(&k1, m + 1, x1).unwrap();
        let rhs = xi(&a, m, x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn theta_round_trip(y in 0.0f64..1.0, shift in -3i32..3) {
        let conj = CONJ.get_or_init(|| Conjugacy::new(&perturbed(), 1e-12).unwrap());
        let y = y + shift as f64;
        let x = conj.theta_inverse(y).unwrap();
        prop_assert!((conj.theta(x) - y).abs() < 1e-12);
        prop_assert!((conj.theta_inverse(conj.theta(x)).unwrap() - x).abs() < 1e-9);
    }

    #[test]
    fn branch_derivative_bound(word in prop::collection::vec(0u32..2, 1..14), x in 0.0f64..1.0) {
        let map = perturbed();
        let (_, dy) = map.tau_word_with_deriv(&word, x).unwrap();
        prop_assert!(dy > 0.0);
        prop_assert!(dy <= map.contraction_bound(word.len()) * (1.0 + 1e-12));
    }

    #[test]
    fn birkhoff_sums_are_additive(x in 0.0f64..1.0, m in 0usize..12, n in 0usize..12) {
        let map = perturbed();
        let f = Potential::cosine(0.2);
        let mut y = x;
        for _ in 0..m {
            y = map.apply(y);
        }
        let lhs = birkhoff_sum(&map, &f, m + n, x);
        let rhs = birkhoff_sum(&map, &f, m, x) + birkhoff_sum(&map, &f, n, y);
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn shift_identity_random(a in dadic(2, 2 * K), m in 1u64..200, x in 0.0f64..1.0, lambda in 0.3f64..1.2) {
        let hf = HFamily::real(&perturbed(), &Potential::cosine(0.1), lambda).unwrap();
        let r = hf.shift_identity_check(&a, m, &[x], 1e-10).unwrap();
        prop_assert!(r < 2e-10, "residual {}", r);
    }

    #[test]
    fn h_words_agreeing_on_a_prefix_are_close(a in dadic(2, K), b in dadic(2, K), n in 8usize..30, x in 0.0f64..1.0) {
        // h_i depends on the digits of i only through a geometrically damped tail
        let mut digits = a.digits().to_vec();
        digits[n..].copy_from_slice(&b.digits()[n..]);
        let spliced = DadicInt::new(2, digits).unwrap();
        let map = perturbed();
        let hf = HFamily::real(&map, &Potential::cosine(0.0), 1.0).unwrap();
        let d = (hf.eval(&a, x, 1e-12).unwrap().value - hf.eval(&spliced, x, 1e-12).unwrap().value).norm();
        let c = map.constants();
        let bound = 2.0 * Potential::cosine(0.0).lipschitz_bound() * c.contraction_c
            * (1.0 / c.lambda1).powi(n as i32 + 1) / (1.0 - 1.0 / c.lambda1) + 2e-12;
        prop_assert!(d <= bound, "{} > {}", d, bound);
    }

    #[test]
    fn argmax_invariant_under_coboundary_plus_constant(a1 in -0.3f64..0.3, b1 in -0.3f64..0.3, c in -2.0f64..2.0) {
        let map = ExpandingMap::linear(2).unwrap();
        let base = beta_periodic(&map, &Potential::cosine(0.0), 8).unwrap();
        // on the doubling map ψ∘T(x) = ψ(2x), so f + ψ∘T − ψ + c is again a trig polynomial
        let moved = Potential::trig(TrigPoly::new(c, vec![(1.0 - a1, -b1), (a1, b1)]));
        let moved = beta_periodic(&map, &moved, 8).unwrap();
        prop_assert!((moved.beta - base.beta - c).abs() < 1e-9);
        prop_assert_eq!(&moved.argmax.word, &base.argmax.word);
        let psi = TrigPoly::new(0.0, vec![(a1, b1)]);
        let cob = beta_periodic(&map, &Potential::coboundary(psi, 1.0, c, &map).unwrap(), 8).unwrap();
        prop_assert!((cob.beta - c).abs() < 1e-9 && cob.beta - cob.min_average < 1e-9);
    }
}
