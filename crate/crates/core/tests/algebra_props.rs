use num_rational::Ratio;
use padic_ddr::algebra::{make_finite_algebra, FiniteAlgebra, Presentation};
use padic_ddr::Valuation;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn models() -> Vec<FiniteAlgebra> {
    [
        Presentation::simple(2, 3, &[("b", &[-2, 0, 1])]),
        Presentation::simple(3, 3, &[("a", &[1, 1, 1])]),
        Presentation::simple(3, 2, &[("a", &[1, 1, 1]), ("b", &[-3, 0, 0, 1])]),
        Presentation::simple(5, 2, &[("a", &[1, 1, 1, 1, 1])]),
    ]
    .iter()
    .map(|p| make_finite_algebra(p).unwrap())
    .collect()
}

fn elem(alg: &FiniteAlgebra, raw: &[u64]) -> padic_ddr::algebra::AlgebraElement {
    alg.element(raw.iter().cycle().take(alg.rank()).copied().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ring_laws(which in 0usize..4, a in prop::collection::vec(0u64..10_000, 6), b in prop::collection::vec(0u64..10_000, 6), c in prop::collection::vec(0u64..10_000, 6)) {
        let alg = &models()[which];
        let (a, b, c) = (elem(alg, &a), elem(alg, &b), elem(alg, &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
    }

    #[test]
    fn valuation_laws(which in 0usize..4, a in prop::collection::vec(0u64..10_000, 6), b in prop::collection::vec(0u64..10_000, 6)) {
        let alg = &models()[which];
        let n = Ratio::from_integer(alg.base().n() as i64);
        let (a, b) = (elem(alg, &a), elem(alg, &b));
        let (va, vb) = (a.valuation().unwrap(), b.valuation().unwrap());
        if let (Valuation::Exact(x), Valuation::Exact(y)) = (va, vb) {
            if x + y < n {
                prop_assert_eq!((&a * &b).valuation().unwrap(), Valuation::Exact(x + y));
            }
            let s = (&a + &b).valuation().unwrap();
            prop_assert!(s.value() >= x.min(y));
        }
        // valuations have denominator dividing the ramification index
        if let Valuation::Exact(x) = va {
            prop_assert_eq!(alg.ramification_index() as i64 % x.denom(), 0);
        }
    }
}

#[test]
fn table_agrees_with_long_division() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for alg in models() {
        let m = alg.base().modulus();
        for _ in 0..200 {
            let a = alg.element((0..alg.rank()).map(|_| rng.gen_range(0..m)).collect());
            let b = alg.element((0..alg.rank()).map(|_| rng.gen_range(0..m)).collect());
            assert_eq!(&a * &b, alg.mul_by_long_division(&a, &b));
        }
    }
}
