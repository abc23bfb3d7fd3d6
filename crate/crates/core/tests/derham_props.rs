use std::sync::Arc;

use padic_ddr::derham::{cartier_inverse, verify_cartier, DeRhamForm, FreePrelogAlgebra};
use padic_ddr::Zmod;
use proptest::prelude::*;

fn random_form(a: &Arc<FreePrelogAlgebra>, raw: &[(u32, u32, u32, u32, u64)]) -> DeRhamForm {
    raw.iter().fold(a.zero(), |acc, &(mask, e0, e1, e2, c)| {
        let exps = [e0, e1, e2][..a.n_vars()].to_vec();
        acc.add(&a.term(mask % (1 << a.n_vars()), exps, c))
    })
}

fn raw() -> impl Strategy<Value = Vec<(u32, u32, u32, u32, u64)>> {
    prop::collection::vec((0u32..8, 0u32..5, 0u32..5, 0u32..5, 0u64..1000), 0..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn d_squared_vanishes(p in prop_oneof![Just(2u64), Just(3), Just(5)], n in 1u32..3, f in raw()) {
        let a = FreePrelogAlgebra::new(Zmod::new(p, n).unwrap(), &["x"], &["y", "t"], 20);
        let w = random_form(&a, &f);
        prop_assert!(w.d().d().is_zero());
        // Leibniz with a function
        let g = random_form(&a, &f.iter().map(|t| (0, t.1, t.2, t.3, t.4)).collect::<Vec<_>>());
        let lhs = g.wedge(&w).d();
        let rhs = g.d().wedge(&w).add(&g.wedge(&w.d()));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn cartier_is_multiplicative(p in prop_oneof![Just(2u64), Just(3)], f in raw(), g in raw()) {
        let a = FreePrelogAlgebra::new(Zmod::field(p).unwrap(), &["x"], &["y"], 6);
        let t = a.frobenius_twist().unwrap();
        let (u, v) = (random_form(&t, &f), random_form(&t, &g));
        let lhs = cartier_inverse(&u.wedge(&v)).unwrap();
        let rhs = cartier_inverse(&u).unwrap().wedge(&cartier_inverse(&v).unwrap());
        prop_assert_eq!(lhs, rhs);
        // images of forms are closed
        prop_assert!(cartier_inverse(&u).unwrap().d().is_zero());
    }
}

#[test]
fn functions_killed_by_d_are_pth_powers() {
    for p in [2u64, 3, 5] {
        for cap in [4u32, 9, 12] {
            let a = FreePrelogAlgebra::new(Zmod::field(p).unwrap(), &[], &["y"], cap);
            let r = verify_cartier(&a).unwrap();
            assert_eq!(r.h_dims()[0], (cap / p as u32) as usize + 1);
        }
    }
}

#[test]
fn kunneth_for_disjoint_generators() {
    // weight-graded Poincare series of H multiply for disjoint variable sets
    let z = Zmod::field(3).unwrap();
    let cap = 9;
    let series = |a: &Arc<FreePrelogAlgebra>| -> Vec<usize> {
        (0..=cap).map(|w| a.complex_in_weight(w).cohomology().unwrap().dims.iter().sum()).collect()
    };
    let left = series(&FreePrelogAlgebra::new(z, &["x"], &[], cap));
    let right = series(&FreePrelogAlgebra::new(z, &[], &["y"], cap));
    let both = series(&FreePrelogAlgebra::new(z, &["x"], &["y"], cap));
    let conv: Vec<usize> = (0..=cap as usize).map(|w| (0..=w).map(|i| left[i] * right[w - i]).sum()).collect();
    assert_eq!(both, conv);
}
