use padic_ddr::derived::*;
use padic_ddr::pd::PdElement;
use padic_ddr::Zmod;
use proptest::prelude::*;

fn res(p: u64, s: usize) -> BarResolution {
    BarResolution::new(Zmod::field(p).unwrap(), &[0, 1], s).unwrap()
}

/// A random element of total degree `k` built from basis picks `(level, weight, index, coeff)`.
fn random_element(r: &BarResolution, picks: &[(usize, u32, usize, u64)], k: i32) -> BarForm {
    let mut out = BarForm::zero(r.base());
    for &(s, w, idx, c) in picks {
        let i = s as i32 + k;
        if i < 0 || i as usize > s {
            continue;
        }
        let basis = r.normalized_basis(s, i as usize, w);
        if basis.is_empty() {
            continue;
        }
        out = out.add(&BarForm::term(r.base(), basis[idx % basis.len()].clone(), c as i64));
    }
    out
}

fn picks() -> impl Strategy<Value = Vec<(usize, u32, usize, u64)>> {
    prop::collection::vec((0usize..=3, 0u32..=4, 0usize..64, 1u64..5), 1..4)
}

/// Oracle: `gamma_k(c gamma_p(x)) = c^k (kp)!/(k! p!^k) gamma_{kp}(x)`.
fn gamma_of_gamma_p(z: Zmod, c: i64, k: u64, p: u64) -> u64 {
    use num_bigint::BigUint;
    let f = |n: u64| (1..=n).fold(BigUint::from(1u32), |a, i| a * i);
    let coeff = f(k * p) / (f(k) * f(p).pow(k as u32));
    z.mul(z.pow(z.from_i64(c), k), z.from_biguint(&coeff))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn d_squared_zero(ps in picks(), k in -2i32..=0, p in prop::sample::select(vec![2u64, 3])) {
        let r = res(p, 4);
        let a = random_element(&r, &ps, k);
        for conv in [SignConvention::ColumnParity, SignConvention::FormDegree] {
            prop_assert!(r.total_d(&r.total_d(&a, conv), conv).is_zero());
        }
    }

    #[test]
    fn simplicial_identities_hold(ps in picks(), k in -2i32..=0) {
        let r = res(3, 4);
        let a = random_element(&r, &ps, k);
        prop_assert_eq!(r.check_simplicial_identities(&a), None);
    }

    #[test]
    fn comparison_kills_boundaries(ps in picks(), p in prop::sample::select(vec![2u64, 3, 5])) {
        let r = res(p, 4);
        let eta = random_element(&r, &ps, -1);
        let b = r.total_d(&eta, SignConvention::ColumnParity);
        let img = comp_to_crystalline(&r, &b, SignConvention::ColumnParity).unwrap();
        prop_assert!(img.is_zero());
    }

    #[test]
    fn comparison_is_multiplicative(pa in picks(), pb in picks(), p in prop::sample::select(vec![2u64, 3, 5])) {
        let r = res(p, 6);
        let a = random_element(&r, &pa, 0);
        let b = random_element(&r, &pb, 0);
        let conv = SignConvention::ColumnParity;
        let ab = shuffle_product(&r, &a, &b);
        let d = crystalline_target(&r, 12).unwrap();
        let lhs = comp_to_crystalline(&r, &ab, conv).unwrap().transfer(&d);
        let ca = comp_to_crystalline(&r, &a, conv).unwrap().transfer(&d);
        let cb = comp_to_crystalline(&r, &b, conv).unwrap().transfer(&d);
        prop_assert_eq!(lhs, &ca * &cb);
    }
}

#[test]
fn divided_powers_of_the_generator() {
    for p in [2u64, 3, 5] {
        let r = res(p, 4);
        let z = r.base();
        let d = crystalline_target(&r, 4 * p as u32).unwrap();
        for k in 1..=3u64 {
            let img = comp_to_crystalline(&r, &divided_power_class(&r, k as usize), SignConvention::ColumnParity).unwrap().transfer(&d);
            // Comp(y) = -gamma_p(x), so gamma_k of it
            let expected = d.gamma_var(0, (k * p) as u32).scale(gamma_of_gamma_p(z, -1, k, p));
            assert_eq!(img, expected, "p={p} k={k}");
        }
    }
}

#[test]
fn shuffle_powers_are_divisible() {
    let r = res(7, 4);
    let y = divided_power_class(&r, 1);
    let mut pow = y.clone();
    for k in 2..=4u64 {
        pow = shuffle_product(&r, &pow, &y);
        let fact = (1..=k).product::<u64>();
        assert_eq!(pow, divided_power_class(&r, k as usize).scale(fact % 7));
    }
}

#[test]
fn square_of_the_generator() {
    for p in [2u64, 3, 5] {
        let r = res(p, 4);
        let y = divided_power_class(&r, 1);
        let d = crystalline_target(&r, 2 * p as u32 + 1).unwrap();
        let cy = comp_to_crystalline(&r, &y, SignConvention::ColumnParity).unwrap().transfer(&d);
        let cyy = comp_to_crystalline(&r, &shuffle_product(&r, &y, &y), SignConvention::ColumnParity).unwrap().transfer(&d);
        assert_eq!(cyy, &cy * &cy);
        // gamma_p(x)^2 = C(2p, p) gamma_{2p}(x)
        let c = r.base().from_biguint(&padic_ddr::zmod::binomial(2 * p, p));
        assert_eq!(cyy, d.gamma_var(0, 2 * p as u32).scale(c));
    }
}

/// The images of an `H^0` spanning set fill `D_A((x))` weight by weight.
#[test]
fn comparison_is_surjective_in_low_weight() {
    for p in [2u64, 3] {
        let r = res(p, 2 * p as usize);
        let cap = 2 * p as u32 - 1;
        let d = crystalline_target(&r, cap).unwrap();
        let mut images: Vec<PdElement> = Vec::new();
        for w in 0..=cap {
            for k in r.total_basis(0, w) {
                let f = BarForm::term(r.base(), k, 1);
                images.push(comp_to_crystalline(&r, &f, SignConvention::ColumnParity).unwrap().transfer(&d));
            }
        }
        let basis = d.basis();
        assert_eq!(padic_ddr::pd::span_dim(&images, &basis), basis.len());
    }
}

#[test]
fn conjugate_gr_matches_prediction() {
    for p in [2u64, 3] {
        for e in [1usize, 2] {
            let mut f = vec![0i64; e + 1];
            f[e] = 1;
            let r = BarResolution::new(Zmod::field(p).unwrap(), &f, 2 * p as usize).unwrap();
            let cap = (2 * e as u32) * p as u32 - 1;
            if r.total_basis(0, cap).len() > 5000 {
                continue;
            }
            let h = derived_dr_h0(&r, cap, DEFAULT_BASIS_LIMIT).unwrap();
            for i in 0..=1u32 {
                assert_eq!(h.gr[i as usize], conjugate_e1(&r, i, -(i as i32), cap).unwrap(), "p={p} e={e} i={i}");
            }
        }
    }
}

#[test]
fn window_guard() {
    let r = res(2, 12);
    assert!(matches!(derived_dr_h0(&r, 12, 1000), Err(padic_ddr::Error::WindowTooWide { .. })));
}
