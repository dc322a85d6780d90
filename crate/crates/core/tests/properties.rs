use mdisc::discrepancy::{disc, disc_exact, IntegerMultiset};
use mdisc::distribution::{exact_distribution, Method};
use mdisc::expander::{connection_set, find_shift, CirculantGraph};
use mdisc::halfspace::{build_master_halfspace, kp_transform, kp_transform_arithmetic, lift_to_nof, HalfspaceSpec};
use mdisc::approx::BooleanFunctionTable;
use mdisc::numeric::{gcd, mod_inverse};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn multiset() -> impl Strategy<Value = (u64, Vec<i64>)> {
    (2u64..200).prop_flat_map(|m| (Just(m), prop::collection::vec(-10_000i64..10_000, 1..40)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disc_in_unit_interval((m, z) in multiset()) {
        let d = disc(&IntegerMultiset::from_i64(m, &z).unwrap()).value;
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
    }

    #[test]
    fn disc_invariant_under_negation_and_duplication((m, z) in multiset(), copies in 1usize..5) {
        let s = IntegerMultiset::from_i64(m, &z).unwrap();
        let d = disc(&s).value;
        prop_assert!((disc(&s.negated()).value - d).abs() < 1e-9);
        prop_assert!((disc(&s.repeated(copies)).value - d).abs() < 1e-9);
    }

    #[test]
    fn disc_matches_exact_scan((m, z) in multiset()) {
        let s = IntegerMultiset::from_i64(m.min(64), &z).unwrap();
        prop_assert!((disc(&s).value - disc_exact(&s).0).abs() < 1e-9);
    }

    #[test]
    fn mod_inverse_inverts(a in 1u64..1_000_000, m in 2u64..1_000_000) {
        match mod_inverse(a, m) {
            Ok(inv) => prop_assert_eq!((a as u128 * inv as u128 % m as u128) as u64, 1 % m),
            Err(_) => prop_assert!(gcd(a, m) != 1),
        }
    }

    #[test]
    fn dp_equals_walk((m, z) in (2u64..40).prop_flat_map(|m| (Just(m), prop::collection::vec(0i64..1000, 1..16)))) {
        let s = IntegerMultiset::from_i64(m, &z).unwrap();
        let dp = exact_distribution(&s, Method::Dp).unwrap();
        prop_assert_eq!(&dp, &exact_distribution(&s, Method::Walk).unwrap());
        prop_assert_eq!(dp.total(), num_rational::BigRational::from_integer(1.into()));
    }

    #[test]
    fn circulant_trace_and_symmetry(n in 3u64..120, picks in prop::collection::vec(1u64..1000, 1..6)) {
        let mut set: Vec<u64> = picks.iter().map(|p| 1 + p % (n - 1)).flat_map(|c| [c, n - c]).collect();
        set.sort_unstable();
        set.dedup();
        let g = CirculantGraph::new(n, set).unwrap();
        let eig = g.eigenvalues();
        // trace of the adjacency matrix is 0, trace of its square is n d
        prop_assert!(eig.iter().sum::<f64>().abs() < 1e-6 * n as f64);
        prop_assert!((eig.iter().map(|e| e * e).sum::<f64>() - (n as usize * g.degree) as f64).abs() < 1e-6 * n as f64);
        for u in 0..n.min(20) {
            for v in 0..n {
                prop_assert_eq!(g.has_edge(u, v), g.has_edge(v, u));
            }
        }
    }

    #[test]
    fn shifted_connection_set_is_simple(n in 50u64..5000, z in prop::collection::vec(0u64..5000, 1..5)) {
        prop_assume!(2 * (z.len() as u64).pow(2) < n);
        if let Some(d) = find_shift(&z, n) {
            let s = connection_set(&z, n, d);
            prop_assert!(s.iter().all(|&c| c != 0));
            prop_assert_eq!(s.len(), 2 * z.len());
            prop_assert!(CirculantGraph::new(n, s).is_ok());
        }
    }

    #[test]
    fn master_halfspace_never_vanishes(m in 2u64..64, z in prop::collection::vec(-50i64..50, 1..6)) {
        let h = build_master_halfspace(&IntegerMultiset::from_i64(m, &z).unwrap()).unwrap();
        prop_assert_eq!(h.never_zero(), Some(true));
    }

    #[test]
    fn kp_variants_agree(n in 1usize..4, bits in any::<u64>()) {
        let f = BooleanFunctionTable::new(n, (0..1usize << n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect()).unwrap();
        prop_assert_eq!(kp_transform(&f).unwrap(), kp_transform_arithmetic(&f).unwrap());
    }

    #[test]
    fn lift_reduces_to_base(w in prop::collection::vec(-9i64..10, 3), t in -9i64..10, block in prop::collection::vec(0u32..3, 3)) {
        let h = HalfspaceSpec::from_i64(&w, 2 * t - 1, 2);
        let f = lift_to_nof(&h, 2, 2).unwrap();
        // block j hits 0 or 1 coordinates: bit (j, 0) shared iff block[j] == 1
        let (mut x, mut y) = (0u64, 0u64);
        let mut bits = Vec::new();
        for (j, &b) in block.iter().enumerate() {
            match b {
                0 => x |= 1 << (2 * j),
                1 => { x |= 1 << (2 * j); y |= 1 << (2 * j); }
                _ => y |= 1 << (2 * j + 1),
            }
            bits.push(b != 1);
        }
        prop_assert!(f.in_promise(&[x, y]));
        prop_assert_eq!(f.eval(&[x, y]), h.eval_bits(&bits));
    }
}

#[test]
fn circulant_spectrum_matches_dense_eigensolver() {
    for (n, set) in [(64u64, vec![1, 5, 59, 63]), (97, vec![3, 10, 87, 94]), (200, vec![1, 7, 100, 193, 199])] {
        let g = CirculantGraph::new(n, set).unwrap();
        let a = DMatrix::from_fn(n as usize, n as usize, |i, j| if g.has_edge(i as u64, j as u64) { 1.0 } else { 0.0 });
        let mut dense: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
        let mut ours = g.eigenvalues();
        dense.sort_by(f64::total_cmp);
        ours.sort_by(f64::total_cmp);
        for (x, y) in dense.iter().zip(&ours) {
            assert!((x - y).abs() < 1e-8, "n={n}: {x} vs {y}");
        }
        let lambda = dense[..dense.len() - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((lambda - g.lambda).abs() < 1e-8);
    }
}
