use mdisc::construction::{build_low_disc_set, Mode};
use mdisc::discrepancy::{disc, IntegerMultiset};
use mdisc::distribution::{exact_distribution, uniformity_report, Method};
use mdisc::expander::{build_expander, spectral_gap};
use mdisc::halfspace::{blackbox_approx, build_master_halfspace, lift_to_nof, BlackboxKind};

#[test]
fn set_to_halfspace_to_lift() {
    let r = build_low_disc_set(61, 0.6, Mode::Practical, 11);
    let z = &r.final_set;
    assert!(disc(z).upper() <= 0.6);
    // exhaustive stages need few variables
    let prefix = IntegerMultiset::from_residues(61, &z.residues()[..6]).unwrap();
    let h = build_master_halfspace(&prefix).unwrap();
    assert!(h.n <= 20);
    assert_eq!(h.never_zero(), Some(true));

    let poly = blackbox_approx(&h, 1, BlackboxKind::PolyLinear).unwrap();
    let err: num_rational::BigRational = poly.exact_error.unwrap().parse().unwrap();
    assert!(err < num_rational::BigRational::from_integer(1.into()));

    let lifted = lift_to_nof(&h, 3, 1).unwrap();
    let all = u64::MAX >> (64 - lifted.coordinates());
    // every party sees every coordinate: each block is hit exactly once
    let x: Vec<bool> = vec![false; h.n];
    assert_eq!(lifted.eval(&[all, all, all]), h.eval_bits(&x));
}

#[test]
fn small_set_distribution_is_near_uniform() {
    let r = build_low_disc_set(13, 0.7, Mode::Random, 5);
    let z = &r.final_set;
    if z.len() > 20 {
        return;
    }
    let t = exact_distribution(z, Method::Dp).unwrap();
    let u = uniformity_report(z, 0.25).unwrap();
    assert_eq!(u.observed_num.parse::<num_bigint::BigInt>().unwrap(), *t.max_deviation().numer());
    assert!(u.observed <= u.disc_bound + 1e-12);
    assert!(u.observed <= u.fourier_bound + 1e-12);
}

#[test]
fn expander_reports_are_consistent() {
    for seed in [1, 2] {
        let rep = build_expander(2003, 0.5, Mode::Random, seed).unwrap();
        let gap = spectral_gap(&rep.graph, rep.generator.as_ref());
        assert!((gap.lambda - rep.graph.lambda).abs() < 1e-9);
        assert!(rep.graph.lambda <= 0.5 * rep.graph.degree as f64 + 1e-9);
    }
}
