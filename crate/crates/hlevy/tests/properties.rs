//! Property tests for the structural invariants of the measure maps and
//! the spectral statistics.

use num_complex::Complex64;
use proptest::prelude::*;

use hlevy::ensemble::HermitianMatrix;
use hlevy::measures::{
    bp_to_classical, bp_to_free, classical_cumulants, free_cumulants, voiculescu_phi,
    ClassicalTriplet, GeneratingPair, RealMeasure,
};
use hlevy::spectral::{kolmogorov_distance, stieltjes_of_esd, EmpiricalMeasure};

fn atom_strategy() -> impl Strategy<Value = (f64, f64)> {
    (
        prop_oneof![(-3.0..-0.05f64), (0.05..3.0f64)],
        0.0..2.0f64,
    )
}

fn triplet_strategy() -> impl Strategy<Value = ClassicalTriplet> {
    (
        0.0..2.0f64,
        -2.0..2.0f64,
        prop::collection::vec(atom_strategy(), 0..5),
    )
        .prop_filter_map("distinct atom locations", |(sigma2, gamma, atoms)| {
            for (i, a) in atoms.iter().enumerate() {
                for b in &atoms[i + 1..] {
                    if (a.0 - b.0).abs() < 1e-6 {
                        return None;
                    }
                }
            }
            ClassicalTriplet::new(
                sigma2,
                gamma,
                RealMeasure {
                    atoms,
                    density: None,
                },
            )
            .ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The bijection round trip reproduces the triplet and matches the
    /// first six cumulants.
    #[test]
    fn bijection_round_trip(t in triplet_strategy()) {
        let p = bp_to_free(&t).unwrap();
        let back = bp_to_classical(&p).unwrap();
        prop_assert!((back.sigma2 - t.sigma2).abs() <= 1e-10);
        prop_assert!((back.gamma - t.gamma).abs() <= 1e-10);
        prop_assert!(back.nu.approx_eq(&t.nu, 1e-10));
        let cf = free_cumulants(&p, 6).unwrap();
        let cc = classical_cumulants(&t, 6).unwrap();
        for (a, b) in cf.iter().zip(&cc) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    /// The Voiculescu transform is affine in the pair.
    #[test]
    fn phi_is_affine(
        t1 in triplet_strategy(),
        t2 in triplet_strategy(),
        re in -3.0..3.0f64,
        im in 0.1..3.0f64,
    ) {
        let p1 = bp_to_free(&t1).unwrap();
        let p2 = bp_to_free(&t2).unwrap();
        if let Ok(sum) = p1.sum(&p2) {
            let z = Complex64::new(re, im);
            let lhs = voiculescu_phi(&sum, z).unwrap();
            let rhs = voiculescu_phi(&p1, z).unwrap() + voiculescu_phi(&p2, z).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }
    }

    /// Kolmogorov distance lies in [0, 1], vanishes against the sample's
    /// own empirical CDF, and the Stieltjes transform is Herglotz.
    #[test]
    fn spectral_statistics_are_sane(
        mut eigs in prop::collection::vec(-5.0..5.0f64, 1..40),
        re in -4.0..4.0f64,
        im in 0.05..4.0f64,
    ) {
        let m = EmpiricalMeasure::from_eigenvalues(eigs.clone());
        eigs.sort_by(|a, b| a.total_cmp(b));
        let empirical = {
            let e = eigs.clone();
            move |x: f64| e.iter().filter(|&&v| v <= x).count() as f64 / e.len() as f64
        };
        let zero = kolmogorov_distance(&m, empirical);
        prop_assert!(zero <= 1e-12);
        let ks = kolmogorov_distance(&m, |x| hlevy::burgers::semicircle_cdf(1.0, x));
        prop_assert!((0.0..=1.0).contains(&ks));

        let z = Complex64::new(re, im);
        prop_assert!(stieltjes_of_esd(&m, z).im < 0.0);
    }

    /// Hermiticity holds exactly by storage under rank-one updates and
    /// identity shifts.
    #[test]
    fn hermitian_storage_invariant(
        coefs in prop::collection::vec((-2.0..2.0f64, 0usize..6), 1..5),
        shift in -1.0..1.0f64,
    ) {
        let n = 6;
        let mut mat = HermitianMatrix::zeros(n);
        for (c, k) in coefs {
            let v: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(((i + k) as f64).sin(), ((i * k) as f64).cos()))
                .collect();
            mat.add_rank_one(c, &v);
        }
        mat.add_scaled_identity(shift);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(mat.get(i, j), mat.get(j, i).conj());
            }
            prop_assert_eq!(mat.get(i, i).im, 0.0);
        }
    }

    /// The generating pair rejects mass at the origin outside the sigma2
    /// slot.
    #[test]
    fn pair_rejects_atom_at_zero(mass in 0.01..1.0f64) {
        let bad = GeneratingPair {
            eta: 0.0,
            sigma2: 0.0,
            rho_rest: RealMeasure::dirac(0.0, mass),
        };
        prop_assert!(bad.validate().is_err());
    }
}
