//! Invariants checked on proptest-generated instances. Instances are built
//! from a drawn seed with the crate's samplers so they stay well formed.

use proptest::prelude::*;
use proptest::test_runner::Config as ProptestConfig;

use qrv_core::l1::{bracket, l1_certificate, l1_upper_abs};
use qrv_core::linalg::{operator_norm, psd_sqrt, ComplexOperator, C64};
use qrv_core::majorization::apply_bistochastic;
use qrv_core::measure::{
    birkhoff_decompose, bistochastic_witness, hinge_family_test, majorizes_values, ClassicalFunction,
    FiniteMeasureSpace, WitnessOutcome,
};
use qrv_core::povm::{integrate, Povm, QuantumRandomVariable};
use qrv_core::random::*;

const TOL: f64 = 1e-7;

fn instance(seed: u64, m: usize, d: usize, singular: bool) -> (Povm, QuantumRandomVariable, QuantumRandomVariable) {
    let mut rng = seeded(seed);
    let space = FiniteMeasureSpace::from_masses(random_masses(m, &mut rng)).unwrap();
    let nu = random_povm(space, d, singular, &mut rng);
    let f = random_qrv(m, d, false, &mut rng);
    let g = random_qrv(m, d, false, &mut rng);
    (nu, f, g)
}

fn max_diff(a: &ComplexOperator, b: &ComplexOperator) -> f64 {
    (0..a.dim())
        .flat_map(|i| (0..a.dim()).map(move |j| (i, j)))
        .map(|(i, j)| (a[(i, j)] - b[(i, j)]).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        failure_persistence: None,
        .. ProptestConfig::default()
    })]

    #[test]
    fn seminorm_is_subadditive_and_real_homogeneous(
        seed in any::<u64>(), m in 1usize..=4, d in 1usize..=3, singular in any::<bool>(),
        re in -3.0f64..3.0, im in -3.0f64..3.0,
    ) {
        let (nu, f, g) = instance(seed, m, d, singular);
        let nf = l1_certificate(&f, &nu, 1e-9).unwrap();
        let ng = l1_certificate(&g, &nu, 1e-9).unwrap();
        let nsum = l1_certificate(&f.add(&g), &nu, 1e-9).unwrap();
        prop_assert!(nsum.dual_lower_bound <= nf.value + ng.value + TOL * (1.0 + nsum.value));

        // Homogeneous over the reals and under multiplication by i; a general
        // phase can cost up to sqrt 2 (see tests/seminorm_constants.rs).
        let scaled = l1_certificate(&f.scale(C64::new(re, 0.0)), &nu, 1e-9).unwrap();
        let expected = re.abs() * nf.value;
        prop_assert!((scaled.value - expected).abs() <= TOL * (1.0 + expected));
        let rotated = l1_certificate(&f.scale(C64::new(0.0, 1.0)), &nu, 1e-9).unwrap();
        prop_assert!((rotated.value - nf.value).abs() <= TOL * (1.0 + nf.value));
        let c = C64::new(re, im);
        let ncf = l1_certificate(&f.scale(c), &nu, 1e-9).unwrap();
        let bound = (re.abs() + im.abs()) * nf.value;
        prop_assert!(ncf.dual_lower_bound <= bound + TOL * (1.0 + bound));
        prop_assert!(ncf.value >= c.norm() * nf.dual_lower_bound / 2f64.sqrt() - TOL * (1.0 + bound));
    }

    #[test]
    fn self_adjoint_seminorm_is_sandwiched(
        seed in any::<u64>(), m in 1usize..=4, d in 1usize..=3, singular in any::<bool>(),
    ) {
        let mut rng = seeded(seed);
        let space = FiniteMeasureSpace::from_masses(random_masses(m, &mut rng)).unwrap();
        let nu = random_povm(space, d, singular, &mut rng);
        let f = random_qrv(m, d, true, &mut rng);
        let cert = l1_certificate(&f, &nu, 1e-9).unwrap();
        let lower = operator_norm(&integrate(&f, &nu, None).unwrap());
        let upper = l1_upper_abs(&f, &nu).unwrap();
        prop_assert!(lower <= cert.value + TOL * (1.0 + lower));
        prop_assert!(cert.dual_lower_bound <= upper + TOL * (1.0 + upper));
        prop_assert!(cert.verify(&f, &nu).unwrap().valid);
    }

    #[test]
    fn positive_functions_have_seminorm_equal_to_their_integral(
        seed in any::<u64>(), m in 1usize..=4, d in 1usize..=3,
    ) {
        let (nu, f, _) = instance(seed, m, d, false);
        let square = QuantumRandomVariable::new(f.values().iter().map(|v| v.matmul(&v.adjoint())).collect()).unwrap();
        let cert = l1_certificate(&square, &nu, 1e-9).unwrap();
        let direct = operator_norm(&integrate(&square, &nu, None).unwrap());
        prop_assert!((cert.value - direct).abs() <= TOL * (1.0 + direct));
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        .. ProptestConfig::default()
    })]

    #[test]
    fn integral_does_not_depend_on_the_reference_state(
        seed in any::<u64>(), m in 1usize..=5, d in 1usize..=4, singular in any::<bool>(),
    ) {
        let (nu, f, _) = instance(seed, m, d, singular);
        let mut rng = seeded(seed ^ 0x5eed);
        let base = integrate(&f, &nu, None).unwrap();
        for _ in 0..4 {
            let rho = full_rank_state(d, 0.05, &mut rng);
            let other = integrate(&f, &nu, Some(&rho)).unwrap();
            prop_assert!(max_diff(&base, &other) <= 1e-9 * (1.0 + operator_norm(&base)));
        }
    }

    #[test]
    fn integral_matches_effect_square_roots(
        seed in any::<u64>(), m in 1usize..=5, d in 1usize..=4, singular in any::<bool>(),
    ) {
        let (nu, f, _) = instance(seed, m, d, singular);
        let mut direct = ComplexOperator::zeros(d);
        for x in 0..m {
            let r = psd_sqrt(nu.effect(x), 1e-9).unwrap();
            direct += &r.as_operator().matmul(f.value(x)).matmul(r.as_operator());
        }
        let via_derivative = integrate(&f, &nu, None).unwrap();
        prop_assert!(max_diff(&direct, &via_derivative) <= 1e-10 * (1.0 + operator_norm(&direct)));
    }

    #[test]
    fn bracket_with_one_is_the_integral(seed in any::<u64>(), m in 1usize..=5, d in 1usize..=3) {
        let (nu, f, _) = instance(seed, m, d, false);
        let one = ClassicalFunction::real(&vec![1.0; m]);
        let b = bracket(&f, &one, &nu).unwrap();
        let i = integrate(&f, &nu, None).unwrap();
        prop_assert!(max_diff(&b, &i) <= 1e-12 * (1.0 + operator_norm(&i)));
    }

    #[test]
    fn bistochastic_images_preserve_integrals_and_adjoints(
        seed in any::<u64>(), m in 1usize..=6, d in 1usize..=3, uniform in any::<bool>(),
    ) {
        let mut rng = seeded(seed);
        let space = if uniform {
            FiniteMeasureSpace::uniform(m, 1.0)
        } else {
            FiniteMeasureSpace::from_masses(random_masses(m, &mut rng)).unwrap()
        };
        let nu = Povm::scalar(space.clone(), d);
        let f = random_qrv(m, d, false, &mut rng);
        let b = random_bistochastic(&space, &mut rng);
        let bf = apply_bistochastic(&b, &f).unwrap();
        let i_f = integrate(&f, &nu, None).unwrap();
        prop_assert!(max_diff(&integrate(&bf, &nu, None).unwrap(), &i_f) <= 1e-10 * (1.0 + operator_norm(&i_f)));
        let b_adj = apply_bistochastic(&b, &f.adjoint()).unwrap();
        for x in 0..m {
            prop_assert!(max_diff(b_adj.value(x), &bf.value(x).adjoint()) <= 1e-12);
        }
    }

    #[test]
    fn birkhoff_decompositions_rebuild_the_matrix(seed in any::<u64>(), m in 1usize..=6) {
        let mut rng = seeded(seed);
        let space = FiniteMeasureSpace::uniform(m, 1.0);
        let b = sinkhorn_bistochastic(&space, &mut rng);
        let terms = birkhoff_decompose(&b).unwrap();
        prop_assert!(terms.len() <= (m - 1) * (m - 1) + 1);
        let mut rebuilt = vec![vec![0.0; m]; m];
        for (w, perm) in &terms {
            prop_assert!(*w > 0.0);
            for (i, &j) in perm.iter().enumerate() {
                rebuilt[i][j] += w;
            }
        }
        for (i, row) in rebuilt.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                prop_assert!((v - b.entry(i, j)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn scalar_majorization_tests_agree(
        g in proptest::collection::vec(-4i32..=4, 1..=7),
        seed in any::<u64>(),
        mix in any::<bool>(),
    ) {
        let m = g.len();
        let space = FiniteMeasureSpace::uniform(m, 1.0);
        let g: Vec<f64> = g.into_iter().map(f64::from).collect();
        let mut rng = seeded(seed);
        let f: Vec<f64> = if mix {
            random_bistochastic(&space, &mut rng).apply_real(&g)
        } else {
            let p = permutation(m, &mut rng);
            let mut f: Vec<f64> = p.iter().map(|&i| g[i]).collect();
            if m >= 2 {
                f[0] += 1.0;
                f[1] -= 1.0;
            }
            f
        };
        let masses = vec![1.0; m];
        let partial = majorizes_values(&f, &masses, &g, &masses);
        let fc = ClassicalFunction::real(&f);
        let gc = ClassicalFunction::real(&g);
        let lp = matches!(bistochastic_witness(&space, &fc, &gc).unwrap(), WitnessOutcome::Feasible(_));
        let hinge = hinge_family_test(&space, &fc, &gc).unwrap();
        prop_assert_eq!(partial, lp);
        prop_assert_eq!(lp, hinge);
        if mix {
            prop_assert!(partial);
        }
    }
}
