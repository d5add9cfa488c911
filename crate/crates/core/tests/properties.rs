//! Property tests over randomly drawn states, observables and pointers.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weaklab::hilbert::{eig_hermitian, expectation, random, tensor};
use weaklab::pointer::PointerState;
use weaklab::projective::abl_distribution;
use weaklab::scenarios::{
    emit_config, load_config, Mode, OutputFormat, PointerConfig, PostSpec, ScenarioConfig,
};
use weaklab::weak::{expectation_decomposition, weak_value_of};
use weaklab::{Complex64, GridSpec, Operator};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tensor_is_associative(seed in any::<u64>(), da in 1usize..5, db in 1usize..5, dc in 1usize..5) {
        let mut r = rng(seed);
        let (a, b, c) = (random::state(&mut r, da), random::state(&mut r, db), random::state(&mut r, dc));
        let left = tensor(&tensor(&a, &b).unwrap(), &c).unwrap();
        let right = tensor(&a, &tensor(&b, &c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-15);
    }

    #[test]
    fn spectral_reconstruction(seed in any::<u64>(), dim in 1usize..=16) {
        let m = random::hermitian(&mut rng(seed), dim);
        let s = eig_hermitian(&m).unwrap();
        prop_assert!(s.reconstruct().max_abs_diff(&m) <= 1e-10);
        prop_assert!(s.orthonormality_residual() <= 1e-10);
        prop_assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unitaries_preserve_norm(seed in any::<u64>(), dim in 1usize..=8) {
        let mut r = rng(seed);
        let u = random::unitary(&mut r, dim);
        let psi = random::state(&mut r, dim).scale(Complex64::new(r.random_range(0.1..3.0), 0.0));
        let out = u.apply(&psi).unwrap();
        prop_assert!((out.norm() - psi.norm()).abs() <= 1e-12);
    }

    #[test]
    // ranges keep the moved packet more than 9 sigma from the grid edges
    fn translation_preserves_norm_and_width(x0 in -3.0f64..3.0, s in -6.0f64..6.0, sigma in 0.6f64..1.2) {
        let phi = PointerState::gaussian(GridSpec::default(), x0, sigma).unwrap();
        let moved = phi.translate(s).unwrap();
        prop_assert!((moved.squared_norm() - phi.squared_norm()).abs() <= 1e-12);
        let (m0, m1) = (phi.moments().unwrap(), moved.moments().unwrap());
        prop_assert!((m1.var_x - m0.var_x).abs() <= 1e-10);
        prop_assert!((m1.mean_x - m0.mean_x - s).abs() <= GridSpec::default().dx() / 10.0);
    }

    #[test]
    fn exp_cp_round_trip(re_frac in -1.0f64..1.0, im in -5.0f64..5.0) {
        let grid = GridSpec::default();
        // |Re c| * max|p| <= 10 keeps the inverse's noise amplification below e^10
        let c = Complex64::new(re_frac * 10.0 / grid.max_momentum(), im);
        let phi = PointerState::gaussian(grid, 0.5, 1.0).unwrap();
        let back = phi.apply_exp_cp(c).unwrap().apply_exp_cp(-c).unwrap();
        prop_assert!(back.max_abs_diff(&phi) <= 1e-10);
    }

    #[test]
    fn abl_probabilities_sum_to_one(seed in any::<u64>(), dim in 2usize..=6, mask in any::<u32>()) {
        let mut r = rng(seed);
        let (pre, post) = (random::state(&mut r, dim), random::state(&mut r, dim));
        let levels = eig_hermitian(&random::hermitian(&mut r, dim)).unwrap().eigen_projectors();
        let fine: Vec<Operator> = levels.iter().map(|l| l.projector.clone()).collect();
        // coarse set: group eigenprojectors by the bits of `mask`
        let mut coarse = vec![Operator::zeros(dim), Operator::zeros(dim)];
        for (k, p) in fine.iter().enumerate() {
            let g = ((mask >> k) & 1) as usize;
            coarse[g] = coarse[g].add(p).unwrap();
        }
        coarse.retain(|p| p.frobenius_norm() > 0.0);
        for set in [fine, coarse] {
            let probs = abl_distribution(&pre, &post, &set).unwrap();
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(probs.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn projector_weak_values_sum_to_one(seed in any::<u64>(), dim in 2usize..=6) {
        let mut r = rng(seed);
        let (pre, post) = (random::state(&mut r, dim), random::state(&mut r, dim));
        prop_assume!(post.inner(&pre).unwrap().norm_sqr() >= 1e-6);
        let levels = eig_hermitian(&random::hermitian(&mut r, dim)).unwrap().eigen_projectors();
        let values: Vec<Complex64> = levels
            .iter()
            .map(|l| weak_value_of(&pre, &post, &l.projector).unwrap().value)
            .collect();
        let scale = values.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let sum: Complex64 = values.iter().sum();
        prop_assert!((sum - 1.0).norm() <= 1e-12 * scale);
    }

    #[test]
    fn expectation_decomposes_over_post_selections(seed in any::<u64>(), dim in 2usize..=6) {
        let mut r = rng(seed);
        let psi = random::state(&mut r, dim);
        let a = random::hermitian(&mut r, dim);
        let b = eig_hermitian(&random::hermitian(&mut r, dim)).unwrap();
        let terms = expectation_decomposition(&psi, &a, &b).unwrap();
        let re: f64 = terms.iter().map(|t| t.probability * t.weak_value.re).sum();
        let im: f64 = terms.iter().map(|t| t.probability * t.weak_value.im).sum();
        prop_assert!((re - expectation(&a, &psi).unwrap()).abs() <= 1e-10);
        prop_assert!(im.abs() <= 1e-10);
    }

    #[test]
    fn configs_round_trip_through_json(seed in any::<u64>(), dim in 1usize..=4, ng in 1usize..5, outcome in 0usize..4) {
        let mut r = rng(seed);
        let post = if outcome < dim {
            PostSpec::Basis { observable: random::hermitian(&mut r, dim), outcome }
        } else {
            PostSpec::State(random::state(&mut r, dim))
        };
        let config = ScenarioConfig {
            name: format!("random-{seed}"),
            mode: Mode::Weak,
            dimension: dim,
            pre: Some(random::state(&mut r, dim)),
            observable: Some(random::hermitian(&mut r, dim)),
            post: Some(post),
            u_wi: Some(random::unitary(&mut r, dim)),
            u_fw: None,
            g: (0..ng).map(|_| r.random_range(1e-4..0.1)).collect(),
            pointer: PointerConfig { x0: r.random_range(-2.0..2.0), ..PointerConfig::default() },
            projector_sets: Vec::new(),
            classical: None,
            current: None,
            seed,
            format: OutputFormat::Csv,
            tau: Some(r.random_range(0.0..1.0)),
        };
        let loaded = load_config(&emit_config(&config)).unwrap();
        prop_assert_eq!(loaded.config, config);
    }
}
