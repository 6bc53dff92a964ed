use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use race_stream::linalg::{
    batch_least_squares, gram_schmidt, rls_update, rls_update_blocked, Lu, Mat, DEFAULT_RIDGE,
};

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn binary(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| f64::from(u8::from(rng.random_bool(0.3))))
}

fn rel_err(a: &Mat, b: &Mat) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

/// Sorted interior cut points of `0..q`, always ending at `q`.
fn cuts(rng: &mut ChaCha8Rng, q: usize, pieces: usize) -> Vec<usize> {
    let mut c: Vec<usize> = (0..pieces).map(|_| rng.random_range(1..q)).collect();
    c.push(q);
    c.sort_unstable();
    c.dedup();
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursive_matches_one_shot(seed: u64, q in 5usize..=50, k in 2usize..=8, l in 3usize..=20, pieces in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = uniform(&mut rng, q, k);
        let labels = binary(&mut rng, q, l);
        let c = cuts(&mut rng, q, pieces);
        let mut state = batch_least_squares(&h.slice_rows(0, c[0]), &labels.slice_rows(0, c[0]), DEFAULT_RIDGE).unwrap();
        for w in c.windows(2) {
            rls_update(&mut state, &h.slice_rows(w[0], w[1]), &labels.slice_rows(w[0], w[1])).unwrap();
        }
        let oneshot = batch_least_squares(&h, &labels, DEFAULT_RIDGE).unwrap();
        prop_assert!(rel_err(&state.beta, &oneshot.beta) <= 1e-8);
        prop_assert!(rel_err(&state.inverse_gram, &oneshot.inverse_gram) <= 1e-8);
        prop_assert_eq!(state.seen, q);
    }

    #[test]
    fn blocked_update_matches_single_update(seed: u64, n in 1usize..40, k in 1usize..6, l in 1usize..10, block in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = uniform(&mut rng, 10, k);
        let l0 = binary(&mut rng, 10, l);
        let start = batch_least_squares(&h0, &l0, DEFAULT_RIDGE).unwrap();
        let h = uniform(&mut rng, n, k);
        let y = binary(&mut rng, n, l);
        let mut whole = start.clone();
        rls_update(&mut whole, &h, &y).unwrap();
        let mut blocked = start;
        rls_update_blocked(&mut blocked, &h, &y, block).unwrap();
        prop_assert!(rel_err(&blocked.beta, &whole.beta) <= 1e-9);
        prop_assert_eq!(blocked.seen, whole.seen);
    }

    #[test]
    fn one_shot_solves_normal_equations(seed: u64, q in 1usize..40, k in 1usize..8, l in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = uniform(&mut rng, q, k);
        let labels = binary(&mut rng, q, l);
        let state = batch_least_squares(&h, &labels, DEFAULT_RIDGE).unwrap();
        // (HᵀH + λI) β = HᵀL
        let gram = h.t_matmul(&h).unwrap().add(&Mat::identity(k).scale(DEFAULT_RIDGE)).unwrap();
        let lhs = gram.matmul(&state.beta).unwrap();
        let rhs = h.t_matmul(&labels).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-8 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn perturbing_the_solution_never_lowers_the_objective(seed: u64, q in 10usize..40, k in 1usize..6, l in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = uniform(&mut rng, q, k);
        let labels = binary(&mut rng, q, l);
        let beta = batch_least_squares(&h, &labels, DEFAULT_RIDGE).unwrap().beta;
        let objective = |b: &Mat| {
            let r = labels.sub(&h.matmul(b).unwrap()).unwrap().frobenius_norm();
            r * r + DEFAULT_RIDGE * b.frobenius_norm().powi(2)
        };
        let best = objective(&beta);
        for _ in 0..5 {
            let nudged = beta.add(&uniform(&mut rng, k, l).scale(1e-3)).unwrap();
            prop_assert!(objective(&nudged) >= best - 1e-12);
        }
    }

    #[test]
    fn zero_residual_batch_leaves_decoder_unchanged(seed: u64, k in 1usize..6, l in 1usize..10, n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = uniform(&mut rng, 20, k);
        let l0 = binary(&mut rng, 20, l);
        let mut state = batch_least_squares(&h0, &l0, DEFAULT_RIDGE).unwrap();
        let before = state.beta.clone();
        let h = uniform(&mut rng, n, k);
        let consistent = h.matmul(&before).unwrap();
        rls_update(&mut state, &h, &consistent).unwrap();
        prop_assert!(state.beta.sub(&before).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt_output_is_orthonormal(seed: u64, l in 1usize..60, kk in 1usize..60) {
        let k = kk.min(l);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns: Vec<Vec<f64>> = (0..k).map(|_| (0..l).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let a = gram_schmidt(&columns).unwrap();
        prop_assert_eq!(a.shape(), (l, k));
        let gram = a.t_matmul(&a).unwrap();
        prop_assert!(gram.sub(&Mat::identity(k)).unwrap().max_abs() < 1e-10);
        // the first output column is the normalized first input
        let norm = columns[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        for (i, v) in columns[0].iter().enumerate() {
            prop_assert!((a[(i, 0)] - v / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_solve_inverts_the_product(seed: u64, n in 1usize..12, cols in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // diagonally dominant, hence well conditioned
        let a = uniform(&mut rng, n, n).add(&Mat::identity(n).scale(n as f64 + 1.0)).unwrap();
        let x = uniform(&mut rng, n, cols);
        let b = a.matmul(&x).unwrap();
        let solved = Lu::factor(&a, "a").unwrap().solve(&b).unwrap();
        prop_assert!(solved.sub(&x).unwrap().max_abs() < 1e-10);
    }
}

#[test]
fn inverse_gram_stays_symmetric_over_many_updates() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (k, l) = (6, 9);
    let mut state = batch_least_squares(&uniform(&mut rng, 8, k), &binary(&mut rng, 8, l), DEFAULT_RIDGE).unwrap();
    for _ in 0..150 {
        let n = rng.random_range(1..12);
        rls_update(&mut state, &uniform(&mut rng, n, k), &binary(&mut rng, n, l)).unwrap();
        assert!(state.inverse_gram.max_asymmetry() <= 1e-12 * state.inverse_gram.max_abs().max(1.0));
        assert!(state.beta.is_finite());
    }
}

#[test]
fn degenerate_columns_are_rejected() {
    let columns = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]];
    assert!(gram_schmidt(&columns).is_err());
    assert!(gram_schmidt(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).is_err());
}

#[test]
fn singular_matrix_is_reported() {
    let a = Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
    assert!(Lu::factor(&a, "a").is_err());
}
