//! Property-based tests for the numerical core: solver/oracle agreement,
//! eigendecomposition contracts, metric axioms, ranking invariances, and
//! bit-exact persistence round-trips.

use std::path::Path;

use proptest::prelude::*;

use sae_core::data::{fnv1a64, parse_labels, parse_matrix, render_labels, render_matrix};
use sae_core::eval::{hit_at_k, pairwise_distance, rank_prototypes, Metric, SortOrder};
use sae_core::linalg::{solve_sylvester, solve_sylvester_oracle, sym_eig, sylvester_residual};
use sae_core::matrix::Matrix;

fn entries(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-5.0f64..5.0, rows * cols)
        .prop_map(move |data| Matrix::from_vec(rows, cols, data).unwrap())
}

/// Strictly positive definite matrix: Gram of a random square plus a
/// diagonal shift, keeping every Sylvester eigenvalue pair well away from
/// the singularity guard.
fn spd(n: usize) -> impl Strategy<Value = Matrix> {
    entries(n, n).prop_map(move |m| {
        let g = m.gram();
        Matrix::from_fn(n, n, |i, j| g.at(i, j) + if i == j { 0.1 } else { 0.0 }).unwrap()
    })
}

fn sylvester_instance() -> impl Strategy<Value = (Matrix, Matrix, Matrix)> {
    (1usize..=6, 1usize..=6)
        .prop_flat_map(|(k, d)| (spd(k), spd(d), entries(k, d)))
}

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sylvester_solution_matches_kronecker_oracle((a, b, c) in sylvester_instance()) {
        let fast = solve_sylvester(&a, &b, &c).unwrap();
        let oracle = solve_sylvester_oracle(&a, &b, &c).unwrap();
        prop_assert!(max_abs_diff(&fast, &oracle) <= 1e-8);
        prop_assert!(sylvester_residual(&a, &b, &c, &fast).unwrap() <= 1e-8);
    }

    #[test]
    fn sylvester_is_linear_in_c(
        (a, b, c1) in sylvester_instance(),
        scale in -3.0f64..3.0,
    ) {
        let c2 = c1.scale(scale);
        let w1 = solve_sylvester(&a, &b, &c1).unwrap();
        let w2 = solve_sylvester(&a, &b, &c2).unwrap();
        prop_assert!(max_abs_diff(&w2, &w1.scale(scale)) <= 1e-7);
    }

    #[test]
    fn solver_sees_only_the_symmetric_part((a, b, c) in sylvester_instance(), noise in entries(6, 6)) {
        // The solver works on (M + Mᵀ)/2, so passing a pre-symmetrized
        // copy (same operand order as the internal symmetrization, for
        // which symmetric input is a bitwise fixed point) must give a
        // bit-identical solution even when the original carries an
        // asymmetric perturbation.
        let k = a.rows();
        let a_perturbed = Matrix::from_fn(k, k, |i, j| {
            a.at(i, j) + noise.at(i % 6, j % 6) * 0.01
        }).unwrap();
        let a_symmetrized = Matrix::from_fn(k, k, |i, j| {
            0.5 * (a_perturbed.at(i, j) + a_perturbed.at(j, i))
        }).unwrap();
        let direct = solve_sylvester(&a_perturbed, &b, &c).unwrap();
        let explicit = solve_sylvester(&a_symmetrized, &b, &c).unwrap();
        prop_assert_eq!(direct, explicit);
    }

    #[test]
    fn eigendecomposition_reconstructs_and_is_orthonormal(m in (1usize..=8).prop_flat_map(|n| entries(n, n))) {
        let n = m.rows();
        let sym = Matrix::from_fn(n, n, |i, j| (m.at(i, j) + m.at(j, i)) / 2.0).unwrap();
        let eig = sym_eig(&sym).unwrap();
        let v = eig.eigenvectors();
        let lambda = eig.eigenvalues();

        // Ascending order.
        for pair in lambda.windows(2) {
            prop_assert!(pair[0] <= pair[1]);
        }
        // VᵀV = I.
        let vtv = v.transpose().matmul(v);
        let identity = Matrix::identity(n);
        prop_assert!(max_abs_diff(&vtv, &identity) <= 1e-9);
        // V diag(λ) Vᵀ = M.
        let scaled = Matrix::from_fn(n, n, |i, j| v.at(i, j) * lambda[j]).unwrap();
        let rebuilt = scaled.matmul_transpose(v);
        prop_assert!(max_abs_diff(&rebuilt, &sym) <= 1e-8);
    }
}

fn vector_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=8).prop_flat_map(|dim| {
        (
            prop::collection::vec(-10.0f64..10.0, dim),
            prop::collection::vec(-10.0f64..10.0, dim),
            prop::collection::vec(-10.0f64..10.0, dim),
        )
    })
}

fn column(v: &[f64]) -> Matrix {
    Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn minkowski_satisfies_the_metric_axioms((u, v, w) in vector_pair(), p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let metric = Metric::Minkowski { p };
        let d = |x: &[f64], y: &[f64]| {
            pairwise_distance(&column(x), &column(y), metric).unwrap().at(0, 0)
        };
        // Nonnegativity and identity of indiscernibles.
        prop_assert!(d(&u, &v) >= 0.0);
        prop_assert_eq!(d(&u, &u), 0.0);
        // Symmetry is exact: the scalar operations are symmetric in the
        // operands term by term.
        prop_assert_eq!(d(&u, &v), d(&v, &u));
        // Triangle inequality with a small float allowance.
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-9);
    }

    #[test]
    fn minkowski_matches_the_scalar_loop_oracle((u, v, _) in vector_pair(), p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let got = pairwise_distance(&column(&u), &column(&v), Metric::Minkowski { p })
            .unwrap()
            .at(0, 0);
        let mut sum = 0.0;
        for (x, y) in u.iter().zip(&v) {
            sum += (x - y).abs().powf(p);
        }
        let oracle = sum.powf(1.0 / p);
        prop_assert!((got - oracle).abs() <= 1e-12, "got {got}, oracle {oracle}");
    }

    #[test]
    fn cosine_is_symmetric_and_bounded((u, v, _) in vector_pair()) {
        prop_assume!(u.iter().any(|&x| x != 0.0) && v.iter().any(|&x| x != 0.0));
        let d = pairwise_distance(&column(&u), &column(&v), Metric::Cosine).unwrap().at(0, 0);
        let flipped = pairwise_distance(&column(&v), &column(&u), Metric::Cosine).unwrap().at(0, 0);
        prop_assert_eq!(d, flipped);
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&d));
        let self_d = pairwise_distance(&column(&u), &column(&u), Metric::Cosine).unwrap().at(0, 0);
        prop_assert!(self_d.abs() <= 1e-12);
    }

    #[test]
    fn ranking_is_invariant_under_positive_scaling(
        rows in 1usize..=6,
        cols in 2usize..=6,
        seed_data in prop::collection::vec(0.01f64..10.0, 36),
        factor in 0.001f64..1000.0,
    ) {
        let d = Matrix::from_fn(rows, cols, |i, j| seed_data[i * 6 + j]).unwrap();
        let scaled = d.scale(factor);
        for order in [SortOrder::Ascend, SortOrder::Descend] {
            prop_assert_eq!(
                rank_prototypes(&d, order).unwrap(),
                rank_prototypes(&scaled, order).unwrap()
            );
        }
    }

    #[test]
    fn hit_rate_is_monotone_in_k_for_random_rankings(
        rows in 1usize..=10,
        cols in 2usize..=6,
        seed_data in prop::collection::vec(-10.0f64..10.0, 60),
        truth_seed in prop::collection::vec(0usize..6, 10),
    ) {
        let d = Matrix::from_fn(rows, cols, |i, j| seed_data[i * 6 + j]).unwrap();
        let rankings = rank_prototypes(&d, SortOrder::Ascend).unwrap();
        let truth: Vec<usize> = truth_seed[..rows].iter().map(|&t| t % cols).collect();
        let mut previous = 0.0;
        for k in 1..=cols {
            let acc = hit_at_k(&rankings, &truth, k).unwrap();
            prop_assert!(acc >= previous);
            previous = acc;
        }
        prop_assert_eq!(previous, 1.0, "hit@c must be the exact identity");
    }

    #[test]
    fn matrix_text_round_trip_is_bit_exact(
        rows in 1usize..=5,
        cols in 1usize..=5,
        bits in prop::collection::vec(any::<u64>(), 25),
    ) {
        let data: Vec<f64> = bits[..rows * cols]
            .iter()
            .map(|&b| {
                let x = f64::from_bits(b);
                if x.is_finite() { x } else { (b % 1000) as f64 * 0.125 - 62.0 }
            })
            .collect();
        let m = Matrix::from_vec(rows, cols, data).unwrap();
        let text = render_matrix(&m);
        let back = parse_matrix(&text, Path::new("prop.mat")).unwrap();
        prop_assert_eq!(m, back);
    }

    #[test]
    fn label_text_round_trip_is_exact(labels in prop::collection::vec(any::<u32>(), 1..50)) {
        let text = render_labels(&labels);
        let back = parse_labels(&text, Path::new("prop.labels")).unwrap();
        prop_assert_eq!(labels, back);
    }

    #[test]
    fn fnv_is_stable_under_chunking(data in prop::collection::vec(any::<u8>(), 0..1024), split in 0usize..1024) {
        let whole = fnv1a64(&data);
        let cut = split.min(data.len());
        let mut hasher = sae_core::data::Fnv1a::new();
        hasher.update(&data[..cut]);
        hasher.update(&data[cut..]);
        prop_assert_eq!(whole, hasher.finish());
    }
}
