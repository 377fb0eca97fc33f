use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use weighted_ase::cluster::{ari, fit_gmm, fit_gmm_from_responsibilities, responsibilities_from_labels, GmmOptions};
use weighted_ase::linalg::ipq_matrix;
use weighted_ase::model::{BlockMoments, WeightedGraph};
use weighted_ase::predict::{average_ranks, predict, prediction_matrix, spearman, PredictMode};
use weighted_ase::represent::{transform_chain, transform_graph, EdgeTransform};
use weighted_ase::rng::stream_rng;
use weighted_ase::spectral::{eig_symmetric, embed_low_rank, spectral_embed};
use weighted_ase::theory::{affine_block_moments, size_adjusted_chernoff, ChernoffMethod};

fn symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 7);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-2.0..2.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn hollow_graph(n: usize, seed: u64, density: f64) -> WeightedGraph {
    let mut rng = stream_rng(seed, 8);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < density {
                let v = rng.gen_range(1..20) as f64;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
    }
    WeightedGraph::new(a).unwrap()
}

fn moments_strategy() -> impl Strategy<Value = (BlockMoments, Vec<f64>)> {
    (2usize..=3).prop_flat_map(|k| {
        let m = k * (k + 1) / 2;
        (
            prop::collection::vec(0.05f64..1.5, m),
            prop::collection::vec(0.05f64..2.0, m),
            prop::collection::vec(0.2f64..1.0, k),
        )
            .prop_map(move |(bs, cs, w)| {
                let mut b = DMatrix::zeros(k, k);
                let mut c = DMatrix::zeros(k, k);
                let mut idx = 0;
                for i in 0..k {
                    for j in i..k {
                        b[(i, j)] = bs[idx];
                        b[(j, i)] = bs[idx];
                        c[(i, j)] = cs[idx];
                        c[(j, i)] = cs[idx];
                        idx += 1;
                    }
                }
                let s: f64 = w.iter().sum();
                (BlockMoments { b, c }, w.iter().map(|x| x / s).collect())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chernoff_is_affine_invariant(
        (m, pi) in moments_strategy(),
        mag in 0.25f64..4.0,
        negate in any::<bool>(),
        shift in -1.0f64..1.0,
    ) {
        let a = if negate { -mag } else { mag };
        let base = size_adjusted_chernoff(&m, &pi, ChernoffMethod::Auto).unwrap().c;
        let moved = size_adjusted_chernoff(&affine_block_moments(&m, a, shift).unwrap(), &pi, ChernoffMethod::Auto)
            .unwrap()
            .c;
        prop_assert!((moved - base).abs() <= 1e-8 * base.abs().max(1e-300));
    }

    #[test]
    fn complement_keeps_chernoff((m, pi) in moments_strategy()) {
        let base = size_adjusted_chernoff(&m, &pi, ChernoffMethod::Auto).unwrap().c;
        let flipped = size_adjusted_chernoff(&affine_block_moments(&m, -1.0, 1.0).unwrap(), &pi, ChernoffMethod::Auto)
            .unwrap()
            .c;
        prop_assert!((flipped - base).abs() <= 1e-8 * base);
    }

    #[test]
    fn ari_is_symmetric_and_label_blind(
        a in prop::collection::vec(0usize..4, 2..60),
        seed in any::<u64>(),
    ) {
        let mut rng = stream_rng(seed, 0);
        let b: Vec<usize> = a.iter().map(|&x| if rng.gen::<f64>() < 0.3 { rng.gen_range(0..4) } else { x }).collect();
        let perm = [2usize, 0, 3, 1];
        let renamed: Vec<usize> = b.iter().map(|&x| perm[x]).collect();
        let ab = ari(&a, &b).unwrap();
        prop_assert!((ab - ari(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((ab - ari(&a, &renamed).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
    }

    #[test]
    fn spearman_ignores_monotone_maps(
        x in prop::collection::vec(-50.0f64..50.0, 3..80),
        seed in any::<u64>(),
    ) {
        let mut rng = stream_rng(seed, 1);
        let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-30.0..30.0)).collect();
        prop_assume!(x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0]));
        let r = spearman(&x, &y).unwrap();
        let fx: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let gy: Vec<f64> = y.iter().map(|v| (v / 20.0).exp()).collect();
        prop_assert!((r - spearman(&fx, &gy).unwrap()).abs() < 1e-12);
        prop_assert!((spearman(&x, &fx).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((spearman(&x, &neg).unwrap() + r).abs() < 1e-12);
    }

    #[test]
    fn average_ranks_sum_is_fixed(x in prop::collection::vec(0u8..6, 1..50)) {
        let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let n = xs.len() as f64;
        let total: f64 = average_ranks(&xs).iter().sum();
        prop_assert!((total - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn presence_is_idempotent(seed in any::<u64>(), density in 0.05f64..0.9) {
        let g = hollow_graph(25, seed, density);
        let once = transform_graph(&g, &EdgeTransform::PresenceIndicator).unwrap();
        let twice = transform_graph(&once, &EdgeTransform::PresenceIndicator).unwrap();
        prop_assert_eq!(once.adjacency(), twice.adjacency());
    }

    #[test]
    fn affine_maps_compose(seed in any::<u64>(), a in 0.5f64..3.0, b in -2.0f64..2.0) {
        let g = hollow_graph(20, seed, 0.5);
        let chain = [EdgeTransform::Affine { a, b }, EdgeTransform::Affine { a: 1.0 / a, b: -b / a }];
        let back = transform_chain(&g, &chain).unwrap().graph;
        prop_assert!((back.adjacency() - g.adjacency()).amax() < 1e-12);
        prop_assert!(back.adjacency().diagonal().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_is_best_low_rank_fit(n in 6usize..40, d in 1usize..5, seed in any::<u64>()) {
        let m = symmetric(n, seed);
        let emb = spectral_embed(&m, d).unwrap();
        let all = eig_symmetric(&m).unwrap();
        let mut mags: Vec<f64> = all.values.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let kept: f64 = mags[..d].iter().map(|v| v * v).sum();
        let resid = (&m - prediction_matrix(&emb)).norm_squared();
        prop_assert!((resid - (m.norm_squared() - kept)).abs() <= 1e-9 * m.norm_squared());
        let mut got: Vec<f64> = emb.eigenvalues.iter().map(|v| v.abs()).collect();
        got.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in got.iter().zip(&mags) {
            prop_assert!((g - w).abs() <= 1e-9 * mags[0]);
        }
        prop_assert_eq!(emb.p + emb.q, d);
    }

    #[test]
    fn low_rank_route_reproduces_the_mean(n in 5usize..40, p in 1usize..3, q in 0usize..2, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 2);
        let x = DMatrix::from_fn(n, p + q, |_, _| rng.gen_range(-1.0..1.0));
        prop_assume!(n > p + q);
        let target = &x * ipq_matrix(p, q) * x.transpose();
        let emb = embed_low_rank(&x, p, q).unwrap();
        prop_assert!((emb.reconstruct() - &target).amax() <= 1e-10 * target.amax().max(1.0));
    }

    #[test]
    fn hybrid_passes_seen_pairs_through(seed in any::<u64>(), density in 0.1f64..0.7) {
        let day0 = hollow_graph(30, seed, density);
        let day1 = hollow_graph(30, seed ^ 0x5555, 0.5);
        let emb = spectral_embed(day0.adjacency(), 2).unwrap();
        let targets: Vec<(usize, usize, f64)> = day1.upper_entries().filter(|e| e.2 > 0.0).collect();
        let set = predict(&day0, &emb, PredictMode::HybridCount, &targets).unwrap();
        let raw = predict(&day0, &emb, PredictMode::RawCount, &targets).unwrap();
        for (h, r) in set.pairs.iter().zip(&raw.pairs) {
            let seen = day0.weight(h.i, h.j);
            prop_assert_eq!(h.predicted, if seen > 0.0 { seen } else { r.predicted });
            prop_assert_eq!(h.observed, r.observed);
        }
    }

    #[test]
    fn em_log_likelihood_never_drops(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = stream_rng(seed, 3);
        let x = DMatrix::from_fn(150, 2, |i, c| (i % 3) as f64 * 2.5 * (c as f64 + 1.0) + rng.gen_range(-1.0..1.0));
        let fit = fit_gmm(&x, k, seed, GmmOptions::default()).unwrap();
        prop_assert!(fit.is_monotone(1e-9));
        let w: f64 = fit.weights.iter().sum();
        prop_assert!((w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn em_commutes_with_invertible_linear_maps(seed in any::<u64>(), m in prop::collection::vec(-2.0f64..2.0, 4)) {
        let map = DMatrix::from_row_slice(2, 2, &m);
        prop_assume!(map.determinant().abs() > 0.3);
        let mut rng = stream_rng(seed, 4);
        let labels: Vec<usize> = (0..120).map(|i| i % 2).collect();
        let x = DMatrix::from_fn(120, 2, |i, c| {
            4.0 * labels[i] as f64 * (1.0 + c as f64) + rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0)
        });
        let init = responsibilities_from_labels(&labels, 2).unwrap();
        let opts = GmmOptions { tol: 1e-10, max_iter: 200 };
        let base = fit_gmm_from_responsibilities(&x, &init, opts, seed).unwrap();
        let moved = fit_gmm_from_responsibilities(&(&x * &map), &init, opts, seed).unwrap();
        prop_assert!((base.responsibilities - moved.responsibilities).amax() < 1e-6);
    }
}
