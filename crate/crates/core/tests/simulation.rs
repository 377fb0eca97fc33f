use nalgebra::DMatrix;
use weighted_ase::align::{oracle_align, two_to_infinity};
use weighted_ase::model::{BlockModel, WeightDistribution};
use weighted_ase::represent::poisson_block_model;
use weighted_ase::rng::stream_rng;
use weighted_ase::spectral::{embed_low_rank, spectral_embed};

fn distributions() -> Vec<WeightDistribution> {
    use WeightDistribution::*;
    vec![
        Dirac { c: 2.5 },
        Bernoulli { p: 0.3 },
        Poisson { rate: 0.6 },
        Poisson { rate: 40.0 },
        Gaussian {
            mean: 1.0,
            variance: 8.0,
        },
        Beta {
            shape_a: 1.0,
            shape_b: 0.5,
        },
        Beta {
            shape_a: 2.5,
            shape_b: 4.0,
        },
        Exponential { rate: 0.5 },
        WeightDistribution::zero_inflated(
            0.25,
            Beta {
                shape_a: 1.0,
                shape_b: 0.5,
            },
        ),
        WeightDistribution::zero_inflated(0.25, Exponential { rate: 0.5 }),
    ]
}

#[test]
fn sampled_moments_match_closed_forms() {
    let draws = 200_000;
    for (idx, d) in distributions().into_iter().enumerate() {
        let mut rng = stream_rng(17, idx as u64);
        let xs: Vec<f64> = (0..draws).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let (m, v) = d.moments();
        let se_mean = (v / draws as f64).sqrt();
        assert!((mean - m).abs() <= 5.0 * se_mean + 1e-12, "{d:?}: mean {mean} vs {m}");
        // Loose check on the variance: fourth moments are not tracked.
        assert!((var - v).abs() <= 0.05 * v + 1e-12, "{d:?}: variance {var} vs {v}");
    }
}

#[test]
fn block_averages_match_block_means() {
    let model = poisson_block_model(2.0, 0.5, 0.3).unwrap();
    let g = model.sample(600, 4).unwrap();
    let z = g.labels.clone().unwrap();
    let b = model.block_moments().b;
    let mut sum = DMatrix::<f64>::zeros(2, 2);
    let mut count = DMatrix::<f64>::zeros(2, 2);
    for (i, j, w) in g.upper_entries() {
        let (k, l) = (z[i].min(z[j]), z[i].max(z[j]));
        sum[(k, l)] += w;
        count[(k, l)] += 1.0;
    }
    for (k, l) in [(0, 0), (0, 1), (1, 1)] {
        let avg = sum[(k, l)] / count[(k, l)];
        let se = (b[(k, l)] / count[(k, l)]).sqrt();
        assert!((avg - b[(k, l)]).abs() < 5.0 * se, "block ({k},{l}): {avg}");
    }
}

#[test]
fn latent_positions_reproduce_the_mean_matrix() {
    let g = |mean, variance| WeightDistribution::Gaussian { mean, variance };
    let model = BlockModel::two_block(0.4, g(3.0, 1.0), g(1.0, 1.0), g(-2.0, 1.0)).unwrap();
    let z = model.sample_labels(50, 2);
    let latent = model.latent_positions(&z).unwrap();
    assert_eq!((latent.p, latent.q), (1, 1));
    let b = model.block_moments().b;
    let p = latent.mean_matrix();
    for i in 0..50 {
        for j in 0..50 {
            assert!((p[(i, j)] - b[(z[i], z[j])]).abs() < 1e-12);
        }
    }
}

#[test]
fn sampling_is_seed_deterministic() {
    let model = poisson_block_model(0.5, 0.6, 0.5).unwrap();
    let a = model.sample(80, 9).unwrap();
    let b = model.sample(80, 9).unwrap();
    let c = model.sample(80, 10).unwrap();
    assert_eq!(a.adjacency(), b.adjacency());
    assert_eq!(a.labels, b.labels);
    assert_ne!(a.adjacency(), c.adjacency());
}

#[test]
fn oracle_alignment_lands_in_the_indefinite_group() {
    let model = poisson_block_model(0.5, 0.6, 0.5).unwrap();
    let g = model.sample(800, 3).unwrap();
    let latent = model.latent_positions(g.labels.as_ref().unwrap()).unwrap();
    let emb_a = spectral_embed(g.adjacency(), latent.dim()).unwrap();
    let emb_p = embed_low_rank(&latent.x, latent.p, latent.q).unwrap();
    let out = oracle_align(&emb_a, &emb_p, &latent).unwrap();
    assert!(out.q_n.group_defect() < 1e-8);
    assert!(out.w.group_defect() < 1e-8);
    let aligned = two_to_infinity(&out.aligned, &latent.x).unwrap();
    let raw = two_to_infinity(&emb_a.x, &latent.x).unwrap();
    assert!(aligned < raw, "alignment made things worse: {aligned} vs {raw}");
    assert!(aligned < 1.0);
}
