use dstorm_core::linalg::{self, Matrix};
use dstorm_core::problems::*;
use dstorm_core::proximal::{prox, Regularizer};
use dstorm_core::rng;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_logistic(seed: u64) -> ProblemInstance {
    let params = LogisticParams { n_samples: 800, dim: 6, feature_scale: 1.0, seed, ..Default::default() };
    ProblemInstance::logistic_l1(&params, 1e-4).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

fn per_sample_gradient(p: &ProblemInstance, agent: usize, s: usize, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; p.dim()];
    p.add_sample_gradient(agent, s, x, 1.0, &mut g);
    g
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let p = unit_logistic(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for agent in 0..p.n_agents() {
        let x = random_point(&mut rng, p.dim(), 1.0);
        let g = full_gradient(&p, agent, &x);
        for j in 0..p.dim() {
            let h = 1e-5;
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let fd = (local_loss(&p, agent, &xp) - local_loss(&p, agent, &xm)) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-2), "agent {agent} coord {j}");
        }
    }
}

#[test]
fn full_gradient_is_mean_of_sample_gradients() {
    let p = unit_logistic(3);
    let x = vec![0.2; p.dim()];
    let len = p.shard_len(0);
    let mut mean = vec![0.0; p.dim()];
    for s in 0..len {
        linalg::axpy(1.0 / len as f64, &per_sample_gradient(&p, 0, s, &x), &mut mean);
    }
    for (a, b) in mean.iter().zip(full_gradient(&p, 0, &x)) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn minibatch_gradient_is_unbiased() {
    let p = unit_logistic(4);
    let agent = 2;
    let x = vec![0.3, -0.1, 0.5, 0.0, 0.2, -0.4];
    let full = full_gradient(&p, agent, &x);
    let len = p.shard_len(agent);
    let per: Vec<Vec<f64>> = (0..len).map(|s| per_sample_gradient(&p, agent, s, &x)).collect();
    let m = 4;
    let draws = 100_000;
    let mut rng = rng::agent_stream(11, agent);
    let mut sum = vec![0.0; p.dim()];
    for _ in 0..draws {
        let b = sample_batch(&p, agent, m, &mut rng);
        linalg::axpy(1.0, &stochastic_gradient(&p, agent, &x, &b).unwrap(), &mut sum);
    }
    for j in 0..p.dim() {
        let var_j = per.iter().map(|g| (g[j] - full[j]).powi(2)).sum::<f64>() / len as f64;
        let tol = 4.0 * (var_j / (draws * m) as f64).sqrt();
        assert!((sum[j] / draws as f64 - full[j]).abs() <= tol, "coord {j}");
    }
}

#[test]
fn single_sample_variance_matches_brute_force() {
    let p = unit_logistic(5);
    let agent = 0;
    let x = vec![0.1; p.dim()];
    let full = full_gradient(&p, agent, &x);
    let len = p.shard_len(agent);
    let exact: f64 =
        (0..len).map(|s| linalg::dist_sq(&per_sample_gradient(&p, agent, s, &x), &full)).sum::<f64>() / len as f64;
    let draws = 100_000;
    let mut rng = rng::agent_stream(12, agent);
    let mut acc = 0.0;
    for _ in 0..draws {
        let b = sample_batch(&p, agent, 1, &mut rng);
        acc += linalg::dist_sq(&stochastic_gradient(&p, agent, &x, &b).unwrap(), &full);
    }
    let empirical = acc / draws as f64;
    assert!((empirical - exact).abs() <= 0.03 * exact, "{empirical} vs {exact}");
}

#[test]
fn gram_bound_is_lipschitz_for_local_gradients() {
    let p = unit_logistic(6);
    assert_eq!(p.smoothness_bound(), SmoothnessBound::Gram);
    let l = p.smoothness();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let agent = rng.random_range(0..p.n_agents());
        let a = random_point(&mut rng, p.dim(), 3.0);
        let b: Vec<f64> = a.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        let ratio = linalg::dist_sq(&full_gradient(&p, agent, &a), &full_gradient(&p, agent, &b)).sqrt()
            / linalg::dist_sq(&a, &b).sqrt();
        worst = worst.max(ratio);
    }
    assert!(worst <= l * 1.01, "{worst} > {l}");
}

#[test]
fn gram_bound_equals_its_formula() {
    let p = unit_logistic(8);
    let expected = p
        .shards()
        .iter()
        .map(|s| {
            let a = nalgebra::DMatrix::from_row_slice(s.len(), p.dim(), s.features.as_slice());
            let gram = a.transpose() * &a;
            gram.symmetric_eigen().eigenvalues.max() / (4.0 * s.len() as f64)
        })
        .fold(0.0, f64::max);
    assert!((p.gram_smoothness() - expected).abs() <= 1e-10 * expected);
}

#[test]
fn mean_squared_bound_holds_in_rms() {
    let p = unit_logistic(9).with_smoothness_bound(SmoothnessBound::MeanSquared);
    let l = p.smoothness();
    assert!(l >= p.gram_smoothness());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let agent = rng.random_range(0..p.n_agents());
        let a = random_point(&mut rng, p.dim(), 3.0);
        let b = random_point(&mut rng, p.dim(), 3.0);
        let len = p.shard_len(agent);
        let ms: f64 = (0..len)
            .map(|s| linalg::dist_sq(&per_sample_gradient(&p, agent, s, &a), &per_sample_gradient(&p, agent, s, &b)))
            .sum::<f64>()
            / len as f64;
        assert!(ms.sqrt() <= l * 1.01 * linalg::dist_sq(&a, &b).sqrt());
    }
}

#[test]
fn quadratic_sample_gradients_are_one_lipschitz() {
    let p = ProblemInstance::quadratic(&QuadraticParams::default(), Regularizer::Zero).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10_000 {
        let agent = rng.random_range(0..p.n_agents());
        let s = rng.random_range(0..p.shard_len(agent));
        let a = random_point(&mut rng, p.dim(), 5.0);
        let b = random_point(&mut rng, p.dim(), 5.0);
        let ratio = linalg::dist_sq(&per_sample_gradient(&p, agent, s, &a), &per_sample_gradient(&p, agent, s, &b))
            .sqrt()
            / linalg::dist_sq(&a, &b).sqrt();
        assert!(ratio <= p.smoothness() * 1.01);
    }
}

#[test]
fn variance_is_bounded_by_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let logistic = unit_logistic(15);
    let quadratic = ProblemInstance::quadratic(&QuadraticParams::default(), Regularizer::Zero).unwrap();
    for p in [&logistic, &quadratic] {
        let s2 = p.noise_sigma().powi(2);
        for _ in 0..100 {
            let x = random_point(&mut rng, p.dim(), 3.0);
            for agent in 0..p.n_agents() {
                let full = full_gradient(p, agent, &x);
                let len = p.shard_len(agent);
                let var = (0..len).map(|s| linalg::dist_sq(&per_sample_gradient(p, agent, s, &x), &full)).sum::<f64>()
                    / len as f64;
                assert!(var <= s2 * 1.1);
            }
        }
    }
}

#[test]
fn objectives_are_bounded_below_by_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let logistic = unit_logistic(17);
    let quadratic = ProblemInstance::quadratic(&QuadraticParams::default(), Regularizer::l1(0.1).unwrap()).unwrap();
    for _ in 0..200 {
        let x = random_point(&mut rng, logistic.dim(), 50.0);
        assert!(objective(&logistic, &x) >= 0.0);
        let x = random_point(&mut rng, quadratic.dim(), 50.0);
        assert!(objective(&quadratic, &x) >= 0.0);
    }
}

#[test]
fn quadratic_l1_minimizer_is_thresholded_mean_center() {
    let shards = vec![
        Matrix::from_rows(&[vec![1.2, 0.1], vec![0.8, -0.3]]).unwrap(),
        Matrix::from_rows(&[vec![0.4, 0.2]]).unwrap(),
        Matrix::from_rows(&[vec![0.3, 0.05], vec![0.5, 0.15], vec![0.4, 0.1]]).unwrap(),
    ];
    let r = Regularizer::l1(0.15).unwrap();
    let p = ProblemInstance::quadratic_from_samples(shards, r).unwrap();
    let c_bar: Vec<f64> = {
        let mut acc = vec![0.0; 2];
        for i in 0..3 {
            linalg::axpy(1.0 / 3.0, &p.center(i), &mut acc);
        }
        acc
    };
    let closed = prox(&r, 1.0, &c_bar);
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    let h = 1e-3;
    for i in 0..=2000 {
        for j in 0..=2000 {
            let x = [-1.0 + i as f64 * h, -1.0 + j as f64 * h];
            let v = objective(&p, &x);
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    for k in 0..2 {
        assert!((closed[k] - best.1[k]).abs() <= 1e-3 + 1e-4, "{closed:?} vs {:?}", best.1);
    }
}

#[test]
fn planted_signs_are_recovered_by_centralized_prox_gradient() {
    let params = LogisticParams { n_samples: 4000, dim: 20, sparsity: 0.25, seed: 21, ..Default::default() };
    let planted = ProblemInstance::planted_logistic(&params).unwrap();
    let p = ProblemInstance::logistic_from_dataset(&planted.dataset, 4, 0, Regularizer::l1(1e-4).unwrap()).unwrap();
    let step = 1.0 / p.smoothness();
    let mut x = vec![0.0; p.dim()];
    for _ in 0..3000 {
        let g = global_gradient(&p, &x);
        let v: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        x = prox(&p.regularizer(), step, &v);
    }
    for (j, (w, xj)) in planted.planted.iter().zip(&x).enumerate() {
        if *w != 0.0 {
            assert_eq!(w.signum(), xj.signum(), "coordinate {j}: planted {w}, solved {xj}");
        }
    }
    assert!(x.contains(&0.0));
}

proptest! {
    #[test]
    fn batches_stay_in_bounds(seed in any::<u64>(), m in 1usize..200, agent in 0usize..8) {
        let p = ProblemInstance::quadratic(&QuadraticParams { samples_per_agent: 13, ..Default::default() }, Regularizer::Zero).unwrap();
        let b = sample_batch(&p, agent, m, &mut rng::agent_stream(seed, agent));
        prop_assert_eq!(b.len(), m);
        prop_assert!(b.ids.iter().all(|&i| i < 13));
    }

    #[test]
    fn shards_balanced_for_any_split(n_samples in 16usize..300, n_agents in 1usize..16, seed in any::<u64>()) {
        prop_assume!(n_samples >= n_agents);
        let params = LogisticParams { n_samples, n_agents, dim: 3, seed, ..Default::default() };
        if let Ok(p) = ProblemInstance::logistic_l1(&params, 1e-4) {
            let sizes: Vec<usize> = (0..n_agents).map(|i| p.shard_len(i)).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(sizes.iter().sum::<usize>(), n_samples);
        }
    }
}
