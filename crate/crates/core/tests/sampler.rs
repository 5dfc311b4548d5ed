//! Statistical and structural checks of the MCMC kernels.

mod common;

use common::{ks_distance, poisson_stream};
use mrp_core::generator::{benchmark_scenarios, simulate_stream};
use mrp_core::mcmc::{
    ellipse_point, run_chain_with, update_a, update_f, update_hypers, FlatLikelihood, Likelihood, ModelState,
};
use mrp_core::renewal::StreamModel;
use mrp_core::{make_grid, run_chain, summarize, ChainConfig, EventStream, Hyperparams, PriorSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

const KS_GATE: f64 = 0.05;

fn lambda1_stream(seed: u64) -> EventStream {
    let spec = benchmark_scenarios(seed).into_iter().find(|s| s.name == "lambda1").unwrap();
    simulate_stream(&spec).unwrap().stream
}

/// Under a constant likelihood every marginal of the chain must be its prior.
#[test]
fn flat_likelihood_reproduces_the_prior() {
    let k = 30;
    let grid = make_grid(0.0, 50.0, k).unwrap();
    let prior = PriorSpec::default_for(&grid);
    let cfg = ChainConfig {
        burn_in: 500,
        samples: 5000,
        thin: 10,
        seed: 11,
        k,
        // Wide enough to cross the whole log-uniform support of a in a few steps.
        mh_step_log_a: 3.0,
        prior: Some(prior),
        ..ChainConfig::default()
    };
    let out = run_chain_with(&FlatLikelihood::new(grid), &cfg).unwrap();
    assert_eq!(out.len(), 5000);

    let (slo, shi) = prior.log_sigma_bounds;
    let (alo, ahi) = prior.log_a_bounds;
    let log_uniform = |lo: f64, hi: f64| move |x: f64| ((x.ln() - lo) / (hi - lo)).clamp(0.0, 1.0);
    let d_sigma = ks_distance(&out.sigma_draws, log_uniform(slo, shi));
    let d_a = ks_distance(&out.a_draws, log_uniform(alo, ahi));

    // Truncated exponential: memoryless above the floor.
    let rate = 10.0 / grid.span();
    let d_l = ks_distance(&out.l_draws, |l| {
        if l < prior.l_min {
            0.0
        } else {
            1.0 - (-rate * (l - prior.l_min)).exp()
        }
    });

    // f at a node given σ is N(0, σ); marginally a log-uniform scale mixture.
    let std = Normal::new(0.0, 1.0).unwrap();
    let mixture_cdf = |x: f64| {
        let m = 4000;
        (0..m)
            .map(|i| {
                let sigma = (slo + (i as f64 + 0.5) / m as f64 * (shi - slo)).exp();
                std.cdf(x / sigma.sqrt())
            })
            .sum::<f64>()
            / m as f64
    };
    let mut d_f: f64 = 0.0;
    for node in [0, k / 3, k / 2, k - 1] {
        let col: Vec<f64> = out.f_draws.iter().map(|row| row[node]).collect();
        d_f = d_f.max(ks_distance(&col, mixture_cdf));
    }
    println!("KS sigma {d_sigma:.4} a {d_a:.4} l {d_l:.4} f {d_f:.4}");
    assert!(d_sigma <= KS_GATE, "sigma KS {d_sigma}");
    assert!(d_a <= KS_GATE, "a KS {d_a}");
    assert!(d_l <= KS_GATE, "l KS {d_l}");
    assert!(d_f <= KS_GATE, "f KS {d_f}");
}

#[test]
fn latent_updates_alone_reproduce_node_variance() {
    let k = 20;
    let grid = make_grid(0.0, 10.0, k).unwrap();
    let lik = FlatLikelihood::new(grid);
    let sigma = 1.7;
    let mut state = ModelState::new(&lik, Hyperparams::new(1.0, sigma, 3.0), 0.0, vec![0.0; k]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 5000;
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    for _ in 0..n {
        let mv = update_f(&lik, &mut state, &mut rng).unwrap();
        assert_eq!(mv.shrinks, 0, "a flat slice accepts the first proposal");
        for (j, &v) in state.log_intensity().iter().enumerate() {
            sum[j] += v;
            sum_sq[j] += v * v;
        }
    }
    for j in 0..k {
        let mean = sum[j] / n as f64;
        let var = sum_sq[j] / n as f64 - mean * mean;
        assert!((var / sigma - 1.0).abs() < 0.10, "node {j}: variance {var}");
    }
}

#[test]
fn zero_angle_is_the_identity() {
    let current = [0.3, -1.25, 7.0, 1e-300];
    let aux = [5.0, 2.0, -3.0, 1e300];
    assert_eq!(ellipse_point(&current, &aux, 0.0), current.to_vec());
}

/// Cached quantities stay equal to a fresh recomputation after every kernel.
#[test]
fn caches_stay_coherent() {
    let stream = lambda1_stream(2);
    let grid = make_grid(0.0, 50.0, 40).unwrap();
    let model = StreamModel::new(stream.clone(), grid, 8).unwrap();
    let prior = PriorSpec::default_for(&grid).with_empirical_mean(&stream);
    let mut state = ModelState::new(
        &model,
        Hyperparams::new(1.0, 1.0, prior.l_prior.mean().max(prior.l_min)),
        prior.mean_log_intensity,
        vec![0.0; 40],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let check = |state: &ModelState<_>, what: &str| {
        let fresh = model.log_likelihood(&Likelihood::fit(&model, state.log_intensity()).unwrap(), state.hyper().a);
        assert!((fresh - state.loglik()).abs() <= 1e-9 * (1.0 + fresh.abs()), "{what}: {fresh} vs {}", state.loglik());
        let rebuilt = state.factor().mul_vec(state.whitened());
        let s = state.hyper().sigma.sqrt();
        for (f, v) in state.log_intensity().iter().zip(&rebuilt) {
            assert!((f - (prior.mean_log_intensity + s * v)).abs() <= 1e-12 * (1.0 + f.abs()), "{what}: latent drifted");
        }
    };
    check(&state, "initial");
    for _ in 0..150 {
        let mv = update_f(&model, &mut state, &mut rng).unwrap();
        assert!(state.loglik() > mv.threshold);
        check(&state, "update_f");
        update_hypers(&model, &prior, &mut state, &mut rng).unwrap();
        check(&state, "update_hypers");
        update_a(&model, &prior, 0.15, &mut state, &mut rng);
        check(&state, "update_a");
    }
}

#[test]
fn length_scale_never_drops_below_floor() {
    let grid = make_grid(0.0, 50.0, 30).unwrap();
    let lik = FlatLikelihood::new(grid);
    let mut prior = PriorSpec::default_for(&grid);
    prior.l_min = 20.0;
    let mut state = ModelState::new(&lik, Hyperparams::new(1.0, 1.0, 21.0), 0.0, vec![0.0; 30]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        update_hypers(&lik, &prior, &mut state, &mut rng).unwrap();
        assert!(state.hyper().l >= 20.0);
    }
}

#[test]
fn shape_moves_outside_bounds_are_rejected() {
    let grid = make_grid(0.0, 10.0, 10).unwrap();
    let lik = FlatLikelihood::new(grid);
    let mut prior = PriorSpec::default_for(&grid);
    prior.log_a_bounds = (0.99f64.ln(), 1.01f64.ln());
    let mut state = ModelState::new(&lik, Hyperparams::new(1.0, 1.0, 6.0), 0.0, vec![0.0; 10]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rejected = 0;
    for _ in 0..500 {
        let before = state.hyper().a;
        if !update_a(&lik, &prior, 5.0, &mut state, &mut rng) {
            rejected += 1;
            assert_eq!(state.hyper().a, before);
        }
        assert!(state.hyper().a.ln() >= prior.log_a_bounds.0 && state.hyper().a.ln() <= prior.log_a_bounds.1);
    }
    assert!(rejected > 450);
}

#[test]
fn flat_shape_posterior_accepts_every_move() {
    let grid = make_grid(0.0, 10.0, 10).unwrap();
    let lik = FlatLikelihood::new(grid);
    let prior = PriorSpec::default_for(&grid);
    let mut state = ModelState::new(&lik, Hyperparams::new(1.0, 1.0, 6.0), 0.0, vec![0.0; 10]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        assert!(update_a(&lik, &prior, 0.01, &mut state, &mut rng));
    }
}

#[test]
fn same_seed_same_chain() {
    let stream = lambda1_stream(1);
    let cfg = ChainConfig {
        burn_in: 50,
        samples: 150,
        k: 30,
        seed: 42,
        ..ChainConfig::default()
    };
    let x = run_chain(&stream, &cfg).unwrap();
    let y = run_chain(&stream, &cfg).unwrap();
    assert!(x.same_draws(&y));
    let z = run_chain(&stream, &ChainConfig { seed: 43, ..cfg }).unwrap();
    assert!(!x.same_draws(&z));
}

#[test]
fn recovers_a_homogeneous_rate() {
    let rho = 5.0;
    let stream = poisson_stream(rho, 400.0, 21);
    let k = 50;
    let cfg = ChainConfig {
        burn_in: 500,
        samples: 1500,
        k,
        seed: 5,
        ..ChainConfig::default()
    };
    let summary = summarize(&run_chain(&stream, &cfg).unwrap()).unwrap();
    for (j, m) in summary.mean.iter().enumerate().take(k - 5).skip(5) {
        assert!((m / rho - 1.0).abs() < 0.15, "node {j}: posterior mean {m}");
    }
    let (lo, _, hi) = summary.a_quantiles;
    assert!(lo < 1.0 && 1.0 < hi, "a interval ({lo}, {hi})");
}
