use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, InverseGamma};

use super::*;
use crate::diagnostics::ks_test;
use crate::linalg::is_symmetric_pd;
use crate::ns_basis::MaturityGrid;
use crate::rng::rng_from_seed;
use crate::simulation::{default_design, simulate_observations};

fn grid5() -> MaturityGrid {
    MaturityGrid::new(vec![3.0, 12.0, 36.0, 60.0, 120.0]).unwrap()
}

fn base_params(g: usize) -> ModelParams {
    ModelParams {
        lambda: 0.0609,
        grid: grid5(),
        n_macro: 0,
        a: vec![DMatrix::from_diagonal(&DVector::from_vec(vec![0.95, 0.9, 0.8])); g],
        h: vec![DMatrix::identity(3, 3) * 0.1; g],
        mu: vec![DVector::from_vec(vec![5.0, -1.0, 0.5]); g],
        q_diag: DVector::from_element(5, 0.01),
        gamma: vec![DMatrix::from_element(3, 3, true); g],
    }
}

fn exact_fit(params: &ModelParams, labels: &RegimeLabels, factors: &FactorPath) -> Observations {
    let lm = params.measurement().unwrap();
    Observations::new(
        (0..labels.len())
            .map(|t| &lm * (&factors.states[t] + &params.mu[labels.get(t)]))
            .collect(),
    )
    .unwrap()
}

#[test]
fn q_update_zero_residuals_matches_inverse_gamma() {
    let params = base_params(1);
    let labels = RegimeLabels::single(100);
    let factors = FactorPath { states: vec![DVector::from_vec(vec![0.1, 0.2, -0.3]); 100] };
    let data = exact_fit(&params, &labels, &factors);
    let prior = PriorConfig::default();
    let mut rng = rng_from_seed(11);
    let draws: Vec<f64> = (0..20_000)
        .map(|_| update_q(&factors, &data, &params, &labels, &prior, &mut rng).unwrap()[2])
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((mean - 0.05 / 54.0).abs() / (0.05 / 54.0) < 0.02);
    let ig = InverseGamma::new(55.0, 0.05).unwrap();
    assert!(ks_test(&draws, |x| ig.cdf(x)).p_value > 0.01);
}

#[test]
fn q_update_without_data_is_prior() {
    let params = base_params(1);
    let labels = RegimeLabels::single(0);
    let data = Observations::new(vec![]).unwrap();
    let factors = FactorPath { states: vec![] };
    let mut rng = rng_from_seed(2);
    let draws: Vec<f64> = (0..20_000)
        .map(|_| update_q(&factors, &data, &params, &labels, &PriorConfig::default(), &mut rng).unwrap()[0])
        .collect();
    let ig = InverseGamma::new(5.0, 0.05).unwrap();
    assert!(ks_test(&draws, |x| ig.cdf(x)).p_value > 0.01);
}

fn priors_for(params: &ModelParams) -> RegimePriors {
    RegimePriors::from_initial(&PriorConfig::default(), params)
}

#[test]
fn h_update_empty_regime_and_exact_var() {
    let params = base_params(2);
    let priors = priors_for(&params);
    // regime 2 never occurs; the path follows the VAR exactly in regime 1
    let labels = RegimeLabels::new(vec![0; 60], 2).unwrap();
    let mut states = vec![DVector::from_vec(vec![1.0, -1.0, 0.5])];
    for t in 1..60 {
        states.push(&params.a[0] * &states[t - 1]);
    }
    let factors = FactorPath { states };
    let mut rng = rng_from_seed(3);
    let n = 20_000;
    let mut acc = [DMatrix::zeros(3, 3), DMatrix::zeros(3, 3)];
    for _ in 0..n {
        let h = update_h(&factors, &params, &labels, &priors, &mut rng).unwrap();
        assert!(h.iter().all(is_symmetric_pd));
        acc[0] += &h[0];
        acc[1] += &h[1];
    }
    // prior mean M0/(m0-p-1) = H_init; posterior mean M0/(m0+59-p-1)
    let m0 = priors.h_df;
    let prior_mean = &acc[1] / n as f64;
    assert!((prior_mean - &params.h[1]).amax() < 0.01);
    let post_mean = &acc[0] / n as f64;
    let expected = &priors.h_scale[0] / (m0 + 59.0 - 4.0);
    assert!((post_mean - expected).amax() < 0.002);
}

#[test]
fn empty_regime_a_gamma_follow_prior() {
    let params = base_params(2);
    let labels = RegimeLabels::new(vec![0; 30], 2).unwrap();
    let factors = FactorPath { states: vec![DVector::from_element(3, 0.5); 30] };
    let prior = PriorConfig::default();
    let mut rng = rng_from_seed(4);
    let n = 4000;
    let mut on = 0usize;
    let mut diag_sq = 0.0;
    for _ in 0..n {
        let (a, gamma) = update_a_gamma(&factors, &params.h, &params, &labels, &prior, &mut rng).unwrap();
        on += usize::from(gamma[1][(0, 1)]);
        diag_sq += a[1][(1, 1)].powi(2);
        assert!((0..3).all(|i| gamma[0][(i, i)] && gamma[1][(i, i)]));
    }
    let freq = on as f64 / n as f64;
    assert!((freq - 0.5).abs() < 0.04, "inclusion frequency {freq}");
    assert!((diag_sq / n as f64 - 1.0).abs() < 0.08);
}

#[test]
fn a_draw_ignores_gamma_when_spike_equals_slab() {
    let params = base_params(1);
    let labels = RegimeLabels::single(40);
    let mut rng = rng_from_seed(5);
    let design = default_design().truth.tie_to(&[0]);
    let (factors, _) = simulate_observations(&design, &labels, &DVector::zeros(3), &mut rng).unwrap();
    let h_inv = vec![params.h[0].clone().try_inverse().unwrap()];
    let stats = transition_stats(&factors, &h_inv, &labels, 0);
    let prior = PriorConfig { xi0_sq: 1.0, xi1_sq: 1.0, ..PriorConfig::default() };
    let all_on = DMatrix::from_element(3, 3, true);
    let mut sparse = DMatrix::from_element(3, 3, false);
    sparse.fill_diagonal(true);
    let a1 = draw_a(&stats, &all_on, &prior, &mut rng_from_seed(99));
    let a2 = draw_a(&stats, &sparse, &prior, &mut rng_from_seed(99));
    assert_eq!(a1, a2);
}

#[test]
fn transition_stats_match_dense_regression() {
    let mut rng = rng_from_seed(6);
    let labels = RegimeLabels::new((0..25).map(|t| (t / 5) % 2).collect(), 2).unwrap();
    let factors = FactorPath {
        states: (0..25).map(|_| crate::linalg::standard_normal_vector(3, &mut rng)).collect(),
    };
    let h = [DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 0.5, 0.1, 0.0, 0.1, 0.8]), DMatrix::identity(3, 3) * 0.3];
    let h_inv: Vec<DMatrix<f64>> = h.iter().map(|m| m.clone().try_inverse().unwrap()).collect();
    let stats = transition_stats(&factors, &h_inv, &labels, 1);
    // explicit X_t = I ⊗ F_tᵀ design
    let mut prec = DMatrix::zeros(9, 9);
    let mut lin = DVector::zeros(9);
    for t in 0..24 {
        if labels.get(t) != 1 {
            continue;
        }
        let mut x = DMatrix::zeros(3, 9);
        for j in 0..3 {
            for k in 0..3 {
                x[(j, j * 3 + k)] = factors.states[t][k];
            }
        }
        let hi = &h_inv[labels.get(t + 1)];
        prec += x.transpose() * hi * &x;
        lin += x.transpose() * hi * &factors.states[t + 1];
    }
    assert!((stats.precision - prec).amax() < 1e-12);
    assert!((stats.linear - lin).amax() < 1e-12);
}

#[test]
fn mu_update_flat_prior_is_gls() {
    let mut params = base_params(1);
    params.q_diag = DVector::from_vec(vec![0.01, 0.02, 0.05, 0.02, 0.04]);
    let labels = RegimeLabels::single(50);
    let mut rng = rng_from_seed(7);
    let design = default_design().truth.tie_to(&[0]);
    let (factors, _) = simulate_observations(&design, &labels, &DVector::zeros(3), &mut rng).unwrap();
    let lm = params.measurement().unwrap();
    let data = Observations::new(
        (0..50)
            .map(|t| {
                &lm * (&factors.states[t] + &params.mu[0])
                    + DVector::from_fn(5, |i, _| 0.1 * ((t * 7 + i * 3) % 11) as f64 - 0.5)
            })
            .collect(),
    )
    .unwrap();
    let mut priors = priors_for(&params);
    priors.scalars.mu_prior_var = 1e12;
    // GLS of (y_t - ΛF_t) on Λ with weights Q⁻¹, pooled over t
    let w = DMatrix::from_diagonal(&params.q_diag.map(|q| 1.0 / q));
    let xtx = lm.transpose() * &w * &lm * 50.0;
    let mut xty = DVector::zeros(3);
    for t in 0..50 {
        xty += lm.transpose() * &w * (data.get(t) - &lm * &factors.states[t]);
    }
    let gls = xtx.clone().try_inverse().unwrap() * xty;
    let n = 4000;
    let mut mean = DVector::zeros(3);
    for _ in 0..n {
        mean += &update_mu(&factors, &data, &params, &labels, &priors, &mut rng).unwrap()[0];
    }
    mean /= n as f64;
    let sd = xtx.try_inverse().unwrap().diagonal().map(f64::sqrt);
    for i in 0..3 {
        assert!((mean[i] - gls[i]).abs() < 5.0 * sd[i] / (n as f64).sqrt());
    }
}

#[test]
fn lambda_step_with_flat_likelihood_always_accepts() {
    let mut params = base_params(1);
    params.q_diag.fill(1e12);
    let labels = RegimeLabels::single(20);
    let factors = FactorPath { states: vec![DVector::zeros(3); 20] };
    let data = exact_fit(&params, &labels, &factors);
    let prior = PriorConfig::default();
    let mut rng = rng_from_seed(8);
    let mut accepted = 0;
    for _ in 0..10_000 {
        let (l, a) = update_lambda_mh(&factors, &data, &params, &labels, &prior, &mut rng).unwrap();
        assert!((0.01..0.1).contains(&l));
        accepted += usize::from(a);
    }
    assert!(accepted as f64 / 10_000.0 > 0.999);
}

#[test]
fn lambda_step_accepts_improvements() {
    // the data are generated at the proposal, so the proposal never loses
    let params = base_params(1);
    let labels = RegimeLabels::single(30);
    let factors = FactorPath { states: vec![DVector::from_vec(vec![0.0, 2.0, 3.0]); 30] };
    let prior = PriorConfig::default();
    let mut rng = rng_from_seed(10);
    let mut probe = rng.clone();
    let proposal: f64 = probe.random_range(0.01..0.1);
    let mut at_proposal = params.clone();
    at_proposal.lambda = proposal;
    let data = exact_fit(&at_proposal, &labels, &factors);
    let (l, accepted) = update_lambda_mh(&factors, &data, &params, &labels, &prior, &mut rng).unwrap();
    assert!(accepted);
    assert_eq!(l, proposal);
}

fn small_panel(t_len: usize, seed: u64) -> (Observations, RegimeLabels, ModelParams) {
    let mut truth = default_design().truth.tie_to(&[0, 2]);
    truth.grid = grid5();
    truth.q_diag = DVector::from_element(5, 0.01);
    let labels = RegimeLabels::new((0..t_len).map(|t| usize::from((t / 40) % 2 == 1)).collect(), 2).unwrap();
    let (_, obs) = simulate_observations(&truth, &labels, &DVector::zeros(3), &mut rng_from_seed(seed)).unwrap();
    (obs, labels, truth)
}

#[test]
fn chain_bookkeeping_and_determinism() {
    let (obs, labels, truth) = small_panel(60, 1);
    let chain = ChainConfig { n_burn: 0, n_draws: 1, thinning: 1, seed: 3, store_factors: true };
    let one = run_chain(&obs, &labels, &truth.grid, 0, &PriorConfig::default(), &chain).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one.factors.as_ref().unwrap().len(), 1);

    let chain = ChainConfig { n_burn: 5, n_draws: 20, thinning: 3, seed: 3, store_factors: false };
    let a = run_chain(&obs, &labels, &truth.grid, 0, &PriorConfig::default(), &chain).unwrap();
    let b = run_chain(&obs, &labels, &truth.grid, 0, &PriorConfig::default(), &chain).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 6);
    assert!(a.factors.is_none());
    for p in &a.params {
        assert!(p.h.iter().all(is_symmetric_pd));
        assert!(p.q_diag.iter().all(|&q| q > 0.0));
        assert!(p.gamma.iter().all(|g| (0..3).all(|i| g[(i, i)])));
    }
    let other = run_chain(&obs, &labels, &truth.grid, 0, &PriorConfig::default(), &ChainConfig { seed: 4, ..chain }).unwrap();
    assert_ne!(a, other);
}

#[test]
fn draws_round_trip_through_csv() {
    let (obs, labels, truth) = small_panel(50, 2);
    let chain = ChainConfig { n_burn: 2, n_draws: 6, thinning: 2, seed: 1, store_factors: true };
    let draws = run_chain(&obs, &labels, &truth.grid, 0, &PriorConfig::default(), &chain).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_draws(&draws, &labels, dir.path(), &chain, &PriorConfig::default()).unwrap();
    let (back, manifest, back_labels) = read_draws(dir.path()).unwrap();
    assert_eq!(back, draws);
    assert_eq!(back_labels.unwrap(), labels);
    assert_eq!(manifest.n_draws, 3);
}

#[test]
fn single_regime_recovers_persistence() {
    let mut truth = default_design().truth.tie_to(&[0]);
    truth.grid = grid5();
    truth.q_diag = DVector::from_element(5, 0.01);
    let labels = RegimeLabels::single(240);
    let (_, obs) = simulate_observations(&truth, &labels, &DVector::zeros(3), &mut rng_from_seed(12)).unwrap();
    let chain = ChainConfig { n_burn: 300, n_draws: 600, thinning: 2, seed: 5, store_factors: false };
    let draws = run_chain(&obs, &labels, &truth.grid, 0, &PriorConfig::default(), &chain).unwrap();
    let mean = posterior_mean(&draws).unwrap();
    for i in 0..3 {
        let err = (mean.params.a[0][(i, i)] - truth.a[0][(i, i)]).abs();
        assert!(err < 0.05, "diag {i}: {}", mean.params.a[0][(i, i)]);
    }
    assert!(draws.lambda_acceptance > 0.0);
}

#[test]
fn sweep_failures_report_the_sweep() {
    let (obs, labels, truth) = small_panel(30, 3);
    let (start, init) = initial_values(&obs, &labels, &truth.grid, 0).unwrap();
    let priors = RegimePriors::from_initial(&PriorConfig::default(), &start);
    let bad = Observations::new(obs.rows().iter().map(|r| r.map(|_| f64::NAN)).collect()).unwrap();
    let mut sampler = GibbsSampler::new(&bad, &labels, priors, start, init).unwrap();
    let err = sampler.sweep(&mut rng_from_seed(1)).unwrap_err();
    assert!(matches!(err, Error::Sweep { sweep: 1, .. }));
    assert!(err.is_numerical());
}

use rand::Rng;
