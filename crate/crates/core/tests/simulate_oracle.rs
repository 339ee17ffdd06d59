use cse_core::dataset::Arm;
use cse_core::kernels::GaussianKernel;
use cse_core::simulate::{population_embedding_oracle, variability_study, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn grid() -> Vec<f64> {
    (0..25).map(|i| 0.05 + 0.4 * i as f64).collect()
}

/// Plain mean embedding of the control event time, sampled directly.
fn direct_control_embedding(config: &SimConfig, kernel: &GaussianKernel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = grid();
    let mut acc = vec![0.0; g.len()];
    for _ in 0..n {
        let x1: f64 = rng.sample(StandardNormal);
        let x2: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let t = (x1 + x2 + config.c0 + config.event_noise_sd * e).exp();
        for (a, &s) in acc.iter_mut().zip(&g) {
            *a += kernel.eval_scalar(t, s);
        }
    }
    acc.iter().map(|a| a / n as f64).collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn control_oracle_agrees_with_independent_sampler() {
    let config = SimConfig::default();
    let kernel = GaussianKernel::new(4.0).unwrap();
    let n_mc = 40_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let oracle = population_embedding_oracle(&config, Arm::Control, Arm::Control, &grid(), &kernel, n_mc, &mut rng);
    let direct = direct_control_embedding(&config, &kernel, n_mc, 2);
    assert!(sup_diff(&oracle, &direct) <= 3.0 / (n_mc as f64).sqrt());
}

#[test]
fn oracle_error_shrinks_with_more_draws() {
    let config = SimConfig::default();
    let kernel = GaussianKernel::new(4.0).unwrap();
    let reference = direct_control_embedding(&config, &kernel, 1_000_000, 99);
    let mean_err = |n_mc: usize| {
        (0..6u64)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + s);
                let o = population_embedding_oracle(&config, Arm::Control, Arm::Control, &grid(), &kernel, n_mc, &mut rng);
                sup_diff(&o, &reference)
            })
            .sum::<f64>()
            / 6.0
    };
    let coarse = mean_err(2_000);
    let fine = mean_err(32_000);
    // 16x the draws should cut the error about 4x; allow generous slack
    assert!(fine < coarse / 2.0, "{coarse} -> {fine}");
}

#[test]
fn study_reports_consistent_shapes() {
    let config = SimConfig {
        n_control: 60,
        n_treated: 60,
        runs: 5,
        grid_size: 30,
        n_mc: 2_000,
        pilot_size: 300,
        seed: 5,
        ..SimConfig::default()
    };
    let r = variability_study(&config).unwrap();
    assert_eq!(r.per_run_curves.len(), 5);
    assert!(r.per_run_curves.iter().all(|c| c.len() == 30));
    assert_eq!(r.grid.len(), 30);
    assert_eq!(r.oracle_curve.as_ref().unwrap().len(), 30);
    assert!(r.pointwise_sd.iter().all(|s| *s >= 0.0));
}
