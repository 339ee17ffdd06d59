//! Test-only oracles and random instance generators. Nothing here calls into
//! the estimator code paths it is used to check.
#![allow(dead_code)]

use cse_core::dataset::{Arm, Observation, RightCensoredSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub control: RightCensoredSample,
    pub treated_covariates: Vec<Vec<f64>>,
    pub grid: Vec<f64>,
    pub sigma2_cov: f64,
    pub sigma2_time: f64,
    pub epsilon: f64,
}

/// Random control arm of size ≤ `max_n` with at least one event, random
/// targets, bandwidths, grid and ε. `censor_prob = 0` gives no censoring.
pub fn random_instance(seed: u64, max_n: usize, censor_prob: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(1..=max_n);
    let p = rng.random_range(1..=3);
    let ties = rng.random_bool(0.3);
    let mut obs: Vec<Observation> = (0..n)
        .map(|_| {
            let raw: f64 = rng.random_range(0.05..5.0);
            let time = if ties { (raw * 2.0).ceil() / 2.0 } else { raw };
            Observation {
                time,
                event: !rng.random_bool(censor_prob),
                arm: Arm::Control,
                covariates: (0..p).map(|_| rng.random_range(-2.0..2.0)).collect(),
            }
        })
        .collect();
    obs[0].event = true;
    let treated_covariates = (0..m)
        .map(|_| (0..p).map(|_| rng.random_range(-1.5..2.5)).collect())
        .collect();
    let n_grid = rng.random_range(2..=12);
    let grid = (0..n_grid).map(|k| 0.1 + 5.0 * k as f64 / (n_grid - 1) as f64).collect();
    Instance {
        control: RightCensoredSample::new(obs, p).unwrap(),
        treated_covariates,
        grid,
        sigma2_cov: rng.random_range(0.2..3.0),
        sigma2_time: rng.random_range(0.2..3.0),
        epsilon: 10f64.powf(rng.random_range(-2.5..0.0)),
    }
}

pub fn gauss(x: &[f64], y: &[f64], sigma2: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma2)).exp()
}

/// Gaussian elimination with partial pivoting, solving `A X = B`.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            for k in 0..b[row].len() {
                b[row][k] -= f * b[col][k];
            }
        }
    }
    let cols = b[0].len();
    let mut x = vec![vec![0.0; cols]; n];
    for row in (0..n).rev() {
        for k in 0..cols {
            let mut s = b[row][k];
            for j in (row + 1)..n {
                s -= a[row][j] * x[j][k];
            }
            x[row][k] = s / a[row][row];
        }
    }
    x
}

/// `M = (WK + nεI)⁻¹ W` by plain elimination.
pub fn operator_oracle(covs: &[Vec<f64>], weights: &[f64], sigma2: f64, eps: f64) -> Vec<Vec<f64>> {
    let n = covs.len();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    weights[i] * gauss(&covs[i], &covs[j], sigma2)
                        + if i == j { n as f64 * eps } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let w: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { weights[i] } else { 0.0 }).collect())
        .collect();
    gauss_solve(a, w)
}

/// Uncensored conditional mean embedding averaged over `targets`:
/// solve `(K + nεI) C = H`, return `(1/m) 1ᵀ K̃ᵀ C` on the grid.
pub fn uncensored_cme(
    covs: &[Vec<f64>],
    times: &[f64],
    targets: &[Vec<f64>],
    grid: &[f64],
    sigma2_cov: f64,
    sigma2_time: f64,
    eps: f64,
) -> Vec<f64> {
    let n = covs.len();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| gauss(&covs[i], &covs[j], sigma2_cov) + if i == j { n as f64 * eps } else { 0.0 })
                .collect()
        })
        .collect();
    let h: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| grid.iter().map(|&g| gauss(&[t], &[g], sigma2_time)).collect())
        .collect();
    let c = gauss_solve(k, h);
    let mean_cross: Vec<f64> = covs
        .iter()
        .map(|x| targets.iter().map(|y| gauss(x, y, sigma2_cov)).sum::<f64>() / targets.len() as f64)
        .collect();
    (0..grid.len())
        .map(|j| (0..n).map(|i| mean_cross[i] * c[i][j]).sum())
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `Δ_i / Ĝ(T_i−)` with `Ĝ` the censoring survival curve, events at a tied
/// time leaving the risk set before the censorings there.
pub fn ipcw_weights_oracle(times: &[f64], events: &[bool]) -> Vec<f64> {
    let n = times.len();
    let g_left = |t: f64| {
        let mut censor_times: Vec<f64> = (0..n).filter(|&j| !events[j]).map(|j| times[j]).collect();
        censor_times.sort_by(f64::total_cmp);
        censor_times.dedup();
        censor_times
            .iter()
            .filter(|&&s| s < t)
            .map(|&s| {
                let censored = (0..n).filter(|&j| !events[j] && times[j] == s).count() as f64;
                let at_risk = (0..n).filter(|&j| times[j] > s || (times[j] == s && !events[j])).count() as f64;
                1.0 - censored / at_risk
            })
            .product::<f64>()
    };
    (0..n)
        .map(|i| {
            if !events[i] {
                return 0.0;
            }
            let g = g_left(times[i]);
            if g == 0.0 {
                n as f64
            } else {
                1.0 / g
            }
        })
        .collect()
}
