//! Log-normal accelerated-failure-time simulation study and the empirical
//! convergence-rate experiment.
//!
//! Per unit in arm `a` (intercept `β_a = 0` for control, `intercept_treated`
//! for treated):
//!
//! ```text
//! X₁ ~ N(shift·1{a=1}, 1),  X₂ ~ N(0, 1)
//! log T = β_a + X₁ + X₂ + ε,   ε  ~ N(c_a, σ_ε²)
//! log C = β_a + X₁ + X₂ + ε',  ε' ~ N(0, σ_c²)
//! ```
//!
//! and the observed pair is `(min(T, C), 1{T ≤ C})`.
//!
//! Randomness is counter-based: every run draws from its own ChaCha stream
//! keyed by `(seed, run, attempt)`, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Arm, Observation, RightCensoredSample};
use crate::embedding::{counterfactual_embedding, EmbeddingKernels, RidgeSolveConfig};
use crate::error::{Error, Result};
use crate::kernels::{linspace, median_heuristic, GaussianKernel};
use crate::survival::build_weighted_arm;

const STREAM_PILOT: u64 = 1;
const STREAM_ORACLE: u64 = 2;
const STREAM_RUN: u64 = 3;
/// Resampling attempts per run before giving up on a degenerate draw.
const MAX_ATTEMPTS: u64 = 1 << 12;

/// A ChaCha8 generator on stream `(tag, index)` of `seed`.
pub fn stream_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 56) ^ index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_control: usize,
    pub n_treated: usize,
    /// Mean of the event-time noise in the control arm.
    pub c0: f64,
    /// Mean of the event-time noise in the treated arm.
    pub c1: f64,
    pub treated_mean_shift: f64,
    pub intercept_treated: f64,
    pub event_noise_sd: f64,
    pub censor_noise_sd: f64,
    pub seed: u64,
    /// Number of simulation runs `B`.
    pub runs: usize,
    pub grid_size: usize,
    /// Monte-Carlo draws for the population embedding.
    pub n_mc: usize,
    /// Per-arm size of the pilot draw that fixes bandwidths and grid.
    pub pilot_size: usize,
    /// Upper end of the grid as a quantile of pilot control-arm times.
    pub grid_upper_quantile: f64,
    pub ridge: RidgeSolveConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_control: 100,
            n_treated: 100,
            c0: 0.2,
            c1: 0.1,
            treated_mean_shift: 0.5,
            intercept_treated: 2.0,
            event_noise_sd: 1.0,
            censor_noise_sd: 1.0,
            seed: 0,
            runs: 100,
            grid_size: 100,
            n_mc: 200_000,
            pilot_size: 2000,
            grid_upper_quantile: 0.95,
            ridge: RidgeSolveConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn with_size(&self, n: usize) -> Self {
        Self {
            n_control: n,
            n_treated: n,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_control < 2 || self.n_treated < 2 {
            return bad(format!(
                "each arm needs at least 2 units, got {} and {}",
                self.n_control, self.n_treated
            ));
        }
        if self.runs < 1 {
            return bad("at least one run is required".into());
        }
        if self.grid_size < 2 {
            return bad("grid needs at least 2 points".into());
        }
        if self.n_mc < 1000 {
            return bad(format!("n_mc must be at least 1000, got {}", self.n_mc));
        }
        if self.pilot_size < 2 {
            return bad("pilot needs at least 2 units per arm".into());
        }
        if !(self.grid_upper_quantile > 0.0 && self.grid_upper_quantile <= 1.0) {
            return bad("grid quantile must be in (0, 1]".into());
        }
        let finite = [
            self.c0,
            self.c1,
            self.treated_mean_shift,
            self.intercept_treated,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("model parameters must be finite".into());
        }
        if !(self.event_noise_sd > 0.0 && self.censor_noise_sd > 0.0)
            || !self.event_noise_sd.is_finite()
            || !self.censor_noise_sd.is_finite()
        {
            return bad("noise standard deviations must be positive".into());
        }
        self.ridge.validate()
    }

    fn arm_size(&self, arm: Arm) -> usize {
        match arm {
            Arm::Control => self.n_control,
            Arm::Treated => self.n_treated,
        }
    }

    fn intercept(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => 0.0,
            Arm::Treated => self.intercept_treated,
        }
    }

    fn noise_mean(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.c0,
            Arm::Treated => self.c1,
        }
    }

    fn draw_covariates<R: Rng>(&self, arm: Arm, rng: &mut R) -> [f64; 2] {
        let shift = match arm {
            Arm::Control => 0.0,
            Arm::Treated => self.treated_mean_shift,
        };
        let x1 = shift + rng.sample::<f64, _>(StandardNormal);
        let x2 = rng.sample::<f64, _>(StandardNormal);
        [x1, x2]
    }

    fn draw_log_event_time<R: Rng>(&self, arm: Arm, x: &[f64; 2], rng: &mut R) -> f64 {
        let noise = self.noise_mean(arm) + self.event_noise_sd * rng.sample::<f64, _>(StandardNormal);
        self.intercept(arm) + x[0] + x[1] + noise
    }
}

fn draw_arm<R: Rng>(config: &SimConfig, arm: Arm, n: usize, rng: &mut R) -> RightCensoredSample {
    let observations = (0..n)
        .map(|_| {
            let x = config.draw_covariates(arm, rng);
            let log_t = config.draw_log_event_time(arm, &x, rng);
            let log_c = config.intercept(arm)
                + x[0]
                + x[1]
                + config.censor_noise_sd * rng.sample::<f64, _>(StandardNormal);
            let event = log_t <= log_c;
            Observation {
                time: log_t.min(log_c).exp().max(f64::MIN_POSITIVE),
                event,
                arm,
                covariates: x.to_vec(),
            }
        })
        .collect();
    RightCensoredSample::new(observations, 2).expect("simulated rows are valid")
}

/// Draws one arm of the configured size.
pub fn generate_arm<R: Rng>(config: &SimConfig, arm: Arm, rng: &mut R) -> RightCensoredSample {
    draw_arm(config, arm, config.arm_size(arm), rng)
}

/// Monte-Carlo approximation of the population embedding `E[l(T, t)]` where
/// `T` follows the outcome equation of `conditional_arm` and the covariates
/// follow the law of `covariate_arm`. No censoring is involved.
pub fn population_embedding_oracle<R: Rng>(
    config: &SimConfig,
    conditional_arm: Arm,
    covariate_arm: Arm,
    grid: &[f64],
    time_kernel: &GaussianKernel,
    n_mc: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut acc = vec![0.0; grid.len()];
    for _ in 0..n_mc {
        let x = config.draw_covariates(covariate_arm, rng);
        let t = config.draw_log_event_time(conditional_arm, &x, rng).exp();
        for (a, &g) in acc.iter_mut().zip(grid) {
            *a += time_kernel.eval_scalar(t, g);
        }
    }
    acc.iter_mut().for_each(|a| *a /= n_mc as f64);
    acc
}

/// Bandwidths and grid shared by every run of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySetup {
    pub kernels: EmbeddingKernels,
    pub grid: Vec<f64>,
}

/// Fixes kernels and grid from a pilot draw on a dedicated stream: covariate
/// bandwidth from pooled pilot covariates, time bandwidth from all pooled
/// pilot times, grid from the smallest control time to the configured upper
/// quantile of control times.
pub fn study_setup(config: &SimConfig) -> Result<StudySetup> {
    let mut rng = stream_rng(config.seed, STREAM_PILOT, 0);
    let control = draw_arm(config, Arm::Control, config.pilot_size, &mut rng);
    let treated = draw_arm(config, Arm::Treated, config.pilot_size, &mut rng);
    let mut covariates = control.covariates();
    covariates.extend(treated.covariates());
    let mut times = control.times();
    times.extend(treated.times());
    let kernels = EmbeddingKernels {
        covariate: GaussianKernel::new(median_heuristic(&covariates)?)?,
        time: GaussianKernel::new(median_heuristic(&times)?)?,
    };
    let mut control_times = control.times();
    control_times.sort_by(f64::total_cmp);
    let lo = control_times[0];
    let hi = quantile_sorted(&control_times, config.grid_upper_quantile);
    let grid = linspace(lo, hi, config.grid_size)?;
    Ok(StudySetup { kernels, grid })
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Result of a single simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub grid_values: Vec<f64>,
    pub censoring_fractions: [f64; 2],
    pub resamples: u64,
    pub coefficient_l1: f64,
}

/// Draws data for run `run` and fits the counterfactual `⟨0|1⟩` embedding on
/// the shared grid. Draws where either arm has no events are redrawn on the
/// next attempt stream.
pub fn simulate_run(config: &SimConfig, setup: &StudySetup, run: u64) -> Result<RunOutcome> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(config.seed, STREAM_RUN, (run << 12) | attempt);
        let control = generate_arm(config, Arm::Control, &mut rng);
        let treated = generate_arm(config, Arm::Treated, &mut rng);
        let weighted = match build_weighted_arm(&control) {
            Ok(w) => w,
            Err(Error::DegenerateCensoring) => continue,
            Err(e) => return Err(e),
        };
        if !treated.observations().iter().any(|o| o.event) {
            continue;
        }
        let curve = counterfactual_embedding(
            &weighted,
            &treated.covariates(),
            &setup.kernels,
            &config.ridge,
            &setup.grid,
        )?;
        return Ok(RunOutcome {
            coefficient_l1: curve.coefficients.iter().map(|a| a.abs()).sum(),
            grid_values: curve.grid_values,
            censoring_fractions: [control.censoring_fraction(), treated.censoring_fraction()],
            resamples: attempt,
        });
    }
    Err(Error::DegenerateCensoring)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: SimConfig,
    pub grid: Vec<f64>,
    pub sigma2_covariate: f64,
    pub sigma2_time: f64,
    pub epsilon: f64,
    pub per_run_curves: Vec<Vec<f64>>,
    pub mean_curve: Vec<f64>,
    pub pointwise_sd: Vec<f64>,
    /// Population `⟨0|1⟩` embedding, absent when the oracle was skipped.
    pub oracle_curve: Option<Vec<f64>>,
    /// Realized censoring fraction per arm (control, treated), averaged over runs.
    pub censoring_fractions: [f64; 2],
    pub resampled_runs: u64,
    /// Largest `Σ|coeff|` over the runs.
    pub max_coefficient_l1: f64,
}

impl StudyReport {
    /// Average over the grid of the pointwise standard deviation.
    pub fn mean_sd(&self) -> f64 {
        mean(&self.pointwise_sd)
    }

    /// Average over the grid of `|mean_curve − oracle_curve|`.
    pub fn mean_oracle_error(&self) -> Option<f64> {
        let oracle = self.oracle_curve.as_ref()?;
        let diffs: Vec<f64> = self
            .mean_curve
            .iter()
            .zip(oracle)
            .map(|(m, o)| (m - o).abs())
            .collect();
        Some(mean(&diffs))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Entrywise mean and sample standard deviation (zero for a single curve).
pub fn pointwise_mean_sd(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let b = curves.len();
    let len = curves.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; len];
    for c in curves {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= b as f64);
    let mut sd = vec![0.0; len];
    if b > 1 {
        for c in curves {
            for ((s, v), m) in sd.iter_mut().zip(c).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        sd.iter_mut().for_each(|s| *s = (*s / (b - 1) as f64).sqrt());
    }
    (mean, sd)
}

fn run_study(config: &SimConfig, with_oracle: bool) -> Result<StudyReport> {
    config.validate()?;
    let setup = study_setup(config)?;
    let outcomes: Vec<RunOutcome> = (0..config.runs as u64)
        .into_par_iter()
        .map(|b| simulate_run(config, &setup, b))
        .collect::<Result<_>>()?;

    let per_run_curves: Vec<Vec<f64>> = outcomes.iter().map(|o| o.grid_values.clone()).collect();
    let (mean_curve, pointwise_sd) = pointwise_mean_sd(&per_run_curves);
    let b = outcomes.len() as f64;
    let censoring_fractions = [
        outcomes.iter().map(|o| o.censoring_fractions[0]).sum::<f64>() / b,
        outcomes.iter().map(|o| o.censoring_fractions[1]).sum::<f64>() / b,
    ];
    let oracle_curve = with_oracle.then(|| {
        let mut rng = stream_rng(config.seed, STREAM_ORACLE, 0);
        population_embedding_oracle(
            config,
            Arm::Control,
            Arm::Treated,
            &setup.grid,
            &setup.kernels.time,
            config.n_mc,
            &mut rng,
        )
    });
    Ok(StudyReport {
        config: config.clone(),
        sigma2_covariate: setup.kernels.covariate.sigma2(),
        sigma2_time: setup.kernels.time.sigma2(),
        epsilon: config.ridge.epsilon(config.n_control),
        grid: setup.grid,
        per_run_curves,
        mean_curve,
        pointwise_sd,
        oracle_curve,
        censoring_fractions,
        resampled_runs: outcomes.iter().map(|o| o.resamples).sum(),
        max_coefficient_l1: outcomes.iter().map(|o| o.coefficient_l1).fold(0.0, f64::max),
    })
}

/// Runs `B` independent simulations of the configured design, fitting the
/// counterfactual `⟨0|1⟩` embedding in each, and compares their average with
/// the Monte-Carlo population embedding. Runs execute on the current rayon
/// pool; the result does not depend on its size.
pub fn variability_study(config: &SimConfig) -> Result<StudyReport> {
    run_study(config, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub sizes: Vec<usize>,
    /// Outcome model; only the log-linear design is supported.
    pub linear_truth: bool,
    /// Everything but the arm sizes; `base.runs` and `base.seed` apply to
    /// every size.
    pub base: SimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `γ` in `V = C · n^(−γ)`.
    pub fitted_slope: f64,
    /// `log C`.
    pub fitted_intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub config: RateConfig,
    pub sample_sizes: Vec<usize>,
    /// Grid-averaged pointwise sd per size.
    pub v: Vec<f64>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub r_squared: f64,
    pub sigma2_covariate: f64,
    pub sigma2_time: f64,
    pub epsilon: Vec<f64>,
    pub censoring_fractions: Vec<[f64; 2]>,
    pub sd_curves: Vec<Vec<f64>>,
    pub grid: Vec<f64>,
}

/// Ordinary least squares of `log V` on `log n`, reported as
/// `log V = intercept − slope · log n`.
pub fn fit_rate(sizes: &[usize], v: &[f64]) -> Result<RateFit> {
    if sizes.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: sizes.len(),
            right: v.len(),
        });
    }
    if sizes.len() < 2 {
        return Err(Error::InvalidParameter("rate fit needs at least 2 sizes".into()));
    }
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) || sizes.iter().any(|&n| n == 0) {
        return Err(Error::InvalidParameter("rate fit needs positive V and n".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = v.iter().map(|s| s.ln()).collect();
    let mx = mean(&x);
    let my = mean(&y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct sizes".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r_squared = if ss_res <= f64::EPSILON * ss_tot.max(1.0) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(RateFit {
        fitted_slope: -slope,
        fitted_intercept: intercept,
        r_squared,
    })
}

/// Runs the variability study (without oracle) at each size and fits the
/// decay exponent of the grid-averaged sd.
pub fn rate_experiment(config: &RateConfig) -> Result<RateReport> {
    if !config.linear_truth {
        return Err(Error::InvalidParameter(
            "only the log-linear outcome model is available".into(),
        ));
    }
    if config.sizes.len() < 3 {
        return Err(Error::InvalidParameter("rate experiment needs at least 3 sizes".into()));
    }
    if config.base.runs < 20 {
        return Err(Error::InvalidParameter("rate experiment needs B >= 20".into()));
    }
    let studies = config
        .sizes
        .iter()
        .map(|&n| run_study(&config.base.with_size(n), false))
        .collect::<Result<Vec<_>>>()?;
    let v: Vec<f64> = studies.iter().map(StudyReport::mean_sd).collect();
    let fit = fit_rate(&config.sizes, &v)?;
    let first = &studies[0];
    Ok(RateReport {
        sample_sizes: config.sizes.clone(),
        fitted_slope: fit.fitted_slope,
        fitted_intercept: fit.fitted_intercept,
        r_squared: fit.r_squared,
        sigma2_covariate: first.sigma2_covariate,
        sigma2_time: first.sigma2_time,
        grid: first.grid.clone(),
        epsilon: studies.iter().map(|s| s.epsilon).collect(),
        censoring_fractions: studies.iter().map(|s| s.censoring_fractions).collect(),
        sd_curves: studies.into_iter().map(|s| s.pointwise_sd).collect(),
        v,
        config: config.clone(),
    })
}
