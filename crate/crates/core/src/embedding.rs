//! Censoring-weighted conditional mean embeddings and their counterfactual
//! averages.
//!
//! For one arm with covariates `X_i`, observed times `T*_i` and IPCW weights
//! `W = diag(W_i)`, the weighted kernel ridge problem has the representer
//! system
//!
//! ```text
//! (W K + nε I) C = W H,      K_ij = k(X_i, X_j),  H_i = l(T*_i, ·)
//! ```
//!
//! so `C = M H` with `M = (WK + nεI)⁻¹ W`. Since `(WK + nεI) W = W (KW + nεI)`,
//! `M` is also `W (KW + nεI)⁻¹` and is symmetric. Averaging the fitted
//! conditional embedding over target covariates `X'_1..X'_m` gives
//!
//! ```text
//! μ̂(·) = Σ_i a_i l(T*_i, ·),   a = M K̃ 1_m,   K̃_ij = k(X_i, X'_j)
//! ```
//!
//! which is zero at every censored support point because `W_i = 0` there.

use nalgebra::{Cholesky, DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::dataset::{split_arms, Arm, RightCensoredSample};
use crate::error::{Error, Result};
use crate::kernels::{gram, median_heuristic, GaussianKernel};
use crate::survival::{build_weighted_arm, WeightedArm};

/// How the ridge parameter is chosen for a sample of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EpsilonRule {
    Fixed { epsilon: f64 },
    /// `ε_n = constant · n^(−exponent)`, `0 < exponent < 1/2`.
    NPower { constant: f64, exponent: f64 },
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule::NPower {
            constant: 0.1,
            exponent: 1.0 / 3.0,
        }
    }
}

/// Which factorization backs the ridge solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// LU of the non-symmetric `KW + nεI`.
    #[default]
    General,
    /// Cholesky of `W^½ K W^½ + nεI`.
    Symmetrized,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RidgeSolveConfig {
    pub rule: EpsilonRule,
    pub solver: SolverPath,
}

impl RidgeSolveConfig {
    pub fn fixed(epsilon: f64) -> Self {
        Self {
            rule: EpsilonRule::Fixed { epsilon },
            solver: SolverPath::General,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.rule {
            EpsilonRule::Fixed { epsilon } if !(epsilon.is_finite() && epsilon > 0.0) => Err(
                Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")),
            ),
            EpsilonRule::NPower { constant, exponent }
                if !(constant.is_finite() && constant > 0.0 && exponent > 0.0 && exponent < 0.5) =>
            {
                Err(Error::InvalidParameter(format!(
                    "epsilon rule needs c > 0 and 0 < q < 1/2, got c={constant}, q={exponent}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn epsilon(&self, n: usize) -> f64 {
        match self.rule {
            EpsilonRule::Fixed { epsilon } => epsilon,
            EpsilonRule::NPower { constant, exponent } => constant * (n as f64).powf(-exponent),
        }
    }
}

/// Covariate kernel `k` and time kernel `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingKernels {
    pub covariate: GaussianKernel,
    pub time: GaussianKernel,
}

impl EmbeddingKernels {
    /// Median-heuristic bandwidths from the pooled covariates of both arms and
    /// from every observed time, censored or not.
    pub fn from_median_heuristic(sample: &RightCensoredSample) -> Result<Self> {
        let covariate = GaussianKernel::new(median_heuristic(&sample.covariates())?)?;
        let time = GaussianKernel::new(median_heuristic(&sample.times())?)?;
        Ok(Self { covariate, time })
    }
}

enum Factor {
    /// LU of `KW + nεI`.
    General(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    /// Cholesky of `W^½ K W^½ + nεI` together with `W^½`.
    Symmetrized(Cholesky<f64, nalgebra::Dyn>, DVector<f64>),
}

/// Fitted weighted ridge system for one arm. Holds a factorization; the
/// operator `M = (WK + nεI)⁻¹ W` is applied on demand.
pub struct ConditionalFit {
    covariates: Vec<Vec<f64>>,
    times: Vec<f64>,
    weights: DVector<f64>,
    gram: DMatrix<f64>,
    kernel: GaussianKernel,
    epsilon: f64,
    factor: Factor,
}

impl ConditionalFit {
    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    /// `M · rhs` for a block of right-hand sides (n rows).
    pub fn apply(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rhs.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: rhs.nrows(),
            });
        }
        let mut out = rhs.clone();
        match &self.factor {
            Factor::General(lu) => {
                // M = W (KW + nεI)⁻¹
                if !lu.solve_mut(&mut out) {
                    return Err(Error::SingularSystem);
                }
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= self.weights[i];
                }
            }
            Factor::Symmetrized(chol, sqrt_w) => {
                // M = W^½ (W^½ K W^½ + nεI)⁻¹ W^½
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= sqrt_w[i];
                }
                chol.solve_mut(&mut out);
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= sqrt_w[i];
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        Ok(out)
    }

    /// The n×n operator `M = (WK + nεI)⁻¹ W`.
    pub fn operator(&self) -> Result<DMatrix<f64>> {
        self.apply(&DMatrix::identity(self.n(), self.n()))
    }

    /// Solution `C` of the representer system `(WK + nεI) C = W H` for a
    /// probe `H` (n rows, any number of columns).
    pub fn solve_representer(&self, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.apply(h)
    }

    /// `max |(WK + nεI) C − W H|` with the system matrix formed afresh.
    pub fn representer_residual(&self, c: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
        let n = self.n();
        let mut system = self.gram.clone();
        for (i, mut row) in system.row_iter_mut().enumerate() {
            row *= self.weights[i];
        }
        for i in 0..n {
            system[(i, i)] += n as f64 * self.epsilon;
        }
        let mut wh = h.clone();
        for (i, mut row) in wh.row_iter_mut().enumerate() {
            row *= self.weights[i];
        }
        (system * c - wh).amax()
    }

    /// Expansion coefficients over the time sections `l(T*_i, ·)` of the
    /// conditional embedding averaged over `targets`.
    pub fn averaged_coefficients(&self, targets: &[Vec<f64>]) -> Result<Vec<f64>> {
        if targets.is_empty() {
            return Err(Error::EmptyInput);
        }
        let cross = gram(&self.kernel, &self.covariates, targets)?.into_entries();
        let mean = cross.column_mean();
        let a = self.apply(&DMatrix::from_column_slice(self.n(), 1, mean.as_slice()))?;
        Ok(a.column(0).iter().copied().collect())
    }
}

/// Factors the weighted ridge system of one arm.
pub fn fit_conditional_coefficients(
    weighted: &WeightedArm,
    covariate_kernel: &GaussianKernel,
    config: &RidgeSolveConfig,
) -> Result<ConditionalFit> {
    config.validate()?;
    if weighted.n_events() == 0 {
        return Err(Error::DegenerateCensoring);
    }
    let data = weighted.arm_data();
    let n = data.len();
    let covariates = data.covariates();
    let times = data.times();
    let epsilon = config.epsilon(n);
    let weights = DVector::from_column_slice(weighted.weights());
    let k = gram(covariate_kernel, &covariates, &covariates)?.into_entries();
    let ridge = n as f64 * epsilon;

    let factor = match config.solver {
        SolverPath::General => {
            let mut b = k.clone();
            for (j, mut col) in b.column_iter_mut().enumerate() {
                col *= weights[j];
            }
            for i in 0..n {
                b[(i, i)] += ridge;
            }
            Factor::General(b.lu())
        }
        SolverPath::Symmetrized => {
            let sqrt_w = weights.map(f64::sqrt);
            let mut s = k.clone();
            for i in 0..n {
                for j in 0..n {
                    s[(i, j)] *= sqrt_w[i] * sqrt_w[j];
                }
                s[(i, i)] += ridge;
            }
            let chol = Cholesky::new(s).ok_or(Error::SingularSystem)?;
            Factor::Symmetrized(chol, sqrt_w)
        }
    };

    Ok(ConditionalFit {
        covariates,
        times,
        weights,
        gram: k,
        kernel: *covariate_kernel,
        epsilon,
        factor,
    })
}

/// An RKHS element `Σ_i coefficients[i] · l(expansion_times[i], ·)` together
/// with its values on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCurve {
    pub expansion_times: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub grid: Vec<f64>,
    pub grid_values: Vec<f64>,
    pub time_kernel: GaussianKernel,
    pub label: String,
}

impl EmbeddingCurve {
    pub fn new(
        expansion_times: Vec<f64>,
        coefficients: Vec<f64>,
        grid: Vec<f64>,
        time_kernel: GaussianKernel,
        label: impl Into<String>,
    ) -> Result<Self> {
        if expansion_times.len() != coefficients.len() {
            return Err(Error::LengthMismatch {
                left: expansion_times.len(),
                right: coefficients.len(),
            });
        }
        let mut curve = Self {
            expansion_times,
            coefficients,
            grid,
            grid_values: Vec::new(),
            time_kernel,
            label: label.into(),
        };
        curve.grid_values = curve.grid.iter().map(|&t| curve.evaluate(t)).collect();
        Ok(curve)
    }

    /// `Σ_i coeff_i · l(T_i, t)`; for a mean embedding this is the kernel
    /// depth of `t` with respect to the embedded distribution.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.expansion_times
            .iter()
            .zip(&self.coefficients)
            .map(|(&s, &a)| a * self.time_kernel.eval_scalar(s, t))
            .sum()
    }

    pub fn rkhs_norm(&self) -> f64 {
        rkhs_norm(&self.expansion_times, &self.coefficients, &self.time_kernel)
    }

    pub fn sup_norm(&self) -> f64 {
        self.grid_values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.time_kernel != other.time_kernel {
            return Err(Error::InvalidParameter(format!(
                "curves `{}` and `{}` use different grids or time kernels",
                self.label, other.label
            )));
        }
        Ok(())
    }

    fn combine(&self, other: &Self, sign: f64, label: String) -> Result<Self> {
        self.check_compatible(other)?;
        let mut expansion_times = self.expansion_times.clone();
        expansion_times.extend_from_slice(&other.expansion_times);
        let mut coefficients = self.coefficients.clone();
        coefficients.extend(other.coefficients.iter().map(|a| sign * a));
        let grid_values = self
            .grid_values
            .iter()
            .zip(&other.grid_values)
            .map(|(a, b)| a + sign * b)
            .collect();
        Ok(Self {
            expansion_times,
            coefficients,
            grid: self.grid.clone(),
            grid_values,
            time_kernel: self.time_kernel,
            label,
        })
    }

    /// `self − other` as a single expansion; grid values subtract exactly.
    pub fn difference(&self, other: &Self, label: impl Into<String>) -> Result<Self> {
        self.combine(other, -1.0, label.into())
    }

    pub fn sum(&self, other: &Self, label: impl Into<String>) -> Result<Self> {
        self.combine(other, 1.0, label.into())
    }
}

/// Kernel depth of `t`: the embedding evaluated at `t`.
pub fn depth_evaluate(curve: &EmbeddingCurve, t: f64) -> f64 {
    curve.evaluate(t)
}

/// `sqrt(aᵀ L a)` for the expansion `Σ_i a_i l(s_i, ·)`.
pub fn rkhs_norm(points: &[f64], coefficients: &[f64], kernel: &GaussianKernel) -> f64 {
    let mut acc = 0.0;
    for (i, (&si, &ai)) in points.iter().zip(coefficients).enumerate() {
        if ai == 0.0 {
            continue;
        }
        acc += ai * ai;
        for (&sj, &aj) in points[..i].iter().zip(coefficients) {
            acc += 2.0 * ai * aj * kernel.eval_scalar(si, sj);
        }
    }
    acc.max(0.0).sqrt()
}

fn arm_of(weighted: &WeightedArm) -> Arm {
    weighted
        .arm_data()
        .observations()
        .first()
        .map(|o| o.arm)
        .unwrap_or(Arm::Control)
}

pub fn embedding_label(conditional: Arm, covariates: Arm) -> String {
    format!("mu<{}|{}>", conditional.indicator(), covariates.indicator())
}

fn check_targets(dim: usize, targets: &[Vec<f64>]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::EmptyInput);
    }
    for t in targets {
        if t.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: t.len(),
            });
        }
    }
    Ok(())
}

/// Embedding of the outcome law of `control`'s arm averaged over the
/// covariate distribution carried by `target_covariates`.
pub fn counterfactual_embedding(
    control: &WeightedArm,
    target_covariates: &[Vec<f64>],
    kernels: &EmbeddingKernels,
    config: &RidgeSolveConfig,
    grid: &[f64],
) -> Result<EmbeddingCurve> {
    check_targets(control.arm_data().covariate_dim(), target_covariates)?;
    let fit = fit_conditional_coefficients(control, &kernels.covariate, config)?;
    let coefficients = fit.averaged_coefficients(target_covariates)?;
    let arm = arm_of(control);
    EmbeddingCurve::new(
        fit.times,
        coefficients,
        grid.to_vec(),
        kernels.time,
        embedding_label(arm, arm.other()),
    )
}

/// Evaluates the counterfactual embedding on the grid through both closed
/// forms and returns the largest absolute disagreement:
///
/// * column form `H'W (KW + nεI)⁻¹ K̃ 1_m`
/// * row form `1'_m K̃' (WK + nεI)⁻¹ W H`
pub fn dual_form_check(
    control: &WeightedArm,
    target_covariates: &[Vec<f64>],
    kernels: &EmbeddingKernels,
    config: &RidgeSolveConfig,
    grid: &[f64],
) -> Result<f64> {
    let column = counterfactual_embedding(control, target_covariates, kernels, config, grid)?;

    let data = control.arm_data();
    let n = data.len();
    let covariates = data.covariates();
    let times = data.times();
    let eps = config.epsilon(n);
    let w = control.weights();
    let mut a = gram(&kernels.covariate, &covariates, &covariates)?.into_entries();
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= w[i];
    }
    for i in 0..n {
        a[(i, i)] += n as f64 * eps;
    }
    let mut wh = gram(&kernels.time, &times, grid)?.into_entries();
    for (i, mut row) in wh.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let c = a.lu().solve(&wh).ok_or(Error::SingularSystem)?;
    let mean = gram(&kernels.covariate, &covariates, target_covariates)?
        .into_entries()
        .column_mean();
    let row = mean.transpose() * c;

    Ok(column
        .grid_values
        .iter()
        .zip(row.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}

/// IPCW mean embedding of one arm's own outcome law, `(1/n) Σ_i W_i l(T*_i, ·)`.
pub fn observational_embedding(
    arm: &WeightedArm,
    time_kernel: &GaussianKernel,
    grid: &[f64],
) -> Result<EmbeddingCurve> {
    if arm.n_events() == 0 {
        return Err(Error::DegenerateCensoring);
    }
    let n = arm.len() as f64;
    let a = arm_of(arm);
    EmbeddingCurve::new(
        arm.arm_data().times(),
        arm.weights().iter().map(|w| w / n).collect(),
        grid.to_vec(),
        *time_kernel,
        embedding_label(a, a),
    )
}

/// How the factual `⟨j|j⟩` embeddings are estimated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationalMode {
    /// Weighted empirical embedding of the arm's own times.
    #[default]
    Ipcw,
    /// Conditional embedding of the arm averaged over its own covariates.
    ConditionalAverage,
}

fn factual_embedding(
    arm: &WeightedArm,
    kernels: &EmbeddingKernels,
    config: &RidgeSolveConfig,
    grid: &[f64],
    mode: ObservationalMode,
) -> Result<EmbeddingCurve> {
    match mode {
        ObservationalMode::Ipcw => observational_embedding(arm, &kernels.time, grid),
        ObservationalMode::ConditionalAverage => {
            let own = arm.arm_data().covariates();
            let mut curve = counterfactual_embedding(arm, &own, kernels, config, grid)?;
            let a = arm_of(arm);
            curve.label = embedding_label(a, a);
            Ok(curve)
        }
    }
}

/// `μ̂⟨0|0⟩ − μ̂⟨1|1⟩ = (μ̂⟨0|0⟩ − μ̂⟨0|1⟩) + (μ̂⟨0|1⟩ − μ̂⟨1|1⟩)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionCurves {
    pub mu00: EmbeddingCurve,
    pub mu01: EmbeddingCurve,
    pub mu11: EmbeddingCurve,
    /// Covariate-composition effect `μ̂⟨0|0⟩ − μ̂⟨0|1⟩`.
    pub term_a: EmbeddingCurve,
    /// Effect on the treated `μ̂⟨0|1⟩ − μ̂⟨1|1⟩`.
    pub term_b: EmbeddingCurve,
    pub total: EmbeddingCurve,
    pub epsilon_control: f64,
    pub n_control: usize,
    pub n_treated: usize,
    pub capped_weights: [usize; 2],
}

impl DecompositionCurves {
    pub fn grid(&self) -> &[f64] {
        &self.total.grid
    }

    /// `max |total − (μ̂⟨0|0⟩ − μ̂⟨1|1⟩)|` over the grid.
    pub fn telescoping_error(&self) -> f64 {
        self.total
            .grid_values
            .iter()
            .zip(self.mu00.grid_values.iter().zip(&self.mu11.grid_values))
            .fold(0.0, |m, (t, (a, b))| m.max((t - (a - b)).abs()))
    }
}

pub fn decompose(
    sample: &RightCensoredSample,
    kernels: &EmbeddingKernels,
    config: &RidgeSolveConfig,
    grid: &[f64],
    mode: ObservationalMode,
) -> Result<DecompositionCurves> {
    let split = split_arms(sample)?;
    split.require_both()?;
    let control = build_weighted_arm(&split.control)?;
    let treated = build_weighted_arm(&split.treated)?;

    let mu00 = factual_embedding(&control, kernels, config, grid, mode)?;
    let mu11 = factual_embedding(&treated, kernels, config, grid, mode)?;
    let mu01 = counterfactual_embedding(&control, &split.treated.covariates(), kernels, config, grid)?;

    let term_a = mu00.difference(&mu01, "term_a")?;
    let term_b = mu01.difference(&mu11, "term_b")?;
    let total = term_a.sum(&term_b, "total")?;
    Ok(DecompositionCurves {
        mu00,
        mu01,
        mu11,
        term_a,
        term_b,
        total,
        epsilon_control: config.epsilon(control.len()),
        n_control: control.len(),
        n_treated: treated.len(),
        capped_weights: [control.capped_weights(), treated.capped_weights()],
    })
}
