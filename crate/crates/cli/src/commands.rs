use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use cse_core::dataset::{load_csv, split_arms, Arm, LoadedSample, RightCensoredSample};
use cse_core::embedding::{
    counterfactual_embedding, decompose, embedding_label, observational_embedding, EmbeddingCurve,
    EmbeddingKernels, ObservationalMode, RidgeSolveConfig,
};
use cse_core::kernels::time_grid;
use cse_core::simulate::{rate_experiment, variability_study, RateConfig};
use cse_core::survival::{build_weighted_arm, kaplan_meier};
use cse_core::{Error, Result};

use crate::args::{
    CurveArg, DataArgs, DecomposeArgs, EmbedArgs, EstimateArgs, KmArgs, RateArgs, SimulateArgs,
    ValidateArgs,
};
use crate::output::{file_digest, fmt_f64, render_json, write_target, Csv, RunManifest};
use crate::svg::{line_chart, step_points, Series, PALETTE};

struct Loaded {
    sample: RightCensoredSample,
    dropped: usize,
    digest: String,
}

fn load(args: &DataArgs) -> Result<Loaded> {
    let digest = file_digest(Path::new(&args.input))?;
    let LoadedSample {
        sample,
        dropped_count,
    } = load_csv(&args.input, &args.schema(), args.policy())?;
    if dropped_count > 0 {
        eprintln!("dropped {dropped_count} row(s) with missing values");
    }
    let sample = if args.standardize {
        sample.standardized()
    } else {
        sample
    };
    Ok(Loaded {
        sample,
        dropped: dropped_count,
        digest,
    })
}

fn finish(mut manifest: RunManifest, started: Instant) -> RunManifest {
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest
}

fn write(target: &str, contents: &str) -> Result<()> {
    write_target(target, contents).map_err(Error::from)
}

pub fn validate(args: &ValidateArgs) -> Result<()> {
    let started = Instant::now();
    let loaded = load(&args.data)?;
    let s = &loaded.sample;
    let split = split_arms(s)?;
    let arm_summary = |a: &RightCensoredSample| {
        json!({
            "n": a.len(),
            "events": a.observations().iter().filter(|o| o.event).count(),
            "censoring_fraction": a.censoring_fraction(),
        })
    };
    let body = json!({
        "n": s.len(),
        "covariate_dim": s.covariate_dim(),
        "covariate_names": s.covariate_names(),
        "dropped_count": loaded.dropped,
        "control": arm_summary(&split.control),
        "treated": arm_summary(&split.treated),
    });
    let manifest = RunManifest::new("validate", args, Some(loaded.digest), None);
    write(&args.out, &render_json(&body, &finish(manifest, started)))
}

pub fn km(args: &KmArgs) -> Result<()> {
    let loaded = load(&args.data)?;
    let split = split_arms(&loaded.sample)?;
    let mut csv = Csv::new(&["t", "survival", "arm"]);
    let mut series = Vec::new();
    let t_max = loaded.sample.times().into_iter().fold(0.0, f64::max);
    for arm in [Arm::Control, Arm::Treated] {
        let data = split.arm(arm);
        if data.is_empty() {
            eprintln!("{arm} has no observations; skipping");
            continue;
        }
        let curve = kaplan_meier(&data.times(), &data.events())?;
        let knots = curve.knots();
        for &(t, v) in &knots {
            csv.row(&[fmt_f64(t), fmt_f64(v), arm.indicator().to_string()]);
        }
        series.push(Series::line(
            format!("arm {}", arm.indicator()),
            step_points(&knots, t_max),
            PALETTE[arm.indicator() as usize],
        ));
    }
    write(&args.out, &csv.finish())?;
    if let Some(path) = &args.svg {
        write(path, &line_chart("Kaplan-Meier", "time", "survival", &series))?;
    }
    Ok(())
}

struct Prepared {
    kernels: EmbeddingKernels,
    grid: Vec<f64>,
    ridge: RidgeSolveConfig,
}

fn prepare(sample: &RightCensoredSample, est: &EstimateArgs) -> Result<Prepared> {
    let ridge = est.ridge.config();
    ridge.validate()?;
    let kernels = EmbeddingKernels::from_median_heuristic(sample)?;
    let grid = time_grid(&sample.times(), est.grid_size)?;
    Ok(Prepared {
        kernels,
        grid,
        ridge,
    })
}

fn curves_csv(curves: &[&EmbeddingCurve]) -> String {
    let mut csv = Csv::new(&["t", "value", "curve_label"]);
    for c in curves {
        for (t, v) in c.grid.iter().zip(&c.grid_values) {
            csv.row(&[fmt_f64(*t), fmt_f64(*v), c.label.clone()]);
        }
    }
    csv.finish()
}

fn curves_svg(title: &str, curves: &[&EmbeddingCurve]) -> String {
    let series: Vec<Series> = curves
        .iter()
        .enumerate()
        .map(|(k, c)| {
            Series::line(
                c.label.clone(),
                c.grid.iter().copied().zip(c.grid_values.iter().copied()).collect(),
                PALETTE[k % PALETTE.len()],
            )
        })
        .collect();
    line_chart(title, "time", "embedding", &series)
}

#[derive(Serialize)]
struct EstimateReport {
    n: usize,
    m: usize,
    epsilon: f64,
    sigma2_time: f64,
    sigma2_cov: f64,
    censoring_fraction_per_arm: [f64; 2],
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rkhs_norms: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    telescoping_error: Option<f64>,
}

fn capped_warning(arm: Arm, count: usize) -> Option<String> {
    (count > 0).then(|| {
        format!("{arm}: {count} weight(s) capped at n because the censoring survival reached zero")
    })
}

pub fn embed(args: &EmbedArgs) -> Result<()> {
    let started = Instant::now();
    let loaded = load(&args.data)?;
    let split = split_arms(&loaded.sample)?;
    split.require_both()?;
    let prep = prepare(&loaded.sample, &args.estimate)?;
    let mode: ObservationalMode = args.estimate.observational.into();

    let (conditional, covariates) = match args.curve {
        CurveArg::Mu01 => (Arm::Control, Arm::Treated),
        CurveArg::Mu10 => (Arm::Treated, Arm::Control),
        CurveArg::Mu00 => (Arm::Control, Arm::Control),
        CurveArg::Mu11 => (Arm::Treated, Arm::Treated),
    };
    let weighted = build_weighted_arm(split.arm(conditional))?;
    let target = split.arm(covariates).covariates();
    let curve = if conditional != covariates || mode == ObservationalMode::ConditionalAverage {
        let mut c = counterfactual_embedding(&weighted, &target, &prep.kernels, &prep.ridge, &prep.grid)?;
        c.label = embedding_label(conditional, covariates);
        c
    } else {
        observational_embedding(&weighted, &prep.kernels.time, &prep.grid)?
    };

    write(&args.out, &curves_csv(&[&curve]))?;
    if let Some(path) = &args.estimate.svg {
        write(path, &curves_svg(&curve.label, &[&curve]))?;
    }
    if let Some(path) = &args.estimate.report {
        let report = EstimateReport {
            n: split.arm(conditional).len(),
            m: target.len(),
            epsilon: prep.ridge.epsilon(split.arm(conditional).len()),
            sigma2_time: prep.kernels.time.sigma2(),
            sigma2_cov: prep.kernels.covariate.sigma2(),
            censoring_fraction_per_arm: [
                split.control.censoring_fraction(),
                split.treated.censoring_fraction(),
            ],
            warnings: capped_warning(conditional, weighted.capped_weights())
                .into_iter()
                .collect(),
            rkhs_norms: Some(json!({ curve.label.clone(): curve.rkhs_norm() })),
            telescoping_error: None,
        };
        let manifest = RunManifest::new("embed", args, Some(loaded.digest), None);
        write(path, &render_json(&report, &finish(manifest, started)))?;
    }
    Ok(())
}

pub fn decompose_cmd(args: &DecomposeArgs) -> Result<()> {
    let started = Instant::now();
    let loaded = load(&args.data)?;
    let split = split_arms(&loaded.sample)?;
    split.require_both()?;
    let prep = prepare(&loaded.sample, &args.estimate)?;
    let d = decompose(
        &loaded.sample,
        &prep.kernels,
        &prep.ridge,
        &prep.grid,
        args.estimate.observational.into(),
    )?;

    let mut curves = vec![&d.term_a, &d.term_b, &d.total];
    if args.with_components {
        curves.extend([&d.mu00, &d.mu01, &d.mu11]);
    }
    write(&args.out, &curves_csv(&curves))?;
    if let Some(path) = &args.estimate.svg {
        write(path, &curves_svg("decomposition", &[&d.term_a, &d.term_b, &d.total]))?;
    }
    if let Some(path) = &args.estimate.report {
        let warnings = [Arm::Control, Arm::Treated]
            .into_iter()
            .zip(d.capped_weights)
            .filter_map(|(arm, c)| capped_warning(arm, c))
            .collect();
        let report = EstimateReport {
            n: d.n_control,
            m: d.n_treated,
            epsilon: d.epsilon_control,
            sigma2_time: prep.kernels.time.sigma2(),
            sigma2_cov: prep.kernels.covariate.sigma2(),
            censoring_fraction_per_arm: [
                split.control.censoring_fraction(),
                split.treated.censoring_fraction(),
            ],
            warnings,
            rkhs_norms: Some(json!({
                "term_a": d.term_a.rkhs_norm(),
                "term_b": d.term_b.rkhs_norm(),
                "total": d.total.rkhs_norm(),
            })),
            telescoping_error: Some(d.telescoping_error()),
        };
        let manifest = RunManifest::new("decompose", args, Some(loaded.digest), None);
        write(path, &render_json(&report, &finish(manifest, started)))?;
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let started = Instant::now();
    let config = args.model.sim_config(
        args.n_control.unwrap_or(args.n),
        args.n_treated.unwrap_or(args.n),
    );
    let report = variability_study(&config)?;
    eprintln!(
        "mean sd over grid {:.4}, realized censoring {:.3}/{:.3}, resampled runs {}",
        report.mean_sd(),
        report.censoring_fractions[0],
        report.censoring_fractions[1],
        report.resampled_runs
    );

    if let Some(path) = &args.curves {
        let mut csv = Csv::new(&["t", "series", "value"]);
        for (b, curve) in report.per_run_curves.iter().enumerate() {
            for (t, v) in report.grid.iter().zip(curve) {
                csv.row(&[fmt_f64(*t), b.to_string(), fmt_f64(*v)]);
            }
        }
        let named = [
            ("mean", Some(&report.mean_curve)),
            ("oracle", report.oracle_curve.as_ref()),
            ("sd", Some(&report.pointwise_sd)),
        ];
        for (name, values) in named {
            if let Some(values) = values {
                for (t, v) in report.grid.iter().zip(values) {
                    csv.row(&[fmt_f64(*t), name.to_string(), fmt_f64(*v)]);
                }
            }
        }
        write(path, &csv.finish())?;
    }
    if let Some(path) = &args.svg {
        let xy = |vals: &[f64]| -> Vec<(f64, f64)> {
            report.grid.iter().copied().zip(vals.iter().copied()).collect()
        };
        let mut series: Vec<Series> = report
            .per_run_curves
            .iter()
            .map(|c| Series {
                label: None,
                points: xy(c),
                color: "#888888",
                width: 1.0,
                dashed: false,
                opacity: 0.35,
            })
            .collect();
        series.push(Series::line("mean", xy(&report.mean_curve), "black"));
        if let Some(oracle) = &report.oracle_curve {
            series.push(Series {
                dashed: true,
                ..Series::line("population", xy(oracle), "#e6b800")
            });
        }
        let title = format!("mu<0|1>, n = {}, B = {}", config.n_control, config.runs);
        write(path, &line_chart(&title, "time", "embedding", &series))?;
    }

    let manifest = RunManifest::new("simulate", args, None, Some(config.seed));
    let body = json!({
        "report": report,
        "mean_sd": report.mean_sd(),
        "mean_oracle_error": report.mean_oracle_error(),
    });
    write(&args.out, &render_json(&body, &finish(manifest, started)))
}

pub fn rate(args: &RateArgs) -> Result<()> {
    let started = Instant::now();
    let config = RateConfig {
        sizes: args.sizes.clone(),
        linear_truth: args.linear_truth,
        base: {
            let n = args.sizes.first().copied().unwrap_or(2);
            args.model.sim_config(n, n)
        },
    };
    let report = rate_experiment(&config)?;
    eprintln!(
        "gamma = {:.5}, log C = {:.5}, R^2 = {:.4}",
        report.fitted_slope, report.fitted_intercept, report.r_squared
    );
    if let Some(path) = &args.curves {
        let mut csv = Csv::new(&["n", "t", "series", "value"]);
        for (n, sd) in report.sample_sizes.iter().zip(&report.sd_curves) {
            for (t, v) in report.grid.iter().zip(sd) {
                csv.row(&[n.to_string(), fmt_f64(*t), "sd".into(), fmt_f64(*v)]);
            }
        }
        write(path, &csv.finish())?;
    }
    let manifest = RunManifest::new("rate", args, None, Some(args.model.seed));
    write(&args.out, &render_json(&report, &finish(manifest, started)))
}
