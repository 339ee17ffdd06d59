//! Product-limit estimation and inverse-probability-of-censoring weights.
//!
//! Ties follow the usual convention: at a shared time, events happen just
//! before censorings. For the Kaplan–Meier curve a unit censored at `t` is
//! still at risk for events at `t`; for the reverse (censoring) curve a unit
//! whose event is at `t` has already left the risk set.

use serde::{Deserialize, Serialize};

use crate::dataset::RightCensoredSample;
use crate::error::{Error, Result};

/// Right-continuous, piecewise-constant curve on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values_after: Vec<f64>,
    initial_value: f64,
}

impl StepFunction {
    pub fn constant(value: f64) -> Self {
        Self {
            jump_times: Vec::new(),
            values_after: Vec::new(),
            initial_value: value,
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values_after(&self) -> &[f64] {
        &self.values_after
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    /// Value at `t`; at a jump time this is the post-jump value.
    pub fn evaluate(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 {
            self.initial_value
        } else {
            self.values_after[k - 1]
        }
    }

    /// Left limit `lim_{s↑t} f(s)`.
    pub fn evaluate_left(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s < t);
        if k == 0 {
            self.initial_value
        } else {
            self.values_after[k - 1]
        }
    }

    /// `(t, value)` pairs starting at `(0, initial_value)` followed by every jump.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, self.initial_value))
            .chain(self.jump_times.iter().copied().zip(self.values_after.iter().copied()))
            .collect()
    }
}

fn validate(times: &[f64], events: &[bool]) -> Result<()> {
    if times.len() != events.len() {
        return Err(Error::LengthMismatch {
            left: times.len(),
            right: events.len(),
        });
    }
    if times.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(row) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::NonPositiveTime { row });
    }
    Ok(())
}

/// Distinct times in increasing order with `(events, censorings)` at each.
fn tally(times: &[f64], events: &[bool]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    for i in order {
        let t = times[i];
        match out.last_mut() {
            Some(last) if last.0 == t => {
                if events[i] {
                    last.1 += 1
                } else {
                    last.2 += 1
                }
            }
            _ => out.push((t, usize::from(events[i]), usize::from(!events[i]))),
        }
    }
    out
}

/// Kaplan–Meier estimate of the event-time survival function.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<StepFunction> {
    validate(times, events)?;
    let mut at_risk = times.len();
    let mut surv = 1.0;
    let mut jump_times = Vec::new();
    let mut values_after = Vec::new();
    for (t, d, c) in tally(times, events) {
        if d > 0 {
            surv *= 1.0 - d as f64 / at_risk as f64;
            jump_times.push(t);
            values_after.push(surv);
        }
        at_risk -= d + c;
    }
    Ok(StepFunction {
        jump_times,
        values_after,
        initial_value: 1.0,
    })
}

/// Kaplan–Meier estimate of the censoring survival function `G(t) = P(C > t)`,
/// i.e. the product-limit estimator with event indicators flipped.
pub fn reverse_kaplan_meier(times: &[f64], events: &[bool]) -> Result<StepFunction> {
    validate(times, events)?;
    let mut at_risk = times.len();
    let mut surv = 1.0;
    let mut jump_times = Vec::new();
    let mut values_after = Vec::new();
    for (t, d, c) in tally(times, events) {
        // events at t leave first
        let risk = at_risk - d;
        if c > 0 {
            surv *= 1.0 - c as f64 / risk as f64;
            jump_times.push(t);
            values_after.push(surv);
        }
        at_risk -= d + c;
    }
    Ok(StepFunction {
        jump_times,
        values_after,
        initial_value: 1.0,
    })
}

/// One arm's data with its censoring curve and IPCW weights
/// `W_i = event_i / Ĝ(T_i−)`.
#[derive(Debug, Clone)]
pub struct WeightedArm {
    arm_data: RightCensoredSample,
    censor_survival: StepFunction,
    weights: Vec<f64>,
    capped_weights: usize,
}

impl WeightedArm {
    pub fn arm_data(&self) -> &RightCensoredSample {
        &self.arm_data
    }

    pub fn censor_survival(&self) -> &StepFunction {
        &self.censor_survival
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of uncensored rows whose `Ĝ(T−)` was zero and got weight `n`.
    pub fn capped_weights(&self) -> usize {
        self.capped_weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.arm_data.observations().iter().filter(|o| o.event).count()
    }
}

pub fn build_weighted_arm(arm_data: &RightCensoredSample) -> Result<WeightedArm> {
    if arm_data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let times = arm_data.times();
    let events = arm_data.events();
    if !events.iter().any(|&e| e) {
        return Err(Error::DegenerateCensoring);
    }
    let g = reverse_kaplan_meier(&times, &events)?;
    let n = times.len() as f64;
    let mut capped = 0;
    let weights = times
        .iter()
        .zip(&events)
        .map(|(&t, &e)| {
            if !e {
                return 0.0;
            }
            let g_left = g.evaluate_left(t);
            if g_left > 0.0 {
                1.0 / g_left
            } else {
                capped += 1;
                n
            }
        })
        .collect();
    Ok(WeightedArm {
        arm_data: arm_data.clone(),
        censor_survival: g,
        weights,
        capped_weights: capped,
    })
}
