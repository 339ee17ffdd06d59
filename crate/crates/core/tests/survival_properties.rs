mod common;

use cse_core::dataset::{split_arms, Arm, Observation, RightCensoredSample};
use cse_core::survival::{build_weighted_arm, kaplan_meier, reverse_kaplan_meier};
use proptest::prelude::*;

fn sample_strategy(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((1u32..40, any::<bool>()), 1..max_n).prop_map(|rows| {
        rows.into_iter()
            .map(|(t, e)| (t as f64 / 4.0, e))
            .unzip()
    })
}

fn arm_sample(times: &[f64], events: &[bool]) -> RightCensoredSample {
    let obs = times
        .iter()
        .zip(events)
        .map(|(&time, &event)| Observation {
            time,
            event,
            arm: Arm::Control,
            covariates: vec![time],
        })
        .collect();
    RightCensoredSample::new(obs, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn km_starts_at_one_and_is_non_increasing((times, events) in sample_strategy(30)) {
        let km = kaplan_meier(&times, &events).unwrap();
        prop_assert_eq!(km.initial_value(), 1.0);
        prop_assert_eq!(km.evaluate(0.0), 1.0);
        let mut prev = 1.0;
        for &v in km.values_after() {
            prop_assert!(v <= prev && v >= 0.0);
            prev = v;
        }
    }

    #[test]
    fn km_is_right_continuous((times, events) in sample_strategy(30)) {
        let km = kaplan_meier(&times, &events).unwrap();
        for (&t, &v) in km.jump_times().iter().zip(km.values_after()) {
            prop_assert_eq!(km.evaluate(t), v);
            prop_assert_eq!(km.evaluate(t + 1e-9), v);
            prop_assert!(km.evaluate_left(t) >= v);
        }
    }

    #[test]
    fn jumps_sit_on_observed_times((times, events) in sample_strategy(30)) {
        let km = kaplan_meier(&times, &events).unwrap();
        let g = reverse_kaplan_meier(&times, &events).unwrap();
        for &t in km.jump_times() {
            prop_assert!(times.iter().zip(&events).any(|(&s, &e)| s == t && e));
        }
        for &t in g.jump_times() {
            prop_assert!(times.iter().zip(&events).any(|(&s, &e)| s == t && !e));
        }
    }

    #[test]
    fn reverse_km_is_flipped_km_without_ties(
        raw in prop::collection::btree_set(1u32..1000, 1..25),
        flags in prop::collection::vec(any::<bool>(), 25),
    ) {
        let times: Vec<f64> = raw.into_iter().map(|t| t as f64 / 10.0).collect();
        let events: Vec<bool> = flags[..times.len()].to_vec();
        let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
        let g = reverse_kaplan_meier(&times, &events).unwrap();
        let km = kaplan_meier(&times, &flipped).unwrap();
        prop_assert_eq!(g.jump_times(), km.jump_times());
        for (a, b) in g.values_after().iter().zip(km.values_after()) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn weights_match_independent_oracle((times, events) in sample_strategy(30)) {
        prop_assume!(events.iter().any(|&e| e));
        let arm = build_weighted_arm(&arm_sample(&times, &events)).unwrap();
        let oracle = common::ipcw_weights_oracle(&times, &events);
        for (w, o) in arm.weights().iter().zip(&oracle) {
            prop_assert!((w - o).abs() <= 1e-12 * o.max(1.0), "{} vs {}", w, o);
        }
    }

    #[test]
    fn weight_mass_matches_km_jumps((times, events) in sample_strategy(30)) {
        prop_assume!(events.iter().any(|&e| e));
        let arm = build_weighted_arm(&arm_sample(&times, &events)).unwrap();
        prop_assume!(arm.capped_weights() == 0);
        let n = times.len() as f64;
        let km = kaplan_meier(&times, &events).unwrap();
        for (k, &t) in km.jump_times().iter().enumerate() {
            let before = if k == 0 { 1.0 } else { km.values_after()[k - 1] };
            let jump = before - km.values_after()[k];
            let mass: f64 = times
                .iter()
                .zip(arm.weights())
                .filter(|(&s, _)| s == t)
                .map(|(_, w)| w / n)
                .sum();
            prop_assert!((mass - jump).abs() <= 1e-12);
        }
        let last = *km.values_after().last().unwrap();
        let total: f64 = arm.weights().iter().sum::<f64>() / n;
        prop_assert!((total - (1.0 - last)).abs() <= 1e-12);
    }

    #[test]
    fn uncensored_weights_are_one(times in prop::collection::vec(1u32..50, 1..30)) {
        let times: Vec<f64> = times.into_iter().map(f64::from).collect();
        let events = vec![true; times.len()];
        let arm = build_weighted_arm(&arm_sample(&times, &events)).unwrap();
        prop_assert!(arm.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn split_is_a_partition(arms in prop::collection::vec(any::<bool>(), 1..40)) {
        let obs: Vec<Observation> = arms
            .iter()
            .enumerate()
            .map(|(i, &t)| Observation {
                time: 1.0 + i as f64,
                event: true,
                arm: if t { Arm::Treated } else { Arm::Control },
                covariates: vec![i as f64],
            })
            .collect();
        let sample = RightCensoredSample::new(obs, 1).unwrap();
        let split = split_arms(&sample).unwrap();
        prop_assert_eq!(split.control.len() + split.treated.len(), sample.len());
        prop_assert!(split.control.observations().iter().all(|o| o.arm == Arm::Control));
        prop_assert!(split.treated.observations().iter().all(|o| o.arm == Arm::Treated));
        let mut seen: Vec<f64> = split
            .control
            .times()
            .into_iter()
            .chain(split.treated.times())
            .collect();
        seen.sort_by(f64::total_cmp);
        prop_assert_eq!(seen, sample.times());
    }
}

#[test]
fn all_censored_arm_is_rejected() {
    let err = build_weighted_arm(&arm_sample(&[1.0, 2.0], &[false, false])).unwrap_err();
    assert!(matches!(err, cse_core::Error::DegenerateCensoring));
}

#[test]
fn censoring_tied_with_last_event_caps_nothing() {
    let w = build_weighted_arm(&arm_sample(&[1.0, 2.0, 2.0], &[false, true, false])).unwrap();
    for (a, b) in w.weights().iter().zip([0.0, 1.5, 0.0]) {
        assert!((a - b).abs() <= 1e-15);
    }
    assert_eq!(w.capped_weights(), 0);
}
