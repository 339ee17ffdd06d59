//! Right-censored observational survival data.
//!
//! A sample is an ordered list of `(time, event, arm, covariates)` tuples where
//! `time` is the observed time `min(T, C)`, `event` says whether `T` was seen,
//! and `arm` is the binary treatment indicator.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn from_indicator(v: u8) -> Option<Arm> {
        match v {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treated),
            _ => None,
        }
    }

    pub fn indicator(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arm::Control => write!(f, "control (arm=0)"),
            Arm::Treated => write!(f, "treated (arm=1)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
    pub arm: Arm,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RightCensoredSample {
    observations: Vec<Observation>,
    covariate_dim: usize,
    covariate_names: Option<Vec<String>>,
}

impl RightCensoredSample {
    pub fn new(observations: Vec<Observation>, covariate_dim: usize) -> Result<Self> {
        if covariate_dim == 0 {
            return Err(Error::InvalidParameter(
                "covariate dimension must be at least 1".into(),
            ));
        }
        for (row, obs) in observations.iter().enumerate() {
            if obs.covariates.len() != covariate_dim {
                return Err(Error::CovariateDimension {
                    expected: covariate_dim,
                    found: obs.covariates.len(),
                });
            }
            if !(obs.time.is_finite() && obs.time > 0.0) {
                return Err(Error::NonPositiveTime { row });
            }
            if let Some(j) = obs.covariates.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteCovariate {
                    row,
                    column: format!("covariate[{j}]"),
                });
            }
        }
        Ok(Self {
            observations,
            covariate_dim,
            covariate_names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.covariate_dim {
            return Err(Error::CovariateDimension {
                expected: self.covariate_dim,
                found: names.len(),
            });
        }
        self.covariate_names = Some(names);
        Ok(self)
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    pub fn covariate_names(&self) -> Option<&[String]> {
        self.covariate_names.as_deref()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.observations.iter().map(|o| o.event).collect()
    }

    pub fn covariates(&self) -> Vec<Vec<f64>> {
        self.observations
            .iter()
            .map(|o| o.covariates.clone())
            .collect()
    }

    pub fn count_arm(&self, arm: Arm) -> usize {
        self.observations.iter().filter(|o| o.arm == arm).count()
    }

    /// Fraction of rows with `event = 0`; zero for an empty sample.
    pub fn censoring_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let censored = self.observations.iter().filter(|o| !o.event).count();
        censored as f64 / self.len() as f64
    }

    /// Centers each covariate and scales it to unit variance, with moments
    /// taken over every row. Constant columns are only centered.
    pub fn standardized(&self) -> Self {
        let n = self.len();
        if n == 0 {
            return self.clone();
        }
        let p = self.covariate_dim;
        let mut mean = vec![0.0; p];
        for o in &self.observations {
            for (m, v) in mean.iter_mut().zip(&o.covariates) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; p];
        for o in &self.observations {
            for j in 0..p {
                let d = o.covariates[j] - mean[j];
                var[j] += d * d;
            }
        }
        let sd: Vec<f64> = var
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let observations = self
            .observations
            .iter()
            .map(|o| Observation {
                covariates: o
                    .covariates
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (v - mean[j]) / sd[j])
                    .collect(),
                ..o.clone()
            })
            .collect();
        Self {
            observations,
            covariate_dim: p,
            covariate_names: self.covariate_names.clone(),
        }
    }

    fn filter_arm(&self, arm: Arm) -> Self {
        Self {
            observations: self
                .observations
                .iter()
                .filter(|o| o.arm == arm)
                .cloned()
                .collect(),
            covariate_dim: self.covariate_dim,
            covariate_names: self.covariate_names.clone(),
        }
    }
}

/// Control and treated sub-samples, each in original row order.
#[derive(Debug, Clone)]
pub struct ArmSplit {
    pub control: RightCensoredSample,
    pub treated: RightCensoredSample,
}

impl ArmSplit {
    pub fn arm(&self, arm: Arm) -> &RightCensoredSample {
        match arm {
            Arm::Control => &self.control,
            Arm::Treated => &self.treated,
        }
    }

    /// Fails with `EmptyArm` unless both arms have at least one row.
    pub fn require_both(&self) -> Result<()> {
        if self.control.is_empty() {
            return Err(Error::EmptyArm(Arm::Control));
        }
        if self.treated.is_empty() {
            return Err(Error::EmptyArm(Arm::Treated));
        }
        Ok(())
    }
}

/// Partitions a sample by arm. An empty sample is an error; an empty arm is
/// not, callers that need both arms check with [`ArmSplit::require_both`].
pub fn split_arms(sample: &RightCensoredSample) -> Result<ArmSplit> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(ArmSplit {
        control: sample.filter_arm(Arm::Control),
        treated: sample.filter_arm(Arm::Treated),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub time_col: String,
    pub event_col: String,
    pub arm_col: String,
    /// `None` picks every `x<k>` header, ordered by `k`.
    pub covariate_cols: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time_col: "time".into(),
            event_col: "event".into(),
            arm_col: "arm".into(),
            covariate_cols: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissingPolicy {
    /// Reject the file on the first missing value.
    #[default]
    Strict,
    /// Drop rows with a missing value in any mapped column.
    Lenient,
}

#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub sample: RightCensoredSample,
    pub dropped_count: usize,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema, policy: MissingPolicy) -> Result<LoadedSample> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema, policy)
}

/// Parses CSV from any reader. Rows are numbered from 1 (first data row).
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema, policy: MissingPolicy) -> Result<LoadedSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let lookup = |name: &str| -> Result<usize> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let time_idx = lookup(&schema.time_col)?;
    let event_idx = lookup(&schema.event_col)?;
    let arm_idx = lookup(&schema.arm_col)?;
    let cov_names: Vec<String> = match &schema.covariate_cols {
        Some(cols) => cols.clone(),
        None => default_covariate_columns(headers.iter()),
    };
    if cov_names.is_empty() {
        return Err(Error::MissingColumn("x1".into()));
    }
    let cov_idx = cov_names
        .iter()
        .map(|c| lookup(c))
        .collect::<Result<Vec<_>>>()?;

    let mut observations = Vec::new();
    let mut dropped = 0usize;
    'rows: for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let mapped = [
            (time_idx, schema.time_col.as_str()),
            (event_idx, schema.event_col.as_str()),
            (arm_idx, schema.arm_col.as_str()),
        ]
        .into_iter()
        .chain(cov_idx.iter().copied().zip(cov_names.iter().map(String::as_str)));
        for (idx, name) in mapped {
            if is_missing(record.get(idx)) {
                match policy {
                    MissingPolicy::Strict => {
                        return Err(Error::MissingValue {
                            row,
                            column: name.to_string(),
                        })
                    }
                    MissingPolicy::Lenient => {
                        dropped += 1;
                        continue 'rows;
                    }
                }
            }
        }

        let field = |idx: usize| record.get(idx).unwrap_or("");
        let time: f64 = field(time_idx)
            .parse()
            .map_err(|_| Error::NonPositiveTime { row })?;
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::NonPositiveTime { row });
        }
        let event = parse_indicator(field(event_idx)).ok_or_else(|| Error::NonBinaryIndicator {
            row,
            column: schema.event_col.clone(),
        })?;
        let arm = parse_indicator(field(arm_idx))
            .and_then(Arm::from_indicator)
            .ok_or_else(|| Error::NonBinaryIndicator {
                row,
                column: schema.arm_col.clone(),
            })?;
        let mut covariates = Vec::with_capacity(cov_idx.len());
        for (&idx, name) in cov_idx.iter().zip(&cov_names) {
            let v: f64 = field(idx).parse().map_err(|_| Error::NonFiniteCovariate {
                row,
                column: name.clone(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteCovariate {
                    row,
                    column: name.clone(),
                });
            }
            covariates.push(v);
        }
        observations.push(Observation {
            time,
            event: event == 1,
            arm,
            covariates,
        });
    }

    let sample = RightCensoredSample::new(observations, cov_names.len())?.with_names(cov_names)?;
    Ok(LoadedSample {
        sample,
        dropped_count: dropped,
    })
}

fn is_missing(v: Option<&str>) -> bool {
    match v {
        None => true,
        Some(s) => {
            let s = s.trim();
            s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
        }
    }
}

fn parse_indicator(s: &str) -> Option<u8> {
    match s.trim() {
        "0" | "0.0" => Some(0),
        "1" | "1.0" => Some(1),
        _ => None,
    }
}

fn default_covariate_columns<'a>(headers: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut numbered: Vec<(u32, String)> = headers
        .filter_map(|h| {
            let k = h.strip_prefix('x')?;
            if k.is_empty() || !k.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            Some((k.parse().ok()?, h.to_string()))
        })
        .collect();
    numbered.sort();
    numbered.into_iter().map(|(_, h)| h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, policy: MissingPolicy) -> Result<LoadedSample> {
        read_csv(text.as_bytes(), &CsvSchema::default(), policy)
    }

    #[test]
    fn parses_two_rows() {
        let loaded = parse("time,event,arm,x1\n2,1,0,0.5\n3,0,1,-1.0\n", MissingPolicy::Strict).unwrap();
        let s = &loaded.sample;
        assert_eq!(s.len(), 2);
        assert_eq!(s.covariate_dim(), 1);
        assert_eq!(s.observations()[0].covariates, vec![0.5]);
        assert!(s.observations()[0].event);
        assert_eq!(s.observations()[1].arm, Arm::Treated);
        assert_eq!(loaded.dropped_count, 0);
    }

    #[test]
    fn negative_time_rejected() {
        let err = parse("time,event,arm,x1\n-1,1,0,0.5\n", MissingPolicy::Strict).unwrap_err();
        assert!(matches!(err, Error::NonPositiveTime { row: 1 }));
    }

    #[test]
    fn lenient_drops_incomplete_rows() {
        let text = "time,event,arm,x1\n1,1,0,0.1\n2,0,1,0.2\n3,1,0,\n4,1,1,0.4\n5,0,0,0.5\n6,1,1,0.6\n";
        let loaded = parse(text, MissingPolicy::Lenient).unwrap();
        assert_eq!(loaded.sample.len(), 5);
        assert_eq!(loaded.dropped_count, 1);
        let err = parse(text, MissingPolicy::Strict).unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 3, .. }));
    }

    #[test]
    fn bad_indicator_and_covariate() {
        let err = parse("time,event,arm,x1\n1,2,0,0.1\n", MissingPolicy::Strict).unwrap_err();
        assert!(matches!(err, Error::NonBinaryIndicator { row: 1, ref column } if column == "event"));
        let err = parse("time,event,arm,x1\n1,1,3,0.1\n", MissingPolicy::Strict).unwrap_err();
        assert!(matches!(err, Error::NonBinaryIndicator { ref column, .. } if column == "arm"));
        let err = parse("time,event,arm,x1\n1,1,0,inf\n", MissingPolicy::Strict).unwrap_err();
        assert!(matches!(err, Error::NonFiniteCovariate { .. }));
    }

    #[test]
    fn missing_column_named() {
        let err = parse("time,status,arm,x1\n1,1,0,0.1\n", MissingPolicy::Strict).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "event"));
    }

    #[test]
    fn custom_schema_and_default_covariate_order() {
        let schema = CsvSchema {
            time_col: "T".into(),
            event_col: "D".into(),
            arm_col: "Z".into(),
            covariate_cols: Some(vec!["age".into(), "sbp".into()]),
        };
        let s = read_csv("Z,age,T,D,sbp\n1,70,5,1,140\n".as_bytes(), &schema, MissingPolicy::Strict)
            .unwrap()
            .sample;
        assert_eq!(s.observations()[0].covariates, vec![70.0, 140.0]);

        let s = parse("time,event,arm,x10,x2,x1\n1,1,0,10,2,1\n", MissingPolicy::Strict)
            .unwrap()
            .sample;
        assert_eq!(s.covariate_names().unwrap(), ["x1", "x2", "x10"]);
        assert_eq!(s.observations()[0].covariates, vec![1.0, 2.0, 10.0]);
    }

    fn sample_with_arms(arms: &[u8]) -> RightCensoredSample {
        let obs = arms
            .iter()
            .enumerate()
            .map(|(i, &a)| Observation {
                time: (i + 1) as f64,
                event: true,
                arm: Arm::from_indicator(a).unwrap(),
                covariates: vec![i as f64],
            })
            .collect();
        RightCensoredSample::new(obs, 1).unwrap()
    }

    #[test]
    fn split_partitions_in_order() {
        let split = split_arms(&sample_with_arms(&[0, 1, 0])).unwrap();
        assert_eq!(split.control.len(), 2);
        assert_eq!(split.treated.len(), 1);
        assert_eq!(split.control.times(), vec![1.0, 3.0]);
        split.require_both().unwrap();
    }

    #[test]
    fn split_reports_empty_arm() {
        let split = split_arms(&sample_with_arms(&[0, 0])).unwrap();
        assert!(split.treated.is_empty());
        assert!(matches!(split.require_both(), Err(Error::EmptyArm(Arm::Treated))));
        let empty = RightCensoredSample::new(vec![], 1).unwrap();
        assert!(matches!(split_arms(&empty), Err(Error::EmptyInput)));
    }

    #[test]
    fn standardize_gives_zero_mean_unit_variance() {
        let s = sample_with_arms(&[0, 1, 0, 1]).standardized();
        let xs: Vec<f64> = s.observations().iter().map(|o| o.covariates[0]).collect();
        let mean: f64 = xs.iter().sum::<f64>() / 4.0;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
}
