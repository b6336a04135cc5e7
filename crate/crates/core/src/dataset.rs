//! Lead/lag stopout prediction problems and their per-cohort datasets.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::featurize::{Cohort, FeatureId, FeatureMatrix, NUM_COVARIATES};
use crate::model::LearnerId;

/// Default prediction horizon: 14 weeks gives 91 (lead, lag) pairs.
pub const DEFAULT_HORIZON: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PredictionSpec {
    pub lead: u32,
    pub lag: u32,
    pub cohort: Cohort,
}

impl PredictionSpec {
    pub fn new(lead: u32, lag: u32, cohort: Cohort) -> Result<Self> {
        if lead == 0 || lag == 0 {
            return Err(Error::InvalidInput(
                "lead and lag must be at least 1".into(),
            ));
        }
        Ok(PredictionSpec { lead, lag, cohort })
    }

    /// Week whose stopout value is the label.
    pub fn target_week(&self) -> u32 {
        self.lag + self.lead
    }

    /// `lead{L}_lag{G}_{cohort}`, the stem shared by per-experiment files.
    pub fn file_stem(&self) -> String {
        format!("lead{}_lag{}_{}", self.lead, self.lag, self.cohort)
    }

    /// Parses a name containing `lead{L}_lag{G}_{cohort}`.
    pub fn parse_stem(stem: &str) -> Option<Self> {
        let rest = &stem[stem.find("lead")? + 4..];
        let (lead, rest) = rest.split_once("_lag")?;
        let (lag, cohort) = rest.split_once('_')?;
        let cohort = cohort.split('.').next()?;
        PredictionSpec::new(lead.parse().ok()?, lag.parse().ok()?, cohort.parse().ok()?).ok()
    }
}

impl fmt::Display for PredictionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lead={} lag={} cohort={}",
            self.lead, self.lag, self.cohort
        )
    }
}

/// All (lead, lag) pairs with `lead + lag <= horizon`, ordered by lag then lead.
pub fn enumerate_problems(horizon: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for lag in 1..horizon {
        for lead in 1..=horizon - lag {
            out.push((lead, lag));
        }
    }
    out
}

/// `xK@wW` name of flattened covariate `j` (week-major).
pub fn covariate_name(j: usize) -> String {
    let f = FeatureId::from_covariate_index(j % NUM_COVARIATES);
    format!("{}@w{}", f, j / NUM_COVARIATES + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDataset {
    pub spec: PredictionSpec,
    pub covariate_names: Vec<String>,
    /// N x (lag * 27), z-scored.
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub learner_ids: Vec<LearnerId>,
    /// Per-column (mean, std) used for scaling; std 0 marks a constant column.
    pub scaler: Vec<(f64, f64)>,
}

impl PredictionDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn num_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.covariate_names.clone();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, &label) in self.x.rows().into_iter().zip(&self.y) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.to_string());
            w.write_record(&rec)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("writing dataset: {e}")))?;
        Ok(())
    }

    /// Reads a dumped dataset. Values are taken as already scaled; learner ids
    /// are synthesized as row numbers since the dump does not carry them.
    pub fn read_csv<R: Read>(input: R, spec: PredictionSpec) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let p = header
            .len()
            .checked_sub(1)
            .filter(|_| header.last().map(String::as_str) == Some("label"));
        let p = p.ok_or_else(|| {
            Error::InvalidInput("dataset csv must end with a `label` column".into())
        })?;
        if p != spec.lag as usize * NUM_COVARIATES {
            return Err(Error::Shape(format!(
                "{p} covariates but lag {} needs {}",
                spec.lag,
                spec.lag as usize * NUM_COVARIATES
            )));
        }
        let mut data = Vec::new();
        let mut y = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for v in rec.iter().take(p) {
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad value {v:?}")))?;
                if !v.is_finite() {
                    return Err(Error::NonFinite("dataset csv"));
                }
                data.push(v);
            }
            match rec.get(p).map(str::trim) {
                Some("0") => y.push(0),
                Some("1") => y.push(1),
                other => return Err(Error::InvalidInput(format!("bad label {other:?}"))),
            }
        }
        let n = y.len();
        let x = Array2::from_shape_vec((n, p), data).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(PredictionDataset {
            spec,
            covariate_names: header[..p].to_vec(),
            x,
            y,
            learner_ids: (0..n)
                .map(|i| LearnerId::new(format!("row{i}")).expect("non-empty"))
                .collect(),
            scaler: vec![(0.0, 1.0); p],
        })
    }
}

/// Builds the dataset for one experiment, or `Ok(None)` when no learner of the
/// cohort is still active through the lag weeks.
///
/// A learner is eligible when it belongs to `spec.cohort` and has `x1 = 1` in
/// every lag week. Covariates are weeks `1..=lag` flattened week-major; the
/// label is `x1` at the target week. Columns are z-scored with the dataset's
/// own mean and population std, constant columns become zero.
pub fn build_dataset(
    spec: PredictionSpec,
    features: &FeatureMatrix,
    cohorts: &BTreeMap<LearnerId, Cohort>,
) -> Result<Option<PredictionDataset>> {
    if spec.target_week() > features.num_weeks() {
        return Err(Error::Shape(format!(
            "target week {} beyond the {} featurized weeks",
            spec.target_week(),
            features.num_weeks()
        )));
    }
    let lag = spec.lag as usize;
    let p = lag * NUM_COVARIATES;
    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut ids = Vec::new();
    for (l, id) in features.learners().iter().enumerate() {
        if cohorts.get(id) != Some(&spec.cohort) {
            continue;
        }
        let rows = features.learner_rows(l);
        if rows[..lag].iter().any(|r| r.x1 != 1) {
            continue;
        }
        for r in &rows[..lag] {
            data.extend_from_slice(&r.values);
        }
        y.push(rows[spec.target_week() as usize - 1].x1);
        ids.push(id.clone());
    }
    if y.is_empty() {
        return Ok(None);
    }
    let n = y.len();
    let mut x = Array2::from_shape_vec((n, p), data).map_err(|e| Error::Shape(e.to_string()))?;
    let scaler = standardize_columns(&mut x);
    Ok(Some(PredictionDataset {
        spec,
        covariate_names: (0..p).map(covariate_name).collect(),
        x,
        y,
        learner_ids: ids,
        scaler,
    }))
}

/// In-place z-scoring; returns the (mean, std) per column.
pub fn standardize_columns(x: &mut Array2<f64>) -> Vec<(f64, f64)> {
    let n = x.nrows() as f64;
    x.columns_mut()
        .into_iter()
        .map(|mut col| {
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                col.fill(0.0);
                return (first, 0.0);
            }
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            col.mapv_inplace(|v| (v - mean) / std);
            (mean, std)
        })
        .collect()
}
