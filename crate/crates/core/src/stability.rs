//! Randomized L1 logistic regression (stability selection) and week-invariant
//! feature importance.
//!
//! The solver minimizes
//!
//! ```text
//! (1/N) Σ log(1 + exp(-ỹ_i (w·x_i + b))) + Σ_j β_j |w_j|,   ỹ ∈ {-1, +1}
//! ```
//!
//! with an unpenalized intercept, by accelerated proximal gradient with
//! backtracking and gradient-based momentum restart. It stops once the
//! subgradient optimality conditions hold to `tol`.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{covariate_name, PredictionDataset, PredictionSpec};
use crate::error::{Error, Result};
use crate::featurize::{FeatureId, NUM_COVARIATES};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-7,
            max_iter: 20_000,
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn signed(y: u8) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

fn loss_from_margins(eta: &Array1<f64>, y: &[u8]) -> f64 {
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| softplus(-signed(yi) * e))
        .sum::<f64>()
        / y.len() as f64
}

/// Residuals σ(η) − y scaled by 1/N; the gradient is Xᵀr (and Σr for the intercept).
fn scaled_residuals(eta: &Array1<f64>, y: &[u8]) -> Array1<f64> {
    let n = y.len() as f64;
    Array1::from_iter(
        eta.iter()
            .zip(y)
            .map(|(&e, &yi)| (sigmoid(e) - f64::from(yi)) / n),
    )
}

/// Mean logistic loss of the model `(w, b)`.
pub fn smooth_loss(x: ArrayView2<f64>, y: &[u8], w: ArrayView1<f64>, b: f64) -> f64 {
    let eta = x.dot(&w) + b;
    loss_from_margins(&eta, y)
}

/// Gradient of [`smooth_loss`] with respect to `(w, b)`.
pub fn smooth_gradient(
    x: ArrayView2<f64>,
    y: &[u8],
    w: ArrayView1<f64>,
    b: f64,
) -> (Array1<f64>, f64) {
    let eta = x.dot(&w) + b;
    let r = scaled_residuals(&eta, y);
    (x.t().dot(&r), r.sum())
}

/// Full penalized objective.
pub fn objective(x: ArrayView2<f64>, y: &[u8], penalties: &[f64], model: &LogRegModel) -> f64 {
    smooth_loss(x, y, model.weights.view(), model.intercept)
        + model
            .weights
            .iter()
            .zip(penalties)
            .map(|(w, b)| b * w.abs())
            .sum::<f64>()
}

/// Largest violation of the optimality conditions at `model`:
/// `|g_j| - β_j` where `w_j = 0`, `|g_j + β_j sign(w_j)|` elsewhere, and `|g_b|`.
pub fn certificate_violation(
    x: ArrayView2<f64>,
    y: &[u8],
    penalties: &[f64],
    model: &LogRegModel,
) -> f64 {
    let (g, gb) = smooth_gradient(x, y, model.weights.view(), model.intercept);
    violation(&g, gb, &model.weights, penalties)
}

fn violation(g: &Array1<f64>, gb: f64, w: &Array1<f64>, penalties: &[f64]) -> f64 {
    let mut worst = gb.abs();
    for ((&gj, &wj), &bj) in g.iter().zip(w).zip(penalties) {
        let v = if wj == 0.0 {
            gj.abs() - bj
        } else {
            (gj + bj * wj.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Smallest uniform penalty for which the all-zero weight vector (with the
/// intercept fitted) is optimal: `max_j |(1/N) Σ (y_i − ȳ) x_ij|`.
pub fn null_gradient_bound(x: ArrayView2<f64>, y: &[u8]) -> f64 {
    let n = y.len() as f64;
    let ybar = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let r = Array1::from_iter(y.iter().map(|&v| (f64::from(v) - ybar) / n));
    x.t().dot(&r).iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn check_inputs(x: ArrayView2<f64>, y: &[u8], penalties: &[f64]) -> Result<()> {
    if x.nrows() != y.len() || x.ncols() != penalties.len() {
        return Err(Error::Shape(format!(
            "X is {}x{}, y has {}, penalties has {}",
            x.nrows(),
            x.ncols(),
            y.len(),
            penalties.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("no observations".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    if penalties.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(Error::NonFinite("penalties"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

/// Estimate of λ_max(XᵀX/N) for the design with an intercept column appended.
fn lipschitz_estimate(x: ArrayView2<f64>) -> f64 {
    let (n, p) = x.dim();
    let mut v = Array1::from_elem(p + 1, 1.0 / ((p + 1) as f64).sqrt());
    let mut est = 1.0;
    for _ in 0..30 {
        let xv = x.dot(&v.slice(ndarray::s![..p])) + v[p];
        let head = x.t().dot(&xv);
        let next = Array1::from_iter(head.iter().copied().chain([xv.sum()]));
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            break;
        }
        est = norm / n as f64;
        v = next / norm;
    }
    // logistic curvature is at most 1/4
    est / 4.0
}

/// Weighted-L1 logistic regression; see the module docs for the objective.
pub fn fit_weighted_l1_logreg(
    x: ArrayView2<f64>,
    y: &[u8],
    penalties: &[f64],
    opts: &SolverOptions,
) -> Result<LogRegModel> {
    check_inputs(x, y, penalties)?;
    let p = x.ncols();
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let neg = y.len() as f64 - pos;

    let mut w = Array1::<f64>::zeros(p);
    let mut b = (pos / neg).ln();
    let mut eta = Array1::from_elem(y.len(), b);
    let mut w_prev = w.clone();
    let mut b_prev = b;
    let mut eta_prev = eta.clone();
    let mut step = 1.0 / lipschitz_estimate(x).max(1e-12);
    let mut momentum_k = 1.0f64;

    let prox = |z: f64, thresh: f64| {
        if z > thresh {
            z - thresh
        } else if z < -thresh {
            z + thresh
        } else {
            0.0
        }
    };

    for iter in 1..=opts.max_iter {
        // Extrapolated point v = θ + m (θ − θ_prev); η is affine so it extrapolates too.
        let m = (momentum_k - 1.0) / (momentum_k + 2.0);
        let wv = &w + &((&w - &w_prev) * m);
        let bv = b + m * (b - b_prev);
        let eta_v = &eta + &((&eta - &eta_prev) * m);
        let fv = loss_from_margins(&eta_v, y);
        let r = scaled_residuals(&eta_v, y);
        let gv = x.t().dot(&r);
        let gbv = r.sum();

        let (w_new, b_new, eta_new) = loop {
            let w_new = Array1::from_iter(
                wv.iter()
                    .zip(&gv)
                    .zip(penalties)
                    .map(|((&wj, &gj), &bj)| prox(wj - step * gj, step * bj)),
            );
            let b_new = bv - step * gbv;
            let eta_new = x.dot(&w_new) + b_new;
            let dw = &w_new - &wv;
            let db = b_new - bv;
            let quad = fv + gv.dot(&dw) + gbv * db + (dw.dot(&dw) + db * db) / (2.0 * step);
            if loss_from_margins(&eta_new, y) <= quad + 1e-15 * quad.abs() || step < 1e-20 {
                break (w_new, b_new, eta_new);
            }
            step *= 0.5;
        };

        // Restart momentum when the update points against the extrapolation.
        let restart = (&wv - &w_new).dot(&(&w_new - &w)) + (bv - b_new) * (b_new - b) > 0.0;
        w_prev = std::mem::replace(&mut w, w_new);
        b_prev = std::mem::replace(&mut b, b_new);
        eta_prev = std::mem::replace(&mut eta, eta_new);
        momentum_k = if restart { 1.0 } else { momentum_k + 1.0 };

        if iter % 5 == 0 || iter == opts.max_iter {
            let r = scaled_residuals(&eta, y);
            let g = x.t().dot(&r);
            if violation(&g, r.sum(), &w, penalties) <= opts.tol {
                return Ok(LogRegModel {
                    weights: w,
                    intercept: b,
                    iterations: iter,
                    converged: true,
                });
            }
        }
    }
    log::warn!(
        "weighted L1 logistic regression hit max_iter={} before certifying",
        opts.max_iter
    );
    Ok(LogRegModel {
        weights: w,
        intercept: b,
        iterations: opts.max_iter,
        converged: false,
    })
}

/// How the base penalty λ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    Fixed(f64),
    /// Fraction of [`null_gradient_bound`] on the full dataset.
    ScaledMax(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlrConfig {
    pub n_trials: usize,
    pub subsample_fraction: f64,
    pub lambda: Lambda,
    pub alpha: f64,
    pub threshold: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RlrConfig {
    fn default() -> Self {
        RlrConfig {
            n_trials: 200,
            subsample_fraction: 0.75,
            lambda: Lambda::ScaledMax(0.1),
            alpha: 0.5,
            threshold: 0.25,
            seed: 0,
            tol: 1e-7,
            max_iter: 20_000,
        }
    }
}

impl RlrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidInput("n_trials must be positive".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::InvalidInput(
                "subsample_fraction must be in (0, 1]".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidInput("alpha must be in (0, 1]".into()));
        }
        let lambda_ok = match self.lambda {
            Lambda::Fixed(l) | Lambda::ScaledMax(l) => l > 0.0 && l.is_finite(),
        };
        if !lambda_ok {
            return Err(Error::InvalidInput("lambda must be positive".into()));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    /// Base penalty for a dataset.
    pub fn resolve_lambda(&self, x: ArrayView2<f64>, y: &[u8]) -> f64 {
        match self.lambda {
            Lambda::Fixed(l) => l,
            Lambda::ScaledMax(f) => f * null_gradient_bound(x, y),
        }
    }
}

/// Maximum subsample redraws for a trial before it counts as all-zero.
pub const MAX_REDRAWS: usize = 10;

/// Independent RNG stream for trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws a two-class subsample of `size` rows (sorted), redrawing up to
/// [`MAX_REDRAWS`] times.
pub fn draw_subsample(rng: &mut ChaCha8Rng, y: &[u8], size: usize) -> Option<Vec<usize>> {
    for _ in 0..=MAX_REDRAWS {
        let mut rows = index::sample(rng, y.len(), size).into_vec();
        rows.sort_unstable();
        let pos = rows.iter().filter(|&&i| y[i] == 1).count();
        if pos > 0 && pos < rows.len() {
            return Some(rows);
        }
    }
    None
}

pub fn select_rows(x: ArrayView2<f64>, y: &[u8], rows: &[usize]) -> (Array2<f64>, Vec<u8>) {
    (
        x.select(Axis(0), rows),
        rows.iter().map(|&i| y[i]).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionProfile {
    pub spec: PredictionSpec,
    pub covariate_names: Vec<String>,
    pub counts: Vec<u32>,
    pub probs: Vec<f64>,
    pub n_trials: usize,
    /// Trials whose subsample never had both classes.
    pub failed_trials: usize,
    /// Fits that stopped at max_iter.
    pub unconverged_fits: usize,
    pub lambda: f64,
}

impl SelectionProfile {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["covariate", "probability"])?;
        for (name, p) in self.covariate_names.iter().zip(&self.probs) {
            w.write_record([name.as_str(), &p.to_string()])?;
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("writing selection profile: {e}")))?;
        Ok(())
    }

    /// Reads a profile written by [`SelectionProfile::write_csv`]; counts are
    /// not stored and are reconstructed as `round(p * n_trials)`.
    pub fn read_csv<R: Read>(input: R, spec: PredictionSpec, n_trials: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut names = Vec::new();
        let mut probs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let p: f64 = rec
                .get(1)
                .and_then(|v| v.trim().parse().ok())
                .filter(|p: &f64| (0.0..=1.0).contains(p))
                .ok_or_else(|| {
                    Error::InvalidInput("selection probability must be in [0, 1]".into())
                })?;
            names.push(rec[0].to_string());
            probs.push(p);
        }
        if probs.len() != spec.lag as usize * NUM_COVARIATES {
            return Err(Error::Shape(format!(
                "{} probabilities for lag {}",
                probs.len(),
                spec.lag
            )));
        }
        Ok(SelectionProfile {
            spec,
            covariate_names: names,
            counts: probs
                .iter()
                .map(|p| (p * n_trials as f64).round() as u32)
                .collect(),
            probs,
            n_trials,
            failed_trials: 0,
            unconverged_fits: 0,
            lambda: f64::NAN,
        })
    }
}

struct TrialOutcome {
    selected: Vec<bool>,
    failed: bool,
    converged: bool,
}

fn run_trial(
    dataset: &PredictionDataset,
    cfg: &RlrConfig,
    lambda: f64,
    size: usize,
    trial: u64,
) -> Result<TrialOutcome> {
    let p = dataset.num_covariates();
    let mut rng = trial_rng(cfg.seed, trial);
    let Some(rows) = draw_subsample(&mut rng, &dataset.y, size) else {
        log::warn!(
            "{}: trial {trial} never drew both classes; counted as no selection",
            dataset.spec
        );
        return Ok(TrialOutcome {
            selected: vec![false; p],
            failed: true,
            converged: true,
        });
    };
    let upper = lambda / cfg.alpha;
    let penalties: Vec<f64> = (0..p).map(|_| rng.gen_range(lambda..=upper)).collect();
    let (xs, ys) = select_rows(dataset.x.view(), &dataset.y, &rows);
    let model = fit_weighted_l1_logreg(xs.view(), &ys, &penalties, &cfg.solver())?;
    Ok(TrialOutcome {
        selected: model
            .weights
            .iter()
            .map(|w| w.abs() >= cfg.threshold)
            .collect(),
        failed: false,
        converged: model.converged,
    })
}

/// Stability selection over `cfg.n_trials` randomized subsampled fits.
/// Trials run in parallel; each draws from its own counter-based stream so
/// the result depends only on `cfg.seed`.
pub fn rlr_run(dataset: &PredictionDataset, cfg: &RlrConfig) -> Result<SelectionProfile> {
    cfg.validate()?;
    if dataset.is_empty() || !dataset.has_both_classes() {
        return Err(Error::DegenerateLabels);
    }
    let lambda = cfg.resolve_lambda(dataset.x.view(), &dataset.y);
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "{}: resolved lambda {lambda} is not positive",
            dataset.spec
        )));
    }
    let size = ((cfg.subsample_fraction * dataset.len() as f64).floor() as usize).max(2);
    let outcomes = (0..cfg.n_trials as u64)
        .into_par_iter()
        .map(|t| run_trial(dataset, cfg, lambda, size, t))
        .collect::<Result<Vec<_>>>()?;

    let p = dataset.num_covariates();
    let mut counts = vec![0u32; p];
    for o in &outcomes {
        for (c, &s) in counts.iter_mut().zip(&o.selected) {
            *c += u32::from(s);
        }
    }
    Ok(SelectionProfile {
        spec: dataset.spec,
        covariate_names: dataset.covariate_names.clone(),
        probs: counts
            .iter()
            .map(|&c| f64::from(c) / cfg.n_trials as f64)
            .collect(),
        counts,
        n_trials: cfg.n_trials,
        failed_trials: outcomes.iter().filter(|o| o.failed).count(),
        unconverged_fits: outcomes.iter().filter(|o| !o.converged).count(),
        lambda,
    })
}

/// Per-experiment relative importance: lag-averaged selection probability per
/// feature, normalized to sum to one (uniform when nothing was selected).
pub fn experiment_importance(profile: &SelectionProfile) -> Result<[f64; NUM_COVARIATES]> {
    let lag = profile.spec.lag as usize;
    if profile.probs.len() != lag * NUM_COVARIATES {
        return Err(Error::Shape(format!(
            "{}: {} probabilities, expected {}",
            profile.spec,
            profile.probs.len(),
            lag * NUM_COVARIATES
        )));
    }
    let mut imp = [0.0; NUM_COVARIATES];
    for (f, slot) in imp.iter_mut().enumerate() {
        *slot = (0..lag)
            .map(|w| profile.probs[f + NUM_COVARIATES * w])
            .sum::<f64>()
            / lag as f64;
    }
    let total: f64 = imp.iter().sum();
    if total == 0.0 {
        return Ok([1.0 / NUM_COVARIATES as f64; NUM_COVARIATES]);
    }
    Ok(imp.map(|v| v / total))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    pub weights: [f64; NUM_COVARIATES],
    pub experiments: Vec<(PredictionSpec, [f64; NUM_COVARIATES])>,
}

impl ImportanceReport {
    pub fn n_experiments(&self) -> usize {
        self.experiments.len()
    }

    /// Features by weight descending, ties by feature number ascending.
    pub fn ranked(&self) -> Vec<(FeatureId, f64)> {
        rank_features(&self.weights)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_importance_csv(&self.weights, out)
    }
}

pub fn rank_features(weights: &[f64; NUM_COVARIATES]) -> Vec<(FeatureId, f64)> {
    let mut ranked: Vec<(FeatureId, f64)> = FeatureId::COVARIATES
        .iter()
        .copied()
        .zip(weights.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.number().cmp(&b.0.number())));
    ranked
}

pub fn write_importance_csv<W: Write>(weights: &[f64; NUM_COVARIATES], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "weight", "rank"])?;
    for (rank, (f, weight)) in rank_features(weights).into_iter().enumerate() {
        w.write_record([f.name(), weight.to_string(), (rank + 1).to_string()])?;
    }
    w.flush()
        .map_err(|e| Error::InvalidInput(format!("writing importance: {e}")))?;
    Ok(())
}

/// Reads `feature,weight[,rank]` rows covering all 27 covariates.
pub fn read_importance_csv<R: Read>(input: R) -> Result<[f64; NUM_COVARIATES]> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut weights = [f64::NAN; NUM_COVARIATES];
    for rec in rdr.records() {
        let rec = rec?;
        let f: FeatureId = rec.get(0).unwrap_or("").trim().parse()?;
        let i = f
            .covariate_index()
            .ok_or_else(|| Error::InvalidInput("x1 is not a covariate".into()))?;
        let w: f64 = rec
            .get(1)
            .and_then(|v| v.trim().parse().ok())
            .filter(|w: &f64| w.is_finite() && *w >= 0.0)
            .ok_or_else(|| Error::InvalidInput(format!("bad weight for {f}")))?;
        if !weights[i].is_nan() {
            return Err(Error::InvalidInput(format!("duplicate row for {f}")));
        }
        weights[i] = w;
    }
    if weights.iter().any(|w| w.is_nan()) {
        return Err(Error::InvalidInput(
            "importance file must list all 27 features".into(),
        ));
    }
    Ok(weights)
}

/// Aggregates one cohort's selection profiles into 27 weights summing to one.
/// Experiments are combined in canonical (lag, lead) order, so the result does
/// not depend on the order they are passed in. With no experiments the
/// weights are uniform.
pub fn week_invariant_importance(profiles: &[SelectionProfile]) -> Result<ImportanceReport> {
    let mut experiments = profiles
        .iter()
        .map(|p| Ok((p.spec, experiment_importance(p)?)))
        .collect::<Result<Vec<_>>>()?;
    experiments.sort_by(|(sa, ra), (sb, rb)| {
        (sa.lag, sa.lead, sa.cohort)
            .cmp(&(sb.lag, sb.lead, sb.cohort))
            .then_with(|| {
                ra.iter()
                    .zip(rb)
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    if experiments.is_empty() {
        return Ok(ImportanceReport {
            weights: [1.0 / NUM_COVARIATES as f64; NUM_COVARIATES],
            experiments,
        });
    }
    let mut mean = [0.0; NUM_COVARIATES];
    for (_, rel) in &experiments {
        for (m, r) in mean.iter_mut().zip(rel) {
            *m += r;
        }
    }
    let n = experiments.len() as f64;
    let mean = mean.map(|m| m / n);
    let total: f64 = mean.iter().sum();
    Ok(ImportanceReport {
        weights: mean.map(|m| m / total),
        experiments,
    })
}

/// Covariate names for `lag` weeks.
pub fn covariate_names(lag: u32) -> Vec<String> {
    (0..lag as usize * NUM_COVARIATES)
        .map(covariate_name)
        .collect()
}
