//! Data-driven cross-checks for the closed-form F1: slope features, a linear
//! soft-margin classifier under stratified k-fold cross-validation, and a
//! Monte-Carlo likelihood-ratio oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatsim::{
    derive_seed, generate_trace, mean_curve, ContactConditions, MaterialSample, SensorParams, TemperatureTrace,
};
use crate::matdb::sample_interval;
use crate::perfmodel::{EffusivityGrid, F1Matrix, MatrixConditions, MatrixSource};

pub const DEFAULT_SLOPE_WINDOW: usize = 11;
pub const DEFAULT_FOLDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    A,
    /// Treated as the positive class when scoring.
    B,
}

/// Raw temperatures followed by local slopes (°C/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<Class>,
}

/// Least-squares slope at every sample over a centred window of
/// `slope_window` samples, truncated at the ends of the trace.
pub fn local_slopes(times: &[f64], temps: &[f64], slope_window: usize) -> Result<Vec<f64>> {
    let n = temps.len();
    if slope_window < 3 || slope_window.is_multiple_of(2) {
        return Err(Error::domain(format!("slope window must be odd and >= 3, got {slope_window}")));
    }
    if slope_window > n {
        return Err(Error::domain(format!(
            "slope window {slope_window} exceeds trace length {n}"
        )));
    }
    let h = slope_window / 2;
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            let k = (hi - lo + 1) as f64;
            let tm = times[lo..=hi].iter().sum::<f64>() / k;
            let ym = temps[lo..=hi].iter().sum::<f64>() / k;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for j in lo..=hi {
                let dt = times[j] - tm;
                sxy += dt * (temps[j] - ym);
                sxx += dt * dt;
            }
            sxy / sxx
        })
        .collect())
}

pub fn extract_features(trace: &TemperatureTrace, slope_window: usize) -> Result<FeatureVector> {
    let slopes = local_slopes(trace.times(), trace.temps(), slope_window)?;
    let mut values = Vec::with_capacity(2 * trace.len());
    values.extend_from_slice(trace.temps());
    values.extend(slopes);
    Ok(FeatureVector { values, label: None })
}

/// Hyperparameters of the linear classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Soft-margin constant; the L2 weight is `1/(n·C)`.
    pub c: f64,
    pub epochs: usize,
    pub slope_window: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 500,
            slope_window: DEFAULT_SLOPE_WINDOW,
        }
    }
}

impl ClassifierConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::domain(format!("C must be positive, got {}", self.c)));
        }
        if self.epochs == 0 {
            return Err(Error::domain("epochs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVResult {
    /// Mean of `per_fold`.
    pub f1: f64,
    pub folds: usize,
    pub per_fold: Vec<f64>,
}

/// Linear model `sign(w·x + b)` on standardized inputs.
struct LinearModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    w: Vec<f64>,
    b: f64,
}

impl LinearModel {
    fn decision(&self, x: &[f64]) -> f64 {
        let mut s = self.b;
        for (((xk, wk), mk), sk) in x.iter().zip(&self.w).zip(&self.mean).zip(&self.scale) {
            s += wk * (xk - mk) / sk;
        }
        s
    }
}

/// Full-batch subgradient descent on
/// `mean(max(0, 1 - y(w·x + b))) + λ/2 |w|²` with step `1/(λ t)`, starting
/// from zero. The bias is unpenalized and set after every weight step to the
/// exact minimizer of the hinge loss for the current weights.
fn train(xs: &[&[f64]], ys: &[f64], cfg: &ClassifierConfig) -> LinearModel {
    let m = xs.len();
    let d = xs[0].len();
    let mf = m as f64;
    let mut mean = vec![0.0; d];
    for x in xs {
        for k in 0..d {
            mean[k] += x[k];
        }
    }
    mean.iter_mut().for_each(|v| *v /= mf);
    let mut scale = vec![0.0; d];
    for x in xs {
        for k in 0..d {
            scale[k] += (x[k] - mean[k]).powi(2);
        }
    }
    for s in &mut scale {
        *s = (*s / mf).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let z: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| (0..d).map(|k| (x[k] - mean[k]) / scale[k]).collect())
        .collect();

    let lambda = 1.0 / (mf * cfg.c);
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut g = vec![0.0; d];
    let mut scores = vec![0.0; m];
    for epoch in 1..=cfg.epochs {
        let eta = 1.0 / (lambda * epoch as f64);
        g.iter_mut().for_each(|v| *v = 0.0);
        // `scores` holds w·z for the current weights
        for ((zi, &yi), &si) in z.iter().zip(ys).zip(&scores) {
            if yi * (si + b) < 1.0 {
                for k in 0..d {
                    g[k] += yi * zi[k];
                }
            }
        }
        let shrink = 1.0 - eta * lambda;
        let step = eta / mf;
        for k in 0..d {
            w[k] = shrink * w[k] + step * g[k];
        }
        let norm = dot(&w, &w).sqrt();
        if norm > radius {
            let f = radius / norm;
            w.iter_mut().for_each(|v| *v *= f);
        }
        for (s, zi) in scores.iter_mut().zip(&z) {
            *s = dot(&w, zi);
        }
        b = hinge_optimal_bias(&scores, ys);
    }
    LinearModel { mean, scale, w, b }
}

/// Minimizer of `Σ max(0, 1 - y_i (s_i + b))` over `b`. The loss is convex
/// and piecewise linear with kinks at `y_i - s_i`; when the minimum is flat
/// the middle of the flat stretch is returned, which keeps the rule
/// symmetric under a label swap.
fn hinge_optimal_bias(scores: &[f64], ys: &[f64]) -> f64 {
    let loss = |b: f64| -> f64 {
        scores
            .iter()
            .zip(ys)
            .map(|(s, y)| (1.0 - y * (s + b)).max(0.0))
            .sum()
    };
    let mut kinks: Vec<f64> = scores.iter().zip(ys).map(|(s, y)| y - s).collect();
    kinks.sort_by(f64::total_cmp);
    let losses: Vec<f64> = kinks.iter().map(|&b| loss(b)).collect();
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * best.max(1.0);
    let first = losses.iter().position(|&l| l <= best + tol).unwrap_or(0);
    let last = losses.iter().rposition(|&l| l <= best + tol).unwrap_or(first);
    0.5 * (kinks[first] + kinks[last])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn f1_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Cross-validated F1 on precomputed feature rows.
fn cross_validate(a: &[Vec<f64>], b: &[Vec<f64>], folds: usize, cfg: &ClassifierConfig) -> Result<CVResult> {
    cfg.validate()?;
    if folds < 2 {
        return Err(Error::Stratification(format!("need at least 2 folds, got {folds}")));
    }
    if a.len() < folds || b.len() < folds {
        return Err(Error::Stratification(format!(
            "{folds} folds need at least {folds} traces per class, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|x| x.len() != d) {
        return Err(Error::Dimension("all traces must have the same length".into()));
    }
    let mut per_fold = Vec::with_capacity(folds);
    for f in 0..folds {
        let mut xs: Vec<&[f64]> = Vec::new();
        let mut ys = Vec::new();
        for (_, x) in a.iter().enumerate().filter(|(k, _)| k % folds != f) {
            xs.push(x);
            ys.push(-1.0);
        }
        for (_, x) in b.iter().enumerate().filter(|(k, _)| k % folds != f) {
            xs.push(x);
            ys.push(1.0);
        }
        let model = train(&xs, &ys, cfg);
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (_, x) in a.iter().enumerate().filter(|(k, _)| k % folds == f) {
            fp += usize::from(model.decision(x) >= 0.0);
        }
        for (_, x) in b.iter().enumerate().filter(|(k, _)| k % folds == f) {
            if model.decision(x) >= 0.0 {
                tp += 1;
            } else {
                fn_ += 1;
            }
        }
        per_fold.push(f1_score(tp, fp, fn_));
    }
    Ok(CVResult {
        f1: per_fold.iter().sum::<f64>() / folds as f64,
        folds,
        per_fold,
    })
}

fn features_of(traces: &[TemperatureTrace], window: usize) -> Result<Vec<Vec<f64>>> {
    traces.iter().map(|t| extract_features(t, window).map(|f| f.values)).collect()
}

/// Stratified k-fold F1 of the linear classifier separating `traces_a` from
/// `traces_b`. Trace `k` of each class goes to fold `k % folds`.
pub fn train_eval_pair(
    traces_a: &[TemperatureTrace],
    traces_b: &[TemperatureTrace],
    folds: usize,
    cfg: &ClassifierConfig,
) -> Result<CVResult> {
    if traces_a.is_empty() || traces_b.is_empty() {
        return Err(Error::Stratification("both classes need traces".into()));
    }
    let a = features_of(traces_a, cfg.slope_window)?;
    let b = features_of(traces_b, cfg.slope_window)?;
    cross_validate(&a, &b, folds, cfg)
}

const ORACLE_CHUNK: usize = 1024;

/// Brute-force F1 of the likelihood-ratio classifier: draws `n_pairs`
/// traces from each class, labels every trace by the nearer mean curve
/// (spherical covariance), and scores class 2 as positive. Exact distance
/// ties are broken by a fair coin.
pub fn mc_oracle_f1(
    sensor: &SensorParams,
    e1: f64,
    e2: f64,
    cond: &ContactConditions,
    sigma: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if n_pairs < 1000 {
        return Err(Error::domain(format!("n_pairs must be at least 1000, got {n_pairs}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be non-negative, got {sigma}")));
    }
    sensor.validate_thermal()?;
    cond.validate()?;
    let (m1, m2) = (MaterialSample::new(e1)?, MaterialSample::new(e2)?);
    let n = sensor.samples_in(cond.t_contact);
    if n == 0 {
        return Err(Error::EmptyTrace {
            t_contact: cond.t_contact,
            sample_rate: sensor.sample_rate,
        });
    }
    let mu1 = mean_curve(sensor, &m1, cond, n, 0.0);
    let mu2 = mean_curve(sensor, &m2, cond, n, 0.0);

    let chunks = n_pairs.div_ceil(ORACLE_CHUNK);
    let (tp, fp, fn_) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = ORACLE_CHUNK.min(n_pairs - c * ORACLE_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[c as u64]));
            let mut x = vec![0.0; n];
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for _ in 0..count {
                for (truth_is_2, mu) in [(false, &mu1), (true, &mu2)] {
                    for (xi, m) in x.iter_mut().zip(mu.iter()) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *xi = m + sigma * z;
                    }
                    let d1: f64 = x.iter().zip(&mu1).map(|(a, b)| (a - b) * (a - b)).sum();
                    let d2: f64 = x.iter().zip(&mu2).map(|(a, b)| (a - b) * (a - b)).sum();
                    let says_2 = if d2 == d1 { rng.random::<bool>() } else { d2 < d1 };
                    match (truth_is_2, says_2) {
                        (true, true) => tp += 1,
                        (false, true) => fp += 1,
                        (true, false) => fn_ += 1,
                        (false, false) => {}
                    }
                }
            }
            (tp, fp, fn_)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(f1_score(tp, fp, fn_))
}

/// Exact F1 of the same likelihood-ratio classifier:
/// `Φ(|μ1 - μ2| / (2σ))`, with the distance taken over the sampled curves.
pub fn bayes_f1_pair(sensor: &SensorParams, e1: f64, e2: f64, cond: &ContactConditions, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    sensor.validate_thermal()?;
    cond.validate()?;
    let (m1, m2) = (MaterialSample::new(e1)?, MaterialSample::new(e2)?);
    let n = sensor.samples_in(cond.t_contact);
    let mu1 = mean_curve(sensor, &m1, cond, n, 0.0);
    let mu2 = mean_curve(sensor, &m2, cond, n, 0.0);
    let dist = mu1.iter().zip(&mu2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    // Φ(z) = erfc(-z/√2)/2
    Ok(0.5 * crate::specfun::erfc_finite(-dist / (2.0 * sigma) / std::f64::consts::SQRT_2))
}

/// Settings for [`empirical_matrix_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    pub trials_per_interval: usize,
    pub folds: usize,
    pub seed: u64,
    pub classifier: ClassifierConfig,
}

/// Classifier F1 for every pair of grid intervals, `trials_per_interval`
/// traces per interval at effusivities drawn uniformly inside it.
pub fn empirical_matrix(
    sensor: &SensorParams,
    grid: &EffusivityGrid,
    cond: &ContactConditions,
    sigma: f64,
    trials_per_interval: usize,
    seed: u64,
) -> Result<F1Matrix> {
    let cfg = EmpiricalConfig {
        trials_per_interval,
        folds: DEFAULT_FOLDS,
        seed,
        classifier: ClassifierConfig::default(),
    };
    empirical_matrix_with(sensor, grid, cond, sigma, &cfg)
}

/// Off-diagonal cells pair the two intervals' trace sets. Diagonal cells
/// pair an interval's set with a second, independently drawn set from the
/// same interval.
pub fn empirical_matrix_with(
    sensor: &SensorParams,
    grid: &EffusivityGrid,
    cond: &ContactConditions,
    sigma: f64,
    cfg: &EmpiricalConfig,
) -> Result<F1Matrix> {
    cfg.classifier.validate()?;
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be non-negative, got {sigma}")));
    }
    if cfg.trials_per_interval < cfg.folds {
        return Err(Error::Stratification(format!(
            "{} trials per interval cannot fill {} folds",
            cfg.trials_per_interval, cfg.folds
        )));
    }
    let noisy = SensorParams {
        noise_sigma: sigma,
        ..*sensor
    };
    let batch = |batch: u64| -> Result<Vec<Vec<Vec<f64>>>> {
        (0..grid.n_intervals())
            .into_par_iter()
            .map(|i| {
                let trials = sample_interval(grid, i, cfg.trials_per_interval, derive_seed(cfg.seed, &[batch]));
                let traces = trials
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let seed = derive_seed(cfg.seed, &[batch, i as u64, k as u64]);
                        generate_trace(&noisy, &MaterialSample::new(s.effusivity)?, cond, seed)
                    })
                    .collect::<Result<Vec<_>>>()?;
                features_of(&traces, cfg.classifier.slope_window)
            })
            .collect()
    };
    let primary = batch(0)?;
    let twin = batch(1)?;
    let conditions = MatrixConditions {
        sensor: noisy,
        contact: *cond,
        sigma,
    };
    F1Matrix::from_upper(MatrixSource::Empirical, *grid, conditions, |i, j| {
        let other = if i == j { &twin[i] } else { &primary[j] };
        Ok(cross_validate(&primary[i], other, cfg.folds, &cfg.classifier)?.f1)
    })
}
