//! Bounded least-squares identification of object effusivity, contact-time
//! offset and (optionally) sensor constants from recorded traces.
//!
//! The optimizer works in `ln e` and `ln α` so that one step size suits the
//! whole physical range; the offset is optimized as is.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatsim::{SensorParams, TemperatureTrace};

/// Search box and stopping rules for [`fit_material`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub e_bounds: (f64, f64),
    /// Seconds added to every sample time before evaluating the model.
    pub offset_bounds: (f64, f64),
    /// Also fit `e_sens` and `alpha_sens`.
    pub fit_sensor_params: bool,
    pub e_sens_bounds: (f64, f64),
    pub alpha_sens_bounds: (f64, f64),
    /// Stop once an accepted step changes the SSE by less than this
    /// fraction of its value.
    pub convergence_tol: f64,
    pub max_iters: usize,
    pub starts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            e_bounds: (30.5, 40000.0),
            offset_bounds: (-1.0, 1.0),
            fit_sensor_params: false,
            e_sens_bounds: (300.0, 3000.0),
            alpha_sens_bounds: (1e-10, 1e-8),
            convergence_tol: 1e-10,
            max_iters: 500,
            starts: 5,
        }
    }
}

fn check_bounds(name: &str, (lo, hi): (f64, f64), positive: bool) -> Result<()> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || (positive && !(lo > 0.0)) {
        return Err(Error::Validation {
            name: name.into(),
            reason: format!("need {}lo < hi, got [{lo}, {hi}]", if positive { "0 < " } else { "" }),
        });
    }
    Ok(())
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        check_bounds("e_bounds", self.e_bounds, true)?;
        check_bounds("offset_bounds", self.offset_bounds, false)?;
        if self.fit_sensor_params {
            check_bounds("e_sens_bounds", self.e_sens_bounds, true)?;
            check_bounds("alpha_sens_bounds", self.alpha_sens_bounds, true)?;
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Validation {
                name: "convergence_tol".into(),
                reason: "must be positive".into(),
            });
        }
        if self.max_iters == 0 || self.starts == 0 {
            return Err(Error::Validation {
                name: "max_iters/starts".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    /// The best point sits on a bound and the objective still decreases
    /// outward.
    BoundActive,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub e_obj: f64,
    pub t_offset: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_sens: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_sens: Option<f64>,
    /// °C²
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
    pub status: FitStatus,
}

/// Model temperature for a trace sample at shifted time `t`.
fn model_at(sensor: &SensorParams, e_obj: f64, t_sens0: f64, t_obj0: f64, t: f64) -> f64 {
    let es = sensor.e_sens;
    let t_surf = (t_sens0 * es + t_obj0 * e_obj) / (es + e_obj);
    t_sens0 + (t_surf - t_sens0) * sensor.erfc_factor(t)
}

/// Initial temperatures of a trace in its own units (normalized traces
/// start at 1 against an object at 0).
fn trace_levels(trace: &TemperatureTrace) -> (f64, f64) {
    if trace.meta.normalized {
        (1.0, 0.0)
    } else {
        (trace.meta.t_sens0, trace.meta.t_obj0)
    }
}

/// `Σ (T_i - model(t_i + t_offset))²`; shifted times at or before zero read
/// the initial sensor temperature.
pub fn residual_sse(trace: &TemperatureTrace, sensor: &SensorParams, e_obj: f64, t_offset: f64) -> f64 {
    let (ts0, to) = trace_levels(trace);
    trace
        .times()
        .iter()
        .zip(trace.temps())
        .map(|(&t, &v)| {
            let r = v - model_at(sensor, e_obj, ts0, to, t + t_offset);
            r * r
        })
        .sum()
}

/// Box-constrained minimization outcome.
struct Outcome {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    status: FitStatus,
}

/// Projected quasi-Newton descent with central-difference gradients.
/// Variables on a bound whose gradient points outward are frozen for the
/// step; the inverse-Hessian estimate is BFGS-updated on accepted steps.
fn minimize_box(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], lo: &[f64], hi: &[f64], tol: f64, max_iters: usize) -> Outcome {
    let n = x0.len();
    let project = |x: &mut [f64]| {
        for k in 0..n {
            x[k] = x[k].clamp(lo[k], hi[k]);
        }
    };
    let grad = |x: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; n];
        let mut xp = x.to_vec();
        for k in 0..n {
            let h = 1e-6 * x[k].abs().max(1.0);
            let (a, b) = ((x[k] - h).max(lo[k]), (x[k] + h).min(hi[k]));
            xp[k] = b;
            let fb = f(&xp);
            xp[k] = a;
            let fa = f(&xp);
            xp[k] = x[k];
            g[k] = (fb - fa) / (b - a);
        }
        g
    };
    let at_bound = |x: &[f64], g: &[f64], k: usize| {
        let eps = 1e-12 * x[k].abs().max(1.0);
        (x[k] <= lo[k] + eps && g[k] > 0.0) || (x[k] >= hi[k] - eps && g[k] < 0.0)
    };

    let mut x = x0.to_vec();
    project(&mut x);
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut h_inv = identity(n);
    let mut status = FitStatus::MaxIterations;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let free: Vec<bool> = (0..n).map(|k| !at_bound(&x, &g, k)).collect();
        let mut d = vec![0.0; n];
        for i in 0..n {
            if free[i] {
                d[i] = -(0..n).filter(|&j| free[j]).map(|j| h_inv[i][j] * g[j]).sum::<f64>();
            }
        }
        let mut slope: f64 = (0..n).map(|k| d[k] * g[k]).sum();
        if !(slope < 0.0) {
            h_inv = identity(n);
            for k in 0..n {
                d[k] = if free[k] { -g[k] } else { 0.0 };
            }
            slope = (0..n).map(|k| d[k] * g[k]).sum();
        }
        if slope == 0.0 {
            status = FitStatus::Converged;
            break;
        }
        // Armijo backtracking along the projected path.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = (0..n).map(|k| x[k] + step * d[k]).collect();
            project(&mut xn);
            let fn_ = f(&xn);
            let decrease: f64 = (0..n).map(|k| g[k] * (xn[k] - x[k])).sum();
            if fn_.is_finite() && fn_ <= fx + 1e-4 * decrease && xn != x {
                accepted = Some((xn, fn_));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            // No descent left at working precision.
            status = FitStatus::Converged;
            break;
        };
        let gn = grad(&xn);
        let s: Vec<f64> = (0..n).map(|k| xn[k] - x[k]).collect();
        let y: Vec<f64> = (0..n).map(|k| gn[k] - g[k]).collect();
        bfgs_update(&mut h_inv, &s, &y);
        let change = (fx - fn_).abs();
        x = xn;
        g = gn;
        let before = fx;
        fx = fn_;
        if change <= tol * before.abs() {
            status = FitStatus::Converged;
            break;
        }
    }
    if status == FitStatus::Converged && (0..n).any(|k| at_bound(&x, &g, k)) {
        status = FitStatus::BoundActive;
    }
    Outcome {
        x,
        f: fx,
        iterations,
        status,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let n = s.len();
    let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
    if !(sy > 1e-300) {
        return;
    }
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

fn check_traces(traces: &[TemperatureTrace], sensor: &SensorParams) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::domain("need at least one trace"));
    }
    sensor.validate_thermal()?;
    let rate = traces[0].meta.sample_rate;
    if let Some(t) = traces.iter().find(|t| t.meta.sample_rate != rate) {
        return Err(Error::domain(format!(
            "inconsistent sample rates: {} Hz and {} Hz",
            rate, t.meta.sample_rate
        )));
    }
    Ok(())
}

/// Start points for `ln e`: evenly spaced interior points of the log box.
fn starts(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| lo + (k as f64 + 0.5) / count as f64 * (hi - lo))
        .collect()
}

/// Runs every start and keeps the best outcome that did not run out of
/// iterations. Ties keep the earlier start.
fn best_of(outcomes: Vec<Outcome>) -> Result<Outcome> {
    let mut best: Option<Outcome> = None;
    let mut fallback_sse = f64::INFINITY;
    let mut total_iters = 0;
    for o in outcomes {
        total_iters += o.iterations;
        fallback_sse = fallback_sse.min(o.f);
        if o.status == FitStatus::MaxIterations {
            continue;
        }
        if best.as_ref().is_none_or(|b| o.f < b.f) {
            best = Some(o);
        }
    }
    best.ok_or(Error::NoConvergence {
        best_sse: fallback_sse,
        iterations: total_iters,
    })
}

/// Fits one material's traces with a shared time offset. Starts from
/// `cfg.starts` effusivities spread evenly over `ln e_bounds`.
pub fn fit_material(traces: &[TemperatureTrace], sensor: &SensorParams, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    check_traces(traces, sensor)?;
    let (le_lo, le_hi) = (cfg.e_bounds.0.ln(), cfg.e_bounds.1.ln());
    let mut lo = vec![le_lo, cfg.offset_bounds.0];
    let mut hi = vec![le_hi, cfg.offset_bounds.1];
    if cfg.fit_sensor_params {
        lo.extend([cfg.e_sens_bounds.0.ln(), cfg.alpha_sens_bounds.0.ln()]);
        hi.extend([cfg.e_sens_bounds.1.ln(), cfg.alpha_sens_bounds.1.ln()]);
    }
    let sensor_at = |x: &[f64]| -> SensorParams {
        if cfg.fit_sensor_params {
            SensorParams {
                e_sens: x[2].exp(),
                alpha_sens: x[3].exp(),
                ..*sensor
            }
        } else {
            *sensor
        }
    };
    let objective = |x: &[f64]| -> f64 {
        let s = sensor_at(x);
        let e = x[0].exp();
        traces.iter().map(|t| residual_sse(t, &s, e, x[1])).sum()
    };
    let offset0 = 0.0f64.clamp(cfg.offset_bounds.0, cfg.offset_bounds.1);
    let outcomes = starts(le_lo, le_hi, cfg.starts)
        .into_iter()
        .map(|le| {
            let mut x0 = vec![le, offset0];
            if cfg.fit_sensor_params {
                x0.push(sensor.e_sens.ln().clamp(lo[2], hi[2]));
                x0.push(sensor.alpha_sens.ln().clamp(lo[3], hi[3]));
            }
            minimize_box(&objective, &x0, &lo, &hi, cfg.convergence_tol, cfg.max_iters)
        })
        .collect();
    let best = best_of(outcomes)?;
    let s = sensor_at(&best.x);
    Ok(FitResult {
        e_obj: best.x[0].exp().clamp(cfg.e_bounds.0, cfg.e_bounds.1),
        t_offset: best.x[1],
        e_sens: cfg.fit_sensor_params.then_some(s.e_sens),
        alpha_sens: cfg.fit_sensor_params.then_some(s.alpha_sens),
        sse: best.f,
        converged: best.status == FitStatus::Converged,
        iterations: best.iterations,
        status: best.status,
    })
}

/// Traces of a reference material whose effusivity is known.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    pub effusivity: f64,
    pub traces: Vec<TemperatureTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFit {
    pub e_sens: f64,
    pub alpha_sens: f64,
    /// One shared offset per reference set, in input order.
    pub offsets: Vec<f64>,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
    pub status: FitStatus,
}

/// Fits `e_sens` and `alpha_sens` against reference materials of known
/// effusivity, with one time offset per material. Single start from the
/// supplied sensor, clamped into the bounds.
///
/// Only the ratio `e_obj / e_sens` enters the model, so `e_sens` is
/// identifiable only through the known reference effusivities.
pub fn calibrate_sensor(refs: &[ReferenceSet], sensor: &SensorParams, cfg: &FitConfig) -> Result<SensorFit> {
    check_bounds("e_sens_bounds", cfg.e_sens_bounds, true)?;
    check_bounds("alpha_sens_bounds", cfg.alpha_sens_bounds, true)?;
    check_bounds("offset_bounds", cfg.offset_bounds, false)?;
    if refs.is_empty() {
        return Err(Error::domain("need at least one reference material"));
    }
    for r in refs {
        check_traces(&r.traces, sensor)?;
        if !(r.effusivity > 0.0) {
            return Err(Error::domain(format!("reference effusivity must be positive, got {}", r.effusivity)));
        }
    }
    let mut lo = vec![cfg.e_sens_bounds.0.ln(), cfg.alpha_sens_bounds.0.ln()];
    let mut hi = vec![cfg.e_sens_bounds.1.ln(), cfg.alpha_sens_bounds.1.ln()];
    lo.extend(std::iter::repeat_n(cfg.offset_bounds.0, refs.len()));
    hi.extend(std::iter::repeat_n(cfg.offset_bounds.1, refs.len()));
    let objective = |x: &[f64]| -> f64 {
        let s = SensorParams {
            e_sens: x[0].exp(),
            alpha_sens: x[1].exp(),
            ..*sensor
        };
        refs.iter()
            .enumerate()
            .map(|(k, r)| r.traces.iter().map(|t| residual_sse(t, &s, r.effusivity, x[2 + k])).sum::<f64>())
            .sum()
    };
    let mut x0 = vec![sensor.e_sens.ln().clamp(lo[0], hi[0]), sensor.alpha_sens.ln().clamp(lo[1], hi[1])];
    x0.extend(std::iter::repeat_n(0.0f64.clamp(cfg.offset_bounds.0, cfg.offset_bounds.1), refs.len()));
    let o = minimize_box(&objective, &x0, &lo, &hi, cfg.convergence_tol, cfg.max_iters);
    if o.status == FitStatus::MaxIterations {
        return Err(Error::NoConvergence {
            best_sse: o.f,
            iterations: o.iterations,
        });
    }
    Ok(SensorFit {
        e_sens: o.x[0].exp(),
        alpha_sens: o.x[1].exp(),
        offsets: o.x[2..].to_vec(),
        sse: o.f,
        converged: o.status == FitStatus::Converged,
        iterations: o.iterations,
        status: o.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatsim::{derive_seed, generate_trace_with_offset, ContactConditions, MaterialSample};

    fn synth(e: f64, sigma: f64, offset: f64, count: usize, seed: u64) -> Vec<TemperatureTrace> {
        let sensor = SensorParams {
            noise_sigma: sigma,
            ..SensorParams::default()
        };
        (0..count)
            .map(|k| {
                generate_trace_with_offset(
                    &sensor,
                    &MaterialSample::new(e).unwrap(),
                    &ContactConditions::default(),
                    offset,
                    derive_seed(seed, &[k as u64]),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn sse_zero_at_truth_and_positive_elsewhere() {
        let s = SensorParams::default();
        let t = &synth(1433.31, 0.0, 0.0, 1, 1)[0];
        assert!(residual_sse(t, &s, 1433.31, 0.0) < 1e-20);
        assert!(residual_sse(t, &s, 1500.0, 0.0) > 0.0);
        assert!(residual_sse(t, &s, 1433.31, 0.01) > 0.0);
    }

    #[test]
    fn sse_locally_convex_in_e() {
        let s = SensorParams::default();
        let t = &synth(1433.31, 0.0, 0.0, 1, 1)[0];
        let h = 5.0;
        let f = |e: f64| residual_sse(t, &s, e, 0.0);
        let second = (f(1433.31 + h) - 2.0 * f(1433.31) + f(1433.31 - h)) / (h * h);
        assert!(second > 0.0);
    }

    #[test]
    fn recovers_glass_and_offset() {
        let traces = synth(1433.31, 0.05, -0.5, 10, 42);
        let r = fit_material(&traces, &SensorParams::default(), &FitConfig::default()).unwrap();
        assert!((r.e_obj / 1433.31 - 1.0).abs() < 0.05, "{r:?}");
        assert!((r.t_offset + 0.5).abs() < 0.05, "{r:?}");
        assert!(r.converged);
        assert_eq!(r.status, FitStatus::Converged);
        assert!(r.e_sens.is_none());
    }

    #[test]
    fn fit_is_bit_deterministic() {
        let traces = synth(600.0, 0.05, 0.0, 3, 7);
        let cfg = FitConfig::default();
        let a = fit_material(&traces, &SensorParams::default(), &cfg).unwrap();
        let b = fit_material(&traces, &SensorParams::default(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_active_when_truth_outside_box() {
        let traces = synth(1000.0, 0.05, 0.0, 3, 7);
        let cfg = FitConfig {
            e_bounds: (100.0, 200.0),
            ..FitConfig::default()
        };
        let r = fit_material(&traces, &SensorParams::default(), &cfg).unwrap();
        assert!((r.e_obj - 200.0).abs() < 1e-6, "{r:?}");
        assert!(!r.converged);
        assert_eq!(r.status, FitStatus::BoundActive);
    }

    #[test]
    fn iteration_budget_exhaustion_is_an_error() {
        let traces = synth(1000.0, 0.05, 0.0, 2, 7);
        let cfg = FitConfig {
            max_iters: 1,
            convergence_tol: 1e-300,
            ..FitConfig::default()
        };
        assert!(matches!(
            fit_material(&traces, &SensorParams::default(), &cfg),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn rejects_bad_config_and_inputs() {
        let traces = synth(1000.0, 0.05, 0.0, 1, 7);
        let bad = FitConfig {
            e_bounds: (5.0, 1.0),
            ..FitConfig::default()
        };
        assert!(fit_material(&traces, &SensorParams::default(), &bad).is_err());
        assert!(fit_material(&[], &SensorParams::default(), &FitConfig::default()).is_err());
    }

    #[test]
    fn sensor_calibration_recovers_diffusivity() {
        let truth = SensorParams {
            alpha_sens: 1.4e-9,
            ..SensorParams::default()
        };
        let refs: Vec<ReferenceSet> = [(400.0, 1u64), (1433.31, 2), (10000.0, 3)]
            .iter()
            .map(|&(e, seed)| ReferenceSet {
                effusivity: e,
                traces: (0..4)
                    .map(|k| {
                        generate_trace_with_offset(
                            &truth,
                            &MaterialSample::new(e).unwrap(),
                            &ContactConditions::default(),
                            0.0,
                            derive_seed(seed, &[k]),
                        )
                        .unwrap()
                    })
                    .collect(),
            })
            .collect();
        let fit = calibrate_sensor(&refs, &SensorParams::default(), &FitConfig::default()).unwrap();
        assert!((fit.alpha_sens / 1.4e-9 - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.e_sens / 892.0 - 1.0).abs() < 0.05, "{fit:?}");
        assert!(fit.offsets.iter().all(|o| o.abs() < 0.05));
    }
}
