//! Forward model of a heated sensor touching an object, both treated as
//! semi-infinite solids, plus noisy trace generation and the
//! initial-condition normalization.
//!
//! Temperatures are in °C throughout. Every expression here is affine in
//! temperature, so using Kelvin instead would change nothing.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::erfc_finite;

/// Thermal and acquisition constants of the heated sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    /// Thermal effusivity, J·s^-1/2·K^-1·m^-2.
    pub e_sens: f64,
    /// Thermal diffusivity, m²/s.
    pub alpha_sens: f64,
    /// Distance of the thermistor from the contact surface, m.
    pub thermistor_depth: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Standard deviation of the additive measurement noise, °C.
    pub noise_sigma: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            e_sens: 892.0,
            alpha_sens: 1.19e-9,
            thermistor_depth: 8e-5,
            sample_rate: 200.0,
            noise_sigma: 0.05,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        self.validate_thermal()?;
        positive("noise_sigma", self.noise_sigma)
    }

    /// Everything except the noise level, which may be zero when generating
    /// noise-free reference curves.
    pub fn validate_thermal(&self) -> Result<()> {
        positive("e_sens", self.e_sens)?;
        positive("alpha_sens", self.alpha_sens)?;
        positive("thermistor_depth", self.thermistor_depth)?;
        positive("sample_rate", self.sample_rate)?;
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::domain(format!("noise_sigma must be non-negative, got {}", self.noise_sigma)));
        }
        Ok(())
    }

    /// Sample period in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// `erfc(x / (2√(α t)))`, the fraction of the surface step seen by the
    /// thermistor after `t` seconds. Zero at `t = 0`.
    pub fn erfc_factor(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        erfc_finite(self.thermistor_depth / (2.0 * (self.alpha_sens * t).sqrt()))
    }

    /// Number of samples in a contact of `t_contact` seconds.
    pub fn samples_in(&self, t_contact: f64) -> usize {
        // The epsilon keeps e.g. 0.7 s at 200 Hz from flooring to 139.
        (t_contact * self.sample_rate + 1e-9).floor().max(0.0) as usize
    }
}

/// Initial temperatures and duration of one touch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactConditions {
    /// Initial sensor temperature, °C.
    pub t_sens0: f64,
    /// Initial object temperature (equal to ambient), °C.
    pub t_obj0: f64,
    /// Contact duration, s.
    pub t_contact: f64,
}

impl Default for ContactConditions {
    fn default() -> Self {
        Self {
            t_sens0: 35.0,
            t_obj0: 25.0,
            t_contact: 2.0,
        }
    }
}

impl ContactConditions {
    pub fn validate(&self) -> Result<()> {
        positive("t_contact", self.t_contact)?;
        if !(self.t_sens0 > self.t_obj0) || !self.t_sens0.is_finite() || !self.t_obj0.is_finite() {
            return Err(Error::domain(format!(
                "sensor must start hotter than the object (t_sens0={}, t_obj0={})",
                self.t_sens0, self.t_obj0
            )));
        }
        Ok(())
    }

    /// Sensor-to-ambient temperature gap.
    pub fn delta_t(&self) -> f64 {
        self.t_sens0 - self.t_obj0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSample {
    pub effusivity: f64,
}

impl MaterialSample {
    pub fn new(effusivity: f64) -> Result<Self> {
        positive("effusivity", effusivity)?;
        Ok(Self { effusivity })
    }
}

/// Provenance of a trace. Serialized as the JSON sidecar next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub material: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effusivity: Option<f64>,
    #[serde(rename = "t_sens0_c")]
    pub t_sens0: f64,
    #[serde(rename = "t_obj0_c")]
    pub t_obj0: f64,
    #[serde(rename = "sample_rate_hz")]
    pub sample_rate: f64,
    pub seed: Option<u64>,
    pub normalized: bool,
    /// Per-trace noise multiplier applied by normalization, `1/(t_sens0 - t_obj0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
}

/// Uniformly sampled temperature series.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureTrace {
    times: Vec<f64>,
    temps: Vec<f64>,
    pub meta: TraceMeta,
}

impl TemperatureTrace {
    pub fn new(times: Vec<f64>, temps: Vec<f64>, meta: TraceMeta) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyTrace {
                t_contact: 0.0,
                sample_rate: meta.sample_rate,
            });
        }
        if times.len() != temps.len() {
            return Err(Error::Dimension(format!(
                "{} timestamps but {} temperatures",
                times.len(),
                temps.len()
            )));
        }
        positive("sample_rate", meta.sample_rate)?;
        let dt = 1.0 / meta.sample_rate;
        for (k, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 {
                return Err(Error::domain(format!(
                    "non-uniform spacing at sample {}: {} s (expected {dt} s)",
                    k + 1,
                    w[1] - w[0]
                )));
            }
        }
        Ok(Self { times, temps, meta })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn conditions(&self) -> ContactConditions {
        ContactConditions {
            t_sens0: self.meta.t_sens0,
            t_obj0: self.meta.t_obj0,
            t_contact: self.len() as f64 / self.meta.sample_rate,
        }
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar.
    pub fn write(&self, stem: &Path) -> Result<()> {
        let csv_path = stem.with_extension("csv");
        let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_io(&csv_path, e))?;
        w.write_record(["time_s", "temp_c"]).map_err(|e| csv_io(&csv_path, e))?;
        for (t, v) in self.times.iter().zip(&self.temps) {
            w.write_record([t.to_string(), v.to_string()])
                .map_err(|e| csv_io(&csv_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        let json_path = stem.with_extension("json");
        let json = serde_json::to_string_pretty(&self.meta)?;
        fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))
    }

    /// Reads a trace from its CSV file and the JSON sidecar beside it.
    pub fn read(csv_path: &Path) -> Result<Self> {
        let json_path = csv_path.with_extension("json");
        let meta_src = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        let meta: TraceMeta = serde_json::from_str(&meta_src)
            .map_err(|e| Error::Format(format!("{}: {e}", json_path.display())))?;
        let mut r = csv::Reader::from_path(csv_path).map_err(|e| csv_io(csv_path, e))?;
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "time_s" || &headers[1] != "temp_c" {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected header `time_s,temp_c`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut times = Vec::new();
        let mut temps = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let field = |col: usize| -> Result<f64> {
                let raw = rec.get(col).ok_or_else(|| Error::Parse {
                    line,
                    column: col + 1,
                    message: "missing field".into(),
                })?;
                raw.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    column: col + 1,
                    message: format!("`{raw}`: {e}"),
                })
            };
            times.push(field(0)?);
            temps.push(field(1)?);
        }
        Self::new(times, temps, meta)
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// Constant contact-surface temperature formed on touch.
pub fn surface_temperature(sensor: &SensorParams, material: &MaterialSample, cond: &ContactConditions) -> f64 {
    let (es, eo) = (sensor.e_sens, material.effusivity);
    (cond.t_sens0 * es + cond.t_obj0 * eo) / (es + eo)
}

fn mean_at(sensor: &SensorParams, t_surf: f64, cond: &ContactConditions, t: f64) -> f64 {
    cond.t_sens0 + (t_surf - cond.t_sens0) * sensor.erfc_factor(t)
}

/// Noise-free thermistor temperature `t` seconds after contact.
pub fn mean_temperature(
    sensor: &SensorParams,
    material: &MaterialSample,
    cond: &ContactConditions,
    t: f64,
) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::domain(format!("time must be non-negative, got {t}")));
    }
    Ok(mean_at(sensor, surface_temperature(sensor, material, cond), cond, t))
}

/// Mean curve sampled at `t_i = i·Δt`, `i = 1..=n`, shifted by `time_offset`.
/// Shifted times at or before zero read the initial sensor temperature.
pub fn mean_curve(
    sensor: &SensorParams,
    material: &MaterialSample,
    cond: &ContactConditions,
    n: usize,
    time_offset: f64,
) -> Vec<f64> {
    let t_surf = surface_temperature(sensor, material, cond);
    let dt = sensor.dt();
    (1..=n)
        .map(|i| mean_at(sensor, t_surf, cond, i as f64 * dt + time_offset))
        .collect()
}

fn sample_times(sensor: &SensorParams, n: usize) -> Vec<f64> {
    let dt = sensor.dt();
    (1..=n).map(|i| i as f64 * dt).collect()
}

/// Noisy trace: the mean curve plus i.i.d. N(0, σ²) noise per sample.
pub fn generate_trace(
    sensor: &SensorParams,
    material: &MaterialSample,
    cond: &ContactConditions,
    seed: u64,
) -> Result<TemperatureTrace> {
    generate_trace_with_offset(sensor, material, cond, 0.0, seed)
}

/// Like [`generate_trace`], but the recorded clock is shifted: sample `i`
/// reads the mean curve at `i·Δt + time_offset`. A negative offset means
/// recording began before heat started to flow.
pub fn generate_trace_with_offset(
    sensor: &SensorParams,
    material: &MaterialSample,
    cond: &ContactConditions,
    time_offset: f64,
    seed: u64,
) -> Result<TemperatureTrace> {
    sensor.validate_thermal()?;
    cond.validate()?;
    positive("effusivity", material.effusivity)?;
    let n = sensor.samples_in(cond.t_contact);
    if n == 0 {
        return Err(Error::EmptyTrace {
            t_contact: cond.t_contact,
            sample_rate: sensor.sample_rate,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = sensor.noise_sigma;
    let temps = mean_curve(sensor, material, cond, n, time_offset)
        .into_iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(&mut rng);
            m + sigma * z
        })
        .collect();
    let meta = TraceMeta {
        material: format!("e={}", material.effusivity),
        effusivity: Some(material.effusivity),
        t_sens0: cond.t_sens0,
        t_obj0: cond.t_obj0,
        sample_rate: sensor.sample_rate,
        seed: Some(seed),
        normalized: false,
        noise_scale: None,
    };
    TemperatureTrace::new(sample_times(sensor, n), temps, meta)
}

/// Maps a trace onto the unit initial condition:
/// `(T - t_obj0) / (t_sens0 - t_obj0)`.
pub fn normalize_trace(trace: &TemperatureTrace) -> Result<TemperatureTrace> {
    let meta = &trace.meta;
    if meta.normalized {
        return Err(Error::Normalization("trace is already normalized".into()));
    }
    let gap = meta.t_sens0 - meta.t_obj0;
    if gap == 0.0 {
        return Err(Error::Normalization("t_sens0 equals t_obj0".into()));
    }
    if gap < 0.0 {
        return Err(Error::Normalization(format!(
            "t_sens0 ({}) below t_obj0 ({})",
            meta.t_sens0, meta.t_obj0
        )));
    }
    let temps = trace.temps.iter().map(|v| (v - meta.t_obj0) / gap).collect();
    let mut meta = meta.clone();
    meta.normalized = true;
    meta.noise_scale = Some(1.0 / gap);
    Ok(TemperatureTrace {
        times: trace.times.clone(),
        temps,
        meta,
    })
}

/// Mean of a normalized trace at time `t`:
/// `1 - e_obj/(e_obj + e_sens) · erfc(x / (2√(α t)))`.
pub fn normalized_mean(sensor: &SensorParams, material: &MaterialSample, t: f64) -> f64 {
    let eo = material.effusivity;
    1.0 - eo / (eo + sensor.e_sens) * sensor.erfc_factor(t)
}

/// Effective noise level of normalized traces whose initial sensor
/// temperature is uniform on `[t_min, t_max]`: the average of the per-trace
/// scale `σ / (T - t_obj0)` over that band.
pub fn effective_varied_noise(sigma: f64, t_min: f64, t_max: f64, t_obj0: f64) -> Result<f64> {
    if !(t_obj0 < t_min && t_min < t_max) || !t_max.is_finite() || !t_obj0.is_finite() {
        return Err(Error::domain(format!(
            "need t_obj0 < t_min < t_max, got {t_obj0}, {t_min}, {t_max}"
        )));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be non-negative, got {sigma}")));
    }
    let lo = t_min - t_obj0;
    let width = t_max - t_min;
    Ok(sigma * (width / lo).ln_1p() / width)
}

/// Mixes an experiment seed with stream indices (SplitMix64 finalizer), so
/// that each (pair, trial) gets an independent, order-free RNG stream.
pub fn derive_seed(base: u64, indices: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    indices.iter().fold(mix(base), |acc, &i| mix(acc ^ mix(i)))
}

/// Lists `*.csv` traces in a directory in name order.
pub fn list_trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.with_extension("json").exists())
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cond(t_sens0: f64) -> ContactConditions {
        ContactConditions {
            t_sens0,
            t_obj0: 25.0,
            t_contact: 2.0,
        }
    }

    #[test]
    fn surface_temperature_examples() {
        let s = SensorParams::default();
        let c = cond(35.0);
        assert_eq!(surface_temperature(&s, &MaterialSample { effusivity: 892.0 }, &c), 30.0);
        // (35·892 + 25·36800) / 37692
        let oracle = (35.0 * 892.0 + 25.0 * 36800.0) / (892.0 + 36800.0);
        let ts = surface_temperature(&s, &MaterialSample { effusivity: 36800.0 }, &c);
        assert_relative_eq!(ts, oracle, max_relative = 1e-15);
        assert!((ts - 25.2367).abs() < 1e-4);
        let tiny = surface_temperature(&s, &MaterialSample { effusivity: 1e-12 }, &c);
        assert!((tiny - 35.0).abs() < 1e-12);
    }

    #[test]
    fn surface_temperature_decreases_with_effusivity() {
        let s = SensorParams::default();
        let c = cond(35.0);
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let e = 10f64.powf(1.0 + 4.0 * k as f64 / 199.0);
            let ts = surface_temperature(&s, &MaterialSample { effusivity: e }, &c);
            assert!(ts < prev && ts > 25.0 && ts < 35.0);
            prev = ts;
        }
    }

    #[test]
    fn mean_temperature_examples() {
        let s = SensorParams::default();
        let c = cond(35.0);
        let m = MaterialSample { effusivity: 36800.0 };
        assert_eq!(mean_temperature(&s, &m, &c, 0.0).unwrap(), 35.0);
        let shallow = SensorParams { thermistor_depth: 0.0, ..s };
        let ts = surface_temperature(&s, &m, &c);
        assert_relative_eq!(mean_temperature(&shallow, &m, &c, 1.3).unwrap(), ts, max_relative = 1e-15);
        // independent evaluation: erfc(8e-5 / (2 sqrt(1.19e-9 * 2)))
        let arg = 8e-5 / (2.0 * (1.19e-9f64 * 2.0).sqrt());
        assert!((arg - 0.8199).abs() < 1e-4);
        let v = mean_temperature(&s, &m, &c, 2.0).unwrap();
        assert!((v - 32.59).abs() < 0.01, "{v}");
        assert!(mean_temperature(&s, &m, &c, -1.0).is_err());
    }

    #[test]
    fn mean_curves_never_cross() {
        let s = SensorParams::default();
        let c = cond(35.0);
        let pairs = [(100.0, 200.0), (5000.0, 4000.0), (30000.0, 36000.0)];
        for (ea, eb) in pairs {
            let (a, b) = (MaterialSample { effusivity: ea }, MaterialSample { effusivity: eb });
            let sign = (surface_temperature(&s, &a, &c) - surface_temperature(&s, &b, &c)).signum();
            for i in 1..2000 {
                let t = i as f64 * 0.005;
                let d = mean_temperature(&s, &a, &c, t).unwrap() - mean_temperature(&s, &b, &c, t).unwrap();
                assert!(d == 0.0 || d.signum() == sign);
            }
        }
    }

    #[test]
    fn trace_length_and_determinism() {
        let s = SensorParams::default();
        let m = MaterialSample { effusivity: 1000.0 };
        for &(tc, n) in &[(2.0, 400), (0.7, 140), (1.234, 246)] {
            let c = ContactConditions { t_contact: tc, ..cond(35.0) };
            let tr = generate_trace(&s, &m, &c, 3).unwrap();
            assert_eq!(tr.len(), n);
            assert_relative_eq!(tr.times()[0], 0.005);
        }
        let a = generate_trace(&s, &m, &cond(35.0), 11).unwrap();
        let b = generate_trace(&s, &m, &cond(35.0), 11).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(&s, &m, &cond(35.0), 12).unwrap();
        assert_ne!(a.temps(), c.temps());
    }

    #[test]
    fn empty_trace_rejected() {
        let s = SensorParams::default();
        let c = ContactConditions { t_contact: 0.004, ..cond(35.0) };
        assert!(matches!(
            generate_trace(&s, &MaterialSample { effusivity: 10.0 }, &c, 0),
            Err(Error::EmptyTrace { .. })
        ));
    }

    #[test]
    fn noiseless_trace_is_mean_curve() {
        let s = SensorParams { noise_sigma: 0.0, ..SensorParams::default() };
        let m = MaterialSample { effusivity: 2500.0 };
        let c = cond(35.0);
        let tr = generate_trace(&s, &m, &c, 5).unwrap();
        for (t, v) in tr.times().iter().zip(tr.temps()) {
            assert_eq!(*v, mean_temperature(&s, &m, &c, *t).unwrap());
        }
    }

    #[test]
    fn noise_statistics() {
        let s = SensorParams::default();
        let m = MaterialSample { effusivity: 1500.0 };
        let c = cond(35.0);
        let idx = 199; // t = 1 s
        let n = 10_000;
        let samples: Vec<f64> = (0..n)
            .map(|k| generate_trace(&s, &m, &c, derive_seed(99, &[k])).unwrap().temps()[idx])
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let truth = mean_temperature(&s, &m, &c, 1.0).unwrap();
        assert!((mean - truth).abs() < 4.0 * 0.05 / 100.0);
        assert!((var.sqrt() / 0.05 - 1.0).abs() < 0.03);
    }

    #[test]
    fn normalization_removes_initial_condition() {
        let s = SensorParams { noise_sigma: 0.0, ..SensorParams::default() };
        let m = MaterialSample { effusivity: 640.0 };
        let a = normalize_trace(&generate_trace(&s, &m, &cond(35.0), 1).unwrap()).unwrap();
        let b = normalize_trace(&generate_trace(&s, &m, &cond(30.0), 2).unwrap()).unwrap();
        for ((x, y), t) in a.temps().iter().zip(b.temps()).zip(a.times()) {
            assert!((x - y).abs() <= 1e-10);
            assert!((x - normalized_mean(&s, &m, *t)).abs() <= 1e-10);
        }
        assert!(a.meta.normalized);
        assert_eq!(a.meta.noise_scale, Some(0.1));
        assert!(matches!(normalize_trace(&a), Err(Error::Normalization(_))));
    }

    #[test]
    fn normalization_fixed_points() {
        let meta = TraceMeta {
            material: "x".into(),
            effusivity: None,
            t_sens0: 35.0,
            t_obj0: 25.0,
            sample_rate: 200.0,
            seed: None,
            normalized: false,
            noise_scale: None,
        };
        let times = vec![0.005, 0.010, 0.015];
        let at_ambient = TemperatureTrace::new(times.clone(), vec![25.0; 3], meta.clone()).unwrap();
        assert!(normalize_trace(&at_ambient).unwrap().temps().iter().all(|v| *v == 0.0));
        let at_sensor = TemperatureTrace::new(times.clone(), vec![35.0; 3], meta.clone()).unwrap();
        assert!(normalize_trace(&at_sensor).unwrap().temps().iter().all(|v| *v == 1.0));
        let flat = TraceMeta { t_sens0: 25.0, ..meta };
        let degenerate = TemperatureTrace::new(times, vec![25.0; 3], flat).unwrap();
        assert!(matches!(normalize_trace(&degenerate), Err(Error::Normalization(_))));
    }

    #[test]
    fn varied_noise_examples() {
        let z = effective_varied_noise(0.05, 30.0, 35.0, 25.0).unwrap();
        // ∫_30^35 dT/(T-25) = ln 2
        assert_relative_eq!(z, 0.05 * 2f64.ln() / 5.0, max_relative = 1e-14);
        assert!((z - 0.006931).abs() < 1e-6);
        assert_eq!(effective_varied_noise(0.0, 30.0, 35.0, 25.0).unwrap(), 0.0);
        let eps = 1e-9;
        let narrow = effective_varied_noise(0.05, 30.0, 30.0 + eps, 25.0).unwrap();
        assert_relative_eq!(narrow, 0.05 / 5.0, max_relative = 1e-8);
        assert!(effective_varied_noise(0.05, 35.0, 30.0, 25.0).is_err());
        assert!(effective_varied_noise(0.05, 20.0, 30.0, 25.0).is_err());
    }

    #[test]
    fn trace_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = SensorParams::default();
        let tr = generate_trace(&s, &MaterialSample { effusivity: 777.0 }, &cond(35.0), 4).unwrap();
        let stem = dir.path().join("trace_000");
        tr.write(&stem).unwrap();
        let back = TemperatureTrace::read(&stem.with_extension("csv")).unwrap();
        assert_eq!(back, tr);
        let header = fs::read_to_string(stem.with_extension("csv")).unwrap();
        assert!(header.starts_with("time_s,temp_c\n"));
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
        for key in ["material", "t_sens0_c", "t_obj0_c", "sample_rate_hz", "seed", "normalized"] {
            assert!(meta.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn non_uniform_spacing_rejected() {
        let meta = TraceMeta {
            material: "x".into(),
            effusivity: None,
            t_sens0: 35.0,
            t_obj0: 25.0,
            sample_rate: 200.0,
            seed: None,
            normalized: false,
            noise_scale: None,
        };
        assert!(TemperatureTrace::new(vec![0.005, 0.011], vec![1.0, 1.0], meta.clone()).is_err());
        assert!(TemperatureTrace::new(vec![0.005], vec![1.0, 1.0], meta).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(7, &[0, 1]);
        let b = derive_seed(7, &[1, 0]);
        let c = derive_seed(8, &[0, 1]);
        assert!(a != b && a != c && b != c);
        assert_eq!(a, derive_seed(7, &[0, 1]));
    }
}
