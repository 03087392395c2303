//! Closed-form recognition performance.
//!
//! Two materials touched under identical conditions give mean curves whose
//! difference at sample `i` is `(T_surf1 - T_surf2)·erfc(x / (2√(α t_i)))`.
//! With i.i.d. Gaussian noise the likelihood-ratio classifier's false
//! positive rate is `P(F < 1)` for a noncentral F variable with `n, n`
//! degrees of freedom and noncentrality
//!
//! ```text
//! λ = (T_surf1 - T_surf2)² / (σ² Δt) · ∫_0^t_contact erfc²(x / (2√(α t))) dt
//! ```
//!
//! and, since both classes share one spherical covariance, `F1 = 1 - FP`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatsim::{surface_temperature, ContactConditions, MaterialSample, SensorParams};
use crate::matdb::{Category, MaterialDatabase, MaterialRecord};
use crate::specfun::{noncentral_f_cdf, SeriesTolerance};

/// Default distinguishability threshold on F1.
pub const DEFAULT_PHI: f64 = 0.9;

/// Upper end of the physical effusivity range considered.
pub const PHYSICAL_E_MAX: f64 = 4.0e4;

/// Equal-width partition of `(e_min, e_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffusivityGrid {
    e_min: f64,
    e_max: f64,
    n_intervals: usize,
}

impl EffusivityGrid {
    /// `e_min` is an exclusive lower edge and may be zero.
    pub fn new(e_min: f64, e_max: f64, n_intervals: usize) -> Result<Self> {
        if !(e_min >= 0.0) || !(e_max > e_min) || !e_max.is_finite() {
            return Err(Error::domain(format!(
                "grid needs 0 <= e_min < e_max, got ({e_min}, {e_max}]"
            )));
        }
        if n_intervals < 2 {
            return Err(Error::domain("grid needs at least 2 intervals"));
        }
        Ok(Self {
            e_min,
            e_max,
            n_intervals,
        })
    }

    /// `(0, 4e4]` in 500 intervals.
    pub fn standard() -> Self {
        Self {
            e_min: 0.0,
            e_max: PHYSICAL_E_MAX,
            n_intervals: 500,
        }
    }

    pub fn e_min(&self) -> f64 {
        self.e_min
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn width(&self) -> f64 {
        (self.e_max - self.e_min) / self.n_intervals as f64
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        (self.e_min + i as f64 * w, self.e_min + (i + 1) as f64 * w)
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        self.e_min + (i as f64 + 0.5) * self.width()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_intervals).map(|i| self.midpoint(i)).collect()
    }

    /// Same range split `factor` times finer.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.e_min, self.e_max, self.n_intervals * factor.max(1))
    }
}

/// Sensor, contact and noise level a matrix was computed under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixConditions {
    pub sensor: SensorParams,
    pub contact: ContactConditions,
    pub sigma: f64,
}

fn check_inputs(sensor: &SensorParams, cond: &ContactConditions, sigma: f64) -> Result<()> {
    sensor.validate_thermal()?;
    cond.validate()?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

fn check_effusivity(e: f64) -> Result<MaterialSample> {
    MaterialSample::new(e)
}

/// `∫_0^t_contact erfc²(x / (2√(α t))) dt` by adaptive Simpson. The
/// integrand is taken as 0 at `t = 0`, where it vanishes smoothly.
pub fn erfc_sq_integral(sensor: &SensorParams, t_contact: f64) -> Result<f64> {
    if !(t_contact >= 0.0) || !t_contact.is_finite() {
        return Err(Error::domain(format!("t_contact must be non-negative, got {t_contact}")));
    }
    if t_contact == 0.0 {
        return Ok(0.0);
    }
    let f = |t: f64| {
        let v = sensor.erfc_factor(t);
        v * v
    };
    let rel = 1e-10;
    // Seed with a coarse estimate so the absolute target tracks the result.
    let (a, b) = (0.0, t_contact);
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(t_contact * 1e-6);
    let mut worst = 0.0f64;
    let value = simpson_step(&f, a, b, fa, fm, fb, whole, rel * scale, 60, &mut worst);
    if worst > rel * scale {
        return Err(Error::Quadrature {
            requested: rel,
            achieved: worst / scale,
        });
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 {
        *worst = worst.max(delta.abs() / 15.0);
        return left + right + delta / 15.0;
    }
    // Always split the first few levels so the flat start near t = 0 cannot
    // fool the error estimate.
    if depth < 54 && delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1, worst)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1, worst)
}

fn lambda_from_gap(t_surf_gap: f64, sigma: f64, sensor: &SensorParams, integral: f64) -> f64 {
    t_surf_gap * t_surf_gap / (sigma * sigma * sensor.dt()) * integral
}

/// Noncentrality of the pair `(e1, e2)` at noise level `sigma`.
pub fn noncentrality_lambda(
    sensor: &SensorParams,
    e1: f64,
    e2: f64,
    cond: &ContactConditions,
    sigma: f64,
) -> Result<f64> {
    check_inputs(sensor, cond, sigma)?;
    let (m1, m2) = (check_effusivity(e1)?, check_effusivity(e2)?);
    let gap = surface_temperature(sensor, &m1, cond) - surface_temperature(sensor, &m2, cond);
    Ok(lambda_from_gap(gap, sigma, sensor, erfc_sq_integral(sensor, cond.t_contact)?))
}

/// `1 - CDF_F(1; n, n, λ)`.
pub fn f1_from_lambda(lambda: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let n = n as f64;
    Ok(1.0 - noncentral_f_cdf(1.0, n, n, lambda, SeriesTolerance::default())?)
}

/// Everything the closed form produces for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub f1: f64,
    pub lambda: f64,
    pub t_surf1: f64,
    pub t_surf2: f64,
    pub n: usize,
}

pub fn predict_pair(
    sensor: &SensorParams,
    e1: f64,
    e2: f64,
    cond: &ContactConditions,
    sigma: f64,
) -> Result<PairPrediction> {
    check_inputs(sensor, cond, sigma)?;
    let (m1, m2) = (check_effusivity(e1)?, check_effusivity(e2)?);
    let n = sensor.samples_in(cond.t_contact);
    if n == 0 {
        return Err(Error::EmptyTrace {
            t_contact: cond.t_contact,
            sample_rate: sensor.sample_rate,
        });
    }
    let t_surf1 = surface_temperature(sensor, &m1, cond);
    let t_surf2 = surface_temperature(sensor, &m2, cond);
    let lambda = lambda_from_gap(t_surf1 - t_surf2, sigma, sensor, erfc_sq_integral(sensor, cond.t_contact)?);
    Ok(PairPrediction {
        f1: f1_from_lambda(lambda, n)?,
        lambda,
        t_surf1,
        t_surf2,
        n,
    })
}

/// Predicted binary-recognition F1 for effusivities `e1` and `e2`.
pub fn f1_pair(sensor: &SensorParams, e1: f64, e2: f64, cond: &ContactConditions, sigma: f64) -> Result<f64> {
    Ok(predict_pair(sensor, e1, e2, cond, sigma)?.f1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// Outcome of the minimum-distinguishable-difference search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DistinguishableDifference {
    Found { delta: f64, direction: Direction },
    /// No effusivity in the physical range reaches the threshold.
    IndistinguishableEverywhere,
}

impl DistinguishableDifference {
    pub fn delta(&self) -> Option<f64> {
        match self {
            Self::Found { delta, .. } => Some(*delta),
            Self::IndistinguishableEverywhere => None,
        }
    }
}

/// Knobs of the bracket-and-bisect search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSearch {
    pub initial_step: f64,
    pub e_upper: f64,
    pub rel_tol: f64,
}

impl Default for DeltaSearch {
    fn default() -> Self {
        Self {
            initial_step: PHYSICAL_E_MAX / 500.0,
            e_upper: PHYSICAL_E_MAX,
            rel_tol: 1e-4,
        }
    }
}

/// Smallest `δ` such that `F1(e, e+δ)` or `F1(e, e-δ)` reaches `phi`.
pub fn min_distinguishable_difference(
    sensor: &SensorParams,
    e: f64,
    cond: &ContactConditions,
    sigma: f64,
    phi: f64,
) -> Result<DistinguishableDifference> {
    min_distinguishable_difference_with(sensor, e, cond, sigma, phi, DeltaSearch::default())
}

pub fn min_distinguishable_difference_with(
    sensor: &SensorParams,
    e: f64,
    cond: &ContactConditions,
    sigma: f64,
    phi: f64,
    search: DeltaSearch,
) -> Result<DistinguishableDifference> {
    check_inputs(sensor, cond, sigma)?;
    check_effusivity(e)?;
    if !(phi > 0.5 && phi < 1.0) {
        return Err(Error::domain(format!("phi must lie in (0.5, 1), got {phi}")));
    }
    let n = sensor.samples_in(cond.t_contact);
    if n == 0 {
        return Err(Error::EmptyTrace {
            t_contact: cond.t_contact,
            sample_rate: sensor.sample_rate,
        });
    }
    let integral = erfc_sq_integral(sensor, cond.t_contact)?;
    let t_surf = |x: f64| surface_temperature(sensor, &MaterialSample { effusivity: x }, cond);
    let base = t_surf(e);
    let score = |other: f64| f1_from_lambda(lambda_from_gap(base - t_surf(other), sigma, sensor, integral), n);

    let search_dir = |dir: Direction| -> Result<Option<f64>> {
        let (limit, at): (f64, Box<dyn Fn(f64) -> f64>) = match dir {
            Direction::Up => (search.e_upper - e, Box::new(|d| e + d)),
            Direction::Down => (e * (1.0 - 1e-12), Box::new(|d| e - d)),
        };
        if !(limit > 0.0) || score(at(limit))? < phi {
            return Ok(None);
        }
        let mut lo = 0.0;
        let mut hi = search.initial_step.min(limit);
        while score(at(hi))? < phi {
            lo = hi;
            hi = (2.0 * hi).min(limit);
        }
        while hi - lo > search.rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if score(at(mid))? >= phi {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi))
    };

    let up = search_dir(Direction::Up)?;
    let down = search_dir(Direction::Down)?;
    Ok(match (up, down) {
        (None, None) => DistinguishableDifference::IndistinguishableEverywhere,
        (Some(d), None) => DistinguishableDifference::Found { delta: d, direction: Direction::Up },
        (None, Some(d)) => DistinguishableDifference::Found { delta: d, direction: Direction::Down },
        (Some(u), Some(d)) if d <= u => DistinguishableDifference::Found { delta: d, direction: Direction::Down },
        (Some(u), Some(_)) => DistinguishableDifference::Found { delta: u, direction: Direction::Up },
    })
}

/// Where a score matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSource {
    Model,
    Empirical,
}

/// Anything that assigns a score to each grid cell pair.
pub trait ScoreMatrix {
    fn grid(&self) -> &EffusivityGrid;
    fn score(&self, i: usize, j: usize) -> f64;

    fn size(&self) -> usize {
        self.grid().n_intervals()
    }
}

/// Pairwise F1 scores over an effusivity grid (row-major, symmetric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Matrix {
    pub source: MatrixSource,
    pub grid: EffusivityGrid,
    pub conditions: MatrixConditions,
    scores: Vec<Vec<f64>>,
}

impl F1Matrix {
    /// Builds a matrix from a full square table.
    pub fn from_rows(
        source: MatrixSource,
        grid: EffusivityGrid,
        conditions: MatrixConditions,
        scores: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = grid.n_intervals();
        if scores.len() != n || scores.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("expected a {n}x{n} score table")));
        }
        Ok(Self {
            source,
            grid,
            conditions,
            scores,
        })
    }

    /// Fills a symmetric matrix from an upper-triangle evaluator; the
    /// diagonal is computed too. Pairs run in parallel, each independently.
    pub(crate) fn from_upper<F>(
        source: MatrixSource,
        grid: EffusivityGrid,
        conditions: MatrixConditions,
        eval: F,
    ) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        let n = grid.n_intervals();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| eval(i, j)).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        let mut scores = vec![vec![0.0; n]; n];
        for (i, row) in upper.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                let j = i + k;
                scores[i][j] = v;
                scores[j][i] = v;
            }
        }
        Self::from_rows(source, grid, conditions, scores)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i][j]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_table_csv(path, &self.grid, self.scores.iter().map(|r| r.iter().map(|v| v.to_string())))
    }

    /// Reads a matrix CSV. The grid is reconstructed from the midpoint
    /// header; conditions are not part of the CSV and must be supplied.
    pub fn read_csv(path: &Path, source: MatrixSource, conditions: MatrixConditions) -> Result<Self> {
        let (grid, rows) = read_table_csv(path)?;
        Self::from_rows(source, grid, conditions, rows)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&s)?;
        Self::from_rows(m.source, m.grid, m.conditions, m.scores)
    }
}

impl ScoreMatrix for F1Matrix {
    fn grid(&self) -> &EffusivityGrid {
        &self.grid
    }

    fn score(&self, i: usize, j: usize) -> f64 {
        self.scores[i][j]
    }
}

/// Closed-form F1 for every pair of interval midpoints.
pub fn f1_matrix(sensor: &SensorParams, grid: &EffusivityGrid, cond: &ContactConditions, sigma: f64) -> Result<F1Matrix> {
    check_inputs(sensor, cond, sigma)?;
    let n = sensor.samples_in(cond.t_contact);
    if n == 0 {
        return Err(Error::EmptyTrace {
            t_contact: cond.t_contact,
            sample_rate: sensor.sample_rate,
        });
    }
    let integral = erfc_sq_integral(sensor, cond.t_contact)?;
    let t_surf: Vec<f64> = grid
        .midpoints()
        .into_iter()
        .map(|e| surface_temperature(sensor, &MaterialSample { effusivity: e }, cond))
        .collect();
    let conditions = MatrixConditions {
        sensor: *sensor,
        contact: *cond,
        sigma,
    };
    F1Matrix::from_upper(MatrixSource::Model, *grid, conditions, |i, j| {
        if i == j {
            return Ok(0.5);
        }
        f1_from_lambda(lambda_from_gap(t_surf[i] - t_surf[j], sigma, sensor, integral), n)
    })
}

/// Thresholded score matrix: 1 = distinguishable (score ≥ phi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMap {
    pub grid: EffusivityGrid,
    pub phi: f64,
    bits: Vec<Vec<u8>>,
}

impl BinaryMap {
    pub fn bit(&self, i: usize, j: usize) -> u8 {
        self.bits[i][j]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.bits
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_table_csv(path, &self.grid, self.bits.iter().map(|r| r.iter().map(|v| v.to_string())))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
    }
}

impl ScoreMatrix for BinaryMap {
    fn grid(&self) -> &EffusivityGrid {
        &self.grid
    }

    fn score(&self, i: usize, j: usize) -> f64 {
        f64::from(self.bits[i][j])
    }
}

pub fn binary_map(m: &impl ScoreMatrix, phi: f64) -> BinaryMap {
    let n = m.size();
    let bits = (0..n)
        .map(|i| (0..n).map(|j| u8::from(m.score(i, j) >= phi)).collect())
        .collect();
    BinaryMap {
        grid: *m.grid(),
        phi,
        bits,
    }
}

/// Upper-triangle agreement between two maps, in percent.
pub fn matrix_match(a: &BinaryMap, b: &BinaryMap) -> Result<f64> {
    let n = a.bits.len();
    if n != b.bits.len() {
        return Err(Error::Dimension(format!("{n}x{n} map vs {m}x{m} map", m = b.bits.len())));
    }
    if n < 2 {
        return Err(Error::Dimension("maps need at least 2 rows".into()));
    }
    let mut differing = 0usize;
    for i in 0..n - 1 {
        for j in i + 1..n {
            differing += usize::from(a.bits[i][j] != b.bits[i][j]);
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok((1.0 - differing as f64 / pairs) * 100.0)
}

/// Percentage of upper-triangle cells scoring below `phi`.
pub fn indistinguishable_percentage(m: &impl ScoreMatrix, phi: f64) -> f64 {
    let n = m.size();
    let mut below = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            below += usize::from(m.score(i, j) < phi);
        }
    }
    below as f64 / (n * (n - 1) / 2) as f64 * 100.0
}

/// Grid cells whose midpoints fall inside `[lo, hi]`; when none do, the
/// single midpoint nearest the range centre.
fn covered_cells(grid: &EffusivityGrid, rec: &MaterialRecord) -> Result<Vec<usize>> {
    if rec.e_max <= grid.e_min() || rec.e_min > grid.e_max() {
        return Err(Error::Range(format!(
            "{} [{}, {}] does not intersect ({}, {}]",
            rec.name,
            rec.e_min,
            rec.e_max,
            grid.e_min(),
            grid.e_max()
        )));
    }
    let cells: Vec<usize> = (0..grid.n_intervals())
        .filter(|&i| {
            let m = grid.midpoint(i);
            m >= rec.e_min && m <= rec.e_max
        })
        .collect();
    if !cells.is_empty() {
        return Ok(cells);
    }
    let centre = rec.midpoint();
    let nearest = (0..grid.n_intervals())
        .min_by(|&a, &b| {
            (grid.midpoint(a) - centre)
                .abs()
                .total_cmp(&(grid.midpoint(b) - centre).abs())
        })
        .expect("grid has intervals");
    Ok(vec![nearest])
}

/// Mean F1 over the rectangle of cells covered by the two materials'
/// effusivity ranges.
pub fn material_pair_avg_f1(m: &impl ScoreMatrix, a: &MaterialRecord, b: &MaterialRecord) -> Result<f64> {
    let (ca, cb) = (covered_cells(m.grid(), a)?, covered_cells(m.grid(), b)?);
    let mut sum = 0.0;
    for &i in &ca {
        for &j in &cb {
            sum += m.score(i, j);
        }
    }
    Ok(sum / (ca.len() * cb.len()) as f64)
}

/// Same average as [`material_pair_avg_f1`], computed with fresh closed-form
/// evaluations at the covered midpoints instead of matrix lookups.
pub fn material_pair_avg_f1_direct(
    sensor: &SensorParams,
    grid: &EffusivityGrid,
    cond: &ContactConditions,
    sigma: f64,
    a: &MaterialRecord,
    b: &MaterialRecord,
) -> Result<f64> {
    let (ca, cb) = (covered_cells(grid, a)?, covered_cells(grid, b)?);
    let mut sum = 0.0;
    for &i in &ca {
        for &j in &cb {
            sum += if i == j {
                0.5
            } else {
                f1_pair(sensor, grid.midpoint(i), grid.midpoint(j), cond, sigma)?
            };
        }
    }
    Ok(sum / (ca.len() * cb.len()) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub name: String,
    pub category: Category,
    /// Effusivity the node radius is proportional to.
    pub effusivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    pub avg_f1: f64,
}

/// Materials as nodes; an edge joins every indistinguishable pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGraph {
    pub phi: f64,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

pub fn build_node_graph(db: &MaterialDatabase, m: &impl ScoreMatrix, phi: f64) -> Result<NodeGraph> {
    let recs = db.records();
    let nodes = recs
        .iter()
        .map(|r| GraphNode {
            name: r.name.clone(),
            category: r.category,
            effusivity: r.representative_effusivity(),
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..recs.len() {
        for j in i + 1..recs.len() {
            let avg = material_pair_avg_f1(m, &recs[i], &recs[j])?;
            if avg < phi {
                edges.push(GraphEdge { a: i, b: j, avg_f1: avg });
            }
        }
    }
    Ok(NodeGraph { phi, nodes, edges })
}

/// Percentage of material pairs whose average F1 is below `phi`.
pub fn material_indistinguishable_percentage(db: &MaterialDatabase, m: &impl ScoreMatrix, phi: f64) -> Result<f64> {
    let recs = db.records();
    let mut below = 0usize;
    let mut total = 0usize;
    for i in 0..recs.len() {
        for j in i + 1..recs.len() {
            total += 1;
            below += usize::from(material_pair_avg_f1(m, &recs[i], &recs[j])? < phi);
        }
    }
    if total == 0 {
        return Err(Error::Dimension("need at least two materials".into()));
    }
    Ok(below as f64 / total as f64 * 100.0)
}

fn category_color(c: Category) -> &'static str {
    match c {
        Category::MetalsAlloys => "#9fb4c7",
        Category::CeramicsGlasses => "#e8c872",
        Category::PolymersElastomers => "#e07a5f",
        Category::CompositesFoamsNatural => "#81b29a",
    }
}

fn rescale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        0.5 * (out_lo + out_hi)
    } else {
        out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
    }
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

impl NodeGraph {
    pub fn indistinguishable_percentage(&self) -> f64 {
        let n = self.nodes.len();
        if n < 2 {
            return 0.0;
        }
        self.edges.len() as f64 / (n * (n - 1) / 2) as f64 * 100.0
    }

    /// Graphviz rendering. Node `width` is linear in effusivity on
    /// [0.2, 2.0]; edge `penwidth` is linear in 1/avg_f1 on [0.5, 5.0].
    pub fn to_dot(&self) -> String {
        let (e_lo, e_hi) = self
            .nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| (lo.min(n.effusivity), hi.max(n.effusivity)));
        let (w_lo, w_hi) = self
            .edges
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                (lo.min(1.0 / e.avg_f1), hi.max(1.0 / e.avg_f1))
            });
        let mut out = String::new();
        out.push_str("graph materials {\n");
        let _ = writeln!(out, "    // edges join pairs with average F1 < {}", self.phi);
        out.push_str("    node [shape=circle, style=filled, fixedsize=true, fontsize=10];\n");
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "    {} [width={:.3}, fillcolor=\"{}\", category=\"{}\", effusivity={}];",
                dot_id(&n.name),
                rescale(n.effusivity, e_lo, e_hi, 0.2, 2.0),
                category_color(n.category),
                n.category,
                n.effusivity
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "    {} -- {} [penwidth={:.3}, label=\"{:.3}\"];",
                dot_id(&self.nodes[e.a].name),
                dot_id(&self.nodes[e.b].name),
                rescale(1.0 / e.avg_f1, w_lo, w_hi, 0.5, 5.0),
                e.avg_f1
            );
        }
        out.push_str("}\n");
        out
    }
}

fn write_table_csv<R, I>(path: &Path, grid: &EffusivityGrid, rows: R) -> Result<()>
where
    R: Iterator<Item = I>,
    I: Iterator<Item = String>,
{
    let mut out = String::new();
    let header: Vec<String> = grid.midpoints().iter().map(|m| m.to_string()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_table_csv(path: &Path) -> Result<(EffusivityGrid, Vec<Vec<f64>>)> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = src.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let parse_row = |line: usize, l: &str| -> Result<Vec<f64>> {
        l.split(',')
            .enumerate()
            .map(|(c, v)| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: line + 1,
                    column: c + 1,
                    message: format!("`{v}`: {e}"),
                })
            })
            .collect()
    };
    let (hl, header) = lines.next().ok_or_else(|| Error::Format(format!("{}: empty matrix file", path.display())))?;
    let mids = parse_row(hl, header)?;
    if mids.len() < 2 {
        return Err(Error::Dimension("matrix needs at least 2 columns".into()));
    }
    let width = mids[1] - mids[0];
    let n = mids.len();
    let grid = EffusivityGrid::new((mids[0] - 0.5 * width).max(0.0), mids[0] - 0.5 * width + n as f64 * width, n)?;
    let rows = lines.map(|(i, l)| parse_row(i, l)).collect::<Result<Vec<_>>>()?;
    Ok((grid, rows))
}
