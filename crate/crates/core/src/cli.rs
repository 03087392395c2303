//! Command-line front end. Every command that writes files also writes a
//! `manifest.json` recording how to reproduce them.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::calib::{fit_material, FitConfig};
use crate::empirical::{empirical_matrix_with, ClassifierConfig, EmpiricalConfig, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::heatsim::{
    derive_seed, generate_trace_with_offset, list_trace_files, ContactConditions, MaterialSample, SensorParams,
    TemperatureTrace,
};
use crate::matdb::{builtin_appendix_table, load_database, MaterialDatabase};
use crate::perfmodel::{
    binary_map, build_node_graph, f1_matrix, indistinguishable_percentage, matrix_match,
    min_distinguishable_difference, predict_pair, DistinguishableDifference, EffusivityGrid, F1Matrix, DEFAULT_PHI,
};

pub const OUT_DIR_ENV: &str = "THERMOSENSE_OUT";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "thermosense", version, about = "Predict and check thermal-contact material recognition performance")]
pub struct Cli {
    /// Output directory
    #[arg(long, short, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate noisy contact traces
    Simulate(SimulateArgs),
    /// Predicted F1 for one pair of effusivities (JSON on stdout)
    Predict(PredictArgs),
    /// Pairwise F1 matrix over an effusivity grid
    Matrix(MatrixArgs),
    /// Minimum distinguishable effusivity difference curve
    Delta(DeltaArgs),
    /// Material indistinguishability graph (Graphviz DOT)
    Graph(GraphArgs),
    /// Classifier F1 matrix and its match against the model
    Compare(CompareArgs),
    /// Fit effusivity and time offset to recorded traces
    Fit(FitArgs),
    /// Show, check or export a material database
    Materials(MaterialsArgs),
    /// Re-run the command recorded in a manifest
    Replay(ReplayArgs),
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be non-negative, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn finite(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be finite, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn threshold(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.5 && v < 1.0 => Ok(v),
        Ok(v) => Err(format!("must lie in (0.5, 1), got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let lo = finite(a.trim())?;
    let hi = finite(b.trim())?;
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(format!("need LO < HI, got {lo},{hi}"))
    }
}

fn at_least_two(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        Ok(v) => Err(format!("must be at least 2, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least_one(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        Ok(_) => Err("must be at least 1".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Sensor constants and contact conditions shared by most commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ConditionArgs {
    /// Initial sensor temperature, °C
    #[arg(long, default_value_t = 35.0, value_parser = finite)]
    pub tsens0: f64,
    /// Ambient (initial object) temperature, °C
    #[arg(long, default_value_t = 25.0, value_parser = finite)]
    pub tamb: f64,
    /// Contact duration, s
    #[arg(long, default_value_t = 2.0, value_parser = positive)]
    pub duration: f64,
    /// Measurement noise standard deviation, °C
    #[arg(long, default_value_t = 0.05, value_parser = positive)]
    pub sigma: f64,
    #[arg(long, default_value_t = 200.0, value_parser = positive)]
    pub sample_rate: f64,
    #[arg(long, default_value_t = 892.0, value_parser = positive)]
    pub e_sens: f64,
    #[arg(long, default_value_t = 1.19e-9, value_parser = positive)]
    pub alpha_sens: f64,
    /// Thermistor depth below the contact surface, m
    #[arg(long, default_value_t = 8e-5, value_parser = positive)]
    pub depth: f64,
}

impl ConditionArgs {
    fn sensor(&self) -> SensorParams {
        SensorParams {
            e_sens: self.e_sens,
            alpha_sens: self.alpha_sens,
            thermistor_depth: self.depth,
            sample_rate: self.sample_rate,
            noise_sigma: self.sigma,
        }
    }

    fn contact(&self) -> ContactConditions {
        ContactConditions {
            t_sens0: self.tsens0,
            t_obj0: self.tamb,
            t_contact: self.duration,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 500, value_parser = at_least_two)]
    pub intervals: usize,
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub e_min: f64,
    #[arg(long, default_value_t = 40000.0, value_parser = positive)]
    pub e_max: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<EffusivityGrid> {
        EffusivityGrid::new(self.e_min, self.e_max, self.intervals)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Object effusivity, J·s^-1/2·K^-1·m^-2
    #[arg(long, value_parser = positive, required_unless_present = "material", conflicts_with = "material")]
    pub effusivity: Option<f64>,
    /// Built-in material name (uses its identified effusivity)
    #[arg(long)]
    pub material: Option<String>,
    #[command(flatten)]
    pub cond: ConditionArgs,
    #[arg(long, default_value_t = 1, value_parser = at_least_one)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Clock offset, s; negative means recording started before contact
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = finite)]
    pub offset: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long, value_parser = positive)]
    pub e1: f64,
    #[arg(long, value_parser = positive)]
    pub e2: f64,
    #[command(flatten)]
    pub cond: ConditionArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub cond: ConditionArgs,
    /// Distinguishability threshold on F1
    #[arg(long, default_value_t = DEFAULT_PHI, value_parser = threshold)]
    pub phi: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DeltaArgs {
    /// Effusivities to evaluate; defaults to the grid midpoints
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub e: Vec<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub cond: ConditionArgs,
    #[arg(long, default_value_t = DEFAULT_PHI, value_parser = threshold)]
    pub phi: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphArgs {
    /// `builtin` or a path to a material CSV
    #[arg(long, default_value = "builtin")]
    pub db: String,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub cond: ConditionArgs,
    #[arg(long, default_value_t = DEFAULT_PHI, value_parser = threshold)]
    pub phi: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 50, value_parser = at_least_two)]
    pub intervals: usize,
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub e_min: f64,
    #[arg(long, default_value_t = 40000.0, value_parser = positive)]
    pub e_max: f64,
    #[arg(long, default_value_t = 50, value_parser = at_least_one)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_FOLDS, value_parser = at_least_two)]
    pub folds: usize,
    /// Model matrix JSON to compare against; computed when omitted
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub cond: ConditionArgs,
    #[arg(long, default_value_t = DEFAULT_PHI, value_parser = threshold)]
    pub phi: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Directory of trace CSV files with JSON sidecars
    #[arg(long)]
    pub traces: PathBuf,
    /// Effusivity search range LO,HI
    #[arg(long, default_value = "30.5,40000", value_parser = range)]
    pub bounds: (f64, f64),
    /// Time offset search range LO,HI, s
    #[arg(long, default_value = "-1,1", allow_hyphen_values = true, value_parser = range)]
    pub offset_bounds: (f64, f64),
    /// Also fit e_sens and alpha_sens
    #[arg(long)]
    pub fit_sensor: bool,
    #[arg(long, default_value_t = 892.0, value_parser = positive)]
    pub e_sens: f64,
    #[arg(long, default_value_t = 1.19e-9, value_parser = positive)]
    pub alpha_sens: f64,
    #[arg(long, default_value_t = 8e-5, value_parser = positive)]
    pub depth: f64,
    #[arg(long, default_value_t = 500, value_parser = at_least_one)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MaterialsArgs {
    /// `builtin` or a path to a material CSV
    #[arg(long, default_value = "builtin")]
    pub db: String,
    /// Write the database as CSV into the output directory
    #[arg(long)]
    pub export: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Everything needed to reproduce a command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, with the output directory removed.
    pub args: Vec<String>,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Predict(_) => "predict",
        Command::Matrix(_) => "matrix",
        Command::Delta(_) => "delta",
        Command::Graph(_) => "graph",
        Command::Compare(_) => "compare",
        Command::Fit(_) => "fit",
        Command::Materials(_) => "materials",
        Command::Replay(_) => "replay",
    }
}

/// Drops `--out X`, `--out=X`, `-o X` and `-oX` from an argument list.
fn strip_out_dir(args: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" || a == "-o" {
            skip = true;
        } else if !(a.starts_with("--out=") || (a.starts_with("-o") && !a.starts_with("--"))) {
            out.push(a.clone());
        }
    }
    out
}

struct Run<'a> {
    out: &'a Path,
    argv: &'a [String],
    command: &'a Command,
}

impl Run<'_> {
    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(self.out).map_err(|e| Error::io(self.out, e))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let p = self.path(name);
        let s = serde_json::to_string_pretty(value)?;
        fs::write(&p, s + "\n").map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    fn manifest(&self, seed: Option<u64>) -> Result<()> {
        let m = RunManifest {
            command: command_name(self.command).into(),
            args: strip_out_dir(self.argv),
            params: serde_json::to_value(self.command)?,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        self.write_json(MANIFEST_FILE, &m).map(|_| ())
    }
}

fn open_db(source: &str) -> Result<MaterialDatabase> {
    if source == "builtin" {
        Ok(builtin_appendix_table())
    } else {
        load_database(Path::new(source))
    }
}

fn simulate(run: &Run, a: &SimulateArgs) -> Result<()> {
    let (label, e) = match (&a.material, a.effusivity) {
        (Some(name), _) => {
            let db = builtin_appendix_table();
            let rec = db
                .get(name)
                .ok_or_else(|| Error::domain(format!("unknown material `{name}`")))?;
            (rec.name.clone(), rec.representative_effusivity())
        }
        (None, Some(e)) => (format!("e={e}"), e),
        (None, None) => return Err(Error::domain("give --effusivity or --material")),
    };
    let sensor = a.cond.sensor();
    let cond = a.cond.contact();
    let material = MaterialSample::new(e)?;
    run.prepare()?;
    for k in 0..a.trials {
        let seed = derive_seed(a.seed, &[k as u64]);
        let mut trace = generate_trace_with_offset(&sensor, &material, &cond, a.offset, seed)?;
        trace.meta.material = label.clone();
        trace.write(&run.path(&format!("trace_{k:04}")))?;
    }
    run.manifest(Some(a.seed))
}

fn predict(a: &PredictArgs) -> Result<()> {
    let p = predict_pair(&a.cond.sensor(), a.e1, a.e2, &a.cond.contact(), a.cond.sigma)?;
    println!("{}", serde_json::to_string_pretty(&p)?);
    Ok(())
}

fn matrix(run: &Run, a: &MatrixArgs) -> Result<()> {
    let grid = a.grid.grid()?;
    let m = f1_matrix(&a.cond.sensor(), &grid, &a.cond.contact(), a.cond.sigma)?;
    let map = binary_map(&m, a.phi);
    run.prepare()?;
    m.write_csv(&run.path("f1_matrix.csv"))?;
    m.write_json(&run.path("f1_matrix.json"))?;
    map.write_csv(&run.path("binary_map.csv"))?;
    let pct = indistinguishable_percentage(&m, a.phi);
    run.write_json(
        "summary.json",
        &json!({ "phi": a.phi, "intervals": grid.n_intervals(), "indistinguishable_percent": pct }),
    )?;
    println!("indistinguishable pairs: {pct:.2}%");
    run.manifest(None)
}

fn delta(run: &Run, a: &DeltaArgs) -> Result<()> {
    let es = if a.e.is_empty() { a.grid.grid()?.midpoints() } else { a.e.clone() };
    let (sensor, cond) = (a.cond.sensor(), a.cond.contact());
    let rows = es
        .iter()
        .map(|&e| min_distinguishable_difference(&sensor, e, &cond, a.cond.sigma, a.phi).map(|d| (e, d)))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("effusivity,delta,direction\n");
    for (e, d) in rows {
        match d {
            DistinguishableDifference::Found { delta, direction } => {
                let dir = serde_json::to_value(direction)?;
                csv.push_str(&format!("{e},{delta},{}\n", dir.as_str().unwrap_or_default()));
            }
            DistinguishableDifference::IndistinguishableEverywhere => {
                csv.push_str(&format!("{e},,none\n"));
            }
        }
    }
    run.prepare()?;
    run.write_text("delta.csv", &csv)?;
    run.manifest(None)
}

fn graph(run: &Run, a: &GraphArgs) -> Result<()> {
    let db = open_db(&a.db)?;
    for w in db.warnings() {
        eprintln!("warning: {w}");
    }
    let m = f1_matrix(&a.cond.sensor(), &a.grid.grid()?, &a.cond.contact(), a.cond.sigma)?;
    let g = build_node_graph(&db, &m, a.phi)?;
    run.prepare()?;
    run.write_text("materials.dot", &g.to_dot())?;
    run.write_json("graph.json", &g)?;
    println!("indistinguishable material pairs: {:.2}%", g.indistinguishable_percentage());
    run.manifest(None)
}

fn compare(run: &Run, a: &CompareArgs) -> Result<()> {
    let grid = EffusivityGrid::new(a.e_min, a.e_max, a.intervals)?;
    let (sensor, cond) = (a.cond.sensor(), a.cond.contact());
    let model = match &a.model {
        Some(p) => F1Matrix::read_json(p)?,
        None => f1_matrix(&sensor, &grid, &cond, a.cond.sigma)?,
    };
    let cfg = EmpiricalConfig {
        trials_per_interval: a.trials,
        folds: a.folds,
        seed: a.seed,
        classifier: ClassifierConfig::default(),
    };
    let emp = empirical_matrix_with(&sensor, &grid, &cond, a.cond.sigma, &cfg)?;
    let (mm, em) = (binary_map(&model, a.phi), binary_map(&emp, a.phi));
    let pct = matrix_match(&mm, &em)?;
    run.prepare()?;
    emp.write_csv(&run.path("empirical_matrix.csv"))?;
    emp.write_json(&run.path("empirical_matrix.json"))?;
    run.write_json(
        "match.json",
        &json!({
            "match_percent": pct,
            "phi": a.phi,
            "intervals": a.intervals,
            "trials_per_interval": a.trials,
            "model_indistinguishable_percent": indistinguishable_percentage(&model, a.phi),
            "empirical_indistinguishable_percent": indistinguishable_percentage(&emp, a.phi),
        }),
    )?;
    println!("percent matching: {pct:.2}%");
    run.manifest(Some(a.seed))
}

fn fit(run: &Run, a: &FitArgs) -> Result<()> {
    let files = list_trace_files(&a.traces)?;
    if files.is_empty() {
        return Err(Error::domain(format!("no traces in {}", a.traces.display())));
    }
    let traces = files.iter().map(|p| TemperatureTrace::read(p)).collect::<Result<Vec<_>>>()?;
    let sensor = SensorParams {
        e_sens: a.e_sens,
        alpha_sens: a.alpha_sens,
        thermistor_depth: a.depth,
        sample_rate: traces[0].meta.sample_rate,
        noise_sigma: 0.0,
    };
    let cfg = FitConfig {
        e_bounds: a.bounds,
        offset_bounds: a.offset_bounds,
        fit_sensor_params: a.fit_sensor,
        max_iters: a.max_iters,
        ..FitConfig::default()
    };
    let r = fit_material(&traces, &sensor, &cfg)?;
    run.prepare()?;
    run.write_json("fit.json", &r)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    run.manifest(None)
}

fn materials(run: &Run, a: &MaterialsArgs) -> Result<()> {
    let db = open_db(&a.db)?;
    for w in db.warnings() {
        eprintln!("warning: {w}");
    }
    if a.export {
        run.prepare()?;
        db.save(&run.path("materials.csv"))?;
        return run.manifest(None);
    }
    print!("{}", db.to_csv_string());
    Ok(())
}

fn replay(out: &Path, a: &ReplayArgs) -> Result<()> {
    let src = fs::read_to_string(&a.manifest).map_err(|e| Error::io(&a.manifest, e))?;
    let m: RunManifest = serde_json::from_str(&src)?;
    if m.command == "replay" {
        return Err(Error::Format("a replay manifest cannot be replayed".into()));
    }
    let recorded = a.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    if fs::canonicalize(&recorded).ok() == fs::canonicalize(out).ok() {
        return Err(Error::domain("replay needs an output directory other than the manifest's"));
    }
    let mut argv = vec!["thermosense".to_string(), "--out".into(), out.display().to_string()];
    argv.extend(m.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::Format(format!("manifest arguments: {e}")))?;
    execute(&cli, &m.args)
}

fn execute(cli: &Cli, argv: &[String]) -> Result<()> {
    let run = Run {
        out: &cli.out,
        argv,
        command: &cli.command,
    };
    match &cli.command {
        Command::Simulate(a) => simulate(&run, a),
        Command::Predict(a) => predict(a),
        Command::Matrix(a) => matrix(&run, a),
        Command::Delta(a) => delta(&run, a),
        Command::Graph(a) => graph(&run, a),
        Command::Compare(a) => compare(&run, a),
        Command::Fit(a) => fit(&run, a),
        Command::Materials(a) => materials(&run, a),
        Command::Replay(a) => replay(&cli.out, a),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 ok, 1 runtime failure, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Domain(_) | Error::Validation { .. } => 2,
                _ => 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_output_dir_forms() {
        let a: Vec<String> = ["--out", "x", "matrix", "-o", "y", "--out=z", "-oq", "--intervals", "5"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(strip_out_dir(&a), vec!["matrix", "--intervals", "5"]);
    }

    #[test]
    fn range_parser() {
        assert_eq!(range("30.5,40000"), Ok((30.5, 40000.0)));
        assert!(range("5,1").is_err());
        assert!(range("5").is_err());
    }
}
