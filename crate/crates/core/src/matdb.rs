//! Material database: CSV ingestion, the built-in twelve-material table and
//! trial sampling over an effusivity grid.
//!
//! CSV schema (one header line):
//!
//! ```text
//! name,category,e_min,e_max[,e_identified]
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatsim::derive_seed;
use crate::perfmodel::EffusivityGrid;

const BUILTIN_CSV: &str = include_str!("../data/builtin_materials.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    MetalsAlloys,
    CeramicsGlasses,
    PolymersElastomers,
    CompositesFoamsNatural,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::MetalsAlloys,
        Category::CeramicsGlasses,
        Category::PolymersElastomers,
        Category::CompositesFoamsNatural,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::MetalsAlloys => "metals_alloys",
            Category::CeramicsGlasses => "ceramics_glasses",
            Category::PolymersElastomers => "polymers_elastomers",
            Category::CompositesFoamsNatural => "composites_foams_natural",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    /// Case-insensitive; separators are ignored and the first word is
    /// enough (`Metals/Alloys`, `metals`, `METALS_ALLOYS`).
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let found = [
            ("metal", Category::MetalsAlloys),
            ("ceramic", Category::CeramicsGlasses),
            ("polymer", Category::PolymersElastomers),
            ("composite", Category::CompositesFoamsNatural),
        ]
        .into_iter()
        .find(|(prefix, _)| key.starts_with(prefix));
        found
            .map(|(_, c)| c)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialRecord {
    pub name: String,
    pub category: Category,
    pub e_min: f64,
    pub e_max: f64,
    pub e_identified: Option<f64>,
}

impl MaterialRecord {
    pub fn new(
        name: impl Into<String>,
        category: Category,
        e_min: f64,
        e_max: f64,
        e_identified: Option<f64>,
    ) -> Result<Self> {
        let rec = Self {
            name: name.into(),
            category,
            e_min,
            e_max,
            e_identified,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::Validation {
            name: self.name.clone(),
            reason,
        };
        if self.name.trim().is_empty() {
            return Err(fail("empty name".into()));
        }
        if !(self.e_min > 0.0) || !self.e_min.is_finite() || !self.e_max.is_finite() {
            return Err(fail(format!("e_min must be positive, got {}", self.e_min)));
        }
        if self.e_min > self.e_max {
            return Err(fail(format!("e_min {} exceeds e_max {}", self.e_min, self.e_max)));
        }
        if let Some(e) = self.e_identified {
            if !(e > 0.0) || !e.is_finite() {
                return Err(fail(format!("e_identified must be positive, got {e}")));
            }
        }
        Ok(())
    }

    /// Set when the identified effusivity lies outside the database range.
    /// Such values are kept as given.
    pub fn provenance_warning(&self) -> Option<String> {
        let e = self.e_identified?;
        (e < self.e_min || e > self.e_max).then(|| {
            format!(
                "{}: identified effusivity {e} lies outside its range [{}, {}]",
                self.name, self.e_min, self.e_max
            )
        })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.e_min + self.e_max)
    }

    /// Identified effusivity when known, otherwise the range midpoint.
    pub fn representative_effusivity(&self) -> f64 {
        self.e_identified.unwrap_or_else(|| self.midpoint())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialDatabase {
    records: Vec<MaterialRecord>,
}

impl MaterialDatabase {
    pub fn new(records: Vec<MaterialRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        let mut seen = HashSet::new();
        for r in &records {
            r.validate()?;
            if !seen.insert(r.name.as_str()) {
                return Err(Error::Validation {
                    name: r.name.clone(),
                    reason: "duplicate name".into(),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[MaterialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&MaterialRecord> {
        self.records.iter().find(|r| r.name.eq_ignore_ascii_case(name))
    }

    pub fn warnings(&self) -> Vec<String> {
        self.records.iter().filter_map(|r| r.provenance_warning()).collect()
    }

    pub fn from_csv_str(src: &str) -> Result<Self> {
        if src.trim().is_empty() {
            return Err(Error::EmptyDatabase);
        }
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(src.as_bytes());
        let headers = rdr.headers()?.clone();
        let expected = ["name", "category", "e_min", "e_max", "e_identified"];
        let ok_header = (headers.len() == 4 || headers.len() == 5)
            && headers
                .iter()
                .zip(expected)
                .all(|(h, e)| h.eq_ignore_ascii_case(e));
        if !ok_header {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!(
                    "expected header `name,category,e_min,e_max[,e_identified]`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }

        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            if rec.len() != 4 && rec.len() != 5 {
                return Err(Error::Parse {
                    line,
                    column: rec.len().min(5) + 1,
                    message: format!("expected 4 or 5 fields, found {}", rec.len()),
                });
            }
            let num = |col: usize| -> Result<f64> {
                rec[col].parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    column: col + 1,
                    message: format!("`{}`: {e}", &rec[col]),
                })
            };
            let category = rec[1].parse::<Category>().map_err(|message| Error::Parse {
                line,
                column: 2,
                message,
            })?;
            let e_identified = match rec.get(4) {
                Some(s) if !s.is_empty() => Some(num(4)?),
                _ => None,
            };
            let record = MaterialRecord {
                name: rec[0].to_string(),
                category,
                e_min: num(2)?,
                e_max: num(3)?,
                e_identified,
            };
            record.validate().map_err(|e| match e {
                Error::Validation { name, reason } => Error::Validation {
                    name: format!("{name} (row {line})"),
                    reason,
                },
                other => other,
            })?;
            records.push(record);
        }
        Self::new(records)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("name,category,e_min,e_max,e_identified\n");
        for r in &self.records {
            let ident = r.e_identified.map(|e| e.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                quote_field(&r.name),
                r.category,
                r.e_min,
                r.e_max,
                ident
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

fn quote_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Reads and validates a material CSV file.
pub fn load_database(path: &Path) -> Result<MaterialDatabase> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MaterialDatabase::from_csv_str(&src)
}

/// The twelve materials of the robot experiment with their identified
/// effusivities and database ranges, verbatim.
pub fn builtin_appendix_table() -> MaterialDatabase {
    MaterialDatabase::from_csv_str(BUILTIN_CSV).expect("built-in table is valid")
}

/// Raw text of the built-in table.
pub fn builtin_appendix_csv() -> &'static str {
    BUILTIN_CSV
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSample {
    pub interval: usize,
    pub effusivity: f64,
}

/// Draws `trials_per_interval` effusivities uniformly from each grid
/// interval `(lo, hi]`. Each interval has its own RNG stream.
pub fn sample_trials(grid: &EffusivityGrid, trials_per_interval: usize, seed: u64) -> Result<Vec<TrialSample>> {
    if trials_per_interval == 0 {
        return Err(Error::domain("trials_per_interval must be at least 1"));
    }
    let mut out = Vec::with_capacity(grid.n_intervals() * trials_per_interval);
    for i in 0..grid.n_intervals() {
        out.extend(sample_interval(grid, i, trials_per_interval, seed));
    }
    Ok(out)
}

pub(crate) fn sample_interval(grid: &EffusivityGrid, interval: usize, trials: usize, seed: u64) -> Vec<TrialSample> {
    let (lo, hi) = grid.bounds(interval);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[interval as u64]));
    (0..trials)
        .map(|_| {
            let u: f64 = rng.random();
            TrialSample {
                interval,
                effusivity: hi - u * (hi - lo),
            }
        })
        .collect()
}
