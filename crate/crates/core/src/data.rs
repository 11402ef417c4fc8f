//! Experiments, the built-in training sets, noisy data generation and CSV I/O.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{impact_distance, LaunchInput, PhysicsParams};
use crate::rng;

pub const DATASET_HEADER: [&str; 4] = ["id", "psi_deg", "v0_mps", "y_m"];
pub const DESIGN_HEADER: [&str; 2] = ["psi_deg", "v0_mps"];

/// Observation noise used for the training data, m.
pub const REFERENCE_SIGMA_M: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub id: String,
    /// degrees
    pub psi: f64,
    /// m/s
    pub v0: f64,
    /// m
    pub y_obs: f64,
}

impl Experiment {
    pub fn launch(&self) -> Result<LaunchInput> {
        LaunchInput::new(self.v0, self.psi)
    }

    /// Launch coordinates without re-validation; experiments inside a
    /// [`Dataset`] were validated on construction.
    pub fn input(&self) -> LaunchInput {
        LaunchInput {
            v0: self.v0,
            psi: self.psi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    experiments: Vec<Experiment>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, experiments: Vec<Experiment>) -> Result<Self> {
        if experiments.is_empty() {
            return Err(Error::Empty("dataset has no experiments"));
        }
        let mut seen = HashSet::new();
        for e in &experiments {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
            if !e.y_obs.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "experiment {} has non-finite observation",
                    e.id
                )));
            }
            e.launch()?;
        }
        Ok(Self {
            name: name.into(),
            experiments,
        })
    }

    pub fn experiments(&self) -> &[Experiment] {
        &self.experiments
    }

    pub fn len(&self) -> usize {
        self.experiments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiments.is_empty()
    }

    pub fn launches(&self) -> Vec<LaunchInput> {
        self.experiments.iter().map(Experiment::input).collect()
    }

    pub fn observations(&self) -> Vec<f64> {
        self.experiments.iter().map(|e| e.y_obs).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// m
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }

    pub fn noiseless() -> Self {
        Self {
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// One noisy truth-model observation; the noise is the `draw_index`-th
/// variate of the seeded stream.
pub fn observe(
    params: &PhysicsParams,
    launch: &LaunchInput,
    noise: &NoiseSpec,
    draw_index: u64,
) -> Result<f64> {
    let y = impact_distance(params, launch)?;
    if noise.sigma == 0.0 {
        return Ok(y);
    }
    Ok(y + noise.sigma * rng::standard_normal_at(noise.seed, draw_index))
}

// (id, psi deg, v0 m/s, impact m)
const TABLE_ROWS: [(&str, f64, f64, f64); 8] = [
    ("1", 25.0, 60.0, 118.18),
    ("2", 30.0, 70.0, 159.79),
    ("3", 36.0, 80.0, 174.14),
    ("4", 45.0, 90.0, 181.67),
    ("5", 60.0, 75.0, 143.21),
    ("6a", 10.0, 42.0, 47.305),
    ("6b", 80.0, 53.0, 54.294),
    ("6c", 85.0, 71.0, 43.239),
];

/// All eight tabulated training experiments (shared rows 1–5 and the three
/// alternative sixth experiments).
pub fn reference_experiments() -> Vec<Experiment> {
    TABLE_ROWS
        .iter()
        .map(|&(id, psi, v0, y)| Experiment {
            id: id.to_string(),
            psi,
            v0,
            y_obs: y,
        })
        .collect()
}

/// Training set `A`, `B` or `C`: rows 1–5 plus 6a, 6b or 6c.
pub fn builtin_dataset(label: &str) -> Result<Dataset> {
    let sixth = match label {
        "A" => "6a",
        "B" => "6b",
        "C" => "6c",
        other => return Err(Error::UnknownDataset(other.to_string())),
    };
    let rows = reference_experiments()
        .into_iter()
        .filter(|e| e.id.len() == 1 || e.id == sixth)
        .collect();
    Dataset::new(label, rows)
}

/// Simulates one experiment per design with sequential draw indices 0, 1, ...
pub fn generate_dataset(
    name: &str,
    designs: &[LaunchInput],
    params: &PhysicsParams,
    noise: &NoiseSpec,
) -> Result<Dataset> {
    if designs.is_empty() {
        return Err(Error::Empty("no designs to simulate"));
    }
    let experiments = designs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            Ok(Experiment {
                id: (i + 1).to_string(),
                psi: d.psi,
                v0: d.v0,
                y_obs: observe(params, d, noise, i as u64)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(name, experiments)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(DATASET_HEADER)?;
    for e in ds.experiments() {
        w.write_record([
            e.id.clone(),
            e.psi.to_string(),
            e.v0.to_string(),
            e.y_obs.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut records = reader.records();
    let head = match records.next() {
        None => return Err(parse_err(0, "file is empty".into())),
        Some(r) => r?,
    };
    let got: Vec<&str> = head.iter().collect();
    if got != header {
        return Err(parse_err(
            0,
            format!(
                "expected header {}, found {}",
                header.join(","),
                got.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(parse_err(
                row,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        rows.push((row, rec));
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no data rows".into()));
    }
    Ok(rows)
}

fn parse_field(
    path: &Path,
    row: usize,
    rec: &csv::StringRecord,
    col: usize,
    name: &str,
) -> Result<f64> {
    let raw = &rec[col];
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: format!("{name}: {raw:?} is not a finite number"),
        })
}

/// Reads a dataset CSV; the dataset is named after the file stem.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let rows = read_rows(path, &DATASET_HEADER)?;
    let mut experiments = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    for (row, rec) in &rows {
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: *row,
                message: format!("duplicate id {id:?}"),
            });
        }
        let e = Experiment {
            id,
            psi: parse_field(path, *row, rec, 1, "psi_deg")?,
            v0: parse_field(path, *row, rec, 2, "v0_mps")?,
            y_obs: parse_field(path, *row, rec, 3, "y_m")?,
        };
        e.launch().map_err(|err| Error::Parse {
            path: path.to_path_buf(),
            row: *row,
            message: err.to_string(),
        })?;
        experiments.push(e);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, experiments)
}

/// Reads a design list (`psi_deg,v0_mps`).
pub fn load_designs(path: &Path) -> Result<Vec<LaunchInput>> {
    read_rows(path, &DESIGN_HEADER)?
        .iter()
        .map(|(row, rec)| {
            let psi = parse_field(path, *row, rec, 0, "psi_deg")?;
            let v0 = parse_field(path, *row, rec, 1, "v0_mps")?;
            LaunchInput::new(v0, psi).map_err(|err| Error::Parse {
                path: path.to_path_buf(),
                row: *row,
                message: err.to_string(),
            })
        })
        .collect()
}

pub fn save_designs(designs: &[LaunchInput], path: &Path) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = DESIGN_HEADER.join(",");
    out.push('\n');
    for d in designs {
        out.push_str(&format!("{},{}\n", d.psi, d.v0));
    }
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}
