//! Result tables, chain files and the run manifest.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::dataset::csv_error;
use crate::io::format_number;
use crate::sampler::Chain;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format_number(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(&self.columns).map_err(|e| csv_error(path, e))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One row per stored state: iteration, beta_0.., tau2, b, cpe.
pub fn chain_table(chain: &Chain) -> Table {
    let p = chain.states.first().map_or(0, |s| s.beta.len());
    let mut columns = vec!["iteration".to_string()];
    columns.extend((0..p).map(|j| format!("beta_{j}")));
    columns.extend(["tau2", "b", "cpe"].map(String::from));
    let mut table = Table::new(columns);
    for (k, s) in chain.states.iter().enumerate() {
        let mut row: Vec<Cell> = vec![(chain.burn_in + k + 1).into()];
        row.extend(s.beta.iter().map(|&v| Cell::Num(v)));
        row.extend([Cell::Num(s.tau2), Cell::Num(s.b), Cell::Num(s.cpe)]);
        table.rows.push(row);
    }
    table
}

pub fn write_chain(path: &Path, chain: &Chain) -> Result<()> {
    chain_table(chain).write(path)
}

/// Columns of a chain file read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFile {
    pub iterations: Vec<usize>,
    /// `beta[j][g]`
    pub beta: Vec<Vec<f64>>,
    pub tau2: Vec<f64>,
    pub b: Vec<f64>,
    pub cpe: Vec<f64>,
}

impl ChainFile {
    /// Column means in file order (beta_0.., tau2, b, cpe).
    pub fn column_means(&self) -> Vec<f64> {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mut out: Vec<f64> = self.beta.iter().map(|c| mean(c)).collect();
        out.extend([mean(&self.tau2), mean(&self.b), mean(&self.cpe)]);
        out
    }
}

pub fn read_chain(path: &Path) -> Result<ChainFile> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let p = names.iter().filter(|h| h.starts_with("beta_")).count();
    let expected = p + 4;
    if names.len() != expected || names[0] != "iteration" || names[expected - 3..] != ["tau2", "b", "cpe"] {
        return Err(Error::MissingColumn("iteration, beta_j, tau2, b, cpe".into()));
    }
    let mut out = ChainFile {
        iterations: Vec::new(),
        beta: vec![Vec::new(); p],
        tau2: Vec::new(),
        b: Vec::new(),
        cpe: Vec::new(),
    };
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| csv_error(path, e))?;
        let num = |j: usize| -> Result<f64> {
            record[j].parse::<f64>().map_err(|e| Error::Parse {
                row,
                column: names[j].to_string(),
                message: e.to_string(),
            })
        };
        out.iterations
            .push(record[0].parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                row,
                column: "iteration".into(),
                message: e.to_string(),
            })?);
        for j in 0..p {
            out.beta[j].push(num(1 + j)?);
        }
        out.tau2.push(num(p + 1)?);
        out.b.push(num(p + 2)?);
        out.cpe.push(num(p + 3)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Single writer for one output directory; `finish` adds the manifest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: BTreeSet<String>,
    started: Instant,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: BTreeSet::new(),
            started: Instant::now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn claim(&mut self, name: &str) -> Result<PathBuf> {
        if name == MANIFEST_FILE || !self.files.insert(name.to_string()) {
            return Err(Error::InvalidArgument(format!("output file '{name}' written twice")));
        }
        Ok(self.root.join(name))
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.claim(name)?;
        table.write(&path)
    }

    pub fn write_chain(&mut self, name: &str, chain: &Chain) -> Result<()> {
        let path = self.claim(name)?;
        write_chain(&path, chain)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.claim(name)?;
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn finish<C: Serialize>(self, command: &str, seed: u64, config: &C) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?,
            files: self.files.iter().cloned().collect(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
