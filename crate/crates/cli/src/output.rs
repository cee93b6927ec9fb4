//! CSV tables with `#` metadata headers, and the JSON report.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use kpzlab::experiments::Criterion;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One CSV file: `suffix` is appended to `<subcommand>-<seed>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub suffix: Option<String>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            suffix: None,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn named(suffix: &str, columns: &[&'static str]) -> Self {
        Self {
            suffix: Some(suffix.to_string()),
            ..Self::new(columns)
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self, subcommand: &str, seed: u64) -> String {
        match &self.suffix {
            None => format!("{subcommand}-{seed}.csv"),
            Some(s) => format!("{subcommand}-{seed}-{s}.csv"),
        }
    }
}

/// Shortest round-trip decimal.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn header(subcommand: &str, cfg: &ExperimentConfig) -> String {
    let mut h = format!("# kpzlab {VERSION}\n# subcommand: {subcommand}\n");
    for line in cfg.to_toml().lines() {
        h.push_str("# ");
        h.push_str(line);
        h.push('\n');
    }
    h
}

pub fn write_table(dir: &Path, subcommand: &str, cfg: &ExperimentConfig, t: &Table) -> Result<PathBuf, CliError> {
    let path = dir.join(t.file_name(subcommand, cfg.seed));
    let mut out = BufWriter::new(File::create(&path)?);
    out.write_all(header(subcommand, cfg).as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&t.columns)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn criteria_json(c: &[Criterion]) -> Value {
    c.iter()
        .map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail}))
        .collect()
}

/// Writes every table and the JSON report; returns the written paths.
pub fn write_outputs(
    subcommand: &str,
    cfg: &ExperimentConfig,
    tables: &[Table],
    criteria: &[Criterion],
    results: Value,
    wall_time: f64,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&cfg.out_dir)?;
    let mut paths = Vec::new();
    for t in tables {
        paths.push(write_table(&cfg.out_dir, subcommand, cfg, t)?);
    }
    let report = json!({
        "name": subcommand,
        "version": VERSION,
        "config": cfg,
        "criteria": criteria_json(criteria),
        "passed": criteria.iter().all(|c| c.passed),
        "results": results,
        "outputs": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "wall_time_s": wall_time,
    });
    let path = cfg.out_dir.join(format!("{subcommand}-{}.json", cfg.seed));
    let mut f = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut f, &report)?;
    f.write_all(b"\n")?;
    f.flush()?;
    paths.push(path);
    Ok(paths)
}
