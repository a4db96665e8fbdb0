//! Report rows, acceptance clauses and their CSV/JSON serialization.

use std::fs;
use std::path::Path;

use serde::Serialize;

/// One report line; empty cells are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub group: String,
    pub epsilon: Option<f64>,
    pub triple_id: String,
    pub term: String,
    pub value: Option<f64>,
    pub sigma: Option<f64>,
    pub residual: Option<f64>,
    pub residual_sigma: Option<f64>,
    pub target: Option<f64>,
    pub gap: Option<f64>,
    pub rate: Option<f64>,
}

impl Row {
    pub fn new(experiment: &str, group: &str, epsilon: Option<f64>, triple_id: &str, term: &str) -> Self {
        Row {
            experiment: experiment.into(),
            group: group.into(),
            epsilon,
            triple_id: triple_id.into(),
            term: term.into(),
            ..Row::default()
        }
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn sigma(mut self, s: f64) -> Self {
        self.sigma = Some(s);
        self
    }

    pub fn residual(mut self, r: f64, sigma: f64) -> Self {
        self.residual = Some(r);
        self.residual_sigma = Some(sigma);
        self
    }

    pub fn target(mut self, t: f64) -> Self {
        self.target = Some(t);
        self
    }

    pub fn gap(mut self, g: f64) -> Self {
        self.gap = Some(g);
        self
    }

    pub fn rate(mut self, r: Option<f64>) -> Self {
        self.rate = r;
        self
    }
}

/// A named acceptance assertion with the criterion it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Clause {
    pub fn new(criterion: u8, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Clause { criterion, name: name.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} [{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.criterion, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub rows: Vec<Row>,
    pub clauses: Vec<Clause>,
    pub seconds: f64,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn criterion_passed(&self, k: u8) -> Option<bool> {
        let mut seen = false;
        let mut ok = true;
        for c in self.clauses.iter().filter(|c| c.criterion == k) {
            seen = true;
            ok &= c.passed;
        }
        seen.then_some(ok)
    }

    pub fn failing(&self) -> Vec<&Clause> {
        self.clauses.iter().filter(|c| !c.passed).collect()
    }
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p),
        _ => Ok(()),
    }
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), crate::Error> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "experiment", "group", "epsilon", "triple_id", "term", "value", "sigma", "residual", "residual_sigma", "target",
            "gap", "rate",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, rows: &[Row]) -> Result<(), crate::Error> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(rows)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_log(path: &Path, rows: &[crate::mc::LogRow]) -> Result<(), crate::Error> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
