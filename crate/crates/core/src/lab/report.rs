//! Verdicts, tables and the on-disk report tree.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

use super::config::ExperimentConfig;

/// Comparison a verdict applies to its statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
}

impl Relation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
        }
    }

    fn holds(&self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Above => value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub statistic: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn new(
        name: impl Into<String>,
        statistic: f64,
        relation: Relation,
        threshold: f64,
    ) -> Self {
        Self {
            name: name.into(),
            statistic,
            relation,
            threshold,
            pass: relation.holds(statistic, threshold),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.6e} {} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.relation.as_str(),
            self.threshold
        )
    }
}

/// A named number with optional standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub kind: EntryKind,
    pub name: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    /// Monte-Carlo or grid estimate.
    Estimate,
    /// Exact or reference value.
    Reference,
    /// Context that no verdict depends on.
    Diagnostic,
}

impl EntryKind {
    fn as_str(&self) -> &'static str {
        match self {
            EntryKind::Estimate => "estimate",
            EntryKind::Reference => "reference",
            EntryKind::Diagnostic => "diagnostic",
        }
    }
}

/// Per-path (or per-sample) rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()).into())
    }
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    std::io::Error::other(e.to_string()).into()
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub verdicts: Vec<Verdict>,
    pub entries: Vec<Entry>,
    pub wall_clock_seconds: f64,
    pub config: ExperimentConfig,
    #[serde(skip)]
    pub paths: Table,
    /// Directory the report was written to.
    pub output: Option<PathBuf>,
}

impl Report {
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.into(),
            verdicts: Vec::new(),
            entries: Vec::new(),
            wall_clock_seconds: 0.0,
            config: config.clone(),
            paths: Table::default(),
            output: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn entry(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn check(
        &mut self,
        name: impl Into<String>,
        statistic: f64,
        relation: Relation,
        threshold: f64,
    ) {
        self.verdicts
            .push(Verdict::new(name, statistic, relation, threshold));
    }

    pub fn estimate(&mut self, name: impl Into<String>, value: f64, stderr: Option<f64>) {
        self.push(EntryKind::Estimate, name, value, stderr);
    }

    pub fn reference(&mut self, name: impl Into<String>, value: f64) {
        self.push(EntryKind::Reference, name, value, None);
    }

    pub fn diagnostic(&mut self, name: impl Into<String>, value: f64) {
        self.push(EntryKind::Diagnostic, name, value, None);
    }

    fn push(&mut self, kind: EntryKind, name: impl Into<String>, value: f64, stderr: Option<f64>) {
        self.entries.push(Entry {
            kind,
            name: name.into(),
            value,
            stderr,
        });
    }

    /// Entries and verdicts as one CSV.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&[
            "kind",
            "name",
            "value",
            "stderr",
            "relation",
            "threshold",
            "pass",
        ]);
        for e in &self.entries {
            t.push(vec![
                e.kind.as_str().into(),
                e.name.clone(),
                num(e.value),
                e.stderr.map(num).unwrap_or_default(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
        for v in &self.verdicts {
            t.push(vec![
                "verdict".into(),
                v.name.clone(),
                num(v.statistic),
                String::new(),
                v.relation.as_str().into(),
                num(v.threshold),
                v.pass.to_string(),
            ]);
        }
        t
    }

    /// Writes `<root>/<experiment>/<timestamp>/{paths.csv, summary.csv, report.json}`.
    pub fn write(&mut self, root: &Path) -> Result<PathBuf> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.6fZ").to_string();
        let base = root.join(&self.experiment);
        let mut dir = base.join(&stamp);
        let mut i = 1;
        while dir.exists() {
            dir = base.join(format!("{stamp}-{i}"));
            i += 1;
        }
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("paths.csv"), self.paths.to_csv()?)?;
        fs::write(dir.join("summary.csv"), self.summary_table().to_csv()?)?;
        self.output = Some(dir.clone());
        fs::write(dir.join("report.json"), serde_json::to_vec_pretty(self)?)?;
        Ok(dir)
    }
}
