//! Experiment results and their on-disk form.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::{Experiment, RunConfig};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Lines,
    /// Columns are the second axis; values are drawn as colour.
    Heatmap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Empty for the experiment's main table.
    pub name: String,
    pub x_label: String,
    pub x: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub kind: PlotKind,
}

impl Table {
    pub fn new(name: &str, x_label: &str, x: Vec<f64>) -> Self {
        Self { name: name.into(), x_label: x_label.into(), x, columns: Vec::new(), kind: PlotKind::Lines }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.x.len());
        self.columns.push((name.into(), values));
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_axis");
        for (name, _) in &self.columns {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for (i, x) in self.x.iter().enumerate() {
            s.push_str(&fmt_float(*x));
            for (_, col) in &self.columns {
                s.push(',');
                s.push_str(&fmt_float(col[i]));
            }
            s.push('\n');
        }
        s
    }
}

/// Nine significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.8e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub meta: Vec<(String, String)>,
}

impl Report {
    pub fn new(experiment: Experiment) -> Self {
        Self { experiment, tables: Vec::new(), checks: Vec::new(), meta: Vec::new() }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn stem(&self, table: &Table) -> String {
        if table.name.is_empty() {
            self.experiment.name().to_string()
        } else {
            format!("{}_{}", self.experiment.name(), table.name)
        }
    }

    pub fn meta_text(&self, cfg: &RunConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "profile = {}", cfg.profile_label);
        let _ = writeln!(s, "seed = {}", cfg.seed);
        let _ = writeln!(s, "trials = {}", cfg.trials);
        let _ = writeln!(s, "iterations = {}", cfg.iterations);
        let _ = writeln!(s, "mu_frac = {}", cfg.mu_frac);
        let _ = writeln!(s, "mu_frac_nl = {}", cfg.mu_frac_nl);
        let _ = writeln!(s, "source = {}", cfg.source);
        let _ = writeln!(s, "m = {}", cfg.m);
        let _ = writeln!(s, "n = {}", cfg.n);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "{k} = {v}");
        }
        for c in &self.checks {
            let _ = writeln!(s, "check.{} = {} ({})", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
        }
        s.push_str("\n# profile\n");
        s.push_str(&cfg.profile.to_text());
        s
    }

    /// Writes one CSV and one SVG per table plus `meta.txt`; returns the
    /// paths written.
    pub fn write(&self, dir: &Path, cfg: &RunConfig) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for table in &self.tables {
            let stem = self.stem(table);
            let csv = dir.join(format!("{stem}.csv"));
            std::fs::write(&csv, table.to_csv())?;
            written.push(csv);
            let svg_path = dir.join(format!("{stem}.svg"));
            let title = format!("{} {}", self.experiment, table.name);
            let body = match table.kind {
                PlotKind::Lines => svg::lines(table, title.trim()),
                PlotKind::Heatmap => svg::heatmap(table, title.trim()),
            };
            std::fs::write(&svg_path, body)?;
            written.push(svg_path);
        }
        let meta = dir.join("meta.txt");
        std::fs::write(&meta, self.meta_text(cfg))?;
        written.push(meta);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new("", "tx", vec![1.0, 2.0]);
        t.push("a", vec![0.123456789123, f64::NEG_INFINITY]);
        assert_eq!(t.to_csv(), "x_axis,a\n1.00000000e0,1.23456789e-1\n2.00000000e0,-inf\n");
        assert_eq!(t.column("a").unwrap().len(), 2);
        assert!(t.column("b").is_none());
    }

    #[test]
    fn writes_files() {
        let cfg = RunConfig::new(Experiment::Bias);
        let mut r = Report::new(Experiment::Bias);
        let mut t = Table::new("", "n", vec![0.0, 1.0]);
        t.push("curve", vec![1.0, 2.0]);
        r.tables.push(t);
        r.check("ok", true, "fine");
        let dir = std::env::temp_dir().join(format!("fdsic-report-{}", std::process::id()));
        let files = r.write(&dir, &cfg).unwrap();
        assert_eq!(files.len(), 3);
        let meta = std::fs::read_to_string(dir.join("meta.txt")).unwrap();
        assert!(meta.contains("check.ok = PASS (fine)"));
        assert!(dir.join("bias.svg").exists());
        std::fs::remove_dir_all(&dir).ok();
    }
}
