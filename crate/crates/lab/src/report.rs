//! Report tables (CSV) and their metadata sidecar (TOML).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use qseal::adversary::MEASUREMENT_CLASS_NOTE;
use qseal::stats::Rate;
use serde::Serialize;

use crate::config::{ExperimentSpec, Plan};

/// Column order of every report table.
pub const COLUMNS: [&str; 27] = [
    "cell",
    "kind",
    "strategy",
    "metric",
    "secondary_metric",
    "s",
    "m",
    "n",
    "k",
    "N",
    "theta",
    "alpha",
    "trials",
    "aborted",
    "rate",
    "rate_ci_lo",
    "rate_ci_hi",
    "rate_ref",
    "secondary",
    "secondary_ci_lo",
    "secondary_ci_hi",
    "secondary_ref",
    "info_bits",
    "epsilon",
    "escape_bound",
    "pass",
    "rate_trials",
];

pub const NA: &str = "n/a";

pub const SEED_DERIVATION: &str =
    "ChaCha8 keyed by the master seed; stream = cell << 40 | trial << 2 | lane (0 classical, 1 quantum, 2 setup)";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub cell: usize,
    pub kind: &'static str,
    pub strategy: &'static str,
    pub metric: &'static str,
    pub secondary_metric: &'static str,
    pub s: Option<usize>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub length: usize,
    pub theta: f64,
    pub alpha: f64,
    pub trials: u64,
    pub aborted: u64,
    pub rate: Rate,
    pub rate_ref: Option<f64>,
    pub secondary: Option<Rate>,
    pub secondary_ref: Option<f64>,
    pub info_bits: Option<f64>,
    pub epsilon: f64,
    pub escape_bound: Option<f64>,
    pub pass: bool,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(|| NA.to_string(), |v| v.to_string())
}

fn rate_fields(r: Option<&Rate>) -> [String; 3] {
    match r {
        Some(r) if r.trials > 0 => {
            let (lo, hi) = r.ci95();
            [num(r.value()), num(lo), num(hi)]
        }
        _ => [NA.to_string(), NA.to_string(), NA.to_string()],
    }
}

impl ReportRow {
    pub fn fields(&self) -> Vec<String> {
        let [rate, rate_lo, rate_hi] = rate_fields(Some(&self.rate));
        let [sec, sec_lo, sec_hi] = rate_fields(self.secondary.as_ref());
        vec![
            self.cell.to_string(),
            self.kind.to_string(),
            self.strategy.to_string(),
            self.metric.to_string(),
            self.secondary_metric.to_string(),
            opt(self.s),
            opt(self.m),
            opt(self.n),
            opt(self.k),
            self.length.to_string(),
            num(self.theta),
            num(self.alpha),
            self.trials.to_string(),
            self.aborted.to_string(),
            rate,
            rate_lo,
            rate_hi,
            opt(self.rate_ref.map(num)),
            sec,
            sec_lo,
            sec_hi,
            opt(self.secondary_ref.map(num)),
            opt(self.info_bits.map(num)),
            num(self.epsilon),
            opt(self.escape_bound.map(num)),
            self.pass.to_string(),
            self.rate.trials.to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub rows: Vec<ReportRow>,
}

#[derive(Serialize)]
struct Meta<'a> {
    library: &'static str,
    library_version: &'static str,
    lab_version: &'static str,
    seed: u64,
    rows: usize,
    all_pass: bool,
    seed_derivation: &'static str,
    measurement_class: &'static str,
    columns: &'a [&'static str],
    spec: ExperimentSpec,
}

impl Report {
    pub fn new(plan: &Plan, rows: Vec<ReportRow>) -> Self {
        Report {
            spec: plan.spec.clone(),
            rows,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)?;
        for row in &self.rows {
            w.write_record(row.fields())?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("report is UTF-8"))
    }

    /// Metadata sidecar. Carries no timestamps or paths, so it is as
    /// reproducible as the table.
    pub fn meta_toml(&self) -> String {
        let mut spec = self.spec.clone();
        spec.output = None;
        let meta = Meta {
            library: "qseal",
            library_version: qseal::VERSION,
            lab_version: env!("CARGO_PKG_VERSION"),
            seed: spec.seed,
            rows: self.rows.len(),
            all_pass: self.all_pass(),
            seed_derivation: SEED_DERIVATION,
            measurement_class: MEASUREMENT_CLASS_NOTE,
            columns: &COLUMNS,
            spec,
        };
        toml::to_string(&meta).expect("metadata serializes")
    }

    /// Writes the table to `path` and the sidecar next to it; returns the
    /// sidecar path.
    pub fn write(&self, path: &Path) -> io::Result<PathBuf> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_csv().map_err(io::Error::other)?)?;
        let meta = meta_path(path);
        fs::write(&meta, self.meta_toml())?;
        Ok(meta)
    }
}

/// `report.csv` → `report.meta.toml`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.toml")
}
