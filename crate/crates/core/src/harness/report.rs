//! Aggregation (median and IQR) and result files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Ablation, RunConfig, TrialResult};
use crate::error::{Error, Result};

/// Reported gaps never go below this value.
pub const GAP_FLOOR: f64 = 1e-6;

pub fn floor_gap(gap: f64) -> f64 {
    gap.max(GAP_FLOOR)
}

/// Quantile of sorted data by linear interpolation between order statistics
/// placed at `(k - 0.5) / n`, clamped to the extremes.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = (q * n as f64 + 0.5).clamp(1.0, n as f64) - 1.0;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Median; NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    quantile(&sorted(values), 0.5)
}

/// `Q3 - Q1`, quartiles as in [`quantile`].
pub fn quartiles_iqr(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let s = sorted(values);
    quantile(&s, 0.75) - quantile(&s, 0.25)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub median: f64,
    pub iqr: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Self {
        Self {
            median: median(values),
            iqr: quartiles_iqr(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub upper_gap: Stat,
    pub lower_gap: Stat,
    pub upper_fes: Stat,
    pub lower_fes: Stat,
    pub total_fes: Stat,
    pub successes: usize,
    pub trials: usize,
    /// Median upper gap at or below the floor.
    pub success: bool,
}

pub fn aggregate(trials: &[TrialResult]) -> MetricSummary {
    let col = |f: &dyn Fn(&TrialResult) -> f64| trials.iter().map(f).collect::<Vec<f64>>();
    let upper_gap = Stat::of(&col(&|t| floor_gap(t.best_upper_gap)));
    MetricSummary {
        upper_gap,
        lower_gap: Stat::of(&col(&|t| floor_gap(t.best_lower_gap))),
        upper_fes: Stat::of(&col(&|t| t.upper_fes as f64)),
        lower_fes: Stat::of(&col(&|t| t.lower_fes as f64)),
        total_fes: Stat::of(&col(&|t| t.total_fes() as f64)),
        successes: trials.iter().filter(|t| t.converged).count(),
        trials: trials.len(),
        success: upper_gap.median <= GAP_FLOOR,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub problem: String,
    pub comment: String,
    pub expected_failure: Option<String>,
    pub config: RunConfig,
    pub trials: Vec<TrialResult>,
    pub failures: Vec<SeedFailure>,
    pub aggregate: MetricSummary,
}

impl SuiteReport {
    /// Rows `problem, metric, median, iqr, successes`.
    pub fn csv_rows(&self, label: &str) -> Vec<String> {
        let a = &self.aggregate;
        [
            ("upper_gap", a.upper_gap),
            ("lower_gap", a.lower_gap),
            ("upper_fes", a.upper_fes),
            ("lower_fes", a.lower_fes),
            ("total_fes", a.total_fes),
        ]
        .iter()
        .map(|(metric, s)| format!("{label},{metric},{:e},{:e},{}", s.median, s.iqr, a.successes))
        .collect()
    }

    pub fn table(&self) -> String {
        let a = &self.aggregate;
        let mut out = format!("{} ({})\n", self.problem, self.comment);
        out += &format!("  {:<10} {:>12} {:>12}\n", "metric", "median", "iqr");
        for (name, s) in [
            ("|F-F*|", a.upper_gap),
            ("|f-f*|", a.lower_gap),
            ("upper FEs", a.upper_fes),
            ("lower FEs", a.lower_fes),
        ] {
            out += &format!("  {name:<10} {:>12.3e} {:>12.3e}\n", s.median, s.iqr);
        }
        out += &format!("  converged {}/{}", a.successes, a.trials);
        if !self.failures.is_empty() {
            out += &format!(", {} failed", self.failures.len());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSeed {
    pub seed: u64,
    pub full_total_fes: u64,
    pub ablated_total_fes: u64,
    pub full_converged: bool,
    pub ablated_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub mode: Ablation,
    pub full: SuiteReport,
    pub ablated: SuiteReport,
    pub paired: Vec<PairedSeed>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_traces(path: &Path, label: &str, report: &SuiteReport) -> Result<()> {
    for t in &report.trials {
        let Some(trace) = &t.trace else { continue };
        let mut f = fs::File::create(sibling(path, &format!("_{label}_seed{}_trace.csv", t.seed)))?;
        writeln!(f, "upper_fes,lower_fes,best_F_gap")?;
        for p in trace {
            writeln!(f, "{},{},{:e}", p.upper_fes, p.lower_fes, p.best_upper_gap)?;
        }
    }
    Ok(())
}

/// Writes `path` (JSON), a sibling `.csv` summary and, when traces were
/// recorded, one trace CSV per trial.
pub fn write_outputs(path: &Path, suites: &[(&str, &SuiteReport)], json: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(json).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text)?;

    let mut csv = String::from("problem,metric,median,iqr,successes\n");
    for (label, report) in suites {
        for row in report.csv_rows(label) {
            csv += &row;
            csv.push('\n');
        }
        write_traces(path, label, report)?;
    }
    fs::write(path.with_extension("csv"), csv)?;
    Ok(())
}
