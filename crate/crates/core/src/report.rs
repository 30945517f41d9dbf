//! Plain CSV emission for curve and report rows.

use std::path::Path;

use crate::guarantees::GuaranteeReport;
use crate::inference::TestResult;
use crate::posterior::PosteriorEstimate;
use crate::selection::ErrorCostEstimate;

/// A row type with a fixed column order.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

fn curve_fields(e: &ErrorCostEstimate) -> Vec<String> {
    vec![
        e.algorithm.clone(),
        e.arity.to_string(),
        e.param_name.clone(),
        e.param_value.to_string(),
        e.error_rate.to_string(),
        e.ci_low.to_string(),
        e.ci_high.to_string(),
        e.mean_comparisons.to_string(),
        e.sd_comparisons.to_string(),
    ]
}

impl CsvRow for ErrorCostEstimate {
    fn header() -> &'static [&'static str] {
        &[
            "algorithm",
            "arity",
            "param_name",
            "param_value",
            "error_rate",
            "ci_low",
            "ci_high",
            "mean_comparisons",
            "sd_comparisons",
        ]
    }

    fn fields(&self) -> Vec<String> {
        curve_fields(self)
    }
}

impl CsvRow for PosteriorEstimate {
    fn header() -> &'static [&'static str] {
        &[
            "algorithm",
            "arity",
            "param_name",
            "param_value",
            "error_rate",
            "ci_low",
            "ci_high",
            "mean_comparisons",
            "sd_comparisons",
            "model",
            "draws_used",
            "tied_draws",
            "reps_per_draw",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let mut f = curve_fields(&self.estimate);
        f.push("posterior".into());
        f.push(self.draws_used.to_string());
        f.push(self.tied_draws.to_string());
        f.push(self.reps_per_draw.to_string());
        f
    }
}

impl CsvRow for GuaranteeReport {
    fn header() -> &'static [&'static str] {
        &[
            "m",
            "n",
            "T",
            "delta",
            "bound",
            "empirical_rate",
            "ci_low",
            "ci_high",
            "replications",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            self.n.to_string(),
            self.t.to_string(),
            self.delta.to_string(),
            self.bound.to_string(),
            self.empirical_rate.to_string(),
            self.ci_low.to_string(),
            self.ci_high.to_string(),
            self.replications.to_string(),
        ]
    }
}

impl CsvRow for TestResult {
    fn header() -> &'static [&'static str] {
        &["task", "test", "arity", "N", "D", "df", "p"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            self.test.clone(),
            self.arity
                .map(|a| a.to_string())
                .unwrap_or_else(|| "all".into()),
            self.n.to_string(),
            self.deviance.to_string(),
            self.df.to_string(),
            self.p_value.to_string(),
        ]
    }
}

/// Header line plus one line per row.
pub fn to_csv<R: CsvRow>(rows: &[R]) -> String {
    let mut out = R::header().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.fields().join(","));
        out.push('\n');
    }
    out
}

/// Writes [`to_csv`] to `path`, replacing any existing file.
pub fn emit_curves<R: CsvRow>(rows: &[R], path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_csv(rows))
}
