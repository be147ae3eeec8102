//! Results files and the per-condition ablation table.

use serde::{Deserialize, Serialize};

use super::{MetricsError, MetricsSummary};

pub const RESULTS_SCHEMA: &str = "edustory_results_v1";
pub const REPORT_SCHEMA: &str = "edustory_report_v1";

/// One video's metrics under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub condition: String,
    pub video: String,
    pub summary: MetricsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub schema: String,
    pub runs: Vec<RunRecord>,
}

impl ResultsFile {
    pub fn new(runs: Vec<RunRecord>) -> Self {
        Self {
            schema: RESULTS_SCHEMA.to_string(),
            runs,
        }
    }

    /// Groups runs by condition, in order of first appearance.
    pub fn by_condition(&self) -> Vec<ConditionRuns> {
        let mut groups: Vec<ConditionRuns> = Vec::new();
        for run in &self.runs {
            match groups.iter_mut().find(|g| g.condition == run.condition) {
                Some(g) => g.summaries.push(run.summary.clone()),
                None => groups.push(ConditionRuns {
                    condition: run.condition.clone(),
                    summaries: vec![run.summary.clone()],
                }),
            }
        }
        groups
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRuns {
    pub condition: String,
    pub summaries: Vec<MetricsSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub condition: String,
    pub kdr: f64,
    pub pas: f64,
    pub clip_s: Option<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub better: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<ReportRow>,
}

const COLUMNS: [(&str, &str, &str); 3] = [("KDR", "↓", "lower"), ("PAS", "↑", "higher"), ("CLIP-S", "↑", "higher")];

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-condition means, one row per condition in the given order.
pub fn emit_report(conditions: &[ConditionRuns]) -> Result<Report, MetricsError> {
    let rows = conditions
        .iter()
        .map(|c| {
            if c.summaries.is_empty() {
                return Err(MetricsError::EmptyCondition(c.condition.clone()));
            }
            Ok(ReportRow {
                condition: c.condition.clone(),
                kdr: mean(c.summaries.iter().map(|s| s.kdr)).expect("nonempty"),
                pas: mean(c.summaries.iter().map(|s| s.pas)).expect("nonempty"),
                clip_s: mean(c.summaries.iter().filter_map(|s| s.clip_s)),
                runs: c.summaries.len(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report {
        schema: REPORT_SCHEMA.to_string(),
        columns: COLUMNS
            .iter()
            .map(|(name, _, better)| ColumnSpec {
                name: name.to_string(),
                better: better.to_string(),
            })
            .collect(),
        rows,
    })
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// Fixed-width table: cells are two-decimal means, a missing CLIP-S is
    /// shown as `---`, and headers carry the better-direction arrow.
    pub fn to_text(&self) -> String {
        let mut table: Vec<Vec<String>> = vec![std::iter::once("Condition".to_string())
            .chain(COLUMNS.iter().map(|(name, arrow, _)| format!("{name} {arrow}")))
            .collect()];
        for row in &self.rows {
            table.push(vec![
                row.condition.clone(),
                format!("{:.2}", row.kdr),
                format!("{:.2}", row.pas),
                row.clip_s.map_or_else(|| "---".to_string(), |c| format!("{c:.2}")),
            ]);
        }
        let widths: Vec<usize> = (0..4)
            .map(|col| table.iter().map(|r| r[col].chars().count()).max().unwrap_or(0))
            .collect();
        let render = |cells: &[String]| {
            let line: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
                .collect();
            line.join("  ").trim_end().to_string()
        };
        let mut out = render(&table[0]);
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for row in &table[1..] {
            out.push_str(&render(row));
            out.push('\n');
        }
        out
    }
}
