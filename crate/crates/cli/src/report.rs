//! Output documents and text tables.

use std::fmt::Write as _;

use idshield::eval::{AttackSummary, EvalReport};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dpcheck::DpCheckReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every JSON output: the result plus what is needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub result: T,
}

impl<T> Document<T> {
    pub fn new(config: &RunConfig, result: T) -> Self {
        Self {
            version: VERSION.to_string(),
            seed: config.seed(),
            config: config.clone(),
            result,
        }
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn render(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        for (c, cell) in cells.iter().enumerate() {
            if c == 0 {
                let _ = write!(out, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(out, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push('\n');
    };
    line(&mut out, header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut out, &rule);
    for r in rows {
        line(&mut out, r);
    }
    out
}

/// Method, rank-k columns, EER, attribute agreement, mean displacement.
pub fn eval_table(reports: &[EvalReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let mut header = vec!["Method".to_string()];
    header.extend(first.rank_k.keys().map(|k| format!("Rank {k} (%)")));
    header.push("EER (%)".into());
    header.extend(first.attribute_accuracy.keys().map(|a| format!("{a} (%)")));
    header.push("Disp. (deg)".into());
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.mechanism.to_string()];
            row.extend(r.rank_k.values().map(|&v| pct(v)));
            row.push(pct(r.eer));
            row.extend(r.attribute_accuracy.values().map(|&v| pct(v)));
            row.push(format!("{:.2}", r.mean_displacement.degrees()));
            row
        })
        .collect();
    render(&header, &rows)
}

pub fn attack_table(series: &[AttackSummary]) -> String {
    let header = ["m", "cos to true", "Rank 1 (%)"].map(String::from);
    let rows: Vec<Vec<String>> = series
        .iter()
        .map(|s| {
            vec![
                s.observations.to_string(),
                format!("{:.4}", s.mean_cosine_to_true),
                pct(s.rank1_after_attack),
            ]
        })
        .collect();
    render(&header, &rows)
}

pub fn dp_table(r: &DpCheckReport) -> String {
    format!(
        "check-dp: dim {} eps {} trials {}\n  max ratio - eps*d2      {:+.3e}\n  max ratio - eps*d_angle {:+.3e}\n  violations {} -> {}\n",
        r.dim,
        r.epsilon,
        r.trials,
        r.max_slack_chord,
        r.max_slack_angular,
        r.violations,
        if r.holds() { "bound holds" } else { "BOUND VIOLATED" }
    )
}
