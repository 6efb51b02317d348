//! Comparison table across scenario outputs.

use std::fmt::Write as _;
use std::path::Path;

use capreg::{MarketSpec, ScenarioTag};

use crate::config::DEFAULT_DT;
use crate::output::{read_summary, Summary};

/// Mean total contract values of the default calibration, against which the
/// report prints a ratio.
const REFERENCE_VALUES: [(&str, f64); 4] = [
    ("M-SB-DC", 4.24e14),
    ("M-SB-DVC", 1.02e14),
    ("C-SB-DC", 3.77e14),
    ("C-SB-DVC", 9.87e13),
];

/// Scenarios whose contract values are ranked, from most to least expensive.
pub const RANKED: [&str; 4] = ["M-SB-DC", "C-SB-DC", "M-SB-DVC", "C-SB-DVC"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ordering {
    Holds,
    Violated,
    Incomplete(Vec<String>),
}

fn is_reference(s: &Summary) -> bool {
    let steps = (s.horizon / DEFAULT_DT).round() as usize;
    s.parameters == MarketSpec::reference() && s.steps == steps
}

fn reference_value(s: &Summary) -> Option<f64> {
    if !is_reference(s) {
        return None;
    }
    let tag = s.scenario.to_string();
    REFERENCE_VALUES
        .iter()
        .find(|(name, _)| *name == tag)
        .map(|(_, v)| *v)
}

fn ranked_summary<'a>(summaries: &'a [Summary], name: &str) -> Option<&'a Summary> {
    let tag: ScenarioTag = name.parse().ok()?;
    summaries
        .iter()
        .find(|s| s.name == name)
        .or_else(|| summaries.iter().find(|s| s.scenario == tag))
}

pub fn ordering(summaries: &[Summary]) -> Ordering {
    let mut values = Vec::new();
    let mut missing = Vec::new();
    for name in RANKED {
        match ranked_summary(summaries, name).and_then(|s| s.contract.as_ref()) {
            Some(c) => values.push(c.total.mean),
            None => missing.push(name.to_string()),
        }
    }
    if !missing.is_empty() {
        return Ordering::Incomplete(missing);
    }
    if values.windows(2).all(|w| w[0] > w[1]) {
        Ordering::Holds
    } else {
        Ordering::Violated
    }
}

fn sci(x: f64) -> String {
    format!("{x:.4e}")
}

/// Renders the comparison table. Rows are sorted by scenario directory name.
pub fn render(summaries: &[Summary]) -> String {
    let mut rows: Vec<&Summary> = summaries.iter().collect();
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    let header = [
        "scenario",
        "solver",
        "paths",
        "energy scale",
        "contract value",
        "std error",
        "reference",
        "ratio",
        "total capacity",
        "renewable share",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
    for s in &rows {
        let (value, se) = match &s.contract {
            Some(c) => (sci(c.total.mean), sci(c.total.std_error)),
            None => ("-".into(), "-".into()),
        };
        let reference = reference_value(s);
        let ratio = match (&s.contract, reference) {
            (Some(c), Some(r)) => format!("{:.3}", c.total.mean / r),
            _ => "-".into(),
        };
        table.push(vec![
            s.name.clone(),
            s.solver.clone(),
            s.n_paths.to_string(),
            s.energy_scale.to_string(),
            value,
            se,
            reference.map(sci).unwrap_or_else(|| "-".into()),
            ratio,
            format!("{:.1}", s.terminal_total_capacity.mean),
            format!("{:.4}", s.terminal_share.mean),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap())
        .collect();
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("  "));
        }
    }
    let chain = RANKED.join(" > ");
    match ordering(summaries) {
        Ordering::Holds => {
            let _ = writeln!(out, "\nordering {chain}: TRUE");
        }
        Ordering::Violated => {
            let _ = writeln!(out, "\nordering {chain}: FALSE");
        }
        Ordering::Incomplete(missing) => {
            let _ = writeln!(
                out,
                "\nordering {chain}: not checked (missing {})",
                missing.join(", ")
            );
        }
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("missing scenario outputs in {dir}: {}", .missing.join(", "))]
    Missing { dir: String, missing: Vec<String> },
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

/// Loads every `*/summary.json` below `dir`. `expected` names directories that
/// must be present; without it at least two outputs are required.
pub fn load(dir: &Path, expected: Option<&[String]>) -> Result<Vec<Summary>, ReportError> {
    let mut summaries = Vec::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path().join("summary.json"))
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        for p in paths {
            summaries.push(read_summary(&p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?);
        }
    }
    let present = |name: &str| summaries.iter().any(|s| s.name == name);
    let mut missing: Vec<String> = expected
        .unwrap_or_default()
        .iter()
        .filter(|n| !present(n))
        .cloned()
        .collect();
    if missing.is_empty() && summaries.len() < 2 {
        missing = RANKED
            .iter()
            .filter(|n| !present(n))
            .map(|n| n.to_string())
            .collect();
    }
    if !missing.is_empty() {
        return Err(ReportError::Missing {
            dir: dir.display().to_string(),
            missing,
        });
    }
    Ok(summaries)
}
