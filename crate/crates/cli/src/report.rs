//! Machine-readable solve report and its text table.

use fixdual_core::{SolutionRecord, SolveReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub sigma: Vec<f64>,
    pub x: Vec<f64>,
    pub pi: f64,
    pub pid: f64,
    pub gap: f64,
    pub residual: f64,
    pub g_class: String,
    pub stability: String,
    pub source: String,
    pub triality: String,
    pub fallback: String,
    pub disagreement: bool,
    pub pole_branch: bool,
}

impl From<&SolutionRecord> for RecordRow {
    fn from(r: &SolutionRecord) -> Self {
        Self {
            sigma: r.sigma.iter().copied().collect(),
            x: r.x.iter().copied().collect(),
            pi: r.pi_value,
            pid: r.pid_value,
            gap: r.gap,
            residual: r.fp_residual,
            g_class: r.g_class.to_string(),
            stability: r.stability.to_string(),
            source: r.stability_source.to_string(),
            triality: r.triality.to_string(),
            fallback: r.fallback.to_string(),
            disagreement: r.disagreement,
            pole_branch: r.pole_branch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub problem: String,
    pub n: usize,
    pub m: usize,
    pub records: Vec<RecordRow>,
    pub poles: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl Report {
    pub fn new(problem: &str, n: usize, m: usize, rep: &SolveReport) -> Self {
        Self {
            problem: problem.to_string(),
            n,
            m,
            records: rep.records.iter().map(RecordRow::from).collect(),
            poles: rep.poles.clone(),
            diagnostics: rep.diagnostics.clone(),
        }
    }
}

/// Formats `v` with six significant digits, `%g` style.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn vec6(v: &[f64]) -> String {
    let inner: Vec<String> = v.iter().map(|x| sig6(*x)).collect();
    format!("({})", inner.join(", "))
}

/// One row per record, columns padded to the widest cell.
pub fn format_table(report: &Report) -> String {
    let header = [
        "#",
        "sigma",
        "x",
        "Pi",
        "Pi^d",
        "gap",
        "residual",
        "G",
        "stability",
        "source",
        "triality",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = vec![header];
    for (i, r) in report.records.iter().enumerate() {
        let mut stability = r.stability.clone();
        if r.disagreement {
            stability.push('!');
        }
        rows.push(vec![
            (i + 1).to_string(),
            vec6(&r.sigma),
            vec6(&r.x),
            sig6(r.pi),
            sig6(r.pid),
            sig6(r.gap),
            sig6(r.residual),
            r.g_class.clone(),
            stability,
            r.source.clone(),
            r.triality.clone(),
        ]);
    }
    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}", w = *w))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
