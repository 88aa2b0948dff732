//! Run-directory files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::ledger::{EvaluationLedger, EvaluationRecord, EvaluationTag};
use crate::pipeline::{AdaptiveResult, ConvergenceRow, Outcome, PassRecord};

pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub converged: bool,
    pub seed: u64,
    pub evaluations: usize,
    pub n_total: usize,
    pub labels: Vec<String>,
    pub active: Option<Vec<usize>>,
    pub passes: Vec<PassRecord>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn ledger_csv(ledger: &EvaluationLedger, labels: &[String]) -> CsvTable {
    let mut header = vec!["row".to_string(), "tag".into(), "batch_id".into(), "seed".into(), "value".into()];
    header.extend(labels.iter().cloned());
    let mut t = CsvTable::new(header);
    for (i, r) in ledger.records().iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            r.tag.as_str().to_string(),
            r.batch_id.to_string(),
            r.seed.to_string(),
            fmt_f64(r.value),
        ];
        row.extend(r.theta.iter().map(|&x| fmt_f64(x)));
        t.push(row);
    }
    t
}

pub fn gradients_csv(ledger: &EvaluationLedger, labels: &[String]) -> CsvTable {
    let mut header = vec!["sample".to_string(), "batch_id".into(), "value".into()];
    header.extend(labels.iter().cloned());
    header.extend(labels.iter().map(|l| format!("dG/d{l}")));
    header.extend(labels.iter().map(|l| format!("step_{l}")));
    let mut t = CsvTable::new(header);
    for (i, e) in ledger.gradients().iter().enumerate() {
        let mut row = vec![i.to_string(), e.batch_id.to_string(), fmt_f64(e.sample.base_value)];
        row.extend(e.sample.theta.iter().map(|&x| fmt_f64(x)));
        row.extend(e.sample.g.iter().map(|&x| fmt_f64(x)));
        row.extend(e.sample.steps.iter().map(|&x| fmt_f64(x)));
        t.push(row);
    }
    t
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> CsvTable {
    let mut t = CsvTable::new(["training_count", "loo_fss", "loo_rss"]);
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        t.push(vec![r.training_count.to_string(), opt(r.loo_fss), opt(r.loo_rss)]);
    }
    t
}

fn parse_tag(s: &str) -> Option<EvaluationTag> {
    [
        EvaluationTag::Validation,
        EvaluationTag::ScreeningBase,
        EvaluationTag::ScreeningStencil,
        EvaluationTag::RssTraining,
    ]
    .into_iter()
    .find(|t| t.as_str() == s)
}

/// Records from a `ledger.csv` file.
pub fn read_ledger_csv(path: &Path) -> Result<Vec<EvaluationRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty ledger file", path.display())))?;
    let width = header.split(',').count();
    let bad = |line: usize, m: &str| Error::Config(format!("{}:{line}: {m}", path.display()));
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(bad(k + 2, "wrong number of fields"));
        }
        let num = |s: &str| crate::io::parse_f64(s).ok_or_else(|| bad(k + 2, "invalid number"));
        out.push(EvaluationRecord {
            tag: parse_tag(fields[1]).ok_or_else(|| bad(k + 2, "unknown tag"))?,
            batch_id: fields[2].parse().map_err(|_| bad(k + 2, "invalid batch id"))?,
            seed: fields[3].parse().map_err(|_| bad(k + 2, "invalid seed"))?,
            value: num(fields[4])?,
            theta: fields[5..].iter().map(|s| num(s)).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

/// Write every artifact of a finished run into `dir`.
pub fn write_run(dir: &Path, result: &AdaptiveResult, labels: &[String], seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    ledger_csv(&result.ledger, labels).write(&dir.join("ledger.csv"))?;
    gradients_csv(&result.ledger, labels).write(&dir.join("gradients.csv"))?;
    if let Some(s) = &result.screening {
        write_json(&dir.join("screening.json"), s)?;
        s.to_csv().write(&dir.join("screening.csv"))?;
    }
    write_json(&dir.join("fss.json"), &result.fss)?;
    if let Some(r) = &result.rss {
        write_json(&dir.join("rss.json"), r)?;
    }
    write_json(&dir.join("validation.json"), &result.validation)?;
    result.validation.pdf_fss.to_csv().write(&dir.join("pdf_fss.csv"))?;
    if let Some(p) = &result.validation.pdf_rss {
        p.to_csv().write(&dir.join("pdf_rss.csv"))?;
    }
    result.validation.histogram.to_csv().write(&dir.join("histogram.csv"))?;
    convergence_csv(&result.convergence).write(&dir.join("convergence.csv"))?;
    let summary = RunSummary {
        outcome: result.outcome,
        converged: result.converged(),
        seed,
        evaluations: result.ledger.len(),
        n_total: result.ledger.n_total(),
        labels: labels.to_vec(),
        active: result.rss.as_ref().and_then(|r| r.reduced_map.as_ref()).map(|m| m.active.clone()),
        passes: result.passes.clone(),
    };
    write_json(&dir.join("run.json"), &summary)
}

/// Leave a marker next to partial artifacts.
pub fn mark_failed(dir: &Path, message: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(FAILED_MARKER), format!("{message}\n"))?;
    Ok(())
}
