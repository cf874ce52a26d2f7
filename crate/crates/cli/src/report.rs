use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use objnav_core::sim::METRICS_HEADER;

pub struct Row {
    pub source: String,
    pub label: String,
    pub episodes: usize,
    pub sr: f64,
    pub spl: f64,
    pub dtg: f64,
}

fn metrics_file(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join("metrics.csv")
    } else {
        input.to_path_buf()
    }
}

pub fn read_rows(input: &Path) -> Result<Vec<Row>> {
    let path = metrics_file(input);
    let name = path.display().to_string();
    let text = fs::read_to_string(&path).with_context(|| format!("reading {name}"))?;
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd
        .headers()
        .with_context(|| format!("{name}: bad header"))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != METRICS_HEADER {
        bail!(
            "{name}: schema mismatch, expected columns {} but found {}",
            METRICS_HEADER.join(","),
            header.join(",")
        );
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.with_context(|| format!("{name}: bad row"))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .with_context(|| format!("{name}:{line}: {} is not a number", METRICS_HEADER[k]))
        };
        rows.push(Row {
            source: input.display().to_string(),
            label: rec[0].to_string(),
            episodes: num(1)? as usize,
            sr: num(2)?,
            spl: num(3)?,
            dtg: num(4)?,
        });
    }
    Ok(rows)
}

/// Fixed-width table: source, label, episodes, SR, SPL, DTG, in input order.
pub fn report(inputs: &[PathBuf]) -> Result<String> {
    let mut rows = Vec::new();
    for input in inputs {
        rows.extend(read_rows(input)?);
    }
    let src_w = rows
        .iter()
        .map(|r| r.source.len())
        .chain([6])
        .max()
        .unwrap_or(6);
    let lab_w = rows
        .iter()
        .map(|r| r.label.len())
        .chain([5])
        .max()
        .unwrap_or(5);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<src_w$}  {:<lab_w$}  {:>8}  {:>6}  {:>6}  {:>7}",
        "source", "label", "episodes", "SR", "SPL", "DTG"
    );
    for r in &rows {
        let _ = writeln!(
            s,
            "{:<src_w$}  {:<lab_w$}  {:>8}  {:>6.3}  {:>6.3}  {:>7.3}",
            r.source, r.label, r.episodes, r.sr, r.spl, r.dtg
        );
    }
    Ok(s)
}
