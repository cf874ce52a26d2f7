//! Success rate, SPL and distance to goal.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SimError;

/// The per-episode numbers metrics are computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub path_length: f64,
    pub shortest_length: f64,
    pub dtg: f64,
}

impl Outcome {
    /// `S·l / max(p, l)`.
    pub fn spl(&self) -> f64 {
        if !self.success {
            return 0.0;
        }
        let p = self.path_length.max(self.shortest_length);
        if p == 0.0 {
            1.0
        } else {
            self.shortest_length / p
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub sr: f64,
    pub spl: f64,
    pub dtg: f64,
}

pub fn compute_metrics<'a, I>(outcomes: I) -> Result<Metrics, SimError>
where
    I: IntoIterator<Item = &'a Outcome>,
{
    let (mut n, mut s, mut spl, mut dtg) = (0usize, 0.0, 0.0, 0.0);
    for o in outcomes {
        n += 1;
        if o.success {
            s += 1.0;
        }
        spl += o.spl();
        dtg += o.dtg;
    }
    if n == 0 {
        return Err(SimError::EmptyBatch);
    }
    let k = n as f64;
    Ok(Metrics {
        episodes: n,
        sr: s / k,
        spl: spl / k,
        dtg: dtg / k,
    })
}

pub const METRICS_HEADER: [&str; 5] = ["label", "episodes", "sr", "spl", "dtg"];

/// One row per labeled configuration, fixed six-decimal formatting.
pub fn write_metrics_csv<W: Write>(w: W, rows: &[(String, Metrics)]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER)?;
    for (label, m) in rows {
        out.write_record([
            label.clone(),
            m.episodes.to_string(),
            format!("{:.6}", m.sr),
            format!("{:.6}", m.spl),
            format!("{:.6}", m.dtg),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Per-episode rows: `label,episode,scene,target,success,path_length,shortest_length,dtg,steps`.
pub fn write_episodes_csv<W: Write>(
    w: W,
    rows: &[(String, usize, String, String, Outcome, usize)],
) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "label",
        "episode",
        "scene",
        "target",
        "success",
        "path_length",
        "shortest_length",
        "dtg",
        "steps",
    ])?;
    for (label, idx, scene, target, o, steps) in rows {
        out.write_record([
            label.clone(),
            idx.to_string(),
            scene.clone(),
            target.clone(),
            u8::from(o.success).to_string(),
            format!("{:.6}", o.path_length),
            format!("{:.6}", o.shortest_length),
            format!("{:.6}", o.dtg),
            steps.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
