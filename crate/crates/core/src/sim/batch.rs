//! Labeled configuration sweeps over a fixed set of episodes.

use super::episode::{run_batch, EpisodeConfig, EpisodeResult, EpisodeSpec, OracleMode};
use super::metrics::{compute_metrics, Metrics};
use super::SimError;
use crate::oracle::{DecisionOracle, RoomClassifier};

/// Node attributes an ablation may withhold from the oracle.
pub const ABLATION_FLAGS: [&str; 3] = [
    "disable_frontier_attr",
    "disable_room_attr",
    "disable_object_attr",
];

/// Applies one ablation flag; unknown flags are an error.
pub fn apply_ablation(cfg: &mut EpisodeConfig, flag: &str) -> Result<(), SimError> {
    match flag {
        "disable_frontier_attr" => cfg.mask.hide_frontiers = true,
        "disable_room_attr" => cfg.mask.hide_room = true,
        "disable_object_attr" => cfg.mask.hide_objects = true,
        other => {
            return Err(SimError::InvalidConfig(format!(
                "unknown ablation flag {other:?}"
            )))
        }
    }
    Ok(())
}

/// Base configuration for procedural sweeps: default settings with a
/// 0.1 m point-cloud voxel, which keeps a 50-episode, six-configuration sweep
/// within a few minutes on one core.
pub fn sweep_base() -> EpisodeConfig {
    let mut cfg = EpisodeConfig::default();
    cfg.map.r_pcd = 0.1;
    cfg
}

/// The full configuration, each single-attribute ablation and the two
/// single-source oracle modes.
pub fn ablation_suite(base: &EpisodeConfig) -> Vec<(String, EpisodeConfig)> {
    let mut out = vec![("full".to_string(), base.clone())];
    for flag in ABLATION_FLAGS {
        let mut c = base.clone();
        apply_ablation(&mut c, flag).expect("known flag");
        out.push((flag.to_string(), c));
    }
    for (label, mode) in [
        ("vlm-only", OracleMode::VlmOnly),
        ("detector-only", OracleMode::DetectorOnly),
    ] {
        let mut c = base.clone();
        c.oracle_mode = mode;
        out.push((label.to_string(), c));
    }
    out
}

pub struct LabeledRun {
    pub label: String,
    pub config: EpisodeConfig,
    pub results: Vec<EpisodeResult>,
    pub metrics: Metrics,
}

/// Runs every configuration over `specs`. An episode that cannot start
/// (invalid spec) aborts the sweep.
pub fn run_suite<O>(
    specs: &[EpisodeSpec],
    configs: &[(String, EpisodeConfig)],
    oracle: &O,
    threads: usize,
) -> Result<Vec<LabeledRun>, SimError>
where
    O: DecisionOracle + RoomClassifier + Sync,
{
    let mut runs = Vec::new();
    for (label, cfg) in configs {
        let results = run_batch(specs, cfg, oracle, threads)
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let outcomes: Vec<_> = results.iter().map(EpisodeResult::outcome).collect();
        let metrics = compute_metrics(&outcomes)?;
        log::info!(
            "{label}: SR {:.3} SPL {:.3} DTG {:.3}",
            metrics.sr,
            metrics.spl,
            metrics.dtg
        );
        runs.push(LabeledRun {
            label: label.clone(),
            config: cfg.clone(),
            results,
            metrics,
        });
    }
    Ok(runs)
}
