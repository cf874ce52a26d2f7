use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use objnav_core::oracle::{
    DecisionOracle, HeadingSummary, OracleDecision, OracleError, OracleRequest, RemoteConfig,
    RemoteOracle, RoomClassifier, RoomTable, ScriptedOracle, ENDPOINT_ENV,
};
use objnav_core::sim::batch::{ablation_suite, apply_ablation};
use objnav_core::sim::procedural::{generate_batch, ProceduralConfig};
use objnav_core::sim::{
    compute_metrics, run_batch, write_episodes_csv, write_metrics_csv, EpisodeConfig,
    EpisodeResult, EpisodeSpec, Metrics, OracleMode, Outcome, Scene,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleChoice {
    Scripted,
    Remote,
    VlmOnly,
    DetectorOnly,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Glob of scene JSON files; without it a procedural batch is generated.
    #[arg(long)]
    scenes: Option<String>,
    /// Episodes per scene file (default: all stored), or the procedural batch size (default 10).
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, value_enum, default_value = "scripted")]
    oracle: OracleChoice,
    /// Comma-separated node attributes to withhold from the oracle.
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<String>,
    /// Run the full configuration, every single ablation and both single-source modes.
    #[arg(long)]
    suite: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Step budget for episodes read from scene files.
    #[arg(long, default_value_t = 40)]
    max_steps: usize,
    /// Comma-separated object classes the agent may stand on.
    #[arg(long, value_delimiter = ',')]
    walkable: Vec<String>,
    /// Episode configuration JSON; missing fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `{"class": "room"}` entries for the room classifier.
    #[arg(long)]
    rooms: Option<PathBuf>,
    /// Label of the metrics row (default: derived from the flags).
    #[arg(long)]
    label: Option<String>,
    /// Re-run exactly what a previous run's manifest records.
    #[arg(long, conflicts_with_all = ["scenes", "episodes", "ablate", "suite", "config", "rooms", "walkable"])]
    manifest: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabeledConfig {
    label: String,
    config: EpisodeConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct Skipped {
    label: String,
    episode: usize,
    name: String,
    error: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: String,
    core_version: String,
    seed: u64,
    oracle: OracleChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    remote: Option<RemoteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rooms: Option<serde_json::Value>,
    configs: Vec<LabeledConfig>,
    episodes: Vec<EpisodeSpec>,
    #[serde(default)]
    skipped: Vec<Skipped>,
}

enum Decider {
    Scripted(ScriptedOracle),
    Remote(RemoteOracle),
}

struct Agent {
    decider: Decider,
    rooms: RoomTable,
}

impl DecisionOracle for Agent {
    fn decide(&self, request: &OracleRequest) -> Result<OracleDecision, OracleError> {
        match &self.decider {
            Decider::Scripted(o) => o.decide(request),
            Decider::Remote(o) => o.decide(request),
        }
    }
}

impl RoomClassifier for Agent {
    fn classify_room(&self, panorama: &[HeadingSummary]) -> String {
        self.rooms.classify_room(panorama)
    }
}

fn load_scene_episodes(
    pattern: &str,
    per_scene: Option<usize>,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<EpisodeSpec>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad scene pattern {pattern:?}"))?
        .collect::<Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no scene file matches {pattern:?}");
    }
    let mut specs = Vec::new();
    for path in paths {
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let scene =
            Scene::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        if scene.episodes.is_empty() {
            bail!("{} stores no episodes", path.display());
        }
        let stem = path
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let defs = scene.episodes.clone();
        for (i, def) in defs
            .iter()
            .take(per_scene.unwrap_or(usize::MAX))
            .enumerate()
        {
            let mut spec = EpisodeSpec::new(scene.clone(), def.start, &def.target, max_steps);
            spec.name = format!("{stem}-{i}");
            spec.seed = seed;
            specs.push(spec);
        }
    }
    Ok(specs)
}

fn default_label(args: &RunArgs) -> String {
    let mut parts: Vec<String> = Vec::new();
    match args.oracle {
        OracleChoice::VlmOnly => parts.push("vlm-only".into()),
        OracleChoice::DetectorOnly => parts.push("detector-only".into()),
        _ => {}
    }
    parts.extend(args.ablate.iter().cloned());
    if parts.is_empty() {
        "full".into()
    } else {
        parts.join("+")
    }
}

fn build_configs(args: &RunArgs) -> Result<Vec<LabeledConfig>> {
    let mut base = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => EpisodeConfig::default(),
    };
    if !args.walkable.is_empty() {
        base.nav_class_names = args.walkable.clone();
    }
    for flag in &args.ablate {
        apply_ablation(&mut base, flag)?;
    }
    base.oracle_mode = match args.oracle {
        OracleChoice::VlmOnly => OracleMode::VlmOnly,
        OracleChoice::DetectorOnly => OracleMode::DetectorOnly,
        _ => base.oracle_mode,
    };
    base.validate()?;
    if args.suite {
        return Ok(ablation_suite(&base)
            .into_iter()
            .map(|(label, config)| LabeledConfig { label, config })
            .collect());
    }
    Ok(vec![LabeledConfig {
        label: args.label.clone().unwrap_or_else(|| default_label(args)),
        config: base,
    }])
}

fn new_manifest(args: &RunArgs) -> Result<Manifest> {
    let episodes = match &args.scenes {
        Some(pattern) => load_scene_episodes(pattern, args.episodes, args.max_steps, args.seed)?,
        None => generate_batch(
            args.seed,
            args.episodes.unwrap_or(10),
            &ProceduralConfig::default(),
        ),
    };
    let rooms = match &args.rooms {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let remote = match args.oracle {
        OracleChoice::Remote => Some(
            RemoteConfig::from_env()
                .with_context(|| format!("remote oracle needs an endpoint in {ENDPOINT_ENV}"))?,
        ),
        _ => None,
    };
    Ok(Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: objnav_core::VERSION.into(),
        seed: args.seed,
        oracle: args.oracle,
        remote,
        rooms,
        configs: build_configs(args)?,
        episodes,
        skipped: Vec::new(),
    })
}

fn load_manifest(path: &Path, oracle: OracleChoice) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut m: Manifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    m.skipped.clear();
    if m.oracle == OracleChoice::Remote || oracle == OracleChoice::Remote {
        // the key is never written to disk
        let env = RemoteConfig::from_env();
        let mut cfg = m
            .remote
            .take()
            .or_else(|| env.clone())
            .context("manifest has no remote endpoint")?;
        cfg.api_key = env.and_then(|e| e.api_key);
        m.remote = Some(cfg);
        m.oracle = OracleChoice::Remote;
    }
    Ok(m)
}

fn agent_for(m: &Manifest) -> Result<Agent> {
    let mut rooms = RoomTable::default();
    if let Some(v) = &m.rooms {
        rooms.extend(RoomTable::from_json(&v.to_string()).context("room table")?);
    }
    let scripted = ScriptedOracle::new(rooms.clone());
    let decider = match &m.remote {
        Some(cfg) => Decider::Remote(RemoteOracle::new(cfg.clone(), scripted)),
        None => Decider::Scripted(scripted),
    };
    Ok(Agent { decider, rooms })
}

fn file_stem(idx: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{idx:03}_{clean}")
}

fn write_artifacts(
    dir: &Path,
    label: &str,
    idx: usize,
    name: &str,
    r: &EpisodeResult,
) -> Result<()> {
    let stem = file_stem(idx, name);
    let logs = dir.join("logs").join(label);
    fs::create_dir_all(&logs)?;
    let f = fs::File::create(logs.join(format!("{stem}.jsonl")))?;
    r.write_log(BufWriter::new(f))?;
    let topo = dir.join("topo").join(label);
    fs::create_dir_all(&topo)?;
    fs::write(topo.join(format!("{stem}.txt")), &r.topo_text)?;
    if let Some(field) = &r.last_field {
        let fields = dir.join("fields").join(label);
        fs::create_dir_all(&fields)?;
        field.write_csv(BufWriter::new(fs::File::create(
            fields.join(format!("{stem}.csv")),
        )?))?;
    }
    Ok(())
}

pub fn run(args: RunArgs) -> Result<()> {
    let mut manifest = match &args.manifest {
        Some(p) => load_manifest(p, args.oracle)?,
        None => new_manifest(&args)?,
    };
    let agent = agent_for(&manifest)?;
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut metric_rows: Vec<(String, Metrics)> = Vec::new();
    let mut episode_rows: Vec<(String, usize, String, String, Outcome, usize)> = Vec::new();
    for lc in &manifest.configs {
        let results = run_batch(&manifest.episodes, &lc.config, &agent, threads);
        let mut outcomes = Vec::new();
        for (idx, (spec, r)) in manifest.episodes.iter().zip(results).enumerate() {
            match r {
                Ok(r) => {
                    write_artifacts(&args.out, &lc.label, idx, &spec.name, &r)?;
                    let o = r.outcome();
                    outcomes.push(o);
                    episode_rows.push((
                        lc.label.clone(),
                        idx,
                        spec.name.clone(),
                        spec.target.clone(),
                        o,
                        r.steps,
                    ));
                }
                Err(e) => {
                    eprintln!(
                        "warning: {} episode {idx} ({}) not run: {e}",
                        lc.label, spec.name
                    );
                    manifest.skipped.push(Skipped {
                        label: lc.label.clone(),
                        episode: idx,
                        name: spec.name.clone(),
                        error: e.to_string(),
                    });
                }
            }
        }
        match compute_metrics(&outcomes) {
            Ok(m) => {
                eprintln!(
                    "{}: {} episodes, SR {:.3}, SPL {:.3}, DTG {:.3}",
                    lc.label, m.episodes, m.sr, m.spl, m.dtg
                );
                metric_rows.push((lc.label.clone(), m));
            }
            Err(_) => eprintln!("warning: {} has no completed episodes", lc.label),
        }
    }

    write_metrics_csv(
        fs::File::create(args.out.join("metrics.csv"))?,
        &metric_rows,
    )?;
    write_episodes_csv(
        fs::File::create(args.out.join("episodes.csv"))?,
        &episode_rows,
    )?;
    let f = fs::File::create(args.out.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;
    Ok(())
}
