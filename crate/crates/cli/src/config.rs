//! Experiment configuration: a plain `key = value` file.
//!
//! ```text
//! # hold protocol on g1
//! graph = g1.edges        # edge-list file, relative to this config
//! case = 1                # 1 hold, 2 self-observing, 3 gossip
//! m = 3                   # continuous-time agents (the first m)
//! x0 = paper              # six-agent preset, or a list: -13, 14, 3, -9, -3, 6
//! h = 0.2                 # implied by `x0 = paper` when omitted
//! steps = 300
//! dense_per_step = 10
//! seed = 0
//! trials = 1000
//! gossip_probs = uniform  # or `1-2:0.5, 2-3:0.5` (1-based pairs)
//! tol = 1e-8
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hycon_core::{parse_edge_list, GossipSchedule, HybridSystem, Protocol, RunConfig, WeightedDigraph};
use serde::Serialize;

use crate::error::CliError;

pub const PRESET_X0: [f64; 6] = [-13.0, 14.0, 3.0, -9.0, -3.0, 6.0];
pub const PRESET_H: f64 = 0.2;

pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_DENSE_PER_STEP: usize = 10;
pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-8;

const KEYS: [&str; 11] = [
    "graph",
    "case",
    "m",
    "h",
    "x0",
    "steps",
    "dense_per_step",
    "seed",
    "trials",
    "gossip_probs",
    "tol",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GossipProbs {
    Uniform,
    /// `(i, j, p)` with 0-based indices.
    Explicit(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub graph_path: PathBuf,
    pub case: u8,
    pub m: usize,
    pub h: f64,
    pub x0: Vec<f64>,
    pub steps: usize,
    pub dense_per_step: usize,
    pub seed: u64,
    pub trials: usize,
    pub gossip_probs: GossipProbs,
    pub tol: f64,
    #[serde(skip)]
    pub graph: WeightedDigraph,
}

impl ExperimentConfig {
    pub fn protocol(&self) -> Protocol {
        Protocol::from_number(self.case).expect("case validated on load")
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            steps: self.steps,
            dense_per_step: self.dense_per_step,
            seed: self.seed,
            trials: self.trials,
        }
    }

    pub fn system(&self) -> Result<HybridSystem, CliError> {
        HybridSystem::new(self.graph.clone(), self.m, self.h, self.x0.clone())
            .map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn schedule(&self) -> Result<GossipSchedule, hycon_core::Error> {
        match &self.gossip_probs {
            GossipProbs::Uniform => GossipSchedule::uniform(&self.graph),
            GossipProbs::Explicit(entries) => GossipSchedule::new(&self.graph, entries.clone()),
        }
    }
}

/// Raw `key = value` pairs, before validation.
pub type RawConfig = BTreeMap<String, String>;

pub fn parse_raw(text: &str) -> Result<RawConfig, CliError> {
    let mut raw = RawConfig::new();
    for (idx, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::Parse(format!("line {}: expected `key = value`", idx + 1)));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Parse(format!("line {}: unknown key {key:?}", idx + 1)));
        }
        if raw.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::Parse(format!("line {}: duplicate key {key:?}", idx + 1)));
        }
    }
    Ok(raw)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    load_config_with(path, &RawConfig::new())
}

/// Loads `path`, replaces any keys present in `overrides`, and validates.
pub fn load_config_with(path: &Path, overrides: &RawConfig) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut raw = parse_raw(&text)?;
    for (k, v) in overrides {
        if !KEYS.contains(&k.as_str()) {
            return Err(CliError::Parse(format!("unknown key {k:?}")));
        }
        raw.insert(k.clone(), v.clone());
    }
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(&raw, base)
}

fn required<'a>(raw: &'a RawConfig, key: &str) -> Result<&'a str, CliError> {
    raw.get(key)
        .map(String::as_str)
        .ok_or_else(|| CliError::Parse(format!("missing required key {key:?}")))
}

fn parsed<T: std::str::FromStr>(raw: &RawConfig, key: &str, default: T) -> Result<T, CliError> {
    match raw.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Parse(format!("invalid value {v:?} for {key:?}"))),
    }
}

fn parse_reals(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Parse(format!("invalid number {s:?} in x0")))
        })
        .collect()
}

fn parse_probs(text: &str, n: usize) -> Result<GossipProbs, CliError> {
    if text == "uniform" {
        return Ok(GossipProbs::Uniform);
    }
    let bad = |s: &str| CliError::Parse(format!("invalid gossip_probs entry {s:?}; expected `i-j:p`"));
    let mut entries = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (pair, p) = item.split_once(':').ok_or_else(|| bad(item))?;
        let (i, j) = pair.split_once('-').ok_or_else(|| bad(item))?;
        let index = |s: &str| -> Result<usize, CliError> {
            let v: usize = s.trim().parse().map_err(|_| bad(item))?;
            if v == 0 || v > n {
                return Err(CliError::Parse(format!("agent {v} outside 1..={n} in gossip_probs")));
            }
            Ok(v - 1)
        };
        let p: f64 = p.trim().parse().map_err(|_| bad(item))?;
        entries.push((index(i)?, index(j)?, p));
    }
    Ok(GossipProbs::Explicit(entries))
}

pub fn resolve(raw: &RawConfig, base: &Path) -> Result<ExperimentConfig, CliError> {
    let graph_path = base.join(required(raw, "graph")?);
    let text = std::fs::read_to_string(&graph_path).map_err(|e| CliError::io(&graph_path, e))?;
    let graph = parse_edge_list(&text).map_err(|e| CliError::Parse(format!("{}: {e}", graph_path.display())))?;
    let n = graph.order();

    let case_text = required(raw, "case")?;
    let case = case_text
        .parse::<u8>()
        .ok()
        .filter(|c| Protocol::from_number(*c).is_some())
        .ok_or_else(|| CliError::UnknownCase(case_text.to_string()))?;

    let x0_text = required(raw, "x0")?;
    let (x0, preset_h) = if x0_text == "paper" {
        if n != PRESET_X0.len() {
            return Err(CliError::DimensionMismatch {
                what: "x0 = paper".into(),
                expected: PRESET_X0.len(),
                found: n,
            });
        }
        (PRESET_X0.to_vec(), Some(PRESET_H))
    } else {
        let x0 = parse_reals(x0_text)?;
        if x0.len() != n {
            return Err(CliError::DimensionMismatch {
                what: "x0".into(),
                expected: n,
                found: x0.len(),
            });
        }
        (x0, None)
    };
    let h = match (raw.get("h"), preset_h) {
        (Some(_), _) => parsed(raw, "h", 0.0)?,
        (None, Some(h)) => h,
        (None, None) => return Err(CliError::Parse("missing required key \"h\"".into())),
    };
    let m = parsed(raw, "m", 0usize)?;
    if m > n {
        return Err(CliError::DimensionMismatch {
            what: "m (continuous agents)".into(),
            expected: n,
            found: m,
        });
    }
    let gossip_probs = match raw.get("gossip_probs") {
        None => GossipProbs::Uniform,
        Some(text) => parse_probs(text, n)?,
    };
    let tol = parsed(raw, "tol", DEFAULT_TOL)?;
    if !(tol > 0.0) {
        return Err(CliError::Parse(format!("tol must be positive, got {tol}")));
    }

    Ok(ExperimentConfig {
        graph_path,
        case,
        m,
        h,
        x0,
        steps: parsed(raw, "steps", DEFAULT_STEPS)?,
        dense_per_step: parsed(raw, "dense_per_step", DEFAULT_DENSE_PER_STEP)?,
        seed: parsed(raw, "seed", 0u64)?,
        trials: parsed(raw, "trials", DEFAULT_TRIALS)?,
        gossip_probs,
        tol,
        graph,
    })
}
