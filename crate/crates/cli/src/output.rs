//! Trajectory CSV and verdict JSON.

use std::fmt::Write as _;

use hycon_core::{
    bound_case1, bound_case2, bound_case3, AgentKind, ConsensusVerdict, HybridSystem, MonteCarloMean,
    SamplingBound, Trajectory,
};
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const TRAJECTORY_HEADER: &str = "t,agent,value,kind,record";
pub const MEAN_HEADER: &str = "t,agent,mean,stderr";

fn kind(i: usize, continuous: usize) -> &'static str {
    if i < continuous {
        AgentKind::Continuous.as_str()
    } else {
        AgentKind::Discrete.as_str()
    }
}

/// Long-form CSV, one row per (time, agent). Agents are 1-based. Each
/// interval's dense rows come after the sample rows at its start.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(32 * (traj.sample_states.len() * 8 + traj.dense_records.len()));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    let steps = traj.steps();
    let per_interval = if steps == 0 { 0 } else { traj.dense_records.len() / steps };
    for (k, (t, state)) in traj.sample_times.iter().zip(&traj.sample_states).enumerate() {
        for (i, v) in state.iter().enumerate() {
            let _ = writeln!(out, "{t},{},{v},{},sample", i + 1, kind(i, traj.continuous));
        }
        if k < steps {
            for rec in &traj.dense_records[k * per_interval..(k + 1) * per_interval] {
                let _ = writeln!(
                    out,
                    "{},{},{},{},dense",
                    rec.t,
                    rec.agent + 1,
                    rec.value,
                    kind(rec.agent, traj.continuous)
                );
            }
        }
    }
    out
}

pub fn mean_csv(mc: &MonteCarloMean, h: f64) -> String {
    let mut out = String::from(MEAN_HEADER);
    out.push('\n');
    for (k, (mean, err)) in mc.mean.iter().zip(&mc.stderr).enumerate() {
        let t = k as f64 * h;
        for (i, (m, s)) in mean.iter().zip(err).enumerate() {
            let _ = writeln!(out, "{t},{},{m},{s}", i + 1);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Bounds {
    /// `None` when unbounded.
    pub bound_case1: Option<f64>,
    pub bound_case2: Option<f64>,
    pub bound_case3: Option<f64>,
}

fn finite(b: SamplingBound) -> Option<f64> {
    match b {
        SamplingBound::Finite(v) => Some(v),
        SamplingBound::Unbounded => None,
    }
}

impl Bounds {
    pub fn of(sys: &HybridSystem) -> Self {
        Self {
            bound_case1: finite(bound_case1(sys)),
            bound_case2: finite(bound_case2(sys)),
            bound_case3: finite(bound_case3(sys)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictReport<'a> {
    pub verdict: &'a ConsensusVerdict,
    pub bounds: Bounds,
    pub config: &'a ExperimentConfig,
}

pub fn verdict_json(report: &VerdictReport<'_>) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}
