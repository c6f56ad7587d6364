use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hycon_core::{
    decide, gossip_expected_matrix, monte_carlo_mean, protocols::sampled_matrix, simulate_deterministic,
    simulate_gossip, ConsensusVerdict, Protocol,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{mean_csv, trajectory_csv, verdict_json, Bounds, VerdictReport};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const MEAN_FILE: &str = "mean.csv";
pub const VERDICT_FILE: &str = "verdict.json";

/// Exit status when the run completed but its outcome contradicts the
/// solvability decision (e.g. too few steps to converge).
pub const EXIT_MISMATCH: i32 = 3;

pub fn check(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let sys = cfg.system()?;
    let sched = cfg.schedule_if_gossip()?;
    let verdict = decide(&sys, cfg.protocol(), sched.as_ref())?;
    Ok(verdict_json(&VerdictReport { verdict: &verdict, bounds: Bounds::of(&sys), config: cfg })?)
}

pub fn bounds(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let sys = cfg.system()?;
    let b = Bounds::of(&sys);
    let fmt = |v: Option<f64>| v.map_or_else(|| "inf".to_string(), |x| x.to_string());
    let mut out = String::new();
    let _ = writeln!(out, "h = {}", sys.h());
    let _ = writeln!(out, "bound_case1 = {}", fmt(b.bound_case1));
    let _ = writeln!(out, "bound_case2 = {}", fmt(b.bound_case2));
    let _ = writeln!(out, "bound_case3 = {}", fmt(b.bound_case3));
    Ok(out)
}

/// The one-step matrix of cases 1 and 2, or the expected gossip matrix, as
/// comma-separated rows.
pub fn matrix(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let sys = cfg.system()?;
    let m = match cfg.protocol() {
        Protocol::Gossip => gossip_expected_matrix(&sys, &cfg.schedule()?)?,
        p => sampled_matrix(&sys, p)?,
    };
    let mut out = String::new();
    for row in m.matrix().row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    Ok(out)
}

pub struct RunOutcome {
    pub verdict: ConsensusVerdict,
    pub exit_code: i32,
}

/// Simulates, writes the trajectory (plus the Monte-Carlo mean for gossip)
/// and the verdict report into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let sys = cfg.system()?;
    let protocol = cfg.protocol();
    let run_cfg = cfg.run_config();
    let sched = cfg.schedule_if_gossip()?;
    let prediction = decide(&sys, protocol, sched.as_ref())?;

    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let write = |name: &str, body: &str| {
        let p = out_dir.join(name);
        fs::write(&p, body).map_err(|e| CliError::io(&p, e))
    };

    let verdict = match &sched {
        None => {
            let traj = simulate_deterministic(&sys, protocol, &run_cfg)?;
            write(TRAJECTORY_FILE, &trajectory_csv(&traj))?;
            prediction.measure_trajectory(&traj, cfg.tol)
        }
        Some(sched) => {
            let traj = simulate_gossip(&sys, sched, &run_cfg)?;
            write(TRAJECTORY_FILE, &trajectory_csv(&traj))?;
            let mc = monte_carlo_mean(&sys, sched, &run_cfg)?;
            write(MEAN_FILE, &mean_csv(&mc, sys.h()))?;
            prediction.measure_mean(&mc, cfg.tol)
        }
    };
    write(
        VERDICT_FILE,
        &verdict_json(&VerdictReport { verdict: &verdict, bounds: Bounds::of(&sys), config: cfg })?,
    )?;
    let exit_code = if verdict.converged == verdict.solvable { 0 } else { EXIT_MISMATCH };
    Ok(RunOutcome { verdict, exit_code })
}

impl ExperimentConfig {
    fn schedule_if_gossip(&self) -> Result<Option<hycon_core::GossipSchedule>, CliError> {
        match self.protocol() {
            Protocol::Gossip => Ok(Some(self.schedule()?)),
            _ => Ok(None),
        }
    }
}
