//! Monte-Carlo ensembles over independent noise paths, mean-square error
//! statistics, and convergence verdicts.
//!
//! Paths are integrated in parallel but reduced sequentially in path order
//! with compensated summation, so the statistics are bit-identical for any
//! thread count, and concatenating separately computed path ranges
//! reproduces a single full run exactly.

use crate::linalg::Mat;
use crate::sim::{integrate, SimConfig, SimError};
use rayon::prelude::*;
use std::ops::Range;

/// Ensemble statistics on the subsampled grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// Mean squared consensus error per agent, grid × N.
    pub ms_error: Mat,
    /// Standard error of each mean cell, grid × N.
    pub stderr: Mat,
    pub n_paths: usize,
    pub master_seed: u64,
}

fn grid_len(cfg: &SimConfig, subsample: usize) -> Result<usize, SimError> {
    let steps = cfg.steps();
    if subsample == 0 || steps % subsample != 0 {
        return Err(SimError::InvalidConfig(format!(
            "subsample {subsample} must divide the {steps} steps"
        )));
    }
    Ok(steps / subsample + 1)
}

/// Squared-error curves ‖x_i(t) − θ‖² for each path index in `paths`,
/// subsampled every `subsample` steps. Computed in parallel; the returned
/// order is the path order regardless of scheduling.
pub fn path_error_curves(
    cfg: &SimConfig,
    paths: Range<u64>,
    subsample: usize,
) -> Result<Vec<Mat>, SimError> {
    let grid = grid_len(cfg, subsample)?;
    let (n, d) = cfg.schedule.shape();
    let theta = cfg.schedule.theta();
    let results: Vec<Result<Mat, SimError>> = paths
        .into_par_iter()
        .map(|p| {
            let mut curve = Mat::zeros(grid, n);
            integrate(cfg, p, |k, _t, x| {
                if k % subsample == 0 {
                    let row = curve.row_mut(k / subsample);
                    for i in 0..n {
                        let mut acc = 0.0;
                        for s in 0..d {
                            let e = x[i * d + s] - theta[s];
                            acc += e * e;
                        }
                        row[i] = acc;
                    }
                }
            })?;
            Ok(curve)
        })
        .collect();
    // Surface the first failure in path order so errors are deterministic.
    results.into_iter().collect()
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

/// Reduce per-path curves (in path order) to means and standard errors.
/// Deviations are accumulated against the first curve as anchor, so a
/// degenerate ensemble (all paths equal) yields exact zeros for stderr.
pub fn reduce_curves(
    times: Vec<f64>,
    curves: &[Mat],
    master_seed: u64,
) -> Result<EnsembleStats, SimError> {
    let m = curves.len();
    if m < 2 {
        return Err(SimError::InvalidConfig(format!(
            "ensemble statistics need at least 2 paths (got {m})"
        )));
    }
    let (rows, cols) = (curves[0].rows(), curves[0].cols());
    let mut mean = Mat::zeros(rows, cols);
    let mut stderr = Mat::zeros(rows, cols);
    let mut sums = vec![0.0; cols];
    let mut comps = vec![0.0; cols];
    for r in 0..rows {
        let anchor = curves[0].row(r);
        sums.fill(0.0);
        comps.fill(0.0);
        for curve in curves {
            let row = curve.row(r);
            for c in 0..cols {
                neumaier_add(&mut sums[c], &mut comps[c], row[c] - anchor[c]);
            }
        }
        for c in 0..cols {
            mean[(r, c)] = anchor[c] + (sums[c] + comps[c]) / m as f64;
        }
        sums.fill(0.0);
        comps.fill(0.0);
        for curve in curves {
            let row = curve.row(r);
            for c in 0..cols {
                let dev = row[c] - mean[(r, c)];
                neumaier_add(&mut sums[c], &mut comps[c], dev * dev);
            }
        }
        for c in 0..cols {
            let var = (sums[c] + comps[c]) / (m - 1) as f64;
            stderr[(r, c)] = (var.max(0.0) / m as f64).sqrt();
        }
    }
    Ok(EnsembleStats { times, ms_error: mean, stderr, n_paths: m, master_seed })
}

/// Run paths 0..m and reduce. Identical output for any rayon pool size.
pub fn run_ensemble(cfg: &SimConfig, m: usize, subsample: usize) -> Result<EnsembleStats, SimError> {
    let grid = grid_len(cfg, subsample)?;
    let times: Vec<f64> = (0..grid).map(|gi| (gi * subsample) as f64 * cfg.dt).collect();
    let curves = path_error_curves(cfg, 0..m as u64, subsample)?;
    reduce_curves(times, &curves, cfg.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Converging,
    Plateau,
    Diverging,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Converging => write!(f, "converging"),
            Verdict::Plateau => write!(f, "plateau"),
            Verdict::Diverging => write!(f, "diverging"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConvergence {
    pub agent: usize,
    /// Mean ms error over the leading window.
    pub initial: f64,
    /// Mean over a centered window of the same width.
    pub mid: f64,
    /// Mean over the trailing window.
    pub last: f64,
    /// last / initial.
    pub ratio: f64,
    /// Strictly decreasing through the three windows.
    pub trend: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub window: f64,
    pub agents: Vec<AgentConvergence>,
    /// Worst verdict over all agents.
    pub aggregate: Verdict,
}

/// Classify each agent's mean-square error curve by comparing leading,
/// centered, and trailing window means (window = fraction of the grid).
pub fn convergence_report(
    stats: &EnsembleStats,
    window: f64,
) -> Result<ConvergenceReport, SimError> {
    if !(window > 0.0 && window <= 1.0 / 3.0) {
        return Err(SimError::InvalidConfig(format!(
            "window must lie in (0, 1/3] so the three windows are disjoint (got {window})"
        )));
    }
    let rows = stats.ms_error.rows();
    let nw = ((rows as f64 * window).floor() as usize).max(1);
    let mean_over = |agent: usize, start: usize| -> f64 {
        (start..start + nw).map(|r| stats.ms_error[(r, agent)]).sum::<f64>() / nw as f64
    };
    let mut agents = Vec::with_capacity(stats.ms_error.cols());
    for a in 0..stats.ms_error.cols() {
        let initial = mean_over(a, 0);
        let mid = mean_over(a, (rows - nw) / 2);
        let last = mean_over(a, rows - nw);
        let ratio = if last == 0.0 { 0.0 } else { last / initial };
        let trend = last < mid && mid < initial;
        let verdict = if last == 0.0 || (ratio < 0.1 && trend) {
            Verdict::Converging
        } else if last > 10.0 * initial {
            Verdict::Diverging
        } else {
            Verdict::Plateau
        };
        agents.push(AgentConvergence { agent: a + 1, initial, mid, last, ratio, trend, verdict });
    }
    let aggregate = agents.iter().map(|a| a.verdict).max().unwrap_or(Verdict::Plateau);
    Ok(ConvergenceReport { window, agents, aggregate })
}
