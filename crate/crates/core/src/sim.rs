//! Euler–Maruyama integration of the closed-loop consensus dynamics
//!
//!   dx = c(t)·(u − L_B x) dt
//!      + c(t)·Σ_(i,j) [ σ·|A_ij|·1 dW¹_ij + |A_ij|·f(x_j − x_i) dW²_ij ]
//!
//! where u stacks δ·|B_i|·x₀ on the informed blocks, each directed edge
//! carries two independent scalar Wiener channels (additive, relative-state)
//! whose increments land in the receiving block i, and f is the
//! multiplicative intensity. The left endpoint is used throughout (Itô).

use crate::gain::{eval_gain, GainError, GainSpec};
use crate::graph::{mabs, mabs_row_sums, MatrixGraph};
use crate::linalg::{norm2, Mat};
use crate::rng::PathRng;
use crate::schedule::TopologySchedule;
use crate::structure::{IntensityKind, NoiseIntensity};
use crate::synthesis::ProtocolDesign;
use thiserror::Error;

/// State norms beyond this are treated as divergence rather than rounded on.
pub const BLOWUP_NORM: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("state norm {norm:.3e} exceeded {BLOWUP_NORM:.0e} on path {path} at t = {t}")]
    NumericalBlowup { path: u64, t: f64, norm: f64 },
    #[error(transparent)]
    Gain(#[from] GainError),
}

/// Everything needed to integrate one path; validated on construction.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub schedule: TopologySchedule,
    pub gain: GainSpec,
    pub sigma_add: f64,
    pub intensity: NoiseIntensity,
    pub dt: f64,
    pub horizon: f64,
    /// Shared by every path of an ensemble.
    pub initial_state: Vec<f64>,
    pub seed: u64,
}

impl SimConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        schedule: TopologySchedule,
        gain: GainSpec,
        sigma_add: f64,
        intensity: NoiseIntensity,
        dt: f64,
        horizon: f64,
        initial_state: Vec<f64>,
        seed: u64,
    ) -> Result<Self, SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        let (n, d) = schedule.shape();
        if initial_state.len() != n * d {
            return bad(format!(
                "initial state has {} entries, schedule needs {}",
                initial_state.len(),
                n * d
            ));
        }
        if !initial_state.iter().all(|v| v.is_finite()) {
            return bad("initial state must be finite".into());
        }
        if !(sigma_add >= 0.0 && sigma_add.is_finite()) {
            return bad(format!("sigma_add must be finite and >= 0 (got {sigma_add})"));
        }
        if !(dt > 0.0 && dt.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
            return bad(format!("need dt > 0 and horizon > 0 (got dt {dt}, horizon {horizon})"));
        }
        let steps = (horizon / dt).round();
        if steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return bad(format!("horizon {horizon} is not an integer multiple of dt {dt}"));
        }
        if dt > schedule.min_duration() {
            return bad(format!(
                "dt {dt} exceeds the shortest schedule segment {}; switching instants would be skipped",
                schedule.min_duration()
            ));
        }
        Ok(SimConfig { schedule, gain, sigma_add, intensity, dt, horizon, initial_state, seed })
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// One realized path on the uniform grid t_k = k·dt.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Row k holds the stacked state at t_k; (steps+1) × N·d.
    pub states: Mat,
    pub theta: Vec<f64>,
}

/// Constant forcing term of a design: δ·|B_i|·x₀ on informed blocks, zero
/// elsewhere.
fn forcing(design: &ProtocolDesign) -> Vec<f64> {
    let d = design.dim;
    let mut u = vec![0.0; design.n_states()];
    for (&i, b) in &design.coupling {
        let ub = b.matvec(&design.x0);
        for s in 0..d {
            u[(i - 1) * d + s] = design.delta * ub[s];
        }
    }
    u
}

/// Drift field c(t)·(u − L_B x) under the design active at time t.
pub fn drift(
    t: f64,
    x: &[f64],
    design: &ProtocolDesign,
    gain: &GainSpec,
) -> Result<Vec<f64>, GainError> {
    let c = eval_gain(gain, t)?;
    let u = forcing(design);
    let mut out = design.grounded_laplacian.matvec(x);
    for (o, ui) in out.iter_mut().zip(&u) {
        *o = c * (ui - *o);
    }
    Ok(out)
}

/// Accumulate the Euler–Maruyama noise increment for one step into `out`.
/// Each stored edge e = (i, j) consumes up to two keyed draws — channel 0
/// additive, channel 1 multiplicative — landing in the receiving block i.
/// Channels with zero intensity draw nothing; keyed counters make that safe.
#[allow(clippy::too_many_arguments)]
fn accumulate_noise(
    g: &MatrixGraph,
    c: f64,
    sqrt_dt: f64,
    x: &[f64],
    sigma_add: f64,
    intensity: &NoiseIntensity,
    rng: &PathRng,
    step: usize,
    rel: &mut [f64],
    out: &mut [f64],
) {
    let d = g.dim();
    for (e, (i, j, w)) in g.edges().enumerate() {
        let bi = (i - 1) * d;
        let bj = (j - 1) * d;
        if sigma_add > 0.0 {
            let coef = c * sigma_add * sqrt_dt * rng.normal(step, e, 0);
            for (s, rs) in mabs_row_sums(w).iter().enumerate() {
                out[bi + s] += coef * rs;
            }
        }
        match &intensity.kind {
            IntensityKind::Linear(k) if *k == 0.0 => {}
            IntensityKind::Linear(k) => {
                for s in 0..d {
                    rel[s] = k * (x[bj + s] - x[bi + s]);
                }
                let coef = c * sqrt_dt * rng.normal(step, e, 1);
                let a = mabs(w);
                for s in 0..d {
                    let mut acc = 0.0;
                    for (r, f) in rel.iter().enumerate() {
                        acc += a.get(s, r) * f;
                    }
                    out[bi + s] += coef * acc;
                }
            }
            IntensityKind::Custom { eval, .. } => {
                for s in 0..d {
                    rel[s] = x[bj + s] - x[bi + s];
                }
                let f = eval(&rel[..d]);
                assert_eq!(f.len(), d, "intensity must preserve the block dimension");
                let coef = c * sqrt_dt * rng.normal(step, e, 1);
                let a = mabs(w);
                for s in 0..d {
                    let mut acc = 0.0;
                    for (r, fr) in f.iter().enumerate() {
                        acc += a.get(s, r) * fr;
                    }
                    out[bi + s] += coef * acc;
                }
            }
        }
    }
}

/// The full noise increment added to the state over [t, t+dt), reproducible
/// from (rng, step) alone.
#[allow(clippy::too_many_arguments)]
pub fn diffusion_step(
    t: f64,
    x: &[f64],
    dt: f64,
    g: &MatrixGraph,
    gain: &GainSpec,
    sigma_add: f64,
    intensity: &NoiseIntensity,
    rng: &PathRng,
    step: usize,
) -> Result<Vec<f64>, GainError> {
    let c = eval_gain(gain, t)?;
    let d = g.dim();
    let mut out = vec![0.0; g.n_states()];
    let mut rel = vec![0.0; d];
    accumulate_noise(g, c, dt.sqrt(), x, sigma_add, intensity, rng, step, &mut rel, &mut out);
    Ok(out)
}

/// Core loop shared by single-path and ensemble runs. `observe` sees the
/// state at every grid point including t = 0.
pub(crate) fn integrate<F: FnMut(usize, f64, &[f64])>(
    cfg: &SimConfig,
    path: u64,
    mut observe: F,
) -> Result<(), SimError> {
    let (n, d) = cfg.schedule.shape();
    let nd = n * d;
    let rng = PathRng::new(cfg.seed, path);
    let steps = cfg.steps();
    let sqrt_dt = cfg.dt.sqrt();

    let mut x = cfg.initial_state.clone();
    let mut next = vec![0.0; nd];
    let mut lx = vec![0.0; nd];
    let mut rel = vec![0.0; d];
    // Forcing vectors are constant per design; cache by identity since a
    // schedule hands out the same &ProtocolDesign for every hit.
    let mut cache: Vec<(*const ProtocolDesign, Vec<f64>)> = Vec::new();

    observe(0, 0.0, &x);
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let (g, design) = cfg.schedule.at_time(t);
        let c = eval_gain(&cfg.gain, t)?;
        let key = design as *const ProtocolDesign;
        let u = match cache.iter().find(|(p, _)| *p == key) {
            Some((_, u)) => u.as_slice(),
            None => {
                cache.push((key, forcing(design)));
                cache.last().map(|(_, u)| u.as_slice()).unwrap()
            }
        };

        design.grounded_laplacian.matvec_into(&x, &mut lx);
        let cdt = c * cfg.dt;
        for s in 0..nd {
            next[s] = x[s] + cdt * (u[s] - lx[s]);
        }
        accumulate_noise(
            g,
            c,
            sqrt_dt,
            &x,
            cfg.sigma_add,
            &cfg.intensity,
            &rng,
            k,
            &mut rel,
            &mut next,
        );

        let t_next = (k + 1) as f64 * cfg.dt;
        let norm = norm2(&next);
        // Inverted comparison so NaN trips the guard too.
        if !(norm <= BLOWUP_NORM) {
            return Err(SimError::NumericalBlowup { path, t: t_next, norm });
        }
        std::mem::swap(&mut x, &mut next);
        observe(k + 1, t_next, &x);
    }
    Ok(())
}

pub fn simulate_path(cfg: &SimConfig) -> Result<Trajectory, SimError> {
    simulate_path_indexed(cfg, 0)
}

/// Integrate the path with the given index under cfg.seed. Distinct indices
/// give independent noise; the same index is bit-reproducible.
pub fn simulate_path_indexed(cfg: &SimConfig, path: u64) -> Result<Trajectory, SimError> {
    let nd = cfg.initial_state.len();
    let steps = cfg.steps();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Mat::zeros(steps + 1, nd);
    integrate(cfg, path, |k, t, x| {
        times.push(t);
        states.row_mut(k).copy_from_slice(x);
    })?;
    Ok(Trajectory { times, states, theta: cfg.schedule.theta().to_vec() })
}

/// Squared consensus errors ‖x_i(t_k) − θ‖² as a (steps+1) × N matrix.
pub fn error_process(traj: &Trajectory) -> Mat {
    let d = traj.theta.len();
    let n = traj.states.cols() / d;
    let mut out = Mat::zeros(traj.states.rows(), n);
    for k in 0..traj.states.rows() {
        let row = traj.states.row(k);
        for i in 0..n {
            let mut acc = 0.0;
            for s in 0..d {
                let e = row[i * d + s] - traj.theta[s];
                acc += e * e;
            }
            out[(k, i)] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::GainSpec;
    use crate::structure::NoiseIntensity;
    use crate::synthesis::{certify_design, CertMode};
    use crate::testutil::{fixed_g1_schedule, switching_schedule};

    fn tile(theta: &[f64], n: usize) -> Vec<f64> {
        theta.iter().copied().cycle().take(theta.len() * n).collect()
    }

    fn noise_free(schedule: TopologySchedule, x0: Vec<f64>, dt: f64, horizon: f64) -> SimConfig {
        SimConfig::new(
            schedule,
            GainSpec::constant(1.0).unwrap(),
            0.0,
            NoiseIntensity::linear(0.0),
            dt,
            horizon,
            x0,
            7,
        )
        .unwrap()
    }

    #[test]
    fn consensus_point_is_stationary() {
        let s = fixed_g1_schedule();
        let x0 = tile(s.theta(), 7);
        let cfg = noise_free(s, x0.clone(), 1e-3, 1.0);
        let traj = simulate_path(&cfg).unwrap();
        let mut dev: f64 = 0.0;
        for k in 0..traj.states.rows() {
            for (s, v) in traj.states.row(k).iter().enumerate() {
                dev = dev.max((v - x0[s]).abs());
            }
        }
        assert!(dev <= 1e-12, "drift off the consensus point: {dev}");
    }

    #[test]
    fn lyapunov_energy_decays_noise_free() {
        let s = fixed_g1_schedule();
        let design = s.design("d1").unwrap();
        let report = certify_design(design, CertMode::Fixed);
        assert!(report.pass);
        let p = report.lyapunov_p.expect("fixed-mode pass carries P");

        let rng = PathRng::new(123, 0);
        let x0: Vec<f64> = (0..21).map(|c| rng.uniform_in(c, -5.0, 5.0)).collect();
        let theta = s.theta().to_vec();
        let cfg = noise_free(s, x0, 1e-3, 2.0);
        let traj = simulate_path(&cfg).unwrap();

        let energy = |row: &[f64]| {
            let eps: Vec<f64> = row.iter().enumerate().map(|(s, v)| v - theta[s % 3]).collect();
            let pe = p.matvec(&eps);
            eps.iter().zip(&pe).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut prev = energy(traj.states.row(0));
        for k in 1..traj.states.rows() {
            let v = energy(traj.states.row(k));
            assert!(v <= prev * (1.0 + 1e-9) + 1e-30, "energy rose at step {k}: {prev} -> {v}");
            prev = v;
        }
        assert!(prev < 0.5 * energy(traj.states.row(0)));
    }

    #[test]
    fn drift_reproduces_forcing_blocks_at_origin() {
        let s = fixed_g1_schedule();
        let design = s.design("d1").unwrap();
        let gain = GainSpec::constant(1.0).unwrap();
        let v = drift(0.0, &vec![0.0; 21], design, &gain).unwrap();
        // At x = 0 the drift is the forcing: δ·k₁·|B_i|·θ on informed blocks.
        let b2 = [9.243996069480208, 18.487992138960416, -9.243996069480208];
        let b3 = [0.9243996069480209, 1.8487992138960417, -1.8487992138960417];
        for s in 0..3 {
            assert!((v[3 + s] - b2[s]).abs() < 1e-9, "block 2 lane {s}: {}", v[3 + s]);
            assert!((v[6 + s] - b3[s]).abs() < 1e-9, "block 3 lane {s}: {}", v[6 + s]);
        }
        for (idx, val) in v.iter().enumerate() {
            if !(3..9).contains(&idx) {
                assert_eq!(*val, 0.0, "uninformed block leaked forcing at {idx}");
            }
        }
    }

    #[test]
    fn diffusion_on_single_edge_lands_in_receiving_block() {
        let g = crate::graph::test_graphs::two_agent_chain(2);
        let gain = GainSpec::constant(2.0).unwrap();
        let intensity = NoiseIntensity::linear(0.3);
        let x = vec![1.0, -1.0, 4.0, 0.5];
        let (dt, sigma, step) = (0.25, 1.5, 7usize);
        let rng = PathRng::new(99, 4);
        let got = diffusion_step(0.0, &x, dt, &g, &gain, sigma, &intensity, &rng, step).unwrap();

        let z1 = rng.normal(step, 0, 0);
        let z2 = rng.normal(step, 0, 1);
        let sq = dt.sqrt();
        // |A| = I₂, row sums 1: additive 2·1.5·√dt·z1, multiplicative
        // 2·√dt·z2·0.3·(x₂ − x₁) componentwise.
        for s in 0..2 {
            let want = 2.0 * sigma * sq * z1 + 2.0 * sq * z2 * 0.3 * (x[2 + s] - x[s]);
            assert_eq!(got[s], want, "lane {s}");
        }
        assert_eq!(&got[2..], &[0.0, 0.0], "sender block must not receive noise");
    }

    #[test]
    fn one_step_matches_drift_plus_diffusion() {
        let s = switching_schedule();
        let gain = GainSpec::power(1.0, 1.0).unwrap();
        let rng = PathRng::new(5, 0);
        let x0: Vec<f64> = (0..21).map(|c| rng.uniform_in(c, -5.0, 5.0)).collect();
        let cfg = SimConfig::new(
            s,
            gain.clone(),
            0.4,
            NoiseIntensity::linear(0.3),
            0.01,
            0.01,
            x0.clone(),
            5,
        )
        .unwrap();
        let traj = simulate_path(&cfg).unwrap();
        let (g, design) = cfg.schedule.at_time(0.0);
        let dr = drift(0.0, &x0, design, &gain).unwrap();
        let di =
            diffusion_step(0.0, &x0, 0.01, g, &gain, 0.4, &cfg.intensity, &rng, 0).unwrap();
        for s in 0..21 {
            let want = x0[s] + 0.01 * dr[s] + di[s];
            let got = traj.states[(1, s)];
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "lane {s}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn paths_are_reproducible_and_distinct() {
        let mk = || {
            SimConfig::new(
                fixed_g1_schedule(),
                GainSpec::power(1.0, 1.0).unwrap(),
                0.4,
                NoiseIntensity::linear(0.3),
                1e-3,
                0.5,
                tile(&[1.0, 2.0, -1.0], 7),
                42,
            )
            .unwrap()
        };
        let a = simulate_path_indexed(&mk(), 3).unwrap();
        let b = simulate_path_indexed(&mk(), 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_path_indexed(&mk(), 4).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn euler_error_halves_with_dt() {
        let s = fixed_g1_schedule();
        let rng = PathRng::new(11, 1);
        let x0: Vec<f64> = (0..21).map(|c| rng.uniform_in(c, -5.0, 5.0)).collect();
        let run = |dt: f64| {
            let cfg = noise_free(fixed_g1_schedule(), x0.clone(), dt, 1.0);
            let traj = simulate_path(&cfg).unwrap();
            traj.states.row(traj.states.rows() - 1).to_vec()
        };
        let _ = s;
        let (x4, x2, x1) = (run(4e-3), run(2e-3), run(1e-3));
        let diff = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
        };
        let ratio = diff(&x4, &x2) / diff(&x2, &x1);
        assert!((1.6..=2.5).contains(&ratio), "first-order ratio {ratio}");
    }

    #[test]
    fn blowup_guard_reports_divergence() {
        let s = fixed_g1_schedule();
        let g = s.graph("g1").unwrap().clone();
        let mut design = s.design("d1").unwrap().clone();
        // Flip the sign of the closed loop: a certified design would decay,
        // this one grows until the guard trips.
        design.grounded_laplacian = design.grounded_laplacian.scale(-50.0);
        let schedule = TopologySchedule::fixed("g1", g, "bad", design).unwrap();
        let cfg = noise_free(schedule, tile(&[1.0, 2.0, -1.0], 7), 1e-3, 1.0);
        match simulate_path(&cfg) {
            Err(SimError::NumericalBlowup { path: 0, t, norm }) => {
                assert!(t > 0.0 && t <= 1.0);
                assert!(!(norm <= BLOWUP_NORM));
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn config_validation_rejects_bad_setups() {
        let mk = |dt: f64, horizon: f64, len: usize, sigma: f64| {
            SimConfig::new(
                switching_schedule(),
                GainSpec::constant(1.0).unwrap(),
                sigma,
                NoiseIntensity::linear(0.0),
                dt,
                horizon,
                vec![0.0; len],
                1,
            )
        };
        assert!(matches!(mk(1e-3, 1.0, 20, 0.0), Err(SimError::InvalidConfig(_))));
        assert!(matches!(mk(3e-4, 1.0, 21, 0.0), Err(SimError::InvalidConfig(_))));
        assert!(matches!(mk(0.05, 1.0, 21, 0.0), Err(SimError::InvalidConfig(_))));
        assert!(matches!(mk(1e-3, 1.0, 21, -0.1), Err(SimError::InvalidConfig(_))));
        assert!(mk(1e-3, 1.0, 21, 0.4).is_ok());
        // dt = segment length is allowed; switching stays on-grid.
        assert!(mk(0.02, 1.0, 21, 0.0).is_ok());
    }
}
