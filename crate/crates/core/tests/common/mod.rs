//! Shared helpers for the integration test targets: bundled assets and a
//! deterministic family of random admissible chain graphs.
#![allow(dead_code)] // each test target uses a different subset

use ntcon_core::fileio::{load_graph, load_schedule};
use ntcon_core::graph::MatrixGraph;
use ntcon_core::linalg::{norm2, Mat};
use ntcon_core::rng::PathRng;
use ntcon_core::schedule::TopologySchedule;
use std::path::{Path, PathBuf};

pub fn asset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join(name)
}

pub fn graph(name: &str) -> MatrixGraph {
    load_graph(&asset(name)).expect("bundled graph loads")
}

pub fn fixed_schedule() -> TopologySchedule {
    load_schedule(&asset("schedule_fixed_51.toml")).expect("bundled schedule loads")
}

pub fn switching_schedule() -> TopologySchedule {
    load_schedule(&asset("schedule_switching_52.toml")).expect("bundled schedule loads")
}

/// Shared initial state for ensemble runs, drawn once from the master seed.
pub fn uniform_x0(seed: u64, len: usize) -> Vec<f64> {
    let rng = PathRng::new(seed, u64::MAX);
    (0..len).map(|c| rng.uniform_in(c, -5.0, 5.0)).collect()
}

/// Deterministic d×d symmetric positive definite matrix: GᵀG + I with
/// G entries uniform in [-1, 1].
fn spd(d: usize, rng: &PathRng, coord: &mut usize) -> Mat {
    let mut g = Mat::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            g[(r, c)] = rng.uniform_in(*coord, -1.0, 1.0);
            *coord += 1;
        }
    }
    g.transpose().matmul(&g).add(&Mat::identity(d))
}

fn draw(rng: &PathRng, coord: &mut usize, lo: f64, hi: f64) -> f64 {
    let v = rng.uniform_in(*coord, lo, hi);
    *coord += 1;
    v
}

/// A random admissible chain: strictly positive definite edges i-1 -> i with
/// strictly decreasing multiples of one SPD matrix M, one negative edge
/// N -> 1 (so vertex 1 is antagonized and ends up alone in V1), and
/// sometimes a second small negative edge from an interior vertex. Every
/// draw is dominated/reachable by construction. When `unit_scales` is set
/// the multiples are exactly N+2-i with b = 1/2, for which the coupling
/// bound has the closed form C = N - 1/2.
pub fn random_chain(k: u64, unit_scales: bool) -> (MatrixGraph, Vec<f64>) {
    let rng = PathRng::new(0xC4A1_1234, k);
    let mut coord = 0usize;
    let n = 3 + (draw(&rng, &mut coord, 0.0, 6.0).floor() as usize).min(5);
    let d = 1 + (draw(&rng, &mut coord, 0.0, 3.0).floor() as usize).min(2);
    let m = spd(d, &rng, &mut coord);

    // Strictly decreasing chain multiples a_2 > a_3 > ... > a_N.
    let mut a = vec![0.0; n + 1];
    if unit_scales {
        for i in 2..=n {
            a[i] = (n + 2 - i) as f64;
        }
    } else {
        a[n] = 1.0 + draw(&rng, &mut coord, 0.0, 1.0);
        for i in (2..n).rev() {
            a[i] = a[i + 1] + 0.1 + draw(&rng, &mut coord, 0.0, 1.0);
        }
    }
    let b = if unit_scales { 0.5 } else { 0.9 * a[n] * draw(&rng, &mut coord, 0.1, 1.0) };

    let mut edges = Vec::new();
    for i in 2..=n {
        edges.push((i, i - 1, m.scale(a[i])));
    }
    edges.push((1, n, m.scale(-b)));
    if !unit_scales && n >= 4 && draw(&rng, &mut coord, 0.0, 1.0) > 0.5 {
        // Interior source j keeps its domination slack: out gains at most
        // 0.05·M against a margin of 0.1·M.
        let j = 2 + (draw(&rng, &mut coord, 0.0, (n - 3) as f64).floor() as usize).min(n - 4);
        let b2 = draw(&rng, &mut coord, 0.01, 0.05);
        edges.push((1, j, m.scale(-b2)));
    }
    let g = MatrixGraph::new(n, d, edges).expect("chain family is structurally valid");

    let mut theta: Vec<f64> = (0..d).map(|_| draw(&rng, &mut coord, -3.0, 3.0)).collect();
    if norm2(&theta) < 0.1 {
        theta[0] += 1.0;
    }
    (g, theta)
}
