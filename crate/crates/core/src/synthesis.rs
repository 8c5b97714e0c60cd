//! Protocol synthesis and certification: informed-agent selection, the
//! spectral coupling bound C, the coupling coefficient δ, gain k₁ and
//! external signal x₀ = k₁θ, per-agent coupling blocks |B_i|, the grounded
//! Laplacian, and the Hurwitz / positive-definiteness certificates.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{antagonized_set, laplacian, mabs, neighbor_sets, sum_abs_in, sum_abs_out, MatrixGraph};
use crate::linalg::{
    cholesky, classify_definiteness_default, is_hurwitz, norm2, sym_eigen, DefinitenessClass,
    LinalgError, Mat, SymMatrix,
};
use crate::structure::{verify_decomposition, Decomposition, DecompositionFailure};

/// Default margin added above the coupling bound C when choosing δ.
pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("vertex {0}: the summed |A_ij| over its negative in-neighborhood is not positive definite")]
    OmegaSumNotPD(usize),
    #[error("the graph has antagonized vertices but no V1 vertex has a negative in-neighborhood, so the coupling bound C is undefined")]
    EmptyV1WithAntagonism,
    #[error("theta must be a nonzero finite vector of length {expected}")]
    BadTheta { expected: usize },
    #[error("decomposition fails verification: {0:?}")]
    InvalidDecomposition(Vec<DecompositionFailure>),
    #[error("delta margin must be positive and finite (got {0})")]
    BadMargin(f64),
    #[error("delta = {delta} rejected: delta must be positive and exceed the coupling bound C = {c}")]
    DeltaNotAboveC { delta: f64, c: f64 },
    #[error("coupling block for vertex {vertex} has dimension {got}, expected {expected}")]
    DimensionMismatch { vertex: usize, got: usize, expected: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// How to pick the coupling coefficient δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaChoice {
    /// δ = max(C, 0) + margin, margin > 0.
    Margin(f64),
    /// δ given directly; must be positive and exceed C.
    Explicit(f64),
}

/// A synthesized consensus protocol for one graph: everything needed to run
/// and certify the grounded dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolDesign {
    pub n_agents: usize,
    pub dim: usize,
    /// Informed agents: exactly the antagonized set of the graph.
    pub informed_set: BTreeSet<usize>,
    pub delta: f64,
    pub k1: f64,
    pub theta: Vec<f64>,
    /// External signal x₀ = k₁·θ.
    pub x0: Vec<f64>,
    /// i ↦ |B_i| = Σ_{j∈Ω_i}|A_ij| for informed agents.
    pub coupling: BTreeMap<usize, SymMatrix>,
    pub grounded_laplacian: Mat,
    pub lyapunov_p: Option<SymMatrix>,
    /// The bound C = max C_i over anchors, when defined.
    pub c_bound: Option<f64>,
    pub decomposition: Decomposition,
    /// Set when the graph has no antagonism: grounding degenerates to the
    /// plain Laplacian and the design is emitted uncertified.
    pub degenerate: bool,
}

impl ProtocolDesign {
    pub fn n_states(&self) -> usize {
        self.n_agents * self.dim
    }

    /// Residual of the stationarity identity
    /// ‖−L_B·(1_N⊗θ) + k₁·(Δ⊗I_d)·B·θ‖ — algebraically zero for every
    /// synthesized design.
    pub fn stationarity_residual(&self) -> f64 {
        let d = self.dim;
        let ones_theta: Vec<f64> =
            (0..self.n_states()).map(|r| self.theta[r % d]).collect();
        let mut r: Vec<f64> =
            self.grounded_laplacian.matvec(&ones_theta).iter().map(|v| -v).collect();
        for (&i, b) in &self.coupling {
            let bt = b.matvec(&self.theta);
            for s in 0..d {
                r[(i - 1) * d + s] += self.k1 * self.delta * bt[s];
            }
        }
        norm2(&r)
    }

    /// Tolerance for the stationarity residual at this problem scale.
    pub fn residual_tolerance(&self) -> f64 {
        1e-9 * norm2(&self.theta) * self.n_agents as f64
    }

    pub fn attach_lyapunov(&mut self, p: SymMatrix) {
        self.lyapunov_p = Some(p);
    }
}

fn inv_sqrt(s: &SymMatrix) -> Result<Mat, LinalgError> {
    let e = sym_eigen(s)?;
    let n = s.dim();
    let mut w = Mat::zeros(n, n);
    // V·diag(λ^-1/2)·Vᵀ; caller guarantees λ > 0.
    for a in 0..n {
        for b in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += e.vectors[(a, k)] * e.vectors[(b, k)] / e.values[k].sqrt();
            }
            w[(a, b)] = acc;
        }
    }
    Ok(w)
}

/// Spectral coupling bound for one anchor vertex:
/// C_i = ½·λ_max[S^(−1/2)·(Σ_out|A_ji| − Σ_in|A_ij|)·S^(−1/2)] with
/// S = Σ_{j∈Ω_i}|A_ij|, which must be positive definite.
pub fn compute_ci(g: &MatrixGraph, i: usize) -> Result<f64, SynthesisError> {
    let sets = neighbor_sets(g, i);
    if sets.negative_in.is_empty() {
        return Err(SynthesisError::OmegaSumNotPD(i));
    }
    let s = sum_abs_in(g, i, &sets.negative_in);
    if classify_definiteness_default(&s)? != DefinitenessClass::PositiveDefinite {
        return Err(SynthesisError::OmegaSumNotPD(i));
    }
    let m = sum_abs_out(g, i, &sets.out_neighbors).sub(&sum_abs_in(g, i, &sets.in_neighbors));
    let w = inv_sqrt(&s)?;
    let t = SymMatrix::new(&w.matmul(m.as_mat()).matmul(&w))?;
    let e = sym_eigen(&t)?;
    Ok(0.5 * e.values[t.dim() - 1])
}

/// Assemble L_B = L + δ·blockdiag(|B_i|): only the diagonal blocks of
/// coupled agents change.
pub fn grounded_laplacian(
    g: &MatrixGraph,
    delta: f64,
    coupling: &BTreeMap<usize, SymMatrix>,
) -> Result<Mat, SynthesisError> {
    let d = g.dim();
    let mut lb = laplacian(g);
    for (&i, b) in coupling {
        if i < 1 || i > g.n_agents() {
            return Err(SynthesisError::DimensionMismatch {
                vertex: i,
                got: b.dim(),
                expected: d,
            });
        }
        if b.dim() != d {
            return Err(SynthesisError::DimensionMismatch {
                vertex: i,
                got: b.dim(),
                expected: d,
            });
        }
        let off = (i - 1) * d;
        for r in 0..d {
            for c in 0..d {
                lb[(off + r, off + c)] += delta * b.get(r, c);
            }
        }
    }
    Ok(lb)
}

/// Synthesize the consensus protocol on one graph: informed set 𝒱_I = the
/// antagonized set, C = max C_i over V1 vertices with nonempty negative
/// in-neighborhoods, δ per `DeltaChoice`, k₁ = 1 + 2/δ, x₀ = k₁θ, coupling
/// blocks |B_i|, and the grounded Laplacian. A graph without antagonism
/// yields a degenerate design (empty informed set, L_B = L) flagged as
/// uncertified rather than an error.
pub fn synthesize(
    g: &MatrixGraph,
    dec: &Decomposition,
    theta: &[f64],
    delta: DeltaChoice,
) -> Result<ProtocolDesign, SynthesisError> {
    let d = g.dim();
    if theta.len() != d || theta.iter().any(|v| !v.is_finite()) || theta.iter().all(|&v| v == 0.0)
    {
        return Err(SynthesisError::BadTheta { expected: d });
    }
    let report = verify_decomposition(g, dec);
    if !report.ok {
        return Err(SynthesisError::InvalidDecomposition(report.failures));
    }
    let informed: BTreeSet<usize> = antagonized_set(g).into_iter().collect();

    // C over the V1 anchors that actually carry antagonistic in-edges; other
    // V1 vertices play no role in the bound.
    let mut c_bound: Option<f64> = None;
    for &i in dec.v1() {
        if neighbor_sets(g, i).negative_in.is_empty() {
            continue;
        }
        let ci = compute_ci(g, i)?;
        c_bound = Some(c_bound.map_or(ci, |c: f64| c.max(ci)));
    }
    if c_bound.is_none() && !informed.is_empty() {
        return Err(SynthesisError::EmptyV1WithAntagonism);
    }

    let delta = match delta {
        DeltaChoice::Margin(m) => {
            if !(m > 0.0 && m.is_finite()) {
                return Err(SynthesisError::BadMargin(m));
            }
            c_bound.unwrap_or(0.0).max(0.0) + m
        }
        DeltaChoice::Explicit(v) => {
            let floor = c_bound.unwrap_or(0.0);
            if !(v.is_finite() && v > 0.0 && v > floor) {
                return Err(SynthesisError::DeltaNotAboveC { delta: v, c: floor });
            }
            v
        }
    };
    let k1 = 1.0 + 2.0 / delta;
    let x0: Vec<f64> = theta.iter().map(|&v| k1 * v).collect();

    let mut coupling = BTreeMap::new();
    for &i in &informed {
        let omega = neighbor_sets(g, i).negative_in;
        let mut b = SymMatrix::zeros(d);
        for &j in &omega {
            b = b.add(mabs(g.weight(i, j).expect("negative in-neighbor edge")));
        }
        coupling.insert(i, b);
    }
    let grounded = grounded_laplacian(g, delta, &coupling)?;

    let design = ProtocolDesign {
        n_agents: g.n_agents(),
        dim: d,
        degenerate: informed.is_empty(),
        informed_set: informed,
        delta,
        k1,
        theta: theta.to_vec(),
        x0,
        coupling,
        grounded_laplacian: grounded,
        lyapunov_p: None,
        c_bound,
        decomposition: dec.clone(),
    };
    debug_assert!(design.stationarity_residual() <= design.residual_tolerance());
    Ok(design)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertMode {
    Fixed,
    TimeVarying,
}

/// Certificates for one design. `hurwitz` is `None` when the Lyapunov
/// operator was singular (test inconclusive). The verdict conjoins the
/// stationarity residual with the Hurwitz certificate (fixed topology) or
/// positive definiteness of L_B + L_Bᵀ (time-varying topology).
#[derive(Debug, Clone)]
pub struct CertificationReport {
    pub mode: CertMode,
    pub hurwitz: Option<bool>,
    pub sym_pd: bool,
    pub residual: f64,
    pub residual_ok: bool,
    pub lyapunov_p: Option<SymMatrix>,
    pub pass: bool,
    pub notes: Vec<String>,
}

pub fn certify_design(design: &ProtocolDesign, mode: CertMode) -> CertificationReport {
    let lb = &design.grounded_laplacian;
    let mut notes = Vec::new();

    let residual = design.stationarity_residual();
    let residual_ok = residual <= design.residual_tolerance();

    let neg = lb.scale(-1.0);
    let (hurwitz, lyapunov_p) = match is_hurwitz(&neg) {
        Ok(h) => (Some(h.hurwitz), h.p),
        Err(_) => {
            notes.push("Hurwitz test inconclusive: singular Lyapunov operator".into());
            (None, None)
        }
    };

    let sym = SymMatrix::new(&lb.add(&lb.transpose())).expect("finite grounded Laplacian");
    let sym_pd = cholesky(&sym).is_ok();

    if design.degenerate {
        notes.push(
            "no antagonistic edges: grounding degenerates to the plain Laplacian; \
             nontrivial consensus is not certified"
                .into(),
        );
    }
    for (&i, b) in &design.coupling {
        if classify_definiteness_default(b).ok()
            != Some(DefinitenessClass::PositiveDefinite)
        {
            notes.push(format!("coupling block B_{i} is only positive semidefinite"));
        }
    }

    let pass = residual_ok
        && match mode {
            CertMode::Fixed => hurwitz == Some(true),
            CertMode::TimeVarying => sym_pd,
        };
    CertificationReport { mode, hurwitz, sym_pd, residual, residual_ok, lyapunov_p, pass, notes }
}
