//! Piecewise-constant topology schedules: a fixed pair, a cyclic switching
//! pattern, or an explicit segment list held at its last entry. Lookup is
//! right-continuous: the value at a switching instant comes from the new
//! segment.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::MatrixGraph;
use crate::structure::{check_bounded_weights, verify_decomposition};
use crate::synthesis::{certify_design, CertMode, CertificationReport, ProtocolDesign};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("schedule needs at least one segment")]
    Empty,
    #[error("segment duration must be positive and finite (got {0})")]
    BadDuration(f64),
    #[error("segment references unknown id `{0}`")]
    UnknownId(String),
    #[error("all graphs in a schedule must share the agent count and state dimension")]
    MismatchedShape,
    #[error("all designs in a schedule must target the same theta")]
    MismatchedTheta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub graph: String,
    pub design: String,
    /// Ignored (held forever) for fixed schedules.
    pub duration: f64,
}

impl Segment {
    pub fn new(graph: impl Into<String>, design: impl Into<String>, duration: f64) -> Self {
        Segment { graph: graph.into(), design: design.into(), duration }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// One (graph, design) pair for all time.
    Fixed,
    /// The segment pattern repeats with period = total duration.
    Cyclic,
    /// Segments play once; the last pair is held forever.
    Explicit,
}

#[derive(Debug, Clone)]
pub struct TopologySchedule {
    mode: ScheduleMode,
    segments: Vec<Segment>,
    /// Cumulative end times of the segments.
    cumulative: Vec<f64>,
    graphs: BTreeMap<String, MatrixGraph>,
    designs: BTreeMap<String, ProtocolDesign>,
}

impl TopologySchedule {
    pub fn fixed(
        graph_id: impl Into<String>,
        graph: MatrixGraph,
        design_id: impl Into<String>,
        design: ProtocolDesign,
    ) -> Result<Self, ScheduleError> {
        let graph_id = graph_id.into();
        let design_id = design_id.into();
        let segments = vec![Segment::new(graph_id.clone(), design_id.clone(), f64::INFINITY)];
        Self::build(
            ScheduleMode::Fixed,
            segments,
            BTreeMap::from([(graph_id, graph)]),
            BTreeMap::from([(design_id, design)]),
        )
    }

    pub fn cyclic(
        segments: Vec<Segment>,
        graphs: BTreeMap<String, MatrixGraph>,
        designs: BTreeMap<String, ProtocolDesign>,
    ) -> Result<Self, ScheduleError> {
        Self::build(ScheduleMode::Cyclic, segments, graphs, designs)
    }

    pub fn explicit(
        segments: Vec<Segment>,
        graphs: BTreeMap<String, MatrixGraph>,
        designs: BTreeMap<String, ProtocolDesign>,
    ) -> Result<Self, ScheduleError> {
        Self::build(ScheduleMode::Explicit, segments, graphs, designs)
    }

    fn build(
        mode: ScheduleMode,
        segments: Vec<Segment>,
        graphs: BTreeMap<String, MatrixGraph>,
        designs: BTreeMap<String, ProtocolDesign>,
    ) -> Result<Self, ScheduleError> {
        if segments.is_empty() {
            return Err(ScheduleError::Empty);
        }
        let mut cumulative = Vec::with_capacity(segments.len());
        let mut total = 0.0_f64;
        for s in &segments {
            if mode != ScheduleMode::Fixed && !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(ScheduleError::BadDuration(s.duration));
            }
            if !graphs.contains_key(&s.graph) {
                return Err(ScheduleError::UnknownId(s.graph.clone()));
            }
            if !designs.contains_key(&s.design) {
                return Err(ScheduleError::UnknownId(s.design.clone()));
            }
            total += s.duration;
            cumulative.push(total);
        }
        let shape = {
            let g = graphs.values().next().ok_or(ScheduleError::Empty)?;
            (g.n_agents(), g.dim())
        };
        if graphs.values().any(|g| (g.n_agents(), g.dim()) != shape) {
            return Err(ScheduleError::MismatchedShape);
        }
        let theta = designs.values().next().ok_or(ScheduleError::Empty)?.theta.clone();
        for d in designs.values() {
            if (d.n_agents, d.dim) != shape {
                return Err(ScheduleError::MismatchedShape);
            }
            if d.theta != theta {
                return Err(ScheduleError::MismatchedTheta);
            }
        }
        Ok(TopologySchedule { mode, segments, cumulative, graphs, designs })
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// (agent count, per-agent state dimension), shared by every graph.
    pub fn shape(&self) -> (usize, usize) {
        let g = self.graphs.values().next().expect("nonempty by construction");
        (g.n_agents(), g.dim())
    }

    pub fn theta(&self) -> &[f64] {
        &self.designs.values().next().expect("nonempty by construction").theta
    }

    pub fn graphs(&self) -> impl Iterator<Item = &MatrixGraph> {
        self.graphs.values()
    }

    pub fn graph(&self, id: &str) -> Option<&MatrixGraph> {
        self.graphs.get(id)
    }

    pub fn design(&self, id: &str) -> Option<&ProtocolDesign> {
        self.designs.get(id)
    }

    pub fn designs(&self) -> impl Iterator<Item = (&str, &ProtocolDesign)> {
        self.designs.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Total pattern duration (the period for cyclic schedules).
    pub fn period(&self) -> f64 {
        *self.cumulative.last().expect("nonempty by construction")
    }

    /// Shortest segment duration; infinite for fixed schedules.
    pub fn min_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).fold(f64::INFINITY, f64::min)
    }

    fn segment_index_at(&self, t: f64) -> usize {
        assert!(t >= 0.0, "schedule lookup requires t >= 0 (got {t})");
        match self.mode {
            ScheduleMode::Fixed => 0,
            ScheduleMode::Cyclic => {
                let tau = t.rem_euclid(self.period());
                self.cumulative.partition_point(|&end| end <= tau).min(self.segments.len() - 1)
            }
            ScheduleMode::Explicit => {
                self.cumulative.partition_point(|&end| end <= t).min(self.segments.len() - 1)
            }
        }
    }

    /// The (graph, design) pair active at time `t`, with half-open segment
    /// intervals [t_k, t_{k+1}) and cyclic wrap-around by t mod period.
    pub fn at_time(&self, t: f64) -> (&MatrixGraph, &ProtocolDesign) {
        let s = &self.segments[self.segment_index_at(t)];
        (&self.graphs[&s.graph], &self.designs[&s.design])
    }

    pub fn segment_at(&self, t: f64) -> &Segment {
        &self.segments[self.segment_index_at(t)]
    }
}

/// Aggregate certificate for a schedule: every distinct design certified
/// (time-varying mode needs L_B + L_Bᵀ positive definite per segment; a
/// fixed schedule reduces to the Hurwitz certificate), every (graph, design)
/// pairing's decomposition verified, and the weight-boundedness scan.
#[derive(Debug, Clone)]
pub struct ScheduleCertification {
    pub design_reports: BTreeMap<String, CertificationReport>,
    pub decomposition_ok: BTreeMap<String, bool>,
    pub weight_bound: f64,
    pub bounded: bool,
    pub pass: bool,
    pub failures: Vec<String>,
}

pub fn certify_schedule(s: &TopologySchedule) -> ScheduleCertification {
    let mode = if s.mode() == ScheduleMode::Fixed { CertMode::Fixed } else { CertMode::TimeVarying };
    let mut design_reports = BTreeMap::new();
    let mut decomposition_ok = BTreeMap::new();
    let mut failures = Vec::new();

    for seg in s.segments() {
        if !design_reports.contains_key(&seg.design) {
            let report = certify_design(&s.designs[&seg.design], mode);
            if !report.pass {
                failures.push(format!("design `{}` fails certification", seg.design));
            }
            design_reports.insert(seg.design.clone(), report);
        }
        let pair = format!("{}/{}", seg.graph, seg.design);
        if !decomposition_ok.contains_key(&pair) {
            let ok = verify_decomposition(&s.graphs[&seg.graph], &s.designs[&seg.design].decomposition)
                .ok;
            if !ok {
                failures.push(format!("decomposition of design `{}` fails on graph `{}`", seg.design, seg.graph));
            }
            decomposition_ok.insert(pair, ok);
        }
    }
    let (weight_bound, bounded) = check_bounded_weights(s, f64::INFINITY);
    if !bounded {
        failures.push("weight entries unbounded".into());
    }
    let pass = failures.is_empty();
    ScheduleCertification { design_reports, decomposition_ok, weight_bound, bounded, pass, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::find_decomposition;
    use crate::synthesis::{synthesize, DeltaChoice};
    use crate::testutil::{design_for, g1, g3, switching_schedule};

    #[test]
    fn cyclic_lookup_matches_pattern() {
        let s = switching_schedule();
        assert_eq!(s.period(), 0.1);
        assert_eq!(s.min_duration(), 0.02);
        for (t, want) in [
            (0.0, 7.0495),
            (0.03, 7.0495),
            (0.04, 7.2440), // boundary: right-continuous
            (0.05, 7.2440),
            (0.06, 3.1),
            (0.09, 3.1),
            (0.10, 7.0495), // wrap
            (0.15, 7.2440), // periodicity
        ] {
            let (_, d) = s.at_time(t);
            assert_eq!(d.delta, want, "at t = {t}");
        }
        // at_time(t) == at_time(t + period) on a fine grid.
        for k in 0..200 {
            let t = k as f64 * 0.0007;
            assert_eq!(s.at_time(t).1.delta, s.at_time(t + s.period()).1.delta);
        }
    }

    #[test]
    fn fixed_and_explicit_modes() {
        let g = g1();
        let d = design_for(&g, DeltaChoice::Margin(0.1));
        let s = TopologySchedule::fixed("g1", g, "d1", d).unwrap();
        assert!(s.min_duration().is_infinite());
        for t in [0.0, 1.0, 1e6] {
            assert!((s.at_time(t).1.delta - 7.2440).abs() < 5e-4);
        }

        let (ga, gb) = (g1(), g3());
        let designs = BTreeMap::from([
            ("a".to_string(), design_for(&ga, DeltaChoice::Margin(0.1))),
            ("b".to_string(), design_for(&gb, DeltaChoice::Explicit(3.1))),
        ]);
        let graphs = BTreeMap::from([("ga".to_string(), ga), ("gb".to_string(), gb)]);
        let s = TopologySchedule::explicit(
            vec![Segment::new("ga", "a", 1.0), Segment::new("gb", "b", 2.0)],
            graphs,
            designs,
        )
        .unwrap();
        assert!((s.at_time(0.5).1.delta - 7.2440).abs() < 5e-4);
        assert_eq!(s.at_time(1.0).1.delta, 3.1);
        assert_eq!(s.at_time(3.0).1.delta, 3.1); // hold last
        assert_eq!(s.at_time(100.0).1.delta, 3.1);
    }

    #[test]
    fn construction_rejects_bad_input() {
        let g = g1();
        let d = design_for(&g, DeltaChoice::Margin(0.1));
        let graphs = BTreeMap::from([("g1".to_string(), g)]);
        let designs = BTreeMap::from([("d1".to_string(), d)]);
        assert_eq!(
            TopologySchedule::cyclic(vec![], graphs.clone(), designs.clone()).unwrap_err(),
            ScheduleError::Empty
        );
        assert_eq!(
            TopologySchedule::cyclic(
                vec![Segment::new("g1", "d1", 0.0)],
                graphs.clone(),
                designs.clone()
            )
            .unwrap_err(),
            ScheduleError::BadDuration(0.0)
        );
        assert_eq!(
            TopologySchedule::cyclic(
                vec![Segment::new("gX", "d1", 1.0)],
                graphs.clone(),
                designs.clone()
            )
            .unwrap_err(),
            ScheduleError::UnknownId("gX".into())
        );
        // Mismatched theta across designs.
        let g = g1();
        let dec = find_decomposition(&g, 16).unwrap();
        let other = synthesize(&g, &dec, &[1.0, 1.0, 1.0], DeltaChoice::Margin(0.1)).unwrap();
        let graphs = BTreeMap::from([("g1".to_string(), g)]);
        let designs2 = BTreeMap::from([
            ("d1".to_string(), designs["d1"].clone()),
            ("dX".to_string(), other),
        ]);
        assert_eq!(
            TopologySchedule::cyclic(
                vec![Segment::new("g1", "d1", 1.0), Segment::new("g1", "dX", 1.0)],
                graphs,
                designs2
            )
            .unwrap_err(),
            ScheduleError::MismatchedTheta
        );
    }

    #[test]
    fn schedule_certification() {
        let cert = certify_schedule(&switching_schedule());
        assert!(cert.pass, "failures: {:?}", cert.failures);
        assert_eq!(cert.weight_bound, 12.0);
        assert!(cert.design_reports.values().all(|r| r.sym_pd && r.residual_ok));

        let g = g1();
        let d = design_for(&g, DeltaChoice::Margin(0.1));
        let fixed = TopologySchedule::fixed("g1", g, "d1", d).unwrap();
        let cert = certify_schedule(&fixed);
        assert!(cert.pass);
        assert_eq!(cert.design_reports["d1"].hurwitz, Some(true));
    }
}
