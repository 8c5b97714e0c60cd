//! Shared fixtures for unit tests: the three bundled 7-agent example
//! topologies (the same data as the asset files) built programmatically,
//! plus ready-made designs and schedules over them.

use std::collections::BTreeMap;

use crate::graph::MatrixGraph;
use crate::linalg::Mat;
use crate::schedule::{Segment, TopologySchedule};
use crate::structure::find_decomposition;
use crate::synthesis::{synthesize, DeltaChoice, ProtocolDesign};

pub fn m3(rows: [[f64; 3]; 3]) -> Mat {
    Mat::from_rows(&rows.map(|r| r.to_vec())).unwrap()
}

pub fn theta() -> Vec<f64> {
    vec![1.0, 2.0, -1.0]
}

pub fn g1() -> MatrixGraph {
    let a12 = m3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
    MatrixGraph::new(
        7,
        3,
        vec![
            (1, 2, a12.clone()),
            (2, 1, m3([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]])),
            (6, 5, m3([[7.0, 1.0, 1.0], [1.0, 6.0, 0.0], [1.0, 0.0, 5.0]])),
            (5, 2, m3([[10.0, 1.0, 2.0], [1.0, 8.0, 1.0], [2.0, 1.0, 12.0]])),
            (7, 6, m3([[3.1, 0.0, 0.0], [0.0, 3.1, 0.0], [0.0, 0.0, 3.2]])),
            (2, 6, m3([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -1.0]])),
            (3, 6, a12.scale(-0.1)),
            (4, 3, a12),
        ],
    )
    .unwrap()
}

pub fn g2() -> MatrixGraph {
    let a65 = m3([[6.0, 1.0, -1.0], [1.0, 8.0, 2.0], [-1.0, 2.0, 6.0]]);
    let a47 = m3([[0.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]]);
    let half_neg = Mat::identity(3).scale(-0.5);
    MatrixGraph::new(
        7,
        3,
        vec![
            (1, 2, m3([[-5.0, -2.0, -1.0], [-2.0, -4.0, -1.0], [-1.0, -1.0, -3.0]])),
            (4, 7, a47.clone()),
            (6, 5, a65.clone()),
            (6, 7, m3([[4.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]])),
            (7, 6, m3([[5.0, 1.0, 0.0], [1.0, 6.0, -1.0], [0.0, -1.0, 5.0]])),
            (4, 3, m3([[-2.0, 0.0, -1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, -3.0]])),
            (5, 1, a65),
            (2, 6, half_neg.clone()),
            (3, 6, half_neg),
            (6, 2, a47),
        ],
    )
    .unwrap()
}

pub fn g3() -> MatrixGraph {
    let neg_eye = Mat::identity(3).scale(-1.0);
    MatrixGraph::new(
        7,
        3,
        vec![
            (3, 4, m3([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]])),
            (3, 7, m3([[-2.0, 1.0, 0.0], [1.0, -2.0, 0.0], [0.0, 0.0, -1.0]])),
            (4, 3, m3([[2.0, -1.0, 0.0], [-1.0, 3.0, 1.0], [0.0, 1.0, 4.0]])),
            (7, 5, m3([[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 1.0]])),
            (5, 2, m3([[8.0, 2.0, 1.0], [2.0, 8.0, 1.0], [1.0, 1.0, 6.0]])),
            (2, 1, m3([[-3.0, -1.0, 1.0], [-1.0, -5.0, -2.0], [1.0, -2.0, -5.0]])),
            (6, 3, neg_eye.clone()),
            (1, 5, neg_eye),
        ],
    )
    .unwrap()
}

pub fn design_for(g: &MatrixGraph, delta: DeltaChoice) -> ProtocolDesign {
    let dec = find_decomposition(g, 16).unwrap();
    synthesize(g, &dec, &theta(), delta).unwrap()
}

pub fn fixed_g1_schedule() -> TopologySchedule {
    let g = g1();
    let d = design_for(&g, DeltaChoice::Margin(0.1));
    TopologySchedule::fixed("g1", g, "d1", d).unwrap()
}

/// The bundled switching pattern: g2 on [0, 0.04), g1 on [0.04, 0.06),
/// g3 on [0.06, 0.10), then repeat.
pub fn switching_schedule() -> TopologySchedule {
    let (g1, g2, g3) = (g1(), g2(), g3());
    let designs = BTreeMap::from([
        ("d1".to_string(), design_for(&g1, DeltaChoice::Explicit(7.2440))),
        ("d2".to_string(), design_for(&g2, DeltaChoice::Explicit(7.0495))),
        ("d3".to_string(), design_for(&g3, DeltaChoice::Explicit(3.1))),
    ]);
    let graphs = BTreeMap::from([
        ("g1".to_string(), g1),
        ("g2".to_string(), g2),
        ("g3".to_string(), g3),
    ]);
    TopologySchedule::cyclic(
        vec![
            Segment::new("g2", "d2", 0.04),
            Segment::new("g1", "d1", 0.02),
            Segment::new("g3", "d3", 0.04),
        ],
        graphs,
        designs,
    )
    .unwrap()
}
