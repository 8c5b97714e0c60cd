//! TOML input files (graphs, designs, schedules, gain tables), CSV output,
//! and run manifests.
//!
//! Floats are written with shortest round-trip formatting, so a file written
//! by the tool and read back reproduces every value bit-for-bit. Designs are
//! stored as their defining parameters (graph, theta, delta, decomposition)
//! and re-synthesized on load, which re-checks every invariant instead of
//! trusting stored matrices.

use crate::ensemble::EnsembleStats;
use crate::gain::GainSpec;
use crate::graph::MatrixGraph;
use crate::linalg::Mat;
use crate::schedule::{Segment, TopologySchedule};
use crate::sim::Trajectory;
use crate::structure::{find_decomposition, Decomposition};
use crate::synthesis::{synthesize, DeltaChoice, ProtocolDesign};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Exhaustive decomposition search cap used when loading design parameters.
pub const MAX_DECOMPOSITION_AGENTS: usize = 16;

#[derive(Debug, Error)]
#[error("{path}: {message}")]
pub struct FileError {
    pub path: String,
    pub message: String,
}

impl FileError {
    fn new(path: impl std::fmt::Display, message: impl std::fmt::Display) -> Self {
        FileError { path: path.to_string(), message: message.to_string() }
    }
}

fn read(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|e| FileError::new(path.display(), e))
}

fn write_file(path: &Path, text: &str) -> Result<(), FileError> {
    std::fs::write(path, text).map_err(|e| FileError::new(path.display(), e))
}

/// Resolve `rel` against the directory containing `base`.
fn sibling(base: &Path, rel: &str) -> std::path::PathBuf {
    base.parent().unwrap_or_else(|| Path::new("")).join(rel)
}

// ---------------------------------------------------------------- graphs

#[derive(Serialize, Deserialize)]
struct GraphDto {
    n_agents: usize,
    dim: usize,
    #[serde(default)]
    edges: Vec<EdgeDto>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDto {
    to: usize,
    from: usize,
    matrix: Vec<Vec<f64>>,
}

pub fn parse_graph(text: &str, label: &str) -> Result<MatrixGraph, FileError> {
    let dto: GraphDto = toml::from_str(text).map_err(|e| FileError::new(label, e))?;
    let mut edges = Vec::with_capacity(dto.edges.len());
    for e in &dto.edges {
        let m = Mat::from_rows(&e.matrix).map_err(|err| {
            FileError::new(label, format!("edge ({}, {}): {err}", e.to, e.from))
        })?;
        edges.push((e.to, e.from, m));
    }
    MatrixGraph::new(dto.n_agents, dto.dim, edges).map_err(|e| FileError::new(label, e))
}

pub fn load_graph(path: &Path) -> Result<MatrixGraph, FileError> {
    parse_graph(&read(path)?, &path.display().to_string())
}

pub fn graph_to_toml(g: &MatrixGraph) -> String {
    let dto = GraphDto {
        n_agents: g.n_agents(),
        dim: g.dim(),
        edges: g
            .edges()
            .map(|(to, from, w)| EdgeDto {
                to,
                from,
                matrix: (0..w.dim()).map(|i| w.raw().row(i).to_vec()).collect(),
            })
            .collect(),
    };
    toml::to_string(&dto).expect("graph serialization cannot fail")
}

pub fn save_graph(path: &Path, g: &MatrixGraph) -> Result<(), FileError> {
    write_file(path, &graph_to_toml(g))
}

// ---------------------------------------------------------------- designs

#[derive(Serialize, Deserialize)]
struct DesignDto {
    /// Graph file, relative to the design file.
    graph: String,
    theta: Vec<f64>,
    delta: f64,
    v1: Vec<usize>,
    v2: Vec<usize>,
    // Informational echoes; recomputed on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    informed: Vec<usize>,
}

pub fn save_design(path: &Path, design: &ProtocolDesign, graph_ref: &str) -> Result<(), FileError> {
    let dto = DesignDto {
        graph: graph_ref.to_string(),
        theta: design.theta.clone(),
        delta: design.delta,
        v1: design.decomposition.v1().iter().copied().collect(),
        v2: design.decomposition.v2().iter().copied().collect(),
        c_bound: design.c_bound,
        k1: Some(design.k1),
        x0: design.x0.clone(),
        informed: design.informed_set.iter().copied().collect(),
    };
    let text = toml::to_string(&dto).map_err(|e| FileError::new(path.display(), e))?;
    write_file(path, &text)
}

/// Load a design file and re-synthesize the design it describes, together
/// with its graph. Every structural and spectral invariant is re-checked.
pub fn load_design(path: &Path) -> Result<(MatrixGraph, ProtocolDesign), FileError> {
    let label = path.display().to_string();
    let dto: DesignDto = toml::from_str(&read(path)?).map_err(|e| FileError::new(&label, e))?;
    let g = load_graph(&sibling(path, &dto.graph))?;
    let dec = Decomposition::new(g.n_agents(), dto.v1, dto.v2)
        .map_err(|e| FileError::new(&label, e))?;
    let design = synthesize(&g, &dec, &dto.theta, DeltaChoice::Explicit(dto.delta))
        .map_err(|e| FileError::new(&label, e))?;
    Ok((g, design))
}

// -------------------------------------------------------------- schedules

#[derive(Serialize, Deserialize)]
struct ScheduleDto {
    /// "fixed", "cyclic", or "explicit".
    mode: String,
    /// Graph id -> file path relative to the schedule file.
    graphs: BTreeMap<String, String>,
    /// Design id -> synthesis parameters.
    designs: BTreeMap<String, DesignParamsDto>,
    segments: Vec<SegmentDto>,
}

#[derive(Serialize, Deserialize)]
struct DesignParamsDto {
    graph: String,
    theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    margin: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct SegmentDto {
    graph: String,
    design: String,
    #[serde(default)]
    duration: Option<f64>,
}

pub fn load_schedule(path: &Path) -> Result<TopologySchedule, FileError> {
    let label = path.display().to_string();
    let dto: ScheduleDto = toml::from_str(&read(path)?).map_err(|e| FileError::new(&label, e))?;

    let mut graphs = BTreeMap::new();
    for (id, rel) in &dto.graphs {
        graphs.insert(id.clone(), load_graph(&sibling(path, rel))?);
    }

    let mut designs = BTreeMap::new();
    for (id, p) in &dto.designs {
        let g = graphs.get(&p.graph).ok_or_else(|| {
            FileError::new(&label, format!("design `{id}` references unknown graph `{}`", p.graph))
        })?;
        let choice = match (p.delta, p.margin) {
            (Some(d), None) => DeltaChoice::Explicit(d),
            (None, Some(m)) => DeltaChoice::Margin(m),
            _ => {
                return Err(FileError::new(
                    &label,
                    format!("design `{id}` must give exactly one of `delta` or `margin`"),
                ))
            }
        };
        let dec = find_decomposition(g, MAX_DECOMPOSITION_AGENTS)
            .map_err(|e| FileError::new(&label, format!("design `{id}`: {e}")))?;
        let design = synthesize(g, &dec, &p.theta, choice)
            .map_err(|e| FileError::new(&label, format!("design `{id}`: {e}")))?;
        designs.insert(id.clone(), design);
    }

    let segments: Vec<Segment> = dto
        .segments
        .iter()
        .map(|s| Segment::new(&s.graph, &s.design, s.duration.unwrap_or(1.0)))
        .collect();

    let built = match dto.mode.as_str() {
        "fixed" => {
            if segments.len() != 1 {
                return Err(FileError::new(&label, "fixed mode takes exactly one segment"));
            }
            let s = &segments[0];
            let g = graphs.remove(&s.graph).ok_or_else(|| {
                FileError::new(&label, format!("segment references unknown graph `{}`", s.graph))
            })?;
            let d = designs.remove(&s.design).ok_or_else(|| {
                FileError::new(&label, format!("segment references unknown design `{}`", s.design))
            })?;
            TopologySchedule::fixed(&s.graph, g, &s.design, d)
        }
        "cyclic" => TopologySchedule::cyclic(segments, graphs, designs),
        "explicit" => TopologySchedule::explicit(segments, graphs, designs),
        other => {
            return Err(FileError::new(
                &label,
                format!("mode must be fixed, cyclic, or explicit (got `{other}`)"),
            ))
        }
    };
    built.map_err(|e| FileError::new(&label, e))
}

// -------------------------------------------------------------- gain table

#[derive(Serialize, Deserialize)]
struct GainTableDto {
    points: Vec<(f64, f64)>,
}

pub fn load_gain_table(path: &Path) -> Result<GainSpec, FileError> {
    let label = path.display().to_string();
    let dto: GainTableDto = toml::from_str(&read(path)?).map_err(|e| FileError::new(&label, e))?;
    GainSpec::table(dto.points).map_err(|e| FileError::new(&label, e))
}

// ---------------------------------------------------------------- manifest

/// Record of one CLI invocation, written next to its outputs so any artifact
/// can be traced back to exact inputs and seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub options: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest {
            command: command.into(),
            inputs: Vec::new(),
            options: BTreeMap::new(),
            outputs: Vec::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), FileError> {
        let text =
            toml::to_string(self).map_err(|e| FileError::new(path.display(), e))?;
        write_file(path, &text)
    }

    pub fn load(path: &Path) -> Result<Self, FileError> {
        toml::from_str(&read(path)?).map_err(|e| FileError::new(path.display(), e))
    }
}

// -------------------------------------------------------------------- CSV

/// Long form: one row per (time, agent, coordinate).
pub fn write_trajectory_long<W: Write>(traj: &Trajectory, w: &mut W) -> std::io::Result<()> {
    let d = traj.theta.len();
    let n = traj.states.cols() / d;
    writeln!(w, "t,agent,dim,value")?;
    for (k, t) in traj.times.iter().enumerate() {
        let row = traj.states.row(k);
        for i in 0..n {
            for s in 0..d {
                writeln!(w, "{t},{},{},{}", i + 1, s + 1, row[i * d + s])?;
            }
        }
    }
    Ok(())
}

/// Wide form: one row per time, columns x_<agent>_<dim>.
pub fn write_trajectory_wide<W: Write>(traj: &Trajectory, w: &mut W) -> std::io::Result<()> {
    let d = traj.theta.len();
    let n = traj.states.cols() / d;
    write!(w, "t")?;
    for i in 1..=n {
        for s in 1..=d {
            write!(w, ",x_{i}_{s}")?;
        }
    }
    writeln!(w)?;
    for (k, t) in traj.times.iter().enumerate() {
        write!(w, "{t}")?;
        for v in traj.states.row(k) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Ensemble statistics: one row per (time, agent).
pub fn write_stats_csv<W: Write>(stats: &EnsembleStats, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "t,agent,ms_error,stderr")?;
    for (k, t) in stats.times.iter().enumerate() {
        for a in 0..stats.ms_error.cols() {
            writeln!(w, "{t},{},{},{}", a + 1, stats.ms_error[(k, a)], stats.stderr[(k, a)])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{g1, theta};

    fn asset(name: &str) -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join(name)
    }

    #[test]
    fn bundled_first_network_matches_reference() {
        let g = load_graph(&asset("g1.toml")).unwrap();
        assert_eq!(g, g1());
    }

    #[test]
    fn graph_round_trips_exactly() {
        let g = g1();
        let text = graph_to_toml(&g);
        assert_eq!(parse_graph(&text, "round-trip").unwrap(), g);
    }

    #[test]
    fn design_round_trips_through_file() {
        let dir = std::env::temp_dir().join(format!("ntcon-design-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = g1();
        save_graph(&dir.join("g.toml"), &g).unwrap();
        let dec = find_decomposition(&g, 16).unwrap();
        let design = synthesize(&g, &dec, &theta(), DeltaChoice::Margin(0.1)).unwrap();
        save_design(&dir.join("d.toml"), &design, "g.toml").unwrap();
        let (g2, loaded) = load_design(&dir.join("d.toml")).unwrap();
        assert_eq!(g2, g);
        assert_eq!(loaded, design);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn bundled_schedules_load_and_certify() {
        let fixed = load_schedule(&asset("schedule_fixed_51.toml")).unwrap();
        assert_eq!(fixed.shape(), (7, 3));
        assert_eq!(fixed.theta(), &[1.0, 2.0, -1.0]);
        let cert = crate::schedule::certify_schedule(&fixed);
        assert!(cert.pass, "{:?}", cert.failures);

        let switching = load_schedule(&asset("schedule_switching_52.toml")).unwrap();
        assert_eq!(switching.segments().len(), 3);
        assert!((switching.period() - 0.1).abs() < 1e-15);
        let cert = crate::schedule::certify_schedule(&switching);
        assert!(cert.pass, "{:?}", cert.failures);
        // The pattern starts in the second network and returns to it each
        // period.
        let (_, d) = switching.at_time(0.0);
        assert!((d.delta - 7.0495).abs() < 1e-12);
        let (_, d) = switching.at_time(0.15);
        assert!((d.delta - 7.2440).abs() < 1e-12);
    }

    #[test]
    fn parse_errors_carry_context() {
        let err = parse_graph("n_agents = 2\n", "bad.toml").unwrap_err();
        assert_eq!(err.path, "bad.toml");
        let err = parse_graph(
            "n_agents = 2\ndim = 1\n[[edges]]\nto = 1\nfrom = 5\nmatrix = [[1.0]]\n",
            "oob.toml",
        )
        .unwrap_err();
        assert!(err.message.contains('5'), "{}", err.message);
    }

    #[test]
    fn csv_writers_emit_expected_shapes() {
        let traj = Trajectory {
            times: vec![0.0, 0.5],
            states: Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.25]]).unwrap(),
            theta: vec![1.0],
        };
        let mut buf = Vec::new();
        write_trajectory_long(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().nth(1).unwrap(), "0,1,1,1");
        assert_eq!(text.lines().last().unwrap(), "0.5,2,1,0.25");

        let mut buf = Vec::new();
        write_trajectory_wide(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x_1_1,x_2_1");
        assert_eq!(text.lines().nth(2).unwrap(), "0.5,3,0.25");
    }

    #[test]
    fn manifest_round_trips() {
        let dir = std::env::temp_dir().join(format!("ntcon-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = RunManifest::new("simulate");
        m.inputs.push("schedule.toml".into());
        m.options.insert("dt".into(), "0.001".into());
        m.outputs.push("traj.csv".into());
        m.seed = Some(42);
        let p = dir.join("manifest.toml");
        m.save(&p).unwrap();
        let back = RunManifest::load(&p).unwrap();
        assert_eq!(back.command, "simulate");
        assert_eq!(back.seed, Some(42));
        assert_eq!(back.options["dt"], "0.001");
        std::fs::remove_dir_all(&dir).ok();
    }
}
