//! `ntcon` — design, certify, and simulate non-trivial consensus protocols
//! on directed signed matrix-weighted networks.
//!
//! Exit codes: 0 success, 1 domain failure (inadmissible graph, failed
//! certificate, unmet expectation, numerical blow-up), 2 usage or parse
//! error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use ntcon_core::ensemble::{convergence_report, run_ensemble, ConvergenceReport, Verdict};
use ntcon_core::fileio::{
    load_design, load_gain_table, load_graph, load_schedule, save_design, write_stats_csv,
    write_trajectory_long, write_trajectory_wide, FileError, RunManifest,
    MAX_DECOMPOSITION_AGENTS,
};
use ntcon_core::gain::{validate_gain, ConditionReport, ConsensusTarget, GainSpec};
use ntcon_core::graph::validate_graph;
use ntcon_core::rng::PathRng;
use ntcon_core::schedule::certify_schedule;
use ntcon_core::sim::{simulate_path_indexed, SimConfig, SimError};
use ntcon_core::structure::{find_decomposition, NoiseIntensity};
use ntcon_core::synthesis::{
    certify_design, synthesize, CertMode, CertificationReport, DeltaChoice, ProtocolDesign,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ntcon",
    version,
    about = "Non-trivial consensus on signed matrix-weighted networks: \
             protocol design, certification, and Monte-Carlo simulation"
)]
struct Cli {
    /// Worker threads for path parallelism (default: $NTCON_THREADS, else all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a graph file for admissibility (symmetric sign-definite weights)
    Validate { graph: PathBuf },
    /// Find a vertex decomposition V1/V2 satisfying the structural hypotheses
    Decompose {
        graph: PathBuf,
        /// Cap on agents for the exhaustive search
        #[arg(long, default_value_t = MAX_DECOMPOSITION_AGENTS)]
        max_agents: usize,
    },
    /// Synthesize protocol constants (C, delta, k1, x0, informed couplings)
    Design {
        graph: PathBuf,
        /// Consensus target theta as comma-separated values, one per state dimension
        #[arg(long, value_delimiter = ',', required = true)]
        theta: Vec<f64>,
        /// Safety margin above the coupling bound C (delta = max(C,0) + margin)
        #[arg(long, conflicts_with = "delta")]
        margin: Option<f64>,
        /// Explicit delta (must exceed C)
        #[arg(long)]
        delta: Option<f64>,
        /// Write the design to this TOML file
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Certify a saved design or a whole schedule
    Certify {
        #[arg(long, conflicts_with = "schedule", required_unless_present = "schedule")]
        design: Option<PathBuf>,
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Check a gain against the consensus-theorem integral conditions
    GainCheck {
        /// power:c0=<v>,alpha=<v> | const:c0=<v> | table:<file.toml>
        #[arg(long)]
        gain: String,
        #[arg(long, value_enum, default_value_t = TargetArg::MeanSquare)]
        target: TargetArg,
    },
    /// Integrate a single noisy path and write it as CSV
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Path index under the master seed
        #[arg(long, default_value_t = 0)]
        path: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Long)]
        format: FormatArg,
        /// Output CSV file (a manifest is written alongside)
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run a Monte-Carlo ensemble and write mean-square error statistics
    Ensemble {
        #[command(flatten)]
        sim: SimArgs,
        /// Number of independent paths
        #[arg(short, long)]
        m: usize,
        /// Record statistics every this many steps
        #[arg(long, default_value_t = 100)]
        subsample: usize,
        /// Window fraction for the convergence verdict
        #[arg(long, default_value_t = 0.1)]
        window: f64,
        /// Fail (exit 1) unless the aggregate verdict matches
        #[arg(long, value_enum)]
        expect: Option<ExpectArg>,
        /// Output directory for stats.csv, report.txt, manifest.toml
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SimArgs {
    /// Schedule file (graphs, designs, segments)
    #[arg(long)]
    schedule: PathBuf,
    /// power:c0=<v>,alpha=<v> | const:c0=<v> | table:<file.toml>
    #[arg(long)]
    gain: String,
    /// Additive noise level sigma
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Multiplicative noise intensity: linear:<kappa>
    #[arg(long, default_value = "linear:0")]
    intensity: String,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Horizon T (must be an integer multiple of dt)
    #[arg(short = 'T', long)]
    horizon: f64,
    /// Master seed; every path and the default initial draw derive from it
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Initial state, comma-separated N*d values (shared by all paths)
    #[arg(long, value_delimiter = ',', conflicts_with = "x0_uniform")]
    x0: Option<Vec<f64>>,
    /// Draw the initial state uniformly from [lo,hi]^(N*d) (default -5,5)
    #[arg(long, value_name = "LO,HI")]
    x0_uniform: Option<String>,
    /// Proceed even if the schedule fails certification
    #[arg(long)]
    allow_uncertified: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    MeanSquare,
    AlmostSure,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// t,agent,dim,value rows
    Long,
    /// one row per time, a column per state coordinate
    Wide,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpectArg {
    Converge,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn domain(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        usage(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NumericalBlowup { .. } => domain(e.to_string()),
            _ => usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let result = match cli.cmd {
        Cmd::Validate { graph } => cmd_validate(&graph),
        Cmd::Decompose { graph, max_agents } => cmd_decompose(&graph, max_agents),
        Cmd::Design { graph, theta, margin, delta, out } => {
            cmd_design(&graph, &theta, margin, delta, out.as_deref())
        }
        Cmd::Certify { design, schedule } => cmd_certify(design.as_deref(), schedule.as_deref()),
        Cmd::GainCheck { gain, target } => cmd_gain_check(&gain, target),
        Cmd::Simulate { sim, path, format, out } => cmd_simulate(&sim, path, format, &out),
        Cmd::Ensemble { sim, m, subsample, window, expect, out } => {
            cmd_ensemble(&sim, m, subsample, window, expect, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("NTCON_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = n.filter(|&n| n > 0) {
        // One-shot process: the global pool cannot have been touched yet.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

// ------------------------------------------------------------- formatting

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

fn fmt_vec4(xs: &[f64]) -> String {
    let body: Vec<String> = xs.iter().map(|x| fmt4(*x)).collect();
    format!("[{}]", body.join(", "))
}

fn fmt_set(xs: impl IntoIterator<Item = usize>) -> String {
    let body: Vec<String> = xs.into_iter().map(|v| v.to_string()).collect();
    if body.is_empty() {
        "{}".to_string()
    } else {
        format!("{{{}}}", body.join(", "))
    }
}

fn print_certification(label: &str, report: &CertificationReport) {
    let verdict = if report.pass { "pass" } else { "FAIL" };
    let detail = match report.mode {
        CertMode::Fixed => match report.hurwitz {
            Some(true) => "-L_B is Hurwitz".to_string(),
            Some(false) => "-L_B is not Hurwitz".to_string(),
            None => "Hurwitz test inconclusive".to_string(),
        },
        CertMode::TimeVarying => {
            if report.sym_pd {
                "L_B + L_B' is positive definite".to_string()
            } else {
                "L_B + L_B' is not positive definite".to_string()
            }
        }
    };
    println!(
        "certificate ({label}): {detail}; stationarity residual {:.3e} ({}) -- {verdict}",
        report.residual,
        if report.residual_ok { "ok" } else { "too large" },
    );
    for note in &report.notes {
        println!("  note: {note}");
    }
}

// --------------------------------------------------------------- commands

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let g = load_graph(path)?;
    let violations = validate_graph(&g);
    if violations.is_empty() {
        println!(
            "ok: {} agents, dimension {}, {} edges, all weights symmetric sign-definite",
            g.n_agents(),
            g.dim(),
            g.n_edges()
        );
        Ok(())
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        Err(domain(format!("{} violation(s) found", violations.len())))
    }
}

fn cmd_decompose(path: &Path, max_agents: usize) -> Result<(), Failure> {
    let g = load_graph(path)?;
    let dec = find_decomposition(&g, max_agents).map_err(|e| usage(e.to_string()))?;
    println!("V1 = {}", fmt_set(dec.v1().iter().copied()));
    println!("V2 = {}", fmt_set(dec.v2().iter().copied()));
    Ok(())
}

fn synthesize_for_cli(
    path: &Path,
    theta: &[f64],
    margin: Option<f64>,
    delta: Option<f64>,
) -> Result<(ntcon_core::graph::MatrixGraph, ProtocolDesign), Failure> {
    let g = load_graph(path)?;
    let choice = match (margin, delta) {
        (None, Some(d)) => DeltaChoice::Explicit(d),
        (m, None) => DeltaChoice::Margin(m.unwrap_or(0.1)),
        _ => unreachable!("clap enforces the conflict"),
    };
    let dec = find_decomposition(&g, MAX_DECOMPOSITION_AGENTS)
        .map_err(|e| usage(e.to_string()))?;
    let design = synthesize(&g, &dec, theta, choice).map_err(|e| domain(e.to_string()))?;
    Ok((g, design))
}

fn print_design(design: &ProtocolDesign) {
    match design.c_bound {
        Some(c) => println!("coupling bound C = {}", fmt4(c)),
        None => println!("coupling bound C = n/a (no antagonistic edges)"),
    }
    println!("delta = {}", fmt4(design.delta));
    println!("k1 = {}", fmt4(design.k1));
    println!("x0 = {}", fmt_vec4(&design.x0));
    println!("informed agents = {}", fmt_set(design.informed_set.iter().copied()));
    println!(
        "decomposition: V1 = {}, V2 = {}",
        fmt_set(design.decomposition.v1().iter().copied()),
        fmt_set(design.decomposition.v2().iter().copied())
    );
    if design.degenerate {
        println!("note: no antagonistic edges; the protocol needs no external signal");
    }
}

fn cmd_design(
    path: &Path,
    theta: &[f64],
    margin: Option<f64>,
    delta: Option<f64>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let (_, design) = synthesize_for_cli(path, theta, margin, delta)?;
    print_design(&design);
    print_certification("fixed topology", &certify_design(&design, CertMode::Fixed));
    print_certification("time-varying", &certify_design(&design, CertMode::TimeVarying));
    if let Some(out) = out {
        let graph_ref = graph_reference(path, out)?;
        save_design(out, &design, &graph_ref)?;
        let mut manifest = RunManifest::new("design");
        manifest.inputs.push(path.display().to_string());
        manifest.options.insert("theta".into(), format!("{theta:?}"));
        match (margin, delta) {
            (None, Some(d)) => manifest.options.insert("delta".into(), d.to_string()),
            (m, None) => manifest.options.insert("margin".into(), m.unwrap_or(0.1).to_string()),
            _ => None,
        };
        manifest.outputs.push(out.display().to_string());
        manifest.save(&manifest_path(out))?;
        println!("design written to {}", out.display());
    }
    Ok(())
}

/// Reference the graph from a design file: keep it relative when both live
/// in the same directory, otherwise make it absolute.
fn graph_reference(graph: &Path, out: &Path) -> Result<String, Failure> {
    if graph.parent() == out.parent() {
        return Ok(graph
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| graph.display().to_string()));
    }
    let abs = std::fs::canonicalize(graph)
        .map_err(|e| usage(format!("{}: {e}", graph.display())))?;
    Ok(abs.display().to_string())
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.toml")
}

fn cmd_certify(design: Option<&Path>, schedule: Option<&Path>) -> Result<(), Failure> {
    if let Some(path) = design {
        let (_, design) = load_design(path)?;
        print_design(&design);
        let fixed = certify_design(&design, CertMode::Fixed);
        print_certification("fixed topology", &fixed);
        print_certification("time-varying", &certify_design(&design, CertMode::TimeVarying));
        return if fixed.pass {
            Ok(())
        } else {
            Err(domain("design failed fixed-topology certification"))
        };
    }
    let path = schedule.expect("clap requires one of --design/--schedule");
    let s = load_schedule(path)?;
    let cert = certify_schedule(&s);
    for (id, report) in &cert.design_reports {
        print_certification(&format!("design {id}"), report);
    }
    for (pair, ok) in &cert.decomposition_ok {
        println!("decomposition {pair}: {}", if *ok { "ok" } else { "FAIL" });
    }
    println!(
        "weight bound over all graphs: {} ({})",
        cert.weight_bound,
        if cert.bounded { "bounded" } else { "unbounded" }
    );
    if cert.pass {
        println!("schedule certification: pass");
        Ok(())
    } else {
        for f in &cert.failures {
            println!("failure: {f}");
        }
        Err(domain("schedule failed certification"))
    }
}

fn parse_kv(body: &str) -> Result<BTreeMap<String, f64>, Failure> {
    let mut out = BTreeMap::new();
    for part in body.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("expected key=value, got `{part}`")))?;
        let v: f64 = v.parse().map_err(|_| usage(format!("`{v}` is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn parse_gain(spec: &str) -> Result<GainSpec, Failure> {
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| usage(format!("gain `{spec}` must look like power:..., const:..., or table:<file>")))?;
    match kind {
        "power" => {
            let kv = parse_kv(body)?;
            let c0 = *kv.get("c0").ok_or_else(|| usage("power gain needs c0="))?;
            let alpha = *kv.get("alpha").ok_or_else(|| usage("power gain needs alpha="))?;
            GainSpec::power(c0, alpha).map_err(|e| usage(e.to_string()))
        }
        "const" | "constant" => {
            let kv = parse_kv(body)?;
            let c0 = *kv.get("c0").ok_or_else(|| usage("constant gain needs c0="))?;
            GainSpec::constant(c0).map_err(|e| usage(e.to_string()))
        }
        "table" => Ok(load_gain_table(Path::new(body))?),
        other => Err(usage(format!("unknown gain family `{other}`"))),
    }
}

fn parse_intensity(spec: &str) -> Result<NoiseIntensity, Failure> {
    let body = spec
        .strip_prefix("linear:")
        .ok_or_else(|| usage(format!("intensity `{spec}` must look like linear:<kappa>")))?;
    let kappa: f64 =
        body.parse().map_err(|_| usage(format!("`{body}` is not a number")))?;
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(usage("intensity kappa must be finite and >= 0"));
    }
    Ok(NoiseIntensity::linear(kappa))
}

fn cmd_gain_check(gain: &str, target: TargetArg) -> Result<(), Failure> {
    let spec = parse_gain(gain)?;
    let target = match target {
        TargetArg::MeanSquare => ConsensusTarget::MeanSquare,
        TargetArg::AlmostSure => ConsensusTarget::AlmostSure,
    };
    let report: ConditionReport = validate_gain(&spec, target);
    println!("gain: {}", spec.description);
    let tick = |b: bool| if b { "yes" } else { "no" };
    println!("divergent integral (int c = inf): {}", tick(report.divergent_integral));
    println!("vanishing (c(t) -> 0): {}", tick(report.vanishing));
    println!("square integrable (int c^2 < inf): {}", tick(report.square_integrable));
    if let Some(note) = report.note {
        println!("note: {note}");
    }
    if report.pass {
        println!("verdict: conditions met");
        Ok(())
    } else {
        println!("verdict: conditions NOT met");
        Err(domain("gain fails the required conditions"))
    }
}

fn build_config(args: &SimArgs) -> Result<SimConfig, Failure> {
    let schedule = load_schedule(&args.schedule)?;
    let cert = certify_schedule(&schedule);
    if !cert.pass {
        if args.allow_uncertified {
            eprintln!("warning: schedule failed certification; continuing as requested");
        } else {
            let mut msg = String::from("schedule failed certification:");
            for f in &cert.failures {
                let _ = write!(msg, "\n  {f}");
            }
            let _ = write!(msg, "\n(use --allow-uncertified to run anyway)");
            return Err(domain(msg));
        }
    }
    let gain = parse_gain(&args.gain)?;
    let intensity = parse_intensity(&args.intensity)?;
    let (n, d) = schedule.shape();
    let initial = match (&args.x0, &args.x0_uniform) {
        (Some(values), _) => values.clone(),
        (None, spec) => {
            let (lo, hi) = match spec {
                None => (-5.0, 5.0),
                Some(s) => {
                    let (lo, hi) = s
                        .split_once(',')
                        .ok_or_else(|| usage("--x0-uniform needs LO,HI".to_string()))?;
                    let lo: f64 =
                        lo.parse().map_err(|_| usage(format!("`{lo}` is not a number")))?;
                    let hi: f64 =
                        hi.parse().map_err(|_| usage(format!("`{hi}` is not a number")))?;
                    if !(lo < hi) {
                        return Err(usage("--x0-uniform needs LO < HI"));
                    }
                    (lo, hi)
                }
            };
            // Reserved path index for the shared initial draw.
            let rng = PathRng::new(args.seed, u64::MAX);
            (0..n * d).map(|c| rng.uniform_in(c, lo, hi)).collect()
        }
    };
    Ok(SimConfig::new(
        schedule,
        gain,
        args.sigma,
        intensity,
        args.dt,
        args.horizon,
        initial,
        args.seed,
    )?)
}

fn base_manifest(command: &str, args: &SimArgs) -> RunManifest {
    let mut m = RunManifest::new(command);
    m.inputs.push(args.schedule.display().to_string());
    m.seed = Some(args.seed);
    m.options.insert("gain".into(), args.gain.clone());
    m.options.insert("sigma".into(), args.sigma.to_string());
    m.options.insert("intensity".into(), args.intensity.clone());
    m.options.insert("dt".into(), args.dt.to_string());
    m.options.insert("horizon".into(), args.horizon.to_string());
    if let Some(x0) = &args.x0 {
        m.options.insert("x0".into(), format!("{x0:?}"));
    } else {
        m.options.insert(
            "x0_uniform".into(),
            args.x0_uniform.clone().unwrap_or_else(|| "-5,5".into()),
        );
    }
    m
}

fn cmd_simulate(args: &SimArgs, path: u64, format: FormatArg, out: &Path) -> Result<(), Failure> {
    let cfg = build_config(args)?;
    let traj = simulate_path_indexed(&cfg, path)?;
    let mut buf = Vec::new();
    match format {
        FormatArg::Long => write_trajectory_long(&traj, &mut buf),
        FormatArg::Wide => write_trajectory_wide(&traj, &mut buf),
    }
    .map_err(|e| usage(format!("{}: {e}", out.display())))?;
    std::fs::write(out, &buf).map_err(|e| usage(format!("{}: {e}", out.display())))?;

    let mut manifest = base_manifest("simulate", args);
    manifest.options.insert("path".into(), path.to_string());
    manifest.options.insert(
        "format".into(),
        match format {
            FormatArg::Long => "long".into(),
            FormatArg::Wide => "wide".into(),
        },
    );
    manifest.outputs.push(out.display().to_string());
    manifest.save(&manifest_path(out))?;
    println!(
        "wrote {} ({} grid points, {} states)",
        out.display(),
        traj.times.len(),
        traj.states.cols()
    );
    Ok(())
}

fn print_report(report: &ConvergenceReport) {
    for a in &report.agents {
        println!(
            "agent {}: initial {:.6e}, mid {:.6e}, final {:.6e}, ratio {:.3e}, trend {}, {}",
            a.agent,
            a.initial,
            a.mid,
            a.last,
            a.ratio,
            if a.trend { "down" } else { "broken" },
            a.verdict
        );
    }
    println!("aggregate verdict: {}", report.aggregate);
}

fn cmd_ensemble(
    args: &SimArgs,
    m: usize,
    subsample: usize,
    window: f64,
    expect: Option<ExpectArg>,
    out_dir: &Path,
) -> Result<(), Failure> {
    let cfg = build_config(args)?;
    let stats = run_ensemble(&cfg, m, subsample)?;
    let report = convergence_report(&stats, window)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| usage(format!("{}: {e}", out_dir.display())))?;
    let stats_path = out_dir.join("stats.csv");
    let mut buf = Vec::new();
    write_stats_csv(&stats, &mut buf)
        .map_err(|e| usage(format!("{}: {e}", stats_path.display())))?;
    std::fs::write(&stats_path, &buf)
        .map_err(|e| usage(format!("{}: {e}", stats_path.display())))?;

    let mut text = String::new();
    for a in &report.agents {
        let _ = writeln!(
            text,
            "agent {}: initial {:.6e}, mid {:.6e}, final {:.6e}, ratio {:.3e}, trend {}, {}",
            a.agent,
            a.initial,
            a.mid,
            a.last,
            a.ratio,
            if a.trend { "down" } else { "broken" },
            a.verdict
        );
    }
    let _ = writeln!(text, "aggregate verdict: {}", report.aggregate);
    let report_path = out_dir.join("report.txt");
    std::fs::write(&report_path, &text)
        .map_err(|e| usage(format!("{}: {e}", report_path.display())))?;

    let mut manifest = base_manifest("ensemble", args);
    manifest.options.insert("m".into(), m.to_string());
    manifest.options.insert("subsample".into(), subsample.to_string());
    manifest.options.insert("window".into(), window.to_string());
    manifest.outputs.push(stats_path.display().to_string());
    manifest.outputs.push(report_path.display().to_string());
    manifest.save(&out_dir.join("manifest.toml"))?;

    print_report(&report);
    println!("wrote {}", stats_path.display());
    match expect {
        Some(ExpectArg::Converge) if report.aggregate != Verdict::Converging => Err(domain(
            format!("expected convergence, got {}", report.aggregate),
        )),
        _ => Ok(()),
    }
}
