//! Command-line front end. Flags override the config file, which overrides
//! built-in defaults. Exit codes: 0 success, 1 usage, parse or I/O error,
//! 2 infeasible problem or mismatched geometry.

pub mod config;
pub mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::gridmap::{diff_to_design, load_heightmap, GridError, HeightMap, MapFormat, SiteMetrics};
use crate::nodes::{assign_headings, decimate_sources, extract_nodes, NodeSet};
use crate::sim::{make_crater_site, run_episode, EpisodeReport, SimError};
use crate::transport::{solve_transport, PlanRecord, SolverChoice, TransportError, TransportOptions};
use crate::triplets::{build_triplets, order_radially, TripletRecord};

pub use config::{Config, PlanConfig, SiteConfig};
use render::ImageFormat;

#[derive(Debug, Parser)]
#[command(name = "regrade", version, about = "Earthmoving transport planner and grading simulator")]
pub struct Cli {
    /// JSON config file (default: $REGRADE_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a transport plan from a live map and design, or from node JSON.
    Plan(PlanArgs),
    /// Run a closed-loop grading episode on a synthetic site.
    Simulate(SimulateArgs),
    /// Grade, smoothness and out-of-spec area of a height map.
    Metrics(MetricsArgs),
    /// Draw a height map (PPM or SVG) with an optional plan overlay.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    Auto,
    Dense,
    Network,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => SolverChoice::Auto,
            SolverArg::Dense => SolverChoice::Dense,
            SolverArg::Network => SolverChoice::Network,
        }
    }
}

/// Map reading flags shared by subcommands.
#[derive(Debug, Args)]
pub struct MapArgs {
    /// Cell size in meters (required for PGM, overrides the CSV header).
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Meters per map unit.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["live", "nodes"]))]
pub struct PlanArgs {
    /// Live height map (.csv or .pgm).
    #[arg(long)]
    pub live: Option<PathBuf>,
    /// Node set JSON instead of a map pair.
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Design map path, or `flat:<height>`.
    #[arg(long, default_value = "flat:0")]
    pub design: String,
    /// Minimum |height difference| for a cell to become a node.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Merge radius for nearby sources; 0 keeps every source.
    #[arg(long)]
    pub decimate: Option<f64>,
    /// Degrees.
    #[arg(long)]
    pub heading_threshold: Option<f64>,
    /// Approach pose distance behind each source, along the push direction.
    #[arg(long)]
    pub offset: Option<f64>,
    /// Coarsen the difference map by this many cells per side.
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    #[command(flatten)]
    pub map: MapArgs,
    /// Plan JSON destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `crater` (configured site), `flat`, or a site JSON file.
    #[arg(long, default_value = "crater")]
    pub site: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Independent episodes with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub episodes: u64,
    /// Maximum triplets executed per episode.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Directory for per-round truth map snapshots.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    /// Report JSON destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Degrees.
    #[arg(long)]
    pub grade_spec: Option<f64>,
    /// Meters.
    #[arg(long)]
    pub smooth_spec: Option<f64>,
    /// Odd window side in cells.
    #[arg(long)]
    pub window: Option<usize>,
    #[command(flatten)]
    pub io: MapArgs,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Plan JSON written by `plan`.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Output image, .ppm or .svg.
    #[arg(long)]
    pub out: PathBuf,
    /// Pixels per cell side.
    #[arg(long, default_value_t = 4)]
    pub pixels: usize,
    #[command(flatten)]
    pub io: MapArgs,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input.
    Usage(String),
    /// Infeasible problem or inconsistent geometry.
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Infeasible(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Infeasible(m) => f.write_str(m),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> Self {
        CliError::Infeasible(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Grid(g) => CliError::Usage(g.to_string()),
            other => CliError::Infeasible(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io_err(p, e)),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

fn read_map(path: &Path, io: &MapArgs, defaults: &PlanConfig) -> Result<HeightMap, CliError> {
    let format = MapFormat::from_path(path)
        .ok_or_else(|| CliError::Usage(format!("{}: expected a .csv or .pgm map", path.display())))?;
    let scale = io.scale.unwrap_or(defaults.scale);
    let resolution = io.resolution.or(defaults.resolution);
    load_heightmap(path, format, scale, resolution).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_design(spec: &str, live: &HeightMap, io: &MapArgs, defaults: &PlanConfig) -> Result<HeightMap, CliError> {
    if let Some(h) = spec.strip_prefix("flat:") {
        let h: f64 = h
            .parse()
            .map_err(|_| CliError::Usage(format!("bad design height in '{spec}'")))?;
        return Ok(HeightMap::flat(live.width(), live.height(), live.resolution(), live.origin(), h)?);
    }
    read_map(Path::new(spec), io, defaults)
}

#[derive(Serialize)]
pub struct PlanOutput {
    #[serde(flatten)]
    pub plan: PlanRecord,
    pub sources: usize,
    pub sinks: usize,
    pub triplets: Vec<TripletRecord>,
}

fn cmd_plan(args: &PlanArgs, config: &Config) -> Result<(), CliError> {
    let c = PlanConfig {
        threshold: args.threshold.unwrap_or(config.plan.threshold),
        decimate: args.decimate.unwrap_or(config.plan.decimate),
        heading_threshold_deg: args.heading_threshold.unwrap_or(config.plan.heading_threshold_deg),
        offset: args.offset.unwrap_or(config.plan.offset),
        block: args.block.unwrap_or(config.plan.block),
        solver: args.solver.map(SolverChoice::from).unwrap_or(config.plan.solver),
        ..config.plan.clone()
    };
    if !(c.threshold >= 0.0) || !(c.decimate >= 0.0) || !(c.offset > 0.0) || c.block == 0 {
        return Err(CliError::Usage(format!("invalid plan settings {c:?}")));
    }
    let nodes = match (&args.live, &args.nodes) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            NodeSet::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        (Some(path), None) => {
            let live = read_map(path, &args.map, &c)?;
            let design = read_design(&args.design, &live, &args.map, &c)?;
            if !live.same_geometry(&design) {
                return Err(CliError::Infeasible("live and design maps differ in geometry".into()));
            }
            let mut diff = diff_to_design(&live, &design).map_err(|e| CliError::Infeasible(e.to_string()))?;
            if c.block > 1 {
                diff = diff.coarsen(c.block);
            }
            let mut nodes = extract_nodes(&diff, c.threshold);
            assign_headings(&mut nodes, &diff);
            if c.decimate > 0.0 {
                nodes = decimate_sources(&nodes, c.decimate, c.heading_threshold_deg.to_radians());
            }
            nodes
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let options = TransportOptions {
        solver: c.solver,
        ..TransportOptions::default()
    };
    let start = Instant::now();
    let plan = solve_transport(&nodes, &options)?;
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;
    let center = nodes.sink_centroid().unwrap_or((0.0, 0.0));
    let triplets = order_radially(&build_triplets(&plan, c.offset), center);
    let output = PlanOutput {
        plan: PlanRecord::from(&plan),
        sources: nodes.sources.len(),
        sinks: nodes.sinks.len(),
        triplets: triplets.iter().map(TripletRecord::from).collect(),
    };
    let mut json = serde_json::to_string_pretty(&output).expect("plan output serializes");
    json.push('\n');
    write_output(args.out.as_deref(), json.as_bytes())?;
    let summary = format!(
        "case: {}\nobjective: {:.7}\nsources: {}\nsinks: {}\nmoves: {}\nsolve_ms: {solve_ms:.3}",
        serde_json::to_value(plan.case.kind).expect("case serializes").as_str().unwrap_or("?"),
        plan.objective,
        output.sources,
        output.sinks,
        plan.moves.len()
    );
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn site_config(spec: &str, config: &Config) -> Result<SiteConfig, CliError> {
    match spec {
        "crater" => Ok(config.site.clone()),
        "flat" => Ok(SiteConfig {
            craters: Vec::new(),
            ..config.site.clone()
        }),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(Path::new(path), e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{path}: {e}")))
        }
    }
}

fn metrics_table(r: &EpisodeReport) -> String {
    let row = |name: &str, f: fn(&SiteMetrics) -> f64| format!("{name:<20}{:>12.4}{:>12.4}\n", f(&r.before), f(&r.after));
    let mut s = format!("seed {}\n{:<20}{:>12}{:>12}\n", r.seed, "metric", "before", "after");
    s += &row("grade (deg)", |m| m.grade);
    s += &row("smoothness (m)", |m| m.smoothness);
    s += &row("area out-of-spec (m2)", |m| m.area_oos);
    s += &format!(
        "area out-of-spec reduction {:.1} %, {} triplets, {} skipped\n",
        100.0 * r.area_oos_reduction,
        r.triplets_executed,
        r.triplets_skipped
    );
    s
}

fn cmd_simulate(args: &SimulateArgs, config: &Config) -> Result<(), CliError> {
    if args.episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let site = site_config(&args.site, config)?;
    let mut sim = config.sim.clone();
    if let Some(b) = args.budget {
        sim.triplet_budget = b;
    }
    if let Some(dir) = &args.snapshots {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        sim.snapshot_dir = Some(dir.clone());
    }
    let run = |seed: u64| -> Result<EpisodeReport, CliError> {
        let mut sim = sim.clone();
        if args.episodes > 1 {
            sim.snapshot_dir = sim.snapshot_dir.map(|d| d.join(format!("seed_{seed}")));
            if let Some(d) = &sim.snapshot_dir {
                std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
            }
        }
        let w = make_crater_site(site.width, site.height, site.resolution, &site.craters, seed, &sim)?;
        Ok(run_episode(w, &sim, &config.metrics)?.0)
    };
    let reports: Vec<EpisodeReport> = if args.episodes == 1 {
        vec![run(args.seed)?]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..args.episodes)
                .map(|k| {
                    let run = &run;
                    scope.spawn(move || run(args.seed + k))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("episode thread panicked"))
                .collect::<Result<Vec<_>, _>>()
        })?
    };
    for r in &reports {
        print!("{}", metrics_table(r));
    }
    let mut json = if reports.len() == 1 {
        reports[0].to_json()
    } else {
        serde_json::to_string_pretty(&reports).expect("reports serialize")
    };
    json.push('\n');
    match &args.out {
        Some(p) => write_output(Some(p), json.as_bytes()),
        None => Ok(()),
    }
}

fn cmd_metrics(args: &MetricsArgs, config: &Config) -> Result<(), CliError> {
    let spec = crate::gridmap::MetricSpec {
        grade_deg: args.grade_spec.unwrap_or(config.metrics.grade_deg),
        smooth_m: args.smooth_spec.unwrap_or(config.metrics.smooth_m),
        window: args.window.unwrap_or(config.metrics.window),
    };
    let map = read_map(&args.map, &args.io, &config.plan)?;
    let metrics = spec.evaluate(&map)?;
    println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
    Ok(())
}

fn cmd_render(args: &RenderArgs, config: &Config) -> Result<(), CliError> {
    let format = ImageFormat::from_path(&args.out)
        .ok_or_else(|| CliError::Usage(format!("{}: output must end in .ppm or .svg", args.out.display())))?;
    let map = read_map(&args.map, &args.io, &config.plan)?;
    let moves = match &args.plan {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let plan: PlanRecord =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            plan.moves
        }
        None => Vec::new(),
    };
    let legend = match format {
        ImageFormat::Ppm => {
            if !moves.is_empty() {
                log::warn!("PPM output ignores the plan overlay; use .svg");
            }
            let (bytes, legend) = render::render_ppm(&map, args.pixels);
            write_output(Some(&args.out), &bytes)?;
            legend
        }
        ImageFormat::Svg => {
            let (svg, legend) = render::render_svg(&map, &moves, args.pixels);
            write_output(Some(&args.out), svg.as_bytes())?;
            legend
        }
    };
    println!("{legend}");
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = Config::resolve(cli.config.as_deref()).map_err(CliError::Usage)?;
    match &cli.command {
        Command::Plan(a) => cmd_plan(a, &config),
        Command::Simulate(a) => cmd_simulate(a, &config),
        Command::Metrics(a) => cmd_metrics(a, &config),
        Command::Render(a) => cmd_render(a, &config),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
