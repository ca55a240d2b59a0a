//! Desk-scale grading simulator and behavior executive.
//!
//! The robot pose is the blade center. It explores with the blade raised,
//! then repeatedly plans transport on its belief map and executes each
//! triplet as a transit to the offset waypoint, a straight push with the
//! blade at design height through source to sink, and a reverse back out.

pub mod sensor;
pub mod site;
pub mod terrain;

use std::collections::VecDeque;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{diff_to_design, save_heightmap, GridError, MapFormat, MetricSpec, SiteMetrics};
use crate::kinem::{
    annotate, generate_primitives, plan_path, Direction, PlannerConfig, PrimitiveSet, Trajectory, Waypoint,
    DEFAULT_ARC_LENGTH, DEFAULT_HEADINGS, DEFAULT_MIN_RADIUS, HEURISTIC_SCHEDULE,
};
use crate::nodes::{assign_headings, decimate_sources, extract_nodes};
use crate::transport::{solve_transport, CaseKind, TransportError, TransportOptions};
use crate::triplets::{build_triplets, order_radially, Pose, TransportTriplet};

pub use sensor::{observe, plan_exploration, Footprint, NoiseModel};
pub use site::{crater_heights, Crater, RobotState, Worksite};
pub use terrain::{blade_cut, drag_mat, relax};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("illegal mode transition {from:?} -> {to:?}")]
    Transition { from: Mode, to: Mode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub exploration_spacing: f64,
    pub exploration_margin: f64,
    pub footprint: Footprint,
    pub noise: NoiseModel,
    pub disturbance_variance: f64,
    pub blade_length: f64,
    pub blade_capacity: f64,
    pub raised_clearance: f64,
    pub repose_deg: f64,
    pub relax_sweeps: usize,
    pub drag_mat: bool,
    /// Distance from blade to the front of the mat, m.
    pub mat_offset: f64,
    pub mat_length: f64,
    pub mat_width: f64,
    /// Forward travel between mat smoothing passes, m.
    pub mat_pass_spacing: f64,
    /// Re-survey the site with the blade raised after every sweep.
    pub survey_after_sweep: bool,
    pub speed: f64,
    pub dt: f64,
    /// Fine cells per side of a planning cell.
    pub planning_block: usize,
    pub height_threshold: f64,
    pub decimate_distance: f64,
    pub heading_threshold_deg: f64,
    pub offset_distance: f64,
    pub triplet_budget: usize,
    pub w_topo: f64,
    pub max_expansions: usize,
    /// Write the truth map after every planning round here.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            exploration_spacing: 1.0,
            exploration_margin: 0.25,
            footprint: Footprint::default(),
            noise: NoiseModel::default(),
            disturbance_variance: 0.01,
            blade_length: 0.25,
            blade_capacity: 0.25 * 0.05 * 0.8,
            raised_clearance: 0.05,
            repose_deg: 31.0,
            relax_sweeps: 50,
            drag_mat: true,
            mat_offset: 0.7,
            mat_length: 0.3,
            mat_width: 0.5,
            mat_pass_spacing: 0.05,
            survey_after_sweep: true,
            speed: 0.25,
            dt: 0.2,
            planning_block: 5,
            height_threshold: 0.01,
            decimate_distance: 0.5,
            heading_threshold_deg: 15.0,
            offset_distance: 0.6,
            triplet_budget: 40,
            w_topo: 10.0,
            max_expansions: 60_000,
            snapshot_dir: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("exploration_spacing", self.exploration_spacing),
            ("blade_length", self.blade_length),
            ("blade_capacity", self.blade_capacity),
            ("raised_clearance", self.raised_clearance),
            ("speed", self.speed),
            ("mat_pass_spacing", self.mat_pass_spacing),
            ("dt", self.dt),
            ("offset_distance", self.offset_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SimError::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.planning_block == 0 {
            return Err(SimError::Argument("planning_block must be positive".into()));
        }
        if !(self.height_threshold >= 0.0) || !(self.decimate_distance >= 0.0) {
            return Err(SimError::Argument("specs and thresholds must be non-negative".into()));
        }
        Ok(())
    }
}

/// A `width × height` m site at `resolution` with the given craters; the
/// robot starts at the first exploration waypoint.
pub fn make_crater_site(
    width: f64,
    height: f64,
    resolution: f64,
    craters: &[Crater],
    seed: u64,
    config: &SimConfig,
) -> Result<Worksite, SimError> {
    let truth = crater_heights(width, height, resolution, craters)?;
    let (x0, y0, _, _) = truth.bounds();
    let start = Pose {
        x: x0 + config.exploration_margin,
        y: y0 + config.exploration_margin,
        heading: 0.0,
    };
    Worksite::new(truth, seed, start, config.blade_capacity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Explore,
    PlanTransport,
    Transport,
    Done,
}

/// Top-level behavior state with its legal transitions.
#[derive(Debug, Clone)]
pub struct ExecState {
    mode: Mode,
    pub pending: VecDeque<TransportTriplet>,
    pub trajectory: Option<Trajectory>,
    history: Vec<Mode>,
}

impl Default for ExecState {
    fn default() -> Self {
        ExecState {
            mode: Mode::Explore,
            pending: VecDeque::new(),
            trajectory: None,
            history: vec![Mode::Explore],
        }
    }
}

impl ExecState {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn history(&self) -> &[Mode] {
        &self.history
    }

    pub fn transition(&mut self, to: Mode) -> Result<(), SimError> {
        use Mode::*;
        let legal = matches!(
            (self.mode, to),
            (Explore, PlanTransport) | (PlanTransport, Transport) | (Transport, PlanTransport) | (Transport, Done)
        );
        if !legal {
            return Err(SimError::Transition { from: self.mode, to });
        }
        self.mode = to;
        self.history.push(to);
        Ok(())
    }
}

/// Position along a densified trajectory.
#[derive(Debug, Clone)]
pub struct MotionCursor {
    points: Vec<Waypoint>,
    next: usize,
}

impl MotionCursor {
    pub fn new(traj: &Trajectory, step: f64) -> Self {
        MotionCursor {
            points: traj.densify(step),
            next: 1,
        }
    }

    pub fn finished(&self) -> bool {
        self.next >= self.points.len()
    }
}

/// Terrain and belief effects of one motion step.
#[derive(Debug, Clone, Default)]
pub struct StepEffects {
    pub touched: Vec<usize>,
    pub distance: f64,
    pub cut: f64,
    pub filled: f64,
}

/// Advances the robot `dt` seconds along the cursor at the waypoints'
/// target velocity.
///
/// An engaged blade (forward, at most half the raised clearance above the
/// design surface) cuts and fills the swept swath; forward motion drags the
/// mat once per mat length travelled. Disturbed belief cells get
/// `disturbance_variance` added.
pub fn step_motion(site: &mut Worksite, cursor: &mut MotionCursor, dt: f64, config: &SimConfig) -> StepEffects {
    let mut effects = StepEffects::default();
    let mut budget = dt;
    while budget > 0.0 && !cursor.finished() {
        let target = cursor.points[cursor.next];
        let pose = site.robot.pose;
        let dist = (target.x - pose.x).hypot(target.y - pose.y);
        let v = target.velocity.max(1e-9);
        let reach = v * budget;
        let (to, heading_done) = if reach >= dist {
            budget -= dist / v;
            cursor.next += 1;
            ((target.x, target.y), true)
        } else {
            let t = reach / dist;
            budget = 0.0;
            ((pose.x + t * (target.x - pose.x), pose.y + t * (target.y - pose.y)), false)
        };
        let moved = (to.0 - pose.x).hypot(to.1 - pose.y);
        let design = site.design.height_at(to.0, to.1).unwrap_or(0.0);
        let engaged = target.direction == Direction::Forward && target.blade_height <= design + 0.5 * config.raised_clearance;
        if engaged && moved > 0.0 {
            let swath = terrain::swept_cells(&site.truth, (pose.x, pose.y), to, config.blade_length);
            let r = blade_cut(&mut site.truth, &swath, target.blade_height, &mut site.robot.carried, site.robot.capacity);
            effects.cut += r.cut;
            effects.filled += r.filled;
            if r.cut > 0.0 || r.filled > 0.0 {
                effects.touched.extend_from_slice(&swath);
            }
        }
        site.robot.pose = Pose {
            x: to.0,
            y: to.1,
            heading: if heading_done { target.heading } else { pose.heading },
        };
        effects.distance += moved;
        if config.drag_mat && target.direction == Direction::Forward && moved > 0.0 {
            site.mat_travel += moved;
            if site.mat_travel >= config.mat_pass_spacing {
                site.mat_travel = 0.0;
                let behind = Pose {
                    heading: site.robot.pose.heading + std::f64::consts::PI,
                    ..site.robot.pose
                };
                let half = 0.5 * config.mat_width;
                let cells = terrain::cells_in_trapezoid(
                    &site.truth,
                    &behind,
                    config.mat_offset,
                    config.mat_offset + config.mat_length,
                    half,
                    half,
                );
                drag_mat(&mut site.truth, &cells);
                effects.touched.extend_from_slice(&cells);
            }
        }
    }
    if !effects.touched.is_empty() {
        effects.touched.sort_unstable();
        effects.touched.dedup();
        site.belief
            .inject_disturbance_noise(&effects.touched, config.disturbance_variance)
            .expect("touched cells are on the map");
    }
    effects
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub round: usize,
    pub case: Option<CaseKind>,
    pub objective: f64,
    pub sources: usize,
    pub sinks: usize,
    pub moves: usize,
    pub triplets: usize,
    pub belief_area_oos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub seed: u64,
    /// Metrics of the true terrain.
    pub before: SiteMetrics,
    pub after: SiteMetrics,
    /// Metrics of the robot's final map.
    pub belief_after: SiteMetrics,
    /// `1 − after/before` of the out-of-spec area; 0 when nothing was out.
    pub area_oos_reduction: f64,
    pub modes: Vec<Mode>,
    pub plans: Vec<PlanSummary>,
    pub triplets_executed: usize,
    pub triplets_skipped: usize,
    pub volume_cut: f64,
    pub volume_start: f64,
    pub volume_end: f64,
    pub material_scale: f64,
    pub distance_travelled: f64,
    pub observed_fraction: f64,
}

impl EpisodeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

struct Episode<'a> {
    site: Worksite,
    config: &'a SimConfig,
    prims: PrimitiveSet,
    planner: PlannerConfig,
    distance: f64,
    cut: f64,
}

impl Episode<'_> {
    fn observe(&mut self) {
        observe(&mut self.site, &self.config.footprint, &self.config.noise);
    }

    fn step(&self) -> f64 {
        self.config.speed * self.config.dt
    }

    /// Drives the exploration route from the current pose, blade raised.
    fn explore(&mut self) {
        let (mut route, spacing) = plan_exploration(
            &self.site.truth,
            self.config.exploration_spacing,
            self.config.exploration_margin,
            &self.config.footprint,
            0.99,
        );
        log::info!("exploring {} waypoints at row spacing {spacing:.2} m", route.len());
        route.insert(0, self.site.robot.pose);
        let mut last = self.site.robot.pose;
        for pose in sensor::sample_route(&route, self.step()) {
            self.distance += (pose.x - last.x).hypot(pose.y - last.y);
            self.site.robot.pose = pose;
            last = pose;
            self.observe();
        }
    }

    /// Runs a trajectory to completion, observing after every step.
    fn drive(&mut self, traj: &Trajectory) {
        let mut cursor = MotionCursor::new(traj, 0.5 * self.site.truth.resolution());
        let mut touched = Vec::new();
        while !cursor.finished() {
            let fx = step_motion(&mut self.site, &mut cursor, self.config.dt, self.config);
            self.distance += fx.distance;
            self.cut += fx.cut;
            touched.extend(fx.touched);
            self.observe();
        }
        if self.site.robot.carried > 0.0 {
            self.dump_ahead(&mut touched);
        }
        if !touched.is_empty() {
            if let Some(bbox) = terrain::bounding_box(&self.site.truth, &touched, 3) {
                let changed = relax(&mut self.site.truth, bbox, self.config.repose_deg, self.config.relax_sweeps);
                self.site
                    .belief
                    .inject_disturbance_noise(&changed, self.config.disturbance_variance)
                    .expect("relaxed cells are on the map");
            }
        }
    }

    fn dump_ahead(&mut self, touched: &mut Vec<usize>) {
        let pose = self.site.robot.pose;
        let res = self.site.truth.resolution();
        let half = 0.5 * self.config.blade_length;
        let mut cells = terrain::cells_in_trapezoid(&self.site.truth, &pose, 0.0, res, half, half);
        if cells.is_empty() {
            cells.extend(self.site.truth.locate(pose.x, pose.y));
        }
        terrain::dump(&mut self.site.truth, &cells, self.site.robot.carried);
        self.site.robot.carried = 0.0;
        self.site
            .belief
            .inject_disturbance_noise(&cells, self.config.disturbance_variance)
            .expect("dump cells are on the map");
        touched.extend(cells);
    }

    fn straight(&self, from: Pose, to: (f64, f64), heading: f64, direction: Direction, blade_down: bool) -> Trajectory {
        let wp = |x, y| Waypoint {
            x,
            y,
            heading,
            direction,
            curvature: 0.0,
            velocity: 0.0,
            blade_height: 0.0,
        };
        let traj = Trajectory {
            waypoints: vec![wp(from.x, from.y), wp(to.0, to.1)],
        };
        self.blade(&traj, blade_down)
    }

    fn blade(&self, traj: &Trajectory, blade_down: bool) -> Trajectory {
        let raised = self.config.raised_clearance;
        let mut out = annotate(traj, 0.0, raised, self.config.speed, self.config.speed);
        if !blade_down {
            for w in &mut out.waypoints {
                w.blade_height = raised;
            }
        }
        out
    }

    fn clamp_inside(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, y0, x1, y1) = self.site.truth.bounds();
        let m = 0.15;
        (x.clamp(x0 + m, x1 - m), y.clamp(y0 + m, y1 - m))
    }

    /// Transit with the blade raised, push through the source to the sink,
    /// reverse back to the offset. `false` if the transit could not be
    /// planned.
    fn execute(&mut self, t: &TransportTriplet) -> bool {
        let (ox, oy) = self.clamp_inside(t.offset.x, t.offset.y);
        let goal = Pose { x: ox, y: oy, heading: t.offset.heading };
        let transit = match plan_path(&self.site.belief, &self.prims, &self.site.robot.pose, &goal, &self.planner) {
            Ok(traj) => traj,
            Err(e) => {
                log::warn!("skipping triplet at ({:.2}, {:.2}): {e}", t.source.x, t.source.y);
                return false;
            }
        };
        let transit = self.blade(&transit, false);
        self.drive(&transit);

        let start = self.site.robot.pose;
        let (sx, sy) = self.clamp_inside(t.sink.x, t.sink.y);
        let heading = (sy - start.y).atan2(sx - start.x);
        let push = self.straight(start, (sx, sy), heading, Direction::Forward, true);
        self.drive(&push);

        let back = self.straight(self.site.robot.pose, (start.x, start.y), heading, Direction::Reverse, false);
        self.drive(&back);
        true
    }

    fn plan(&mut self, round: usize, budget: usize, belief_oos: f64) -> Result<(PlanSummary, Vec<TransportTriplet>), SimError> {
        let c = self.config;
        let diff = diff_to_design(&self.site.belief, &self.site.design)?.coarsen(c.planning_block);
        let mut nodes = extract_nodes(&diff, c.height_threshold);
        assign_headings(&mut nodes, &diff);
        let nodes = decimate_sources(&nodes, c.decimate_distance, c.heading_threshold_deg.to_radians());
        let mut summary = PlanSummary {
            round,
            case: None,
            objective: 0.0,
            sources: nodes.sources.len(),
            sinks: nodes.sinks.len(),
            moves: 0,
            triplets: 0,
            belief_area_oos: belief_oos,
        };
        if nodes.is_empty() {
            return Ok((summary, Vec::new()));
        }
        let plan = solve_transport(&nodes, &TransportOptions::default())?;
        let center = nodes.sink_centroid().unwrap_or((0.0, 0.0));
        let mut triplets = order_radially(&build_triplets(&plan, c.offset_distance), center);
        triplets.truncate(budget);
        summary.case = Some(plan.case.kind);
        summary.objective = plan.objective;
        summary.moves = plan.moves.len();
        summary.triplets = triplets.len();
        log::info!(
            "round {round}: {} sources, {} sinks, {} moves, objective {:.4}",
            summary.sources,
            summary.sinks,
            summary.moves,
            plan.objective
        );
        Ok((summary, triplets))
    }

    fn snapshot(&self, round: usize) -> Result<(), SimError> {
        if let Some(dir) = &self.config.snapshot_dir {
            let path = dir.join(format!("truth_{round:03}.csv"));
            save_heightmap(&self.site.truth, &path, MapFormat::Csv, 1.0)?;
        }
        Ok(())
    }
}

/// Explores, then alternates transport planning and execution until the
/// belief's out-of-spec area stops shrinking, nothing is left to move, or
/// the triplet budget is spent.
pub fn run_episode(site: Worksite, config: &SimConfig, spec: &MetricSpec) -> Result<(EpisodeReport, Worksite), SimError> {
    config.validate()?;
    if spec.window % 2 == 0 || !(spec.smooth_m > 0.0) || !(spec.grade_deg >= 0.0) {
        return Err(SimError::Argument(format!("bad metric spec {spec:?}")));
    }
    let before = spec.evaluate(&site.truth)?;
    let volume_start = site.material();
    let material_scale = site.material_scale();
    let prims = generate_primitives(
        &[DEFAULT_MIN_RADIUS, 2.0 * DEFAULT_MIN_RADIUS, f64::INFINITY],
        DEFAULT_ARC_LENGTH,
        DEFAULT_HEADINGS,
        DEFAULT_MIN_RADIUS,
    )
    .expect("default primitives are valid");
    let planner = PlannerConfig {
        w_topo: config.w_topo,
        heuristic_schedule: &HEURISTIC_SCHEDULE,
        max_expansions: config.max_expansions,
        ..Default::default()
    };
    let mut ep = Episode {
        site,
        config,
        prims,
        planner,
        distance: 0.0,
        cut: 0.0,
    };
    let mut state = ExecState::default();
    let mut plans = Vec::new();
    let mut executed = 0;
    let mut skipped = 0;

    ep.explore();
    ep.snapshot(0)?;
    let mut last_oos = spec.evaluate(&ep.site.belief)?.area_oos;
    state.transition(Mode::PlanTransport)?;
    let mut round = 0;
    loop {
        round += 1;
        let remaining = config.triplet_budget.saturating_sub(executed + skipped);
        let (summary, triplets) = ep.plan(round, remaining, last_oos)?;
        plans.push(summary);
        state.pending = triplets.into();
        state.transition(Mode::Transport)?;
        let had_work = !state.pending.is_empty();
        while let Some(t) = state.pending.pop_front() {
            if ep.execute(&t) {
                executed += 1;
            } else {
                skipped += 1;
            }
        }
        if config.survey_after_sweep && had_work {
            ep.explore();
        }
        ep.snapshot(round)?;
        let oos = spec.evaluate(&ep.site.belief)?.area_oos;
        let improving = oos < last_oos;
        log::info!("round {round}: belief out-of-spec {last_oos:.4} -> {oos:.4} m²");
        last_oos = oos;
        if !had_work || !improving || executed + skipped >= config.triplet_budget {
            state.transition(Mode::Done)?;
            break;
        }
        state.transition(Mode::PlanTransport)?;
    }

    let site = ep.site;
    let after = spec.evaluate(&site.truth)?;
    let belief_after = spec.evaluate(&site.belief)?;
    let area_oos_reduction = if before.area_oos > 0.0 {
        1.0 - after.area_oos / before.area_oos
    } else {
        0.0
    };
    let report = EpisodeReport {
        seed: site.seed,
        before,
        after,
        belief_after,
        area_oos_reduction,
        modes: state.history().to_vec(),
        plans,
        triplets_executed: executed,
        triplets_skipped: skipped,
        volume_cut: ep.cut,
        volume_start,
        volume_end: site.material(),
        material_scale,
        distance_travelled: ep.distance,
        observed_fraction: site.belief.observed_count() as f64 / site.belief.len() as f64,
    };
    Ok((report, site))
}
