//! Lattice A* over (x, y, heading) with an ascent-weighted cost, and
//! waypoint annotation for forward pushes and reverse returns.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::HeightMap;
use crate::nodes::angle_diff;
use crate::triplets::Pose;

pub const DEFAULT_HEADINGS: usize = 32;
pub const DEFAULT_MIN_RADIUS: f64 = 0.5;
pub const DEFAULT_ARC_LENGTH: f64 = 0.2;
pub const HEURISTIC_SCHEDULE: [f64; 4] = [1.0, 1.5, 2.5, 4.0];

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("no path within {expansions} expansions at heuristic weight {weight}")]
    NoPath { expansions: usize, weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }
}

/// Pose at distance `s` along a constant-curvature arc.
pub fn pose_along(x: f64, y: f64, heading: f64, dir: Direction, curvature: f64, s: f64) -> (f64, f64, f64) {
    let d = dir.sign();
    if curvature == 0.0 {
        let (sn, cs) = heading.sin_cos();
        return (x + d * s * cs, y + d * s * sn, heading);
    }
    let end = heading + d * curvature * s;
    (
        x + (end.sin() - heading.sin()) / curvature,
        y - (end.cos() - heading.cos()) / curvature,
        end,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub direction: Direction,
    /// Signed, 1/m; positive turns left when driving forward.
    pub curvature: f64,
    pub length: f64,
    /// Heading change in lattice steps.
    pub turn_steps: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSet {
    pub headings: usize,
    pub primitives: Vec<Primitive>,
}

impl PrimitiveSet {
    pub fn heading_step(&self) -> f64 {
        TAU / self.headings as f64
    }

    pub fn heading_angle(&self, index: usize) -> f64 {
        let a = index as f64 * self.heading_step();
        if a > std::f64::consts::PI {
            a - TAU
        } else {
            a
        }
    }

    pub fn heading_index(&self, angle: f64) -> usize {
        ((angle.rem_euclid(TAU) / self.heading_step()).round() as usize) % self.headings
    }

    /// End pose and heading index of primitive `p` from a lattice pose.
    pub fn apply(&self, x: f64, y: f64, heading: usize, p: &Primitive) -> (f64, f64, usize) {
        let (ex, ey, _) = pose_along(x, y, self.heading_angle(heading), p.direction, p.curvature, p.length);
        let h = (heading as i64 + p.turn_steps as i64).rem_euclid(self.headings as i64) as usize;
        (ex, ey, h)
    }
}

/// Arcs of every radius turning left and right plus a straight segment, for
/// both directions. Each arc turns a whole number of heading steps, chosen so
/// its length is as close to `arc_length` as possible (at least one step).
/// An infinite radius in `turn_radii` is the straight primitive, which is
/// always included.
pub fn generate_primitives(
    turn_radii: &[f64],
    arc_length: f64,
    headings: usize,
    min_radius: f64,
) -> Result<PrimitiveSet, PlanError> {
    if !(arc_length > 0.0) || !arc_length.is_finite() {
        return Err(PlanError::Argument(format!("arc length {arc_length} must be positive")));
    }
    if headings < 4 {
        return Err(PlanError::Argument(format!("need at least 4 headings, got {headings}")));
    }
    let step = TAU / headings as f64;
    let mut primitives = Vec::new();
    for dir in [Direction::Forward, Direction::Reverse] {
        primitives.push(Primitive {
            direction: dir,
            curvature: 0.0,
            length: arc_length,
            turn_steps: 0,
        });
        for &r in turn_radii {
            if r.is_infinite() {
                continue;
            }
            if !(r >= min_radius) {
                return Err(PlanError::Argument(format!("radius {r} below minimum {min_radius}")));
            }
            let k = ((arc_length / (r * step)).round() as i32).max(1);
            for side in [1.0, -1.0] {
                let turn = (side * dir.sign()) as i32 * k;
                primitives.push(Primitive {
                    direction: dir,
                    curvature: side / r,
                    length: k as f64 * step * r,
                    turn_steps: turn,
                });
            }
        }
    }
    Ok(PrimitiveSet { headings, primitives })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub direction: Direction,
    /// Curvature of the arc arriving at this waypoint, 1/m.
    pub curvature: f64,
    pub velocity: f64,
    pub blade_height: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn path_length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| arc_length_between(&w[0], &w[1]))
            .sum()
    }

    /// Points every `step` meters along the arcs, endpoints included.
    pub fn densify(&self, step: f64) -> Vec<Waypoint> {
        let Some(first) = self.waypoints.first() else {
            return Vec::new();
        };
        let mut out = vec![*first];
        for w in self.waypoints.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let len = arc_length_between(a, b);
            let n = (len / step).ceil().max(1.0) as usize;
            for k in 1..=n {
                let s = len * k as f64 / n as f64;
                let (x, y, h) = pose_along(a.x, a.y, a.heading, b.direction, b.curvature, s);
                out.push(Waypoint {
                    x: if k == n { b.x } else { x },
                    y: if k == n { b.y } else { y },
                    heading: if k == n { b.heading } else { h },
                    ..*b
                });
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectories always serialize")
    }
}

fn arc_length_between(a: &Waypoint, b: &Waypoint) -> f64 {
    let chord = (b.x - a.x).hypot(b.y - a.y);
    if b.curvature == 0.0 {
        return chord;
    }
    let r = 1.0 / b.curvature.abs();
    2.0 * r * (chord / (2.0 * r)).min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub w_topo: f64,
    /// Heuristic weights tried in order until one succeeds.
    pub heuristic_schedule: &'static [f64],
    pub pos_threshold: f64,
    pub heading_threshold: f64,
    /// Per-attempt node expansion budget.
    pub max_expansions: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            w_topo: 10.0,
            heuristic_schedule: &HEURISTIC_SCHEDULE,
            pos_threshold: 0.1,
            heading_threshold: 10f64.to_radians(),
            max_expansions: 200_000,
        }
    }
}

/// Sum of positive height increments along a polyline sampled from `map`.
pub fn ascent_along(map: &HeightMap, points: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for &(x, y) in points {
        if let Some(h) = map.interpolate(x, y) {
            if let Some(p) = prev {
                total += (h - p).max(0.0);
            }
            prev = Some(h);
        }
    }
    total
}

/// Ascent of the straight segment between two points.
pub fn straight_ascent(map: &HeightMap, from: (f64, f64), to: (f64, f64)) -> f64 {
    let len = (to.0 - from.0).hypot(to.1 - from.1);
    let n = (len / (0.5 * map.resolution())).ceil().max(1.0) as usize;
    let pts: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            (from.0 + t * (to.0 - from.0), from.1 + t * (to.1 - from.1))
        })
        .collect();
    ascent_along(map, &pts)
}

/// Ascent along a trajectory's arcs.
pub fn trajectory_ascent(map: &HeightMap, traj: &Trajectory) -> f64 {
    let pts: Vec<(f64, f64)> = traj
        .densify(0.5 * map.resolution())
        .iter()
        .map(|w| (w.x, w.y))
        .collect();
    ascent_along(map, &pts)
}

#[derive(Clone, Copy)]
struct SearchNode {
    x: f64,
    y: f64,
    heading: usize,
    g: f64,
    parent: usize,
    primitive: usize,
}

#[derive(PartialEq)]
struct OpenEntry {
    f: f64,
    seq: usize,
    node: usize,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cost of one primitive: length plus `w_topo` times the ascent along it,
/// `None` if the arc leaves the map.
fn edge_cost(map: &HeightMap, set: &PrimitiveSet, x: f64, y: f64, heading: usize, p: &Primitive, w_topo: f64) -> Option<f64> {
    let samples = (p.length / (0.5 * map.resolution())).ceil().max(1.0) as usize;
    let h0 = set.heading_angle(heading);
    let mut prev = map.interpolate(x, y)?;
    let mut climb = 0.0;
    for k in 1..=samples {
        let s = p.length * k as f64 / samples as f64;
        let (px, py, _) = pose_along(x, y, h0, p.direction, p.curvature, s);
        let h = map.interpolate(px, py)?;
        climb += (h - prev).max(0.0);
        prev = h;
    }
    Some(p.length + w_topo * climb)
}

fn search(
    map: &HeightMap,
    set: &PrimitiveSet,
    start: (f64, f64, usize),
    goal: &Pose,
    config: &PlannerConfig,
    weight: f64,
) -> Option<Vec<SearchNode>> {
    let h_count = set.headings;
    let key = |x: f64, y: f64, h: usize| map.locate(x, y).map(|c| c * h_count + h);
    let heuristic = |x: f64, y: f64| weight * (goal.x - x).hypot(goal.y - y);
    let at_goal = |x: f64, y: f64, h: usize| {
        (goal.x - x).hypot(goal.y - y) <= config.pos_threshold
            && angle_diff(set.heading_angle(h), goal.heading) <= config.heading_threshold
    };

    let mut best_g = vec![f64::INFINITY; map.len() * h_count];
    let mut closed = vec![false; map.len() * h_count];
    let mut nodes = vec![SearchNode {
        x: start.0,
        y: start.1,
        heading: start.2,
        g: 0.0,
        parent: usize::MAX,
        primitive: usize::MAX,
    }];
    let mut open = BinaryHeap::new();
    let k0 = key(start.0, start.1, start.2)?;
    best_g[k0] = 0.0;
    open.push(OpenEntry {
        f: heuristic(start.0, start.1),
        seq: 0,
        node: 0,
    });
    let mut seq = 1;
    let mut expansions = 0;
    while let Some(OpenEntry { node, .. }) = open.pop() {
        let (x, y, h, g) = (nodes[node].x, nodes[node].y, nodes[node].heading, nodes[node].g);
        let k = key(x, y, h)?;
        if closed[k] {
            continue;
        }
        closed[k] = true;
        if at_goal(x, y, h) {
            let mut chain = Vec::new();
            let mut cur = node;
            while cur != usize::MAX {
                let n = &nodes[cur];
                chain.push(*n);
                cur = n.parent;
            }
            chain.reverse();
            return Some(chain);
        }
        expansions += 1;
        if expansions > config.max_expansions {
            return None;
        }
        for (pi, p) in set.primitives.iter().enumerate() {
            let (nx, ny, nh) = set.apply(x, y, h, p);
            let Some(nk) = key(nx, ny, nh) else { continue };
            if closed[nk] {
                continue;
            }
            let Some(c) = edge_cost(map, set, x, y, h, p, config.w_topo) else {
                continue;
            };
            let ng = g + c;
            if ng < best_g[nk] {
                best_g[nk] = ng;
                nodes.push(SearchNode {
                    x: nx,
                    y: ny,
                    heading: nh,
                    g: ng,
                    parent: node,
                    primitive: pi,
                });
                open.push(OpenEntry {
                    f: ng + heuristic(nx, ny),
                    seq,
                    node: nodes.len() - 1,
                });
                seq += 1;
            }
        }
    }
    None
}

/// Weighted A* from a lattice start pose to within the thresholds of `goal`,
/// escalating the heuristic weight whenever an attempt exhausts its budget.
///
/// The start heading is snapped to the lattice. Waypoints are the start pose
/// and the end pose of every primitive; velocity and blade height are left
/// at zero for [`annotate`].
pub fn plan_path(
    map: &HeightMap,
    set: &PrimitiveSet,
    start: &Pose,
    goal: &Pose,
    config: &PlannerConfig,
) -> Result<Trajectory, PlanError> {
    if !map.contains(start.x, start.y) || !map.contains(goal.x, goal.y) {
        return Err(PlanError::Argument("start or goal outside the map".into()));
    }
    if config.heuristic_schedule.is_empty() || config.heuristic_schedule.iter().any(|&w| w < 1.0) {
        return Err(PlanError::Argument("heuristic weights must be at least 1".into()));
    }
    let h0 = set.heading_index(start.heading);
    let mut last = 1.0;
    for &weight in config.heuristic_schedule {
        last = weight;
        let Some(chain) = search(map, set, (start.x, start.y, h0), goal, config, weight) else {
            log::debug!("lattice search failed at heuristic weight {weight}");
            continue;
        };
        let waypoints = chain
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let (direction, curvature) = if i == 0 {
                    let next = chain.get(1).map(|c| set.primitives[c.primitive]);
                    (next.map_or(Direction::Forward, |p| p.direction), 0.0)
                } else {
                    let p = set.primitives[n.primitive];
                    (p.direction, p.curvature)
                };
                Waypoint {
                    x: n.x,
                    y: n.y,
                    heading: set.heading_angle(n.heading),
                    direction,
                    curvature,
                    velocity: 0.0,
                    blade_height: 0.0,
                }
            })
            .collect();
        return Ok(Trajectory { waypoints });
    }
    Err(PlanError::NoPath {
        expansions: config.max_expansions,
        weight: last,
    })
}

/// Forward waypoints get `(v_fwd, design_height)`, reverse ones
/// `(v_rev, raised_height)`.
pub fn annotate(traj: &Trajectory, design_height: f64, raised_height: f64, v_fwd: f64, v_rev: f64) -> Trajectory {
    assert!(raised_height > design_height, "raised height must exceed design height");
    Trajectory {
        waypoints: traj
            .waypoints
            .iter()
            .map(|w| {
                let (velocity, blade_height) = match w.direction {
                    Direction::Forward => (v_fwd, design_height),
                    Direction::Reverse => (v_rev, raised_height),
                };
                Waypoint {
                    velocity,
                    blade_height,
                    ..*w
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::f64::consts::FRAC_PI_2;

    fn flat(n: usize) -> HeightMap {
        HeightMap::flat(n, n, 0.05, (0.0, 0.0), 0.0).unwrap()
    }

    fn default_set() -> PrimitiveSet {
        generate_primitives(
            &[DEFAULT_MIN_RADIUS, 2.0 * DEFAULT_MIN_RADIUS, f64::INFINITY],
            DEFAULT_ARC_LENGTH,
            DEFAULT_HEADINGS,
            DEFAULT_MIN_RADIUS,
        )
        .unwrap()
    }

    #[test]
    fn straight_and_quarter_circle() {
        let (x, y, h) = pose_along(0.0, 0.0, 0.0, Direction::Forward, 0.0, 2.0);
        assert_eq!((x, y, h), (2.0, 0.0, 0.0));
        let (x, y, h) = pose_along(0.0, 0.0, 0.0, Direction::Forward, 1.0 / 1.5, 1.5 * FRAC_PI_2);
        assert!((x - 1.5).abs() < 1e-12 && (y - 1.5).abs() < 1e-12);
        assert!((h - FRAC_PI_2).abs() < 1e-12);
        let (x, y, _) = pose_along(0.0, 0.0, 0.0, Direction::Reverse, 0.0, 1.0);
        assert_eq!((x, y), (-1.0, 0.0));
    }

    #[test]
    fn primitives_end_on_lattice_headings() {
        let set = default_set();
        assert_eq!(set.primitives.len(), 10);
        for h in 0..set.headings {
            for p in &set.primitives {
                let (_, _, nh) = set.apply(0.0, 0.0, h, p);
                let (_, _, exact) = pose_along(0.0, 0.0, set.heading_angle(h), p.direction, p.curvature, p.length);
                assert!(angle_diff(exact, set.heading_angle(nh)) < 1e-9);
            }
        }
    }

    #[test]
    fn radius_below_minimum_rejected() {
        assert!(generate_primitives(&[0.2], 0.2, 16, 0.5).is_err());
        assert!(generate_primitives(&[0.5], 0.0, 16, 0.5).is_err());
    }

    #[test]
    fn straight_ahead_goal() {
        let map = flat(100);
        let set = default_set();
        let start = Pose { x: 0.5, y: 2.5, heading: 0.0 };
        let goal = Pose { x: 4.5, y: 2.5, heading: 0.0 };
        let traj = plan_path(&map, &set, &start, &goal, &PlannerConfig::default()).unwrap();
        assert!((traj.path_length() - 4.0).abs() <= DEFAULT_ARC_LENGTH);
        assert!(traj.waypoints.iter().all(|w| w.curvature == 0.0));
    }

    #[test]
    fn goal_equal_to_start() {
        let map = flat(40);
        let start = Pose { x: 1.0, y: 1.0, heading: 0.3 };
        let traj = plan_path(&map, &default_set(), &start, &start, &PlannerConfig::default()).unwrap();
        assert_eq!(traj.len(), 1);
    }

    #[test]
    fn waypoints_replay_primitives() {
        let map = flat(100);
        let set = default_set();
        let start = Pose { x: 1.0, y: 1.0, heading: 0.0 };
        let goal = Pose { x: 3.0, y: 3.5, heading: 2.0 };
        let traj = plan_path(&map, &set, &start, &goal, &PlannerConfig::default()).unwrap();
        let last = traj.waypoints.last().unwrap();
        assert!((last.x - goal.x).hypot(last.y - goal.y) <= 0.1);
        assert!(angle_diff(last.heading, goal.heading) <= 10f64.to_radians());
        for w in traj.waypoints.windows(2) {
            let replayed = set.primitives.iter().any(|p| {
                let (x, y, h) = set.apply(w[0].x, w[0].y, set.heading_index(w[0].heading), p);
                x == w[1].x && y == w[1].y && set.heading_angle(h) == w[1].heading
            });
            assert!(replayed);
        }
        let straight = (goal.x - start.x).hypot(goal.y - start.y);
        assert!(traj.path_length() >= straight - 0.1);
    }

    #[test]
    fn annotation_toggles_at_direction_changes() {
        let mk = |direction| Waypoint {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            direction,
            curvature: 0.0,
            velocity: 0.0,
            blade_height: 0.0,
        };
        let traj = Trajectory {
            waypoints: vec![mk(Direction::Forward), mk(Direction::Forward), mk(Direction::Reverse), mk(Direction::Forward)],
        };
        let out = annotate(&traj, 0.0, 0.05, 0.25, 0.2);
        let blades: Vec<f64> = out.waypoints.iter().map(|w| w.blade_height).collect();
        assert_eq!(blades, vec![0.0, 0.0, 0.05, 0.0]);
        assert_eq!(out.waypoints[2].velocity, 0.2);
        assert!(annotate(&Trajectory::default(), 0.0, 0.05, 0.25, 0.25).is_empty());
    }

    #[test]
    fn crater_is_avoided_with_heavy_topography_weight() {
        let n = 100;
        let res = 0.05;
        let heights: Vec<f64> = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64 * res, (i / n) as f64 * res);
                let d = (x - 2.5).hypot(y - 2.5);
                if d < 0.6 { -0.15 * (1.0 - (d / 0.6).powi(2)) } else { 0.0 }
            })
            .collect();
        let map = HeightMap::from_heights(n, n, res, (0.0, 0.0), heights).unwrap();
        let start = Pose { x: 1.0, y: 2.5, heading: 0.0 };
        let goal = Pose { x: 4.0, y: 2.5, heading: 0.0 };
        let config = PlannerConfig { w_topo: 100.0, ..Default::default() };
        let traj = plan_path(&map, &default_set(), &start, &goal, &config).unwrap();
        let planned = trajectory_ascent(&map, &traj);
        let straight = straight_ascent(&map, (start.x, start.y), (goal.x, goal.y));
        assert!(straight > 0.1);
        assert!(planned < straight);
    }

    /// Dijkstra over the same lattice keyed by exact grid cell and heading,
    /// without a heuristic.
    fn dijkstra_length(map: &HeightMap, set: &PrimitiveSet, start: &Pose, goal: &Pose, config: &PlannerConfig) -> f64 {
        let h0 = set.heading_index(start.heading);
        let mut dist: HashMap<usize, f64> = HashMap::new();
        let mut frontier: Vec<(f64, f64, f64, usize)> = vec![(0.0, start.x, start.y, h0)];
        let mut best = f64::INFINITY;
        while let Some(i) = (0..frontier.len()).min_by(|&a, &b| frontier[a].0.total_cmp(&frontier[b].0)) {
            let (g, x, y, h) = frontier.swap_remove(i);
            let k = map.locate(x, y).unwrap() * set.headings + h;
            if dist.contains_key(&k) {
                continue;
            }
            dist.insert(k, g);
            if (goal.x - x).hypot(goal.y - y) <= config.pos_threshold
                && angle_diff(set.heading_angle(h), goal.heading) <= config.heading_threshold
            {
                best = g;
                break;
            }
            for p in &set.primitives {
                let (nx, ny, nh) = set.apply(x, y, h, p);
                if map.contains(nx, ny) {
                    frontier.push((g + p.length, nx, ny, nh));
                }
            }
        }
        best
    }

    #[test]
    fn matches_bruteforce_on_small_lattice() {
        let map = flat(30);
        let set = default_set();
        let config = PlannerConfig { w_topo: 0.0, heuristic_schedule: &[1.0], ..Default::default() };
        for (gx, gy, gh) in [(1.2, 0.4, 0.0), (1.0, 1.0, 1.0), (0.4, 1.2, 3.0)] {
            let start = Pose { x: 0.3, y: 0.4, heading: 0.0 };
            let goal = Pose { x: gx, y: gy, heading: gh };
            let traj = plan_path(&map, &set, &start, &goal, &config).unwrap();
            let brute = dijkstra_length(&map, &set, &start, &goal, &config);
            assert!(traj.path_length() <= brute + DEFAULT_ARC_LENGTH + 1e-9, "{} vs {brute}", traj.path_length());
        }
    }
}
