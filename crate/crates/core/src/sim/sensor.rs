//! Forward-looking height sensor and the exploration route.

use rand_distr::{Distribution, StandardNormal};

use super::site::Worksite;
use super::terrain::cells_in_trapezoid;
use crate::gridmap::HeightMap;
use crate::triplets::Pose;

/// Trapezoid ahead of the robot, meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Footprint {
    pub near: f64,
    pub far: f64,
    pub near_width: f64,
    pub far_width: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Footprint {
            near: 0.3,
            far: 1.5,
            near_width: 0.5,
            far_width: 1.0,
        }
    }
}

impl Footprint {
    pub fn cells(&self, map: &HeightMap, pose: &Pose) -> Vec<usize> {
        cells_in_trapezoid(map, pose, self.near, self.far, 0.5 * self.near_width, 0.5 * self.far_width)
    }
}

/// Measurement variance `σ₀² + k·d²` at sensor distance `d`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma0_sq: f64,
    pub k: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { sigma0_sq: 1e-4, k: 1e-4 }
    }
}

impl NoiseModel {
    pub fn variance(&self, d: f64) -> f64 {
        self.sigma0_sq + self.k * d * d
    }
}

/// Measures every truth cell in the footprint with seeded Gaussian noise and
/// fuses it into the belief. A zero-variance reading is taken as exact.
/// Returns the number of cells measured.
pub fn observe(site: &mut Worksite, footprint: &Footprint, noise: &NoiseModel) -> usize {
    let pose = site.robot.pose;
    let cells = footprint.cells(&site.truth, &pose);
    for &i in &cells {
        let (x, y) = site.truth.center(i);
        let d = (x - pose.x).hypot(y - pose.y);
        let var = noise.variance(d);
        let truth = site.truth.cells()[i].height;
        let z: f64 = StandardNormal.sample(&mut site.rng);
        if var > 0.0 {
            site.belief
                .kalman_update(i, truth + var.sqrt() * z, var)
                .expect("footprint cells are on the map");
        } else {
            site.belief.set_height(i, truth).expect("footprint cells are on the map");
        }
    }
    cells.len()
}

/// Perimeter loop inset by `margin`, then serpentine rows `spacing` apart
/// across the interior. Consecutive waypoints are joined by straight lines.
pub fn exploration_route(width: f64, height: f64, origin: (f64, f64), spacing: f64, margin: f64) -> Vec<Pose> {
    let (x0, y0) = (origin.0 + margin, origin.1 + margin);
    let (x1, y1) = (origin.0 + width - margin, origin.1 + height - margin);
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)];
    let mut route: Vec<Pose> = Vec::new();
    let push = |x: f64, y: f64, route: &mut Vec<Pose>| {
        let heading = route.last().map_or(0.0, |p: &Pose| {
            let (dx, dy) = (x - p.x, y - p.y);
            if dx == 0.0 && dy == 0.0 {
                p.heading
            } else {
                dy.atan2(dx)
            }
        });
        route.push(Pose { x, y, heading });
    };
    for (x, y) in corners {
        push(x, y, &mut route);
    }
    let mut k = 1;
    let mut left_to_right = true;
    while origin.1 + k as f64 * spacing < y1 {
        let y = origin.1 + k as f64 * spacing;
        let (xa, xb) = if left_to_right { (x0, x1) } else { (x1, x0) };
        push(xa, y, &mut route);
        push(xb, y, &mut route);
        left_to_right = !left_to_right;
        k += 1;
    }
    route
}

/// Fraction of map cells inside the footprint at some point of the route,
/// sampling every `step` meters along each leg and at every turn.
pub fn route_coverage(map: &HeightMap, route: &[Pose], footprint: &Footprint, step: f64) -> f64 {
    let mut seen = vec![false; map.len()];
    for pose in sample_route(route, step) {
        for i in footprint.cells(map, &pose) {
            seen[i] = true;
        }
    }
    seen.iter().filter(|&&s| s).count() as f64 / map.len() as f64
}

/// Poses every `step` meters along the route, rotating in place at corners.
pub fn sample_route(route: &[Pose], step: f64) -> Vec<Pose> {
    let mut out = Vec::new();
    let Some(first) = route.first() else {
        return out;
    };
    out.push(*first);
    for w in route.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let heading = dy.atan2(dx);
        // Turn in place toward the new leg in steps of at most 0.2 rad.
        let last = out.last().copied().unwrap_or(a);
        let turn = crate::nodes::angle_diff(last.heading, heading);
        let signed = {
            let d = (heading - last.heading).rem_euclid(std::f64::consts::TAU);
            if d > std::f64::consts::PI { -turn } else { turn }
        };
        let n_turn = (turn / 0.2).ceil() as usize;
        for k in 1..=n_turn {
            out.push(Pose {
                heading: last.heading + signed * k as f64 / n_turn as f64,
                ..last
            });
        }
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push(Pose {
                x: a.x + t * dx,
                y: a.y + t * dy,
                heading,
            });
        }
    }
    out
}

/// Exploration route whose sampled footprints reach at least
/// `min_coverage` of the map, shrinking the row spacing by 20 % until they
/// do (at most ten times).
pub fn plan_exploration(map: &HeightMap, spacing: f64, margin: f64, footprint: &Footprint, min_coverage: f64) -> (Vec<Pose>, f64) {
    let (xmin, ymin, xmax, ymax) = map.bounds();
    let (w, h) = (xmax - xmin, ymax - ymin);
    let mut s = spacing;
    let step = 0.5 * map.resolution();
    let mut route = exploration_route(w, h, (xmin, ymin), s, margin);
    for _ in 0..10 {
        let coverage = route_coverage(map, &route, footprint, step);
        if coverage >= min_coverage {
            return (route, s);
        }
        log::debug!("exploration spacing {s} covers {coverage:.4}, tightening rows");
        s *= 0.8;
        route = exploration_route(w, h, (xmin, ymin), s, margin);
    }
    (route, s)
}
