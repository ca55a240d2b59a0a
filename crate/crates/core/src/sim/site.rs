//! Synthetic worksites.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SimError;
use crate::gridmap::HeightMap;
use crate::triplets::Pose;

pub const DEPTH_TO_DIAMETER: f64 = 0.2;
/// Radial width of the rim's inner rise, m.
pub const RIM_INNER_RISE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Crater {
    pub cx: f64,
    pub cy: f64,
    pub diameter: f64,
}

impl Crater {
    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    /// Radius at which the rim meets level ground.
    pub fn outer_radius(&self) -> f64 {
        self.radius() + RIM_INNER_RISE + self.radius()
    }

    /// Spherical-cap bowl, negative inside the rim crest circle.
    fn bowl(&self, r: f64) -> f64 {
        let a = self.radius();
        let d = DEPTH_TO_DIAMETER * self.diameter;
        if r >= a {
            return 0.0;
        }
        let sphere = (a * a + d * d) / (2.0 * d);
        -((sphere * sphere - r * r).sqrt() - (sphere - d))
    }

    /// Unit-peak rim: linear rise over the inner band, linear fall to zero
    /// over one crater radius.
    fn rim_shape(&self, r: f64) -> f64 {
        let a = self.radius();
        if r < a || r >= self.outer_radius() {
            0.0
        } else if r < a + RIM_INNER_RISE {
            (r - a) / RIM_INNER_RISE
        } else {
            1.0 - (r - a - RIM_INNER_RISE) / a
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    /// Pose of the blade center.
    pub pose: Pose,
    pub carried: f64,
    pub capacity: f64,
}

/// Ground truth, the robot's belief, the design surface and the robot.
#[derive(Debug, Clone)]
pub struct Worksite {
    pub truth: HeightMap,
    pub belief: HeightMap,
    pub design: HeightMap,
    pub robot: RobotState,
    pub seed: u64,
    pub(crate) rng: ChaCha8Rng,
    /// Forward travel since the drag mat last acted, m.
    pub(crate) mat_travel: f64,
}

impl Worksite {
    /// Belief starts unobserved; the design is the flat plane at height 0.
    pub fn new(truth: HeightMap, seed: u64, start: Pose, capacity: f64) -> Result<Self, SimError> {
        let (w, h, res, origin) = (truth.width(), truth.height(), truth.resolution(), truth.origin());
        let belief = HeightMap::new(w, h, res, origin)?;
        let design = HeightMap::flat(w, h, res, origin, 0.0)?;
        Ok(Worksite {
            truth,
            belief,
            design,
            robot: RobotState {
                pose: start,
                carried: 0.0,
                capacity,
            },
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mat_travel: 0.0,
        })
    }

    /// Truth volume plus what the blade carries, m³.
    pub fn material(&self) -> f64 {
        self.truth.total_volume() + self.robot.carried
    }

    /// Σ |height| × area; the scale for relative mass checks on sites whose
    /// net volume is near zero.
    pub fn material_scale(&self) -> f64 {
        self.truth.heights().map(f64::abs).sum::<f64>() * self.truth.cell_area()
    }
}

/// Flat truth map of `width × height` meters with the given craters cut in.
///
/// Each crater is a spherical-cap bowl of depth 0.2 × diameter ringed by a
/// rim whose height is scaled so the rim holds exactly the bowl's volume on
/// this grid.
pub fn crater_heights(width: f64, height: f64, resolution: f64, craters: &[Crater]) -> Result<HeightMap, SimError> {
    if !(resolution > 0.0) || !(width >= resolution) || !(height >= resolution) {
        return Err(SimError::Argument(format!(
            "bad site geometry {width}×{height} at {resolution}"
        )));
    }
    let cols = (width / resolution).round() as usize;
    let rows = (height / resolution).round() as usize;
    let origin = (0.5 * resolution, 0.5 * resolution);
    for (k, c) in craters.iter().enumerate() {
        let r = c.outer_radius();
        if !(c.diameter > 0.0) || c.cx - r < 0.0 || c.cy - r < 0.0 || c.cx + r > width || c.cy + r > height {
            return Err(SimError::Argument(format!("crater {k} with its rim does not fit the site")));
        }
        for (j, o) in craters.iter().enumerate().take(k) {
            if (c.cx - o.cx).hypot(c.cy - o.cy) < r + o.outer_radius() {
                return Err(SimError::Argument(format!("craters {j} and {k} overlap")));
            }
        }
    }
    let mut heights = vec![0.0; cols * rows];
    for c in craters {
        let mut bowl_sum = 0.0;
        let mut rim_sum = 0.0;
        let mut bowl = vec![0.0; cols * rows];
        let mut rim = vec![0.0; cols * rows];
        for row in 0..rows {
            for col in 0..cols {
                let i = row * cols + col;
                let x = origin.0 + col as f64 * resolution;
                let y = origin.1 + row as f64 * resolution;
                let r = (x - c.cx).hypot(y - c.cy);
                bowl[i] = c.bowl(r);
                rim[i] = c.rim_shape(r);
                bowl_sum += bowl[i];
                rim_sum += rim[i];
            }
        }
        let peak = if rim_sum > 0.0 { -bowl_sum / rim_sum } else { 0.0 };
        for i in 0..heights.len() {
            heights[i] += bowl[i] + peak * rim[i];
        }
    }
    Ok(HeightMap::from_heights(cols, rows, resolution, origin, heights)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_craters_is_flat() {
        let m = crater_heights(2.0, 1.0, 0.05, &[]).unwrap();
        assert_eq!((m.width(), m.height()), (40, 20));
        assert!(m.heights().all(|h| h == 0.0));
    }

    #[test]
    fn crater_depth_and_balance() {
        let c = Crater { cx: 2.5, cy: 2.5, diameter: 1.0 };
        let m = crater_heights(5.0, 5.0, 0.05, &[c]).unwrap();
        let min = m.heights().fold(f64::INFINITY, f64::min);
        // The grid misses the exact center by half a cell.
        assert!((min + 0.2).abs() < 0.01, "{min}");
        let pos: f64 = m.heights().filter(|h| *h > 0.0).sum();
        let neg: f64 = m.heights().filter(|h| *h < 0.0).sum();
        assert!((pos + neg).abs() <= 1e-6 * pos);
    }

    #[test]
    fn rim_respects_repose_angle() {
        let c = Crater { cx: 2.5, cy: 2.5, diameter: 1.0 };
        let m = crater_heights(5.0, 5.0, 0.05, &[c]).unwrap();
        let limit = 31f64.to_radians().tan() * 0.05;
        for row in 0..m.height() {
            for col in 0..m.width() - 1 {
                let i = m.index(col, row);
                let (x, y) = m.center(i);
                let r = (x - 2.5).hypot(y - 2.5);
                if r > c.radius() + 0.05 {
                    let h0 = m.cells()[i].height;
                    let h1 = m.cells()[i + 1].height;
                    assert!((h1 - h0).abs() <= limit + 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_craters_balance_separately() {
        let a = Crater { cx: 1.5, cy: 1.5, diameter: 0.8 };
        let b = Crater { cx: 4.5, cy: 1.5, diameter: 1.0 };
        let m = crater_heights(6.0, 3.0, 0.05, &[a, b]).unwrap();
        for c in [a, b] {
            let local: f64 = (0..m.len())
                .filter(|&i| {
                    let (x, y) = m.center(i);
                    (x - c.cx).hypot(y - c.cy) < c.outer_radius()
                })
                .map(|i| m.cells()[i].height)
                .sum();
            let scale: f64 = (0..m.len()).map(|i| m.cells()[i].height.abs()).sum();
            assert!(local.abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn rejects_bad_layouts() {
        let edge = Crater { cx: 0.5, cy: 2.5, diameter: 1.0 };
        assert!(crater_heights(5.0, 5.0, 0.05, &[edge]).is_err());
        let a = Crater { cx: 2.0, cy: 2.5, diameter: 1.0 };
        let b = Crater { cx: 3.0, cy: 2.5, diameter: 1.0 };
        assert!(crater_heights(6.0, 5.0, 0.05, &[a, b]).is_err());
    }
}
