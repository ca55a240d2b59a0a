//! Worksite verification metrics: grade, smoothness and area out of spec.

use serde::{Deserialize, Serialize};

use super::{GridError, HeightMap, Result};

/// Least-squares plane `z = a·x + b·y + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FitPlane {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }

    /// Angle between the plane and a level plane, degrees.
    pub fn grade_deg(&self) -> f64 {
        self.a.hypot(self.b).atan().to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteMetrics {
    /// Degrees.
    pub grade: f64,
    /// Meters.
    pub smoothness: f64,
    /// m².
    pub area_oos: f64,
    pub area_oos_fraction: f64,
}

/// `None` for fewer than three points or a collinear set.
fn fit_points(points: &[(f64, f64, f64)]) -> Option<FitPlane> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    // Heights relative to the first point make a constant map fit exactly.
    let z0 = points[0].2;
    let (mut mx, mut my, mut mz) = (0.0, 0.0, 0.0);
    for &(x, y, z) in points {
        mx += x;
        my += y;
        mz += z - z0;
    }
    mx /= nf;
    my /= nf;
    mz /= nf;
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, z) in points {
        let (dx, dy, dz) = (x - mx, y - my, z - z0 - mz);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    // Collinear (or coincident) points leave the normal equations singular.
    if !(det > 1e-12 * sxx.max(syy).powi(2)) || sxx == 0.0 || syy == 0.0 {
        return None;
    }
    let a = (sxz * syy - syz * sxy) / det;
    let b = (syz * sxx - sxz * sxy) / det;
    Some(FitPlane {
        a,
        b,
        c: z0 + (mz - a * mx - b * my),
    })
}

fn residual_std(points: &[(f64, f64, f64)], plane: &FitPlane) -> f64 {
    let ss: f64 = points
        .iter()
        .map(|&(x, y, z)| {
            let r = z - plane.eval(x, y);
            r * r
        })
        .sum();
    (ss / points.len() as f64).sqrt()
}

fn observed_points(map: &HeightMap) -> Vec<(f64, f64, f64)> {
    map.cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.observed)
        .map(|(i, c)| {
            let (x, y) = map.center(i);
            (x, y, c.height)
        })
        .collect()
}

/// Least-squares plane through the observed cell centers.
pub fn fit_plane(map: &HeightMap) -> Result<FitPlane> {
    let points = observed_points(map);
    if points.len() < 3 {
        return Err(GridError::Rank(format!(
            "need at least 3 observed cells, have {}",
            points.len()
        )));
    }
    fit_points(&points).ok_or_else(|| GridError::Rank("observed cells are collinear".into()))
}

/// Per-cell out-of-spec flags.
///
/// A cell fails when the plane fitted to the observed cells of the
/// `window`×`window` square around it is steeper than `grade_spec` degrees,
/// or the residual standard deviation about that plane exceeds
/// `smooth_spec` meters. Unobserved cells, and cells whose window holds no
/// well-posed fit, are never flagged.
pub fn out_of_spec_cells(
    map: &HeightMap,
    grade_spec: f64,
    smooth_spec: f64,
    window: usize,
) -> Result<Vec<bool>> {
    if window == 0 || window % 2 == 0 {
        return Err(GridError::Argument(format!("window must be odd and >= 1, got {window}")));
    }
    let half = window / 2;
    let (w, h) = (map.width(), map.height());
    let res = map.resolution();
    let cells = map.cells();
    let mut flags = vec![false; cells.len()];
    let mut points = Vec::with_capacity(window * window);
    for row in 0..h {
        for col in 0..w {
            let i = map.index(col, row);
            if !cells[i].observed {
                continue;
            }
            points.clear();
            for r in row.saturating_sub(half)..(row + half + 1).min(h) {
                for c in col.saturating_sub(half)..(col + half + 1).min(w) {
                    let cell = &cells[map.index(c, r)];
                    if cell.observed {
                        // Local coordinates keep the fit well conditioned.
                        points.push((
                            (c as f64 - col as f64) * res,
                            (r as f64 - row as f64) * res,
                            cell.height,
                        ));
                    }
                }
            }
            if let Some(plane) = fit_points(&points) {
                flags[i] = plane.grade_deg() > grade_spec || residual_std(&points, &plane) > smooth_spec;
            }
        }
    }
    Ok(flags)
}

/// Out-of-spec thresholds: grade in degrees, smoothness in meters, window
/// side in cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSpec {
    pub grade_deg: f64,
    pub smooth_m: f64,
    pub window: usize,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec {
            grade_deg: 1.0,
            smooth_m: 0.01,
            window: 5,
        }
    }
}

impl MetricSpec {
    pub fn evaluate(&self, map: &HeightMap) -> Result<SiteMetrics> {
        compute_metrics(map, self.grade_deg, self.smooth_m, self.window)
    }
}

/// Site-wide grade and smoothness plus the out-of-spec area.
pub fn compute_metrics(
    map: &HeightMap,
    grade_spec: f64,
    smooth_spec: f64,
    window: usize,
) -> Result<SiteMetrics> {
    let points = observed_points(map);
    let plane = fit_plane(map)?;
    let flags = out_of_spec_cells(map, grade_spec, smooth_spec, window)?;
    let area_oos = flags.iter().filter(|&&f| f).count() as f64 * map.cell_area();
    let observed_area = points.len() as f64 * map.cell_area();
    Ok(SiteMetrics {
        grade: plane.grade_deg(),
        smoothness: residual_std(&points, &plane),
        area_oos,
        area_oos_fraction: area_oos / observed_area,
    })
}
