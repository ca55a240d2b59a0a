//! Uniform 2.5D height maps.
//!
//! A [`HeightMap`] stores one height per cell together with the state of a
//! scalar Kalman filter for that cell, so the same type serves as a loaded
//! terrain file, a ground-truth simulation surface, or a fused belief map.
//! Cells are stored row-major with row 0 at the minimum y coordinate.

mod io;
mod metrics;

pub use io::{load_heightmap, save_heightmap, MapFormat};
pub use metrics::{compute_metrics, fit_plane, out_of_spec_cells, FitPlane, MetricSpec, SiteMetrics};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Height of a cell that has never been observed.
pub const PRIOR_HEIGHT: f64 = 0.0;
/// Variance of a cell that has never been observed, m².
pub const PRIOR_VARIANCE: f64 = 1e6;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("parse error at byte {offset}: {message}")]
    ParseBytes { offset: usize, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("rank deficient: {0}")]
    Rank(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GridError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub height: f64,
    pub variance: f64,
    pub observed: bool,
}

impl CellState {
    pub const UNOBSERVED: CellState = CellState {
        height: PRIOR_HEIGHT,
        variance: PRIOR_VARIANCE,
        observed: false,
    };

    /// A cell whose height is known exactly.
    pub fn exact(height: f64) -> Self {
        CellState {
            height,
            variance: 0.0,
            observed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightMap {
    width: usize,
    height: usize,
    resolution: f64,
    origin: (f64, f64),
    cells: Vec<CellState>,
}

impl HeightMap {
    /// A map with every cell unobserved.
    pub fn new(width: usize, height: usize, resolution: f64, origin: (f64, f64)) -> Result<Self> {
        Self::filled(width, height, resolution, origin, CellState::UNOBSERVED)
    }

    /// A map with every cell observed at exactly `level`.
    pub fn flat(
        width: usize,
        height: usize,
        resolution: f64,
        origin: (f64, f64),
        level: f64,
    ) -> Result<Self> {
        Self::filled(width, height, resolution, origin, CellState::exact(level))
    }

    fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: (f64, f64),
        cell: CellState,
    ) -> Result<Self> {
        check_geometry(width, height, resolution, origin)?;
        Ok(HeightMap {
            width,
            height,
            resolution,
            origin,
            cells: vec![cell; width * height],
        })
    }

    /// Builds an exactly-known map from row-major heights.
    pub fn from_heights(
        width: usize,
        height: usize,
        resolution: f64,
        origin: (f64, f64),
        heights: Vec<f64>,
    ) -> Result<Self> {
        check_geometry(width, height, resolution, origin)?;
        if heights.len() != width * height {
            return Err(GridError::Argument(format!(
                "expected {} heights, got {}",
                width * height,
                heights.len()
            )));
        }
        if let Some(i) = heights.iter().position(|h| !h.is_finite()) {
            return Err(GridError::Argument(format!("height at cell {i} is not finite")));
        }
        Ok(HeightMap {
            width,
            height,
            resolution,
            origin,
            cells: heights.into_iter().map(CellState::exact).collect(),
        })
    }

    /// Builds a map from explicit cell states, validating every invariant.
    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: (f64, f64),
        cells: Vec<CellState>,
    ) -> Result<Self> {
        check_geometry(width, height, resolution, origin)?;
        if cells.len() != width * height {
            return Err(GridError::Argument(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        for (i, c) in cells.iter().enumerate() {
            if !(c.variance >= 0.0) {
                return Err(GridError::Argument(format!("cell {i} has negative variance")));
            }
            if c.observed && !c.height.is_finite() {
                return Err(GridError::Argument(format!("cell {i} height is not finite")));
            }
        }
        Ok(HeightMap {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn cell(&self, index: usize) -> Option<&CellState> {
        self.cells.get(index)
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    /// Planar extent `(x_min, y_min, x_max, y_max)` covered by the cell squares.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let half = 0.5 * self.resolution;
        (
            self.origin.0 - half,
            self.origin.1 - half,
            self.origin.0 + (self.width as f64 - 0.5) * self.resolution,
            self.origin.1 + (self.height as f64 - 0.5) * self.resolution,
        )
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Planar coordinates of a cell center.
    pub fn center(&self, index: usize) -> (f64, f64) {
        let (c, r) = self.col_row(index);
        (
            self.origin.0 + c as f64 * self.resolution,
            self.origin.1 + r as f64 * self.resolution,
        )
    }

    /// Cell containing the planar point, if it lies on the map.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let fc = ((x - self.origin.0) / self.resolution + 0.5).floor();
        let fr = ((y - self.origin.1) / self.resolution + 0.5).floor();
        if fc < 0.0 || fr < 0.0 || fc >= self.width as f64 || fr >= self.height as f64 {
            return None;
        }
        Some(self.index(fc as usize, fr as usize))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.locate(x, y).is_some()
    }

    /// Stored height at a planar point (nearest cell); `None` off the map.
    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        self.locate(x, y).map(|i| self.cells[i].height)
    }

    /// Bilinear interpolation between cell centers, clamped at the edges;
    /// `None` off the map.
    pub fn interpolate(&self, x: f64, y: f64) -> Option<f64> {
        if !self.contains(x, y) {
            return None;
        }
        let u = ((x - self.origin.0) / self.resolution).clamp(0.0, (self.width - 1) as f64);
        let v = ((y - self.origin.1) / self.resolution).clamp(0.0, (self.height - 1) as f64);
        let (c0, r0) = (u.floor() as usize, v.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(self.width - 1), (r0 + 1).min(self.height - 1));
        let (fu, fv) = (u - c0 as f64, v - r0 as f64);
        let h = |c, r| self.cells[self.index(c, r)].height;
        let bottom = h(c0, r0) * (1.0 - fu) + h(c1, r0) * fu;
        let top = h(c0, r1) * (1.0 - fu) + h(c1, r1) * fu;
        Some(bottom * (1.0 - fv) + top * fv)
    }

    pub fn heights(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.height)
    }

    pub fn observed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.observed).count()
    }

    /// Σ height × cell area over all cells, m³.
    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.height).sum::<f64>() * self.cell_area()
    }

    pub fn same_geometry(&self, other: &HeightMap) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.resolution == other.resolution
            && self.origin == other.origin
    }

    /// Overwrites a cell with an exactly-known height.
    pub fn set_height(&mut self, index: usize, height: f64) -> Result<()> {
        let cell = self.cell_mut(index)?;
        *cell = CellState::exact(height);
        Ok(())
    }

    /// Adds `delta` to a cell's height without touching its filter state.
    pub(crate) fn add_height(&mut self, index: usize, delta: f64) {
        self.cells[index].height += delta;
    }

    fn cell_mut(&mut self, index: usize) -> Result<&mut CellState> {
        let n = self.cells.len();
        self.cells
            .get_mut(index)
            .ok_or_else(|| GridError::Argument(format!("cell index {index} out of range 0..{n}")))
    }

    /// Fuses one height measurement into a cell with a scalar Kalman update.
    pub fn kalman_update(&mut self, index: usize, measurement: f64, meas_variance: f64) -> Result<()> {
        if !(meas_variance > 0.0) || !meas_variance.is_finite() {
            return Err(GridError::Argument(format!(
                "measurement variance must be positive, got {meas_variance}"
            )));
        }
        if !measurement.is_finite() {
            return Err(GridError::Argument("measurement is not finite".into()));
        }
        let cell = self.cell_mut(index)?;
        if cell.variance == 0.0 {
            // An exact cell absorbs nothing.
            cell.observed = true;
            return Ok(());
        }
        let gain = cell.variance / (cell.variance + meas_variance);
        cell.height += gain * (measurement - cell.height);
        cell.variance = 1.0 / (1.0 / cell.variance + 1.0 / meas_variance);
        cell.observed = true;
        Ok(())
    }

    /// Inflates the variance of disturbed cells so later measurements dominate.
    pub fn inject_disturbance_noise(&mut self, indices: &[usize], added_variance: f64) -> Result<()> {
        if !(added_variance >= 0.0) || !added_variance.is_finite() {
            return Err(GridError::Argument(format!(
                "added variance must be non-negative, got {added_variance}"
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.cells.len()) {
            return Err(GridError::Argument(format!(
                "cell index {bad} out of range 0..{}",
                self.cells.len()
            )));
        }
        for &i in indices {
            self.cells[i].variance += added_variance;
        }
        Ok(())
    }
}

fn check_geometry(width: usize, height: usize, resolution: f64, origin: (f64, f64)) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(GridError::Argument(format!(
            "map dimensions must be positive, got {width}x{height}"
        )));
    }
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(GridError::Argument(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    if !origin.0.is_finite() || !origin.1.is_finite() {
        return Err(GridError::Argument("origin is not finite".into()));
    }
    Ok(())
}

/// Signed per-cell height difference between a live map and its design.
///
/// Positive values are excess material, negative values a deficit. Cells
/// unobserved in the live map carry `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffField {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: (f64, f64),
    pub values: Vec<Option<f64>>,
}

impl DiffField {
    pub fn center(&self, index: usize) -> (f64, f64) {
        let (c, r) = (index % self.width, index / self.width);
        (
            self.origin.0 + c as f64 * self.resolution,
            self.origin.1 + r as f64 * self.resolution,
        )
    }

    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let fc = ((x - self.origin.0) / self.resolution + 0.5).floor();
        let fr = ((y - self.origin.1) / self.resolution + 0.5).floor();
        if fc < 0.0 || fr < 0.0 || fc >= self.width as f64 || fr >= self.height as f64 {
            return None;
        }
        Some(fr as usize * self.width + fc as usize)
    }

    /// Central-difference gradient at a cell, skipping unobserved neighbours.
    pub fn gradient(&self, index: usize) -> Option<(f64, f64)> {
        let (c, r) = (index % self.width, index / self.width);
        let value = |c: usize, r: usize| self.values[r * self.width + c];
        let axis = |lo: Option<f64>, mid: Option<f64>, hi: Option<f64>, span: f64| match (lo, mid, hi) {
            (Some(a), _, Some(b)) => Some((b - a) / (2.0 * span)),
            (Some(a), Some(m), None) => Some((m - a) / span),
            (None, Some(m), Some(b)) => Some((b - m) / span),
            _ => None,
        };
        let mid = value(c, r);
        let left = if c > 0 { value(c - 1, r) } else { None };
        let right = if c + 1 < self.width { value(c + 1, r) } else { None };
        let down = if r > 0 { value(c, r - 1) } else { None };
        let up = if r + 1 < self.height { value(c, r + 1) } else { None };
        Some((
            axis(left, mid, right, self.resolution).unwrap_or(0.0),
            axis(down, mid, up, self.resolution).unwrap_or(0.0),
        ))
        .filter(|_| mid.is_some())
    }

    /// Sums `block`×`block` groups of cells into a coarser field.
    ///
    /// Each coarse value is the mean over the observed fine cells times the
    /// fraction of the block that was observed, so Σ value × area is
    /// preserved. Blocks with no observed cell are `None`.
    pub fn coarsen(&self, block: usize) -> DiffField {
        let block = block.max(1);
        if block == 1 {
            return self.clone();
        }
        let width = self.width.div_ceil(block);
        let height = self.height.div_ceil(block);
        let mut values = Vec::with_capacity(width * height);
        for br in 0..height {
            for bc in 0..width {
                let mut sum = 0.0;
                let mut seen = 0usize;
                for r in br * block..((br + 1) * block).min(self.height) {
                    for c in bc * block..((bc + 1) * block).min(self.width) {
                        if let Some(v) = self.values[r * self.width + c] {
                            sum += v;
                            seen += 1;
                        }
                    }
                }
                values.push((seen > 0).then(|| sum / (block * block) as f64));
            }
        }
        // Coarse cell centers sit at the middle of each full block.
        let shift = 0.5 * (block as f64 - 1.0) * self.resolution;
        DiffField {
            width,
            height,
            resolution: self.resolution * block as f64,
            origin: (self.origin.0 + shift, self.origin.1 + shift),
            values,
        }
    }
}

/// Per-cell `live − design`.
pub fn diff_to_design(live: &HeightMap, design: &HeightMap) -> Result<DiffField> {
    if !live.same_geometry(design) {
        return Err(GridError::Argument(format!(
            "geometry mismatch: live {}x{}@{} origin {:?} vs design {}x{}@{} origin {:?}",
            live.width,
            live.height,
            live.resolution,
            live.origin,
            design.width,
            design.height,
            design.resolution,
            design.origin
        )));
    }
    let values = live
        .cells
        .iter()
        .zip(&design.cells)
        .map(|(l, d)| l.observed.then(|| l.height - d.height))
        .collect();
    Ok(DiffField {
        width: live.width,
        height: live.height,
        resolution: live.resolution,
        origin: live.origin,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crater_map() -> HeightMap {
        // 21x21 cells at 0.05 m: bowl of radius 0.25 m with a rim out to 0.45 m.
        let n = 21;
        let res = 0.05;
        let mut heights = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let x = (c as f64 - 10.0) * res;
                let y = (r as f64 - 10.0) * res;
                let d = (x * x + y * y).sqrt();
                let h = if d < 0.25 {
                    -0.05 * (1.0 - (d / 0.25).powi(2))
                } else if d < 0.45 {
                    0.02 * (1.0 - (d - 0.25) / 0.2)
                } else {
                    0.0
                };
                heights.push(h);
            }
        }
        HeightMap::from_heights(n, n, res, (0.0, 0.0), heights).unwrap()
    }

    #[test]
    fn dominant_measurement_wins() {
        let mut map = HeightMap::new(1, 1, 1.0, (0.0, 0.0)).unwrap();
        map.kalman_update(0, 1.0, 0.01).unwrap();
        let c = map.cell(0).unwrap();
        assert!((c.height - 1.0).abs() < 1e-4);
        assert!(c.observed);
    }

    #[test]
    fn symmetric_fusion_halves_variance() {
        let cells = vec![CellState {
            height: 0.0,
            variance: 0.04,
            observed: true,
        }];
        let mut map = HeightMap::from_cells(1, 1, 1.0, (0.0, 0.0), cells).unwrap();
        map.kalman_update(0, 2.0, 0.04).unwrap();
        let c = map.cell(0).unwrap();
        assert!((c.height - 1.0).abs() < 1e-12);
        assert!((c.variance - 0.02).abs() < 1e-15);
    }

    #[test]
    fn repeated_measurements_follow_closed_form() {
        // Closed form for a static state: 1/v_k = 1/v_0 + k/r and the mean is
        // the precision-weighted average of the prior and the k measurements.
        let mut map = HeightMap::new(1, 1, 1.0, (0.0, 0.0)).unwrap();
        for _ in 0..100 {
            map.kalman_update(0, 0.5, 0.01).unwrap();
        }
        let c = map.cell(0).unwrap();
        let precision = 1.0 / PRIOR_VARIANCE + 100.0 / 0.01;
        let expected_h = (100.0 / 0.01) * 0.5 / precision;
        assert!((c.variance - 1.0 / precision).abs() < 1e-15);
        assert!((c.height - expected_h).abs() < 1e-12);
        assert!(c.variance <= 1e-4);
        assert!((c.height - 0.5).abs() < 0.01);
    }

    #[test]
    fn kalman_rejects_bad_inputs() {
        let mut map = HeightMap::new(2, 2, 1.0, (0.0, 0.0)).unwrap();
        assert!(matches!(map.kalman_update(4, 0.0, 1.0), Err(GridError::Argument(_))));
        assert!(matches!(map.kalman_update(0, 0.0, 0.0), Err(GridError::Argument(_))));
    }

    #[test]
    fn disturbance_noise_is_additive() {
        let cells = vec![
            CellState {
                height: 0.3,
                variance: 0.01,
                observed: true,
            };
            2
        ];
        let mut map = HeightMap::from_cells(2, 1, 1.0, (0.0, 0.0), cells).unwrap();
        let before = map.clone();
        map.inject_disturbance_noise(&[0, 1], 0.0).unwrap();
        assert_eq!(map, before);
        map.inject_disturbance_noise(&[0], 0.04).unwrap();
        assert!((map.cell(0).unwrap().variance - 0.05).abs() < 1e-15);
        assert_eq!(map.cell(0).unwrap().height, 0.3);
        assert_eq!(map.cell(1).unwrap().variance, 0.01);
        assert!(map.inject_disturbance_noise(&[2], 0.1).is_err());
    }

    #[test]
    fn disturbed_cell_reconverges_to_new_truth() {
        let mut map = HeightMap::new(1, 1, 1.0, (0.0, 0.0)).unwrap();
        for _ in 0..50 {
            map.kalman_update(0, 0.2, 1e-4).unwrap();
        }
        // The terrain was pushed down to 0.05 m; the filter is told so via noise.
        map.inject_disturbance_noise(&[0], 0.01).unwrap();
        let mut updates = 0;
        while (map.cell(0).unwrap().height - 0.05).abs() > 0.005 {
            map.kalman_update(0, 0.05, 1e-4).unwrap();
            updates += 1;
            assert!(updates <= 50, "did not reconverge");
        }
    }

    #[test]
    fn diff_signs_follow_crater() {
        let live = crater_map();
        let design = HeightMap::flat(21, 21, 0.05, (0.0, 0.0), 0.0).unwrap();
        let diff = diff_to_design(&live, &design).unwrap();
        let center = 10 * 21 + 10;
        assert!(diff.values[center].unwrap() < 0.0);
        let rim = 10 * 21 + 16; // 0.3 m from the center
        assert!(diff.values[rim].unwrap() > 0.0);

        let same = diff_to_design(&design, &design).unwrap();
        assert!(same.values.iter().all(|v| *v == Some(0.0)));

        let raised = HeightMap::flat(21, 21, 0.05, (0.0, 0.0), 0.1).unwrap();
        let d = diff_to_design(&raised, &design).unwrap();
        assert!(d.values.iter().all(|v| (v.unwrap() - 0.1).abs() < 1e-15));
    }

    #[test]
    fn diff_rejects_mismatched_geometry() {
        let a = HeightMap::flat(3, 3, 0.1, (0.0, 0.0), 0.0).unwrap();
        let b = HeightMap::flat(3, 3, 0.2, (0.0, 0.0), 0.0).unwrap();
        assert!(matches!(diff_to_design(&a, &b), Err(GridError::Argument(_))));
    }

    #[test]
    fn coarsen_preserves_volume() {
        let live = crater_map();
        let design = HeightMap::flat(21, 21, 0.05, (0.0, 0.0), 0.0).unwrap();
        let diff = diff_to_design(&live, &design).unwrap();
        let fine: f64 = diff.values.iter().flatten().sum::<f64>() * 0.05 * 0.05;
        let coarse = diff.coarsen(5);
        assert_eq!(coarse.width, 5);
        let area = coarse.resolution * coarse.resolution;
        let total: f64 = coarse.values.iter().flatten().sum::<f64>() * area;
        assert!((fine - total).abs() < 1e-12);
    }

    #[test]
    fn locate_and_center_agree() {
        let map = HeightMap::flat(4, 3, 0.5, (1.0, -1.0), 0.0).unwrap();
        for i in 0..map.len() {
            let (x, y) = map.center(i);
            assert_eq!(map.locate(x, y), Some(i));
        }
        assert_eq!(map.locate(0.0, 0.0), None);
    }
}
