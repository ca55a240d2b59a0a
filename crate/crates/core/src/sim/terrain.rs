//! Mass-conserving terrain edits: blade cut and fill, drag-mat smoothing and
//! angle-of-repose relaxation.

use crate::gridmap::HeightMap;
use crate::triplets::Pose;

/// Cells whose centers lie in a trapezoid ahead of `pose`: `along` in
/// `[a0, a1]` and `|across|` at most the half width interpolated linearly
/// from `hw0` at `a0` to `hw1` at `a1`. Row-major order.
pub fn cells_in_trapezoid(map: &HeightMap, pose: &Pose, a0: f64, a1: f64, hw0: f64, hw1: f64) -> Vec<usize> {
    let (s, c) = pose.heading.sin_cos();
    let corners = [(a0, hw0), (a0, -hw0), (a1, hw1), (a1, -hw1)].map(|(a, w)| (pose.x + a * c - w * s, pose.y + a * s + w * c));
    let res = map.resolution();
    let (ox, oy) = map.origin();
    let lo = |v: f64, o: f64| (((v - o) / res).floor() as i64).max(0);
    let hi = |v: f64, o: f64, n: usize| (((v - o) / res).ceil() as i64).min(n as i64 - 1);
    let xmin = corners.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = corners.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ymin = corners.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = corners.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    let span = a1 - a0;
    // Absorbs rounding in cell centers that sit exactly on an edge.
    let eps = 1e-9 * res;
    for row in lo(ymin, oy)..=hi(ymax, oy, map.height()) {
        for col in lo(xmin, ox)..=hi(xmax, ox, map.width()) {
            let i = map.index(col as usize, row as usize);
            let (x, y) = map.center(i);
            let (dx, dy) = (x - pose.x, y - pose.y);
            let along = dx * c + dy * s;
            let across = -dx * s + dy * c;
            if along < a0 - eps || along > a1 + eps {
                continue;
            }
            let t = if span > 0.0 { (along - a0) / span } else { 0.0 };
            if across.abs() <= hw0 + t * (hw1 - hw0) + eps {
                out.push(i);
            }
        }
    }
    out
}

/// Cells swept by a straight blade of `length` moving from `from` to `to`:
/// centers with along-track position in `(0, |to − from|]` measured from
/// `from`, so consecutive sweeps never count a cell twice.
pub fn swept_cells(map: &HeightMap, from: (f64, f64), to: (f64, f64), length: f64) -> Vec<usize> {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let dist = dx.hypot(dy);
    if dist == 0.0 {
        return Vec::new();
    }
    let pose = Pose {
        x: from.0,
        y: from.1,
        heading: dy.atan2(dx),
    };
    let half = 0.5 * length;
    let (s, c) = pose.heading.sin_cos();
    let eps = 1e-9 * map.resolution();
    cells_in_trapezoid(map, &pose, 0.0, dist, half, half)
        .into_iter()
        .filter(|&i| {
            let (x, y) = map.center(i);
            (x - from.0) * c + (y - from.1) * s > eps
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BladeResult {
    pub cut: f64,
    pub filled: f64,
}

/// One blade contact over `swath` at absolute `blade_height`.
///
/// Material above the blade is taken into `carried` until `capacity` is
/// reached; the rest flows over the blade and stays. Cells below the blade
/// are then filled toward the blade height from what is carried.
pub fn blade_cut(map: &mut HeightMap, swath: &[usize], blade_height: f64, carried: &mut f64, capacity: f64) -> BladeResult {
    let area = map.cell_area();
    let mut result = BladeResult::default();
    for &i in swath {
        let h = map.cells()[i].height;
        if h > blade_height {
            let room = (capacity - *carried).max(0.0);
            let take = ((h - blade_height) * area).min(room);
            if take > 0.0 {
                map.add_height(i, -take / area);
                *carried += take;
                result.cut += take;
            }
        }
    }
    for &i in swath {
        let h = map.cells()[i].height;
        if h < blade_height && *carried > 0.0 {
            let give = ((blade_height - h) * area).min(*carried);
            map.add_height(i, give / area);
            *carried -= give;
            result.filled += give;
        }
    }
    if *carried < 1e-15 {
        *carried = 0.0;
    }
    result
}

/// Spreads `volume` evenly over `cells`.
pub fn dump(map: &mut HeightMap, cells: &[usize], volume: f64) {
    if cells.is_empty() || volume == 0.0 {
        return;
    }
    let dh = volume / (cells.len() as f64 * map.cell_area());
    for &i in cells {
        map.add_height(i, dh);
    }
}

const NEIGHBORS8: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// One symmetric 3×3 averaging pass restricted to `cells`.
///
/// Each pair of 8-neighbors inside the patch exchanges `(h_j − h_i) / 9`,
/// which is the plain 3×3 mean for interior cells and conserves the
/// patch's total height exactly at its boundary.
pub fn drag_mat(map: &mut HeightMap, cells: &[usize]) {
    if cells.is_empty() {
        return;
    }
    let (w, h) = (map.width() as i64, map.height() as i64);
    let mut in_patch = std::collections::HashSet::with_capacity(cells.len());
    in_patch.extend(cells.iter().copied());
    let old: Vec<f64> = cells.iter().map(|&i| map.cells()[i].height).collect();
    let height_of = |i: usize, map: &HeightMap| map.cells()[i].height;
    let mut deltas = vec![0.0; cells.len()];
    for (k, &i) in cells.iter().enumerate() {
        let (c, r) = map.col_row(i);
        let mut acc = 0.0;
        for (dc, dr) in NEIGHBORS8 {
            let (nc, nr) = (c as i64 + dc, r as i64 + dr);
            if nc < 0 || nr < 0 || nc >= w || nr >= h {
                continue;
            }
            let j = map.index(nc as usize, nr as usize);
            if in_patch.contains(&j) {
                acc += height_of(j, map) - old[k];
            }
        }
        deltas[k] = acc / 9.0;
    }
    for (&i, d) in cells.iter().zip(deltas) {
        map.add_height(i, d);
    }
}

/// Slope-limits the box `[c0, c1] × [r0, r1]` so no 4-neighbor pair differs
/// by more than `tan(repose) × resolution`, moving half of each excess
/// downhill. Stops when a sweep finds nothing to move or after `max_sweeps`.
/// Returns the cells that changed.
pub fn relax(map: &mut HeightMap, box_: (usize, usize, usize, usize), repose_deg: f64, max_sweeps: usize) -> Vec<usize> {
    let (c0, r0, c1, r1) = box_;
    let c1 = c1.min(map.width() - 1);
    let r1 = r1.min(map.height() - 1);
    let limit = repose_deg.to_radians().tan() * map.resolution();
    let mut changed = std::collections::BTreeSet::new();
    for _ in 0..max_sweeps {
        let mut moved = false;
        for r in r0..=r1 {
            for c in c0..=c1 {
                let i = map.index(c, r);
                for (nc, nr) in [(c + 1, r), (c, r + 1)] {
                    if nc > c1 || nr > r1 {
                        continue;
                    }
                    let j = map.index(nc, nr);
                    let diff = map.cells()[i].height - map.cells()[j].height;
                    if diff.abs() > limit * (1.0 + 1e-9) {
                        let m = 0.5 * (diff.abs() - limit) * diff.signum();
                        map.add_height(i, -m);
                        map.add_height(j, m);
                        changed.insert(i);
                        changed.insert(j);
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            break;
        }
    }
    changed.into_iter().collect()
}

/// Grid box around a set of cells, grown by `margin` cells.
pub fn bounding_box(map: &HeightMap, cells: &[usize], margin: usize) -> Option<(usize, usize, usize, usize)> {
    let mut it = cells.iter().map(|&i| map.col_row(i));
    let first = it.next()?;
    let (mut c0, mut r0, mut c1, mut r1) = (first.0, first.1, first.0, first.1);
    for (c, r) in it {
        c0 = c0.min(c);
        r0 = r0.min(r);
        c1 = c1.max(c);
        r1 = r1.max(r);
    }
    Some((
        c0.saturating_sub(margin),
        r0.saturating_sub(margin),
        (c1 + margin).min(map.width() - 1),
        (r1 + margin).min(map.height() - 1),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, res: f64, f: impl Fn(usize, usize) -> f64) -> HeightMap {
        let heights = (0..n * n).map(|i| f(i % n, i / n)).collect();
        HeightMap::from_heights(n, n, res, (0.0, 0.0), heights).unwrap()
    }

    #[test]
    fn raised_blade_changes_nothing() {
        let mut m = grid(5, 0.1, |c, r| (c + r) as f64 * 0.01);
        let before = m.clone();
        let mut carried = 0.0;
        let all: Vec<usize> = (0..25).collect();
        let res = blade_cut(&mut m, &all, 1.0, &mut carried, 0.01);
        assert_eq!(res, BladeResult::default());
        assert_eq!(m, before);
    }

    #[test]
    fn cut_respects_capacity() {
        // 0.05 m over a 0.25 m cell is 0.003125 m³; capacity 0.003.
        let mut m = HeightMap::from_heights(1, 1, 0.25, (0.0, 0.0), vec![0.05]).unwrap();
        let mut carried = 0.0;
        blade_cut(&mut m, &[0], 0.0, &mut carried, 0.003);
        assert!((carried - 0.003).abs() < 1e-15);
        assert!((m.cells()[0].height - 0.000125 / 0.0625).abs() < 1e-12);
    }

    #[test]
    fn cut_then_fill_conserves() {
        let mut m = grid(4, 0.05, |c, _| if c < 2 { 0.03 } else { -0.02 });
        let v0 = m.total_volume();
        let mut carried = 0.0;
        let all: Vec<usize> = (0..16).collect();
        blade_cut(&mut m, &all, 0.0, &mut carried, 1.0);
        assert!((m.total_volume() + carried - v0).abs() < 1e-15);
        // The holes take 0.02 of the 0.03 cut per column pair.
        assert!(m.heights().all(|h| h.abs() < 1e-12));
        assert!((carried - 0.01 * 8.0 * 0.0025).abs() < 1e-15);
    }

    #[test]
    fn grazing_flat_ground_is_noop() {
        let mut m = grid(6, 0.05, |_, _| 0.0);
        let swath = swept_cells(&m, (0.0, 0.1), (0.25, 0.1), 0.25);
        let mut carried = 0.0;
        blade_cut(&mut m, &swath, 0.0, &mut carried, 0.01);
        assert!(m.heights().all(|h| h == 0.0));
    }

    #[test]
    fn swept_cells_do_not_double_count() {
        let m = grid(20, 0.05, |_, _| 0.0);
        let a = swept_cells(&m, (0.1, 0.5), (0.35, 0.5), 0.25);
        let b = swept_cells(&m, (0.35, 0.5), (0.6, 0.5), 0.25);
        assert!(a.iter().all(|i| !b.contains(i)));
        assert_eq!(a.len(), 5 * 5);
    }

    #[test]
    fn relax_limits_slope() {
        let mut m = grid(9, 0.05, |c, r| if c == 4 && r == 4 { 0.5 } else { 0.0 });
        let v0 = m.total_volume();
        relax(&mut m, (0, 0, 8, 8), 31.0, 500);
        assert!((m.total_volume() - v0).abs() < 1e-12);
        let limit = 31f64.to_radians().tan() * 0.05;
        for r in 0..9 {
            for c in 0..8 {
                let d = m.cells()[m.index(c, r)].height - m.cells()[m.index(c + 1, r)].height;
                assert!(d.abs() <= limit * (1.0 + 1e-6));
            }
        }
    }

    proptest! {
        #[test]
        fn drag_mat_conserves_and_smooths(
            hs in proptest::collection::vec(-0.1f64..0.1, 36),
            mask in proptest::collection::vec(any::<bool>(), 36),
        ) {
            let mut m = HeightMap::from_heights(6, 6, 0.05, (0.0, 0.0), hs).unwrap();
            let cells: Vec<usize> = (0..36).filter(|&i| mask[i]).collect();
            prop_assume!(!cells.is_empty());
            let stats = |m: &HeightMap| {
                let v: Vec<f64> = cells.iter().map(|&i| m.cells()[i].height).collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                (mean, v.iter().map(|h| (h - mean).powi(2)).sum::<f64>())
            };
            let (mean0, var0) = stats(&m);
            drag_mat(&mut m, &cells);
            let (mean1, var1) = stats(&m);
            prop_assert!((mean1 - mean0).abs() < 1e-14);
            prop_assert!(var1 <= var0 + 1e-15);
        }

        #[test]
        fn blade_and_relax_conserve(
            hs in proptest::collection::vec(-0.1f64..0.1, 64),
            level in -0.05f64..0.05,
            cap in 0.0f64..0.01,
        ) {
            let mut m = HeightMap::from_heights(8, 8, 0.05, (0.0, 0.0), hs).unwrap();
            let v0 = m.total_volume();
            let mut carried = 0.0;
            let swath = swept_cells(&m, (0.0, 0.2), (0.35, 0.2), 0.25);
            blade_cut(&mut m, &swath, level, &mut carried, cap);
            prop_assert!(carried >= 0.0 && carried <= cap + 1e-15);
            let dst = m.index(7, 4);
            dump(&mut m, &[dst], carried);
            relax(&mut m, (0, 0, 7, 7), 31.0, 50);
            prop_assert!((m.total_volume() - v0).abs() < 1e-12);
        }
    }
}
