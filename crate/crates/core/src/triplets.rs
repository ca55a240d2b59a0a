//! Push maneuvers derived from transport moves.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::transport::TransportPlan;

pub const DEFAULT_OFFSET_DISTANCE: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Offset, source and sink waypoints sharing one heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportTriplet {
    pub offset: Pose,
    pub source: Pose,
    pub sink: Pose,
    pub volume: f64,
}

impl TransportTriplet {
    /// Returns `None` when source and sink coincide.
    pub fn new(source: (f64, f64), sink: (f64, f64), volume: f64, offset_distance: f64) -> Option<Self> {
        let (dx, dy) = (sink.0 - source.0, sink.1 - source.1);
        if dx == 0.0 && dy == 0.0 {
            return None;
        }
        let heading = dy.atan2(dx);
        let (s, c) = heading.sin_cos();
        let pose = |x, y| Pose { x, y, heading };
        Some(TransportTriplet {
            offset: pose(source.0 - offset_distance * c, source.1 - offset_distance * s),
            source: pose(source.0, source.1),
            sink: pose(sink.0, sink.1),
            volume,
        })
    }

    pub fn push_length(&self) -> f64 {
        (self.sink.x - self.source.x).hypot(self.sink.y - self.source.y)
    }
}

/// One triplet per plan move, in move order. Zero-length moves are skipped.
pub fn build_triplets(plan: &TransportPlan, offset_distance: f64) -> Vec<TransportTriplet> {
    assert!(offset_distance > 0.0, "offset distance must be positive");
    plan.moves
        .iter()
        .filter_map(|mv| {
            let t = TransportTriplet::new(mv.from, mv.to, mv.volume, offset_distance);
            if t.is_none() {
                log::warn!("skipping zero-length move {} -> {}", mv.source, mv.sink);
            }
            t
        })
        .collect()
}

/// Angle of `p` about `center` in `[0, 2π)`, counterclockwise from +x.
fn polar(p: &Pose, center: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (p.x - center.0, p.y - center.1);
    let a = dy.atan2(dx);
    (if a < 0.0 { a + TAU } else { a }, dx.hypot(dy))
}

/// Stable sort by source angle about `center`, counterclockwise starting at
/// +x, ties by distance from `center`.
pub fn order_radially(triplets: &[TransportTriplet], center: (f64, f64)) -> Vec<TransportTriplet> {
    let mut keyed: Vec<((f64, f64), TransportTriplet)> =
        triplets.iter().map(|t| (polar(&t.source, center), *t)).collect();
    keyed.sort_by(|(a, _), (b, _)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keyed.into_iter().map(|(_, t)| t).collect()
}

#[derive(Serialize, Deserialize)]
pub struct TripletRecord {
    pub offset: [f64; 2],
    pub src: [f64; 2],
    pub dst: [f64; 2],
    pub heading: f64,
    pub volume: f64,
}

impl From<&TransportTriplet> for TripletRecord {
    fn from(t: &TransportTriplet) -> Self {
        TripletRecord {
            offset: [t.offset.x, t.offset.y],
            src: [t.source.x, t.source.y],
            dst: [t.sink.x, t.sink.y],
            heading: t.source.heading,
            volume: t.volume,
        }
    }
}

pub fn triplets_to_json(triplets: &[TransportTriplet]) -> String {
    let records: Vec<TripletRecord> = triplets.iter().map(TripletRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("triplets always serialize")
}
