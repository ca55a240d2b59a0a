//! Source and sink node extraction from a height difference field.

use serde::{Deserialize, Serialize};

use crate::gridmap::DiffField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Source,
    Sink,
}

/// A point mass of excess (source) or missing (sink) material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
    /// m³, always positive.
    pub volume: f64,
    pub kind: NodeKind,
    /// Radians; `None` until assigned.
    pub heading: Option<f64>,
}

impl Node {
    pub fn source(x: f64, y: f64, volume: f64) -> Self {
        Node {
            x,
            y,
            volume,
            kind: NodeKind::Source,
            heading: None,
        }
    }

    pub fn sink(x: f64, y: f64, volume: f64) -> Self {
        Node {
            x,
            y,
            volume,
            kind: NodeKind::Sink,
            heading: None,
        }
    }

    pub fn distance(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeSet {
    pub sources: Vec<Node>,
    pub sinks: Vec<Node>,
}

impl NodeSet {
    pub fn new(sources: Vec<Node>, sinks: Vec<Node>) -> Self {
        NodeSet { sources, sinks }
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty() || self.sinks.is_empty()
    }

    pub fn source_volume(&self) -> f64 {
        self.sources.iter().map(|n| n.volume).sum()
    }

    pub fn sink_volume(&self) -> f64 {
        self.sinks.iter().map(|n| n.volume).sum()
    }

    pub fn source_volumes(&self) -> Vec<f64> {
        self.sources.iter().map(|n| n.volume).collect()
    }

    pub fn sink_volumes(&self) -> Vec<f64> {
        self.sinks.iter().map(|n| n.volume).collect()
    }

    /// Volume-weighted centroid of the sinks.
    pub fn sink_centroid(&self) -> Option<(f64, f64)> {
        let total = self.sink_volume();
        (total > 0.0).then(|| {
            let x = self.sinks.iter().map(|n| n.x * n.volume).sum::<f64>() / total;
            let y = self.sinks.iter().map(|n| n.y * n.volume).sum::<f64>() / total;
            (x, y)
        })
    }

    /// Checks that every volume is finite and strictly positive and every
    /// node carries the kind of the list it sits in.
    pub fn validate(&self) -> Result<(), String> {
        for (list, kind, name) in [
            (&self.sources, NodeKind::Source, "source"),
            (&self.sinks, NodeKind::Sink, "sink"),
        ] {
            for (i, n) in list.iter().enumerate() {
                if !(n.volume > 0.0) || !n.volume.is_finite() {
                    return Err(format!("{name} {i} has non-positive volume {}", n.volume));
                }
                if !n.x.is_finite() || !n.y.is_finite() {
                    return Err(format!("{name} {i} has non-finite coordinates"));
                }
                if n.kind != kind {
                    return Err(format!("{name} {i} is tagged {:?}", n.kind));
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    x: f64,
    y: f64,
    v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heading: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeSetRecord {
    sources: Vec<NodeRecord>,
    sinks: Vec<NodeRecord>,
}

impl NodeSet {
    /// `{"sources":[{"x":..,"y":..,"v":..}],"sinks":[...]}`.
    pub fn to_json(&self) -> String {
        let rec = |n: &Node| NodeRecord {
            x: n.x,
            y: n.y,
            v: n.volume,
            heading: n.heading,
        };
        let record = NodeSetRecord {
            sources: self.sources.iter().map(rec).collect(),
            sinks: self.sinks.iter().map(rec).collect(),
        };
        serde_json::to_string_pretty(&record).expect("node sets always serialize")
    }

    pub fn from_json(text: &str) -> Result<NodeSet, String> {
        let record: NodeSetRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let build = |r: &NodeRecord, kind| Node {
            x: r.x,
            y: r.y,
            volume: r.v,
            kind,
            heading: r.heading,
        };
        let set = NodeSet {
            sources: record.sources.iter().map(|r| build(r, NodeKind::Source)).collect(),
            sinks: record.sinks.iter().map(|r| build(r, NodeKind::Sink)).collect(),
        };
        set.validate()?;
        Ok(set)
    }
}

/// Cells above `+threshold` become sources and cells below `−threshold`
/// become sinks, each carrying `|diff| × resolution²` of volume.
///
/// Nodes keep row-major cell order. Unobserved cells are skipped.
pub fn extract_nodes(diff: &DiffField, height_threshold: f64) -> NodeSet {
    assert!(height_threshold >= 0.0, "height threshold must be non-negative");
    let area = diff.resolution * diff.resolution;
    let mut set = NodeSet::default();
    for (i, v) in diff.values.iter().enumerate() {
        let Some(v) = *v else { continue };
        let (x, y) = diff.center(i);
        if v > height_threshold {
            set.sources.push(Node::source(x, y, v * area));
        } else if v < -height_threshold {
            set.sinks.push(Node::sink(x, y, -v * area));
        }
    }
    set
}

/// Sets each node's heading to the downhill direction of `diff` at its cell.
///
/// Nodes on a flat patch, or off the field, keep `None`.
pub fn assign_headings(set: &mut NodeSet, diff: &DiffField) {
    for node in set.sources.iter_mut().chain(set.sinks.iter_mut()) {
        node.heading = diff
            .locate(node.x, node.y)
            .and_then(|i| diff.gradient(i))
            .filter(|(gx, gy)| gx.hypot(*gy) > 1e-12)
            .map(|(gx, gy)| (-gy).atan2(-gx));
    }
}

/// Smallest absolute difference between two angles, radians.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Greedy thinning of the sources.
///
/// Sources are visited in descending volume order (ties by index). A source
/// is dropped when an already kept source lies closer than `min_distance`
/// with a heading within `heading_threshold`; its volume is added to the
/// nearest such source. The heading test passes when either heading is
/// unknown. Kept sources retain their original relative order; sinks are
/// untouched.
pub fn decimate_sources(set: &NodeSet, min_distance: f64, heading_threshold: f64) -> NodeSet {
    assert!(min_distance >= 0.0, "min_distance must be non-negative");
    let n = set.sources.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        set.sources[b]
            .volume
            .partial_cmp(&set.sources[a].volume)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let heading_close = |a: &Node, b: &Node| match (a.heading, b.heading) {
        (Some(ha), Some(hb)) => angle_diff(ha, hb) <= heading_threshold,
        _ => true,
    };
    let mut kept: Vec<usize> = Vec::new();
    let mut volume: Vec<f64> = set.sources.iter().map(|s| s.volume).collect();
    for &i in &order {
        let node = &set.sources[i];
        let absorber = kept
            .iter()
            .copied()
            .filter(|&k| {
                let other = &set.sources[k];
                node.distance(other) < min_distance && heading_close(node, other)
            })
            .min_by(|&a, &b| {
                node.distance(&set.sources[a])
                    .partial_cmp(&node.distance(&set.sources[b]))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
        match absorber {
            Some(k) => {
                volume[k] += volume[i];
                volume[i] = 0.0;
            }
            None => kept.push(i),
        }
    }
    kept.sort_unstable();
    NodeSet {
        sources: kept
            .into_iter()
            .map(|i| Node {
                volume: volume[i],
                ..set.sources[i]
            })
            .collect(),
        sinks: set.sinks.clone(),
    }
}
