//! Primal network simplex for balanced, uncapacitated bipartite transport.
//!
//! Used for instances too large for the dense tableau. Supply nodes are
//! `0..left`, demand nodes `left..left + right`, and every supply node has an
//! arc to every demand node with cost `cost[i * right + j]`. An artificial
//! root node joins every node so the initial tree is feasible; the leaving
//! arc rule keeps the tree strongly feasible so degenerate pivots cannot
//! cycle.

use super::TransportError;

const ROOT_SENTINEL: usize = usize::MAX;

pub struct BipartiteProblem<'a> {
    pub supply: &'a [f64],
    pub demand: &'a [f64],
    /// `supply.len() × demand.len()`, row-major.
    pub cost: &'a [f64],
}

pub struct NetworkSolution {
    /// Row-major flows, same layout as `cost`.
    pub flow: Vec<f64>,
    pub pivots: usize,
}

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// Pred arc points from the node to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
    pi: Vec<f64>,
}

struct Network<'a> {
    p: &'a BipartiteProblem<'a>,
    left: usize,
    right: usize,
    nodes: usize,
    real_arcs: usize,
    art_cost: f64,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    tree: Tree,
    zero_flow: f64,
}

impl<'a> Network<'a> {
    fn root(&self) -> usize {
        self.nodes
    }

    fn endpoints(&self, arc: usize) -> (usize, usize) {
        if arc < self.real_arcs {
            (arc / self.right, self.left + arc % self.right)
        } else {
            let u = arc - self.real_arcs;
            if u < self.left {
                (u, self.root())
            } else {
                (self.root(), u)
            }
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        if arc < self.real_arcs {
            self.p.cost[arc]
        } else if arc - self.real_arcs < self.left {
            0.0
        } else {
            self.art_cost
        }
    }

    fn reduced_cost(&self, arc: usize) -> f64 {
        let (s, t) = self.endpoints(arc);
        self.arc_cost(arc) + self.tree.pi[s] - self.tree.pi[t]
    }

    fn new(p: &'a BipartiteProblem<'a>) -> Self {
        let left = p.supply.len();
        let right = p.demand.len();
        let nodes = left + right;
        let real_arcs = left * right;
        let max_cost = p.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let art_cost = (max_cost + 1.0) * (nodes as f64 + 1.0);
        let total: f64 = p.supply.iter().sum();
        let mut flow = vec![0.0; real_arcs + nodes];
        let mut tree = Tree {
            parent: vec![ROOT_SENTINEL; nodes + 1],
            pred: vec![ROOT_SENTINEL; nodes + 1],
            up: vec![false; nodes + 1],
            depth: vec![0; nodes + 1],
            children: vec![Vec::new(); nodes + 1],
            pi: vec![0.0; nodes + 1],
        };
        for u in 0..nodes {
            let arc = real_arcs + u;
            tree.parent[u] = nodes;
            tree.pred[u] = arc;
            tree.depth[u] = 1;
            tree.children[nodes].push(u);
            if u < left {
                tree.up[u] = true;
                flow[arc] = p.supply[u];
                tree.pi[u] = 0.0;
            } else {
                tree.up[u] = false;
                flow[arc] = p.demand[u - left];
                tree.pi[u] = art_cost;
            }
        }
        let mut in_tree = vec![false; real_arcs + nodes];
        in_tree[real_arcs..].iter_mut().for_each(|s| *s = true);
        Network {
            p,
            left,
            right,
            nodes,
            real_arcs,
            art_cost,
            flow,
            in_tree,
            tree,
            zero_flow: 1e-13 * (1.0 + total),
        }
    }

    fn find_join(&self, mut a: usize, mut b: usize) -> usize {
        let t = &self.tree;
        while a != b {
            if t.depth[a] >= t.depth[b] {
                a = t.parent[a];
            } else {
                b = t.parent[b];
            }
        }
        a
    }

    /// Augments along the cycle closed by `arc` and restructures the tree.
    fn pivot(&mut self, arc: usize) -> Result<(), TransportError> {
        let (first, second) = self.endpoints(arc);
        let join = self.find_join(first, second);

        // Leaving arc: strict on the first side, non-strict on the second,
        // which keeps the tree strongly feasible.
        let mut delta = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None;
        let mut u = first;
        while u != join {
            if self.tree.up[u] {
                let d = self.flow[self.tree.pred[u]];
                if d < delta {
                    delta = d;
                    leave = Some((u, true));
                }
            }
            u = self.tree.parent[u];
        }
        let mut u = second;
        while u != join {
            if !self.tree.up[u] {
                let d = self.flow[self.tree.pred[u]];
                if d <= delta {
                    delta = d;
                    leave = Some((u, false));
                }
            }
            u = self.tree.parent[u];
        }
        let Some((out, first_side)) = leave else {
            return Err(TransportError::Internal("negative cycle without bound".into()));
        };

        if delta > 0.0 {
            self.flow[arc] += delta;
            let mut u = first;
            while u != join {
                let e = self.tree.pred[u];
                self.flow[e] += if self.tree.up[u] { -delta } else { delta };
                if self.flow[e].abs() < self.zero_flow {
                    self.flow[e] = 0.0;
                }
                u = self.tree.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.tree.pred[u];
                self.flow[e] += if self.tree.up[u] { delta } else { -delta };
                if self.flow[e].abs() < self.zero_flow {
                    self.flow[e] = 0.0;
                }
                u = self.tree.parent[u];
            }
        }

        let (stem, anchor) = if first_side { (first, second) } else { (second, first) };
        let leaving = self.tree.pred[out];
        self.in_tree[leaving] = false;
        self.flow[leaving] = 0.0;
        self.in_tree[arc] = true;

        // Reverse the path stem → out so the detached subtree hangs from
        // `anchor` through the entering arc.
        let mut new_up = self.endpoints(arc).0 == stem;
        let t = &mut self.tree;
        let old_parent = t.parent[out];
        remove_child(&mut t.children[old_parent], out);
        let mut node = stem;
        let mut new_parent = anchor;
        let mut new_pred = arc;
        loop {
            let next = t.parent[node];
            let next_pred = t.pred[node];
            let next_up = !t.up[node];
            if node != out {
                remove_child(&mut t.children[next], node);
            }
            t.parent[node] = new_parent;
            t.pred[node] = new_pred;
            t.up[node] = new_up;
            t.children[new_parent].push(node);
            if node == out {
                break;
            }
            new_parent = node;
            new_pred = next_pred;
            new_up = next_up;
            node = next;
        }
        self.refresh_subtree(stem);
        Ok(())
    }

    /// Recomputes depth and potentials below `top` from its parent.
    fn refresh_subtree(&mut self, top: usize) {
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            let p = self.tree.parent[v];
            let c = self.arc_cost(self.tree.pred[v]);
            self.tree.depth[v] = self.tree.depth[p] + 1;
            // Tree arcs have zero reduced cost.
            self.tree.pi[v] = if self.tree.up[v] {
                self.tree.pi[p] - c
            } else {
                self.tree.pi[p] + c
            };
            stack.extend_from_slice(&self.tree.children[v]);
        }
    }
}

fn remove_child(list: &mut Vec<usize>, child: usize) {
    if let Some(pos) = list.iter().position(|&c| c == child) {
        list.swap_remove(pos);
    }
}

/// Solves `min Σ cost·flow` with every supply shipped and every demand met.
///
/// Requires `Σ supply = Σ demand` up to rounding.
pub fn solve_balanced(p: &BipartiteProblem) -> Result<NetworkSolution, TransportError> {
    let left = p.supply.len();
    let right = p.demand.len();
    if p.cost.len() != left * right {
        return Err(TransportError::Dimension(format!(
            "cost has {} entries for {left}×{right}",
            p.cost.len()
        )));
    }
    if left == 0 || right == 0 {
        return Ok(NetworkSolution {
            flow: Vec::new(),
            pivots: 0,
        });
    }
    let mut net = Network::new(p);
    let arcs = net.real_arcs;
    let block = ((arcs as f64).sqrt().ceil() as usize).max(10).min(arcs);
    let scale = 1.0 + p.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    // Potentials carry the artificial cost, so the tolerance tracks both.
    let rc_eps = 1e-11 * scale + 1e-15 * net.art_cost;
    let limit = 200 * (net.nodes + 10) * (net.nodes + 10);
    let mut next = 0usize;
    let mut pivots = 0usize;
    loop {
        // Block search: scan a block at a time and take the most negative
        // reduced cost once a block has produced a candidate.
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0;
        let mut in_block = 0;
        while scanned < arcs {
            let e = next;
            next += 1;
            if next == arcs {
                next = 0;
            }
            scanned += 1;
            in_block += 1;
            if !net.in_tree[e] {
                let rc = net.reduced_cost(e);
                if rc < -rc_eps && best.is_none_or(|(_, b)| rc < b) {
                    best = Some((e, rc));
                }
            }
            if in_block == block {
                if best.is_some() {
                    break;
                }
                in_block = 0;
            }
        }
        let Some((enter, _)) = best else { break };
        net.pivot(enter)?;
        pivots += 1;
        if pivots > limit {
            return Err(TransportError::Internal(format!("network simplex exceeded {limit} pivots")));
        }
    }
    log::debug!("network simplex: {left}×{right} in {pivots} pivots");

    let leftover: f64 = net.flow[arcs..].iter().sum();
    let total: f64 = p.supply.iter().sum();
    if leftover > 1e-9 * (1.0 + total) {
        return Err(TransportError::Internal(format!(
            "artificial flow {leftover} remains; supplies and demands are unbalanced"
        )));
    }
    net.flow.truncate(arcs);
    Ok(NetworkSolution {
        flow: net.flow,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost_of(p: &BipartiteProblem, s: &NetworkSolution) -> f64 {
        p.cost.iter().zip(&s.flow).map(|(c, f)| c * f).sum()
    }

    #[test]
    fn two_by_two_prefers_diagonal() {
        let p = BipartiteProblem {
            supply: &[1.0, 2.0],
            demand: &[1.0, 2.0],
            cost: &[0.0, 1.0, 1.0, 0.0],
        };
        let s = solve_balanced(&p).unwrap();
        assert_eq!(s.flow, vec![1.0, 0.0, 0.0, 2.0]);
        assert_eq!(cost_of(&p, &s), 0.0);
    }

    #[test]
    fn forced_cross_shipment() {
        let p = BipartiteProblem {
            supply: &[3.0, 1.0],
            demand: &[2.0, 2.0],
            cost: &[1.0, 5.0, 2.0, 1.0],
        };
        let s = solve_balanced(&p).unwrap();
        // Source 0 must ship 1 to sink 1.
        assert!((cost_of(&p, &s) - (2.0 + 5.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn flows_conserve() {
        let supply = [0.3, 0.7, 1.1, 0.4];
        let demand = [1.0, 0.5, 1.0];
        let cost: Vec<f64> = (0..12).map(|k| ((k * 7919) % 13) as f64 * 0.37).collect();
        let p = BipartiteProblem {
            supply: &supply,
            demand: &demand,
            cost: &cost,
        };
        let s = solve_balanced(&p).unwrap();
        for i in 0..4 {
            let row: f64 = s.flow[i * 3..i * 3 + 3].iter().sum();
            assert!((row - supply[i]).abs() < 1e-12);
        }
        for j in 0..3 {
            let col: f64 = (0..4).map(|i| s.flow[i * 3 + j]).sum();
            assert!((col - demand[j]).abs() < 1e-12);
        }
        assert!(s.flow.iter().all(|&f| f >= 0.0));
    }

    #[test]
    fn unbalanced_input_is_reported() {
        let p = BipartiteProblem {
            supply: &[2.0],
            demand: &[1.0],
            cost: &[1.0],
        };
        assert!(solve_balanced(&p).is_err());
    }
}
