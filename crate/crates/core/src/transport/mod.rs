//! Optimal transport of excess volume from source nodes to sink nodes.

mod assemble;
pub mod network;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LpError, LpStatus, DEFAULT_TOL};
use crate::nodes::NodeSet;

pub use assemble::{assemble_bigm_milp, assemble_case_lp, sink_sum_block, source_sum_block, BigMMilp};

#[derive(Debug, Error, PartialEq)]
pub enum TransportError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("internal solver error: {0}")]
    Internal(String),
}

/// Planar Euclidean distances, `n × m` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub m: usize,
    pub entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }
}

pub fn distance_matrix(set: &NodeSet) -> DistanceMatrix {
    let (n, m) = (set.sources.len(), set.sinks.len());
    let mut entries = Vec::with_capacity(n * m);
    for s in &set.sources {
        for t in &set.sinks {
            entries.push((s.x - t.x).hypot(s.y - t.y));
        }
    }
    DistanceMatrix { n, m, entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseKind {
    /// More sink volume than source volume: every source is exhausted.
    #[serde(rename = "case1")]
    SinkExcess,
    /// At least as much source as sink volume: every sink is filled.
    #[serde(rename = "case2")]
    SourceExcess,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeCase {
    pub kind: CaseKind,
    /// 0 for case 1, 1 for case 2.
    pub b: u8,
    /// Larger of the two volume totals, m³.
    pub big_m: f64,
}

pub fn select_case(set: &NodeSet) -> VolumeCase {
    let src = set.source_volume();
    let snk = set.sink_volume();
    let kind = if src < snk { CaseKind::SinkExcess } else { CaseKind::SourceExcess };
    VolumeCase {
        kind,
        b: match kind {
            CaseKind::SinkExcess => 0,
            CaseKind::SourceExcess => 1,
        },
        big_m: src.max(snk),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Dense simplex up to [`DENSE_LIMIT`] variables, network simplex above.
    #[default]
    Auto,
    Dense,
    Network,
}

/// Largest `n·m` that `SolverChoice::Auto` hands to the dense simplex.
pub const DENSE_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Moves at or below this volume are dropped, m³.
    pub volume_epsilon: f64,
    pub tol: f64,
    pub solver: SolverChoice,
    /// Also solve both big-M branches and fail if they disagree with the
    /// case LP.
    pub verify_branches: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            volume_epsilon: 1e-9,
            tol: DEFAULT_TOL,
            solver: SolverChoice::Auto,
            verify_branches: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move {
    pub source: usize,
    pub sink: usize,
    pub volume: f64,
    pub from: (f64, f64),
    pub to: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub case: VolumeCase,
    pub n: usize,
    pub m: usize,
    /// `Σ Π_ij D_ij` over the returned moves, m³·m.
    pub objective: f64,
    pub moves: Vec<Move>,
}

impl TransportPlan {
    pub fn empty(case: VolumeCase, n: usize, m: usize) -> Self {
        TransportPlan {
            case,
            n,
            m,
            objective: 0.0,
            moves: Vec::new(),
        }
    }

    /// Dense `n × m` Π, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let mut pi = vec![0.0; self.n * self.m];
        for mv in &self.moves {
            pi[mv.source * self.m + mv.sink] += mv.volume;
        }
        pi
    }

    pub fn moved_volume(&self) -> f64 {
        self.moves.iter().map(|m| m.volume).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PlanRecord::from(self)).expect("plans always serialize")
    }
}

#[derive(Serialize, Deserialize)]
pub struct MoveRecord {
    pub src: [f64; 2],
    pub dst: [f64; 2],
    pub volume: f64,
}

#[derive(Serialize, Deserialize)]
pub struct PlanRecord {
    pub case: CaseKind,
    pub objective: f64,
    pub moves: Vec<MoveRecord>,
}

impl From<&TransportPlan> for PlanRecord {
    fn from(p: &TransportPlan) -> Self {
        PlanRecord {
            case: p.case.kind,
            objective: p.objective,
            moves: p
                .moves
                .iter()
                .map(|m| MoveRecord {
                    src: [m.from.0, m.from.1],
                    dst: [m.to.0, m.to.1],
                    volume: m.volume,
                })
                .collect(),
        }
    }
}

/// Solves the case LP with the dense simplex and returns the row-major Π.
fn solve_dense(set: &NodeSet, d: &DistanceMatrix, case: &VolumeCase, tol: f64) -> Result<Vec<f64>, TransportError> {
    let problem = assemble_case_lp(set, d, case)?;
    let sol = lp::solve(&problem, tol)?;
    if sol.status != LpStatus::Optimal {
        return Err(TransportError::Internal(format!("case LP reported {:?}", sol.status)));
    }
    Ok(sol.x)
}

/// Balances the problem with a zero-cost dummy node and solves it with the
/// network simplex.
fn solve_network(set: &NodeSet, d: &DistanceMatrix, case: &VolumeCase) -> Result<Vec<f64>, TransportError> {
    let (n, m) = (d.n, d.m);
    let mut supply = set.source_volumes();
    let mut demand = set.sink_volumes();
    let gap = (set.source_volume() - set.sink_volume()).abs();
    let mut cost;
    match case.kind {
        CaseKind::SourceExcess => {
            demand.push(gap);
            cost = Vec::with_capacity(n * (m + 1));
            for i in 0..n {
                cost.extend_from_slice(&d.entries[i * m..(i + 1) * m]);
                cost.push(0.0);
            }
        }
        CaseKind::SinkExcess => {
            supply.push(gap);
            cost = d.entries.clone();
            cost.extend(std::iter::repeat_n(0.0, m));
        }
    }
    // Totals must agree bit for bit for the tree start to be balanced.
    let s_total: f64 = supply.iter().sum();
    let d_total: f64 = demand.iter().sum();
    let last = demand.len() - 1;
    match case.kind {
        CaseKind::SourceExcess => demand[last] = (demand[last] + (s_total - d_total)).max(0.0),
        CaseKind::SinkExcess => {
            let l = supply.len() - 1;
            supply[l] = (supply[l] + (d_total - s_total)).max(0.0);
        }
    }
    let problem = network::BipartiteProblem {
        supply: &supply,
        demand: &demand,
        cost: &cost,
    };
    let sol = network::solve_balanced(&problem)?;
    let width = demand.len();
    let mut pi = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            pi[i * m + j] = sol.flow[i * width + j];
        }
    }
    Ok(pi)
}

/// Minimum-work transport plan between the node sets.
pub fn solve_transport(set: &NodeSet, options: &TransportOptions) -> Result<TransportPlan, TransportError> {
    let case = select_case(set);
    let (n, m) = (set.sources.len(), set.sinks.len());
    if set.is_empty() {
        return Ok(TransportPlan::empty(case, n, m));
    }
    let d = distance_matrix(set);
    let dense = match options.solver {
        SolverChoice::Dense => true,
        SolverChoice::Network => false,
        SolverChoice::Auto => n * m <= DENSE_LIMIT,
    };
    let pi = if dense {
        solve_dense(set, &d, &case, options.tol)?
    } else {
        solve_network(set, &d, &case)?
    };

    let mut moves = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let v = pi[i * m + j];
            if v > options.volume_epsilon {
                let (s, t) = (&set.sources[i], &set.sinks[j]);
                moves.push(Move {
                    source: i,
                    sink: j,
                    volume: v,
                    from: (s.x, s.y),
                    to: (t.x, t.y),
                });
            }
        }
    }
    let objective = moves.iter().map(|mv| mv.volume * d.get(mv.source, mv.sink)).sum();
    let plan = TransportPlan {
        case,
        n,
        m,
        objective,
        moves,
    };

    if options.verify_branches {
        let milp = assemble_bigm_milp(set, &d)?;
        let Some((b, best)) = milp.solve_exhaustive(options.tol)? else {
            return Err(TransportError::Internal("both big-M branches infeasible".into()));
        };
        let scale = 1e-6 * (1.0 + objective.abs());
        if (best.objective - objective).abs() > scale {
            return Err(TransportError::Internal(format!(
                "big-M branch b={b} gives {} against case LP {objective}",
                best.objective
            )));
        }
    }
    Ok(plan)
}
