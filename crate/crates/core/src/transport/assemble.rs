//! Constraint assembly for the case LP and the big-M MILP.

use super::{CaseKind, DistanceMatrix, TransportError, VolumeCase};
use crate::lp::{self, LpSolution, Matrix, StandardFormLP};
use crate::nodes::NodeSet;

/// `n × nm`: row `i` sums the transport out of source `i`.
pub fn source_sum_block(n: usize, m: usize) -> Matrix {
    let mut b = Matrix::zeros(n, n * m);
    for i in 0..n {
        for j in 0..m {
            b[(i, i * m + j)] = 1.0;
        }
    }
    b
}

/// `m × nm`: row `j` sums the transport into sink `j`.
pub fn sink_sum_block(n: usize, m: usize) -> Matrix {
    let mut b = Matrix::zeros(m, n * m);
    for i in 0..n {
        for j in 0..m {
            b[(j, i * m + j)] = 1.0;
        }
    }
    b
}

fn check_dims(set: &NodeSet, d: &DistanceMatrix) -> Result<(usize, usize), TransportError> {
    let (n, m) = (set.sources.len(), set.sinks.len());
    if d.n != n || d.m != m {
        return Err(TransportError::Dimension(format!(
            "distance matrix is {}×{}, node set is {n}×{m}",
            d.n, d.m
        )));
    }
    Ok((n, m))
}

/// Block standard form of the two-case transport LP over the row-major
/// vectorization of Π.
///
/// Case 1 bounds sink inflow by `v_x` and exhausts every source; case 2
/// bounds source outflow by `v_y` and fills every sink.
pub fn assemble_case_lp(set: &NodeSet, d: &DistanceMatrix, case: &VolumeCase) -> Result<StandardFormLP, TransportError> {
    let (n, m) = check_dims(set, d)?;
    let nm = n * m;
    let neg_id = Matrix::identity(nm).scaled(-1.0);
    let by_source = source_sum_block(n, m);
    let by_sink = sink_sum_block(n, m);
    let v_y = set.source_volumes();
    let v_x = set.sink_volumes();
    let (g, h, a, b) = match case.kind {
        CaseKind::SinkExcess => (
            Matrix::vstack(&[&neg_id, &by_sink]),
            [vec![0.0; nm], v_x].concat(),
            by_source,
            v_y,
        ),
        CaseKind::SourceExcess => (
            Matrix::vstack(&[&neg_id, &by_source]),
            [vec![0.0; nm], v_y].concat(),
            by_sink,
            v_x,
        ),
    };
    Ok(StandardFormLP::new(d.entries.clone(), g, h, a, b)?)
}

/// Transport problem with the volume case encoded by a binary `b`.
///
/// Every constraint is `G x ≤ h_const + b · h_b`; fixing `b` gives an LP.
#[derive(Debug, Clone, PartialEq)]
pub struct BigMMilp {
    pub n: usize,
    pub m: usize,
    pub c: Vec<f64>,
    pub g: Matrix,
    pub h_const: Vec<f64>,
    pub h_b: Vec<f64>,
    pub big_m: f64,
}

impl BigMMilp {
    pub fn fixed(&self, b: u8) -> Result<StandardFormLP, TransportError> {
        assert!(b <= 1, "b is binary");
        let h = self
            .h_const
            .iter()
            .zip(&self.h_b)
            .map(|(k, s)| k + f64::from(b) * s)
            .collect();
        let nm = self.n * self.m;
        Ok(StandardFormLP::new(
            self.c.clone(),
            self.g.clone(),
            h,
            Matrix::zeros(0, nm),
            Vec::new(),
        )?)
    }

    pub fn solve_branch(&self, b: u8, tol: f64) -> Result<LpSolution, TransportError> {
        Ok(lp::solve(&self.fixed(b)?, tol)?)
    }

    /// Solves both branches and returns the better `(b, solution)`; ties go
    /// to `b = 1`. `None` if both branches are infeasible.
    pub fn solve_exhaustive(&self, tol: f64) -> Result<Option<(u8, LpSolution)>, TransportError> {
        let mut best: Option<(u8, LpSolution)> = None;
        for b in [1u8, 0] {
            let sol = self.solve_branch(b, tol)?;
            if sol.is_optimal() && best.as_ref().is_none_or(|(_, s)| sol.objective < s.objective - tol) {
                best = Some((b, sol));
            }
        }
        Ok(best)
    }
}

/// Big-M form: `−Π ≤ 0`, `Πᵀ1 ≤ v_x`, `Π1 ≤ v_y`,
/// `−Πᵀ1 ≤ −v_x + M(1 − b)`, `−Π1 ≤ −v_y + M b`.
pub fn assemble_bigm_milp(set: &NodeSet, d: &DistanceMatrix) -> Result<BigMMilp, TransportError> {
    let (n, m) = check_dims(set, d)?;
    let nm = n * m;
    let v_y = set.source_volumes();
    let v_x = set.sink_volumes();
    let big_m = set.source_volume().max(set.sink_volume());
    let by_source = source_sum_block(n, m);
    let by_sink = sink_sum_block(n, m);
    let g = Matrix::vstack(&[
        &Matrix::identity(nm).scaled(-1.0),
        &by_sink,
        &by_source,
        &by_sink.scaled(-1.0),
        &by_source.scaled(-1.0),
    ]);
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    let h_const = [
        vec![0.0; nm],
        v_x.clone(),
        v_y.clone(),
        neg(&v_x).iter().map(|x| x + big_m).collect(),
        neg(&v_y),
    ]
    .concat();
    let h_b = [
        vec![0.0; nm + m + n],
        vec![-big_m; m],
        vec![big_m; n],
    ]
    .concat();
    Ok(BigMMilp {
        n,
        m,
        c: d.entries.clone(),
        g,
        h_const,
        h_b,
        big_m,
    })
}
