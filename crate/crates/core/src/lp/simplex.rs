//! Two-phase dense tableau simplex with Bland's anti-cycling rule.

use super::{LpError, LpSolution, LpStatus, StandardFormLP};

const PIVOT_EPS: f64 = 1e-11;

/// How an original variable maps onto the nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lower + y`.
    Shifted { col: usize, lower: f64 },
    /// `x = y⁺ − y⁻`.
    Split { pos: usize, neg: usize },
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<f64>,
    rows: usize,
    width: usize,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, pr: usize, pc: usize, obj: &mut [f64]) {
        let w = self.width;
        let p = self.at(pr, pc);
        for v in &mut self.t[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[pc] = 0.0;
            }
        }
        let f = obj[pc];
        if f != 0.0 {
            for (v, pv) in obj.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Runs Bland pivots on the reduced-cost row `obj` over columns
    /// `0..allowed`. Returns `Ok(false)` when unbounded.
    fn optimize(
        &mut self,
        obj: &mut [f64],
        allowed: usize,
        rc_eps: f64,
        iterations: &mut usize,
        limit: usize,
    ) -> Result<bool, LpError> {
        loop {
            let Some(enter) = (0..allowed).find(|&j| obj[j] < -rc_eps) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, enter);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14 * (1.0 + lratio.abs())
                                || (ratio <= lratio + 1e-14 * (1.0 + lratio.abs())
                                    && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Ok(false);
            };
            log::trace!("simplex pivot {iterations}: enter {enter}, leave row {pr} (var {})", self.basis[pr]);
            self.pivot(pr, enter, obj);
            *iterations += 1;
            if *iterations > limit {
                return Err(LpError::IterationLimit(limit));
            }
        }
    }
}

/// Solves `min cᵀx s.t. Gx ≤ h, Ax = b` exactly up to floating point.
///
/// Rows of `G` with a single negative coefficient are folded into variable
/// lower bounds; variables without one are split into a difference of two
/// nonnegative columns. The result is an optimal basic solution, or an
/// infeasible/unbounded status.
pub fn solve(lp: &StandardFormLP, tol: f64) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();

    // Lower bounds from singleton rows −g·x_j ≤ h.
    let mut lower: Vec<Option<f64>> = vec![None; n];
    let mut bound_row = vec![false; lp.g.rows()];
    for r in 0..lp.g.rows() {
        let row = lp.g.row(r);
        let mut nz = row.iter().enumerate().filter(|(_, v)| **v != 0.0);
        if let (Some((j, &coef)), None) = (nz.next(), nz.next()) {
            if coef < 0.0 {
                let lb = lp.h[r] / coef;
                lower[j] = Some(lower[j].map_or(lb, |l: f64| l.max(lb)));
                bound_row[r] = true;
            }
        }
    }

    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    for lb in &lower {
        match lb {
            Some(l) => {
                maps.push(VarMap::Shifted { col: ncols, lower: *l });
                ncols += 1;
            }
            None => {
                maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }
    }

    // Expand a constraint row into tableau columns; returns the rhs shift.
    let expand = |row: &[f64], out: &mut [f64]| -> f64 {
        let mut shift = 0.0;
        for (j, &v) in row.iter().enumerate() {
            match maps[j] {
                VarMap::Shifted { col, lower } => {
                    out[col] = v;
                    shift += v * lower;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] = v;
                    out[neg] = -v;
                }
            }
        }
        shift
    };

    let ineq: Vec<usize> = (0..lp.g.rows()).filter(|&r| !bound_row[r]).collect();
    let n_ineq = ineq.len();
    let n_eq = lp.a.rows();
    let rows = n_ineq + n_eq;

    // Structural rows before slacks/artificials are known.
    let mut body = vec![0.0; rows * ncols];
    let mut rhs = vec![0.0; rows];
    for (k, &r) in ineq.iter().enumerate() {
        let shift = expand(lp.g.row(r), &mut body[k * ncols..(k + 1) * ncols]);
        rhs[k] = lp.h[r] - shift;
    }
    for r in 0..n_eq {
        let k = n_ineq + r;
        let shift = expand(lp.a.row(r), &mut body[k * ncols..(k + 1) * ncols]);
        rhs[k] = lp.b_eq[r] - shift;
    }

    // Slacks for inequality rows; flip rows with negative rhs; artificials
    // wherever no +1 slack can start in the basis.
    let slack0 = ncols;
    let art0 = slack0 + n_ineq;
    let mut sign = vec![1.0; rows];
    let mut needs_art = vec![false; rows];
    for k in 0..rows {
        if rhs[k] < 0.0 {
            sign[k] = -1.0;
        }
        needs_art[k] = k >= n_ineq || sign[k] < 0.0;
    }
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let total = art0 + n_art;
    let width = total + 1;
    let mut t = vec![0.0; rows * width];
    let mut basis = vec![0; rows];
    let mut art_col = art0;
    for k in 0..rows {
        let row = &mut t[k * width..(k + 1) * width];
        for j in 0..ncols {
            row[j] = sign[k] * body[k * ncols + j];
        }
        if k < n_ineq {
            row[slack0 + k] = sign[k];
        }
        row[total] = sign[k] * rhs[k];
        if needs_art[k] {
            row[art_col] = 1.0;
            basis[k] = art_col;
            art_col += 1;
        } else {
            basis[k] = slack0 + k;
        }
    }
    let mut tab = Tableau { t, rows, width, basis };

    let scale = 1.0
        + lp.c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rc_eps = 1e-12 * scale;
    let limit = 10_000 + 50 * (rows + total);
    let mut iterations = 0;

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        let mut obj = vec![0.0; width];
        for j in art0..total {
            obj[j] = 1.0;
        }
        for k in 0..rows {
            if tab.basis[k] >= art0 {
                for j in 0..width {
                    obj[j] -= tab.at(k, j);
                }
            }
        }
        tab.optimize(&mut obj, total, rc_eps, &mut iterations, limit)?;
        let infeasibility = -obj[total];
        let feas_tol = tol.max(1e-12) * scale;
        if infeasibility > feas_tol {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::INFINITY,
                iterations,
            });
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut k = 0;
        while k < tab.rows {
            if tab.basis[k] >= art0 {
                if let Some(j) = (0..art0).find(|&j| tab.at(k, j).abs() > 1e-9) {
                    tab.pivot(k, j, &mut obj);
                    k += 1;
                } else {
                    let w = tab.width;
                    tab.t.drain(k * w..(k + 1) * w);
                    tab.basis.remove(k);
                    tab.rows -= 1;
                }
            } else {
                k += 1;
            }
        }
    }

    // Phase 2 over structural and slack columns only.
    let mut cost = vec![0.0; width];
    let mut constant = 0.0;
    for (j, m) in maps.iter().enumerate() {
        match *m {
            VarMap::Shifted { col, lower } => {
                cost[col] = lp.c[j];
                constant += lp.c[j] * lower;
            }
            VarMap::Split { pos, neg } => {
                cost[pos] = lp.c[j];
                cost[neg] = -lp.c[j];
            }
        }
    }
    let mut obj = cost.clone();
    for k in 0..tab.rows {
        let cb = cost[tab.basis[k]];
        if cb != 0.0 {
            for j in 0..width {
                obj[j] -= cb * tab.at(k, j);
            }
        }
    }
    if !tab.optimize(&mut obj, art0, rc_eps, &mut iterations, limit)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
            iterations,
        });
    }

    let mut y = vec![0.0; total];
    for k in 0..tab.rows {
        y[tab.basis[k]] = tab.rhs(k).max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shifted { col, lower } => lower + y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let objective = lp.objective(&x);
    debug_assert!((objective - (constant + cost.iter().zip(&y).map(|(c, v)| c * v).sum::<f64>())).abs() <= 1e-9 * scale);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        iterations,
    })
}
