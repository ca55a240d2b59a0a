//! Exhaustive vertex enumeration for tiny LPs, used as a test oracle.
//!
//! Shares nothing with the simplex path: every basic solution is obtained
//! by an independent dense solve, and a grid over the feasible affine hull
//! double-checks that no feasible point beats the best vertex.

use nalgebra::{DMatrix, DVector};

use super::{LpError, LpStatus, StandardFormLP};

pub const MAX_ORACLE_VARIABLES: usize = 9;

const RANK_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const MAX_GRID_POINTS: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub vertices: usize,
    pub grid_points_checked: usize,
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Rightmost position that can still advance.
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn rank(rows: &[Vec<f64>], cols: usize) -> usize {
    if rows.is_empty() || cols == 0 {
        return 0;
    }
    let m = DMatrix::from_row_slice(rows.len(), cols, &rows.concat());
    m.rank(RANK_TOL)
}

/// Minimum objective over all basic feasible solutions of a small LP.
///
/// `grid_steps` ≥ 2 additionally scans a regular grid of that many points
/// per dimension over the box spanned by the vertices in the null space of
/// `A`, and fails if any feasible grid point has a lower objective than the
/// best vertex. Pass 0 to skip the scan. The feasible region is assumed
/// bounded whenever it has a vertex.
pub fn verify_bruteforce(lp: &StandardFormLP, grid_steps: usize) -> Result<OracleResult, LpError> {
    lp.validate()?;
    let k = lp.num_vars();
    if k > MAX_ORACLE_VARIABLES {
        return Err(LpError::TooLarge {
            vars: k,
            max: MAX_ORACLE_VARIABLES,
        });
    }

    // Independent subset of the equality rows.
    let mut eq_rows: Vec<Vec<f64>> = Vec::new();
    let mut eq_rhs: Vec<f64> = Vec::new();
    for r in 0..lp.a.rows() {
        let mut trial = eq_rows.clone();
        trial.push(lp.a.row(r).to_vec());
        if rank(&trial, k) > eq_rows.len() {
            eq_rows = trial;
            eq_rhs.push(lp.b_eq[r]);
        }
    }
    let free = k - eq_rows.len();

    let tol = |scale: f64| FEAS_TOL * (1.0 + scale.abs());
    let feasible = |x: &[f64]| {
        (0..lp.g.rows()).all(|r| lp.g.row_dot(r, x) <= lp.h[r] + tol(lp.h[r]))
            && (0..lp.a.rows()).all(|r| (lp.a.row_dot(r, x) - lp.b_eq[r]).abs() <= tol(lp.b_eq[r]))
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    combinations(lp.g.rows(), free, |active| {
        let mut data = Vec::with_capacity(k * k);
        let mut rhs = Vec::with_capacity(k);
        for (row, b) in eq_rows.iter().zip(&eq_rhs) {
            data.extend_from_slice(row);
            rhs.push(*b);
        }
        for &r in active {
            data.extend_from_slice(lp.g.row(r));
            rhs.push(lp.h[r]);
        }
        let m = DMatrix::from_row_slice(k, k, &data);
        if m.rank(RANK_TOL) < k {
            return;
        }
        let Some(sol) = m.lu().solve(&DVector::from_vec(rhs)) else {
            return;
        };
        let x: Vec<f64> = sol.iter().copied().collect();
        if !feasible(&x) {
            return;
        }
        let obj = lp.objective(&x);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x.clone()));
        }
        vertices.push(x);
    });

    let Some((objective, x)) = best else {
        return Ok(OracleResult {
            status: LpStatus::Infeasible,
            objective: f64::INFINITY,
            x: Vec::new(),
            vertices: 0,
            grid_points_checked: 0,
        });
    };

    let mut checked = 0;
    if grid_steps >= 2 && free > 0 {
        // Orthonormal null-space basis of the equality rows.
        let basis: Vec<DVector<f64>> = if eq_rows.is_empty() {
            (0..k).map(|i| DVector::from_fn(k, |r, _| if r == i { 1.0 } else { 0.0 })).collect()
        } else {
            let a = DMatrix::from_row_slice(eq_rows.len(), k, &eq_rows.concat());
            let ata = a.transpose() * &a;
            let eig = ata.symmetric_eigen();
            let mut pairs: Vec<(f64, DVector<f64>)> = eig
                .eigenvalues
                .iter()
                .zip(eig.eigenvectors.column_iter())
                .map(|(v, c)| (*v, c.into_owned()))
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            pairs.into_iter().take(free).map(|(_, v)| v).collect()
        };
        let origin = DVector::from_vec(x.clone());
        let mut lo = vec![f64::INFINITY; free];
        let mut hi = vec![f64::NEG_INFINITY; free];
        for v in &vertices {
            let d = DVector::from_vec(v.clone()) - &origin;
            for (i, b) in basis.iter().enumerate() {
                let t = b.dot(&d);
                lo[i] = lo[i].min(t);
                hi[i] = hi[i].max(t);
            }
        }
        let points = grid_steps.checked_pow(free as u32).unwrap_or(usize::MAX);
        if points <= MAX_GRID_POINTS {
            let mut counter = vec![0usize; free];
            let scale = 1e-9 * (1.0 + objective.abs());
            for _ in 0..points {
                let mut p = origin.clone();
                for i in 0..free {
                    let t = lo[i] + (hi[i] - lo[i]) * counter[i] as f64 / (grid_steps - 1) as f64;
                    p += &basis[i] * t;
                }
                let px: Vec<f64> = p.iter().copied().collect();
                if feasible(&px) {
                    checked += 1;
                    let obj = lp.objective(&px);
                    if obj < objective - scale {
                        return Err(LpError::OracleMismatch(format!(
                            "grid point beats best vertex: {obj} < {objective}"
                        )));
                    }
                }
                for c in counter.iter_mut() {
                    *c += 1;
                    if *c < grid_steps {
                        break;
                    }
                    *c = 0;
                }
            }
        }
    }

    Ok(OracleResult {
        status: LpStatus::Optimal,
        objective,
        x,
        vertices: vertices.len(),
        grid_points_checked: checked,
    })
}
