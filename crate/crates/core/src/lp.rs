//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min cᵀp` over a [`Polyhedron`] with finite lower bounds. Variables
//! are shifted to `x = p − lower ≥ 0`; rows get surplus columns, finite upper
//! bounds get slack columns and rows without a natural basic column get an
//! artificial. The full tableau is kept, so `B⁻¹` can be read off the columns
//! of the initial basis to recover dual values.

use crate::error::{Error, Result};
use crate::qp::Polyhedron;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

/// Optimal vertex with duals in the `≥` orientation (all nonnegative).
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub row_duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
}

impl LpSolution {
    /// Dual objective `Σ λ_i β_i + Σ ρ_j l_j − Σ μ_j u_j`.
    pub fn dual_objective(&self, poly: &Polyhedron) -> f64 {
        let rows: f64 = self.row_duals.iter().zip(&poly.rows).map(|(y, r)| y * r.rhs).sum();
        let lower: f64 = self.lower_duals.iter().zip(&poly.lower).map(|(y, l)| y * l).sum();
        let upper: f64 = self
            .upper_duals
            .iter()
            .zip(&poly.upper)
            .filter(|(_, u)| u.is_finite())
            .map(|(y, u)| y * u)
            .sum();
        rows + lower - upper
    }

    /// Largest entry of `|c − Aᵀλ − ρ + μ|`.
    pub fn dual_residual(&self, poly: &Polyhedron, cost: &[f64]) -> f64 {
        (0..poly.dim)
            .map(|j| {
                let ay: f64 = poly.rows.iter().zip(&self.row_duals).map(|(r, y)| r.coeffs[j] * y).sum();
                (cost[j] - ay - self.lower_duals[j] + self.upper_duals[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.n_cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= pv;
        }
        let prow = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, p) in line.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, tj) in d.iter_mut().zip(&self.t[r][..self.n_cols]) {
                    *dj -= cb * tj;
                }
            }
        }
        d
    }

    /// Minimizes `cost` over the current basis; only `allowed` columns may enter.
    fn run(&mut self, cost: &[f64], allowed: &[bool], pivots: &mut usize) -> Result<()> {
        loop {
            if *pivots >= MAX_PIVOTS {
                return Err(Error::NumericalFailure {
                    message: format!("simplex exceeded {MAX_PIVOTS} pivots"),
                    best: Vec::new(),
                    residual: f64::NAN,
                });
            }
            let d = self.reduced_costs(cost);
            let Some(enter) = (0..self.n_cols).find(|&j| allowed[j] && d[j] < -COST_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][enter];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14 || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Precondition("linear program is unbounded".into()));
            };
            self.pivot(row, enter);
            *pivots += 1;
        }
    }
}

/// Minimizes `cost · p` over `poly`.
pub fn minimize(cost: &[f64], poly: &Polyhedron) -> Result<LpSolution> {
    let n = poly.dim;
    if cost.len() != n {
        return Err(Error::invalid("cost vector has wrong dimension"));
    }
    if poly.lower.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("simplex requires finite lower bounds"));
    }
    let m = poly.rows.len();
    let uppers: Vec<usize> = (0..n).filter(|&j| poly.upper[j].is_finite()).collect();
    for &j in &uppers {
        if poly.upper[j] < poly.lower[j] {
            return Err(Error::Precondition(format!("empty bound interval for coordinate {j}")));
        }
    }

    // Column layout: x (n) | surplus (m) | upper slack (|uppers|) | artificials.
    let shift: Vec<f64> = poly
        .rows
        .iter()
        .map(|r| r.rhs - r.dot(&poly.lower))
        .collect();
    let needs_art: Vec<bool> = shift.iter().map(|h| *h >= 0.0).collect();
    let n_art = needs_art.iter().filter(|b| **b).count();
    let n_cols = n + m + uppers.len() + n_art;
    let n_rows = m + uppers.len();
    let mut t = vec![vec![0.0; n_cols + 1]; n_rows];
    let mut basis = vec![0; n_rows];
    let mut sign = vec![1.0; m];
    let mut init_col = vec![0; n_rows];
    let mut art = n + m + uppers.len();
    for (i, row) in poly.rows.iter().enumerate() {
        let s = if needs_art[i] { 1.0 } else { -1.0 };
        sign[i] = s;
        for j in 0..n {
            t[i][j] = s * row.coeffs[j];
        }
        t[i][n + i] = -s;
        t[i][n_cols] = s * shift[i];
        if needs_art[i] {
            t[i][art] = 1.0;
            basis[i] = art;
            init_col[i] = art;
            art += 1;
        } else {
            basis[i] = n + i;
            init_col[i] = n + i;
        }
    }
    for (u, &j) in uppers.iter().enumerate() {
        let r = m + u;
        t[r][j] = 1.0;
        t[r][n + m + u] = 1.0;
        t[r][n_cols] = poly.upper[j] - poly.lower[j];
        basis[r] = n + m + u;
        init_col[r] = n + m + u;
    }
    let first_art = n + m + uppers.len();
    let mut tab = Tableau { t, basis, n_cols };
    let mut pivots = 0;

    if n_art > 0 {
        let mut phase1 = vec![0.0; n_cols];
        for c in phase1.iter_mut().skip(first_art) {
            *c = 1.0;
        }
        tab.run(&phase1, &vec![true; n_cols], &mut pivots)?;
        let infeas: f64 = (0..n_rows)
            .filter(|&r| tab.basis[r] >= first_art)
            .map(|r| tab.rhs(r))
            .sum();
        if infeas > 1e-9 {
            return Err(Error::Precondition(format!(
                "polytope is empty (phase-one residual {infeas:.3e})"
            )));
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..n_rows {
            if tab.basis[r] >= first_art {
                if let Some(col) = (0..first_art).find(|&c| tab.t[r][c].abs() > 1e-9) {
                    tab.pivot(r, col);
                }
            }
        }
    }

    let mut phase2 = vec![0.0; n_cols];
    phase2[..n].copy_from_slice(cost);
    let allowed: Vec<bool> = (0..n_cols).map(|c| c < first_art).collect();
    tab.run(&phase2, &allowed, &mut pivots)?;

    let mut x = poly.lower.clone();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.rhs(r);
        }
    }
    let objective = cost.iter().zip(&x).map(|(c, v)| c * v).sum();

    let y: Vec<f64> = (0..n_rows)
        .map(|r| {
            tab.basis
                .iter()
                .enumerate()
                .map(|(k, &b)| phase2[b] * tab.t[k][init_col[r]])
                .sum()
        })
        .collect();
    let row_duals = (0..m).map(|i| (sign[i] * y[i]).max(0.0)).collect();
    let mut upper_duals = vec![0.0; n];
    for (u, &j) in uppers.iter().enumerate() {
        upper_duals[j] = (-y[m + u]).max(0.0);
    }
    let d = tab.reduced_costs(&phase2);
    let lower_duals = d[..n].iter().map(|v| v.max(0.0)).collect();

    Ok(LpSolution {
        x,
        objective,
        row_duals,
        lower_duals,
        upper_duals,
    })
}

/// Any point of `poly` (a phase-one vertex).
pub fn feasible_point(poly: &Polyhedron) -> Result<Vec<f64>> {
    minimize(&vec![0.0; poly.dim], poly).map(|s| s.x)
}
