//! Euclidean projection onto a polyhedron by a primal active-set method.
//!
//! Solves `min ½‖p − r‖²` subject to `a_i·p ≥ β_i` and `lower ≤ p ≤ upper`.
//! The Hessian is the identity, so each equality-constrained subproblem only
//! needs the Gram matrix of the working rows. The working set is kept
//! linearly independent: a blocking constraint always has `a·d < 0` for a
//! step `d` in the null space of the working rows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One general constraint `coeffs · p ≥ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Row {
    pub fn dot(&self, p: &[f64]) -> f64 {
        self.coeffs.iter().zip(p).map(|(a, x)| a * x).sum()
    }
}

/// `{p : rows, lower ≤ p ≤ upper}`; infinite bounds are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub dim: usize,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Which constraint a flat index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintRef {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

impl Polyhedron {
    /// Flat constraint count: rows, then lower bounds, then upper bounds.
    pub fn n_constraints(&self) -> usize {
        self.rows.len() + 2 * self.dim
    }

    pub fn constraint(&self, idx: usize) -> ConstraintRef {
        let m = self.rows.len();
        if idx < m {
            ConstraintRef::Row(idx)
        } else if idx < m + self.dim {
            ConstraintRef::Lower(idx - m)
        } else {
            ConstraintRef::Upper(idx - m - self.dim)
        }
    }

    fn is_vacuous(&self, idx: usize) -> bool {
        match self.constraint(idx) {
            ConstraintRef::Row(_) => false,
            ConstraintRef::Lower(i) => self.lower[i] == f64::NEG_INFINITY,
            ConstraintRef::Upper(i) => self.upper[i] == f64::INFINITY,
        }
    }

    /// `a_idx · x` in the `≥` orientation (upper bounds are negated).
    fn dot(&self, idx: usize, x: &[f64]) -> f64 {
        match self.constraint(idx) {
            ConstraintRef::Row(r) => self.rows[r].dot(x),
            ConstraintRef::Lower(i) => x[i],
            ConstraintRef::Upper(i) => -x[i],
        }
    }

    fn rhs(&self, idx: usize) -> f64 {
        match self.constraint(idx) {
            ConstraintRef::Row(r) => self.rows[r].rhs,
            ConstraintRef::Lower(i) => self.lower[i],
            ConstraintRef::Upper(i) => -self.upper[i],
        }
    }

    fn coeffs(&self, idx: usize) -> Vec<f64> {
        match self.constraint(idx) {
            ConstraintRef::Row(r) => self.rows[r].coeffs.clone(),
            ConstraintRef::Lower(i) => unit(self.dim, i, 1.0),
            ConstraintRef::Upper(i) => unit(self.dim, i, -1.0),
        }
    }

    /// Slack `a·x − β` of constraint `idx` (negative when violated).
    pub fn slack(&self, idx: usize, x: &[f64]) -> f64 {
        if self.is_vacuous(idx) {
            f64::INFINITY
        } else {
            self.dot(idx, x) - self.rhs(idx)
        }
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.n_constraints())
            .map(|i| -self.slack(i, x))
            .fold(0.0, f64::max)
    }

    /// Indices of constraints whose slack is within `tol`.
    pub fn tight_set(&self, x: &[f64], tol: f64) -> Vec<usize> {
        (0..self.n_constraints()).filter(|&i| self.slack(i, x).abs() <= tol).collect()
    }

    /// True if the coefficient vectors of `idx` are linearly dependent.
    pub fn rows_dependent(&self, idx: &[usize]) -> bool {
        if idx.is_empty() {
            return false;
        }
        let a = DMatrix::from_fn(idx.len(), self.dim, |r, c| self.coeffs(idx[r])[c]);
        a.rank(1e-9) < idx.len()
    }
}

fn unit(n: usize, i: usize, v: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = v;
    e
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    /// A point is feasible when every slack is ≥ −feas_tol.
    pub feas_tol: f64,
    /// Multipliers above −dual_tol count as nonnegative.
    pub dual_tol: f64,
    pub max_pivots: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            feas_tol: 1e-9,
            dual_tol: 1e-10,
            max_pivots: 10_000,
        }
    }
}

/// Projection result with one multiplier per flat constraint index.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub working_set: Vec<usize>,
    pub pivots: usize,
}

impl QpSolution {
    pub fn row_multipliers(&self, poly: &Polyhedron) -> Vec<f64> {
        self.multipliers[..poly.rows.len()].to_vec()
    }

    pub fn lower_multipliers(&self, poly: &Polyhedron) -> Vec<f64> {
        let m = poly.rows.len();
        self.multipliers[m..m + poly.dim].to_vec()
    }

    pub fn upper_multipliers(&self, poly: &Polyhedron) -> Vec<f64> {
        let m = poly.rows.len();
        self.multipliers[m + poly.dim..].to_vec()
    }
}

/// Solves `G y = rhs` for the Gram matrix of the working rows.
fn gram_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let g = a * a.transpose();
    if let Some(ch) = g.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    g.svd(true, true).solve(rhs, 1e-12).ok()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// True if `a` lies in the column space of the orthonormal `q`.
fn in_span(q: Option<&DMatrix<f64>>, a: &[f64]) -> bool {
    let Some(q) = q else { return false };
    let av = DVector::from_column_slice(a);
    let resid = &av - q * (q.transpose() * &av);
    resid.norm() <= 1e-9 * av.norm()
}

/// Greedy independent subset of `candidates`, scanned in order.
fn independent_subset(poly: &Polyhedron, candidates: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &c in candidates {
        if poly.is_vacuous(c) {
            continue;
        }
        let mut trial = out.clone();
        trial.push(c);
        if !poly.rows_dependent(&trial) {
            out = trial;
        }
    }
    out
}

/// Projects `reference` onto `poly`.
///
/// `start` must be feasible. `working_hint` lists constraints to try first
/// when seeding the working set (the previous working set on a warm start).
pub fn project(
    poly: &Polyhedron,
    reference: &[f64],
    start: &[f64],
    working_hint: &[usize],
    opts: &QpOptions,
) -> Result<QpSolution> {
    let n = poly.dim;
    let nc = poly.n_constraints();
    if reference.len() != n || start.len() != n {
        return Err(Error::invalid("dimension mismatch in projection"));
    }
    if poly.max_violation(reference) <= opts.feas_tol {
        return Ok(QpSolution {
            x: reference.to_vec(),
            multipliers: vec![0.0; nc],
            working_set: Vec::new(),
            pivots: 0,
        });
    }
    let start_violation = poly.max_violation(start);
    if start_violation > 10.0 * opts.feas_tol {
        return Err(Error::Precondition(format!(
            "active-set start point is infeasible (violation {start_violation:.3e})"
        )));
    }

    let mut p = start.to_vec();
    let tight = poly.tight_set(&p, opts.feas_tol);
    let mut seed: Vec<usize> = working_hint.iter().copied().filter(|i| tight.contains(i)).collect();
    seed.extend(tight.iter().copied().filter(|i| !working_hint.contains(i)));
    let mut working = independent_subset(poly, &seed);

    let scale = 1.0 + norm_inf(reference).max(norm_inf(start));
    let mut degenerate_run = 0usize;
    let mut at_min = false;
    let coeff_norm: Vec<f64> = (0..nc).map(|c| norm_inf(&poly.coeffs(c))).collect();
    let bland_after = 2 * nc + 10;

    for pivot in 0..opts.max_pivots {
        let g: Vec<f64> = p.iter().zip(reference).map(|(x, r)| x - r).collect();
        let k = working.len();
        let gv = DVector::from_column_slice(&g);
        // Thin QR of the working rows: μ solves Rμ = Qᵀg and the step to the
        // subspace minimizer is d = −(I − QQᵀ)g.
        let mut basis: Option<DMatrix<f64>> = None;
        let (mu, qqg) = if k > 0 {
            let at = DMatrix::from_fn(n, k, |r, c| poly.coeffs(working[c])[r]);
            let qr = at.clone().qr();
            let (q, rr) = (qr.q(), qr.r());
            let qtg = q.transpose() * &gv;
            let rmax = rr.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let solved = if rr.diagonal().iter().all(|x| x.abs() > 1e-12 * rmax) {
                rr.solve_upper_triangular(&qtg)
            } else {
                None
            };
            let mu = match solved {
                Some(mu) => mu,
                None => gram_solve(&at.transpose(), &(at.transpose() * &gv)).ok_or_else(|| {
                    Error::NumericalFailure {
                        message: "singular working-set matrix".into(),
                        best: p.clone(),
                        residual: f64::NAN,
                    }
                })?,
            };
            let qqg = &q * qtg;
            basis = Some(q);
            (mu, qqg)
        } else {
            (DVector::zeros(0), DVector::zeros(n))
        };
        // A full working set pins p, and after a full step p is already the
        // subspace minimizer; whatever is left in d is rounding.
        let d: Vec<f64> = if k == n || at_min {
            vec![0.0; n]
        } else {
            (0..n).map(|i| qqg[i] - g[i]).collect()
        };

        if norm_inf(&d) <= 1e-11 * (scale + norm_inf(&g)) {
            // Stationary on the working set: μ are the multipliers.
            let min = (0..k)
                .filter(|&i| mu[i] < -opts.dual_tol)
                .min_by(|&x, &y| {
                    if degenerate_run > bland_after {
                        working[x].cmp(&working[y])
                    } else {
                        mu[x].partial_cmp(&mu[y]).unwrap().then(working[x].cmp(&working[y]))
                    }
                });
            match min {
                None => {
                    let mut multipliers = vec![0.0; nc];
                    for (i, &c) in working.iter().enumerate() {
                        multipliers[c] = mu[i].max(0.0);
                    }
                    return Ok(QpSolution {
                        x: p,
                        multipliers,
                        working_set: working,
                        pivots: pivot,
                    });
                }
                Some(i) => {
                    working.remove(i);
                    at_min = false;
                    degenerate_run += 1;
                    continue;
                }
            }
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        let dnorm = norm_inf(&d);
        for c in 0..nc {
            if working.contains(&c) || poly.is_vacuous(c) {
                continue;
            }
            let ad = poly.dot(c, &d);
            // Rows in the span of the working set have a·d = 0 up to rounding
            // and can never block.
            if ad < -1e-12 * dnorm * coeff_norm[c] && !in_span(basis.as_ref(), &poly.coeffs(c)) {
                let t = poly.slack(c, &p).max(0.0) / -ad;
                if t < alpha {
                    alpha = t;
                    blocking = Some(c);
                }
            }
        }
        for i in 0..n {
            p[i] += alpha * d[i];
        }
        degenerate_run = if alpha * dnorm <= 1e-15 * scale { degenerate_run + 1 } else { 0 };
        match blocking {
            Some(c) => working.push(c),
            None => at_min = true,
        }
    }
    Err(Error::NumericalFailure {
        message: format!("active-set QP exceeded {} pivots", opts.max_pivots),
        residual: poly.max_violation(&p),
        best: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex_like() -> Polyhedron {
        // p1 + p2 ≥ 10, 0 ≤ p ≤ 8
        Polyhedron {
            dim: 2,
            rows: vec![Row {
                coeffs: vec![1.0, 1.0],
                rhs: 10.0,
            }],
            lower: vec![0.0, 0.0],
            upper: vec![8.0, 8.0],
        }
    }

    #[test]
    fn projects_onto_sum_constraint() {
        let poly = simplex_like();
        let sol = project(&poly, &[2.0, 2.0], &[8.0, 8.0], &[], &QpOptions::default()).unwrap();
        assert!((sol.x[0] - 5.0).abs() < 1e-12 && (sol.x[1] - 5.0).abs() < 1e-12);
        assert!((sol.multipliers[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_becomes_active() {
        let poly = simplex_like();
        // reference (7, 0): unconstrained shift gives (8.5, 1.5), clipped to 8
        let sol = project(&poly, &[7.0, 0.0], &[8.0, 8.0], &[], &QpOptions::default()).unwrap();
        assert!((sol.x[0] - 8.0).abs() < 1e-12);
        assert!((sol.x[1] - 2.0).abs() < 1e-12);
        let up = sol.upper_multipliers(&poly);
        let lam = sol.row_multipliers(&poly)[0];
        // stationarity: p − r = λ·1 − μ
        assert!((sol.x[0] - 7.0 - lam + up[0]).abs() < 1e-12);
        assert!((sol.x[1] - lam + up[1]).abs() < 1e-12);
    }

    #[test]
    fn feasible_reference_returned_unchanged() {
        let poly = simplex_like();
        let sol = project(&poly, &[6.0, 7.0], &[8.0, 8.0], &[], &QpOptions::default()).unwrap();
        assert_eq!(sol.x, vec![6.0, 7.0]);
        assert!(sol.multipliers.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn infeasible_start_rejected() {
        let poly = simplex_like();
        assert!(project(&poly, &[2.0, 2.0], &[1.0, 1.0], &[], &QpOptions::default()).is_err());
    }

    #[test]
    fn degenerate_vertex() {
        // Three rows through the same vertex (4, 4) in 2-D.
        let poly = Polyhedron {
            dim: 2,
            rows: vec![
                Row { coeffs: vec![1.0, 1.0], rhs: 8.0 },
                Row { coeffs: vec![1.0, 0.0], rhs: 4.0 },
                Row { coeffs: vec![0.0, 1.0], rhs: 4.0 },
                Row { coeffs: vec![2.0, 1.0], rhs: 12.0 },
            ],
            lower: vec![0.0, 0.0],
            upper: vec![10.0, 10.0],
        };
        let sol = project(&poly, &[0.0, 0.0], &[10.0, 10.0], &[], &QpOptions::default()).unwrap();
        assert!((sol.x[0] - 4.0).abs() < 1e-10 && (sol.x[1] - 4.0).abs() < 1e-10);
        assert!(poly.rows_dependent(&poly.tight_set(&sol.x, 1e-9)));
    }
}
