//! Quadratic-rule payments: projection of a reference price vector onto the core.
//!
//! `project_onto_core` never materializes the full core. It projects onto a
//! working polytope, asks the separation oracle for the most violated
//! coalition, adds that row and re-solves until nothing blocks. Each re-solve
//! is warm-started from the previous solution pulled toward an anchor point
//! known to lie in the full core (the bid vector).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, Coalition};
use crate::polytope::{find_most_violated_coalition, CoreConstraint, CorePolytope};
use crate::qp::{self, Polyhedron, QpOptions, QpSolution, Row};

pub const KKT_TOL: f64 = 1e-8;
pub const MAX_SEPARATION_ROUNDS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub qp: QpOptions,
    pub kkt_tol: f64,
    pub max_rounds: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            qp: QpOptions::default(),
            kkt_tol: KKT_TOL,
            max_rounds: MAX_SEPARATION_ROUNDS,
        }
    }
}

/// Residuals of the optimality system for `min ‖p − r‖²` over a polytope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KKTCertificate {
    /// `max |p − r − Aᵀλ − ρ + μ|`.
    pub stationarity_residual: f64,
    /// Largest violation of a row or bound.
    pub primal_residual: f64,
    /// Largest `|λ_i (a_i p − β_i)|`, `|ρ_i (p_i − l_i)|` or `|μ_i (p_i − b_i)|`.
    pub comp_slack_residual: f64,
    /// Largest negative part of any multiplier.
    pub dual_residual: f64,
}

impl KKTCertificate {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual
            .max(self.primal_residual)
            .max(self.comp_slack_residual)
            .max(self.dual_residual)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionResult {
    pub prices: Vec<f64>,
    /// λ, one per polytope coalition row.
    pub multipliers_core: Vec<f64>,
    /// Multipliers of the lower bounds (folded `p_j ≥ β` rows).
    pub multipliers_lower: Vec<f64>,
    /// μ, one per winner IR bound.
    pub multipliers_ir: Vec<f64>,
    /// Active-set pivots summed over all rounds.
    pub iterations: usize,
    pub separation_rounds: usize,
    pub certificate: KKTCertificate,
    /// Set when the tight constraint rows are linearly dependent, in which
    /// case other multiplier decompositions exist.
    pub multipliers_nonunique: bool,
    /// `‖p − r‖²` after each round.
    pub objective_history: Vec<f64>,
    /// The polytope the final solve ran on.
    pub polytope: CorePolytope,
}

impl ProjectionResult {
    pub fn revenue(&self) -> f64 {
        self.prices.iter().sum()
    }
}

/// KKT residuals of `(p, λ, ρ, μ)` for projecting `reference` onto `poly`.
pub fn kkt_certificate(
    poly: &Polyhedron,
    reference: &[f64],
    p: &[f64],
    row_mult: &[f64],
    lower_mult: &[f64],
    upper_mult: &[f64],
) -> KKTCertificate {
    let n = poly.dim;
    let mut stationarity = 0.0f64;
    for j in 0..n {
        let at_lambda: f64 = poly.rows.iter().zip(row_mult).map(|(r, l)| r.coeffs[j] * l).sum();
        let lo = if poly.lower[j].is_finite() { lower_mult[j] } else { 0.0 };
        let up = if poly.upper[j].is_finite() { upper_mult[j] } else { 0.0 };
        stationarity = stationarity.max((p[j] - reference[j] - at_lambda - lo + up).abs());
    }
    let mut comp = 0.0f64;
    for (r, l) in poly.rows.iter().zip(row_mult) {
        comp = comp.max((l * (r.dot(p) - r.rhs)).abs());
    }
    for j in 0..n {
        if poly.lower[j].is_finite() {
            comp = comp.max((lower_mult[j] * (p[j] - poly.lower[j])).abs());
        } else if lower_mult[j] != 0.0 {
            comp = f64::INFINITY;
        }
        if poly.upper[j].is_finite() {
            comp = comp.max((upper_mult[j] * (p[j] - poly.upper[j])).abs());
        } else if upper_mult[j] != 0.0 {
            comp = f64::INFINITY;
        }
    }
    let dual = row_mult
        .iter()
        .chain(lower_mult)
        .chain(upper_mult)
        .map(|m| (-m).max(0.0))
        .fold(0.0, f64::max);
    KKTCertificate {
        stationarity_residual: stationarity,
        primal_residual: poly.max_violation(p),
        comp_slack_residual: comp,
        dual_residual: dual,
    }
}

fn objective(p: &[f64], r: &[f64]) -> f64 {
    p.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn polyhedron_with(poly: &CorePolytope, extra: &[Row]) -> Polyhedron {
    let mut ph = poly.to_polyhedron();
    ph.rows.extend(extra.iter().cloned());
    ph
}

/// Single active-set solve on an explicit polytope plus `extra` rows.
fn solve_on(
    poly: &CorePolytope,
    extra: &[Row],
    reference: &[f64],
    start: &[f64],
    hint: &[usize],
    opts: &ProjectionOptions,
) -> Result<(Polyhedron, QpSolution)> {
    let ph = polyhedron_with(poly, extra);
    let sol = qp::project(&ph, reference, start, hint, &opts.qp)?;
    Ok((ph, sol))
}

fn assemble(
    poly: CorePolytope,
    ph: &Polyhedron,
    n_extra: usize,
    reference: &[f64],
    sol: QpSolution,
    rounds: usize,
    pivots: usize,
    history: Vec<f64>,
    opts: &ProjectionOptions,
) -> ProjectionResult {
    let rows = sol.row_multipliers(ph);
    let lower = sol.lower_multipliers(ph);
    let upper = sol.upper_multipliers(ph);
    let certificate = kkt_certificate(ph, reference, &sol.x, &rows, &lower, &upper);
    let tight = ph.tight_set(&sol.x, opts.qp.feas_tol.max(1e-9));
    let multipliers_nonunique = ph.rows_dependent(&tight);
    let n_core = rows.len() - n_extra;
    ProjectionResult {
        prices: sol.x,
        multipliers_core: rows[..n_core].to_vec(),
        multipliers_lower: lower,
        multipliers_ir: upper,
        iterations: pivots,
        separation_rounds: rounds,
        certificate,
        multipliers_nonunique,
        objective_history: history,
        polytope: poly,
    }
}

fn check_reference(poly: &CorePolytope, reference: &[f64]) -> Result<()> {
    if reference.len() != poly.dim() {
        return Err(Error::invalid(format!(
            "reference has {} entries, polytope dimension is {}",
            reference.len(),
            poly.dim()
        )));
    }
    Ok(())
}

/// Projects `reference` onto an explicit core polytope.
pub fn project_onto_polytope(poly: &CorePolytope, reference: &[f64]) -> Result<ProjectionResult> {
    project_onto_polytope_with(poly, reference, &ProjectionOptions::default())
}

pub fn project_onto_polytope_with(
    poly: &CorePolytope,
    reference: &[f64],
    opts: &ProjectionOptions,
) -> Result<ProjectionResult> {
    check_reference(poly, reference)?;
    let ph = poly.to_polyhedron();
    let start = match poly.bid_vector() {
        Some(b) if ph.max_violation(&b) <= opts.qp.feas_tol => b,
        _ => crate::lp::feasible_point(&ph)?,
    };
    let (ph, sol) = solve_on(poly, &[], reference, &start, &[], opts)?;
    let pivots = sol.pivots;
    let history = vec![objective(&sol.x, reference)];
    let res = assemble(poly.clone(), &ph, 0, reference, sol, 0, pivots, history, opts);
    finish(res, opts)
}

fn finish(res: ProjectionResult, opts: &ProjectionOptions) -> Result<ProjectionResult> {
    if !res.certificate.holds(opts.kkt_tol) {
        return Err(Error::NumericalFailure {
            message: "projection certificate residuals exceed tolerance".into(),
            residual: res.certificate.max_residual(),
            best: res.prices,
        });
    }
    Ok(res)
}

/// Moves `from` toward `anchor` just far enough to satisfy every row of `ph`.
/// Both points satisfy the bounds, so the bounds stay satisfied.
fn pull_toward(ph: &Polyhedron, from: &[f64], anchor: &[f64]) -> Vec<f64> {
    let mut t: f64 = 0.0;
    for r in &ph.rows {
        let a_from = r.dot(from);
        if a_from < r.rhs {
            let a_anchor = r.dot(anchor);
            let denom = a_anchor - a_from;
            t = if denom > 0.0 { t.max((r.rhs - a_from) / denom) } else { 1.0 };
        }
    }
    let t = t.min(1.0);
    let p: Vec<f64> = from.iter().zip(anchor).map(|(f, a)| f + t * (a - f)).collect();
    if ph.max_violation(&p) <= 1e-9 {
        p
    } else {
        anchor.to_vec()
    }
}

/// Constraint generation around the active-set solver.
///
/// `anchor` must lie in the full core and satisfy `extra`. The working
/// polytope starts from `initial` and grows by one separation row per round.
pub(crate) fn generate(
    instance: &AuctionInstance,
    winners: &Coalition,
    initial: CorePolytope,
    extra: &[Row],
    reference: &[f64],
    anchor: &[f64],
    opts: &ProjectionOptions,
) -> Result<ProjectionResult> {
    let mut poly = initial;
    check_reference(&poly, reference)?;
    let mut start = anchor.to_vec();
    let mut hint: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut pivots = 0;
    for round in 0..opts.max_rounds {
        let (ph, sol) = solve_on(&poly, extra, reference, &start, &hint, opts)?;
        pivots += sol.pivots;
        history.push(objective(&sol.x, reference));
        let clipped: Vec<f64> = sol
            .x
            .iter()
            .zip(winners.members())
            .map(|(x, &w)| x.clamp(0.0, instance.amount(w).to_f64()))
            .collect();
        match find_most_violated_coalition(instance, winners, &clipped)? {
            None => {
                let res = assemble(poly, &ph, extra.len(), reference, sol, round, pivots, history, opts);
                return finish(res, opts);
            }
            Some((c, _)) => {
                let row = CoreConstraint::from_coalition(instance, winners, &c);
                if poly.constraints.contains(&row) {
                    return Err(Error::NumericalFailure {
                        message: "separation returned a constraint already in the working set".into(),
                        residual: ph.max_violation(&sol.x),
                        best: sol.x,
                    });
                }
                // Shift row-indexed hints for the inserted row.
                let at = poly.constraints.len();
                hint = sol
                    .working_set
                    .iter()
                    .map(|&i| if i >= at { i + 1 } else { i })
                    .collect();
                poly.constraints.push(row);
                let next = polyhedron_with(&poly, extra);
                start = pull_toward(&next, &sol.x, anchor);
            }
        }
    }
    Err(Error::NumericalFailure {
        message: format!("constraint generation exceeded {} rounds", opts.max_rounds),
        best: start,
        residual: f64::NAN,
    })
}

/// Projects `reference` onto the full core of `winners`, generating core rows lazily.
pub fn project_onto_core(instance: &AuctionInstance, winners: &Coalition, reference: &[f64]) -> Result<ProjectionResult> {
    project_onto_core_with(instance, winners, reference, &ProjectionOptions::default())
}

pub fn project_onto_core_with(
    instance: &AuctionInstance,
    winners: &Coalition,
    reference: &[f64],
    opts: &ProjectionOptions,
) -> Result<ProjectionResult> {
    let poly = CorePolytope::bids_box(instance, winners);
    let bids = poly.bid_vector().expect("bid box is bounded");
    generate(instance, winners, poly, &[], reference, &bids, opts)
}

/// Checks the seven optimality conditions of the projection at tolerance `tol`.
pub fn verify_kkt(result: &ProjectionResult, polytope: &CorePolytope, reference: &[f64], tol: f64) -> bool {
    let ph = polytope.to_polyhedron();
    if result.prices.len() != ph.dim
        || reference.len() != ph.dim
        || result.multipliers_core.len() != ph.rows.len()
        || result.multipliers_lower.len() != ph.dim
        || result.multipliers_ir.len() != ph.dim
    {
        return false;
    }
    kkt_certificate(
        &ph,
        reference,
        &result.prices,
        &result.multipliers_core,
        &result.multipliers_lower,
        &result.multipliers_ir,
    )
    .holds(tol)
}
