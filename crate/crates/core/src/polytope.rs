//! The core region: coalition constraints `A p ≥ β` plus bounds `lower ≤ p ≤ b`.
//!
//! Coalition `C` contributes the row `Σ_{i ∈ W∖C} p_i ≥ Σ_{j ∈ C∖W} b_j`.
//! Blocking coalitions are found by a separation oracle that reuses the
//! set-packing search with winners valued at their current price and losers
//! at their bid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, Coalition, ItemSet};
use crate::money::Money;
use crate::qp::{Polyhedron, Row};
use crate::wdp::max_weight_packing;

/// Violations at or below this many money units do not count as blocking.
pub const VIOLATION_TOL: f64 = 1e-9;

/// One coalition core constraint over the winner price vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoreConstraint {
    /// Buyer ids in the coalition `C`.
    pub coalition: Vec<String>,
    /// Indicator of `W ∖ C` over winner positions.
    pub indicator: Vec<bool>,
    /// `β_C = Σ_{j ∈ C∖W} b_j`.
    pub rhs: Money,
}

impl CoreConstraint {
    pub fn from_coalition(instance: &AuctionInstance, winners: &Coalition, c: &Coalition) -> Self {
        let indicator = winners.members().iter().map(|w| !c.contains(*w)).collect();
        let rhs = c
            .members()
            .iter()
            .filter(|i| !winners.contains(**i))
            .map(|&i| instance.amount(i))
            .sum();
        CoreConstraint {
            coalition: c.ids(instance).into_iter().map(String::from).collect(),
            indicator,
            rhs,
        }
    }

    pub fn lhs(&self, p: &[f64]) -> f64 {
        self.indicator.iter().zip(p).filter(|(on, _)| **on).map(|(_, x)| x).sum()
    }

    pub fn support(&self) -> usize {
        self.indicator.iter().filter(|b| **b).count()
    }

    /// True if `self` implies `other` for nonnegative prices.
    fn dominates(&self, other: &CoreConstraint) -> bool {
        self.rhs >= other.rhs && self.indicator.iter().zip(&other.indicator).all(|(a, b)| !*a || *b)
    }
}

/// Working set of core constraints plus price bounds, indexed by winner position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorePolytope {
    #[serde(skip)]
    pub winners: Coalition,
    pub winner_ids: Vec<String>,
    pub constraints: Vec<CoreConstraint>,
    /// Individual rationality bounds; `None` means unbounded above.
    pub upper_bounds: Vec<Option<Money>>,
    pub lower_bounds: Vec<Money>,
}

impl CorePolytope {
    /// Box `[0, b]` with no coalition rows.
    pub fn bids_box(instance: &AuctionInstance, winners: &Coalition) -> Self {
        CorePolytope {
            winners: winners.clone(),
            winner_ids: winners.ids(instance).into_iter().map(String::from).collect(),
            constraints: Vec::new(),
            upper_bounds: winners.members().iter().map(|&w| Some(instance.amount(w))).collect(),
            lower_bounds: vec![Money::ZERO; winners.len()],
        }
    }

    /// Box `[0, b]` plus `constraints`; single-winner rows become lower bounds.
    pub fn from_constraints(instance: &AuctionInstance, winners: &Coalition, constraints: Vec<CoreConstraint>) -> Self {
        let mut poly = Self::bids_box(instance, winners);
        for c in constraints {
            if c.support() == 1 {
                let k = c.indicator.iter().position(|b| *b).unwrap();
                poly.lower_bounds[k] = poly.lower_bounds[k].max(c.rhs);
            } else {
                poly.constraints.push(c);
            }
        }
        poly
    }

    pub fn dim(&self) -> usize {
        self.lower_bounds.len()
    }

    pub fn to_polyhedron(&self) -> Polyhedron {
        Polyhedron {
            dim: self.dim(),
            rows: self
                .constraints
                .iter()
                .map(|c| Row {
                    coeffs: c.indicator.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
                    rhs: c.rhs.to_f64(),
                })
                .collect(),
            lower: self.lower_bounds.iter().map(|m| m.to_f64()).collect(),
            upper: self
                .upper_bounds
                .iter()
                .map(|u| u.map_or(f64::INFINITY, |m| m.to_f64()))
                .collect(),
        }
    }

    /// Largest violation of any row or bound at `p` (0 when feasible).
    pub fn max_violation(&self, p: &[f64]) -> f64 {
        self.to_polyhedron().max_violation(p)
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.max_violation(p) <= tol
    }

    /// The winners' bids, which always satisfy every core constraint.
    pub fn bid_vector(&self) -> Option<Vec<f64>> {
        self.upper_bounds.iter().map(|u| u.map(|m| m.to_f64())).collect()
    }
}

/// Result of a core membership test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreMembership {
    pub in_core: bool,
    /// Blocking coalitions found, each with its violation amount. The
    /// separation oracle reports the most violated one.
    pub violated: Vec<(Vec<String>, f64)>,
}

fn check_prices(instance: &AuctionInstance, winners: &Coalition, p: &[f64]) -> Result<()> {
    if p.len() != winners.len() {
        return Err(Error::invalid(format!(
            "price vector has {} entries for {} winners",
            p.len(),
            winners.len()
        )));
    }
    for (k, &w) in winners.members().iter().enumerate() {
        let b = instance.amount(w).to_f64();
        if !(p[k] >= -VIOLATION_TOL && p[k] <= b + VIOLATION_TOL) {
            return Err(Error::invalid(format!(
                "price {} of {} is outside [0, {b}]",
                p[k],
                instance.buyer_id(w)
            )));
        }
    }
    Ok(())
}

/// Extend a blocking coalition with every winner not conflicting with its
/// losers. The constraint row only gets tighter.
pub(crate) fn maximalize(instance: &AuctionInstance, winners: &Coalition, c: &Coalition) -> Coalition {
    let losers: Vec<usize> = c.members().iter().copied().filter(|i| !winners.contains(*i)).collect();
    let mut used = ItemSet::empty(instance.items().len());
    for &l in &losers {
        used.union_with(instance.bundle(l));
    }
    let keep = winners.members().iter().copied().filter(|&w| !instance.bundle(w).intersects(&used));
    Coalition::new(losers.into_iter().chain(keep))
}

/// Feasible coalition maximizing `Σ_{i∈C} (b_i·1{i∉W} + p_i·1{i∈W}) − Σ_{i∈W} p_i`,
/// or `None` when that maximum is at most [`VIOLATION_TOL`].
pub fn find_most_violated_coalition(
    instance: &AuctionInstance,
    winners: &Coalition,
    p: &[f64],
) -> Result<Option<(Coalition, f64)>> {
    check_prices(instance, winners, p)?;
    let weights: Vec<f64> = (0..instance.n_buyers())
        .map(|i| match winners.position(i) {
            Some(k) => p[k],
            None => instance.amount(i).to_f64(),
        })
        .collect();
    let (best, c) = max_weight_packing(instance, &weights, |_| true);
    let violation = best - p.iter().sum::<f64>();
    if violation <= VIOLATION_TOL {
        return Ok(None);
    }
    Ok(Some((maximalize(instance, winners, &c), violation)))
}

pub fn is_in_core(instance: &AuctionInstance, winners: &Coalition, p: &[f64]) -> Result<CoreMembership> {
    let found = find_most_violated_coalition(instance, winners, p)?;
    Ok(match found {
        None => CoreMembership {
            in_core: true,
            violated: Vec::new(),
        },
        Some((c, v)) => CoreMembership {
            in_core: false,
            violated: vec![(c.ids(instance).into_iter().map(String::from).collect(), v)],
        },
    })
}

/// Loser sets whose conflict graph is connected. A disconnected loser set
/// yields a row equal to the sum of its components' rows, which is implied.
fn conflicts_connected(instance: &AuctionInstance, winners: &Coalition, losers: &[usize]) -> bool {
    if losers.len() <= 1 {
        return true;
    }
    let conflicts: Vec<Vec<usize>> = losers
        .iter()
        .map(|&l| {
            winners
                .members()
                .iter()
                .copied()
                .filter(|&w| instance.bundle(w).intersects(instance.bundle(l)))
                .collect()
        })
        .collect();
    let mut seen = vec![false; losers.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for b in 0..losers.len() {
            if !seen[b] && conflicts[a].iter().any(|w| conflicts[b].contains(w)) {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// All non-redundant core constraints, by enumerating feasible loser sets.
///
/// For each feasible set of losers `L` only the maximal coalition
/// `L ∪ {w ∈ W : S_w ∩ S_L = ∅}` is kept, since every other coalition with the
/// same losers gives a weaker row. The `p_j ≥ 0` rows (`C = W − j`) are added
/// explicitly. Rows implied by nonnegativity (`β = 0` with support ≠ 1), by a
/// single other row (smaller support, larger rhs) or by a disconnected loser
/// set are dropped.
pub fn enumerate_core_constraints(
    instance: &AuctionInstance,
    winners: &Coalition,
    max_coalitions: usize,
) -> Result<Vec<CoreConstraint>> {
    let losers: Vec<usize> = (0..instance.n_buyers()).filter(|i| !winners.contains(*i)).collect();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    fn rec(
        instance: &AuctionInstance,
        losers: &[usize],
        k: usize,
        used: &mut ItemSet,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> Result<()> {
        if k == losers.len() {
            if out.len() >= cap {
                return Err(Error::ResourceLimit {
                    what: "feasible coalitions",
                    count: out.len() + 1,
                    limit: cap,
                });
            }
            out.push(chosen.clone());
            return Ok(());
        }
        let l = losers[k];
        if !instance.bundle(l).intersects(used) {
            used.union_with(instance.bundle(l));
            chosen.push(l);
            rec(instance, losers, k + 1, used, chosen, out, cap)?;
            chosen.pop();
            used.difference_with(instance.bundle(l));
        }
        rec(instance, losers, k + 1, used, chosen, out, cap)
    }
    let mut used = ItemSet::empty(instance.items().len());
    rec(instance, &losers, 0, &mut used, &mut Vec::new(), &mut sets, max_coalitions)?;

    let mut rows: Vec<CoreConstraint> = Vec::new();
    for &w in winners.members() {
        let c = Coalition::new(winners.members().iter().copied().filter(|&x| x != w));
        rows.push(CoreConstraint::from_coalition(instance, winners, &c));
    }
    for l in sets {
        if !conflicts_connected(instance, winners, &l) {
            continue;
        }
        let c = maximalize(instance, winners, &Coalition::new(l));
        let row = CoreConstraint::from_coalition(instance, winners, &c);
        if row.rhs == Money::ZERO && row.support() != 1 {
            continue;
        }
        rows.push(row);
    }
    let kept: Vec<CoreConstraint> = rows
        .iter()
        .enumerate()
        .filter(|(i, r)| {
            !rows.iter().enumerate().any(|(j, o)| {
                j != *i && o.dominates(r) && (!r.dominates(o) || j < *i)
            })
        })
        .map(|(_, r)| r.clone())
        .collect();
    Ok(kept)
}

/// Fully enumerated core polytope (small instances only).
pub fn enumerate_core_polytope(
    instance: &AuctionInstance,
    winners: &Coalition,
    max_coalitions: usize,
) -> Result<CorePolytope> {
    let rows = enumerate_core_constraints(instance, winners, max_coalitions)?;
    Ok(CorePolytope::from_constraints(instance, winners, rows))
}
