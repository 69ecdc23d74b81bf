//! Minimum-revenue core and the quadratic selection inside it.
//!
//! Stage one minimizes `Σp` over the core by simplex plus constraint
//! generation. Stage two projects the reference onto the core intersected
//! with `Σp ≤ R`, starting from the stage-one vertex. The stage-one rows
//! already imply `Σp ≥ R`, so adding the lower side only creates a
//! degenerate pair of opposite rows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, Coalition};
use crate::lp;
use crate::money::Money;
use crate::polytope::{find_most_violated_coalition, maximalize, CoreConstraint, CorePolytope};
use crate::projection::{self, KKTCertificate, ProjectionOptions};
use crate::qp::Row;

/// Evidence that the minimum revenue is attained: a primal point of the
/// working polytope that the separation oracle accepts, plus LP duals whose
/// objective matches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueCertificate {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `max |1 − Aᵀλ − ρ + μ|` for the LP duals.
    pub dual_residual: f64,
    /// Core rows generated before the LP point was unblocked.
    pub generated_constraints: Vec<CoreConstraint>,
    pub row_duals: Vec<f64>,
    pub rounds: usize,
}

impl RevenueCertificate {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrcResult {
    pub min_revenue: f64,
    pub prices: Vec<f64>,
    pub revenue_certificate: RevenueCertificate,
    pub certificate: KKTCertificate,
    pub separation_rounds: usize,
}

impl MrcResult {
    pub fn revenue(&self) -> f64 {
        self.prices.iter().sum()
    }
}

struct Stage1 {
    point: Vec<f64>,
    poly: CorePolytope,
    cert: RevenueCertificate,
}

fn stage_one(instance: &AuctionInstance, winners: &Coalition, max_rounds: usize) -> Result<Stage1> {
    let mut poly = CorePolytope::bids_box(instance, winners);
    // Seed with each loser on its own plus the winners it leaves untouched.
    for l in (0..instance.n_buyers()).filter(|&i| !winners.contains(i) && instance.amount(i) > Money::ZERO) {
        let row = CoreConstraint::from_coalition(instance, winners, &maximalize(instance, winners, &Coalition::new([l])));
        if !poly.constraints.contains(&row) {
            poly.constraints.push(row);
        }
    }
    let ones = vec![1.0; poly.dim()];
    for round in 0..max_rounds {
        let ph = poly.to_polyhedron();
        let sol = lp::minimize(&ones, &ph)?;
        let point: Vec<f64> = sol
            .x
            .iter()
            .zip(&ph.lower)
            .zip(&ph.upper)
            .map(|((x, l), u)| x.clamp(*l, *u))
            .collect();
        match find_most_violated_coalition(instance, winners, &point)? {
            None => {
                let cert = RevenueCertificate {
                    primal_objective: sol.objective,
                    dual_objective: sol.dual_objective(&ph),
                    dual_residual: sol.dual_residual(&ph, &ones),
                    generated_constraints: poly.constraints.clone(),
                    row_duals: sol.row_duals,
                    rounds: round,
                };
                return Ok(Stage1 { point, poly, cert });
            }
            Some((c, _)) => {
                let row = CoreConstraint::from_coalition(instance, winners, &c);
                if poly.constraints.contains(&row) {
                    return Err(Error::NumericalFailure {
                        message: "separation repeated a generated revenue constraint".into(),
                        best: point,
                        residual: ph.max_violation(&sol.x),
                    });
                }
                poly.constraints.push(row);
            }
        }
    }
    Err(Error::NumericalFailure {
        message: format!("revenue constraint generation exceeded {max_rounds} rounds"),
        best: Vec::new(),
        residual: f64::NAN,
    })
}

/// Minimum of `Σ_{i∈W} p_i` over the core of `winners`.
pub fn min_core_revenue(instance: &AuctionInstance, winners: &Coalition) -> Result<f64> {
    Ok(stage_one(instance, winners, projection::MAX_SEPARATION_ROUNDS)?.cert.primal_objective)
}

/// The point of the minimum-revenue core nearest `reference`.
pub fn mrc_quadratic_price(instance: &AuctionInstance, winners: &Coalition, reference: &[f64]) -> Result<MrcResult> {
    mrc_quadratic_price_with(instance, winners, reference, &ProjectionOptions::default())
}

pub fn mrc_quadratic_price_with(
    instance: &AuctionInstance,
    winners: &Coalition,
    reference: &[f64],
    opts: &ProjectionOptions,
) -> Result<MrcResult> {
    let s1 = stage_one(instance, winners, opts.max_rounds)?;
    let r = s1.cert.primal_objective;
    let n = s1.poly.dim();
    let band = [Row {
        coeffs: vec![-1.0; n],
        rhs: -r,
    }];
    let res = projection::generate(instance, winners, s1.poly, &band, reference, &s1.point, opts)?;
    Ok(MrcResult {
        min_revenue: r,
        prices: res.prices,
        revenue_certificate: s1.cert,
        certificate: res.certificate,
        separation_rounds: res.separation_rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Bid;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    #[test]
    fn example_min_revenue_and_price() {
        let inst = AuctionInstance::new(
            vec!["a".into(), "b".into()],
            vec![
                Bid::new("s1", m("8"), &["a"]),
                Bid::new("s2", m("8"), &["b"]),
                Bid::new("big", m("10"), &["a", "b"]),
            ],
        )
        .unwrap();
        let w = Coalition::new([0, 1]);
        assert!((min_core_revenue(&inst, &w).unwrap() - 10.0).abs() < 1e-12);
        let res = mrc_quadratic_price(&inst, &w, &[2.0, 2.0]).unwrap();
        assert!((res.prices[0] - 5.0).abs() < 1e-9 && (res.prices[1] - 5.0).abs() < 1e-9);
        assert!(res.revenue_certificate.gap() < 1e-9);
        assert_eq!(res.revenue_certificate.generated_constraints.len(), 1);
    }

    #[test]
    fn no_losers_means_zero() {
        let inst = AuctionInstance::new(
            vec!["a".into(), "b".into()],
            vec![Bid::new("x", m("3"), &["a"]), Bid::new("y", m("4"), &["b"])],
        )
        .unwrap();
        let w = Coalition::new([0, 1]);
        assert_eq!(min_core_revenue(&inst, &w).unwrap(), 0.0);
        let res = mrc_quadratic_price(&inst, &w, &[1.0, 1.0]).unwrap();
        assert!(res.prices.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn single_winner_pays_losing_bid() {
        let inst = AuctionInstance::new(
            vec!["a".into()],
            vec![Bid::new("w", m("9"), &["a"]), Bid::new("l", m("4.5"), &["a"])],
        )
        .unwrap();
        let w = Coalition::new([0]);
        for r in [0.0, 4.5, 7.0] {
            let res = mrc_quadratic_price(&inst, &w, &[r]).unwrap();
            assert!((res.prices[0] - 4.5).abs() < 1e-9, "r={r} {:?}", res.prices);
        }
    }
}
