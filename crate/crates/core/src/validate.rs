//! Invariant checks run against a user-supplied instance or star.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, TieBreakPolicy};
use crate::mid::{compute_mid, star_price, sweep_star_curve, PaymentRule};
use crate::money::Money;
use crate::mrc::mrc_quadratic_price;
use crate::polytope::{enumerate_core_polytope, is_in_core};
use crate::projection::{project_onto_core, project_onto_polytope, verify_kkt};
use crate::star::{
    expanded_core_polytope, optimality_residuals, sigma_right_derivative, solve_sigma, star_to_instance,
    StarInstance,
};
use crate::wdp::{solve_wdp, solve_wdp_with, vickrey_prices, WdpMethod, EXHAUSTIVE_MAX_BUYERS};

/// Coalition cap for the enumerated-core cross-check.
const ENUMERATION_CAP: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    /// `None` when the check does not apply to this input.
    pub passed: Option<bool>,
    pub detail: String,
}

impl PropertyCheck {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        PropertyCheck {
            name,
            passed: Some(passed),
            detail: detail.into(),
        }
    }

    fn skipped(name: &'static str, why: impl Into<String>) -> Self {
        PropertyCheck {
            name,
            passed: None,
            detail: why.into(),
        }
    }
}

pub fn all_passed(checks: &[PropertyCheck]) -> bool {
    checks.iter().all(|c| c.passed != Some(false))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn norm2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn validate_instance(instance: &AuctionInstance, tie: &TieBreakPolicy, tol: f64) -> Result<Vec<PropertyCheck>> {
    let mut out = Vec::new();
    let wdp = solve_wdp(instance, tie)?;
    let w = wdp.winners.clone();

    out.push(if instance.n_buyers() <= EXHAUSTIVE_MAX_BUYERS {
        let ex = solve_wdp_with(instance, tie, WdpMethod::Exhaustive)?;
        PropertyCheck::new(
            "wdp_matches_exhaustive",
            ex.welfare == wdp.welfare && ex.winners == w,
            format!("welfare {} vs {}", wdp.welfare, ex.welfare),
        )
    } else {
        PropertyCheck::skipped("wdp_matches_exhaustive", "too many buyers to enumerate")
    });

    let text = serde_json::to_string(instance).map_err(|e| Error::invalid(e.to_string()))?;
    let back: AuctionInstance = serde_json::from_str(&text).map_err(|e| Error::invalid(e.to_string()))?;
    out.push(PropertyCheck::new("json_round_trip", &back == instance, "instance re-parses to itself"));

    if w.is_empty() {
        out.push(PropertyCheck::skipped("pricing", "no winners"));
        return Ok(out);
    }

    let v = vickrey_prices(instance, &w)?;
    let ok = w.members().iter().zip(&v).all(|(&i, p)| *p >= Money::ZERO && *p <= instance.amount(i));
    out.push(PropertyCheck::new("vickrey_within_bids", ok, "0 ≤ v_i ≤ b_i"));
    let vf: Vec<f64> = v.iter().map(|x| x.to_f64()).collect();

    let quad = project_onto_core(instance, &w, &vf)?;
    out.push(PropertyCheck::new(
        "quadratic_in_core",
        is_in_core(instance, &w, &quad.prices)?.in_core,
        "separation oracle finds no blocking coalition",
    ));
    out.push(PropertyCheck::new(
        "quadratic_kkt",
        verify_kkt(&quad, &quad.polytope, &vf, tol),
        format!("max residual {:.3e}", quad.certificate.max_residual()),
    ));
    let monotone = quad.objective_history.windows(2).all(|p| p[1] >= p[0] - tol);
    out.push(PropertyCheck::new("generation_objective_monotone", monotone, format!("{} rounds", quad.separation_rounds)));

    out.push(match enumerate_core_polytope(instance, &w, ENUMERATION_CAP) {
        Ok(poly) => {
            let full = project_onto_polytope(&poly, &vf)?;
            let d = max_diff(&full.prices, &quad.prices);
            PropertyCheck::new("quadratic_matches_enumerated_core", d <= tol, format!("max diff {d:.3e}"))
        }
        Err(Error::ResourceLimit { .. }) => {
            PropertyCheck::skipped("quadratic_matches_enumerated_core", "core too large to enumerate")
        }
        Err(e) => return Err(e),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let mut draw = || -> Vec<f64> {
            w.members().iter().map(|&i| rng.gen_range(0.0..=instance.amount(i).to_f64())).collect()
        };
        let (r1, r2) = (draw(), draw());
        let p1 = project_onto_core(instance, &w, &r1)?.prices;
        let p2 = project_onto_core(instance, &w, &r2)?.prices;
        worst = worst.max(norm2(&p1, &p2) - norm2(&r1, &r2));
    }
    out.push(PropertyCheck::new(
        "projection_nonexpansive",
        worst <= tol,
        format!("max excess {worst:.3e} over 8 pairs"),
    ));

    let mrc = mrc_quadratic_price(instance, &w, &vf)?;
    out.push(PropertyCheck::new(
        "mrc_revenue_minimal",
        mrc.revenue() <= quad.revenue() + tol && mrc.revenue_certificate.gap() <= tol,
        format!(
            "mrc {:.9} ≤ quadratic {:.9}, LP gap {:.3e}",
            mrc.revenue(),
            quad.revenue(),
            mrc.revenue_certificate.gap()
        ),
    ));
    out.push(PropertyCheck::new(
        "mrc_in_core",
        is_in_core(instance, &w, &mrc.prices)?.in_core,
        "separation oracle finds no blocking coalition",
    ));
    Ok(out)
}

pub fn validate_star(star: &StarInstance, theta_max: f64, tol: f64) -> Result<Vec<PropertyCheck>> {
    if !(theta_max > 0.0 && theta_max.is_finite()) {
        return Err(Error::invalid("theta_max must be positive"));
    }
    let mut out = Vec::new();
    let grid: Vec<f64> = (0..=50).map(|i| Money::from_f64(theta_max * i as f64 / 50.0).to_f64()).collect();

    let mut residual: f64 = 0.0;
    let mut bounds_ok = true;
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for &th in &grid {
        let sol = solve_sigma(star, th)?;
        residual = residual.max(optimality_residuals(star, &sol).max());
        for j in 0..star.n_bundles() {
            let l = sol.lambdas[j];
            bounds_ok &= l < star.max_delta(j).to_f64();
            if th > 0.0 {
                bounds_ok &= star.eta(j).to_f64() + th > l;
            }
        }
        monotone &= sol.sigma >= prev - 1e-12;
        prev = sol.sigma;
    }
    out.push(PropertyCheck::new("optimality_conditions", residual <= tol, format!("max residual {residual:.3e}")));
    out.push(PropertyCheck::new("multiplier_bounds", bounds_ok, "λ_j < max Δ and λ_j < η_j + θ"));
    out.push(PropertyCheck::new("sigma_nondecreasing", monotone, "σ along the θ grid"));

    for (name, rule) in [("quadratic_slope_at_most_one", PaymentRule::QuadCore), ("mrc_slope_at_most_one", PaymentRule::MrcQuad)] {
        let mid = compute_mid(&sweep_star_curve(star, theta_max, rule)?);
        out.push(PropertyCheck::new(name, mid.max_slope <= 1.0 + tol, format!("max slope {:.9}", mid.max_slope)));
    }

    let poly = expanded_core_polytope(star, 0.0)?;
    let mut bridge: f64 = 0.0;
    let mut generic: f64 = 0.0;
    for &th in grid.iter().step_by(10) {
        let sol = solve_sigma(star, th)?;
        let qp = project_onto_polytope(&poly, &sol.vickrey_vector(star))?;
        bridge = bridge.max(max_diff(&qp.prices, &sol.relaxed_vector()));
        let (inst, w, _) = star_to_instance(star, Money::from_f64(th))?;
        let v: Vec<f64> = vickrey_prices(&inst, &w)?.iter().map(|x| x.to_f64()).collect();
        generic = generic.max((project_onto_core(&inst, &w, &v)?.prices[0] - sol.p0).abs());
        let mrc = mrc_quadratic_price(&inst, &w, &v)?.prices[0];
        generic = generic.max((mrc - star_price(star, th, PaymentRule::MrcQuad)?).abs());
    }
    out.push(PropertyCheck::new("analytic_matches_expanded_core", bridge <= tol, format!("max diff {bridge:.3e}")));
    out.push(PropertyCheck::new(
        "analytic_matches_generic_instance",
        generic <= 1e-6,
        format!("max diff {generic:.3e}"),
    ));

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for i in 0..20 {
        let th = theta_max * (i as f64 + 0.37) / 20.0;
        let d = match sigma_right_derivative(star, th) {
            Ok(d) => d,
            Err(Error::BoundaryPoint { .. }) => continue,
            Err(e) => return Err(e),
        };
        let fd = (solve_sigma(star, th + h)?.sigma - solve_sigma(star, th)?.sigma) / h;
        worst = worst.max((fd - d).abs());
        used += 1;
    }
    out.push(if used == 0 {
        PropertyCheck::skipped("sigma_derivative", "every sample sat on a breakpoint")
    } else {
        PropertyCheck::new("sigma_derivative", worst <= 1e-4, format!("max gap {worst:.3e} at {used} points"))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Bid;
    use crate::star::StarBundle;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    #[test]
    fn example_passes() {
        let inst = AuctionInstance::new(
            vec!["a".into(), "b".into()],
            vec![
                Bid::new("s1", m("8"), &["a"]),
                Bid::new("s2", m("8"), &["b"]),
                Bid::new("big", m("10"), &["a", "b"]),
            ],
        )
        .unwrap();
        let checks = validate_instance(&inst, &TieBreakPolicy::Lexicographic, 1e-8).unwrap();
        assert!(all_passed(&checks), "{checks:#?}");
        assert!(checks.iter().all(|c| c.passed.is_some()));
    }

    #[test]
    fn star_passes() {
        let star = StarInstance::new(
            vec![StarBundle {
                leaf_bids: vec![m("10"), m("10")],
                leaf_losing: vec![m("5"), m("9")],
                bundle_bid: m("25"),
            }],
            m("2"),
        )
        .unwrap();
        let checks = validate_star(&star, 2.0, 1e-8).unwrap();
        assert!(all_passed(&checks), "{checks:#?}");
    }
}
