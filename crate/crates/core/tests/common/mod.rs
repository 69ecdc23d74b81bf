//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use coreprice::wdp::enumerate_feasible_coalitions;
use coreprice::{AuctionInstance, Coalition, CorePolytope, Money, StarInstance};

pub fn m(s: &str) -> Money {
    s.parse().unwrap()
}

pub fn example() -> (AuctionInstance, Coalition) {
    let inst = AuctionInstance::new(
        vec!["a".into(), "b".into()],
        vec![
            coreprice::Bid::new("s1", m("8"), &["a"]),
            coreprice::Bid::new("s2", m("8"), &["b"]),
            coreprice::Bid::new("big", m("10"), &["a", "b"]),
        ],
    )
    .unwrap();
    (inst, Coalition::new([0, 1]))
}

/// Blocked iff some feasible coalition beats the winners' payments, checked
/// over every feasible coalition.
pub fn blocked_exhaustive(instance: &AuctionInstance, winners: &Coalition, p: &[f64], tol: f64) -> bool {
    enumerate_feasible_coalitions(instance, usize::MAX).unwrap().iter().any(|c| {
        let lhs: f64 = winners
            .members()
            .iter()
            .enumerate()
            .filter(|(_, w)| !c.contains(**w))
            .map(|(k, _)| p[k])
            .sum();
        let rhs: f64 = c
            .members()
            .iter()
            .filter(|i| !winners.contains(**i))
            .map(|&i| instance.amount(i).to_f64())
            .sum();
        lhs < rhs - tol
    })
}

/// Dykstra's alternating projections onto the rows and the box of `poly`.
/// Converges to the Euclidean projection; used as a solver-independent check.
pub fn dykstra(poly: &CorePolytope, reference: &[f64], sweeps: usize) -> Vec<f64> {
    let ph = poly.to_polyhedron();
    let n = ph.dim;
    let sets = ph.rows.len() + 1;
    let mut x = reference.to_vec();
    let mut incr = vec![vec![0.0; n]; sets];
    for _ in 0..sets * sweeps {
        for s in 0..sets {
            let y: Vec<f64> = x.iter().zip(&incr[s]).map(|(a, b)| a + b).collect();
            let proj: Vec<f64> = if s < ph.rows.len() {
                let r = &ph.rows[s];
                let ay = r.dot(&y);
                let nn: f64 = r.coeffs.iter().map(|c| c * c).sum();
                if ay >= r.rhs || nn == 0.0 {
                    y.clone()
                } else {
                    let t = (r.rhs - ay) / nn;
                    y.iter().zip(&r.coeffs).map(|(v, c)| v + t * c).collect()
                }
            } else {
                y.iter()
                    .enumerate()
                    .map(|(i, v)| v.clamp(ph.lower[i], ph.upper[i]))
                    .collect()
            };
            incr[s] = y.iter().zip(&proj).map(|(a, b)| a - b).collect();
            x = proj;
        }
    }
    x
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A θ range covering every Vickrey breakpoint and the MRC threshold.
pub fn theta_max(star: &StarInstance) -> f64 {
    let mut t = 1.0f64;
    for j in 0..star.n_bundles() {
        t = t.max((star.max_delta(j) - star.eta(j)).to_f64() * 1.5);
    }
    if let Some(v2) = star.second_threshold() {
        t = t.max((v2 - star.v0()).to_f64() * 1.5);
    }
    t
}

/// `n` evenly spaced θ values on the micro-unit grid, from 0 to `max`.
pub fn theta_grid(max: f64, n: usize) -> Vec<Money> {
    (0..n)
        .map(|i| Money::from_f64(max * i as f64 / (n - 1) as f64))
        .collect()
}
