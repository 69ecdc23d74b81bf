//! Closed-form analysis of the star network.
//!
//! Item zero is shared by `J` bundles; bundle `j` also contains leaf items
//! `(j,1) … (j,n_j)`. Every item has one winning and one losing single-item
//! bidder, and bundle bidder `j` loses with bid `C_j`. Buyer zero bids
//! `b_0 = v_0 + θ`.
//!
//! Projecting the Vickrey vector onto the core without buyer zero's upper
//! bound reduces to one multiplier `λ_j` per bundle constraint. With
//! `σ = Σ_j λ_j`, each `λ_j = φ_j(σ)` where `φ_j` solves
//! `s + η_j = χ_j(θ, l)` and
//! `χ_j(θ, l) = Σ_k max{min{η_j + θ, Δ_{j,k}} − l, 0}`.
//! `σ` is the unique fixed point of `s ↦ Σ_j φ_j(s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, Bid, Coalition, TieBreakPolicy};
use crate::money::Money;
use crate::polytope::{CoreConstraint, CorePolytope};
use crate::wdp::solve_wdp;

/// Gap below which a θ is treated as sitting on a kink of `σ` or of the
/// multiplier set.
pub const BOUNDARY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarBundle {
    /// Winning bids `b_{j,k}` on the leaves.
    pub leaf_bids: Vec<Money>,
    /// Losing bids `b̲_{j,k}` on the leaves.
    pub leaf_losing: Vec<Money>,
    /// Losing bid `C_j` on the whole bundle.
    pub bundle_bid: Money,
}

/// Raw star description as read from JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarSpec {
    pub bundles: Vec<StarBundle>,
    /// Losing bid `b̲_0` on item zero.
    pub item_zero_losing: Money,
}

/// Validated star with the derived quantities `v_0`, `η_j`, `Δ_{j,k}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StarSpec", into = "StarSpec")]
pub struct StarInstance {
    bundles: Vec<StarBundle>,
    item_zero_losing: Money,
    v0: Money,
    eta: Vec<Money>,
    delta: Vec<Vec<Money>>,
}

impl TryFrom<StarSpec> for StarInstance {
    type Error = Error;
    fn try_from(s: StarSpec) -> Result<Self> {
        StarInstance::new(s.bundles, s.item_zero_losing)
    }
}

impl From<StarInstance> for StarSpec {
    fn from(s: StarInstance) -> StarSpec {
        StarSpec {
            bundles: s.bundles,
            item_zero_losing: s.item_zero_losing,
        }
    }
}

impl StarInstance {
    pub fn new(bundles: Vec<StarBundle>, item_zero_losing: Money) -> Result<Self> {
        if bundles.is_empty() {
            return Err(Error::invalid("star needs at least one bundle"));
        }
        if item_zero_losing.is_negative() {
            return Err(Error::invalid("negative losing bid on item zero"));
        }
        let mut delta = Vec::with_capacity(bundles.len());
        for (j, b) in bundles.iter().enumerate() {
            let j1 = j + 1;
            if b.leaf_bids.is_empty() {
                return Err(Error::invalid(format!("bundle {j1} has no leaves")));
            }
            if b.leaf_bids.len() != b.leaf_losing.len() {
                return Err(Error::invalid(format!("bundle {j1}: leaf_bids and leaf_losing differ in length")));
            }
            if b.bundle_bid.is_negative()
                || b.leaf_bids.iter().chain(&b.leaf_losing).any(|m| m.is_negative())
            {
                return Err(Error::invalid(format!("bundle {j1} has a negative bid")));
            }
            let d: Vec<Money> = b.leaf_bids.iter().zip(&b.leaf_losing).map(|(w, l)| *w - *l).collect();
            if let Some(k) = d.iter().position(|x| x.is_negative()) {
                return Err(Error::invalid(format!(
                    "leaf ({j1},{}) has losing bid above winning bid",
                    k + 1
                )));
            }
            if d.iter().all(|x| *x == Money::ZERO) {
                return Err(Error::invalid(format!(
                    "bundle {j1} has no leaf with positive bid gap"
                )));
            }
            delta.push(d);
        }
        let v0 = bundles
            .iter()
            .map(|b| b.bundle_bid - b.leaf_bids.iter().copied().sum::<Money>())
            .fold(item_zero_losing, Money::max);
        let eta = bundles
            .iter()
            .map(|b| v0 + b.leaf_bids.iter().copied().sum::<Money>() - b.bundle_bid)
            .collect();
        Ok(StarInstance {
            bundles,
            item_zero_losing,
            v0,
            eta,
            delta,
        })
    }

    pub fn bundles(&self) -> &[StarBundle] {
        &self.bundles
    }

    pub fn n_bundles(&self) -> usize {
        self.bundles.len()
    }

    pub fn n_leaves(&self, j: usize) -> usize {
        self.bundles[j].leaf_bids.len()
    }

    pub fn total_leaves(&self) -> usize {
        self.bundles.iter().map(|b| b.leaf_bids.len()).sum()
    }

    pub fn item_zero_losing(&self) -> Money {
        self.item_zero_losing
    }

    /// Vickrey price of buyer zero, the smallest bid with which it still wins.
    pub fn v0(&self) -> Money {
        self.v0
    }

    pub fn eta(&self, j: usize) -> Money {
        self.eta[j]
    }

    pub fn delta(&self, j: usize, k: usize) -> Money {
        self.delta[j][k]
    }

    pub fn max_delta(&self, j: usize) -> Money {
        self.delta[j].iter().copied().max().unwrap()
    }

    /// `V_j = max{C_j − Σ_k b̲_{j,k}, 0}`.
    pub fn mrc_threshold(&self, j: usize) -> Money {
        let b = &self.bundles[j];
        (b.bundle_bid - b.leaf_losing.iter().copied().sum::<Money>()).max(Money::ZERO)
    }

    /// Second largest `V_j`, absent when `J = 1`.
    pub fn second_threshold(&self) -> Option<Money> {
        let mut v: Vec<Money> = (0..self.n_bundles()).map(|j| self.mrc_threshold(j)).collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v.get(1).copied()
    }

    /// Same star with every money value multiplied by `factor`.
    pub fn scaled(&self, factor: i64) -> Result<Self> {
        let bundles = self
            .bundles
            .iter()
            .map(|b| StarBundle {
                leaf_bids: b.leaf_bids.iter().map(|m| *m * factor).collect(),
                leaf_losing: b.leaf_losing.iter().map(|m| *m * factor).collect(),
                bundle_bid: b.bundle_bid * factor,
            })
            .collect();
        StarInstance::new(bundles, self.item_zero_losing * factor)
    }

    /// θ values where `η_j + θ` crosses some `Δ_{j,k}`, within `(0, theta_max)`.
    pub fn vickrey_breakpoints(&self, theta_max: f64) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n_bundles())
            .flat_map(|j| self.delta[j].iter().map(move |d| (*d - self.eta[j]).to_f64()))
            .filter(|t| *t > 0.0 && *t < theta_max)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn check_theta(theta: f64) -> Result<()> {
        if theta >= 0.0 && theta.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("theta must be finite and ≥ 0, got {theta}")))
        }
    }

    /// `min{η_j + θ, Δ_{j,k}}` for each leaf of bundle `j`.
    fn drops(&self, theta: f64, j: usize) -> Vec<f64> {
        let cap = self.eta[j].to_f64() + theta;
        self.delta[j].iter().map(|d| d.to_f64().min(cap)).collect()
    }
}

/// Leaf Vickrey prices `v_{j,k,θ} = b_{j,k} − min{η_j + θ, Δ_{j,k}}`, one vector per bundle.
pub fn star_vickrey(star: &StarInstance, theta: f64) -> Result<Vec<Vec<f64>>> {
    StarInstance::check_theta(theta)?;
    Ok((0..star.n_bundles())
        .map(|j| {
            star.drops(theta, j)
                .iter()
                .zip(&star.bundles[j].leaf_bids)
                .map(|(d, b)| b.to_f64() - d)
                .collect()
        })
        .collect())
}

/// `χ_j(θ, l) = Σ_k max{min{η_j + θ, Δ_{j,k}} − l, 0}`.
pub fn chi(star: &StarInstance, theta: f64, j: usize, l: f64) -> f64 {
    star.drops(theta, j).iter().map(|d| (d - l).max(0.0)).sum()
}

/// Smallest `l ≥ 0` with `χ_j(θ, l) ≤ s + η_j`, i.e. `φ_j(s)`.
pub fn phi(star: &StarInstance, theta: f64, j: usize, s: f64) -> f64 {
    let target = s + star.eta[j].to_f64();
    let mut d = star.drops(theta, j);
    if d.iter().sum::<f64>() <= target {
        return 0.0;
    }
    d.sort_by(|a, b| b.total_cmp(a));
    // On [d_{m+1}, d_m] the top m terms are active: Σ_{i≤m} d_i − m·l = target.
    let mut prefix = 0.0;
    for m in 1..=d.len() {
        prefix += d[m - 1];
        let l = (prefix - target) / m as f64;
        let next = if m < d.len() { d[m] } else { 0.0 };
        if l >= next && l <= d[m - 1] {
            return l.max(0.0);
        }
    }
    // Rounding pushed every candidate just outside its piece; the residual is
    // monotone, so fall back to the closest piece.
    let mut prefix = 0.0;
    let mut best = (f64::INFINITY, 0.0);
    for m in 1..=d.len() {
        prefix += d[m - 1];
        let next = if m < d.len() { d[m] } else { 0.0 };
        let l = ((prefix - target) / m as f64).clamp(next, d[m - 1]);
        let r = (chi_sorted(&d, l) - target).abs();
        if r < best.0 {
            best = (r, l);
        }
    }
    best.1.max(0.0)
}

fn chi_sorted(d: &[f64], l: f64) -> f64 {
    d.iter().map(|x| (x - l).max(0.0)).sum()
}

/// Star prices at one θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarSolution {
    pub theta: f64,
    pub sigma: f64,
    pub lambdas: Vec<f64>,
    /// `ṽp_0 = v_0 + σ`.
    pub p0_relaxed: f64,
    /// `min{v_0 + θ, v_0 + σ}`.
    pub p0: f64,
    pub leaf_vickrey: Vec<Vec<f64>>,
    /// `min{v_{j,k} + λ_j, b_{j,k}}`.
    pub leaf_prices_relaxed: Vec<Vec<f64>>,
}

impl StarSolution {
    /// Relaxed vector in winner order: buyer zero, then leaves by `(j, k)`.
    pub fn relaxed_vector(&self) -> Vec<f64> {
        std::iter::once(self.p0_relaxed)
            .chain(self.leaf_prices_relaxed.iter().flatten().copied())
            .collect()
    }

    /// Vickrey vector in winner order.
    pub fn vickrey_vector(&self, star: &StarInstance) -> Vec<f64> {
        std::iter::once(star.v0().to_f64())
            .chain(self.leaf_vickrey.iter().flatten().copied())
            .collect()
    }
}

fn total_phi(star: &StarInstance, theta: f64, s: f64) -> f64 {
    (0..star.n_bundles()).map(|j| phi(star, theta, j, s)).sum()
}

/// Solves `σ = Σ_j φ_j(σ)` exactly.
///
/// `Σ_j φ_j` is linear between the values of `s` at which some `φ_j` crosses
/// a `Δ` level or reaches zero, so the fixed point is bracketed by those
/// breakpoints and then read off the linear piece.
pub fn solve_sigma(star: &StarInstance, theta: f64) -> Result<StarSolution> {
    StarInstance::check_theta(theta)?;
    let mut knots = vec![0.0];
    for j in 0..star.n_bundles() {
        let eta = star.eta[j].to_f64();
        let d = star.drops(theta, j);
        for &level in d.iter().chain(std::iter::once(&0.0)) {
            let s = chi(star, theta, j, level) - eta;
            if s > 0.0 {
                knots.push(s);
            }
        }
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let h = |s: f64| s - total_phi(star, theta, s);

    let mut sigma = None;
    let mut prev = (0.0, h(0.0));
    if prev.1 >= 0.0 {
        sigma = Some(0.0);
    }
    for &k in &knots[1..] {
        if sigma.is_some() {
            break;
        }
        let hk = h(k);
        if hk >= 0.0 {
            let (a, ha) = prev;
            sigma = Some(if hk == ha { k } else { a - ha * (k - a) / (hk - ha) });
        }
        prev = (k, hk);
    }
    // Beyond the last knot every φ_j vanishes, so h(s) = s > 0 there.
    let sigma = sigma.unwrap_or(prev.0).max(0.0);

    let lambdas: Vec<f64> = (0..star.n_bundles()).map(|j| phi(star, theta, j, sigma)).collect();
    let sigma: f64 = lambdas.iter().sum();
    let leaf_vickrey = star_vickrey(star, theta)?;
    let leaf_prices_relaxed = leaf_vickrey
        .iter()
        .zip(&lambdas)
        .zip(&star.bundles)
        .map(|((v, l), b)| v.iter().zip(&b.leaf_bids).map(|(v, b)| (v + l).min(b.to_f64())).collect())
        .collect();
    let v0 = star.v0.to_f64();
    Ok(StarSolution {
        theta,
        sigma,
        lambdas,
        p0_relaxed: v0 + sigma,
        p0: (v0 + theta).min(v0 + sigma),
        leaf_vickrey,
        leaf_prices_relaxed,
    })
}

/// Residuals of the optimality conditions characterizing the relaxed projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalityResiduals {
    /// Largest negative part of any `λ_j`.
    pub nonnegativity: f64,
    /// `|ṽp_0 − v_0 − Σ_j λ_j|`.
    pub hub_price: f64,
    /// `max |ṽp_{j,k} − min{v_{j,k} + λ_j, b_{j,k}}|`.
    pub leaf_prices: f64,
    /// `max_j (χ_j(θ, λ_j) − σ − η_j)⁺`.
    pub inequality: f64,
    /// `max |σ + η_j − χ_j(θ, λ_j)|` over `λ_j > 0`.
    pub equality: f64,
}

impl OptimalityResiduals {
    pub fn max(&self) -> f64 {
        self.nonnegativity
            .max(self.hub_price)
            .max(self.leaf_prices)
            .max(self.inequality)
            .max(self.equality)
    }
}

pub fn optimality_residuals(star: &StarInstance, sol: &StarSolution) -> OptimalityResiduals {
    let theta = sol.theta;
    let sum: f64 = sol.lambdas.iter().sum();
    let mut r = OptimalityResiduals {
        nonnegativity: sol.lambdas.iter().map(|l| (-l).max(0.0)).fold(0.0, f64::max),
        hub_price: (sol.p0_relaxed - star.v0.to_f64() - sum).abs(),
        leaf_prices: 0.0,
        inequality: 0.0,
        equality: 0.0,
    };
    for j in 0..star.n_bundles() {
        let l = sol.lambdas[j];
        for (k, b) in star.bundles[j].leaf_bids.iter().enumerate() {
            let expect = (sol.leaf_vickrey[j][k] + l).min(b.to_f64());
            r.leaf_prices = r.leaf_prices.max((sol.leaf_prices_relaxed[j][k] - expect).abs());
        }
        let gap = sum + star.eta[j].to_f64() - chi(star, theta, j, l);
        r.inequality = r.inequality.max((-gap).max(0.0));
        if l > 0.0 {
            r.equality = r.equality.max(gap.abs());
        }
    }
    r
}

/// The core without buyer zero's upper bound: `p_0 + Σ_k p_{j,k} ≥ C_j`,
/// `p_{j,k} ∈ [b̲_{j,k}, b_{j,k}]`, `p_0 ≥ v_0`. It does not depend on θ; the
/// argument is only validated.
pub fn expanded_core_polytope(star: &StarInstance, theta: f64) -> Result<CorePolytope> {
    StarInstance::check_theta(theta)?;
    let layout = Layout::new(star);
    let mut winner_ids = vec!["w0".to_string()];
    let mut upper = vec![None];
    let mut lower = vec![star.v0];
    for (j, b) in star.bundles.iter().enumerate() {
        for k in 0..b.leaf_bids.len() {
            winner_ids.push(format!("w{}.{}", j + 1, k + 1));
            upper.push(Some(b.leaf_bids[k]));
            lower.push(b.leaf_losing[k]);
        }
    }
    let constraints = (0..star.n_bundles())
        .map(|j| {
            let mut indicator = vec![false; layout.n_winners];
            indicator[0] = true;
            for k in 0..star.n_leaves(j) {
                indicator[layout.leaf_pos(j, k)] = true;
            }
            let coalition = std::iter::once(format!("c{}", j + 1))
                .chain(
                    winner_ids
                        .iter()
                        .zip(&indicator)
                        .filter(|(_, on)| !**on)
                        .map(|(id, _)| id.clone()),
                )
                .collect();
            CoreConstraint {
                coalition,
                indicator,
                rhs: star.bundles[j].bundle_bid,
            }
        })
        .collect();
    Ok(CorePolytope {
        winners: layout.winners(),
        winner_ids,
        constraints,
        upper_bounds: upper,
        lower_bounds: lower,
    })
}

/// Buyer index layout of the exported instance.
struct Layout {
    offsets: Vec<usize>,
    n_winners: usize,
}

impl Layout {
    fn new(star: &StarInstance) -> Self {
        let mut offsets = Vec::new();
        let mut at = 1;
        for j in 0..star.n_bundles() {
            offsets.push(at);
            at += star.n_leaves(j);
        }
        Layout { offsets, n_winners: at }
    }

    /// Winner position of leaf `(j, k)`.
    fn leaf_pos(&self, j: usize, k: usize) -> usize {
        self.offsets[j] + k
    }

    /// Winners are the even buyer indices below `2·n_winners`.
    fn winners(&self) -> Coalition {
        Coalition::new((0..self.n_winners).map(|i| 2 * i))
    }
}

/// Generic instance for the star with buyer zero bidding `v_0 + θ`, plus the
/// designated winners (buyer zero and the winning leaf bidders).
///
/// Buyers are `w0, l0`, then `w{j}.{k}, l{j}.{k}` per leaf, then `c{j}`.
/// Items are `0` and `{j}.{k}`. The returned tie policy prefers the designated
/// winners, which matters when `θ = 0` or some `Δ_{j,k} = 0`.
pub fn star_to_instance(star: &StarInstance, theta: Money) -> Result<(AuctionInstance, Coalition, TieBreakPolicy)> {
    if theta.is_negative() {
        return Err(Error::invalid("theta must be ≥ 0"));
    }
    let mut items = vec!["0".to_string()];
    let mut bids = vec![
        Bid::new("w0", star.v0 + theta, &["0"]),
        Bid::new("l0", star.item_zero_losing, &["0"]),
    ];
    for (j, b) in star.bundles.iter().enumerate() {
        for k in 0..b.leaf_bids.len() {
            let item = format!("{}.{}", j + 1, k + 1);
            bids.push(Bid::new(format!("w{item}"), b.leaf_bids[k], &[&item]));
            bids.push(Bid::new(format!("l{item}"), b.leaf_losing[k], &[&item]));
            items.push(item);
        }
    }
    for (j, b) in star.bundles.iter().enumerate() {
        let mut bundle = vec!["0".to_string()];
        bundle.extend((0..b.leaf_bids.len()).map(|k| format!("{}.{}", j + 1, k + 1)));
        let refs: Vec<&str> = bundle.iter().map(String::as_str).collect();
        bids.push(Bid::new(format!("c{}", j + 1), b.bundle_bid, &refs));
    }
    let instance = AuctionInstance::new(items, bids)?;
    let winners = Layout::new(star).winners();
    let tie = TieBreakPolicy::PreferCoalition(winners.clone());
    let sol = solve_wdp(&instance, &tie)?;
    if sol.winners != winners {
        return Err(Error::Construction(
            "designated star winners are not efficient in the exported instance".into(),
        ));
    }
    Ok((instance, winners, tie))
}

/// Right derivative of `σ_θ` in θ.
///
/// With `E = {j : λ_j > 0}`, `c_j = |{k : Δ_{j,k} > η_j + θ}|` and
/// `m_j = |{k : Δ_{j,k} > λ_j}|`, the rate is
/// `Σ_E (c_j / m_j) / (1 + Σ_E 1 / m_j)`. Points where a count or the set `E`
/// is about to change are rejected.
pub fn sigma_right_derivative(star: &StarInstance, theta: f64) -> Result<f64> {
    let sol = solve_sigma(star, theta)?;
    let boundary = |reason: String| Err(Error::BoundaryPoint { theta, reason });
    let mut num = 0.0;
    let mut den = 1.0;
    for j in 0..star.n_bundles() {
        let eta = star.eta[j].to_f64();
        let l = sol.lambdas[j];
        for (k, d) in star.delta[j].iter().enumerate() {
            let d = d.to_f64();
            if (eta + theta - d).abs() < BOUNDARY_TOL {
                return boundary(format!("η + θ meets Δ at leaf ({},{})", j + 1, k + 1));
            }
            if l >= BOUNDARY_TOL && (l - d).abs() < BOUNDARY_TOL {
                return boundary(format!("λ meets Δ at leaf ({},{})", j + 1, k + 1));
            }
        }
        if l < BOUNDARY_TOL {
            if (sol.sigma + eta - chi(star, theta, j, 0.0)).abs() < BOUNDARY_TOL {
                return boundary(format!("multiplier of bundle {} is about to change sign", j + 1));
            }
            continue;
        }
        let c = star.delta[j].iter().filter(|d| d.to_f64() > eta + theta).count() as f64;
        let m = star.delta[j].iter().filter(|d| d.to_f64() > l).count() as f64;
        num += c / m;
        den += 1.0 / m;
    }
    Ok(num / den)
}

/// Buyer zero's price under the minimum-revenue-core variant of the quadratic rule.
pub fn star_mrc_price(star: &StarInstance, theta: f64) -> Result<f64> {
    let pc = solve_sigma(star, theta)?.p0;
    let Some(v2) = star.second_threshold() else {
        return Ok(pc);
    };
    let v2 = v2.to_f64();
    let b0 = star.v0.to_f64() + theta;
    Ok(if b0 <= v2 { b0 } else { pc.max(v2) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    fn ms(v: &[&str]) -> Vec<Money> {
        v.iter().map(|s| m(s)).collect()
    }

    /// Δ = (2, 1), η = 2.
    pub(crate) fn star_a() -> StarInstance {
        StarInstance::new(
            vec![StarBundle {
                leaf_bids: ms(&["6", "6"]),
                leaf_losing: ms(&["4", "5"]),
                bundle_bid: m("13"),
            }],
            m("3"),
        )
        .unwrap()
    }

    /// Δ = (5, 1), η = 0.
    pub(crate) fn star_b() -> StarInstance {
        StarInstance::new(
            vec![StarBundle {
                leaf_bids: ms(&["10", "10"]),
                leaf_losing: ms(&["5", "9"]),
                bundle_bid: m("25"),
            }],
            m("2"),
        )
        .unwrap()
    }

    #[test]
    fn derived_values() {
        let a = star_a();
        assert_eq!(a.v0(), m("3"));
        assert_eq!(a.eta(0), m("2"));
        assert_eq!((a.delta(0, 0), a.delta(0, 1)), (m("2"), m("1")));
        let b = star_b();
        assert_eq!(b.v0(), m("5"));
        assert_eq!(b.eta(0), Money::ZERO);
    }

    #[test]
    fn rejects_bad_stars() {
        let bad_gap = StarBundle {
            leaf_bids: ms(&["4"]),
            leaf_losing: ms(&["5"]),
            bundle_bid: m("1"),
        };
        assert!(StarInstance::new(vec![bad_gap], m("0")).is_err());
        let flat = StarBundle {
            leaf_bids: ms(&["4", "3"]),
            leaf_losing: ms(&["4", "3"]),
            bundle_bid: m("1"),
        };
        assert!(StarInstance::new(vec![flat], m("0")).is_err());
        assert!(StarInstance::new(vec![], m("0")).is_err());
    }

    #[test]
    fn vickrey_drop() {
        let a = star_a();
        assert_eq!(star_vickrey(&a, 0.0).unwrap(), vec![vec![4.0, 5.0]]);
        let b = star_b();
        assert_eq!(star_vickrey(&b, 0.0).unwrap(), vec![vec![10.0, 10.0]]);
        assert_eq!(star_vickrey(&b, 1e6).unwrap(), vec![vec![5.0, 9.0]]);
    }

    #[test]
    fn phi_examples() {
        let a = star_a();
        assert!((phi(&a, 1.0, 0, 0.0) - 0.5).abs() < 1e-15);
        assert!((phi(&a, 1.0, 0, 1.0 / 3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(phi(&a, 1.0, 0, 1.0), 0.0);
        // s = η = 0: the minimum solution is the largest drop
        let b = star_b();
        assert_eq!(phi(&b, 0.7, 0, 0.0), 0.7);
    }

    /// Bisection on the monotone residual, independent of the piece search.
    fn phi_bisect(star: &StarInstance, theta: f64, j: usize, s: f64) -> f64 {
        let target = s + star.eta(j).to_f64();
        let (mut lo, mut hi) = (0.0, star.max_delta(j).to_f64() + 1.0);
        if chi(star, theta, j, 0.0) <= target {
            return 0.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if chi(star, theta, j, mid) <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn phi_matches_bisection() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let star = crate::random::random_star(&mut rng, 4, 5);
            let theta = rng.gen_range(0.0..20.0);
            let s = rng.gen_range(0.0..30.0);
            for j in 0..star.n_bundles() {
                assert!((phi(&star, theta, j, s) - phi_bisect(&star, theta, j, s)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sigma_hand_solutions() {
        let a = star_a();
        for theta in [0.0, 0.25, 0.5, 1.0] {
            let sol = solve_sigma(&a, theta).unwrap();
            assert!((sol.sigma - 1.0 / 3.0).abs() < 1e-15, "θ={theta}");
        }
        let b = star_b();
        for theta in [0.0, 0.3, 0.75, 1.0] {
            assert!((solve_sigma(&b, theta).unwrap().sigma - 2.0 * theta / 3.0).abs() < 1e-15);
        }
        for theta in [1.0, 1.2, 2.0] {
            assert!((solve_sigma(&b, theta).unwrap().sigma - (theta + 1.0) / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_examples() {
        let b = star_b();
        assert!((sigma_right_derivative(&b, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((sigma_right_derivative(&b, 1.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(sigma_right_derivative(&b, 1.0), Err(Error::BoundaryPoint { .. })));
        let a = star_a();
        assert_eq!(sigma_right_derivative(&a, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn exported_instance_shape() {
        let one = StarInstance::new(
            vec![StarBundle {
                leaf_bids: ms(&["5"]),
                leaf_losing: ms(&["3"]),
                bundle_bid: m("6"),
            }],
            m("1"),
        )
        .unwrap();
        let (inst, w, _) = star_to_instance(&one, Money::ZERO).unwrap();
        assert_eq!((inst.n_buyers(), inst.items().len()), (5, 2));
        assert_eq!(w.ids(&inst), vec!["w0", "w1.1"]);
        let (inst, w, _) = star_to_instance(&star_a(), Money::ZERO).unwrap();
        assert_eq!(inst.n_buyers(), 7);
        assert_eq!(w.ids(&inst), vec!["w0", "w1.1", "w1.2"]);
        let v = crate::wdp::vickrey_prices(&inst, &w).unwrap();
        assert_eq!(v, ms(&["3", "4", "5"]));
    }

    #[test]
    fn mrc_single_bundle_equals_quadratic() {
        let b = star_b();
        for theta in [0.0, 0.5, 1.5, 3.0] {
            assert_eq!(star_mrc_price(&b, theta).unwrap(), solve_sigma(&b, theta).unwrap().p0);
        }
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"bundles":[{"leaf_bids":["6","6"],"leaf_losing":["4","5"],"bundle_bid":"13"}],"item_zero_losing":"3"}"#;
        let s: StarInstance = serde_json::from_str(text).unwrap();
        assert_eq!(s, star_a());
        assert_eq!(serde_json::to_string(&s).unwrap(), text);
        let bad = r#"{"bundles":[{"leaf_bids":["1"],"leaf_losing":["2"],"bundle_bid":"1"}],"item_zero_losing":"0"}"#;
        assert!(serde_json::from_str::<StarInstance>(bad).is_err());
    }
}
