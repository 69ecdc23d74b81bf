//! Price curves of one winner as a function of its own bid, and the
//! marginal incentive to deviate (MID) read off them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, Bid, Coalition, TieBreakPolicy};
use crate::money::Money;
use crate::mrc::mrc_quadratic_price;
use crate::projection::project_onto_core;
use crate::star::{solve_sigma, star_mrc_price, StarInstance};
use crate::wdp::{solve_wdp, vickrey_prices};

/// Segments steeper than `1 + MID_TOL` are reported as violations.
pub const MID_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaymentRule {
    Vickrey,
    /// Projection of the Vickrey vector onto the core.
    QuadCore,
    /// Projection of the Vickrey vector onto the minimum-revenue core.
    MrcQuad,
}

impl fmt::Display for PaymentRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PaymentRule::Vickrey => "vickrey",
            PaymentRule::QuadCore => "quad-core",
            PaymentRule::MrcQuad => "mrc-quad",
        })
    }
}

impl FromStr for PaymentRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vickrey" => Ok(PaymentRule::Vickrey),
            "quad-core" | "quadratic" => Ok(PaymentRule::QuadCore),
            "mrc-quad" | "mrc" => Ok(PaymentRule::MrcQuad),
            _ => Err(Error::invalid(format!("unknown payment rule {s:?}"))),
        }
    }
}

/// Prices of all winners under `rule`, aligned with `winners.members()`.
pub fn price_vector(instance: &AuctionInstance, winners: &Coalition, rule: PaymentRule) -> Result<Vec<f64>> {
    let v: Vec<f64> = vickrey_prices(instance, winners)?.iter().map(|m| m.to_f64()).collect();
    match rule {
        PaymentRule::Vickrey => Ok(v),
        PaymentRule::QuadCore => Ok(project_onto_core(instance, winners, &v)?.prices),
        PaymentRule::MrcQuad => Ok(mrc_quadratic_price(instance, winners, &v)?.prices),
    }
}

/// Continuous piecewise-linear curve `x ↦ price`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceCurve {
    pub rule: PaymentRule,
    /// `(x, price)` with strictly increasing `x`.
    pub breakpoints: Vec<(f64, f64)>,
    /// Slope of each segment between consecutive breakpoints.
    pub slopes: Vec<f64>,
}

impl PriceCurve {
    /// Builds a curve through `points`, sorted by `x`; interior points lying on
    /// the line of their neighbours are dropped.
    pub fn from_points(rule: PaymentRule, mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("price curve needs at least one point"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|b, a| b.0 == a.0);
        let mut kept: Vec<(f64, f64)> = vec![points[0]];
        for w in 1..points.len() {
            let p = points[w];
            if kept.len() >= 2 {
                let a = kept[kept.len() - 2];
                let m = kept[kept.len() - 1];
                let s1 = (m.1 - a.1) / (m.0 - a.0);
                let s2 = (p.1 - m.1) / (p.0 - m.0);
                if (s1 - s2).abs() <= 1e-9 * (1.0 + s1.abs().max(s2.abs())) {
                    kept.pop();
                }
            }
            kept.push(p);
        }
        let slopes = kept.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        Ok(PriceCurve {
            rule,
            breakpoints: kept,
            slopes,
        })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.breakpoints[0].0, self.breakpoints[self.breakpoints.len() - 1].0)
    }

    /// Linear interpolation; `None` outside the swept range.
    pub fn value_at(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.x_range();
        if x < lo || x > hi {
            return None;
        }
        let i = self.breakpoints.partition_point(|p| p.0 <= x);
        if i == 0 {
            return Some(self.breakpoints[0].1);
        }
        if i == self.breakpoints.len() {
            return Some(self.breakpoints[i - 1].1);
        }
        let (x0, y0) = self.breakpoints[i - 1];
        Some(y0 + self.slopes[i - 1] * (x - x0))
    }

    /// CSV with columns `theta,price,slope_right`; the last row has no right slope.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,price,slope_right\n");
        for (i, (x, y)) in self.breakpoints.iter().enumerate() {
            match self.slopes.get(i) {
                Some(s) => out.push_str(&format!("{x},{y},{s}\n")),
                None => out.push_str(&format!("{x},{y},\n")),
            }
        }
        out
    }
}

/// A segment steeper than the allowed bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeViolation {
    pub from: f64,
    pub to: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MidReport {
    pub rule: PaymentRule,
    pub max_slope: f64,
    /// Left end of the steepest segment.
    pub arg_theta: f64,
    pub violations: Vec<SlopeViolation>,
    pub segments: usize,
}

/// Largest segment slope of `curve`, with every segment above `1 + MID_TOL`.
pub fn compute_mid(curve: &PriceCurve) -> MidReport {
    let mut max_slope = 0.0;
    let mut arg_theta = curve.breakpoints[0].0;
    let mut violations = Vec::new();
    for (i, &s) in curve.slopes.iter().enumerate() {
        if i == 0 || s > max_slope {
            max_slope = s;
            arg_theta = curve.breakpoints[i].0;
        }
        if s > 1.0 + MID_TOL {
            violations.push(SlopeViolation {
                from: curve.breakpoints[i].0,
                to: curve.breakpoints[i + 1].0,
                slope: s,
            });
        }
    }
    if curve.slopes.is_empty() {
        max_slope = 0.0;
    }
    MidReport {
        rule: curve.rule,
        max_slope,
        arg_theta,
        violations,
        segments: curve.slopes.len(),
    }
}

/// Adaptive reconstruction of a piecewise-linear function on `[a, b]`.
///
/// Each interval is probed at its thirds. If the probes are collinear with
/// the ends it is taken as linear. Otherwise the lines through the outer
/// thirds are intersected; a single kink is accepted when the function
/// agrees with both lines there. Anything else is split into thirds, down to
/// `floor`.
struct Builder<'a, F: Fn(f64) -> Result<f64> + Sync> {
    f: &'a F,
    floor: f64,
    tol: f64,
}

impl<F: Fn(f64) -> Result<f64> + Sync> Builder<'_, F> {
    fn collinear(&self, a: (f64, f64), b: (f64, f64), m: (f64, f64)) -> bool {
        let on = a.1 + (b.1 - a.1) * (m.0 - a.0) / (b.0 - a.0);
        (m.1 - on).abs() <= self.tol * (1.0 + m.1.abs())
    }

    fn build(&self, a: (f64, f64), b: (f64, f64), out: &mut Vec<(f64, f64)>) -> Result<()> {
        let w = b.0 - a.0;
        let x1 = a.0 + w / 3.0;
        let x2 = a.0 + 2.0 * w / 3.0;
        let m1 = (x1, (self.f)(x1)?);
        let m2 = (x2, (self.f)(x2)?);
        if self.collinear(a, b, m1) && self.collinear(a, b, m2) {
            return Ok(());
        }
        if w <= self.floor {
            out.push(m1);
            out.push(m2);
            return Ok(());
        }
        let s1 = (m1.1 - a.1) / (m1.0 - a.0);
        let s2 = (b.1 - m2.1) / (b.0 - m2.0);
        if (s1 - s2).abs() > 1e-12 {
            let xk = ((b.1 - s2 * b.0) - (a.1 - s1 * a.0)) / (s1 - s2);
            if xk > a.0 && xk < b.0 {
                let k = (xk, (self.f)(xk)?);
                let on_left = a.1 + s1 * (xk - a.0);
                let on_right = b.1 + s2 * (xk - b.0);
                let tol = self.tol * (1.0 + k.1.abs());
                if (k.1 - on_left).abs() <= tol && (k.1 - on_right).abs() <= tol {
                    // Both sides still need confirming: a second kink may hide
                    // between a probe and the candidate.
                    out.push(k);
                    self.build(a, k, out)?;
                    return self.build(k, b, out);
                }
            }
        }
        out.push(m1);
        out.push(m2);
        self.build(a, m1, out)?;
        self.build(m1, m2, out)?;
        self.build(m2, b, out)
    }
}

/// Samples `f` on `[lo, hi]` with `hints` as initial cut points and returns all
/// points needed to reproduce it as a piecewise-linear function.
fn trace<F: Fn(f64) -> Result<f64> + Sync>(f: &F, lo: f64, hi: f64, hints: &[f64], cells: usize) -> Result<Vec<(f64, f64)>> {
    let range = hi - lo;
    let mut cuts: Vec<f64> = (0..=cells).map(|i| lo + range * i as f64 / cells as f64).collect();
    cuts.extend(hints.iter().copied().filter(|h| *h > lo && *h < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * (1.0 + range));
    let anchors: Vec<(f64, f64)> = cuts
        .par_iter()
        .map(|&x| f(x).map(|y| (x, y)))
        .collect::<Result<_>>()?;
    let builder = Builder {
        f,
        floor: 1e-6 * range.max(f64::MIN_POSITIVE),
        tol: 1e-11,
    };
    let inner: Vec<Vec<(f64, f64)>> = anchors
        .par_windows(2)
        .map(|w| {
            let mut out = Vec::new();
            builder.build(w[0], w[1], &mut out).map(|_| out)
        })
        .collect::<Result<_>>()?;
    let mut points = anchors;
    points.extend(inner.into_iter().flatten());
    Ok(points)
}

/// Buyer zero's price on a star as a function of `θ = b_0 − v_0`.
pub fn star_price(star: &StarInstance, theta: f64, rule: PaymentRule) -> Result<f64> {
    match rule {
        PaymentRule::Vickrey => Ok(star.v0().to_f64()),
        PaymentRule::QuadCore => Ok(solve_sigma(star, theta)?.p0),
        PaymentRule::MrcQuad => star_mrc_price(star, theta),
    }
}

/// Exact piecewise-linear curve of buyer zero's star price over `[0, theta_max]`.
pub fn sweep_star_curve(star: &StarInstance, theta_max: f64, rule: PaymentRule) -> Result<PriceCurve> {
    if !(theta_max > 0.0 && theta_max.is_finite()) {
        return Err(Error::invalid("theta_max must be positive"));
    }
    let mut hints = star.vickrey_breakpoints(theta_max);
    if let Some(v2) = star.second_threshold() {
        hints.push((v2 - star.v0()).to_f64());
    }
    let f = |t: f64| star_price(star, t, rule);
    let points = trace(&f, 0.0, theta_max, &hints, 16)?;
    PriceCurve::from_points(rule, points)
}

/// Sweep of one winner's bid with everything else held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericSweep {
    pub buyer: String,
    pub from: Money,
    pub to: Money,
    /// Grid step; defaults to a 200th of the range.
    pub step: Option<Money>,
    pub rule: PaymentRule,
    pub tie: TieBreakPolicy,
}

struct Sweeper<'a> {
    instance: &'a AuctionInstance,
    buyer: usize,
    winners: Coalition,
    rule: PaymentRule,
    tie: &'a TieBreakPolicy,
}

impl Sweeper<'_> {
    fn winners_at(&self, bid: Money) -> Result<(AuctionInstance, bool)> {
        let inst = self.instance.with_amount(self.buyer, bid)?;
        let same = solve_wdp(&inst, self.tie)?.winners == self.winners;
        Ok((inst, same))
    }

    fn price_at(&self, bid: Money) -> Result<f64> {
        let (inst, same) = self.winners_at(bid)?;
        if !same {
            return Err(Error::RangeInvalid {
                crossing_bid: bid.to_string(),
            });
        }
        let prices = price_vector(&inst, &self.winners, self.rule)?;
        Ok(prices[self.winners.position(self.buyer).unwrap()])
    }

    /// First bid in `(good, bad]` at which the winners differ.
    fn crossing(&self, mut good: Money, mut bad: Money) -> Result<Money> {
        while bad.raw() - good.raw() > 1 {
            let mid = Money::from_raw(good.raw() + (bad.raw() - good.raw()) / 2);
            if self.winners_at(mid)?.1 {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(bad)
    }
}

/// Price of `buyer` over a bid range, sampled on a grid and refined where the
/// slope changes.
pub fn sweep_generic_curve(instance: &AuctionInstance, sweep: &GenericSweep) -> Result<PriceCurve> {
    if sweep.to <= sweep.from {
        return Err(Error::invalid("sweep range must be nonempty"));
    }
    let buyer = instance.index_of(&sweep.buyer)?;
    let start = instance.with_amount(buyer, sweep.from)?;
    let winners = solve_wdp(&start, &sweep.tie)?.winners;
    if !winners.contains(buyer) {
        return Err(Error::Precondition(format!(
            "{} does not win at bid {}",
            sweep.buyer, sweep.from
        )));
    }
    let sw = Sweeper {
        instance,
        buyer,
        winners,
        rule: sweep.rule,
        tie: &sweep.tie,
    };
    let range = sweep.to.raw() - sweep.from.raw();
    let step = sweep.step.map_or((range / 200).max(1), |s| s.raw());
    if step <= 0 {
        return Err(Error::invalid("sweep step must be positive"));
    }
    let mut grid: Vec<i64> = (0..).map(|i| sweep.from.raw() + i * step).take_while(|x| *x < sweep.to.raw()).collect();
    grid.push(sweep.to.raw());

    let eval = |raw: i64| -> Result<(i64, f64)> {
        let bid = Money::from_raw(raw);
        match sw.price_at(bid) {
            Ok(p) => Ok((raw, p)),
            Err(Error::RangeInvalid { .. }) => {
                let good = Money::from_raw(raw - step).max(sweep.from);
                Err(Error::RangeInvalid {
                    crossing_bid: sw.crossing(good, bid)?.to_string(),
                })
            }
            Err(e) => Err(e),
        }
    };
    let mut points: Vec<(i64, f64)> = grid.par_iter().map(|&x| eval(x)).collect::<Result<_>>()?;

    // Bisect both intervals around every detected slope change.
    let floor = ((range as f64) * 1e-6).ceil().max(1.0) as i64;
    for _ in 0..64 {
        let slope = |a: (i64, f64), b: (i64, f64)| (b.1 - a.1) / (b.0 - a.0) as f64;
        let mut mids = Vec::new();
        for w in points.windows(3) {
            let (s1, s2) = (slope(w[0], w[1]), slope(w[1], w[2]));
            if (s1 - s2).abs() > 1e-9 * (1.0 + s1.abs().max(s2.abs())) {
                for (a, b) in [(w[0].0, w[1].0), (w[1].0, w[2].0)] {
                    if b - a > floor {
                        mids.push(a + (b - a) / 2);
                    }
                }
            }
        }
        mids.sort_unstable();
        mids.dedup();
        if mids.is_empty() {
            break;
        }
        let new: Vec<(i64, f64)> = mids.par_iter().map(|&x| eval(x)).collect::<Result<_>>()?;
        points.extend(new);
        points.sort_by_key(|p| p.0);
        points.dedup_by_key(|p| p.0);
    }
    let pts = points.into_iter().map(|(x, y)| (Money::from_raw(x).to_f64(), y)).collect();
    PriceCurve::from_points(sweep.rule, pts)
}

/// The two-scenario construction showing that every core-selecting rule has
/// worst-case MID at least `1 − 1/w`.
///
/// Scenario two: `w` small buyers bid `1 + δ` on distinct items, a large
/// buyer bids `w` on all of them. Scenario one: the deviating small buyer
/// bids `1 − (w − 1)δ` instead, which makes the small buyers tie with the
/// large one. Ties go to the small buyers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundScenario {
    pub w: usize,
    pub delta: Money,
    pub scenario_one: AuctionInstance,
    pub scenario_two: AuctionInstance,
    pub deviating_buyer: String,
    #[serde(skip)]
    pub small_buyers: Coalition,
}

impl LowerBoundScenario {
    pub fn tie_policy(&self) -> TieBreakPolicy {
        TieBreakPolicy::PreferCoalition(self.small_buyers.clone())
    }
}

pub fn generate_lower_bound_scenario(w: usize, delta: Money) -> Result<LowerBoundScenario> {
    if w < 2 {
        return Err(Error::invalid("w must be at least 2"));
    }
    let wi = w as i64;
    if delta <= Money::ZERO || delta * (wi - 1) > Money::from_int(1) {
        return Err(Error::invalid(format!("delta must lie in (0, 1/(w−1)], got {delta}")));
    }
    let items: Vec<String> = (1..=w).map(|i| format!("i{i}")).collect();
    let all: Vec<&str> = items.iter().map(String::as_str).collect();
    let one = Money::from_int(1);
    let build = |first: Money| {
        let mut bids: Vec<Bid> = (1..=w)
            .map(|i| {
                let amount = if i == 1 { first } else { one + delta };
                Bid::new(format!("s{i}"), amount, &[all[i - 1]])
            })
            .collect();
        bids.push(Bid::new("large", Money::from_int(wi), &all));
        AuctionInstance::new(items.clone(), bids)
    };
    Ok(LowerBoundScenario {
        w,
        delta,
        scenario_one: build(one - delta * (wi - 1))?,
        scenario_two: build(one + delta)?,
        deviating_buyer: "s1".into(),
        small_buyers: Coalition::new(0..w),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub w: usize,
    pub delta: Money,
    pub rule: PaymentRule,
    pub bid_one: Money,
    pub bid_two: Money,
    pub price_one: f64,
    pub price_two: f64,
    pub price_increase: f64,
    pub bid_increase: f64,
    pub ratio: f64,
    /// `(w − 1)/w`.
    pub bound: f64,
    /// Scenario-one prices equal the bids exactly.
    pub scenario_one_at_bids: bool,
}

impl LowerBoundReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.scenario_one_at_bids && self.price_two >= 1.0 - tol && self.ratio >= self.bound - tol
    }
}

pub fn verify_lower_bound(scenario: &LowerBoundScenario, rule: PaymentRule) -> Result<LowerBoundReport> {
    let tie = scenario.tie_policy();
    let prices = |inst: &AuctionInstance| -> Result<Vec<f64>> {
        let sol = solve_wdp(inst, &tie)?;
        if sol.winners != scenario.small_buyers {
            return Err(Error::Construction("small buyers do not win the scenario".into()));
        }
        price_vector(inst, &scenario.small_buyers, rule)
    };
    let p1 = prices(&scenario.scenario_one)?;
    let p2 = prices(&scenario.scenario_two)?;
    let i = scenario.scenario_one.index_of(&scenario.deviating_buyer)?;
    let k = scenario.small_buyers.position(i).unwrap();
    let at_bids = scenario
        .small_buyers
        .members()
        .iter()
        .zip(&p1)
        .all(|(&b, &p)| p == scenario.scenario_one.amount(b).to_f64());
    let bid_one = scenario.scenario_one.amount(i);
    let bid_two = scenario.scenario_two.amount(i);
    let bid_increase = (bid_two - bid_one).to_f64();
    let price_increase = p2[k] - p1[k];
    Ok(LowerBoundReport {
        w: scenario.w,
        delta: scenario.delta,
        rule,
        bid_one,
        bid_two,
        price_one: p1[k],
        price_two: p2[k],
        price_increase,
        bid_increase,
        ratio: price_increase / bid_increase,
        bound: (scenario.w as f64 - 1.0) / scenario.w as f64,
        scenario_one_at_bids: at_bids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::star::StarBundle;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    fn star_b() -> StarInstance {
        StarInstance::new(
            vec![StarBundle {
                leaf_bids: vec![m("10"), m("10")],
                leaf_losing: vec![m("5"), m("9")],
                bundle_bid: m("25"),
            }],
            m("2"),
        )
        .unwrap()
    }

    #[test]
    fn star_curve_kinks_and_mid() {
        let c = sweep_star_curve(&star_b(), 2.0, PaymentRule::QuadCore).unwrap();
        assert_eq!(c.breakpoints.len(), 3);
        assert!((c.breakpoints[1].0 - 1.0).abs() < 1e-12);
        assert!((c.slopes[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.slopes[1] - 1.0 / 3.0).abs() < 1e-12);
        let r = compute_mid(&c);
        assert!((r.max_slope - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.violations.is_empty());
        let mrc = sweep_star_curve(&star_b(), 2.0, PaymentRule::MrcQuad).unwrap();
        assert_eq!(mrc.breakpoints, c.breakpoints);
    }

    #[test]
    fn flat_and_single_point_curves() {
        let c = PriceCurve::from_points(PaymentRule::Vickrey, vec![(0.0, 3.0), (1.0, 3.0), (2.0, 3.0)]).unwrap();
        assert_eq!(c.breakpoints.len(), 2);
        assert_eq!(compute_mid(&c).max_slope, 0.0);
        let p = PriceCurve::from_points(PaymentRule::Vickrey, vec![(0.0, 1.0)]).unwrap();
        assert_eq!(compute_mid(&p).max_slope, 0.0);
        assert_eq!(c.to_csv(), "theta,price,slope_right\n0,3,0\n2,3,\n");
    }

    #[test]
    fn scenario_construction() {
        let s = generate_lower_bound_scenario(2, m("0.5")).unwrap();
        let bids = |i: &AuctionInstance| i.bids().iter().map(|b| b.amount).collect::<Vec<_>>();
        assert_eq!(bids(&s.scenario_one), vec![m("0.5"), m("1.5"), m("2")]);
        assert_eq!(bids(&s.scenario_two), vec![m("1.5"), m("1.5"), m("2")]);
        let edge = generate_lower_bound_scenario(2, m("1")).unwrap();
        assert_eq!(edge.scenario_one.amount(0), Money::ZERO);
        let four = generate_lower_bound_scenario(4, m("0.2")).unwrap();
        let small: Money = (0..4).map(|i| four.scenario_one.amount(i)).sum();
        assert_eq!(small, four.scenario_one.amount(4));
        assert!(generate_lower_bound_scenario(2, m("1.000001")).is_err());
        assert!(generate_lower_bound_scenario(1, m("0.5")).is_err());
        assert!(generate_lower_bound_scenario(3, Money::ZERO).is_err());
    }

    #[test]
    fn lower_bound_ratio() {
        let s = generate_lower_bound_scenario(2, m("0.5")).unwrap();
        let q = verify_lower_bound(&s, PaymentRule::QuadCore).unwrap();
        assert!(q.scenario_one_at_bids);
        assert!((q.price_two - 1.0).abs() < 1e-9);
        assert!((q.ratio - 0.5).abs() < 1e-9);
        let r = verify_lower_bound(&s, PaymentRule::MrcQuad).unwrap();
        assert!(r.holds(1e-8));
        let s3 = generate_lower_bound_scenario(3, m("0.25")).unwrap();
        assert!(verify_lower_bound(&s3, PaymentRule::QuadCore).unwrap().ratio >= 2.0 / 3.0 - 1e-8);
    }

    #[test]
    fn rule_names() {
        for r in [PaymentRule::Vickrey, PaymentRule::QuadCore, PaymentRule::MrcQuad] {
            assert_eq!(r.to_string().parse::<PaymentRule>().unwrap(), r);
        }
        assert!("median".parse::<PaymentRule>().is_err());
    }
}
