//! Winner determination (weighted set packing) and Vickrey prices.
//!
//! The search is a depth-first branch-and-bound over buyers sorted by weight
//! density (weight / bundle size). The bound at each node is the smaller of
//! the plain sum of remaining compatible weights and the per-item fractional
//! bound `Σ_item max_density`. With integer-valued weights (money in
//! micro-units) every comparison is exact.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, Coalition, ItemSet, TieBreakPolicy};
use crate::money::Money;

/// Efficient winners and the welfare they achieve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WdpSolution {
    #[serde(skip)]
    pub winners: Coalition,
    pub welfare: Money,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WdpMethod {
    #[default]
    BranchAndBound,
    /// Enumerate every feasible coalition. Only sensible for small instances.
    Exhaustive,
}

/// Buyer count above which [`WdpMethod::Exhaustive`] refuses to run.
pub const EXHAUSTIVE_MAX_BUYERS: usize = 20;

struct Search<'a> {
    bundles: Vec<&'a ItemSet>,
    sizes: Vec<f64>,
    weights: Vec<f64>,
    order: Vec<usize>,
    n_items: usize,
    best: f64,
    best_set: Vec<usize>,
    /// When set, stop at the first complete path reaching this value.
    target: Option<f64>,
    done: bool,
}

impl<'a> Search<'a> {
    fn new(instance: &'a AuctionInstance, weights: &[f64], order: Vec<usize>) -> Self {
        let bundles: Vec<&ItemSet> = (0..instance.n_buyers()).map(|i| instance.bundle(i)).collect();
        let sizes = bundles.iter().map(|b| b.len() as f64).collect();
        Search {
            bundles,
            sizes,
            weights: weights.to_vec(),
            order,
            n_items: instance.items().len(),
            best: 0.0,
            best_set: Vec::new(),
            target: None,
            done: false,
        }
    }

    fn bound(&self, k: usize, used: &ItemSet) -> f64 {
        let mut item_best = vec![0.0f64; self.n_items];
        let mut sum = 0.0;
        for &i in &self.order[k..] {
            let w = self.weights[i];
            if w <= 0.0 || self.bundles[i].intersects(used) {
                continue;
            }
            sum += w;
            let density = w / self.sizes[i];
            for it in self.bundles[i].iter() {
                if density > item_best[it] {
                    item_best[it] = density;
                }
            }
        }
        // The per-item densities are rounded, so pad that bound slightly to
        // keep it valid.
        let items: f64 = item_best.iter().sum();
        sum.min(items * (1.0 + 1e-12) + 1e-12)
    }

    fn dfs(&mut self, k: usize, used: &mut ItemSet, cur: f64, chosen: &mut Vec<usize>) {
        if self.done {
            return;
        }
        if let Some(target) = self.target {
            if k == self.order.len() {
                if cur >= target {
                    self.best = cur;
                    self.best_set = chosen.clone();
                    self.done = true;
                }
                return;
            }
            if cur + self.bound(k, used) < target {
                return;
            }
        } else {
            if cur > self.best {
                self.best = cur;
                self.best_set = chosen.clone();
            }
            if k == self.order.len() || cur + self.bound(k, used) <= self.best {
                return;
            }
        }
        let i = self.order[k];
        if !self.bundles[i].intersects(used) {
            used.union_with(self.bundles[i]);
            chosen.push(i);
            self.dfs(k + 1, used, cur + self.weights[i], chosen);
            chosen.pop();
            used.difference_with(self.bundles[i]);
        }
        self.dfs(k + 1, used, cur, chosen);
    }
}

/// Maximum-weight packing over the buyers accepted by `allowed`. Buyers with
/// nonpositive weight are never selected. Returns the value and members.
pub(crate) fn max_weight_packing(
    instance: &AuctionInstance,
    weights: &[f64],
    allowed: impl Fn(usize) -> bool,
) -> (f64, Coalition) {
    let mut order: Vec<usize> = (0..instance.n_buyers())
        .filter(|&i| allowed(i) && weights[i] > 0.0)
        .collect();
    // Of several buyers on the same bundle only the heaviest can matter.
    order.sort_by(|&a, &b| {
        instance
            .bundle(a)
            .cmp(instance.bundle(b))
            .then(weights[b].partial_cmp(&weights[a]).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    order.dedup_by(|later, kept| instance.bundle(*later) == instance.bundle(*kept));
    order.sort_by(|&a, &b| {
        let da = weights[a] / instance.bundle(a).len() as f64;
        let db = weights[b] / instance.bundle(b).len() as f64;
        db.partial_cmp(&da).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let mut s = Search::new(instance, weights, order);
    let mut used = ItemSet::empty(instance.items().len());
    // Greedy packing in density order as the first incumbent.
    let mut greedy = Vec::new();
    for &i in &s.order {
        if !s.bundles[i].intersects(&used) {
            used.union_with(s.bundles[i]);
            greedy.push(i);
        }
    }
    s.best = greedy.iter().map(|&i| weights[i]).sum();
    s.best_set = greedy;
    let mut used = ItemSet::empty(instance.items().len());
    s.dfs(0, &mut used, 0.0, &mut Vec::new());
    (s.best, Coalition::new(s.best_set))
}

fn money_weights(instance: &AuctionInstance) -> Vec<f64> {
    (0..instance.n_buyers()).map(|i| instance.amount(i).raw_f64()).collect()
}

/// Buyer indices sorted by buyer id.
fn id_order(instance: &AuctionInstance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.n_buyers()).collect();
    order.sort_by(|&a, &b| instance.buyer_id(a).cmp(instance.buyer_id(b)));
    order
}

/// The lexicographic maximizer: scanning buyers by id, include whenever a
/// maximizer with the current prefix still exists.
fn lexicographic_maximizer(instance: &AuctionInstance, weights: &[f64], target: f64) -> Coalition {
    let order = id_order(instance);
    let mut s = Search::new(instance, weights, order);
    s.target = Some(target);
    let mut used = ItemSet::empty(instance.items().len());
    s.dfs(0, &mut used, 0.0, &mut Vec::new());
    debug_assert!(s.done);
    Coalition::new(s.best_set)
}

/// Compares two coalitions under the lexicographic policy; `Less` means `a` is preferred.
fn lex_preference(instance: &AuctionInstance, a: &Coalition, b: &Coalition) -> Ordering {
    for i in id_order(instance) {
        match (a.contains(i), b.contains(i)) {
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
    }
    Ordering::Equal
}

/// All feasible coalitions (including the empty one), up to `cap`.
pub fn enumerate_feasible_coalitions(instance: &AuctionInstance, cap: usize) -> Result<Vec<Coalition>> {
    fn rec(
        instance: &AuctionInstance,
        k: usize,
        used: &mut ItemSet,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Coalition>,
        cap: usize,
    ) -> Result<()> {
        if k == instance.n_buyers() {
            if out.len() == cap {
                return Err(Error::ResourceLimit {
                    what: "feasible coalitions",
                    count: cap + 1,
                    limit: cap,
                });
            }
            out.push(Coalition::new(chosen.iter().copied()));
            return Ok(());
        }
        let b = instance.bundle(k);
        if !b.intersects(used) {
            used.union_with(b);
            chosen.push(k);
            rec(instance, k + 1, used, chosen, out, cap)?;
            chosen.pop();
            used.difference_with(b);
        }
        rec(instance, k + 1, used, chosen, out, cap)
    }
    let mut out = Vec::new();
    let mut used = ItemSet::empty(instance.items().len());
    rec(instance, 0, &mut used, &mut Vec::new(), &mut out, cap)?;
    Ok(out)
}

/// Efficient winner determination with the default method.
pub fn solve_wdp(instance: &AuctionInstance, tie: &TieBreakPolicy) -> Result<WdpSolution> {
    solve_wdp_with(instance, tie, WdpMethod::BranchAndBound)
}

pub fn solve_wdp_with(instance: &AuctionInstance, tie: &TieBreakPolicy, method: WdpMethod) -> Result<WdpSolution> {
    if let TieBreakPolicy::PreferCoalition(c) = tie {
        if !instance.is_feasible(c)? {
            return Err(Error::invalid("designated tie-break coalition is not feasible"));
        }
    }
    let weights = money_weights(instance);
    match method {
        WdpMethod::BranchAndBound => {
            let (best, _) = max_weight_packing(instance, &weights, |_| true);
            let welfare = Money::from_raw(best as i64);
            if let TieBreakPolicy::PreferCoalition(c) = tie {
                if instance.welfare(c) == welfare {
                    return Ok(WdpSolution { winners: c.clone(), welfare });
                }
            }
            let winners = lexicographic_maximizer(instance, &weights, best);
            debug_assert_eq!(instance.welfare(&winners), welfare);
            Ok(WdpSolution { winners, welfare })
        }
        WdpMethod::Exhaustive => {
            if instance.n_buyers() > EXHAUSTIVE_MAX_BUYERS {
                return Err(Error::ResourceLimit {
                    what: "buyers for exhaustive winner determination",
                    count: instance.n_buyers(),
                    limit: EXHAUSTIVE_MAX_BUYERS,
                });
            }
            let all = enumerate_feasible_coalitions(instance, usize::MAX)?;
            let welfare = all.iter().map(|c| instance.welfare(c)).max().unwrap_or(Money::ZERO);
            if let TieBreakPolicy::PreferCoalition(c) = tie {
                if instance.welfare(c) == welfare {
                    return Ok(WdpSolution { winners: c.clone(), welfare });
                }
            }
            let winners = all
                .into_iter()
                .filter(|c| instance.welfare(c) == welfare)
                .min_by(|a, b| lex_preference(instance, a, b))
                .unwrap_or_default();
            Ok(WdpSolution { winners, welfare })
        }
    }
}

/// Maximum welfare over feasible coalitions that exclude `buyer`.
pub fn max_welfare_without(instance: &AuctionInstance, buyer: usize) -> Money {
    let (best, _) = max_weight_packing(instance, &money_weights(instance), |i| i != buyer);
    Money::from_raw(best as i64)
}

/// Vickrey prices of the winners, aligned with `winners.members()`.
///
/// `v_j = max{welfare of feasible T with j ∉ T} − (welfare(W) − b_j)`.
pub fn vickrey_prices(instance: &AuctionInstance, winners: &Coalition) -> Result<Vec<Money>> {
    if !instance.is_feasible(winners)? {
        return Err(Error::Precondition("winner coalition is not feasible".into()));
    }
    let weights = money_weights(instance);
    let (best, _) = max_weight_packing(instance, &weights, |_| true);
    let welfare = instance.welfare(winners);
    if welfare != Money::from_raw(best as i64) {
        return Err(Error::Precondition(format!(
            "winners are not efficient: welfare {welfare} < {}",
            Money::from_raw(best as i64)
        )));
    }
    Ok(winners
        .members()
        .iter()
        .map(|&j| max_welfare_without(instance, j) - (welfare - instance.amount(j)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Bid;
    use crate::random::random_instance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    fn example() -> AuctionInstance {
        AuctionInstance::new(
            vec!["a".into(), "b".into()],
            vec![
                Bid::new("s1", m("8"), &["a"]),
                Bid::new("s2", m("8"), &["b"]),
                Bid::new("big", m("10"), &["a", "b"]),
            ],
        )
        .unwrap()
    }

    /// Independent oracle: scan every subset bitmask.
    fn brute_max(instance: &AuctionInstance, skip: Option<usize>) -> Money {
        let n = instance.n_buyers();
        let mut best = Money::ZERO;
        for mask in 0u32..(1 << n) {
            if let Some(s) = skip {
                if mask >> s & 1 == 1 {
                    continue;
                }
            }
            let c = Coalition::new((0..n).filter(|i| mask >> i & 1 == 1));
            if instance.is_feasible(&c).unwrap() {
                best = best.max(instance.welfare(&c));
            }
        }
        best
    }

    #[test]
    fn two_small_buyers_win() {
        let inst = example();
        let sol = solve_wdp(&inst, &TieBreakPolicy::Lexicographic).unwrap();
        assert_eq!(sol.winners, Coalition::new([0, 1]));
        assert_eq!(sol.welfare, m("16"));
        let v = vickrey_prices(&inst, &sol.winners).unwrap();
        assert_eq!(v, vec![m("2"), m("2")]);
    }

    #[test]
    fn single_buyer() {
        let inst = AuctionInstance::new(vec!["a".into()], vec![Bid::new("x", m("5"), &["a"])]).unwrap();
        let sol = solve_wdp(&inst, &TieBreakPolicy::default()).unwrap();
        assert_eq!(sol.winners, Coalition::new([0]));
        assert_eq!(sol.welfare, m("5"));
        assert_eq!(vickrey_prices(&inst, &sol.winners).unwrap(), vec![Money::ZERO]);
    }

    #[test]
    fn inefficient_winners_rejected() {
        let inst = example();
        let err = vickrey_prices(&inst, &Coalition::new([2])).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(matches!(
            vickrey_prices(&inst, &Coalition::new([0, 2])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn tie_policies() {
        // Small buyers tie with the big buyer at 10.
        let inst = AuctionInstance::new(
            vec!["a".into(), "b".into()],
            vec![
                Bid::new("s1", m("4"), &["a"]),
                Bid::new("s2", m("6"), &["b"]),
                Bid::new("big", m("10"), &["a", "b"]),
            ],
        )
        .unwrap();
        let small = Coalition::new([0, 1]);
        let big = Coalition::new([2]);
        // "big" < "s1" in id order, so the lexicographic rule takes the big buyer.
        let lex = solve_wdp(&inst, &TieBreakPolicy::Lexicographic).unwrap();
        assert_eq!(lex.winners, big);
        let pref = solve_wdp(&inst, &TieBreakPolicy::PreferCoalition(small.clone())).unwrap();
        assert_eq!(pref.winners, small);
        let ex = solve_wdp_with(&inst, &TieBreakPolicy::Lexicographic, WdpMethod::Exhaustive).unwrap();
        assert_eq!(ex.winners, big);
        // an infeasible designation is an input error
        assert!(solve_wdp(&inst, &TieBreakPolicy::PreferCoalition(Coalition::new([0, 2]))).is_err());
    }

    #[test]
    fn zero_bids_are_included_when_free() {
        let inst = AuctionInstance::new(
            vec!["a".into(), "b".into()],
            vec![Bid::new("x", m("3"), &["a"]), Bid::new("y", m("0"), &["b"])],
        )
        .unwrap();
        let sol = solve_wdp(&inst, &TieBreakPolicy::Lexicographic).unwrap();
        assert_eq!(sol.winners, Coalition::new([0, 1]));
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let inst = random_instance(&mut rng, 6, 4);
            let bb = solve_wdp(&inst, &TieBreakPolicy::Lexicographic).unwrap();
            let ex = solve_wdp_with(&inst, &TieBreakPolicy::Lexicographic, WdpMethod::Exhaustive).unwrap();
            assert_eq!(bb.welfare, brute_max(&inst, None));
            assert_eq!(bb, ex);
            let v = vickrey_prices(&inst, &bb.winners).unwrap();
            for (k, &j) in bb.winners.members().iter().enumerate() {
                let oracle = brute_max(&inst, Some(j)) - (bb.welfare - inst.amount(j));
                assert_eq!(v[k], oracle);
                assert!(v[k] >= Money::ZERO && v[k] <= inst.amount(j));
            }
        }
    }

    #[test]
    fn deterministic_and_deletion_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let inst = random_instance(&mut rng, 8, 5);
            let a = solve_wdp(&inst, &TieBreakPolicy::Lexicographic).unwrap();
            let b = solve_wdp(&inst, &TieBreakPolicy::Lexicographic).unwrap();
            assert_eq!(a, b);
            // Drop a loser whose bid is strictly dominated: welfare unchanged.
            if let Some(loser) = (0..inst.n_buyers()).find(|i| !a.winners.contains(*i)) {
                let bids: Vec<Bid> = inst
                    .bids()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != loser)
                    .map(|(_, b)| b.clone())
                    .collect();
                let reduced = AuctionInstance::new(inst.items().to_vec(), bids).unwrap();
                let r = solve_wdp(&reduced, &TieBreakPolicy::Lexicographic).unwrap();
                assert_eq!(r.welfare, a.welfare);
            }
        }
    }

    #[test]
    fn exhaustive_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = random_instance(&mut rng, 21, 4);
        assert!(matches!(
            solve_wdp_with(&inst, &TieBreakPolicy::Lexicographic, WdpMethod::Exhaustive),
            Err(Error::ResourceLimit { .. })
        ));
    }
}
