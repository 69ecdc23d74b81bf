//! Auction instances, coalitions and outcomes.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;

/// Fixed-width bitset over item indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemSet {
    words: Vec<u64>,
}

impl ItemSet {
    pub fn empty(n_items: usize) -> Self {
        ItemSet {
            words: vec![0; n_items.div_ceil(64).max(1)],
        }
    }

    pub fn insert(&mut self, item: usize) {
        self.words[item / 64] |= 1 << (item % 64);
    }

    pub fn contains(&self, item: usize) -> bool {
        self.words[item / 64] >> (item % 64) & 1 == 1
    }

    pub fn intersects(&self, other: &ItemSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn union_with(&mut self, other: &ItemSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn difference_with(&mut self, other: &ItemSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| wi * 64 + b)
        })
    }
}

/// A single-parameter bid: one amount for one fixed bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub buyer: String,
    pub amount: Money,
    pub bundle: Vec<String>,
}

impl Bid {
    pub fn new(buyer: impl Into<String>, amount: Money, bundle: &[&str]) -> Self {
        Bid {
            buyer: buyer.into(),
            amount,
            bundle: bundle.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Raw instance as read from JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub items: Vec<String>,
    pub bids: Vec<Bid>,
}

/// Validated auction: the item universe plus one bid per buyer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceSpec", into = "InstanceSpec")]
pub struct AuctionInstance {
    items: Vec<String>,
    bids: Vec<Bid>,
    bundles: Vec<ItemSet>,
    buyer_index: HashMap<String, usize>,
}

impl TryFrom<InstanceSpec> for AuctionInstance {
    type Error = Error;
    fn try_from(s: InstanceSpec) -> Result<Self> {
        AuctionInstance::new(s.items, s.bids)
    }
}

impl From<AuctionInstance> for InstanceSpec {
    fn from(i: AuctionInstance) -> InstanceSpec {
        InstanceSpec {
            items: i.items,
            bids: i.bids,
        }
    }
}

impl AuctionInstance {
    pub fn new(items: Vec<String>, bids: Vec<Bid>) -> Result<Self> {
        let mut item_index = HashMap::new();
        for (i, it) in items.iter().enumerate() {
            if item_index.insert(it.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate item {it:?}")));
            }
        }
        let mut buyer_index = HashMap::new();
        let mut bundles = Vec::with_capacity(bids.len());
        for (i, bid) in bids.iter().enumerate() {
            if buyer_index.insert(bid.buyer.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate buyer id {:?}", bid.buyer)));
            }
            if bid.amount.is_negative() {
                return Err(Error::invalid(format!("negative bid from {:?}", bid.buyer)));
            }
            if bid.bundle.is_empty() {
                return Err(Error::invalid(format!("empty bundle for {:?}", bid.buyer)));
            }
            let mut set = ItemSet::empty(items.len());
            for it in &bid.bundle {
                let idx = item_index.get(it).ok_or_else(|| {
                    Error::invalid(format!("bundle of {:?} names unknown item {it:?}", bid.buyer))
                })?;
                set.insert(*idx);
            }
            bundles.push(set);
        }
        Ok(AuctionInstance {
            items,
            bids,
            bundles,
            buyer_index,
        })
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    pub fn n_buyers(&self) -> usize {
        self.bids.len()
    }

    pub fn bundle(&self, buyer: usize) -> &ItemSet {
        &self.bundles[buyer]
    }

    pub fn amount(&self, buyer: usize) -> Money {
        self.bids[buyer].amount
    }

    pub fn buyer_id(&self, buyer: usize) -> &str {
        &self.bids[buyer].buyer
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.buyer_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown buyer id {id:?}")))
    }

    pub fn coalition_from_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<Coalition> {
        let idx = ids
            .iter()
            .map(|s| self.index_of(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Coalition::new(idx))
    }

    /// Copy of the instance with one buyer's amount replaced.
    pub fn with_amount(&self, buyer: usize, amount: Money) -> Result<Self> {
        if amount.is_negative() {
            return Err(Error::invalid("negative bid amount"));
        }
        let mut out = self.clone();
        out.bids[buyer].amount = amount;
        Ok(out)
    }

    pub fn welfare(&self, c: &Coalition) -> Money {
        c.members().iter().map(|&i| self.bids[i].amount).sum()
    }

    fn check_members(&self, c: &Coalition) -> Result<()> {
        match c.members().iter().find(|&&i| i >= self.bids.len()) {
            Some(i) => Err(Error::invalid(format!("unknown buyer index {i}"))),
            None => Ok(()),
        }
    }

    /// True iff the member bundles are pairwise disjoint.
    pub fn is_feasible(&self, c: &Coalition) -> Result<bool> {
        self.check_members(c)?;
        let mut used = ItemSet::empty(self.items.len());
        for &i in c.members() {
            if used.intersects(&self.bundles[i]) {
                return Ok(false);
            }
            used.union_with(&self.bundles[i]);
        }
        Ok(true)
    }

    /// Union of the bundles of `c`.
    pub fn items_of(&self, c: &Coalition) -> ItemSet {
        let mut used = ItemSet::empty(self.items.len());
        for &i in c.members() {
            used.union_with(&self.bundles[i]);
        }
        used
    }
}

/// A set of buyers, stored as sorted indices into the instance's bid list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition {
    members: Vec<usize>,
}

impl Coalition {
    pub fn new(members: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = members.into_iter().collect();
        Coalition {
            members: set.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Coalition::default()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, buyer: usize) -> bool {
        self.members.binary_search(&buyer).is_ok()
    }

    /// Position of `buyer` within the sorted member list.
    pub fn position(&self, buyer: usize) -> Option<usize> {
        self.members.binary_search(&buyer).ok()
    }

    pub fn ids<'a>(&self, instance: &'a AuctionInstance) -> Vec<&'a str> {
        self.members.iter().map(|&i| instance.buyer_id(i)).collect()
    }
}

/// Winning coalition with one price per winner, aligned with `winners.members()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub winners: Coalition,
    pub prices: Vec<f64>,
}

impl Outcome {
    pub fn new(winners: Coalition, prices: Vec<f64>) -> Result<Self> {
        if winners.len() != prices.len() {
            return Err(Error::invalid("price vector length differs from winner count"));
        }
        Ok(Outcome { winners, prices })
    }

    pub fn revenue(&self) -> f64 {
        self.prices.iter().sum()
    }

    pub fn price_of(&self, buyer: usize) -> Option<f64> {
        self.winners.position(buyer).map(|k| self.prices[k])
    }
}

/// How the winner-determination problem picks among welfare-maximizing coalitions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TieBreakPolicy {
    /// Scan buyers in ascending id order and include each one whenever some
    /// maximizer containing the choices so far still exists.
    #[default]
    Lexicographic,
    /// Pick this coalition when it is a maximizer, otherwise fall back to lexicographic.
    PreferCoalition(Coalition),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    pub(crate) fn two_small_one_big() -> AuctionInstance {
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

    #[test]
    fn feasibility() {
        let inst = two_small_one_big();
        assert!(inst.is_feasible(&Coalition::new([0, 1])).unwrap());
        assert!(!inst.is_feasible(&Coalition::new([0, 2])).unwrap());
        assert!(inst.is_feasible(&Coalition::empty()).unwrap());
        assert!(matches!(
            inst.is_feasible(&Coalition::new([7])),
            Err(Error::InvalidInput(_))
        ));
        assert!(inst.coalition_from_ids(&["nobody"]).is_err());
    }

    #[test]
    fn rejects_bad_instances() {
        let items = vec!["a".to_string()];
        assert!(AuctionInstance::new(items.clone(), vec![Bid::new("x", m("1"), &["z"])]).is_err());
        assert!(AuctionInstance::new(items.clone(), vec![Bid::new("x", m("-1"), &["a"])]).is_err());
        assert!(AuctionInstance::new(items.clone(), vec![Bid::new("x", m("1"), &[])]).is_err());
        assert!(AuctionInstance::new(
            items,
            vec![Bid::new("x", m("1"), &["a"]), Bid::new("x", m("2"), &["a"])]
        )
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"items":["a","b"],"bids":[{"buyer":"s1","amount":"8","bundle":["a"]},{"buyer":"s2","amount":"8","bundle":["b"]},{"buyer":"big","amount":"10","bundle":["a","b"]}]}"#;
        let inst: AuctionInstance = serde_json::from_str(text).unwrap();
        assert_eq!(inst, two_small_one_big());
        assert_eq!(serde_json::to_string(&inst).unwrap(), text);
        let unknown = r#"{"items":["a"],"bids":[{"buyer":"x","amount":"1","bundle":["q"]}]}"#;
        assert!(serde_json::from_str::<AuctionInstance>(unknown).is_err());
        let float = r#"{"items":["a"],"bids":[{"buyer":"x","amount":1.5,"bundle":["a"]}]}"#;
        assert!(serde_json::from_str::<AuctionInstance>(float).is_err());
    }

    #[test]
    fn itemset_ops() {
        let mut s = ItemSet::empty(130);
        s.insert(0);
        s.insert(129);
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 129]);
        let mut t = ItemSet::empty(130);
        t.insert(129);
        assert!(s.intersects(&t));
        s.difference_with(&t);
        assert!(!s.intersects(&t));
    }
}
