//! Seeded random instance generators for property tests and `validate`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::instance::{AuctionInstance, Bid};
use crate::money::Money;
use crate::star::{StarBundle, StarInstance};

/// Random instance with amounts on a 0.25 grid in [0.25, 20] and bundles of 1–3 items.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, n_buyers: usize, n_items: usize) -> AuctionInstance {
    let items: Vec<String> = (0..n_items).map(|i| format!("i{i}")).collect();
    let bids = (0..n_buyers)
        .map(|b| {
            let size = rng.gen_range(1..=n_items.min(3));
            let bundle: Vec<&str> = items.choose_multiple(rng, size).map(|s| s.as_str()).collect();
            let amount = Money::from_raw(rng.gen_range(1..=80) * 250_000);
            Bid::new(format!("b{b:02}"), amount, &bundle)
        })
        .collect();
    AuctionInstance::new(items, bids).expect("generator produces valid instances")
}

fn grid(rng: &mut (impl Rng + ?Sized), lo: f64, hi: f64) -> Money {
    // millesimal grid so exact ties show up now and then
    Money::from_raw((rng.gen_range(lo..=hi) * 1000.0).round() as i64 * 1000)
}

/// Random star with `1 ≤ J ≤ max_bundles`, `1 ≤ n_j ≤ max_leaves`, all money in [0, 100].
///
/// Leaf bids are scaled so that the bundle bids are competitive, which keeps
/// the price multipliers nonzero in a good share of draws.
pub fn random_star<R: Rng + ?Sized>(rng: &mut R, max_bundles: usize, max_leaves: usize) -> StarInstance {
    loop {
        let n_bundles = rng.gen_range(1..=max_bundles);
        let bundles = (0..n_bundles)
            .map(|_| {
                let n = rng.gen_range(1..=max_leaves);
                let bundle_bid = grid(rng, 5.0, 100.0);
                let total = bundle_bid.to_f64() * rng.gen_range(0.5..1.2);
                let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
                let wsum: f64 = weights.iter().sum();
                let leaf_bids: Vec<Money> = weights
                    .iter()
                    .map(|w| Money::from_raw(Money::from_f64((total * w / wsum).min(100.0)).raw() / 1000 * 1000))
                    .collect();
                let leaf_losing = leaf_bids
                    .iter()
                    .map(|b| {
                        if rng.gen_bool(0.1) {
                            *b
                        } else {
                            Money::from_raw((b.raw() as f64 * rng.gen_range(0.0..1.0)) as i64 / 1000 * 1000)
                        }
                    })
                    .collect();
                StarBundle {
                    leaf_bids,
                    leaf_losing,
                    bundle_bid,
                }
            })
            .collect();
        let item_zero_losing = grid(rng, 0.0, 30.0);
        if let Ok(star) = StarInstance::new(bundles, item_zero_losing) {
            return star;
        }
    }
}
