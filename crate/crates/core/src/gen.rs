//! A small seeded instance generator for tests and sweeps.
//!
//! Bids get uniform random bundles and values proportional to bundle size
//! (rounded to cents, which keeps distinct allocation welfares well
//! separated); bids are grouped round-robin into XOR bidders. This is plain
//! synthetic input for exercising the engine, not a market model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Bid, Bundle, Instance};

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub num_goods: u32,
    pub num_bids: usize,
    /// Largest bundle a bid may ask for.
    pub max_bundle_size: usize,
    /// Bids per XOR bidder (the last bidder may get fewer).
    pub bids_per_bidder: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(num_goods: u32, num_bids: usize, seed: u64) -> Self {
        GenConfig {
            num_goods,
            num_bids,
            max_bundle_size: 3,
            bids_per_bidder: 2,
            seed,
        }
    }
}

fn random_bundle(rng: &mut ChaCha8Rng, num_goods: u32, max_size: usize) -> Bundle {
    let cap = max_size.clamp(1, num_goods as usize);
    let size = rng.gen_range(1..=cap);
    let mut goods: Vec<u32> = (0..num_goods).collect();
    // Partial Fisher-Yates: the first `size` entries are the sample.
    for k in 0..size {
        let j = rng.gen_range(k..goods.len());
        goods.swap(k, j);
    }
    Bundle::new(goods.into_iter().take(size))
}

/// Generates a valid instance with exactly `num_bids` bids.
///
/// A drawn bundle that would duplicate one the bidder already has is retried;
/// if a fresh bundle still cannot be placed, the bid opens a new
/// single-minded bidder instead, so the output always validates.
pub fn generate_instance(config: &GenConfig) -> Instance {
    assert!(config.num_goods > 0, "instances need at least one good");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let num_bidders = config.num_bids.div_ceil(config.bids_per_bidder.max(1)).max(1);
    let mut bid_lists: Vec<Vec<Bid>> = vec![Vec::new(); num_bidders];
    for b in 0..config.num_bids {
        let value_per_good = rng.gen_range(50..=1500) as f64 / 100.0;
        let mut bundle = random_bundle(&mut rng, config.num_goods, config.max_bundle_size);
        let value = (value_per_good * bundle.len() as f64 * 100.0).round() / 100.0;
        let home = b % num_bidders;
        let mut tries = 0;
        while bid_lists[home].iter().any(|bid| bid.bundle == bundle) && tries < 50 {
            bundle = random_bundle(&mut rng, config.num_goods, config.max_bundle_size);
            tries += 1;
        }
        if bid_lists[home].iter().any(|bid| bid.bundle == bundle) {
            bid_lists.push(vec![Bid { bundle, value }]);
        } else {
            bid_lists[home].push(Bid { bundle, value });
        }
    }
    bid_lists.retain(|bids| !bids.is_empty());
    Instance::new(config.num_goods, bid_lists)
}
