//! Seeded synthetic generation of per-bidder linear type spaces.
//!
//! Each constraint has the shape
//! `sum_S X(S) c(S) v~(S) >= alpha * sum_S X(S) c(S) v(S)` over the bidder's
//! bundles: `X(S)` is Bernoulli, `c(S)` a decayed integer weight, and `alpha`
//! pulls the right-hand side below the value of the actual bids, so the true
//! bid vector always satisfies the constraint. Draws come from a
//! counter-based stream keyed by (seed, bidder, constraint index), which
//! makes results platform- and schedule-independent and gives prefix-nested
//! constraint families for free.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Instance, LinearTypeSpace, TypeConstraint};

#[derive(Debug, Error)]
pub enum TypespaceError {
    #[error("unknown bidder {0}")]
    UnknownBidder(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Parameters of the constraint generator.
#[derive(Clone, Copy, Debug)]
pub struct TypeSpaceGenConfig {
    /// Constraints per bidder (K).
    pub constraints_per_bidder: usize,
    /// Bernoulli inclusion probability for each bundle (beta).
    pub inclusion_probability: f64,
    /// Tightness factor alpha is drawn uniformly from this range.
    pub alpha_range: (f64, f64),
    /// Probability that the weight c keeps incrementing.
    pub decay_success: f64,
    pub seed: u64,
}

impl Default for TypeSpaceGenConfig {
    fn default() -> Self {
        TypeSpaceGenConfig {
            constraints_per_bidder: 8,
            inclusion_probability: 0.3,
            alpha_range: (0.5, 1.0),
            decay_success: 0.2,
            seed: 0,
        }
    }
}

impl TypeSpaceGenConfig {
    pub fn validate(&self) -> Result<(), TypespaceError> {
        let (lo, hi) = self.alpha_range;
        if !(0.0..=1.0).contains(&self.inclusion_probability) {
            return Err(TypespaceError::InvalidConfig(format!(
                "inclusion probability {} outside [0, 1]",
                self.inclusion_probability
            )));
        }
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(TypespaceError::InvalidConfig(format!(
                "alpha range [{lo}, {hi}] is not a subrange of [0, 1]"
            )));
        }
        if !(0.0..1.0).contains(&self.decay_success) {
            return Err(TypespaceError::InvalidConfig(format!(
                "decay success probability {} outside [0, 1)",
                self.decay_success
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// One independent, reproducible stream per (seed, bidder, constraint).
fn constraint_rng(seed: u64, bidder: usize, constraint: usize) -> ChaCha8Rng {
    let mut key = splitmix64(seed ^ 0xa076_1d64_78bd_642f);
    key = splitmix64(key ^ (bidder as u64).wrapping_mul(0xe703_7ed1_a0b4_28db));
    key = splitmix64(key ^ (constraint as u64).wrapping_mul(0x8ebc_6af0_9c88_c6e3));
    ChaCha8Rng::seed_from_u64(key)
}

/// The decayed weight: starts at 1, increments while the decay draw succeeds.
fn draw_weight(rng: &mut ChaCha8Rng, decay_success: f64) -> u64 {
    let mut c = 1u64;
    while rng.gen_bool(decay_success) {
        c += 1;
    }
    c
}

fn draw_constraint(
    instance: &Instance,
    bidder: usize,
    config: &TypeSpaceGenConfig,
    index: usize,
) -> TypeConstraint {
    let mut rng = constraint_rng(config.seed, bidder, index);
    let bids = &instance.bidders[bidder].bids;
    let mut coeffs = Vec::with_capacity(bids.len());
    let mut rhs_at_bids = 0.0;
    for bid in bids {
        // Draw order is pinned: inclusion flag, then weight, per bundle.
        let included = rng.gen_bool(config.inclusion_probability);
        let weight = draw_weight(&mut rng, config.decay_success) as f64;
        let coeff = if included { weight } else { 0.0 };
        coeffs.push(coeff);
        rhs_at_bids += coeff * bid.value;
    }
    let (lo, hi) = config.alpha_range;
    let alpha = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    TypeConstraint {
        coeffs,
        rhs: alpha * rhs_at_bids,
    }
}

/// Generates the bidder's type space with `K` constraints.
///
/// The bundle list is the bidder's full bid list; bundles that end up with
/// zero coefficients everywhere are effectively unconstrained. Vacuous
/// all-zero constraints (no bundle included) are kept as drawn.
pub fn generate_type_space(
    instance: &Instance,
    bidder: usize,
    config: &TypeSpaceGenConfig,
) -> Result<LinearTypeSpace, TypespaceError> {
    config.validate()?;
    let b = instance
        .bidder(bidder)
        .ok_or(TypespaceError::UnknownBidder(bidder))?;
    let constraints = (0..config.constraints_per_bidder)
        .map(|k| draw_constraint(instance, bidder, config, k))
        .collect();
    Ok(LinearTypeSpace {
        bidder_id: bidder,
        bundles: b.bids.iter().map(|bid| bid.bundle.clone()).collect(),
        constraints,
    })
}

/// Prefix-nested family over an ascending list of constraint counts: the
/// element for each K holds exactly the first K constraints of the stream, so
/// later elements cut the polyhedron down further.
///
/// `config.constraints_per_bidder` is ignored in favor of `k_list`.
pub fn nested_family(
    instance: &Instance,
    bidder: usize,
    config: &TypeSpaceGenConfig,
    k_list: &[usize],
) -> Result<Vec<LinearTypeSpace>, TypespaceError> {
    if k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TypespaceError::InvalidConfig(format!(
            "constraint counts {k_list:?} are not strictly ascending"
        )));
    }
    k_list
        .iter()
        .map(|&k| {
            let cfg = TypeSpaceGenConfig {
                constraints_per_bidder: k,
                ..*config
            };
            generate_type_space(instance, bidder, &cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixture_ex1, Bid};
    use crate::payments::{self, Formulation};
    use crate::EPS;
    use std::collections::BTreeMap;

    fn config(k: usize, beta: f64, seed: u64) -> TypeSpaceGenConfig {
        TypeSpaceGenConfig {
            constraints_per_bidder: k,
            inclusion_probability: beta,
            seed,
            ..TypeSpaceGenConfig::default()
        }
    }

    #[test]
    fn beta_zero_gives_vacuous_constraints() {
        let (instance, _) = fixture_ex1();
        let ts = generate_type_space(&instance, 1, &config(4, 0.0, 3)).unwrap();
        assert_eq!(ts.constraints.len(), 4);
        for c in &ts.constraints {
            assert!(c.coeffs.iter().all(|&w| w == 0.0));
            assert_eq!(c.rhs, 0.0);
        }
        // Vacuous constraints convey nothing: WT = VCG.
        let vcg = payments::vcg_payments(&instance).unwrap();
        let wt = payments::wt_payment_bps(&instance, 1, &ts).unwrap();
        assert!((wt.payment - vcg.get(1).unwrap()).abs() < EPS);
    }

    #[test]
    fn beta_one_alpha_one_pins_single_bundle_bidder() {
        let instance = Instance::new(1, vec![vec![Bid::new([0], 9.0)], vec![Bid::new([0], 4.0)]]);
        let cfg = TypeSpaceGenConfig {
            constraints_per_bidder: 1,
            inclusion_probability: 1.0,
            alpha_range: (1.0, 1.0),
            ..TypeSpaceGenConfig::default()
        };
        let ts = generate_type_space(&instance, 0, &cfg).unwrap();
        // The single constraint is c * v~ >= c * 9, i.e. v~ >= 9.
        let wt = payments::wt_payment_bps(&instance, 0, &ts).unwrap();
        assert!((wt.payment - 9.0).abs() < EPS);
    }

    #[test]
    fn true_bids_always_satisfy_generated_constraints() {
        let (instance, _) = fixture_ex1();
        for seed in 0..50 {
            for bidder in 0..instance.num_bidders() {
                let ts =
                    generate_type_space(&instance, bidder, &config(6, 0.5, seed)).unwrap();
                assert!(ts.satisfied_by_true_bids(&instance), "seed {seed} bidder {bidder}");
                assert!(ts.validate(&instance).is_empty());
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (instance, _) = fixture_ex1();
        let a = generate_type_space(&instance, 2, &config(8, 0.4, 11)).unwrap();
        let b = generate_type_space(&instance, 2, &config(8, 0.4, 11)).unwrap();
        assert_eq!(a, b);
        let c = generate_type_space(&instance, 2, &config(8, 0.4, 12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn nested_family_is_prefix_nested() {
        let (instance, _) = fixture_ex1();
        let cfg = config(0, 0.5, 21);
        let family = nested_family(&instance, 1, &cfg, &[1, 2, 4, 8, 16]).unwrap();
        assert_eq!(family.len(), 5);
        for w in family.windows(2) {
            assert_eq!(w[0].constraints.len() * 2, w[1].constraints.len());
            assert_eq!(
                w[0].constraints[..],
                w[1].constraints[..w[0].constraints.len()]
            );
        }
    }

    #[test]
    fn nested_family_single_element() {
        let (instance, _) = fixture_ex1();
        let family = nested_family(&instance, 1, &config(0, 0.5, 2), &[1]).unwrap();
        assert_eq!(family.len(), 1);
        assert_eq!(family[0].constraints.len(), 1);
    }

    #[test]
    fn nested_family_rejects_unordered_counts() {
        let (instance, _) = fixture_ex1();
        assert!(matches!(
            nested_family(&instance, 1, &config(0, 0.5, 2), &[2, 1]),
            Err(TypespaceError::InvalidConfig(_))
        ));
    }

    #[test]
    fn wt_payments_weakly_increase_along_nested_family() {
        let (instance, _) = fixture_ex1();
        let cfg = config(0, 0.6, 5);
        for bidder in 0..3 {
            let family = nested_family(&instance, bidder, &cfg, &[1, 2, 4, 8]).unwrap();
            let mut last = f64::NEG_INFINITY;
            for ts in &family {
                let wt = payments::wt_payment_bps(&instance, bidder, ts).unwrap();
                assert!(
                    wt.payment >= last - EPS,
                    "bidder {bidder}: payment dropped from {last} to {}",
                    wt.payment
                );
                last = wt.payment;
            }
        }
    }

    #[test]
    fn decayed_weight_mean_matches_distribution() {
        // Mean of the weight distribution is 1 / (1 - 0.2) = 1.25.
        let mut rng = constraint_rng(99, 0, 0);
        let n = 100_000;
        let sum: u64 = (0..n).map(|_| draw_weight(&mut rng, 0.2)).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 1.25).abs() < 0.02, "sample mean {mean}");
    }

    #[test]
    fn unknown_bidder_is_rejected() {
        let (instance, _) = fixture_ex1();
        assert!(matches!(
            generate_type_space(&instance, 50, &config(1, 0.5, 0)),
            Err(TypespaceError::UnknownBidder(50))
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (instance, _) = fixture_ex1();
        let mut cfg = config(1, 1.5, 0);
        assert!(generate_type_space(&instance, 0, &cfg).is_err());
        cfg = config(1, 0.5, 0);
        cfg.alpha_range = (0.8, 0.2);
        assert!(generate_type_space(&instance, 0, &cfg).is_err());
        cfg = config(1, 0.5, 0);
        cfg.decay_success = 1.0;
        assert!(generate_type_space(&instance, 0, &cfg).is_err());
    }

    #[test]
    fn generated_typespace_wt_stays_between_vcg_and_bid() {
        let (instance, _) = fixture_ex1();
        let vcg = payments::vcg_payments(&instance).unwrap();
        for seed in 0..20 {
            let mut map = BTreeMap::new();
            for bidder in 0..3 {
                map.insert(
                    bidder,
                    generate_type_space(&instance, bidder, &config(4, 0.5, seed)).unwrap(),
                );
            }
            let (wt, _) = payments::wt_prices(&instance, &map, Formulation::Bps).unwrap();
            for (i, p) in wt.iter() {
                assert!(p >= vcg.get(i).unwrap() - EPS);
                assert!(p <= 20.0 + EPS);
            }
        }
    }
}
