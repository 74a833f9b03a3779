//! Incentive, revenue, core-membership, and fairness statistics.
//!
//! These are the per-instance quantities the experiment harness writes out:
//! total deviation incentive (price lift above the weakest-type baseline),
//! the split of the core burden between low and high bidders, and the
//! membership flags behind the zero-revenue phenomenon.

use serde::Serialize;
use thiserror::Error;

use crate::core_pricing::{self, CoreError};
use crate::model::{Allocation, Instance, PriceVector};
use crate::payments;
use crate::EPS;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("price vector domain mismatch: {0}")]
    DomainMismatch(String),
}

/// Sum of per-winner deviation incentives, `sum_i (p_i - baseline_i)`.
///
/// For prices above the weakest-type vector this equals the total utility any
/// winner could still grab back by misreporting, which is why the harness
/// tracks it as "sum of deviations".
pub fn sum_deviations(prices: &PriceVector, baseline: &PriceVector) -> Result<f64, MetricsError> {
    if !prices.same_domain(baseline) {
        return Err(MetricsError::DomainMismatch(format!(
            "prices cover {:?}, baseline covers {:?}",
            prices.winners().collect::<Vec<_>>(),
            baseline.winners().collect::<Vec<_>>()
        )));
    }
    Ok(prices
        .iter()
        .map(|(i, p)| p - baseline.get(i).unwrap())
        .sum())
}

/// How the total price lift above a baseline splits across winners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BurdenSplit {
    /// Prices equal the baseline; there is no burden to apportion. Excluded
    /// from aggregate averages.
    Zero,
    /// Share of the total burden carried by the lower/upper half of winners,
    /// sorted ascending by winning bid (ties by bidder id); the lower half is
    /// the first floor(|W|/2) of them.
    Shares { lower: f64, upper: f64 },
}

pub fn core_burden_split(
    prices: &PriceVector,
    baseline: &PriceVector,
    winning_bids: &PriceVector,
) -> Result<BurdenSplit, MetricsError> {
    if !prices.same_domain(baseline) || !prices.same_domain(winning_bids) {
        return Err(MetricsError::DomainMismatch(
            "prices, baseline, and winning bids must cover the same winners".into(),
        ));
    }
    let total: f64 = prices
        .iter()
        .map(|(i, p)| p - baseline.get(i).unwrap())
        .sum();
    if total <= EPS {
        return Ok(BurdenSplit::Zero);
    }
    let mut order: Vec<usize> = prices.winners().collect();
    order.sort_by(|&a, &b| {
        winning_bids
            .get(a)
            .unwrap()
            .partial_cmp(&winning_bids.get(b).unwrap())
            .unwrap()
            .then(a.cmp(&b))
    });
    let lower_count = order.len() / 2;
    let lower: f64 = order[..lower_count]
        .iter()
        .map(|&i| (prices.get(i).unwrap() - baseline.get(i).unwrap()) / total)
        .sum();
    let upper: f64 = order[lower_count..]
        .iter()
        .map(|&i| (prices.get(i).unwrap() - baseline.get(i).unwrap()) / total)
        .sum();
    Ok(BurdenSplit::Shares { lower, upper })
}

/// Core-membership facts about the two payment floors.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MembershipFlags {
    pub vcg_in_core: bool,
    pub wt_in_core: bool,
    /// VCG is in the core with zero revenue, so every vanilla minimum-revenue
    /// rule collects nothing.
    pub zero_revenue_vanilla_mrc: bool,
}

/// Certifies membership of the VCG and WT vectors via fresh separation calls.
pub fn core_membership_flags(
    instance: &Instance,
    allocation: &Allocation,
    vcg: &PriceVector,
    wt: &PriceVector,
) -> Result<MembershipFlags, CoreError> {
    let vcg_in_core = core_pricing::separate_core(instance, allocation, vcg)?.is_none();
    let wt_in_core = core_pricing::separate_core(instance, allocation, wt)?.is_none();
    Ok(MembershipFlags {
        vcg_in_core,
        wt_in_core,
        zero_revenue_vanilla_mrc: vcg_in_core && vcg.total() <= EPS,
    })
}

/// The winning-bid value of each winner, as a price-vector-shaped map.
pub fn winning_bids(instance: &Instance, allocation: &Allocation) -> PriceVector {
    allocation
        .winners()
        .map(|i| (i, payments::winner_bid_value(instance, allocation, i)))
        .collect()
}

/// One metrics CSV row: everything measured for one (instance, rule) cell.
#[derive(Clone, Debug, Serialize)]
pub struct InstanceReport {
    pub instance_id: String,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub beta: f64,
    pub goods: u32,
    pub bids: usize,
    pub rule: String,
    pub revenue: f64,
    pub wt_revenue: f64,
    pub vcg_revenue: f64,
    pub welfare: f64,
    pub sum_dev: f64,
    pub wt_in_core: bool,
    pub vcg_in_core: bool,
    pub zero_rev_vanilla: bool,
    pub burden_lower_wt: Option<f64>,
    pub burden_upper_wt: Option<f64>,
    pub burden_lower_vcg: Option<f64>,
    pub burden_upper_vcg: Option<f64>,
    pub wt_cg_iters: usize,
    pub ccg_iters: usize,
    pub wt_ms: f64,
    pub ccg_ms: f64,
}

/// Geometric mean; zero entries are floored at a nanosecond-scale epsilon so
/// instant measurements do not zero the aggregate.
pub fn geometric_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let log_sum: f64 = values.iter().map(|&v| v.max(1e-9).ln()).sum();
    Some((log_sum / values.len() as f64).exp())
}

/// Geometric standard deviation matching [`geometric_mean`].
pub fn geometric_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let gm = geometric_mean(values)?.ln();
    let var: f64 = values
        .iter()
        .map(|&v| {
            let d = v.max(1e-9).ln() - gm;
            d * d
        })
        .sum::<f64>()
        / values.len() as f64;
    Some(var.sqrt().exp())
}

pub fn arithmetic_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture_ex1;
    use crate::payments::Formulation;
    use crate::wdp::{self, ValuationOverlay};
    use std::collections::BTreeMap;

    fn prices(entries: &[(usize, f64)]) -> PriceVector {
        entries.iter().copied().collect()
    }

    #[test]
    fn sum_deviations_examples() {
        let wt = prices(&[(0, 10.0), (1, 17.0), (2, 15.0)]);
        let wt_nearest = prices(&[(0, 11.0), (1, 17.0), (2, 15.0)]);
        assert!((sum_deviations(&wt_nearest, &wt).unwrap() - 1.0).abs() < EPS);
        assert_eq!(sum_deviations(&wt, &wt).unwrap(), 0.0);

        let vcg = prices(&[(0, 10.0), (1, 10.0), (2, 10.0)]);
        let vanilla = prices(&[(0, 14.0), (1, 14.0), (2, 13.0)]);
        assert!((sum_deviations(&vanilla, &vcg).unwrap() - 11.0).abs() < EPS);
    }

    #[test]
    fn sum_deviations_rejects_mismatch() {
        let a = prices(&[(0, 1.0)]);
        let b = prices(&[(1, 1.0)]);
        assert!(sum_deviations(&a, &b).is_err());
    }

    #[test]
    fn burden_split_ex1() {
        // Burden vector (1, 0, 0); all bids tie at 20 so ids order the halves
        // and bidder 0 alone is the lower half.
        let wt = prices(&[(0, 10.0), (1, 17.0), (2, 15.0)]);
        let p = prices(&[(0, 11.0), (1, 17.0), (2, 15.0)]);
        let bids = prices(&[(0, 20.0), (1, 20.0), (2, 20.0)]);
        match core_burden_split(&p, &wt, &bids).unwrap() {
            BurdenSplit::Shares { lower, upper } => {
                assert!((lower - 1.0).abs() < EPS);
                assert!(upper.abs() < EPS);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn burden_split_zero_marker() {
        let p = prices(&[(0, 5.0), (1, 7.0)]);
        let bids = prices(&[(0, 9.0), (1, 9.0)]);
        assert_eq!(core_burden_split(&p, &p, &bids).unwrap(), BurdenSplit::Zero);
    }

    #[test]
    fn burden_split_two_winners() {
        let base = prices(&[(0, 0.0), (1, 0.0)]);
        let p = prices(&[(0, 0.25), (1, 0.75)]);
        let bids = prices(&[(0, 1.0), (1, 2.0)]);
        match core_burden_split(&p, &base, &bids).unwrap() {
            BurdenSplit::Shares { lower, upper } => {
                assert!((lower - 0.25).abs() < EPS);
                assert!((upper - 0.75).abs() < EPS);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn burden_shares_sum_to_one() {
        let base = prices(&[(0, 1.0), (1, 2.0), (2, 0.0)]);
        let p = prices(&[(0, 2.5), (1, 2.0), (2, 3.0)]);
        let bids = prices(&[(0, 4.0), (1, 5.0), (2, 6.0)]);
        if let BurdenSplit::Shares { lower, upper } = core_burden_split(&p, &base, &bids).unwrap()
        {
            assert!((lower + upper - 1.0).abs() < EPS);
        } else {
            panic!("expected shares");
        }
    }

    #[test]
    fn membership_flags_ex1() {
        let (instance, typespaces) = fixture_ex1();
        let efficient = wdp::solve_wdp(&instance, &ValuationOverlay::none()).unwrap();
        let vcg = payments::vcg_payments(&instance).unwrap();
        let map: BTreeMap<_, _> = typespaces.into_iter().map(|t| (t.bidder_id, t)).collect();
        let (wt, _) = payments::wt_prices(&instance, &map, Formulation::Bps).unwrap();
        let flags =
            core_membership_flags(&instance, &efficient.allocation, &vcg, &wt).unwrap();
        assert!(!flags.vcg_in_core);
        assert!(!flags.wt_in_core);
        assert!(!flags.zero_revenue_vanilla_mrc);
    }

    #[test]
    fn membership_flags_zero_revenue_box() {
        use crate::model::{Bid, Instance};
        let instance = Instance::new(
            2,
            vec![vec![Bid::new([0], 10.0)], vec![Bid::new([1], 10.0)]],
        );
        let efficient = wdp::solve_wdp(&instance, &ValuationOverlay::none()).unwrap();
        let vcg = payments::vcg_payments(&instance).unwrap();
        let flags =
            core_membership_flags(&instance, &efficient.allocation, &vcg, &vcg).unwrap();
        assert!(flags.vcg_in_core);
        assert!(flags.zero_revenue_vanilla_mrc);
    }

    #[test]
    fn membership_full_bids_in_core() {
        let (instance, _) = fixture_ex1();
        let efficient = wdp::solve_wdp(&instance, &ValuationOverlay::none()).unwrap();
        let bids = winning_bids(&instance, &efficient.allocation);
        let flags = core_membership_flags(&instance, &efficient.allocation, &bids, &bids).unwrap();
        assert!(flags.vcg_in_core && flags.wt_in_core);
        assert!(!flags.zero_revenue_vanilla_mrc);
    }

    #[test]
    fn aggregate_helpers() {
        assert_eq!(geometric_mean(&[]), None);
        let gm = geometric_mean(&[1.0, 4.0]).unwrap();
        assert!((gm - 2.0).abs() < 1e-12);
        assert!((arithmetic_mean(&[1.0, 3.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(geometric_std(&[2.0, 2.0]).unwrap() - 1.0 < 1e-12);
    }
}
