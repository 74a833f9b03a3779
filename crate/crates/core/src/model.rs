//! Core domain types shared by every other module.
//!
//! Values are plain `f64` currency amounts compared with the project-wide
//! [`crate::EPS`] tolerance. Bundles are canonicalized to sorted, deduplicated
//! good-index lists so that set equality is plain list equality and iteration
//! order is reproducible everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::EPS;

/// A set of good indices, stored sorted and deduplicated.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Bundle(Vec<u32>);

impl Bundle {
    pub fn new(goods: impl IntoIterator<Item = u32>) -> Self {
        let mut goods: Vec<u32> = goods.into_iter().collect();
        goods.sort_unstable();
        goods.dedup();
        Bundle(goods)
    }

    pub fn goods(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, good: u32) -> bool {
        self.0.binary_search(&good).is_ok()
    }

    pub fn max_good(&self) -> Option<u32> {
        self.0.last().copied()
    }

    /// True if the two bundles share at least one good (merge scan).
    pub fn intersects(&self, other: &Bundle) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        // Canonicalize on the way in so no code path observes unsorted goods.
        let goods = Vec::<u32>::deserialize(de)?;
        Ok(Bundle::new(goods))
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, g) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<u32> for Bundle {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        Bundle::new(iter)
    }
}

/// One XOR bid: a bundle and the amount offered for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub bundle: Bundle,
    pub value: f64,
}

impl Bid {
    pub fn new(goods: impl IntoIterator<Item = u32>, value: f64) -> Self {
        Bid {
            bundle: Bundle::new(goods),
            value,
        }
    }
}

/// A bidder and her XOR bid list. At most one bid can win.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bidder {
    pub id: usize,
    pub bids: Vec<Bid>,
}

impl Bidder {
    /// The bidder's bid on `bundle`, if she placed one.
    pub fn value_of(&self, bundle: &Bundle) -> Option<f64> {
        self.bids.iter().find(|b| &b.bundle == bundle).map(|b| b.value)
    }
}

/// A complete auction input: goods 0..m-1 and the bidders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(rename = "goods")]
    pub num_goods: u32,
    pub bidders: Vec<Bidder>,
}

impl Instance {
    /// Builds an instance from per-bidder bid lists, assigning dense ids.
    pub fn new(num_goods: u32, bid_lists: Vec<Vec<Bid>>) -> Self {
        let bidders = bid_lists
            .into_iter()
            .enumerate()
            .map(|(id, bids)| Bidder { id, bids })
            .collect();
        Instance { num_goods, bidders }
    }

    pub fn num_bidders(&self) -> usize {
        self.bidders.len()
    }

    pub fn total_bids(&self) -> usize {
        self.bidders.iter().map(|b| b.bids.len()).sum()
    }

    pub fn bidder(&self, id: usize) -> Option<&Bidder> {
        self.bidders.get(id)
    }

    /// Checks every instance invariant and returns one entry per violation.
    ///
    /// An empty result means the instance is valid. Violations are returned
    /// rather than thrown so callers can report all of them at once.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (pos, bidder) in self.bidders.iter().enumerate() {
            if bidder.id != pos {
                out.push(format!(
                    "bidder ids not dense: position {pos} holds id {}",
                    bidder.id
                ));
            }
            let mut seen = BTreeSet::new();
            for bid in &bidder.bids {
                if bid.bundle.is_empty() {
                    out.push(format!("bidder {}: empty bundle", bidder.id));
                }
                if let Some(max) = bid.bundle.max_good() {
                    if max >= self.num_goods {
                        out.push(format!(
                            "bidder {}: bundle references invalid good {max} (goods = {})",
                            bidder.id, self.num_goods
                        ));
                    }
                }
                if !seen.insert(bid.bundle.clone()) {
                    out.push(format!(
                        "bidder {}: duplicate bundle {:?}",
                        bidder.id, bid.bundle
                    ));
                }
                if bid.value < 0.0 || !bid.value.is_finite() {
                    out.push(format!(
                        "bidder {}: bid value {} on {:?} is not a nonnegative finite number",
                        bidder.id, bid.value, bid.bundle
                    ));
                }
            }
        }
        out
    }
}

/// A feasible outcome: at most one winning bundle per bidder, all disjoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    assignment: Vec<Option<Bundle>>,
}

impl Allocation {
    pub fn empty(num_bidders: usize) -> Self {
        Allocation {
            assignment: vec![None; num_bidders],
        }
    }

    pub fn assign(&mut self, bidder: usize, bundle: Bundle) {
        self.assignment[bidder] = Some(bundle);
    }

    pub fn unassign(&mut self, bidder: usize) {
        self.assignment[bidder] = None;
    }

    pub fn num_bidders(&self) -> usize {
        self.assignment.len()
    }

    pub fn bundle_for(&self, bidder: usize) -> Option<&Bundle> {
        self.assignment.get(bidder).and_then(|b| b.as_ref())
    }

    pub fn winners(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.as_ref().map(|_| i))
    }

    pub fn winner_set(&self) -> BTreeSet<usize> {
        self.winners().collect()
    }

    /// Welfare of this allocation under the instance's own bids.
    ///
    /// Bundles the owning bidder never bid on contribute zero.
    pub fn welfare_under(&self, instance: &Instance) -> f64 {
        self.winners()
            .filter_map(|i| {
                let bundle = self.bundle_for(i)?;
                instance.bidder(i)?.value_of(bundle)
            })
            .sum()
    }

    /// Invariant check: pairwise-disjoint bundles, each from its owner's bid list.
    pub fn validate(&self, instance: &Instance) -> Vec<String> {
        let mut out = Vec::new();
        if self.assignment.len() != instance.num_bidders() {
            out.push(format!(
                "allocation covers {} bidders, instance has {}",
                self.assignment.len(),
                instance.num_bidders()
            ));
            return out;
        }
        let winners: Vec<usize> = self.winners().collect();
        for (k, &i) in winners.iter().enumerate() {
            let bi = self.bundle_for(i).unwrap();
            if instance.bidder(i).map_or(true, |b| b.value_of(bi).is_none()) {
                out.push(format!("bidder {i}: assigned bundle {bi:?} not in bid list"));
            }
            for &j in &winners[k + 1..] {
                let bj = self.bundle_for(j).unwrap();
                if bi.intersects(bj) {
                    out.push(format!("bidders {i} and {j}: bundles overlap"));
                }
            }
        }
        out
    }
}

/// Payment per winning bidder. The key set is exactly the winner set of the
/// allocation the prices were computed for.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector(BTreeMap<usize, f64>);

impl PriceVector {
    pub fn new() -> Self {
        PriceVector(BTreeMap::new())
    }

    /// The all-zero vector over the given winner set.
    pub fn zeros(winners: impl IntoIterator<Item = usize>) -> Self {
        PriceVector(winners.into_iter().map(|i| (i, 0.0)).collect())
    }

    pub fn insert(&mut self, bidder: usize, payment: f64) {
        self.0.insert(bidder, payment);
    }

    pub fn get(&self, bidder: usize) -> Option<f64> {
        self.0.get(&bidder).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn winners(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().map(|(&i, &p)| (i, p))
    }

    /// Total revenue, the l1 norm.
    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn same_domain(&self, other: &PriceVector) -> bool {
        self.0.len() == other.0.len() && self.0.keys().eq(other.0.keys())
    }
}

impl FromIterator<(usize, f64)> for PriceVector {
    fn from_iter<T: IntoIterator<Item = (usize, f64)>>(iter: T) -> Self {
        PriceVector(iter.into_iter().collect())
    }
}

/// One linear constraint `sum_k coeffs[k] * v(bundles[k]) >= rhs` over a
/// bidder's bundle values. The sense is always `>=`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeConstraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// Polyhedral prior knowledge about one bidder's valuation.
///
/// `bundles` lists the bundle values the constraints talk about; constraint
/// coefficient `k` multiplies the value of `bundles[k]`. Bundles touched only
/// by zero coefficients are effectively unconstrained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTypeSpace {
    #[serde(rename = "bidder")]
    pub bidder_id: usize,
    pub bundles: Vec<Bundle>,
    pub constraints: Vec<TypeConstraint>,
}

impl LinearTypeSpace {
    /// The type space that conveys no information at all.
    pub fn unrestricted(bidder_id: usize) -> Self {
        LinearTypeSpace {
            bidder_id,
            bundles: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// A single lower bound `v(bundle) >= bound`.
    pub fn lower_bound(bidder_id: usize, bundle: Bundle, bound: f64) -> Self {
        LinearTypeSpace {
            bidder_id,
            bundles: vec![bundle],
            constraints: vec![TypeConstraint {
                coeffs: vec![1.0],
                rhs: bound,
            }],
        }
    }

    pub fn is_unrestricted(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Bundle indices that carry a nonzero coefficient in some constraint.
    ///
    /// These are the only bundle values the constraints actually pin down;
    /// everything else is free to fall to its lower bound of zero.
    pub fn constrained_bundle_indices(&self) -> Vec<usize> {
        (0..self.bundles.len())
            .filter(|&k| {
                self.constraints
                    .iter()
                    .any(|c| c.coeffs.get(k).map_or(false, |&w| w != 0.0))
            })
            .collect()
    }

    /// Checks the type-space invariants against the owning bidder's bid list.
    pub fn validate(&self, instance: &Instance) -> Vec<String> {
        let mut out = Vec::new();
        let bidder = match instance.bidder(self.bidder_id) {
            Some(b) => b,
            None => {
                out.push(format!("type space references unknown bidder {}", self.bidder_id));
                return out;
            }
        };
        for c in &self.constraints {
            if c.coeffs.len() != self.bundles.len() {
                out.push(format!(
                    "bidder {}: constraint has {} coefficients for {} bundles",
                    self.bidder_id,
                    c.coeffs.len(),
                    self.bundles.len()
                ));
            }
        }
        for &k in &self.constrained_bundle_indices() {
            if bidder.value_of(&self.bundles[k]).is_none() {
                out.push(format!(
                    "bidder {}: constrained bundle {:?} not in bid list",
                    self.bidder_id, self.bundles[k]
                ));
            }
        }
        out
    }

    /// True if the bidder's actual bids satisfy every constraint within `EPS`.
    pub fn satisfied_by_true_bids(&self, instance: &Instance) -> bool {
        let bidder = match instance.bidder(self.bidder_id) {
            Some(b) => b,
            None => return false,
        };
        self.constraints.iter().all(|c| {
            let lhs: f64 = c
                .coeffs
                .iter()
                .zip(&self.bundles)
                .map(|(&w, bundle)| w * bidder.value_of(bundle).unwrap_or(0.0))
                .sum();
            lhs >= c.rhs - EPS
        })
    }
}

/// One core constraint: the winners outside `coalition` must in total pay at
/// least the externality the coalition could generate on its own,
/// `rhs = w(0, v_C) - sum_{j in C} v_j(S*_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreConstraint {
    pub coalition: BTreeSet<usize>,
    pub lhs_winners: BTreeSet<usize>,
    pub rhs: f64,
}

impl CoreConstraint {
    pub fn new(winner_set: &BTreeSet<usize>, coalition: BTreeSet<usize>, rhs: f64) -> Self {
        let lhs_winners = winner_set.difference(&coalition).copied().collect();
        CoreConstraint {
            coalition,
            lhs_winners,
            rhs,
        }
    }

    pub fn lhs_value(&self, prices: &PriceVector) -> f64 {
        self.lhs_winners
            .iter()
            .map(|&i| prices.get(i).unwrap_or(0.0))
            .sum()
    }

    /// `lhs - rhs`; negative means violated.
    pub fn slack(&self, prices: &PriceVector) -> f64 {
        self.lhs_value(prices) - self.rhs
    }

    pub fn is_violated(&self, prices: &PriceVector, eps: f64) -> bool {
        self.slack(prices) < -eps
    }
}

/// The 3-good, 10-bidder single-minded fixture used throughout the tests,
/// together with its three winner type spaces (bidder 0 unrestricted,
/// bidder 1 with v(b) >= 17, bidder 2 with v(c) >= 15).
///
/// Goods are a=0, b=1, c=2. Winners are bidders 0, 1, 2 with welfare 60.
pub fn fixture_ex1() -> (Instance, Vec<LinearTypeSpace>) {
    let bids = vec![
        vec![Bid::new([0], 20.0)],       // v1(a) = 20
        vec![Bid::new([1], 20.0)],       // v2(b) = 20
        vec![Bid::new([2], 20.0)],       // v3(c) = 20
        vec![Bid::new([0, 1], 28.0)],    // v4(ab) = 28
        vec![Bid::new([0, 2], 26.0)],    // v5(ac) = 26
        vec![Bid::new([1, 2], 23.0)],    // v6(bc) = 23
        vec![Bid::new([0], 10.0)],       // v7(a) = 10
        vec![Bid::new([1], 10.0)],       // v8(b) = 10
        vec![Bid::new([2], 10.0)],       // v9(c) = 10
        vec![Bid::new([0, 1, 2], 41.0)], // v10(abc) = 41
    ];
    let instance = Instance::new(3, bids);
    let typespaces = vec![
        LinearTypeSpace::unrestricted(0),
        LinearTypeSpace::lower_bound(1, Bundle::new([1]), 17.0),
        LinearTypeSpace::lower_bound(2, Bundle::new([2]), 15.0),
    ];
    (instance, typespaces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_canonicalization() {
        let b = Bundle::new([3, 1, 2, 1]);
        assert_eq!(b.goods(), &[1, 2, 3]);
        assert!(b.contains(2));
        assert!(!b.contains(0));
        assert!(Bundle::new([0, 1]).intersects(&Bundle::new([1, 2])));
        assert!(!Bundle::new([0, 1]).intersects(&Bundle::new([2, 3])));
    }

    #[test]
    fn fixture_shape() {
        let (instance, typespaces) = fixture_ex1();
        assert_eq!(instance.num_goods, 3);
        assert_eq!(instance.num_bidders(), 10);
        assert_eq!(instance.total_bids(), 10);
        assert!(instance.validate().is_empty());
        assert_eq!(typespaces.len(), 3);
        assert!(typespaces[0].is_unrestricted());
        for ts in &typespaces {
            assert!(ts.validate(&instance).is_empty());
            assert!(ts.satisfied_by_true_bids(&instance));
        }
    }

    #[test]
    fn validation_flags_invalid_good() {
        let instance = Instance::new(2, vec![vec![Bid::new([0, 2], 5.0)]]);
        let violations = instance.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("invalid good"));
    }

    #[test]
    fn validation_flags_duplicate_bundle() {
        let instance = Instance::new(
            2,
            vec![vec![Bid::new([0], 5.0), Bid::new([0], 6.0)]],
        );
        let violations = instance.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("duplicate bundle"));
    }

    #[test]
    fn validation_flags_negative_value_and_empty_bundle() {
        let instance = Instance::new(2, vec![vec![Bid::new([0], -1.0)], vec![Bid::new([], 1.0)]]);
        let violations = instance.validate();
        assert_eq!(violations.len(), 2);
    }

    #[test]
    fn allocation_validation_catches_overlap() {
        let (instance, _) = fixture_ex1();
        let mut alloc = Allocation::empty(10);
        alloc.assign(0, Bundle::new([0]));
        alloc.assign(3, Bundle::new([0, 1]));
        let violations = alloc.validate(&instance);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("overlap"));
    }

    #[test]
    fn allocation_validation_catches_foreign_bundle() {
        let (instance, _) = fixture_ex1();
        let mut alloc = Allocation::empty(10);
        alloc.assign(0, Bundle::new([1]));
        assert_eq!(alloc.validate(&instance).len(), 1);
    }

    #[test]
    fn fixture_serialization_round_trips_bit_identically() {
        let (instance, typespaces) = fixture_ex1();
        let s1 = serde_json::to_string(&instance).unwrap();
        let back: Instance = serde_json::from_str(&s1).unwrap();
        assert_eq!(back, instance);
        assert_eq!(serde_json::to_string(&back).unwrap(), s1);

        let t1 = serde_json::to_string(&typespaces).unwrap();
        let tback: Vec<LinearTypeSpace> = serde_json::from_str(&t1).unwrap();
        assert_eq!(tback, typespaces);
        assert_eq!(serde_json::to_string(&tback).unwrap(), t1);
    }

    #[test]
    fn instance_json_uses_spec_field_names() {
        let (instance, _) = fixture_ex1();
        let json = serde_json::to_string(&instance).unwrap();
        assert!(json.starts_with(r#"{"goods":3,"bidders":[{"id":0,"bids":[{"bundle":[0],"value":20.0}"#));
    }

    #[test]
    fn bundle_deserialization_canonicalizes() {
        let b: Bundle = serde_json::from_str("[3,1,1,2]").unwrap();
        assert_eq!(b, Bundle::new([1, 2, 3]));
    }

    #[test]
    fn price_vector_total_and_domain() {
        let p: PriceVector = [(0, 10.0), (1, 17.0), (2, 15.0)].into_iter().collect();
        assert_eq!(p.total(), 42.0);
        let q = PriceVector::zeros([0, 1, 2]);
        assert!(p.same_domain(&q));
        assert!(!p.same_domain(&PriceVector::zeros([0, 1])));
    }

    #[test]
    fn core_constraint_slack() {
        let winners: BTreeSet<usize> = [0, 1, 2].into_iter().collect();
        let c = CoreConstraint::new(&winners, [2, 3].into_iter().collect(), 28.0);
        assert_eq!(c.lhs_winners, [0, 1].into_iter().collect());
        let p: PriceVector = [(0, 10.0), (1, 17.0), (2, 15.0)].into_iter().collect();
        assert!((c.slack(&p) - (-1.0)).abs() < 1e-12);
        assert!(c.is_violated(&p, EPS));
    }
}
