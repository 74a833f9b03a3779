//! Winner determination: the efficient allocation and welfare for an instance
//! with an optional valuation overlay.
//!
//! The overlay is how every other module reuses this single code path: VCG
//! excludes one bidder, coalition welfare excludes everyone outside the
//! coalition, and the weakest-type separation replaces one bidder's bids with
//! candidate values. The integer program is the standard one: a binary
//! variable per bid, at most one bid per bidder, no good allocated twice.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{Allocation, Bid, Instance};
use crate::solver::{
    self, Direction, IntegerProgramSpec, LinearConstraint, LinearProgramSpec, Sense, SolveResult,
    SolverError, Variable,
};

#[derive(Debug, Error)]
pub enum WdpError {
    #[error("unknown bidder {0}")]
    UnknownBidder(usize),
    #[error("invalid overlay: {0}")]
    InvalidOverlay(String),
    #[error("allocation count exceeds cap {0}")]
    AllocationCapExceeded(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Per-bidder bid replacements and exclusions applied on top of an instance.
#[derive(Clone, Debug, Default)]
pub struct ValuationOverlay {
    replacements: BTreeMap<usize, Vec<Bid>>,
    excluded: BTreeSet<usize>,
}

impl ValuationOverlay {
    /// The identity overlay: solve the instance as submitted.
    pub fn none() -> Self {
        ValuationOverlay::default()
    }

    /// Excludes a bidder entirely (as if she had bid zero on everything).
    pub fn exclude(mut self, bidder: usize) -> Self {
        self.excluded.insert(bidder);
        self
    }

    /// Excludes every bidder not in `coalition`.
    pub fn keep_only(instance: &Instance, coalition: &BTreeSet<usize>) -> Self {
        let mut overlay = ValuationOverlay::default();
        for id in 0..instance.num_bidders() {
            if !coalition.contains(&id) {
                overlay.excluded.insert(id);
            }
        }
        overlay
    }

    /// Replaces a bidder's bid list.
    pub fn replace(mut self, bidder: usize, bids: Vec<Bid>) -> Self {
        self.replacements.insert(bidder, bids);
        self
    }

    /// The bid list in force for `bidder` under this overlay.
    pub fn bids_for<'a>(&'a self, instance: &'a Instance, bidder: usize) -> &'a [Bid] {
        if self.excluded.contains(&bidder) {
            return &[];
        }
        match self.replacements.get(&bidder) {
            Some(bids) => bids,
            None => &instance.bidders[bidder].bids,
        }
    }

    fn validate(&self, instance: &Instance) -> Result<(), WdpError> {
        let n = instance.num_bidders();
        for &id in self.excluded.iter().chain(self.replacements.keys()) {
            if id >= n {
                return Err(WdpError::UnknownBidder(id));
            }
        }
        for (&id, bids) in &self.replacements {
            for bid in bids {
                if bid.bundle.is_empty() {
                    return Err(WdpError::InvalidOverlay(format!(
                        "bidder {id}: replacement bid on empty bundle"
                    )));
                }
                if bid.bundle.max_good().is_some_and(|g| g >= instance.num_goods) {
                    return Err(WdpError::InvalidOverlay(format!(
                        "bidder {id}: replacement bundle {:?} references invalid good",
                        bid.bundle
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct WdpSolution {
    pub allocation: Allocation,
    pub welfare: f64,
}

/// Solves winner determination for the instance under the overlay.
///
/// Ties between optimal allocations are broken by the solver backend's
/// lexicographic rule over the bid variables, ordered by (bidder, bid).
pub fn solve_wdp(instance: &Instance, overlay: &ValuationOverlay) -> Result<WdpSolution, WdpError> {
    overlay.validate(instance)?;
    let n = instance.num_bidders();

    // One binary variable per effective bid, ordered by (bidder, bid).
    let mut owners: Vec<(usize, &Bid)> = Vec::new();
    for bidder in 0..n {
        for bid in overlay.bids_for(instance, bidder) {
            owners.push((bidder, bid));
        }
    }
    if owners.is_empty() {
        return Ok(WdpSolution {
            allocation: Allocation::empty(n),
            welfare: 0.0,
        });
    }

    let num_vars = owners.len();
    let mut constraints = Vec::new();
    // No good in more than one winning bundle.
    let mut by_good: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (k, (_, bid)) in owners.iter().enumerate() {
        for &g in bid.bundle.goods() {
            by_good.entry(g).or_default().push(k);
        }
    }
    for vars in by_good.values() {
        if vars.len() < 2 {
            continue;
        }
        let mut coeffs = vec![0.0; num_vars];
        for &k in vars {
            coeffs[k] = 1.0;
        }
        constraints.push(LinearConstraint::new(coeffs, Sense::Le, 1.0));
    }
    // At most one winning bid per bidder (XOR semantics).
    let mut start = 0;
    for bidder in 0..n {
        let count = overlay.bids_for(instance, bidder).len();
        if count >= 2 {
            let mut coeffs = vec![0.0; num_vars];
            for k in start..start + count {
                coeffs[k] = 1.0;
            }
            constraints.push(LinearConstraint::new(coeffs, Sense::Le, 1.0));
        }
        start += count;
    }

    let spec = IntegerProgramSpec {
        base: LinearProgramSpec {
            variables: (0..num_vars)
                .map(|k| Variable::bounded(format!("x{}_{}", owners[k].0, k), 0.0, 1.0))
                .collect(),
            constraints,
            objective: owners.iter().map(|(_, bid)| bid.value).collect(),
            direction: Direction::Maximize,
        },
    };

    match solver::solve_ip(&spec)? {
        SolveResult::Optimal(sol) => {
            let mut allocation = Allocation::empty(n);
            for (k, (bidder, bid)) in owners.iter().enumerate() {
                if sol.values[k] > 0.5 {
                    allocation.assign(*bidder, bid.bundle.clone());
                }
            }
            Ok(WdpSolution {
                allocation,
                welfare: sol.objective,
            })
        }
        // The all-zero assignment is always feasible for a packing program.
        other => Err(WdpError::Solver(SolverError::Numerical(format!(
            "winner determination reported {}",
            other.status_name()
        )))),
    }
}

/// Welfare achievable by the coalition's bids alone, the term `w(0, v_C)`.
pub fn coalition_welfare(
    instance: &Instance,
    coalition: &BTreeSet<usize>,
) -> Result<f64, WdpError> {
    if let Some(&bad) = coalition.iter().find(|&&id| id >= instance.num_bidders()) {
        return Err(WdpError::UnknownBidder(bad));
    }
    let overlay = ValuationOverlay::keep_only(instance, coalition);
    Ok(solve_wdp(instance, &overlay)?.welfare)
}

/// Every feasible allocation (bidders may also win nothing), in the
/// deterministic order of a depth-first scan over (bidder, bid) choices.
///
/// Errs once more than `cap` allocations exist.
pub fn enumerate_feasible_allocations(
    instance: &Instance,
    cap: usize,
) -> Result<Vec<Allocation>, WdpError> {
    fn recurse(
        instance: &Instance,
        bidder: usize,
        used: &mut [bool],
        current: &mut Allocation,
        out: &mut Vec<Allocation>,
        cap: usize,
    ) -> Result<(), WdpError> {
        if bidder == instance.num_bidders() {
            if out.len() >= cap {
                return Err(WdpError::AllocationCapExceeded(cap));
            }
            out.push(current.clone());
            return Ok(());
        }
        // Choice: win nothing.
        recurse(instance, bidder + 1, used, current, out, cap)?;
        for bid in &instance.bidders[bidder].bids {
            if bid.bundle.goods().iter().any(|&g| used[g as usize]) {
                continue;
            }
            for &g in bid.bundle.goods() {
                used[g as usize] = true;
            }
            current.assign(bidder, bid.bundle.clone());
            let res = recurse(instance, bidder + 1, used, current, out, cap);
            current.unassign(bidder);
            for &g in bid.bundle.goods() {
                used[g as usize] = false;
            }
            res?;
        }
        Ok(())
    }

    let mut used = vec![false; instance.num_goods as usize];
    let mut current = Allocation::empty(instance.num_bidders());
    let mut out = Vec::new();
    recurse(instance, 0, &mut used, &mut current, &mut out, cap)?;
    Ok(out)
}
