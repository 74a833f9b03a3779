//! Core-selecting payment rules via LP/QP core-constraint generation, plus
//! the incentive-compatibility diagnosis.
//!
//! The driver loop is the standard one for minimum-revenue core pricing:
//! solve the restricted revenue LP over the constraint pool to get the target
//! revenue, solve the QP that picks the pool-feasible point of that revenue
//! closest to the rule's reference prices, then try to separate the candidate
//! with an auxiliary winner determination in which each winner's bids are
//! reduced by her opportunity cost. A violated coalition becomes a new pool
//! constraint; no violation certifies core membership and ends the loop.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{Allocation, Bid, CoreConstraint, Instance, LinearTypeSpace, PriceVector};
use crate::payments::{self, PaymentError};
use crate::solver::{
    self, Direction, LinearConstraint, LinearProgramSpec, QuadraticProgramSpec, QuadraticTerm,
    Sense, SolveResult, SolverError, Variable,
};
use crate::wdp::{self, ValuationOverlay, WdpError};
use crate::EPS;

/// Full coalition enumeration is gated at this many bidders.
pub const MAX_DIAGNOSIS_BIDDERS: usize = 20;
/// Above this many feasible allocations the diagnosis falls back to solving
/// one winner determination per coalition.
const DIAGNOSIS_ENUMERATION_CAP: usize = 500_000;
/// The disjoint family is materialized in reports up to this many entries.
const DISJOINT_FAMILY_REPORT_CAP: usize = 4096;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("floor exceeds winning bids")]
    FloorExceedsWinningBids,
    #[error("price vector domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("diagnosis requires full enumeration; instance too large ({n} bidders > {MAX_DIAGNOSIS_BIDDERS})")]
    TooManyBidders { n: usize },
    #[error(transparent)]
    Wdp(#[from] WdpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Payment(#[from] PaymentError),
    #[error("core-constraint generation failed: {0}")]
    Internal(String),
}

/// The five core-selecting payment rules: a floor (where prices must stay
/// above) and a reference point (what the QP pulls towards).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum PaymentRuleKind {
    /// Floor VCG, reference VCG.
    VanillaVcgNearest,
    /// Floor VCG, reference zero.
    VanillaZeroNearest,
    /// Floor WT, reference WT.
    WtNearest,
    /// Floor WT, reference zero.
    ZeroNearestAboveWt,
    /// Floor WT, reference VCG.
    VcgNearestAboveWt,
}

impl PaymentRuleKind {
    pub const ALL: [PaymentRuleKind; 5] = [
        PaymentRuleKind::VanillaVcgNearest,
        PaymentRuleKind::VanillaZeroNearest,
        PaymentRuleKind::WtNearest,
        PaymentRuleKind::ZeroNearestAboveWt,
        PaymentRuleKind::VcgNearestAboveWt,
    ];

    /// Rules whose floor is the weakest-type price vector.
    pub fn is_above_wt(self) -> bool {
        matches!(
            self,
            PaymentRuleKind::WtNearest
                | PaymentRuleKind::ZeroNearestAboveWt
                | PaymentRuleKind::VcgNearestAboveWt
        )
    }

    pub fn slug(self) -> &'static str {
        match self {
            PaymentRuleKind::VanillaVcgNearest => "vanilla-vcg-nearest",
            PaymentRuleKind::VanillaZeroNearest => "vanilla-zero-nearest",
            PaymentRuleKind::WtNearest => "wt-nearest",
            PaymentRuleKind::ZeroNearestAboveWt => "zero-nearest",
            PaymentRuleKind::VcgNearestAboveWt => "vcg-nearest",
        }
    }
}

impl std::fmt::Display for PaymentRuleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.slug())
    }
}

impl std::str::FromStr for PaymentRuleKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla-vcg-nearest" => Ok(PaymentRuleKind::VanillaVcgNearest),
            "vanilla-zero-nearest" => Ok(PaymentRuleKind::VanillaZeroNearest),
            "wt-nearest" => Ok(PaymentRuleKind::WtNearest),
            "zero-nearest" | "zero-nearest-above-wt" => Ok(PaymentRuleKind::ZeroNearestAboveWt),
            "vcg-nearest" | "vcg-nearest-above-wt" => Ok(PaymentRuleKind::VcgNearestAboveWt),
            other => Err(format!(
                "unknown payment rule '{other}' (expected one of: vanilla-vcg-nearest, \
                 vanilla-zero-nearest, wt-nearest, zero-nearest, vcg-nearest)"
            )),
        }
    }
}

/// A rule resolved against concrete VCG/WT prices for one instance.
#[derive(Clone, Debug)]
pub struct PaymentRule {
    pub kind: PaymentRuleKind,
    pub floor: PriceVector,
    pub reference: PriceVector,
}

impl PaymentRule {
    pub fn resolve(kind: PaymentRuleKind, vcg: &PriceVector, wt: &PriceVector) -> Self {
        let zero = || PriceVector::zeros(vcg.winners());
        let (floor, reference) = match kind {
            PaymentRuleKind::VanillaVcgNearest => (vcg.clone(), vcg.clone()),
            PaymentRuleKind::VanillaZeroNearest => (vcg.clone(), zero()),
            PaymentRuleKind::WtNearest => (wt.clone(), wt.clone()),
            PaymentRuleKind::ZeroNearestAboveWt => (wt.clone(), zero()),
            PaymentRuleKind::VcgNearestAboveWt => (wt.clone(), vcg.clone()),
        };
        PaymentRule {
            kind,
            floor,
            reference,
        }
    }
}

/// Outcome of one core-constraint-generation run.
#[derive(Clone, Debug, Serialize)]
pub struct CcgResult {
    pub prices: PriceVector,
    pub revenue: f64,
    pub generated_constraints: Vec<CoreConstraint>,
    pub ccg_iterations: usize,
    pub lp_revenue_history: Vec<f64>,
}

/// Finds the most violated core constraint at `candidate`, if any.
///
/// Auxiliary winner determination: every bid of winner `i` is reduced by her
/// opportunity cost `v_i(S*_i) - p_i` (clamped at zero). If the auxiliary
/// welfare beats the candidate revenue by more than `EPS`, the auxiliary
/// winner set is a violated coalition; its constraint is returned with a
/// freshly computed right-hand side. `None` certifies core membership.
pub fn separate_core(
    instance: &Instance,
    allocation: &Allocation,
    candidate: &PriceVector,
) -> Result<Option<CoreConstraint>, CoreError> {
    let winners = allocation.winner_set();
    let candidate_winners: BTreeSet<usize> = candidate.winners().collect();
    if winners != candidate_winners {
        return Err(CoreError::DomainMismatch(format!(
            "candidate prices cover {candidate_winners:?}, winners are {winners:?}"
        )));
    }

    let mut overlay = ValuationOverlay::none();
    for &i in &winners {
        let opportunity_cost =
            payments::winner_bid_value(instance, allocation, i) - candidate.get(i).unwrap();
        let reduced: Vec<Bid> = instance.bidders[i]
            .bids
            .iter()
            .map(|bid| Bid {
                bundle: bid.bundle.clone(),
                value: (bid.value - opportunity_cost).max(0.0),
            })
            .collect();
        overlay = overlay.replace(i, reduced);
    }
    let aux = wdp::solve_wdp(instance, &overlay)?;
    if aux.welfare <= candidate.total() + EPS {
        return Ok(None);
    }
    let coalition = aux.allocation.winner_set();
    let coalition_value = wdp::coalition_welfare(instance, &coalition)?;
    let winners_value: f64 = coalition
        .iter()
        .map(|&j| payments::winner_bid_value(instance, allocation, j))
        .sum();
    Ok(Some(CoreConstraint::new(
        &winners,
        coalition,
        coalition_value - winners_value,
    )))
}

fn winner_bid_prices(instance: &Instance, allocation: &Allocation) -> PriceVector {
    allocation
        .winners()
        .map(|i| (i, payments::winner_bid_value(instance, allocation, i)))
        .collect()
}

/// Builds the shared variable/bound/pool-row scaffolding for the LP and QP.
fn pool_program(
    instance: &Instance,
    allocation: &Allocation,
    floor: &PriceVector,
    pool: &[CoreConstraint],
) -> Result<(Vec<usize>, LinearProgramSpec), CoreError> {
    let winners: Vec<usize> = allocation.winners().collect();
    let bids = winner_bid_prices(instance, allocation);
    let mut variables = Vec::with_capacity(winners.len());
    for &i in &winners {
        let lo = floor.get(i).ok_or_else(|| {
            CoreError::DomainMismatch(format!("floor missing winner {i}"))
        })?;
        let hi = bids.get(i).unwrap();
        if lo > hi + EPS {
            return Err(CoreError::FloorExceedsWinningBids);
        }
        variables.push(Variable::bounded(format!("p{i}"), lo, hi.max(lo)));
    }
    let index_of: BTreeMap<usize, usize> =
        winners.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let mut constraints = Vec::with_capacity(pool.len());
    for c in pool {
        if c.lhs_winners.is_empty() {
            if c.rhs > EPS {
                return Err(CoreError::Internal(format!(
                    "constraint for coalition {:?} has empty lhs and positive rhs {}",
                    c.coalition, c.rhs
                )));
            }
            continue;
        }
        let mut row = vec![0.0; winners.len()];
        for j in &c.lhs_winners {
            row[index_of[j]] = 1.0;
        }
        constraints.push(LinearConstraint::new(row, Sense::Ge, c.rhs));
    }
    Ok((
        winners,
        LinearProgramSpec {
            variables,
            constraints,
            objective: Vec::new(),
            direction: Direction::Minimize,
        },
    ))
}

/// Minimum total payment over the pool's constraints with `floor <= p <= bids`.
///
/// This is the restricted revenue LP of the generation loop; separating the
/// returned optimum against the full core is the driver's job.
pub fn min_revenue_above(
    instance: &Instance,
    allocation: &Allocation,
    floor: &PriceVector,
    pool: &[CoreConstraint],
) -> Result<f64, CoreError> {
    let (winners, mut spec) = pool_program(instance, allocation, floor, pool)?;
    if winners.is_empty() {
        return Ok(0.0);
    }
    spec.objective = vec![1.0; winners.len()];
    match solver::solve_lp(&spec)? {
        SolveResult::Optimal(s) => Ok(s.objective),
        SolveResult::Infeasible => Err(CoreError::FloorExceedsWinningBids),
        SolveResult::Unbounded => Err(CoreError::Internal(
            "revenue LP unbounded despite box bounds".into(),
        )),
    }
}

/// Runs the full LP -> QP -> separation loop for one payment rule.
///
/// Returns certified core prices on the minimum-revenue face above the rule's
/// floor, closest in Euclidean distance to the rule's reference point.
pub fn ccg_nearest(
    instance: &Instance,
    allocation: &Allocation,
    rule: &PaymentRule,
) -> Result<CcgResult, CoreError> {
    let winners: Vec<usize> = allocation.winners().collect();
    if winners.is_empty() {
        return Ok(CcgResult {
            prices: PriceVector::new(),
            revenue: 0.0,
            generated_constraints: Vec::new(),
            ccg_iterations: 0,
            lp_revenue_history: Vec::new(),
        });
    }
    let mut pool: Vec<CoreConstraint> = Vec::new();
    let mut lp_revenue_history = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let target = min_revenue_above(instance, allocation, &rule.floor, &pool)?;
        lp_revenue_history.push(target);

        let (_, mut spec) = pool_program(instance, allocation, &rule.floor, &pool)?;
        spec.objective = vec![0.0; winners.len()];
        spec.constraints.push(LinearConstraint::new(
            vec![1.0; winners.len()],
            Sense::Eq,
            target,
        ));
        let quadratic = winners
            .iter()
            .map(|&i| QuadraticTerm {
                weight: 1.0,
                center: rule.reference.get(i).unwrap_or(0.0),
            })
            .collect();
        let qp = QuadraticProgramSpec {
            base: spec,
            quadratic,
        };
        let solution = match solver::solve_qp(&qp)? {
            SolveResult::Optimal(s) => s,
            other => {
                return Err(CoreError::Internal(format!(
                    "restricted QP reported {} on its own LP optimum",
                    other.status_name()
                )))
            }
        };
        let prices: PriceVector = winners
            .iter()
            .zip(&solution.values)
            .map(|(&i, &p)| (i, p.max(0.0)))
            .collect();

        match separate_core(instance, allocation, &prices)? {
            Some(constraint) => {
                if pool.iter().any(|c| c.coalition == constraint.coalition) {
                    return Err(CoreError::Internal(format!(
                        "separation repeated coalition {:?}",
                        constraint.coalition
                    )));
                }
                pool.push(constraint);
            }
            None => {
                return Ok(CcgResult {
                    revenue: prices.total(),
                    prices,
                    generated_constraints: pool,
                    ccg_iterations: iterations,
                    lp_revenue_history,
                });
            }
        }
    }
}

/// Verdict of the incentive-compatibility trichotomy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Weakest-type prices sit outside the core: no incentive compatible
    /// core-selecting auction exists at all.
    NoIcCoreCA,
    /// Weakest-type prices are the only incentive compatible core point.
    WtUniqueIcCoreCA,
    /// Prices can be lowered along slack constraints: infinitely many
    /// incentive compatible core-selecting auctions exist.
    ContinuumOfIcCoreCAs,
}

/// Diagnosis output: where weakest-type prices sit relative to the core.
#[derive(Clone, Debug, Serialize)]
pub struct ImpossibilityReport {
    pub wt_in_core: bool,
    pub wt_prices: PriceVector,
    /// Core constraints (with a nonempty price side) tight at the WT prices.
    pub binding_coalitions: Vec<BTreeSet<usize>>,
    /// Coalitions disjoint from every binding coalition (capped listing).
    pub disjoint_family: Vec<BTreeSet<usize>>,
    /// Slack of each listed disjoint-family constraint at the WT prices.
    pub slacks: Vec<(BTreeSet<usize>, f64)>,
    /// Constraints violated at the WT prices (only when not in core).
    pub violated_coalitions: Vec<(BTreeSet<usize>, f64)>,
    pub verdict: Verdict,
}

/// Welfare of every coalition, indexed by bidder-set bitmask.
fn all_coalition_welfares(instance: &Instance) -> Result<Vec<f64>, CoreError> {
    let n = instance.num_bidders();
    let size = 1usize << n;
    match wdp::enumerate_feasible_allocations(instance, DIAGNOSIS_ENUMERATION_CAP) {
        Ok(allocations) => {
            let mut table = vec![0.0f64; size];
            for alloc in &allocations {
                let mask = alloc
                    .winners()
                    .fold(0usize, |m, i| m | (1 << i));
                let value = alloc.welfare_under(instance);
                if value > table[mask] {
                    table[mask] = value;
                }
            }
            // Superset sweep: w(C) = max over allocations supported inside C.
            for bit in 0..n {
                for mask in 0..size {
                    if mask & (1 << bit) != 0 {
                        let without = table[mask ^ (1 << bit)];
                        if without > table[mask] {
                            table[mask] = without;
                        }
                    }
                }
            }
            Ok(table)
        }
        Err(WdpError::AllocationCapExceeded(_)) => {
            // Dense instance: solve winner determination per coalition.
            let mut table = vec![0.0f64; size];
            for (mask, slot) in table.iter_mut().enumerate() {
                let coalition: BTreeSet<usize> =
                    (0..n).filter(|&i| mask & (1 << i) != 0).collect();
                *slot = wdp::coalition_welfare(instance, &coalition)?;
            }
            Ok(table)
        }
        Err(e) => Err(e.into()),
    }
}

/// Classifies the instance per the trichotomy at its weakest-type prices.
///
/// Enumerates all `2^n` coalition constraints, so it is gated at
/// [`MAX_DIAGNOSIS_BIDDERS`] bidders.
pub fn impossibility_diagnosis(
    instance: &Instance,
    typespaces: &BTreeMap<usize, LinearTypeSpace>,
) -> Result<ImpossibilityReport, CoreError> {
    let n = instance.num_bidders();
    if n > MAX_DIAGNOSIS_BIDDERS {
        return Err(CoreError::TooManyBidders { n });
    }
    let efficient = wdp::solve_wdp(instance, &ValuationOverlay::none())?;
    let (wt, _) = payments::wt_prices_with_allocation(
        instance,
        &efficient,
        typespaces,
        payments::Formulation::Bps,
    )?;
    let winners = efficient.allocation.winner_set();
    let winner_mask: usize = winners.iter().fold(0, |m, &i| m | (1 << i));
    let winner_bids = winner_bid_prices(instance, &efficient.allocation);

    let welfare_of = all_coalition_welfares(instance)?;
    let size = 1usize << n;
    let coalition_set = |mask: usize| -> BTreeSet<usize> {
        (0..n).filter(|&i| mask & (1 << i) != 0).collect()
    };
    // slack(C) = sum_{i in W \ C} p_i - w(0, v_C) + sum_{j in C} v_j(S*_j).
    let slack_of = |mask: usize| -> f64 {
        let outside: f64 = winners
            .iter()
            .filter(|&&i| mask & (1 << i) == 0)
            .map(|&i| wt.get(i).unwrap_or(0.0))
            .sum();
        let inside_bids: f64 = winners
            .iter()
            .filter(|&&i| mask & (1 << i) != 0)
            .map(|&i| winner_bids.get(i).unwrap_or(0.0))
            .sum();
        outside - welfare_of[mask] + inside_bids
    };

    // Individual rationality holds by construction; checked all the same.
    let ir_ok = wt
        .iter()
        .all(|(i, p)| p <= winner_bids.get(i).unwrap_or(0.0) + EPS);

    let mut violated = Vec::new();
    let mut binding = Vec::new();
    let mut binding_mask_union = 0usize;
    for mask in 0..size {
        let slack = slack_of(mask);
        if slack < -EPS {
            violated.push((coalition_set(mask), slack));
            continue;
        }
        // Constraints whose price side is empty are always tight and say
        // nothing about prices; they stay out of the binding set.
        let vacuous = winner_mask & !mask == 0;
        if !vacuous && slack.abs() <= EPS {
            binding.push(coalition_set(mask));
            binding_mask_union |= mask;
        }
    }
    let wt_in_core = violated.is_empty() && ir_ok;

    if !wt_in_core {
        violated.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        return Ok(ImpossibilityReport {
            wt_in_core,
            wt_prices: wt,
            binding_coalitions: Vec::new(),
            disjoint_family: Vec::new(),
            slacks: Vec::new(),
            violated_coalitions: violated,
            verdict: Verdict::NoIcCoreCA,
        });
    }

    // The disjoint family is exactly the power set of the bidders untouched
    // by any binding coalition.
    let complement = !binding_mask_union & (size - 1);
    let mut disjoint_family = Vec::new();
    let mut slacks = Vec::new();
    let mut continuum = false;
    let mut mask = 0usize;
    loop {
        // `mask` walks all submasks of `complement`, ascending.
        let slack = slack_of(mask);
        if slack > EPS && mask & winner_mask != 0 {
            continuum = true;
        }
        if disjoint_family.len() < DISJOINT_FAMILY_REPORT_CAP {
            disjoint_family.push(coalition_set(mask));
            slacks.push((coalition_set(mask), slack));
        }
        if mask == complement {
            break;
        }
        mask = (mask.wrapping_sub(complement)) & complement;
    }

    let verdict = if continuum {
        Verdict::ContinuumOfIcCoreCAs
    } else {
        Verdict::WtUniqueIcCoreCA
    };
    Ok(ImpossibilityReport {
        wt_in_core,
        wt_prices: wt,
        binding_coalitions: binding,
        disjoint_family,
        slacks,
        violated_coalitions: Vec::new(),
        verdict,
    })
}
