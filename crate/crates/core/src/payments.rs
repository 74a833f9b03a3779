//! VCG payments and weakest-type payments.
//!
//! A winner's weakest-type payment replaces the VCG pivot term
//! `w(0, v_-i)` with `min w(v~, v_-i)` over the valuations `v~` the type
//! space still allows for her. Both pivot formulations here (BPS, a direct
//! min-max linearization, and BO, built on dual supporting prices) have one
//! constraint per feasible allocation, so they are solved by constraint
//! generation: start from the efficient allocation only, solve the restricted
//! LP, find the most violated allocation constraint with a winner
//! determination call, add it, repeat until no violation exceeds `EPS`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::model::{Allocation, Bid, Bundle, Instance, LinearTypeSpace, PriceVector};
use crate::solver::{
    self, Direction, LinearConstraint, LinearProgramSpec, Sense, SolveResult, Solution,
    SolverError, Variable,
};
use crate::wdp::{self, ValuationOverlay, WdpError, WdpSolution};
use crate::EPS;

#[derive(Debug, Error)]
pub enum PaymentError {
    #[error("bidder {0} is not a winner")]
    NotAWinner(usize),
    #[error("empty type space")]
    EmptyTypeSpace,
    #[error("type space does not bound pivot")]
    UnboundedPivot,
    #[error("type space mismatch: {0}")]
    TypespaceMismatch(String),
    #[error(transparent)]
    Wdp(#[from] WdpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("constraint generation failed: {0}")]
    Internal(String),
}

/// Which weakest-type pivot formulation to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Bps,
    Bo,
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Formulation::Bps => write!(f, "bps"),
            Formulation::Bo => write!(f, "bo"),
        }
    }
}

impl std::str::FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bps" => Ok(Formulation::Bps),
            "bo" => Ok(Formulation::Bo),
            other => Err(format!("unknown formulation '{other}' (expected bps or bo)")),
        }
    }
}

/// Outcome of one weakest-type computation for one winner.
#[derive(Clone, Debug)]
pub struct WtResult {
    pub payment: f64,
    /// The minimizing valuation over the constrained bundles.
    pub weakest_type: BTreeMap<Bundle, f64>,
    /// The min-max welfare term the payment is derived from.
    pub pivot_value: f64,
    pub cg_iterations: usize,
    /// Allocation pool history, starting with the efficient allocation.
    pub generated_allocations: Vec<Allocation>,
    pub formulation: Formulation,
    pub wall_time: Duration,
}

/// The statistics slice of a [`WtResult`] exported to the harness.
#[derive(Clone, Debug, Serialize)]
pub struct CgStats {
    pub formulation: Formulation,
    pub iterations: usize,
    pub wall_time_ms: f64,
}

impl WtResult {
    pub fn stats(&self) -> CgStats {
        CgStats {
            formulation: self.formulation,
            iterations: self.cg_iterations,
            wall_time_ms: self.wall_time.as_secs_f64() * 1e3,
        }
    }
}

/// VCG: each winner pays the externality she imposes on the others.
///
/// Solves winner determination once overall plus once per winner.
pub fn vcg_payments(instance: &Instance) -> Result<PriceVector, PaymentError> {
    let efficient = wdp::solve_wdp(instance, &ValuationOverlay::none())?;
    vcg_with_allocation(instance, &efficient)
}

/// VCG payments when the efficient allocation is already known.
pub fn vcg_with_allocation(
    instance: &Instance,
    efficient: &WdpSolution,
) -> Result<PriceVector, PaymentError> {
    let mut prices = PriceVector::new();
    for i in efficient.allocation.winners() {
        let own = winner_bid_value(instance, &efficient.allocation, i);
        let without = wdp::solve_wdp(instance, &ValuationOverlay::none().exclude(i))?;
        let payment = without.welfare - (efficient.welfare - own);
        prices.insert(i, payment.max(0.0));
    }
    Ok(prices)
}

pub(crate) fn winner_bid_value(instance: &Instance, allocation: &Allocation, bidder: usize) -> f64 {
    allocation
        .bundle_for(bidder)
        .and_then(|b| instance.bidders[bidder].value_of(b))
        .unwrap_or(0.0)
}

/// Weakest-type payment via the min-max linearization (BPS).
pub fn wt_payment_bps(
    instance: &Instance,
    bidder: usize,
    typespace: &LinearTypeSpace,
) -> Result<WtResult, PaymentError> {
    let efficient = wdp::solve_wdp(instance, &ValuationOverlay::none())?;
    wt_with_allocation(instance, &efficient, bidder, typespace, Formulation::Bps)
}

/// Weakest-type payment via the dual supporting-price formulation (BO).
pub fn wt_payment_bo(
    instance: &Instance,
    bidder: usize,
    typespace: &LinearTypeSpace,
) -> Result<WtResult, PaymentError> {
    let efficient = wdp::solve_wdp(instance, &ValuationOverlay::none())?;
    wt_with_allocation(instance, &efficient, bidder, typespace, Formulation::Bo)
}

/// Weakest-type payments for every winner, plus the per-winner results.
///
/// Winners without an entry in `typespaces` are treated as unrestricted, for
/// whom the weakest-type payment collapses to the VCG payment.
pub fn wt_prices(
    instance: &Instance,
    typespaces: &BTreeMap<usize, LinearTypeSpace>,
    formulation: Formulation,
) -> Result<(PriceVector, BTreeMap<usize, WtResult>), PaymentError> {
    let efficient = wdp::solve_wdp(instance, &ValuationOverlay::none())?;
    wt_prices_with_allocation(instance, &efficient, typespaces, formulation)
}

/// [`wt_prices`] when the efficient allocation is already known.
pub fn wt_prices_with_allocation(
    instance: &Instance,
    efficient: &WdpSolution,
    typespaces: &BTreeMap<usize, LinearTypeSpace>,
    formulation: Formulation,
) -> Result<(PriceVector, BTreeMap<usize, WtResult>), PaymentError> {
    let mut prices = PriceVector::new();
    let mut results = BTreeMap::new();
    for i in efficient.allocation.winners() {
        let unrestricted;
        let typespace = match typespaces.get(&i) {
            Some(ts) => ts,
            None => {
                unrestricted = LinearTypeSpace::unrestricted(i);
                &unrestricted
            }
        };
        let result = wt_with_allocation(instance, efficient, i, typespace, formulation)?;
        prices.insert(i, result.payment);
        results.insert(i, result);
    }
    Ok((prices, results))
}

/// One winner's weakest-type payment when the allocation is already known.
pub fn wt_with_allocation(
    instance: &Instance,
    efficient: &WdpSolution,
    bidder: usize,
    typespace: &LinearTypeSpace,
    formulation: Formulation,
) -> Result<WtResult, PaymentError> {
    if efficient.allocation.bundle_for(bidder).is_none() {
        return Err(PaymentError::NotAWinner(bidder));
    }
    if typespace.bidder_id != bidder {
        return Err(PaymentError::TypespaceMismatch(format!(
            "type space belongs to bidder {}, payment requested for {bidder}",
            typespace.bidder_id
        )));
    }
    let violations = typespace.validate(instance);
    if !violations.is_empty() {
        return Err(PaymentError::TypespaceMismatch(violations.join("; ")));
    }
    let start = Instant::now();
    let others_welfare =
        efficient.welfare - winner_bid_value(instance, &efficient.allocation, bidder);
    let mut run = match formulation {
        Formulation::Bps => bps_constraint_generation(instance, efficient, bidder, typespace)?,
        Formulation::Bo => bo_constraint_generation(instance, efficient, bidder, typespace)?,
    };
    run.payment = (run.pivot_value - others_welfare).max(0.0);
    run.wall_time = start.elapsed();
    Ok(run)
}

/// The constrained-bundle view shared by the two formulations: the bundles of
/// the owner's type space that carry a nonzero coefficient somewhere. The
/// weakest type bids zero outside this set, so only these values need
/// variables.
struct ConstrainedBundles<'a> {
    bundles: Vec<&'a Bundle>,
    /// Type-space constraint rows re-indexed onto `bundles`.
    rows: Vec<(Vec<f64>, f64)>,
}

fn constrained_bundles(typespace: &LinearTypeSpace) -> ConstrainedBundles<'_> {
    let keep = typespace.constrained_bundle_indices();
    let bundles: Vec<&Bundle> = keep.iter().map(|&k| &typespace.bundles[k]).collect();
    let rows = typespace
        .constraints
        .iter()
        .map(|c| {
            let coeffs = keep
                .iter()
                .map(|&k| c.coeffs.get(k).copied().unwrap_or(0.0))
                .collect();
            (coeffs, c.rhs)
        })
        .collect();
    ConstrainedBundles { bundles, rows }
}

impl ConstrainedBundles<'_> {
    fn index_of(&self, bundle: &Bundle) -> Option<usize> {
        self.bundles.iter().position(|b| *b == bundle)
    }

    /// The candidate weakest type as a bid list, clamped to nonnegative.
    fn candidate_bids(&self, values: &[f64]) -> Vec<Bid> {
        self.bundles
            .iter()
            .zip(values)
            .map(|(bundle, &v)| Bid {
                bundle: (*bundle).clone(),
                value: v.max(0.0),
            })
            .collect()
    }
}

/// Sum of the other bidders' instance bid values under `allocation`.
fn others_value(instance: &Instance, allocation: &Allocation, bidder: usize) -> f64 {
    allocation
        .winners()
        .filter(|&j| j != bidder)
        .map(|j| winner_bid_value(instance, allocation, j))
        .sum()
}

fn map_lp_failure(result: SolveResult) -> PaymentError {
    match result {
        SolveResult::Infeasible => PaymentError::EmptyTypeSpace,
        SolveResult::Unbounded => PaymentError::UnboundedPivot,
        SolveResult::Optimal(_) => unreachable!("callers handle the optimal case"),
    }
}

fn bps_constraint_generation(
    instance: &Instance,
    efficient: &WdpSolution,
    bidder: usize,
    typespace: &LinearTypeSpace,
) -> Result<WtResult, PaymentError> {
    let cb = constrained_bundles(typespace);
    let nb = cb.bundles.len();
    // Variables: gamma, then one value per constrained bundle.
    let mut variables = vec![Variable::free("gamma")];
    for (k, bundle) in cb.bundles.iter().enumerate() {
        variables.push(Variable::nonnegative(format!("v{k}_{bundle:?}")));
    }

    let mut pool: Vec<Allocation> = vec![efficient.allocation.clone()];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut constraints: Vec<LinearConstraint> = cb
            .rows
            .iter()
            .map(|(coeffs, rhs)| {
                let mut row = vec![0.0; nb + 1];
                row[1..].copy_from_slice(coeffs);
                LinearConstraint::new(row, Sense::Ge, *rhs)
            })
            .collect();
        for alloc in &pool {
            // gamma - v~(S_i) >= sum_{j != i} v_j(S_j); the bidder's own term
            // drops out when she wins nothing or an unconstrained bundle.
            let mut row = vec![0.0; nb + 1];
            row[0] = 1.0;
            if let Some(bundle) = alloc.bundle_for(bidder) {
                if let Some(k) = cb.index_of(bundle) {
                    row[1 + k] = -1.0;
                }
            }
            constraints.push(LinearConstraint::new(
                row,
                Sense::Ge,
                others_value(instance, alloc, bidder),
            ));
        }
        let mut objective = vec![0.0; nb + 1];
        objective[0] = 1.0;
        let spec = LinearProgramSpec {
            variables: variables.clone(),
            constraints,
            objective,
            direction: Direction::Minimize,
        };
        let solution = match solver::solve_lp(&spec)? {
            SolveResult::Optimal(s) => s,
            other => return Err(map_lp_failure(other)),
        };
        let gamma = solution.values[0];
        let candidate = cb.candidate_bids(&solution.values[1..]);

        let separated = wdp::solve_wdp(
            instance,
            &ValuationOverlay::none().replace(bidder, candidate),
        )?;
        if gamma - separated.welfare < -EPS {
            push_new_allocation(&mut pool, separated.allocation)?;
        } else {
            return Ok(finish_run(
                Formulation::Bps,
                gamma,
                &cb,
                &solution.values[1..],
                pool,
                iterations,
            ));
        }
    }
}

fn bo_constraint_generation(
    instance: &Instance,
    efficient: &WdpSolution,
    bidder: usize,
    typespace: &LinearTypeSpace,
) -> Result<WtResult, PaymentError> {
    let cb = constrained_bundles(typespace);
    let n = instance.num_bidders();

    // Variable layout: utilities pi_j, seller revenue pi_s, supporting prices
    // p_j(S) per effective bid, then the constrained bundle values v~. All of
    // them are bounded below by zero, matching the winner-determination LP
    // dual this formulation is built on.
    let mut variables: Vec<Variable> =
        (0..n).map(|j| Variable::nonnegative(format!("pi{j}"))).collect();
    variables.push(Variable::nonnegative("pi_s"));
    let pi_s = n;
    let mut price_var: BTreeMap<(usize, Bundle), usize> = BTreeMap::new();
    for j in 0..n {
        if j == bidder {
            for bundle in &cb.bundles {
                price_var.insert((j, (*bundle).clone()), variables.len());
                variables.push(Variable::nonnegative(format!("p{j}_{bundle:?}")));
            }
        } else {
            for bid in &instance.bidders[j].bids {
                price_var.insert((j, bid.bundle.clone()), variables.len());
                variables.push(Variable::nonnegative(format!("p{j}_{:?}", bid.bundle)));
            }
        }
    }
    let vt_base = variables.len();
    for (k, bundle) in cb.bundles.iter().enumerate() {
        variables.push(Variable::nonnegative(format!("v{k}_{bundle:?}")));
    }
    let num_vars = variables.len();

    // Rows that never change: utility-support rows and the type space.
    let mut fixed_rows: Vec<LinearConstraint> = Vec::new();
    for j in 0..n {
        if j == bidder {
            // pi_i + p_i(S) - v~(S) >= 0 for constrained bundles.
            for (k, bundle) in cb.bundles.iter().enumerate() {
                let mut row = vec![0.0; num_vars];
                row[j] = 1.0;
                row[price_var[&(j, (*bundle).clone())]] = 1.0;
                row[vt_base + k] = -1.0;
                fixed_rows.push(LinearConstraint::new(row, Sense::Ge, 0.0));
            }
        } else {
            // pi_j + p_j(S) >= v_j(S) for submitted bids.
            for bid in &instance.bidders[j].bids {
                let mut row = vec![0.0; num_vars];
                row[j] = 1.0;
                row[price_var[&(j, bid.bundle.clone())]] = 1.0;
                fixed_rows.push(LinearConstraint::new(row, Sense::Ge, bid.value));
            }
        }
    }
    for (coeffs, rhs) in &cb.rows {
        let mut row = vec![0.0; num_vars];
        for (k, &w) in coeffs.iter().enumerate() {
            row[vt_base + k] = w;
        }
        fixed_rows.push(LinearConstraint::new(row, Sense::Ge, *rhs));
    }

    let mut objective = vec![0.0; num_vars];
    for v in objective.iter_mut().take(n + 1) {
        *v = 1.0;
    }

    let mut pool: Vec<Allocation> = vec![efficient.allocation.clone()];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut constraints = fixed_rows.clone();
        for alloc in &pool {
            // pi_s >= sum of supporting prices of the allocated bundles.
            let mut row = vec![0.0; num_vars];
            row[pi_s] = 1.0;
            for j in alloc.winners() {
                let bundle = alloc.bundle_for(j).unwrap();
                if let Some(&var) = price_var.get(&(j, bundle.clone())) {
                    row[var] = -1.0;
                }
            }
            constraints.push(LinearConstraint::new(row, Sense::Ge, 0.0));
        }
        let spec = LinearProgramSpec {
            variables: variables.clone(),
            constraints,
            objective: objective.clone(),
            direction: Direction::Minimize,
        };
        let solution = match solver::solve_lp(&spec)? {
            SolveResult::Optimal(s) => s,
            other => return Err(map_lp_failure(other)),
        };
        let seller_revenue = solution.values[pi_s];

        // Separate: winner determination over the supporting prices.
        let mut overlay = ValuationOverlay::none();
        for j in 0..n {
            let bids: Vec<Bid> = if j == bidder {
                cb.bundles
                    .iter()
                    .map(|bundle| Bid {
                        bundle: (*bundle).clone(),
                        value: solution.values[price_var[&(j, (*bundle).clone())]].max(0.0),
                    })
                    .collect()
            } else {
                instance.bidders[j]
                    .bids
                    .iter()
                    .map(|bid| Bid {
                        bundle: bid.bundle.clone(),
                        value: solution.values[price_var[&(j, bid.bundle.clone())]].max(0.0),
                    })
                    .collect()
            };
            overlay = overlay.replace(j, bids);
        }
        let separated = wdp::solve_wdp(instance, &overlay)?;
        if seller_revenue - separated.welfare < -EPS {
            push_new_allocation(&mut pool, separated.allocation)?;
        } else {
            let pivot = pivot_from_bo(&solution, n);
            return Ok(finish_run(
                Formulation::Bo,
                pivot,
                &cb,
                &solution.values[vt_base..vt_base + cb.bundles.len()],
                pool,
                iterations,
            ));
        }
    }
}

fn pivot_from_bo(solution: &Solution, n: usize) -> f64 {
    solution.values.iter().take(n + 1).sum()
}

fn push_new_allocation(pool: &mut Vec<Allocation>, alloc: Allocation) -> Result<(), PaymentError> {
    if pool.contains(&alloc) {
        return Err(PaymentError::Internal(
            "separation returned an allocation already in the pool".into(),
        ));
    }
    pool.push(alloc);
    Ok(())
}

fn finish_run(
    formulation: Formulation,
    pivot: f64,
    cb: &ConstrainedBundles<'_>,
    values: &[f64],
    pool: Vec<Allocation>,
    iterations: usize,
) -> WtResult {
    let weakest_type = cb
        .bundles
        .iter()
        .zip(values)
        .map(|(bundle, &v)| ((*bundle).clone(), v.max(0.0)))
        .collect();
    WtResult {
        payment: 0.0, // filled by the caller once the others' welfare is known
        weakest_type,
        pivot_value: pivot,
        cg_iterations: iterations,
        generated_allocations: pool,
        formulation,
        wall_time: Duration::ZERO,
    }
}
