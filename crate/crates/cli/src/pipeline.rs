//! The per-instance pricing pipeline shared by `price` and `sweep`:
//! allocation, VCG, weakest-type prices per formulation, the selected payment
//! rules, and the metrics derived from them.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{anyhow, Result};
use serde::Serialize;

use auction_core::core_pricing::{self, CcgResult, PaymentRule, PaymentRuleKind};
use auction_core::metrics::{self, BurdenSplit, InstanceReport, MembershipFlags};
use auction_core::payments::{self, Formulation, WtResult};
use auction_core::wdp::{self, ValuationOverlay};
use auction_core::{Allocation, Instance, LinearTypeSpace, PriceVector};

pub struct PricedInstance {
    pub allocation: Allocation,
    pub welfare: f64,
    pub vcg: PriceVector,
    pub wt: PriceVector,
    pub wt_results: BTreeMap<usize, WtResult>,
    /// Secondary-formulation results, when two formulations were requested.
    pub wt_alt: Option<(PriceVector, BTreeMap<usize, WtResult>)>,
    pub flags: MembershipFlags,
    pub rules: Vec<(PaymentRuleKind, CcgResult, f64)>,
    pub wt_ms: f64,
}

/// Budget guard for long sweeps; `None` means no limit.
pub struct Deadline {
    start: Instant,
    limit_s: f64,
}

impl Deadline {
    pub fn unlimited() -> Self {
        Deadline {
            start: Instant::now(),
            limit_s: 0.0,
        }
    }

    pub fn with_limit(limit_s: f64) -> Self {
        Deadline {
            start: Instant::now(),
            limit_s,
        }
    }

    fn check(&self, stage: &str) -> Result<()> {
        if self.limit_s > 0.0 && self.start.elapsed().as_secs_f64() > self.limit_s {
            Err(anyhow!("time limit exceeded during {stage}"))
        } else {
            Ok(())
        }
    }
}

/// Runs the whole pipeline for one instance.
pub fn price_instance(
    instance: &Instance,
    typespaces: &BTreeMap<usize, LinearTypeSpace>,
    rules: &[PaymentRuleKind],
    formulations: &[Formulation],
    deadline: &Deadline,
) -> Result<PricedInstance> {
    let efficient = wdp::solve_wdp(instance, &ValuationOverlay::none())?;
    deadline.check("winner determination")?;
    let vcg = payments::vcg_with_allocation(instance, &efficient)?;
    deadline.check("vcg")?;

    let primary = *formulations.first().ok_or_else(|| anyhow!("no formulation selected"))?;
    let wt_start = Instant::now();
    let (wt, wt_results) =
        payments::wt_prices_with_allocation(instance, &efficient, typespaces, primary)?;
    let wt_ms = wt_start.elapsed().as_secs_f64() * 1e3;
    deadline.check("weakest-type prices")?;

    let wt_alt = match formulations.get(1) {
        Some(&alt) => {
            let pair =
                payments::wt_prices_with_allocation(instance, &efficient, typespaces, alt)?;
            deadline.check("weakest-type prices (second formulation)")?;
            Some(pair)
        }
        None => None,
    };

    let flags = metrics::core_membership_flags(instance, &efficient.allocation, &vcg, &wt)?;

    let mut rule_results = Vec::with_capacity(rules.len());
    for &kind in rules {
        let rule = PaymentRule::resolve(kind, &vcg, &wt);
        let start = Instant::now();
        let result = core_pricing::ccg_nearest(instance, &efficient.allocation, &rule)?;
        rule_results.push((kind, result, start.elapsed().as_secs_f64() * 1e3));
        deadline.check(kind.slug())?;
    }

    Ok(PricedInstance {
        allocation: efficient.allocation,
        welfare: efficient.welfare,
        vcg,
        wt,
        wt_results,
        wt_alt,
        flags,
        rules: rule_results,
        wt_ms,
    })
}

/// Identity of one sweep cell, echoed into every CSV row.
pub struct CellMeta {
    pub instance_id: String,
    pub seed: u64,
    pub k: usize,
    pub beta: f64,
}

fn burden_columns(
    prices: &PriceVector,
    baseline: &PriceVector,
    bids: &PriceVector,
) -> (Option<f64>, Option<f64>) {
    match metrics::core_burden_split(prices, baseline, bids) {
        Ok(BurdenSplit::Shares { lower, upper }) => (Some(lower), Some(upper)),
        _ => (None, None),
    }
}

/// One metrics row per rule result.
pub fn metrics_rows(
    instance: &Instance,
    priced: &PricedInstance,
    meta: &CellMeta,
) -> Vec<InstanceReport> {
    let bids = metrics::winning_bids(instance, &priced.allocation);
    let wt_cg_iters: usize = priced.wt_results.values().map(|r| r.cg_iterations).sum();
    priced
        .rules
        .iter()
        .map(|(kind, result, ccg_ms)| {
            let baseline = if kind.is_above_wt() {
                &priced.wt
            } else {
                &priced.vcg
            };
            let sum_dev = metrics::sum_deviations(&result.prices, baseline).unwrap_or(f64::NAN);
            let (burden_lower_wt, burden_upper_wt) = if kind.is_above_wt() {
                burden_columns(&result.prices, &priced.wt, &bids)
            } else {
                (None, None)
            };
            let (burden_lower_vcg, burden_upper_vcg) =
                burden_columns(&result.prices, &priced.vcg, &bids);
            InstanceReport {
                instance_id: meta.instance_id.clone(),
                seed: meta.seed,
                k: meta.k,
                beta: meta.beta,
                goods: instance.num_goods,
                bids: instance.total_bids(),
                rule: kind.slug().to_string(),
                revenue: result.revenue,
                wt_revenue: priced.wt.total(),
                vcg_revenue: priced.vcg.total(),
                welfare: priced.welfare,
                sum_dev,
                wt_in_core: priced.flags.wt_in_core,
                vcg_in_core: priced.flags.vcg_in_core,
                zero_rev_vanilla: priced.flags.zero_revenue_vanilla_mrc,
                burden_lower_wt,
                burden_upper_wt,
                burden_lower_vcg,
                burden_upper_vcg,
                wt_cg_iters,
                ccg_iters: result.ccg_iterations,
                wt_ms: priced.wt_ms,
                ccg_ms: *ccg_ms,
            }
        })
        .collect()
}

/// One row per winner in the BPS-vs-BO comparison CSV. The secondary
/// formulation's columns stay empty when it was not run.
#[derive(Clone, Debug, Serialize)]
pub struct FormulationRow {
    pub instance_id: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub bidder: usize,
    pub wt_payment: f64,
    pub bps_iters: Option<usize>,
    pub bps_ms: Option<f64>,
    pub bo_iters: Option<usize>,
    pub bo_ms: Option<f64>,
    pub payment_diff: Option<f64>,
}

pub fn formulation_rows(priced: &PricedInstance, meta: &CellMeta) -> Vec<FormulationRow> {
    let mut rows = Vec::new();
    for (&bidder, result) in &priced.wt_results {
        let mut row = FormulationRow {
            instance_id: meta.instance_id.clone(),
            k: meta.k,
            bidder,
            wt_payment: result.payment,
            bps_iters: None,
            bps_ms: None,
            bo_iters: None,
            bo_ms: None,
            payment_diff: None,
        };
        let stats = result.stats();
        match result.formulation {
            Formulation::Bps => {
                row.bps_iters = Some(stats.iterations);
                row.bps_ms = Some(stats.wall_time_ms);
            }
            Formulation::Bo => {
                row.bo_iters = Some(stats.iterations);
                row.bo_ms = Some(stats.wall_time_ms);
            }
        }
        if let Some((alt_prices, alt_results)) = &priced.wt_alt {
            if let Some(alt) = alt_results.get(&bidder) {
                let stats = alt.stats();
                match alt.formulation {
                    Formulation::Bps => {
                        row.bps_iters = Some(stats.iterations);
                        row.bps_ms = Some(stats.wall_time_ms);
                    }
                    Formulation::Bo => {
                        row.bo_iters = Some(stats.iterations);
                        row.bo_ms = Some(stats.wall_time_ms);
                    }
                }
                row.payment_diff =
                    alt_prices.get(bidder).map(|p| (p - result.payment).abs());
            }
        }
        rows.push(row);
    }
    rows
}

// --- JSON report for `price` ---

#[derive(Serialize)]
pub struct PriceReport {
    pub instance: String,
    pub goods: u32,
    pub bidders: usize,
    pub bids: usize,
    pub welfare: f64,
    pub allocation: BTreeMap<usize, Vec<u32>>,
    pub vcg: SideReport,
    pub wt: WtReport,
    pub zero_revenue_vanilla_mrc: bool,
    pub rules: BTreeMap<String, RuleReport>,
}

#[derive(Serialize)]
pub struct SideReport {
    pub prices: PriceVector,
    pub revenue: f64,
    pub in_core: bool,
}

#[derive(Serialize)]
pub struct WtReport {
    pub prices: PriceVector,
    pub revenue: f64,
    pub in_core: bool,
    pub formulation: Formulation,
    pub per_bidder: BTreeMap<usize, WtBidderReport>,
}

#[derive(Serialize)]
pub struct WtBidderReport {
    pub payment: f64,
    pub pivot_value: f64,
    pub cg_iterations: usize,
    pub wall_time_ms: f64,
}

#[derive(Serialize)]
pub struct RuleReport {
    pub prices: PriceVector,
    pub revenue: f64,
    pub sum_dev: f64,
    pub ccg_iterations: usize,
    pub lp_revenue_history: Vec<f64>,
    pub certified_core: bool,
    pub ccg_ms: f64,
}

pub fn price_report(instance: &Instance, path: &str, priced: &PricedInstance) -> PriceReport {
    let allocation = priced
        .allocation
        .winners()
        .map(|i| {
            (
                i,
                priced.allocation.bundle_for(i).unwrap().goods().to_vec(),
            )
        })
        .collect();
    let per_bidder = priced
        .wt_results
        .iter()
        .map(|(&i, r)| {
            (
                i,
                WtBidderReport {
                    payment: r.payment,
                    pivot_value: r.pivot_value,
                    cg_iterations: r.cg_iterations,
                    wall_time_ms: r.wall_time.as_secs_f64() * 1e3,
                },
            )
        })
        .collect();
    let rules = priced
        .rules
        .iter()
        .map(|(kind, result, ccg_ms)| {
            let baseline = if kind.is_above_wt() {
                &priced.wt
            } else {
                &priced.vcg
            };
            (
                kind.slug().to_string(),
                RuleReport {
                    prices: result.prices.clone(),
                    revenue: result.revenue,
                    sum_dev: metrics::sum_deviations(&result.prices, baseline)
                        .unwrap_or(f64::NAN),
                    ccg_iterations: result.ccg_iterations,
                    lp_revenue_history: result.lp_revenue_history.clone(),
                    // ccg_nearest only returns after a clean separation pass.
                    certified_core: true,
                    ccg_ms: *ccg_ms,
                },
            )
        })
        .collect();
    PriceReport {
        instance: path.to_string(),
        goods: instance.num_goods,
        bidders: instance.num_bidders(),
        bids: instance.total_bids(),
        welfare: priced.welfare,
        allocation,
        vcg: SideReport {
            prices: priced.vcg.clone(),
            revenue: priced.vcg.total(),
            in_core: priced.flags.vcg_in_core,
        },
        wt: WtReport {
            prices: priced.wt.clone(),
            revenue: priced.wt.total(),
            in_core: priced.flags.wt_in_core,
            formulation: priced
                .wt_results
                .values()
                .next()
                .map(|r| r.formulation)
                .unwrap_or(Formulation::Bps),
            per_bidder,
        },
        zero_revenue_vanilla_mrc: priced.flags.zero_revenue_vanilla_mrc,
        rules,
    }
}
