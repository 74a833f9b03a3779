//! The experiment sweep: (instance x K) cells run in parallel, one metrics
//! row per rule, a per-bidder formulation-comparison CSV, and an errors CSV.
//! Finished cells found in an existing metrics.csv are skipped, so an
//! interrupted sweep can resume. All outputs are rewritten sorted by cell
//! key, which makes complete runs byte-identical apart from the wall-time
//! columns.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use auction_core::gen::{generate_instance, GenConfig};
use auction_core::typespace::{generate_type_space, TypeSpaceGenConfig};
use auction_core::wdp::{self, ValuationOverlay};
use auction_core::{Instance, LinearTypeSpace};

use crate::config::ExperimentConfig;
use crate::io;
use crate::pipeline::{self, CellMeta, Deadline};

const METRICS_FILE: &str = "metrics.csv";
const FORMULATIONS_FILE: &str = "formulations.csv";
const ERRORS_FILE: &str = "errors.csv";

/// Column order of metrics.csv; must match the `InstanceReport` field order.
const METRICS_HEADER: &[&str] = &[
    "instance_id",
    "seed",
    "K",
    "beta",
    "goods",
    "bids",
    "rule",
    "revenue",
    "wt_revenue",
    "vcg_revenue",
    "welfare",
    "sum_dev",
    "wt_in_core",
    "vcg_in_core",
    "zero_rev_vanilla",
    "burden_lower_wt",
    "burden_upper_wt",
    "burden_lower_vcg",
    "burden_upper_vcg",
    "wt_cg_iters",
    "ccg_iters",
    "wt_ms",
    "ccg_ms",
];

const FORMULATIONS_HEADER: &[&str] = &[
    "instance_id",
    "K",
    "bidder",
    "wt_payment",
    "bps_iters",
    "bps_ms",
    "bo_iters",
    "bo_ms",
    "payment_diff",
];

const ERRORS_HEADER: &[&str] = &["instance_id", "K", "message"];

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ b.wrapping_mul(0xd6e8feb86659fd93))
}

struct SweepInstance {
    id: String,
    index: u64,
    instance: Instance,
}

fn instance_pool(config: &ExperimentConfig) -> Result<Vec<SweepInstance>> {
    let mut pool = Vec::new();
    match &config.cats_glob {
        Some(pattern) => {
            let mut seen = BTreeSet::new();
            for (index, path) in io::expand_glob(pattern)?.into_iter().enumerate() {
                let instance = io::load_instance(&path).map_err(|e| e.error)?;
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("cats-{index}"));
                let id = if seen.insert(stem.clone()) {
                    stem
                } else {
                    format!("{stem}-{index}")
                };
                pool.push(SweepInstance {
                    id,
                    index: index as u64,
                    instance,
                });
            }
        }
        None => {
            let mut index = 0u64;
            for &goods in &config.goods {
                for &bids in &config.bids {
                    for rep in 0..config.count {
                        let seed = mix(config.seed, index);
                        let instance = generate_instance(&GenConfig::new(goods, bids, seed));
                        pool.push(SweepInstance {
                            id: format!("gen-g{goods}-b{bids}-i{rep}"),
                            index,
                            instance,
                        });
                        index += 1;
                    }
                }
            }
        }
    }
    Ok(pool)
}

#[derive(Clone, Debug, Serialize)]
struct ErrorRow {
    instance_id: String,
    #[serde(rename = "K")]
    k: usize,
    message: String,
}

#[derive(Default)]
struct CellOutput {
    metrics: Vec<csv::StringRecord>,
    formulations: Vec<csv::StringRecord>,
    errors: Vec<ErrorRow>,
}

/// Serializes rows through an in-memory CSV writer so merged output uses one
/// formatting path.
fn to_records<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().context("flushing csv buffer")?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let got = reader.headers()?.clone();
    let want = csv::StringRecord::from(header.to_vec());
    if got != want {
        bail!("csv schema drift: serialized header {got:?} does not match {want:?}");
    }
    Ok(reader.records().collect::<Result<Vec<_>, _>>()?)
}

fn typespaces_for_cell(
    instance: &Instance,
    winners: &BTreeSet<usize>,
    config: &ExperimentConfig,
    instance_index: u64,
    k: usize,
) -> Result<BTreeMap<usize, LinearTypeSpace>> {
    let base = mix(config.seed ^ 0x7459_2a1c_3d90_11ef, instance_index);
    let ts_seed = if config.nested {
        base
    } else {
        mix(base, k as u64)
    };
    let gen = TypeSpaceGenConfig {
        constraints_per_bidder: k,
        inclusion_probability: config.beta,
        seed: ts_seed,
        ..TypeSpaceGenConfig::default()
    };
    winners
        .iter()
        .map(|&i| Ok((i, generate_type_space(instance, i, &gen)?)))
        .collect()
}

fn run_cell(source: &SweepInstance, k: usize, config: &ExperimentConfig) -> CellOutput {
    let mut out = CellOutput::default();
    let meta = CellMeta {
        instance_id: source.id.clone(),
        seed: config.seed,
        k,
        beta: config.beta,
    };
    let deadline = if config.time_limit_s > 0.0 {
        Deadline::with_limit(config.time_limit_s)
    } else {
        Deadline::unlimited()
    };
    let result = (|| -> Result<CellOutput> {
        let efficient = wdp::solve_wdp(&source.instance, &ValuationOverlay::none())?;
        let winners = efficient.allocation.winner_set();
        let typespaces =
            typespaces_for_cell(&source.instance, &winners, config, source.index, k)?;
        let priced = pipeline::price_instance(
            &source.instance,
            &typespaces,
            &config.rules,
            &config.formulations,
            &deadline,
        )?;
        let metrics = pipeline::metrics_rows(&source.instance, &priced, &meta);
        let formulations = pipeline::formulation_rows(&priced, &meta);
        Ok(CellOutput {
            metrics: to_records(&metrics, METRICS_HEADER)?,
            formulations: to_records(&formulations, FORMULATIONS_HEADER)?,
            errors: Vec::new(),
        })
    })();
    match result {
        Ok(cell) => cell,
        Err(e) => {
            out.errors.push(ErrorRow {
                instance_id: source.id.clone(),
                k,
                message: format!("{e:#}"),
            });
            out
        }
    }
}

fn read_existing(path: &Path, expect_header: &csv::StringRecord) -> Result<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = reader.headers()?.clone();
    if &header != expect_header {
        bail!(
            "{} has an unexpected schema; delete it or point the sweep elsewhere",
            path.display()
        );
    }
    Ok(reader.records().collect::<Result<Vec<_>, _>>()?)
}

fn write_records(
    path: &Path,
    header: &csv::StringRecord,
    records: &[csv::StringRecord],
) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(header)?;
    for record in records {
        writer.write_record(record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Sorts records by instance id, then numeric K, then the tie-break column.
fn sort_records(records: &mut [csv::StringRecord], k_col: usize, tie_col: usize) {
    records.sort_by(|a, b| {
        let ka: u64 = a.get(k_col).and_then(|v| v.parse().ok()).unwrap_or(0);
        let kb: u64 = b.get(k_col).and_then(|v| v.parse().ok()).unwrap_or(0);
        // Bidder tie-break columns are numeric; rule names are not.
        let ta = a.get(tie_col).unwrap_or("");
        let tb = b.get(tie_col).unwrap_or("");
        let tnum = (ta.parse::<u64>().ok(), tb.parse::<u64>().ok());
        a.get(0)
            .cmp(&b.get(0))
            .then(ka.cmp(&kb))
            .then(match tnum {
                (Some(x), Some(y)) => x.cmp(&y),
                _ => ta.cmp(tb),
            })
    });
}

pub struct SweepSummary {
    pub cells_total: usize,
    pub cells_skipped: usize,
    pub cells_failed: usize,
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepSummary> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let pool = instance_pool(config)?;

    let metrics_header = csv::StringRecord::from(METRICS_HEADER.to_vec());
    let form_header = csv::StringRecord::from(FORMULATIONS_HEADER.to_vec());
    let error_header = csv::StringRecord::from(ERRORS_HEADER.to_vec());

    let metrics_path = config.out_dir.join(METRICS_FILE);
    let existing = read_existing(&metrics_path, &metrics_header)?;
    let rule_col = METRICS_HEADER
        .iter()
        .position(|&h| h == "rule")
        .expect("metrics schema has a rule column");
    let mut done: BTreeSet<(String, u64, String)> = BTreeSet::new();
    for record in &existing {
        let id = record.get(0).unwrap_or("").to_string();
        let k: u64 = record.get(2).and_then(|v| v.parse().ok()).unwrap_or(0);
        let rule = record.get(rule_col).unwrap_or("").to_string();
        done.insert((id, k, rule));
    }
    let cell_done = |id: &str, k: usize| -> bool {
        config
            .rules
            .iter()
            .all(|r| done.contains(&(id.to_string(), k as u64, r.slug().to_string())))
    };

    let tasks: Vec<(&SweepInstance, usize)> = pool
        .iter()
        .flat_map(|src| config.k_list.iter().map(move |&k| (src, k)))
        .collect();
    let (run_now, skipped): (Vec<_>, Vec<_>) =
        tasks.into_iter().partition(|(src, k)| !cell_done(&src.id, *k));

    let run = |tasks: &[(&SweepInstance, usize)]| -> Vec<CellOutput> {
        tasks
            .par_iter()
            .map(|(src, k)| run_cell(src, *k, config))
            .collect()
    };
    let outputs = if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .context("building worker pool")?
            .install(|| run(&run_now))
    } else {
        run(&run_now)
    };

    let mut metrics = existing;
    let mut formulations = read_existing(&config.out_dir.join(FORMULATIONS_FILE), &form_header)?;
    let mut errors = Vec::new();
    let mut cells_failed = 0;
    for cell in outputs {
        if !cell.errors.is_empty() {
            cells_failed += 1;
        }
        metrics.extend(cell.metrics);
        formulations.extend(cell.formulations);
        errors.extend(cell.errors);
    }
    sort_records(&mut metrics, 2, rule_col);
    let bidder_col = FORMULATIONS_HEADER
        .iter()
        .position(|&h| h == "bidder")
        .expect("formulations schema has a bidder column");
    sort_records(&mut formulations, 1, bidder_col);
    errors.sort_by(|a: &ErrorRow, b: &ErrorRow| {
        a.instance_id.cmp(&b.instance_id).then(a.k.cmp(&b.k))
    });
    let error_records = to_records(&errors, ERRORS_HEADER)?;

    write_records(&metrics_path, &metrics_header, &metrics)?;
    write_records(
        &config.out_dir.join(FORMULATIONS_FILE),
        &form_header,
        &formulations,
    )?;
    write_records(&config.out_dir.join(ERRORS_FILE), &error_header, &error_records)?;

    Ok(SweepSummary {
        cells_total: run_now.len() + skipped.len(),
        cells_skipped: skipped.len(),
        cells_failed,
    })
}
