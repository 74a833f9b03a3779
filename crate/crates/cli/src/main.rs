//! Command-line harness for the combinatorial-auction pricing engine.
//!
//! Subcommands: `price` one instance, `sweep` an experiment grid, `diagnose`
//! the incentive-compatibility trichotomy, plus `gen-instance`,
//! `gen-typespace`, and `parse-cats` utilities.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use auction_core::cats;
use auction_core::core_pricing::{self, PaymentRuleKind, CoreError, MAX_DIAGNOSIS_BIDDERS};
use auction_core::gen::{generate_instance, GenConfig};
use auction_core::payments::Formulation;
use auction_core::typespace::{generate_type_space, nested_family, TypeSpaceGenConfig};
use auction_core::LinearTypeSpace;

use auction_cli::config::ExperimentConfig;
use auction_cli::io::{self, CliError, EXIT_TOO_LARGE};
use auction_cli::pipeline::{self, Deadline};
use auction_cli::sweep;

#[derive(Parser)]
#[command(
    name = "auction",
    about = "Combinatorial-auction pricing: winner determination, VCG, weakest-type, and core-selecting payment rules",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_rule(s: &str) -> Result<PaymentRuleKind, String> {
    s.parse()
}

fn parse_formulation(s: &str) -> Result<Formulation, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Price one instance: allocation, VCG, weakest-type, and rule prices as JSON.
    Price {
        /// Instance file (JSON, or CATS for any other extension).
        instance: PathBuf,
        /// Type-space file (JSON list); omitted means unrestricted bidders.
        #[arg(long)]
        typespaces: Option<PathBuf>,
        /// Payment rules to run (repeatable); defaults to all five.
        #[arg(long = "rule", value_parser = parse_rule)]
        rules: Vec<PaymentRuleKind>,
        /// Weakest-type formulation.
        #[arg(long, default_value = "bps", value_parser = parse_formulation)]
        formulation: Formulation,
        /// Also run the other formulation and report both.
        #[arg(long)]
        compare_formulations: bool,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump every solved program to this directory in LP format.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Run an experiment grid and write metrics/formulations/errors CSVs.
    Sweep {
        /// Config file with key = value lines; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        cats_glob: Option<String>,
        /// Generator goods settings, comma separated.
        #[arg(long)]
        goods: Option<String>,
        /// Generator bid settings, comma separated.
        #[arg(long)]
        bids: Option<String>,
        /// Instances per (goods, bids) setting.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Constraint counts, comma separated (e.g. 1,2,4,8,16).
        #[arg(long = "k")]
        k_list: Option<String>,
        #[arg(long)]
        beta: Option<f64>,
        /// Prefix-nested type spaces across K (true/false).
        #[arg(long)]
        nested: Option<String>,
        /// Rules to run, comma separated.
        #[arg(long)]
        rules: Option<String>,
        /// Formulations to run, comma separated (bps,bo).
        #[arg(long)]
        formulations: Option<String>,
        /// Output directory for the CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = default).
        #[arg(long)]
        jobs: Option<usize>,
        /// Per-instance time limit in seconds (0 = unlimited).
        #[arg(long)]
        time_limit_s: Option<f64>,
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Classify the instance per the incentive-compatibility trichotomy.
    Diagnose {
        instance: PathBuf,
        #[arg(long)]
        typespaces: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate per-bidder type spaces for an instance.
    GenTypespace {
        #[arg(long)]
        instance: PathBuf,
        /// Constraints per bidder.
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit a prefix-nested family for these K values (comma separated);
        /// writes one file per K under --out as a directory.
        #[arg(long)]
        k_list: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a CATS file; optionally convert it.
    ParseCats {
        file: PathBuf,
        /// Write the instance as JSON.
        #[arg(long)]
        to_json: Option<PathBuf>,
        /// Write the file back in canonical CATS form.
        #[arg(long)]
        canonical: Option<PathBuf>,
    },
    /// Generate a random instance with the internal generator.
    GenInstance {
        #[arg(long)]
        goods: u32,
        #[arg(long)]
        bids: usize,
        /// Bids per XOR bidder.
        #[arg(long, default_value_t = 2)]
        xor_group: usize,
        #[arg(long, default_value_t = 3)]
        max_bundle: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted. `.cats` extension selects CATS.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Price {
            instance,
            typespaces,
            rules,
            formulation,
            compare_formulations,
            out,
            dump_lp,
        } => {
            auction_core::solver::set_lp_dump_dir(dump_lp.as_deref()).map_err(|e| {
                CliError::from(anyhow!("cannot prepare LP dump directory: {e}"))
            })?;
            let inst = io::load_instance(&instance)?;
            let ts = match &typespaces {
                Some(path) => io::load_typespaces(path, &inst)?,
                None => BTreeMap::new(),
            };
            let rules = if rules.is_empty() {
                PaymentRuleKind::ALL.to_vec()
            } else {
                rules
            };
            let mut formulations = vec![formulation];
            if compare_formulations {
                formulations.push(match formulation {
                    Formulation::Bps => Formulation::Bo,
                    Formulation::Bo => Formulation::Bps,
                });
            }
            let priced = pipeline::price_instance(
                &inst,
                &ts,
                &rules,
                &formulations,
                &Deadline::unlimited(),
            )?;
            let report =
                pipeline::price_report(&inst, &instance.display().to_string(), &priced);
            let json = serde_json::to_string_pretty(&report).context("serializing report")?;
            io::write_output(out.as_deref(), &json)?;
            Ok(())
        }
        Command::Sweep {
            config,
            cats_glob,
            goods,
            bids,
            count,
            seed,
            k_list,
            beta,
            nested,
            rules,
            formulations,
            out,
            jobs,
            time_limit_s,
            dump_lp,
        } => {
            auction_core::solver::set_lp_dump_dir(dump_lp.as_deref()).map_err(|e| {
                CliError::from(anyhow!("cannot prepare LP dump directory: {e}"))
            })?;
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::parse(&io::read_file(path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => ExperimentConfig::default(),
            };
            if let Some(v) = cats_glob {
                cfg.apply("cats_glob", &v)?;
            }
            if let Some(v) = goods {
                cfg.apply("goods", &v)?;
            }
            if let Some(v) = bids {
                cfg.apply("bids", &v)?;
            }
            if let Some(v) = count {
                cfg.count = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = k_list {
                cfg.apply("k_list", &v)?;
            }
            if let Some(v) = beta {
                cfg.beta = v;
            }
            if let Some(v) = nested {
                cfg.apply("nested", &v)?;
            }
            if let Some(v) = rules {
                cfg.apply("rules", &v)?;
            }
            if let Some(v) = formulations {
                cfg.apply("formulations", &v)?;
            }
            if let Some(v) = out {
                cfg.out_dir = v;
            }
            if let Some(v) = jobs {
                cfg.jobs = v;
            }
            if let Some(v) = time_limit_s {
                cfg.time_limit_s = v;
            }
            let summary = sweep::run_sweep(&cfg)?;
            println!(
                "sweep: {} cells ({} resumed, {} failed); outputs in {}",
                summary.cells_total,
                summary.cells_skipped,
                summary.cells_failed,
                cfg.out_dir.display()
            );
            if summary.cells_failed > 0 {
                eprintln!(
                    "warning: {} cells failed; see {}",
                    summary.cells_failed,
                    cfg.out_dir.join("errors.csv").display()
                );
            }
            Ok(())
        }
        Command::Diagnose {
            instance,
            typespaces,
            out,
        } => {
            let inst = io::load_instance(&instance)?;
            if inst.num_bidders() > MAX_DIAGNOSIS_BIDDERS {
                return Err(CliError::new(
                    EXIT_TOO_LARGE,
                    anyhow!(
                        "diagnosis enumerates all coalitions; {} bidders exceed the limit of {}",
                        inst.num_bidders(),
                        MAX_DIAGNOSIS_BIDDERS
                    ),
                ));
            }
            let ts = match &typespaces {
                Some(path) => io::load_typespaces(path, &inst)?,
                None => BTreeMap::new(),
            };
            let report = match core_pricing::impossibility_diagnosis(&inst, &ts) {
                Ok(r) => r,
                Err(CoreError::TooManyBidders { n }) => {
                    return Err(CliError::new(
                        EXIT_TOO_LARGE,
                        anyhow!("instance with {n} bidders is too large to diagnose"),
                    ))
                }
                Err(e) => return Err(CliError::from(e)),
            };
            let json = serde_json::to_string_pretty(&report).context("serializing report")?;
            io::write_output(out.as_deref(), &json)?;
            Ok(())
        }
        Command::GenTypespace {
            instance,
            k,
            beta,
            seed,
            k_list,
            out,
        } => {
            let inst = io::load_instance(&instance)?;
            let cfg = TypeSpaceGenConfig {
                constraints_per_bidder: k,
                inclusion_probability: beta,
                seed,
                ..TypeSpaceGenConfig::default()
            };
            match k_list {
                Some(list) => {
                    let ks: Vec<usize> = list
                        .split(',')
                        .map(|t| t.trim().parse().map_err(|e| anyhow!("bad K '{t}': {e}")))
                        .collect::<Result<_>>()?;
                    std::fs::create_dir_all(&out)
                        .with_context(|| format!("creating {}", out.display()))?;
                    for (pos, &kk) in ks.iter().enumerate() {
                        let spaces: Vec<LinearTypeSpace> = (0..inst.num_bidders())
                            .map(|b| {
                                nested_family(&inst, b, &cfg, &ks).map(|mut f| f.swap_remove(pos))
                            })
                            .collect::<Result<_, _>>()
                            .map_err(|e| CliError::from(anyhow!(e)))?;
                        let path = out.join(format!("typespaces-k{kk}.json"));
                        std::fs::write(&path, serde_json::to_string_pretty(&spaces)?)
                            .with_context(|| format!("writing {}", path.display()))?;
                    }
                }
                None => {
                    let spaces: Vec<LinearTypeSpace> = (0..inst.num_bidders())
                        .map(|b| generate_type_space(&inst, b, &cfg))
                        .collect::<Result<_, _>>()
                        .map_err(|e| CliError::from(anyhow!(e)))?;
                    io::write_output(Some(&out), &serde_json::to_string_pretty(&spaces)?)?;
                }
            }
            Ok(())
        }
        Command::ParseCats {
            file,
            to_json,
            canonical,
        } => {
            let text = io::read_file(&file)?;
            let (parsed, warnings) = cats::parse_cats(&text)
                .with_context(|| format!("parsing {}", file.display()))?;
            for w in &warnings {
                eprintln!("{}:{}: warning: {}", file.display(), w.line, w.message);
            }
            let inst = cats::to_instance(&parsed);
            let violations = inst.validate();
            if !violations.is_empty() {
                return Err(CliError::from(anyhow!(
                    "file parses but the instance is invalid:\n  {}",
                    violations.join("\n  ")
                )));
            }
            println!(
                "{}: {} goods, {} bids, {} dummy goods -> {} bidders",
                file.display(),
                parsed.num_goods,
                parsed.num_bids,
                parsed.num_dummy,
                inst.num_bidders()
            );
            if let Some(path) = to_json {
                io::write_output(Some(&path), &serde_json::to_string_pretty(&inst)?)?;
            }
            if let Some(path) = canonical {
                io::write_output(Some(&path), &cats::write_cats(&parsed))?;
            }
            Ok(())
        }
        Command::GenInstance {
            goods,
            bids,
            xor_group,
            max_bundle,
            seed,
            out,
        } => {
            let inst = generate_instance(&GenConfig {
                num_goods: goods,
                num_bids: bids,
                max_bundle_size: max_bundle,
                bids_per_bidder: xor_group,
                seed,
            });
            let as_cats = out
                .as_deref()
                .and_then(|p| p.extension())
                .is_some_and(|e| e == "cats");
            let text = if as_cats {
                cats::write_cats(&cats::instance_to_cats(&inst))
            } else {
                serde_json::to_string_pretty(&inst)?
            };
            io::write_output(out.as_deref(), &text)?;
            Ok(())
        }
    }
}
