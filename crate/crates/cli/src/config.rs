//! Sweep configuration: a flat key=value text file, every key overridable by
//! a command-line flag.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use auction_core::core_pricing::PaymentRuleKind;
use auction_core::payments::Formulation;

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// Glob of CATS files to price; when absent the internal generator runs.
    pub cats_glob: Option<String>,
    /// Generator: goods-count settings.
    pub goods: Vec<u32>,
    /// Generator: bid-count settings.
    pub bids: Vec<usize>,
    /// Generator: instances per (goods, bids) setting.
    pub count: usize,
    pub seed: u64,
    pub k_list: Vec<usize>,
    pub beta: f64,
    /// Prefix-nested type spaces across the K sweep (fresh draws otherwise).
    pub nested: bool,
    pub rules: Vec<PaymentRuleKind>,
    pub formulations: Vec<Formulation>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
    /// Per-instance time limit in seconds; 0 disables the limit.
    pub time_limit_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cats_glob: None,
            goods: vec![4],
            bids: vec![8],
            count: 3,
            seed: 0,
            k_list: vec![1, 2, 4, 8, 16],
            beta: 0.3,
            nested: true,
            rules: PaymentRuleKind::ALL.to_vec(),
            formulations: vec![Formulation::Bps],
            out_dir: PathBuf::from("sweep-out"),
            jobs: 0,
            time_limit_s: 0.0,
        }
    }
}

fn parse_list<T: FromStr>(value: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>> = value
        .split(',')
        .map(|tok| tok.trim())
        .filter(|tok| !tok.is_empty())
        .map(|tok| tok.parse::<T>().map_err(|e| anyhow!("bad {what} '{tok}': {e}")))
        .collect();
    let items = items?;
    if items.is_empty() {
        bail!("{what} list is empty");
    }
    Ok(items)
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => bail!("expected a boolean, got '{other}'"),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected 'key = value'", lineno + 1))?;
            config
                .apply(key.trim(), value.trim())
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(config)
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "cats_glob" => self.cats_glob = Some(value.to_string()),
            "goods" => self.goods = parse_list(value, "goods count")?,
            "bids" => self.bids = parse_list(value, "bid count")?,
            "count" => self.count = value.parse().context("bad count")?,
            "seed" => self.seed = value.parse().context("bad seed")?,
            "k_list" | "k" => self.k_list = parse_list(value, "constraint count")?,
            "beta" => self.beta = value.parse().context("bad beta")?,
            "nested" => self.nested = parse_bool(value)?,
            "rules" => {
                self.rules = value
                    .split(',')
                    .map(|tok| tok.trim().parse::<PaymentRuleKind>().map_err(|e| anyhow!(e)))
                    .collect::<Result<_>>()?
            }
            "formulations" => {
                self.formulations = value
                    .split(',')
                    .map(|tok| tok.trim().parse::<Formulation>().map_err(|e| anyhow!(e)))
                    .collect::<Result<_>>()?
            }
            "out_dir" | "out" => self.out_dir = PathBuf::from(value),
            "jobs" => self.jobs = value.parse().context("bad jobs")?,
            "time_limit_s" => self.time_limit_s = value.parse().context("bad time limit")?,
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.cats_glob.is_none() && (self.goods.is_empty() || self.bids.is_empty() || self.count == 0)
        {
            bail!("no instance source: set cats_glob or generator goods/bids/count");
        }
        if self.k_list.is_empty() {
            bail!("k_list is empty");
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            bail!("k_list must be strictly ascending");
        }
        if self.rules.is_empty() {
            bail!("no payment rules selected");
        }
        if self.formulations.is_empty() {
            bail!("no formulations selected");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            bail!("beta {} outside [0, 1]", self.beta);
        }
        Ok(())
    }
}
