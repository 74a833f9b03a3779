//! File loading and the shared exit-code policy.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use auction_core::cats;
use auction_core::{Instance, LinearTypeSpace};

/// Exit codes: 2 for unreadable input files, 3 for a too-large diagnosis, 1
/// for everything else that fails.
pub const EXIT_CANNOT_OPEN: u8 = 2;
pub const EXIT_TOO_LARGE: u8 = 3;

/// Error wrapper carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(code: u8, error: anyhow::Error) -> Self {
        CliError { code, error }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(error: E) -> Self {
        CliError {
            code: 1,
            error: error.into(),
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| {
        CliError::new(
            EXIT_CANNOT_OPEN,
            anyhow::anyhow!("cannot open {}: {e}", path.display()),
        )
    })
}

/// Loads an instance from JSON (`.json`) or CATS text (anything else).
/// CATS warnings go to stderr; an invalid instance is a hard error.
pub fn load_instance(path: &Path) -> Result<Instance, CliError> {
    let text = read_file(path)?;
    let instance = parse_instance(&text, path)?;
    let violations = instance.validate();
    if !violations.is_empty() {
        return Err(CliError::from(anyhow::anyhow!(
            "{} is not a valid instance:\n  {}",
            path.display(),
            violations.join("\n  ")
        )));
    }
    Ok(instance)
}

fn parse_instance(text: &str, path: &Path) -> Result<Instance> {
    let looks_like_json = path.extension().is_some_and(|e| e == "json")
        || text.trim_start().starts_with('{');
    if looks_like_json {
        serde_json::from_str(text).with_context(|| format!("parsing {} as JSON", path.display()))
    } else {
        let (file, warnings) =
            cats::parse_cats(text).with_context(|| format!("parsing {} as CATS", path.display()))?;
        for w in warnings {
            eprintln!("{}:{}: warning: {}", path.display(), w.line, w.message);
        }
        Ok(cats::to_instance(&file))
    }
}

/// Loads a typespace file: a JSON list of per-bidder type spaces, keyed by
/// owning bidder. Duplicate owners are rejected.
pub fn load_typespaces(
    path: &Path,
    instance: &Instance,
) -> Result<BTreeMap<usize, LinearTypeSpace>, CliError> {
    let text = read_file(path)?;
    let list: Vec<LinearTypeSpace> = serde_json::from_str(&text)
        .with_context(|| format!("parsing {} as a type-space list", path.display()))
        .map_err(CliError::from)?;
    let mut map = BTreeMap::new();
    for ts in list {
        let violations = ts.validate(instance);
        if !violations.is_empty() {
            return Err(CliError::from(anyhow::anyhow!(
                "type space for bidder {} does not fit the instance:\n  {}",
                ts.bidder_id,
                violations.join("\n  ")
            )));
        }
        if map.insert(ts.bidder_id, ts).is_some() {
            return Err(CliError::from(anyhow::anyhow!(
                "duplicate type space for one bidder in {}",
                path.display()
            )));
        }
    }
    Ok(map)
}

pub fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, content).with_context(|| format!("writing {}", p.display()))?;
        }
        None => println!("{content}"),
    }
    Ok(())
}

/// Expands a CATS glob into a sorted file list.
pub fn expand_glob(pattern: &str) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = glob::glob(pattern)
        .with_context(|| format!("bad glob pattern '{pattern}'"))?
        .collect::<Result<_, _>>()
        .context("walking glob matches")?;
    files.sort();
    if files.is_empty() {
        bail!("glob '{pattern}' matched no files");
    }
    Ok(files)
}
