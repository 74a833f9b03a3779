//! CATS-format instance files.
//!
//! The text format: `%` starts a comment, blank lines are skipped, and the
//! headers `goods <int>`, `bids <int>`, `dummy <int>` appear in any order
//! before the bid rows. A bid row is whitespace-separated:
//! `<bid index> <value> <good>... #`, terminated by `#`. Good indices at or
//! above `goods` denote dummy goods (at most one per bid); bids sharing a
//! dummy good form one XOR bidder.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Bid, Bundle, Instance};

#[derive(Debug, Error)]
pub enum CatsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing header(s): {0}")]
    MissingHeader(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> CatsError {
    CatsError::Parse {
        line,
        message: message.into(),
    }
}

/// A non-fatal oddity found while parsing, e.g. an unknown header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatsWarning {
    pub line: usize,
    pub message: String,
}

/// One bid row as written in the file, dummy good still included.
#[derive(Clone, Debug, PartialEq)]
pub struct CatsBidRow {
    pub index: usize,
    pub value: f64,
    pub goods: Vec<u32>,
}

impl CatsBidRow {
    /// The dummy good of this row, if it carries one.
    pub fn dummy(&self, num_goods: u32) -> Option<u32> {
        self.goods.iter().copied().find(|&g| g >= num_goods)
    }
}

/// A parsed CATS file.
#[derive(Clone, Debug, PartialEq)]
pub struct CatsFile {
    pub num_goods: u32,
    pub num_bids: usize,
    pub num_dummy: u32,
    pub rows: Vec<CatsBidRow>,
}

/// Parses CATS text. Returns the file plus warnings for ignored lines.
pub fn parse_cats(input: &str) -> Result<(CatsFile, Vec<CatsWarning>), CatsError> {
    let mut goods: Option<u32> = None;
    let mut bids: Option<usize> = None;
    let mut dummy: Option<u32> = None;
    let mut rows: Vec<CatsBidRow> = Vec::new();
    let mut seen_indices: BTreeMap<usize, usize> = BTreeMap::new();
    let mut warnings = Vec::new();

    for (lineno, raw) in input.lines().enumerate() {
        let line = lineno + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let first = tokens.next().expect("non-empty line has a token");

        if first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            // A header line. Known headers take one integer argument.
            let value = tokens.next();
            match first {
                "goods" | "bids" | "dummy" => {
                    let value = value
                        .ok_or_else(|| parse_err(line, format!("header '{first}' missing value")))?;
                    match first {
                        "goods" => {
                            goods = Some(value.parse().map_err(|_| {
                                parse_err(line, format!("invalid goods count '{value}'"))
                            })?)
                        }
                        "bids" => {
                            bids = Some(value.parse().map_err(|_| {
                                parse_err(line, format!("invalid bids count '{value}'"))
                            })?)
                        }
                        _ => {
                            dummy = Some(value.parse().map_err(|_| {
                                parse_err(line, format!("invalid dummy count '{value}'"))
                            })?)
                        }
                    }
                    if !rows.is_empty() {
                        return Err(parse_err(line, "header after first bid row"));
                    }
                }
                other => {
                    warnings.push(CatsWarning {
                        line,
                        message: format!("ignoring unknown header '{other}'"),
                    });
                }
            }
            continue;
        }

        // A bid row: index value goods... '#'.
        let (num_goods, num_dummy) = match (goods, dummy) {
            (Some(g), Some(d)) if bids.is_some() => (g, d),
            _ => {
                let mut missing = Vec::new();
                if goods.is_none() {
                    missing.push("goods");
                }
                if bids.is_none() {
                    missing.push("bids");
                }
                if dummy.is_none() {
                    missing.push("dummy");
                }
                return Err(CatsError::MissingHeader(format!(
                    "{} (before bid row at line {line})",
                    missing.join(", ")
                )));
            }
        };
        let mut fields: Vec<&str> = vec![first];
        fields.extend(tokens);
        if fields.last() != Some(&"#") {
            return Err(parse_err(line, "bid row not terminated by '#'"));
        }
        fields.pop();
        if fields.len() < 2 {
            return Err(parse_err(line, "bid row needs an index and a value"));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid bid index '{}'", fields[0])))?;
        if let Some(&previous) = seen_indices.get(&index) {
            return Err(parse_err(
                line,
                format!("duplicate bid index {index} (first seen at line {previous})"),
            ));
        }
        seen_indices.insert(index, line);
        let value: f64 = fields[1]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid bid value '{}'", fields[1])))?;
        if !value.is_finite() || value < 0.0 {
            return Err(parse_err(line, format!("bid value {value} not a nonnegative number")));
        }
        let mut row_goods = Vec::with_capacity(fields.len() - 2);
        let mut dummies = 0;
        for tok in &fields[2..] {
            let g: u32 = tok
                .parse()
                .map_err(|_| parse_err(line, format!("invalid good index '{tok}'")))?;
            if g >= num_goods + num_dummy {
                return Err(parse_err(
                    line,
                    format!(
                        "good index {g} out of range ({num_goods} goods + {num_dummy} dummies)"
                    ),
                ));
            }
            if g >= num_goods {
                dummies += 1;
                if dummies > 1 {
                    return Err(parse_err(line, "bid row has more than one dummy good"));
                }
            }
            if row_goods.contains(&g) {
                return Err(parse_err(line, format!("good {g} repeated in bid row")));
            }
            row_goods.push(g);
        }
        rows.push(CatsBidRow {
            index,
            value,
            goods: row_goods,
        });
    }

    let (num_goods, num_bids, num_dummy) = match (goods, bids, dummy) {
        (Some(g), Some(b), Some(d)) => (g, b, d),
        _ => {
            let mut missing = Vec::new();
            if goods.is_none() {
                missing.push("goods");
            }
            if bids.is_none() {
                missing.push("bids");
            }
            if dummy.is_none() {
                missing.push("dummy");
            }
            return Err(CatsError::MissingHeader(missing.join(", ")));
        }
    };
    if rows.len() != num_bids {
        return Err(CatsError::Parse {
            line: input.lines().count(),
            message: format!("header declares {num_bids} bids, file has {}", rows.len()),
        });
    }
    Ok((
        CatsFile {
            num_goods,
            num_bids,
            num_dummy,
            rows,
        },
        warnings,
    ))
}

/// Maps the file onto an XOR instance: rows sharing a dummy good become one
/// bidder, rows without a dummy become singleton bidders, ids by first
/// appearance, dummy goods stripped from the bundles.
pub fn to_instance(file: &CatsFile) -> Instance {
    let mut group_of_dummy: BTreeMap<u32, usize> = BTreeMap::new();
    let mut bid_lists: Vec<Vec<Bid>> = Vec::new();
    for row in &file.rows {
        let bundle = Bundle::new(
            row.goods
                .iter()
                .copied()
                .filter(|&g| g < file.num_goods),
        );
        let bid = Bid {
            bundle,
            value: row.value,
        };
        match row.dummy(file.num_goods) {
            Some(d) => {
                let group = *group_of_dummy.entry(d).or_insert_with(|| {
                    bid_lists.push(Vec::new());
                    bid_lists.len() - 1
                });
                bid_lists[group].push(bid);
            }
            None => bid_lists.push(vec![bid]),
        }
    }
    Instance::new(file.num_goods, bid_lists)
}

/// Renders a file in canonical form: `goods`/`bids`/`dummy` headers in that
/// order, then one bid per line.
pub fn write_cats(file: &CatsFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "goods {}", file.num_goods);
    let _ = writeln!(out, "bids {}", file.num_bids);
    let _ = writeln!(out, "dummy {}", file.num_dummy);
    for row in &file.rows {
        let _ = write!(out, "{} {}", row.index, row.value);
        for g in &row.goods {
            let _ = write!(out, " {g}");
        }
        let _ = writeln!(out, " #");
    }
    out
}

/// Encodes an instance as a CATS file, synthesizing one dummy good per
/// multi-bid bidder. Bid indices are assigned in bidder order, so parsing the
/// output reproduces the instance bidder-for-bidder.
pub fn instance_to_cats(instance: &Instance) -> CatsFile {
    let mut rows = Vec::with_capacity(instance.total_bids());
    let mut next_dummy = instance.num_goods;
    let mut index = 0;
    for bidder in &instance.bidders {
        let dummy = if bidder.bids.len() > 1 {
            let d = next_dummy;
            next_dummy += 1;
            Some(d)
        } else {
            None
        };
        for bid in &bidder.bids {
            let mut goods: Vec<u32> = bid.bundle.goods().to_vec();
            if let Some(d) = dummy {
                goods.push(d);
            }
            rows.push(CatsBidRow {
                index,
                value: bid.value,
                goods,
            });
            index += 1;
        }
    }
    CatsFile {
        num_goods: instance.num_goods,
        num_bids: rows.len(),
        num_dummy: next_dummy - instance.num_goods,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate_instance, GenConfig};
    use crate::model::fixture_ex1;
    use crate::payments;
    use crate::EPS;

    #[test]
    fn minimal_file() {
        let (file, warnings) = parse_cats("goods 2\nbids 1\ndummy 0\n0 5.0 0 1 #\n").unwrap();
        assert!(warnings.is_empty());
        assert_eq!(file.num_goods, 2);
        assert_eq!(file.rows.len(), 1);
        assert_eq!(file.rows[0].goods, vec![0, 1]);
        let instance = to_instance(&file);
        assert_eq!(instance.num_bidders(), 1);
        assert_eq!(instance.bidders[0].bids[0].value, 5.0);
    }

    #[test]
    fn dummy_good_tags_bidder_group() {
        let text = "goods 2\nbids 3\ndummy 1\n0 5.0 0 2 #\n1 4.0 1 2 #\n2 3.0 1 #\n";
        let (file, _) = parse_cats(text).unwrap();
        assert_eq!(file.rows[0].dummy(2), Some(2));
        let instance = to_instance(&file);
        // Rows 0 and 1 share dummy 2: one bidder with two XOR bids.
        assert_eq!(instance.num_bidders(), 2);
        assert_eq!(instance.bidders[0].bids.len(), 2);
        assert_eq!(instance.bidders[1].bids.len(), 1);
        assert!(instance.validate().is_empty());
        // Dummy goods are stripped.
        assert_eq!(instance.bidders[0].bids[0].bundle.goods(), &[0]);
    }

    #[test]
    fn row_missing_terminator_reports_line() {
        let text = "goods 2\nbids 1\ndummy 0\n0 5.0 0 1\n";
        match parse_cats(text) {
            Err(CatsError::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains('#'));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn headers_any_order_and_comments() {
        let text = "% comment\n\ndummy 1\nbids 1\ngoods 3\n% another\n0 2.5 1 #\n";
        let (file, _) = parse_cats(text).unwrap();
        assert_eq!((file.num_goods, file.num_bids, file.num_dummy), (3, 1, 1));
    }

    #[test]
    fn unknown_header_warns() {
        let text = "distribution L4\ngoods 1\nbids 1\ndummy 0\n0 1.0 0 #\n";
        let (_, warnings) = parse_cats(text).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].message.contains("distribution"));
    }

    #[test]
    fn missing_header_is_fatal() {
        assert!(matches!(
            parse_cats("goods 2\nbids 1\n0 5.0 0 #\n"),
            Err(CatsError::MissingHeader(_))
        ));
        assert!(matches!(
            parse_cats("goods 2\ndummy 0\n"),
            Err(CatsError::MissingHeader(_))
        ));
    }

    #[test]
    fn out_of_range_and_duplicates_are_fatal() {
        let base = "goods 2\nbids 2\ndummy 1\n";
        assert!(parse_cats(&format!("{base}0 1.0 5 #\n1 1.0 0 #\n")).is_err());
        assert!(parse_cats(&format!("{base}0 1.0 0 #\n0 1.0 1 #\n")).is_err());
        // Two dummy goods on one row.
        let two_dummy = "goods 1\nbids 1\ndummy 2\n0 1.0 0 1 2 #\n";
        assert!(parse_cats(two_dummy).is_err());
    }

    #[test]
    fn bid_count_mismatch_is_fatal() {
        assert!(parse_cats("goods 1\nbids 2\ndummy 0\n0 1.0 0 #\n").is_err());
    }

    #[test]
    fn round_trip_is_value_identical() {
        for seed in 0..20 {
            let instance = generate_instance(&GenConfig::new(5, 8, seed));
            let file = instance_to_cats(&instance);
            let text = write_cats(&file);
            let (reparsed, warnings) = parse_cats(&text).unwrap();
            assert!(warnings.is_empty());
            assert_eq!(to_instance(&reparsed), instance, "seed {seed}");
            // Canonical text is a fixed point.
            assert_eq!(write_cats(&reparsed), text);
        }
    }

    #[test]
    fn ex1_through_cats_prices_identically() {
        let (instance, _) = fixture_ex1();
        let file = instance_to_cats(&instance);
        assert_eq!(file.num_dummy, 0, "single-minded bidders need no dummies");
        let roundtrip = to_instance(&parse_cats(&write_cats(&file)).unwrap().0);
        assert_eq!(roundtrip, instance);
        let vcg = payments::vcg_payments(&roundtrip).unwrap();
        for i in 0..3 {
            assert!((vcg.get(i).unwrap() - 10.0).abs() < EPS);
        }
    }

    #[test]
    fn values_and_instance_totals() {
        let text = "goods 2\nbids 2\ndummy 1\n0 1.25 0 2 #\n1 0.75 1 2 #\n";
        let (file, _) = parse_cats(text).unwrap();
        let instance = to_instance(&file);
        assert_eq!(instance.total_bids(), file.num_bids);
        assert!(instance.num_bidders() <= file.num_bids);
        assert_eq!(instance.bidders[0].bids[0].value, 1.25);
    }
}
