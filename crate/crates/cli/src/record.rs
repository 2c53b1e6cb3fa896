//! One benchmark result per row, with a stable CSV encoding.

use anyhow::{bail, Context, Result};
use approxline::certify::ProbBound;

pub const CSV_HEADER: &str =
    "item_id,attribute,method,p,k,lower,upper,width,regions,millis,status";

/// A single run of one method on one (item, attribute) pair.
///
/// `method` is one of `exact`, `approxline`, `interval`, `sampling`; the
/// relaxation parameters live in their own `p` and `k` columns so the
/// method token never needs quoting.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub item_id: String,
    pub attribute: String,
    pub method: String,
    pub p: f64,
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    pub regions: usize,
    pub millis: u128,
    pub status: String,
}

impl RunRecord {
    pub fn from_bound(
        item_id: impl Into<String>,
        attribute: impl Into<String>,
        method: impl Into<String>,
        p: f64,
        k: usize,
        bound: &ProbBound,
    ) -> RunRecord {
        RunRecord {
            item_id: item_id.into(),
            attribute: attribute.into(),
            method: method.into(),
            p,
            k,
            lower: bound.lower,
            upper: bound.upper,
            width: bound.width(),
            regions: bound.region_count,
            millis: bound.runtime.as_millis(),
            status: bound.status.to_string(),
        }
    }

    /// Encodes the record as one CSV line. Floats use the shortest
    /// representation that survives a round trip through
    /// [`RunRecord::parse_csv_line`]; there is no quoting, so commas in
    /// the free-text columns are replaced by semicolons.
    pub fn to_csv_line(&self) -> String {
        let clean = |s: &str| s.replace(',', ";");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            clean(&self.item_id),
            clean(&self.attribute),
            clean(&self.method),
            self.p,
            self.k,
            self.lower,
            self.upper,
            self.width,
            self.regions,
            self.millis,
            clean(&self.status),
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<RunRecord> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            bail!("expected 11 CSV fields, got {}: {line:?}", fields.len());
        }
        let field = |i: usize, name: &str| {
            fields[i]
                .parse::<f64>()
                .with_context(|| format!("column {name} in {line:?}"))
        };
        let count = |i: usize, name: &str| {
            fields[i]
                .parse::<usize>()
                .with_context(|| format!("column {name} in {line:?}"))
        };
        Ok(RunRecord {
            item_id: fields[0].to_string(),
            attribute: fields[1].to_string(),
            method: fields[2].to_string(),
            p: field(3, "p")?,
            k: count(4, "k")?,
            lower: field(5, "lower")?,
            upper: field(6, "upper")?,
            width: field(7, "width")?,
            regions: count(8, "regions")?,
            millis: fields[9]
                .parse::<u128>()
                .with_context(|| format!("column millis in {line:?}"))?,
            status: fields[10].to_string(),
        })
    }
}

/// Parses a whole CSV document, skipping the header and `#` comments.
pub fn parse_csv(text: &str) -> Result<Vec<RunRecord>> {
    text.lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#') && *l != CSV_HEADER)
        .map(RunRecord::parse_csv_line)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunRecord {
        RunRecord {
            item_id: "pair3".into(),
            attribute: "1".into(),
            method: "approxline".into(),
            p: 0.5,
            k: 25,
            lower: 0.123456789012345,
            upper: 0.98,
            width: 0.856543210987655,
            regions: 17,
            millis: 42,
            status: "ok".into(),
        }
    }

    #[test]
    fn round_trips_through_csv() {
        let rec = sample();
        let line = rec.to_csv_line();
        assert_eq!(RunRecord::parse_csv_line(&line).unwrap(), rec);
    }

    #[test]
    fn header_matches_field_order() {
        let line = sample().to_csv_line();
        assert_eq!(
            line.split(',').count(),
            CSV_HEADER.split(',').count(),
        );
    }

    #[test]
    fn commas_in_ids_never_break_the_schema() {
        let mut rec = sample();
        rec.item_id = "a,b".into();
        let parsed = RunRecord::parse_csv_line(&rec.to_csv_line()).unwrap();
        assert_eq!(parsed.item_id, "a;b");
    }

    #[test]
    fn rejects_wrong_arity() {
        assert!(RunRecord::parse_csv_line("a,b,c").is_err());
    }

    #[test]
    fn document_parser_skips_header_and_comments() {
        let text = format!(
            "{CSV_HEADER}\n# note\n{}\n{}\n",
            sample().to_csv_line(),
            sample().to_csv_line()
        );
        assert_eq!(parse_csv(&text).unwrap().len(), 2);
    }
}
