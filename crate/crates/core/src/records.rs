//! Option-record CSV files and JSON report output.
//!
//! Record files carry the header `S,r,tau,K,sigma,price,kind` (plus an
//! optional `date` column). A leading `# rates=percent` line declares rates
//! in percent; they are stored as decimals either way.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audit::ReportBundle;
use crate::error::{contract, Error, Result};
use crate::features::FeatureVector;
use crate::pricing::bsm::{OptionKind, OPTION_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateUnit {
    #[default]
    Decimal,
    Percent,
}

impl RateUnit {
    /// Converts a rate written in this unit to a decimal.
    pub fn to_decimal(self, r: f64) -> f64 {
        match self {
            RateUnit::Decimal => r,
            RateUnit::Percent => r / 100.0,
        }
    }
}

impl FromStr for RateUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "decimal" => Ok(RateUnit::Decimal),
            "percent" | "pct" => Ok(RateUnit::Percent),
            other => contract(format!("unknown rate unit {other:?}")),
        }
    }
}

/// One quoted European option; `r` is always a decimal rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionRecord {
    pub s: f64,
    pub r: f64,
    pub tau: f64,
    pub k: f64,
    pub sigma: f64,
    pub price: f64,
    pub kind: OptionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

impl OptionRecord {
    pub fn features(&self) -> [f64; 5] {
        [self.s, self.r, self.tau, self.k, self.sigma]
    }

    pub fn feature_vector(&self) -> FeatureVector {
        FeatureVector::new(OPTION_FEATURES, self.features().to_vec())
            .expect("option features are five distinct names")
    }

    fn problem(&self) -> Option<&'static str> {
        if !self
            .features()
            .iter()
            .chain([&self.price])
            .all(|v| v.is_finite())
        {
            Some("non-finite value")
        } else if self.s <= 0.0 {
            Some("S must be positive")
        } else if self.k <= 0.0 {
            Some("K must be positive")
        } else if self.tau <= 0.0 {
            Some("tau must be positive")
        } else if self.sigma <= 0.0 {
            Some("sigma must be positive")
        } else if self.price < 0.0 {
            Some("price must be nonnegative")
        } else {
            None
        }
    }
}

const COLUMNS: [&str; 7] = ["S", "r", "tau", "K", "sigma", "price", "kind"];

fn parse_directives(text: &str) -> Result<RateUnit> {
    let mut unit = RateUnit::Decimal;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some(body) = trimmed.strip_prefix('#') else {
            break;
        };
        for part in body.split([',', ';', ' ']).filter(|p| !p.is_empty()) {
            if let Some((key, value)) = part.split_once('=') {
                if key.trim().eq_ignore_ascii_case("rates") {
                    unit = value.parse().map_err(|_| Error::Parse {
                        line: i + 1,
                        message: format!(
                            "rates directive must be percent or decimal, got {value:?}"
                        ),
                    })?;
                }
            }
        }
    }
    Ok(unit)
}

/// Parses option records from CSV text.
pub fn parse_option_records(text: &str) -> Result<Vec<OptionRecord>> {
    let unit = parse_directives(text)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header_line = reader.position().line().max(1) as usize;
    let headers = reader
        .headers()
        .map_err(|e| csv_error(e, header_line))?
        .clone();
    let mut index = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        index.insert(h.to_string(), i);
    }
    let mut cols = [0usize; 7];
    for (slot, name) in cols.iter_mut().zip(COLUMNS) {
        *slot = *index.get(name).ok_or_else(|| Error::Parse {
            line: header_line,
            message: format!(
                "header lacks column {name:?} (expected {})",
                COLUMNS.join(",")
            ),
        })?;
    }
    let date_col = index.get("date").copied();

    let mut records = Vec::new();
    let mut bad_lines = Vec::new();
    let mut reasons = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize, name: &str| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("{name} is not a number: {:?}", field(i)),
            })
        };
        let kind = field(cols[6])
            .parse::<OptionKind>()
            .map_err(|_| Error::Parse {
                line,
                message: format!("kind must be call or put, got {:?}", field(cols[6])),
            })?;
        let record = OptionRecord {
            s: num(cols[0], "S")?,
            r: unit.to_decimal(num(cols[1], "r")?),
            tau: num(cols[2], "tau")?,
            k: num(cols[3], "K")?,
            sigma: num(cols[4], "sigma")?,
            price: num(cols[5], "price")?,
            kind,
            date: date_col
                .map(|i| field(i).to_string())
                .filter(|d| !d.is_empty()),
        };
        if let Some(reason) = record.problem() {
            bad_lines.push(line);
            reasons.push(format!("line {line}: {reason}"));
        }
        records.push(record);
    }
    if !bad_lines.is_empty() {
        return Err(Error::Validation {
            lines: bad_lines,
            message: reasons.join("; "),
        });
    }
    Ok(records)
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn load_option_records(path: impl AsRef<Path>) -> Result<Vec<OptionRecord>> {
    parse_option_records(&fs::read_to_string(path)?)
}

/// Renders records as CSV with decimal rates, readable by
/// [`parse_option_records`].
pub fn format_option_records(records: &[OptionRecord]) -> String {
    let with_date = records.iter().any(|r| r.date.is_some());
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if with_date {
        header.push("date");
    }
    let mut out = String::from("# rates=decimal\n");
    writer.write_record(&header).expect("in-memory write");
    for r in records {
        let mut row: Vec<String> = r.features().iter().map(|v| format!("{v:?}")).collect();
        row.push(format!("{:?}", r.price));
        row.push(r.kind.as_str().to_string());
        if with_date {
            row.push(r.date.clone().unwrap_or_default());
        }
        writer.write_record(&row).expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
    out
}

pub fn save_option_records(records: &[OptionRecord], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_option_records(records))?;
    Ok(())
}

/// Per-feature mean of the records on the earliest date, or of all records
/// when the file has no dates.
pub fn default_baseline(records: &[OptionRecord]) -> Result<FeatureVector> {
    if records.is_empty() {
        return Err(Error::InsufficientData {
            what: "option records",
            needed: 1,
            got: 0,
        });
    }
    let first = records.iter().filter_map(|r| r.date.as_deref()).min();
    let chosen: Vec<&OptionRecord> = match first {
        Some(d) => records
            .iter()
            .filter(|r| r.date.as_deref() == Some(d))
            .collect(),
        None => records.iter().collect(),
    };
    let mut mean = [0.0; 5];
    for r in &chosen {
        for (m, v) in mean.iter_mut().zip(r.features()) {
            *m += v;
        }
    }
    let n = chosen.len() as f64;
    FeatureVector::new(OPTION_FEATURES, mean.iter().map(|m| m / n).collect())
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_json_pretty(value)?.as_bytes())?;
    Ok(())
}

pub fn write_report(bundle: &ReportBundle, path: impl AsRef<Path>) -> Result<()> {
    write_json(bundle, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_directive() {
        let text =
            "# rates=percent\nS,r,tau,K,sigma,price,kind\n1433.8,4.26,0.59,1396,0.23,51.2,call\n";
        let recs = parse_option_records(text).unwrap();
        assert_eq!(recs.len(), 1);
        assert!((recs[0].r - 0.0426).abs() < 1e-15);
        assert_eq!(recs[0].kind, OptionKind::Call);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_option_records("S,r,tau,K,sigma,price,kind\n")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn validation_names_rows() {
        let text = "S,r,tau,K,sigma,price,kind\n100,0.05,1,100,0.2,10,call\n100,0.05,1,100,0,10,put\n100,0.05,1,-1,0.2,1,put\n";
        match parse_option_records(text) {
            Err(Error::Validation { lines, message }) => {
                assert_eq!(lines, vec![3, 4]);
                assert!(message.contains("sigma"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "# rates=decimal\nS,r,tau,K,sigma,price,kind\n100,0.05,1,100,0.2,10,call\n100,abc,1,100,0.2,10,call\n";
        match parse_option_records(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_option_records("S,r,tau,K,price,kind\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_option_records("S,r,tau,K,sigma,price,kind\n1,0,1,1,0.2,1,straddle\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn round_trip_and_baseline() {
        let text = "S,r,tau,K,sigma,price,kind,date\n100,0.05,1,100,0.2,10.45,call,2008-01-03\n110,0.03,0.5,100,0.3,1.5,put,2008-01-02\n90,0.01,0.25,100,0.4,0.3,call,2008-01-02\n";
        let recs = parse_option_records(text).unwrap();
        let again = parse_option_records(&format_option_records(&recs)).unwrap();
        assert_eq!(recs, again);
        let b = default_baseline(&recs).unwrap();
        for (got, want) in b.values().iter().zip([100.0, 0.02, 0.375, 100.0, 0.35]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn empty_bundle_json() {
        let s = to_json_pretty(&ReportBundle::default()).unwrap();
        assert_eq!(s, "{\n  \"reports\": []\n}\n");
    }
}
