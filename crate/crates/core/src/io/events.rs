//! Event-file ingestion: `label,timestamp` rows (comma- or tab-separated) or
//! line-JSON records `{"label": ..., "timestamp": ...}`.
//!
//! Timestamps are either plain numbers, which pass through unchanged, or ISO-8601
//! dates / date-times, which become day offsets from the earliest date in the file.
//! A file must use one kind throughout.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of malformed records above which parsing fails outright.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Csv,
    Tsv,
    Jsonl,
}

impl EventFormat {
    /// Guesses from the file extension; anything unknown is treated as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("tsv" | "tab") => EventFormat::Tsv,
            Some("jsonl" | "ndjson" | "json") => EventFormat::Jsonl,
            _ => EventFormat::Csv,
        }
    }
}

impl FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EventFormat::Csv),
            "tsv" => Ok(EventFormat::Tsv),
            "jsonl" | "ndjson" => Ok(EventFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown event format {other:?} (csv, tsv, jsonl)"))),
        }
    }
}

impl fmt::Display for EventFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventFormat::Csv => "csv",
            EventFormat::Tsv => "tsv",
            EventFormat::Jsonl => "jsonl",
        })
    }
}

/// One ingested record with its timestamp already converted to a real time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub label: String,
    pub time: f64,
    /// 1-based source line.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalformedRecord {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for MalformedRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedEvents {
    pub events: Vec<RawEvent>,
    pub malformed: Vec<MalformedRecord>,
    /// Day zero when the file carried dates.
    pub date_origin: Option<NaiveDate>,
}

#[derive(Debug, Clone, Copy)]
enum Stamp {
    Number(f64),
    Date(NaiveDateTime),
}

fn parse_stamp(s: &str) -> Option<Stamp> {
    let s = s.trim();
    if let Ok(x) = s.parse::<f64>() {
        return x.is_finite().then_some(Stamp::Number(x));
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(Stamp::Date(d.and_hms_opt(0, 0, 0)?));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(Stamp::Date)
}

fn is_header(label: &str, stamp: &str) -> bool {
    let stamp = stamp.trim().to_ascii_lowercase();
    let label = label.trim().to_ascii_lowercase();
    matches!(stamp.as_str(), "timestamp" | "time" | "date" | "t")
        || matches!(label.as_str(), "label" | "code" | "stream")
}

/// Reads and parses an event file.
pub fn parse_events(path: &Path, format: EventFormat) -> Result<ParsedEvents> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events_str(&text, format, path)
}

/// Parses event records from text; `source` names the input in error messages.
pub fn parse_events_str(text: &str, format: EventFormat, source: &Path) -> Result<ParsedEvents> {
    let mut records: Vec<(usize, std::result::Result<(String, Stamp), String>)> = Vec::new();
    match format {
        EventFormat::Csv | EventFormat::Tsv => {
            let delimiter = if format == EventFormat::Tsv { b'\t' } else { b',' };
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .delimiter(delimiter)
                .comment(Some(b'#'))
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            let mut first = true;
            for rec in rdr.records() {
                let rec = match rec {
                    Ok(r) => r,
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line() as usize);
                        records.push((line, Err(e.to_string())));
                        continue;
                    }
                };
                let line = rec.position().map_or(0, |p| p.line() as usize);
                if rec.iter().all(str::is_empty) {
                    continue;
                }
                let was_first = std::mem::replace(&mut first, false);
                if rec.len() != 2 {
                    records.push((line, Err(format!("expected 2 fields, found {}", rec.len()))));
                    continue;
                }
                if was_first && parse_stamp(&rec[1]).is_none() && is_header(&rec[0], &rec[1]) {
                    continue;
                }
                records.push((line, label_and_stamp(&rec[0], &rec[1])));
            }
        }
        EventFormat::Jsonl => {
            for (i, raw) in text.lines().enumerate() {
                if raw.trim().is_empty() {
                    continue;
                }
                records.push((i + 1, json_record(raw)));
            }
        }
    }
    assemble(records, source)
}

fn label_and_stamp(label: &str, stamp: &str) -> std::result::Result<(String, Stamp), String> {
    let label = label.trim();
    if label.is_empty() {
        return Err("empty label".into());
    }
    let stamp = parse_stamp(stamp).ok_or_else(|| format!("unparsable timestamp {stamp:?}"))?;
    Ok((label.to_string(), stamp))
}

fn json_record(raw: &str) -> std::result::Result<(String, Stamp), String> {
    let v: serde_json::Value = serde_json::from_str(raw).map_err(|e| format!("bad JSON: {e}"))?;
    let label = match v.get("label") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => return Err("missing \"label\"".into()),
    };
    match v.get("timestamp") {
        Some(serde_json::Value::Number(n)) => {
            label_and_stamp(&label, &n.as_f64().map(|x| x.to_string()).unwrap_or_default())
        }
        Some(serde_json::Value::String(s)) => label_and_stamp(&label, s),
        _ => Err("missing \"timestamp\"".into()),
    }
}

fn assemble(
    records: Vec<(usize, std::result::Result<(String, Stamp), String>)>,
    source: &Path,
) -> Result<ParsedEvents> {
    let total = records.len();
    let mut out = ParsedEvents::default();
    let mut dated: Option<bool> = None;
    let mut good = Vec::with_capacity(total);
    for (line, rec) in records {
        match rec {
            Ok((label, stamp)) => {
                let is_date = matches!(stamp, Stamp::Date(_));
                match dated {
                    None => dated = Some(is_date),
                    Some(d) if d != is_date => {
                        out.malformed.push(MalformedRecord {
                            line,
                            reason: "mixes dates and numeric times".into(),
                        });
                        continue;
                    }
                    _ => {}
                }
                good.push((line, label, stamp));
            }
            Err(reason) => out.malformed.push(MalformedRecord { line, reason }),
        }
    }
    if total > 0 && out.malformed.len() as f64 > MAX_MALFORMED_FRACTION * total as f64 {
        return Err(Error::Malformed {
            path: source.to_path_buf(),
            malformed: out.malformed.len(),
            total,
            first: out.malformed[0].to_string(),
        });
    }
    let origin = good
        .iter()
        .filter_map(|(_, _, s)| match s {
            Stamp::Date(d) => Some(d.date()),
            Stamp::Number(_) => None,
        })
        .min();
    out.date_origin = origin;
    let origin = origin.and_then(|d| d.and_hms_opt(0, 0, 0));
    out.events = good
        .into_iter()
        .map(|(line, label, stamp)| {
            let time = match (stamp, origin) {
                (Stamp::Number(x), _) => x,
                (Stamp::Date(d), Some(o)) => (d - o).num_milliseconds() as f64 / 86_400_000.0,
                (Stamp::Date(_), None) => unreachable!("dated records imply an origin"),
            };
            RawEvent { label, time, line }
        })
        .collect();
    Ok(out)
}
