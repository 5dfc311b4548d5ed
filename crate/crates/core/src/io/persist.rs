//! On-disk artifacts: per-stream summary tables, draw tables, truth curves, event
//! files and a JSON run manifest. Every file is written to a temporary sibling and
//! renamed into place, so concurrent runs never leave partial output behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::PosteriorSummary;
use crate::mcmc::{ChainConfig, DiagnosticsReport, PosteriorSamples};
use crate::renewal::{EventStream, PriorSpec};

pub const SUMMARY_HEADER: [&str; 5] = ["time", "mean", "median", "q025", "q975"];
pub const DRAWS_HEADER: [&str; 4] = ["a", "sigma", "l", "loglik"];

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(
        ".{name}.{}.{}.tmp",
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Filesystem-safe stem for a stream label.
pub fn file_stem(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("stream{s}")
    } else {
        s
    }
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

/// Reads a headed numeric table, checking the header.
fn read_numeric_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    let got: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    if got != header {
        return Err(bad(format!("expected columns {header:?}, found {got:?}")));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (c, field) in cols.iter_mut().zip(rec.iter()) {
            c.push(field.trim().parse::<f64>().map_err(|e| bad(format!("{field:?}: {e}")))?);
        }
    }
    Ok(cols)
}

/// Posterior bands read back from a summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub time: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q025: Vec<f64>,
    pub q975: Vec<f64>,
}

pub fn write_summary(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    let rows = (0..summary.grid.k()).map(|j| {
        [
            summary.grid.node(j),
            summary.mean[j],
            summary.median[j],
            summary.q025[j],
            summary.q975[j],
        ]
        .iter()
        .map(|x| x.to_string())
        .collect()
    });
    write_atomic(path, &csv_bytes(&SUMMARY_HEADER, rows)?)
}

pub fn read_summary(path: &Path) -> Result<SummaryTable> {
    let mut c = read_numeric_csv(path, &SUMMARY_HEADER)?.into_iter();
    let mut next = || c.next().unwrap_or_default();
    Ok(SummaryTable {
        time: next(),
        mean: next(),
        median: next(),
        q025: next(),
        q975: next(),
    })
}

/// Scalar draws of a chain, one row per retained sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawsTable {
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
    pub l: Vec<f64>,
    pub loglik: Vec<f64>,
}

pub fn write_draws(path: &Path, samples: &PosteriorSamples) -> Result<()> {
    let rows = (0..samples.len()).map(|i| {
        [
            samples.a_draws[i],
            samples.sigma_draws[i],
            samples.l_draws[i],
            samples.loglik_draws[i],
        ]
        .iter()
        .map(|x| x.to_string())
        .collect()
    });
    write_atomic(path, &csv_bytes(&DRAWS_HEADER, rows)?)
}

pub fn read_draws(path: &Path) -> Result<DrawsTable> {
    let mut c = read_numeric_csv(path, &DRAWS_HEADER)?.into_iter();
    let mut next = || c.next().unwrap_or_default();
    Ok(DrawsTable {
        a: next(),
        sigma: next(),
        l: next(),
        loglik: next(),
    })
}

/// A `time,value` curve, e.g. a ground-truth normalized intensity.
pub fn write_curve(path: &Path, time: &[f64], value: &[f64]) -> Result<()> {
    if time.len() != value.len() {
        return Err(Error::invalid("curve columns differ in length"));
    }
    let rows = time.iter().zip(value).map(|(t, v)| vec![t.to_string(), v.to_string()]);
    write_atomic(path, &csv_bytes(&["time", "value"], rows)?)
}

pub fn read_curve(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut c = read_numeric_csv(path, &["time", "value"])?.into_iter();
    Ok((c.next().unwrap_or_default(), c.next().unwrap_or_default()))
}

/// Writes streams as `label,timestamp` rows at full precision, so they parse back
/// bit-identically.
pub fn write_events(path: &Path, streams: &[EventStream]) -> Result<()> {
    let rows = streams
        .iter()
        .flat_map(|s| s.times().iter().map(move |t| vec![s.label().to_string(), t.to_string()]));
    write_atomic(path, &csv_bytes(&["label", "timestamp"], rows)?)
}

/// Everything needed to interpret the artifacts of one inferred stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamManifest {
    pub label: String,
    pub seed: u64,
    pub n_events: usize,
    pub window: (f64, f64),
    pub prior: PriorSpec,
    pub a_quantiles: (f64, f64, f64),
    pub diagnostics: DiagnosticsReport,
    /// Artifact kind (`summary`, `draws`, `truth`, `plot`) → file name relative to the manifest.
    pub files: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: ChainConfig,
    /// ISO date of day zero when inputs carried dates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_origin: Option<String>,
    pub streams: Vec<StreamManifest>,
    /// Streams whose chain failed, with the error.
    #[serde(default)]
    pub failures: BTreeMap<String, String>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(config: ChainConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            date_origin: None,
            streams: Vec::new(),
            failures: BTreeMap::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
