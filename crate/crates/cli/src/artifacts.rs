//! Per-stream output files shared by `infer`, `evaluate` and `plot`.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use mrp_core::io::{self, PlotData, StreamManifest};
use mrp_core::mcmc::diagnostics;
use mrp_core::{summarize, EventStream, GridFunction, PosteriorSamples, PriorSpec};

pub const MANIFEST: &str = "manifest.json";
pub const TRUTH_INDEX: &str = "truth.json";

/// Ground truth of one generated stream, as recorded by `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub a: f64,
    pub sigma: Option<f64>,
    pub l: Option<f64>,
    pub n_events: usize,
    pub expected_events: f64,
    pub window: (f64, f64),
    pub truth_file: String,
}

pub fn read_truth_index(dir: &Path) -> Result<BTreeMap<String, TruthRecord>> {
    let path = dir.join(TRUTH_INDEX);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Hands out file stems that stay unique within one run.
#[derive(Default)]
pub struct Stems(HashSet<String>);

impl Stems {
    pub fn claim(&mut self, label: &str) -> String {
        let base = io::file_stem(label);
        let mut stem = base.clone();
        let mut i = 2;
        while !self.0.insert(stem.clone()) {
            stem = format!("{base}-{i}");
            i += 1;
        }
        stem
    }
}

pub struct StreamOutput<'a> {
    pub stem: &'a str,
    pub seed: u64,
    pub stream: &'a EventStream,
    pub samples: &'a PosteriorSamples,
    pub prior: PriorSpec,
    pub truth: Option<&'a GridFunction>,
    pub true_a: Option<f64>,
}

/// Writes summary, draws and (when known) truth tables; returns the manifest entry.
pub fn write_stream(dir: &Path, out: &StreamOutput<'_>) -> Result<StreamManifest> {
    let summary = summarize(out.samples)?;
    let mut files = BTreeMap::new();
    let summary_file = format!("{}.summary.csv", out.stem);
    io::write_summary(&dir.join(&summary_file), &summary)?;
    files.insert("summary".to_string(), summary_file);
    let draws_file = format!("{}.draws.csv", out.stem);
    io::write_draws(&dir.join(&draws_file), out.samples)?;
    files.insert("draws".to_string(), draws_file);
    if let Some(truth) = out.truth {
        let truth_file = format!("{}.truth.csv", out.stem);
        io::write_curve(&dir.join(&truth_file), &truth.grid().nodes(), truth.values())?;
        files.insert("truth".to_string(), truth_file);
    }
    Ok(StreamManifest {
        label: out.stream.label().to_string(),
        seed: out.seed,
        n_events: out.stream.len(),
        window: (out.stream.t_min(), out.stream.t_max()),
        prior: out.prior,
        a_quantiles: summary.a_quantiles,
        diagnostics: diagnostics(out.samples),
        files,
        true_a: out.true_a,
    })
}

/// Renders one stream's SVG next to its summary. A truth curve is taken from the
/// manifest entry, else from `truth_dir` (a `generate` output directory).
pub fn plot_stream(
    run_dir: &Path,
    entry: &mut StreamManifest,
    truth_dir: Option<&Path>,
    out_dir: &Path,
) -> Result<PathBuf> {
    let summary_file = entry.files.get("summary").context("manifest entry has no summary file")?;
    let table = io::read_summary(&run_dir.join(summary_file))?;
    let a_draws = match entry.files.get("draws") {
        Some(f) => io::read_draws(&run_dir.join(f))?.a,
        None => Vec::new(),
    };
    let mut truth = match entry.files.get("truth") {
        Some(f) => Some(io::read_curve(&run_dir.join(f))?),
        None => None,
    };
    let mut true_a = entry.true_a;
    if let Some(dir) = truth_dir {
        if truth.is_none() || true_a.is_none() {
            let index = read_truth_index(dir)?;
            if let Some(rec) = index.get(&entry.label) {
                true_a = true_a.or(Some(rec.a));
                if truth.is_none() {
                    truth = Some(io::read_curve(&dir.join(&rec.truth_file))?);
                }
            }
        }
    }
    let data = PlotData {
        title: entry.label.clone(),
        time: table.time,
        median: table.median,
        q025: table.q025,
        q975: table.q975,
        truth,
        a_draws,
        true_a,
    };
    let stem = Path::new(summary_file)
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(".summary.csv"))
        .map(str::to_string)
        .unwrap_or_else(|| io::file_stem(&entry.label));
    let svg_file = format!("{stem}.svg");
    let path = out_dir.join(&svg_file);
    io::write_atomic(&path, io::render_svg(&data)?.as_bytes())?;
    if out_dir == run_dir {
        entry.files.insert("plot".to_string(), svg_file);
    }
    Ok(path)
}
