use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use mrp_core::evaluation::{run_scenario, write_benchmark_table, BenchmarkRow};
use mrp_core::generator::{benchmark_scenarios, simulate_stream, ScenarioRegistry, ScenarioSpec};
use mrp_core::io::{self, EventFormat, Grouped, GroupingOptions, RunManifest};
use mrp_core::mcmc::run_chain;
use mrp_core::{make_grid, ChainConfig, EventStream};

use crate::artifacts::{self, Stems, StreamOutput, TruthRecord, MANIFEST, TRUTH_INDEX};
use crate::options::{ChainArgs, OutArgs};

/// Scenario list: a registry file if given, else the built-in benchmark set,
/// optionally filtered by name.
fn scenarios(registry: Option<&Path>, names: &[String], seed: u64) -> Result<Vec<ScenarioSpec>> {
    let all = match registry {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioRegistry::from_toml(&text)?.scenarios
        }
        None => benchmark_scenarios(seed),
    };
    if names.is_empty() {
        return Ok(all);
    }
    names
        .iter()
        .map(|n| {
            all.iter().find(|s| &s.name == n).cloned().with_context(|| {
                let known: Vec<&str> = all.iter().map(|s| s.name.as_str()).collect();
                format!("unknown scenario {n:?}; known: {}", known.join(", "))
            })
        })
        .collect()
}

pub fn generate(registry: Option<&Path>, names: &[String], seed: u64, k: usize, out: &OutArgs) -> Result<()> {
    let dir = out.ensure()?;
    let specs = scenarios(registry, names, seed)?;
    let mut streams = Vec::new();
    let mut index = BTreeMap::new();
    let mut stems = Stems::default();
    for spec in &specs {
        let sim = simulate_stream(spec).with_context(|| format!("scenario {}", spec.name))?;
        let grid = make_grid(spec.window.0, spec.window.1, k)?;
        let truth = sim.truth_on(&grid)?;
        let truth_file = format!("{}.truth.csv", stems.claim(&spec.name));
        io::write_curve(&dir.join(&truth_file), &grid.nodes(), truth.values())?;
        let expected = sim.expected_count()?;
        println!(
            "{}: {} events (expected {:.1}) on [{}, {}]",
            spec.name,
            sim.stream.len(),
            expected,
            spec.window.0,
            spec.window.1
        );
        index.insert(
            spec.name.clone(),
            TruthRecord {
                a: sim.params.a,
                sigma: sim.params.sigma,
                l: sim.params.l,
                n_events: sim.stream.len(),
                expected_events: expected,
                window: spec.window,
                truth_file,
            },
        );
        streams.push(sim.stream);
    }
    io::write_events(&dir.join("events.csv"), &streams)?;
    io::write_atomic(&dir.join(TRUTH_INDEX), serde_json::to_string_pretty(&index)?.as_bytes())?;
    let registry = ScenarioRegistry { scenarios: specs };
    io::write_atomic(&dir.join("scenarios.toml"), registry.to_toml()?.as_bytes())?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn new_manifest(config: ChainConfig) -> RunManifest {
    let mut m = RunManifest::new(config);
    m.tool = env!("CARGO_BIN_NAME").to_string();
    m.version = env!("CARGO_PKG_VERSION").to_string();
    m
}

/// How raw events become streams.
pub enum Grouping {
    Label,
    Icd9,
    Rules(PathBuf),
}

impl std::str::FromStr for Grouping {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "label" => Grouping::Label,
            "icd9" => Grouping::Icd9,
            path => Grouping::Rules(PathBuf::from(path)),
        })
    }
}

pub struct InferArgs {
    pub events: PathBuf,
    pub format: Option<EventFormat>,
    pub grouping: Grouping,
    pub window: Option<(f64, f64)>,
    pub resolution: f64,
    pub plot: bool,
}

/// Returns whether every stream succeeded.
pub fn infer(args: &InferArgs, chain: &ChainArgs, out: &OutArgs) -> Result<bool> {
    chain.validate()?;
    let format = args.format.unwrap_or_else(|| EventFormat::from_path(&args.events));
    let parsed = io::parse_events(&args.events, format)?;
    for m in &parsed.malformed {
        eprintln!("warning: {}: skipped {m}", args.events.display());
    }
    let opts = GroupingOptions {
        window: args.window,
        resolution: args.resolution,
    };
    let grouped: Grouped = match &args.grouping {
        Grouping::Label => io::group_by_label(&parsed.events, &opts)?,
        Grouping::Icd9 => io::group_by_ranges(&parsed.events, &io::default_icd9_rules(), &opts)?,
        Grouping::Rules(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            io::group_by_ranges(&parsed.events, &io::parse_rules_toml(&text)?, &opts)?
        }
    };
    if grouped.streams.is_empty() {
        bail!("{}: no events to infer from", args.events.display());
    }
    let dir = out.ensure()?;
    if !grouped.ungrouped.is_empty() {
        let mut text = String::from("label,timestamp,line\n");
        for e in &grouped.ungrouped {
            text.push_str(&format!("{},{},{}\n", e.label, e.time, e.line));
        }
        io::write_atomic(&dir.join("ungrouped.csv"), text.as_bytes())?;
        eprintln!("warning: {} events matched no division (see ungrouped.csv)", grouped.ungrouped.len());
    }
    if grouped.outside_window > 0 {
        eprintln!("warning: {} events fell outside the window", grouped.outside_window);
    }

    let clock = Instant::now();
    let base = chain.config();
    let mut stems = Stems::default();
    let jobs: Vec<_> = grouped
        .streams
        .iter()
        .enumerate()
        .map(|(i, s)| (stems.claim(s.label()), base.seed.wrapping_add(i as u64), s))
        .collect();
    let results: Vec<_> = chain.pool()?.install(|| {
        jobs.par_iter()
            .map(|(stem, seed, stream)| {
                let grid = make_grid(stream.t_min(), stream.t_max(), base.k)?;
                let prior = chain.default_prior(&grid, stream);
                let cfg = ChainConfig {
                    seed: *seed,
                    prior: Some(prior),
                    ..base.clone()
                };
                eprintln!("{}: {} events, chain of {} iterations", stream.label(), stream.len(), cfg.iterations());
                let samples = run_chain(stream, &cfg).with_context(|| format!("stream {}", stream.label()))?;
                artifacts::write_stream(
                    dir,
                    &StreamOutput {
                        stem,
                        seed: *seed,
                        stream,
                        samples: &samples,
                        prior,
                        truth: None,
                        true_a: None,
                    },
                )
            })
            .collect()
    });
    let mut manifest = new_manifest(base);
    manifest.date_origin = parsed.date_origin.map(|d| d.to_string());
    for ((_, _, stream), r) in jobs.iter().zip(results) {
        match r {
            Ok(entry) => manifest.streams.push(entry),
            Err(e) => {
                eprintln!("error: {e:#}");
                manifest.failures.insert(stream.label().to_string(), format!("{e:#}"));
            }
        }
    }
    if args.plot {
        for entry in &mut manifest.streams {
            artifacts::plot_stream(dir, entry, None, dir)?;
        }
    }
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&dir.join(MANIFEST))?;
    for s in &manifest.streams {
        let (lo, med, hi) = s.a_quantiles;
        println!("{}: n={} a={med:.3} [{lo:.3}, {hi:.3}]", s.label, s.n_events);
    }
    Ok(manifest.failures.is_empty())
}

pub struct EvaluateArgs {
    pub registry: Option<PathBuf>,
    pub scenarios: Vec<String>,
    pub seeds: Vec<u64>,
    pub plot: bool,
}

/// Returns whether every scenario succeeded.
pub fn evaluate(args: &EvaluateArgs, chain: &ChainArgs, out: &OutArgs) -> Result<bool> {
    chain.validate()?;
    let dir = out.ensure()?;
    let mut specs = Vec::new();
    for &seed in &args.seeds {
        for mut s in scenarios(args.registry.as_deref(), &args.scenarios, seed)? {
            s.seed = seed;
            specs.push(s);
        }
    }
    let base = chain.config();
    let mut stems = Stems::default();
    let labelled: Vec<(String, String, ScenarioSpec)> = specs
        .into_iter()
        .map(|s| {
            let label = format!("{}-seed-{}", s.name, s.seed);
            (stems.claim(&label), label, s)
        })
        .collect();
    let clock = Instant::now();
    let runs: Vec<_> = chain.pool()?.install(|| {
        labelled
            .par_iter()
            .map(|(stem, label, spec)| -> Result<_> {
                let mut cfg = ChainConfig {
                    seed: spec.seed,
                    ..base.clone()
                };
                if chain.overrides_prior() {
                    let sim = simulate_stream(spec)?;
                    let grid = make_grid(spec.window.0, spec.window.1, cfg.k)?;
                    cfg.prior = Some(chain.prior(spec.prior_for(&grid, &sim.stream), &sim.stream));
                }
                eprintln!("{label}: chain of {} iterations", cfg.iterations());
                let run = run_scenario(spec, &cfg).with_context(|| format!("scenario {label}"))?;
                let stream = EventStream::new(label.clone(), run.stream.t_min(), run.stream.t_max(), run.stream.times().to_vec())?;
                let prior = cfg.prior.unwrap_or_else(|| spec.prior_for(&run.samples.grid, &run.stream));
                let entry = artifacts::write_stream(
                    dir,
                    &StreamOutput {
                        stem,
                        seed: spec.seed,
                        stream: &stream,
                        samples: &run.samples,
                        prior,
                        truth: Some(&run.truth),
                        true_a: Some(spec.a),
                    },
                )?;
                Ok((run.report, entry))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut manifest = new_manifest(base);
    for ((_, label, spec), r) in labelled.iter().zip(runs) {
        match r {
            Ok((report, entry)) => {
                let (lo, med, hi) = report.a_quantiles;
                println!(
                    "{label}: n={} rms={:.4} lp={:.2} coverage={:.3} a={med:.3} [{lo:.3}, {hi:.3}] (true {}) {:.1}s",
                    report.n_events, report.rms, report.lp, report.coverage, spec.a, report.runtime_s
                );
                rows.push(BenchmarkRow {
                    scenario: spec.name.clone(),
                    seed: spec.seed,
                    outcome: Ok(report),
                });
                manifest.streams.push(entry);
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                rows.push(BenchmarkRow {
                    scenario: spec.name.clone(),
                    seed: spec.seed,
                    outcome: Err(format!("{e:#}")),
                });
                manifest.failures.insert(label.clone(), format!("{e:#}"));
            }
        }
    }
    let mut table = Vec::new();
    write_benchmark_table(&rows, &mut table)?;
    io::write_atomic(&dir.join("benchmark.csv"), &table)?;
    if args.plot {
        for entry in &mut manifest.streams {
            artifacts::plot_stream(dir, entry, None, dir)?;
        }
    }
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&dir.join(MANIFEST))?;
    Ok(manifest.failures.is_empty())
}

pub fn plot(run_dir: &Path, truth_dir: Option<&Path>, out_dir: Option<&Path>) -> Result<()> {
    let manifest_path = run_dir.join(MANIFEST);
    let mut manifest = RunManifest::read(&manifest_path)?;
    let out_dir = out_dir.unwrap_or(run_dir);
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    if manifest.streams.is_empty() {
        bail!("{}: no streams to plot", manifest_path.display());
    }
    for entry in &mut manifest.streams {
        let path = artifacts::plot_stream(run_dir, entry, truth_dir, out_dir)?;
        println!("{}", path.display());
    }
    if out_dir == run_dir {
        manifest.write(&manifest_path)?;
    }
    Ok(())
}
