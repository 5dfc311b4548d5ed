//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string so the page needs no extra glue. The plain
//! `*_json` functions hold the logic and are what native tests call.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use mrp_core::generator::{benchmark_scenarios, simulate_stream};
use mrp_core::mcmc::{run_chain, unit_factor};
use mrp_core::{gp_prior_draw, make_grid, summarize, ChainConfig, EventStream, PriorSpec};

#[derive(Serialize)]
struct Simulated {
    name: String,
    a: f64,
    window: (f64, f64),
    times: Vec<f64>,
    truth_t: Vec<f64>,
    truth_v: Vec<f64>,
}

#[derive(Serialize)]
struct Inferred {
    time: Vec<f64>,
    median: Vec<f64>,
    q025: Vec<f64>,
    q975: Vec<f64>,
    a_draws: Vec<f64>,
    a_quantiles: (f64, f64, f64),
    accept_rate_a: f64,
}

#[derive(Serialize)]
struct PriorDraw {
    time: Vec<f64>,
    intensity: Vec<f64>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Names of the built-in scenarios.
pub fn scenario_names() -> Vec<String> {
    benchmark_scenarios(0).into_iter().map(|s| s.name).collect()
}

pub fn simulate_json(scenario: &str, seed: u32) -> Result<String, String> {
    let spec = benchmark_scenarios(u64::from(seed))
        .into_iter()
        .find(|s| s.name == scenario)
        .ok_or_else(|| format!("unknown scenario {scenario:?}"))?;
    let sim = simulate_stream(&spec).map_err(|e| e.to_string())?;
    let grid = make_grid(spec.window.0, spec.window.1, 400).map_err(|e| e.to_string())?;
    let truth = sim.truth_on(&grid).map_err(|e| e.to_string())?;
    to_json(&Simulated {
        name: spec.name,
        a: spec.a,
        window: spec.window,
        times: sim.stream.times().to_vec(),
        truth_t: grid.nodes(),
        truth_v: truth.into_values(),
    })
}

/// Runs a short chain. `center` puts the prior mean at the average event rate,
/// which sparse, long windows need.
#[allow(clippy::too_many_arguments)]
pub fn infer_json(
    times: &[f64],
    t_min: f64,
    t_max: f64,
    k: usize,
    burn_in: usize,
    samples: usize,
    seed: u32,
    center: bool,
) -> Result<String, String> {
    let stream = EventStream::new("demo", t_min, t_max, times.to_vec()).map_err(|e| e.to_string())?;
    let grid = make_grid(t_min, t_max, k).map_err(|e| e.to_string())?;
    let mut prior = PriorSpec::default_for(&grid);
    if center {
        prior = prior.with_empirical_mean(&stream);
    }
    let cfg = ChainConfig {
        burn_in,
        samples,
        seed: u64::from(seed),
        k,
        prior: Some(prior),
        ..ChainConfig::default()
    };
    let draws = run_chain(&stream, &cfg).map_err(|e| e.to_string())?;
    let s = summarize(&draws).map_err(|e| e.to_string())?;
    to_json(&Inferred {
        time: grid.nodes(),
        median: s.median,
        q025: s.q025,
        q975: s.q975,
        a_draws: draws.a_draws.clone(),
        a_quantiles: s.a_quantiles,
        accept_rate_a: draws.accept_rate_a,
    })
}

/// One prior draw of the intensity `exp(f)` with `f ~ GP(0, σ·exp(-(Δt/l)²))` on `[0, span]`.
pub fn prior_draw_json(sigma: f64, l: f64, span: f64, k: usize, seed: u32) -> Result<String, String> {
    use mrp_core::generator::standard_normals;
    if !(sigma > 0.0) {
        return Err("sigma must be positive".into());
    }
    let grid = make_grid(0.0, span, k).map_err(|e| e.to_string())?;
    let factor = unit_factor(&grid, l).map_err(|e| e.to_string())?;
    let noise: Vec<f64> = standard_normals(u64::from(seed), k)
        .into_iter()
        .map(|z| sigma.sqrt() * z)
        .collect();
    let f = gp_prior_draw(&grid, &factor, &noise).map_err(|e| e.to_string())?;
    to_json(&PriorDraw {
        time: grid.nodes(),
        intensity: f.values().iter().map(|v| v.exp()).collect(),
    })
}

#[wasm_bindgen(js_name = scenarioNames)]
pub fn scenario_names_js() -> String {
    to_json(&scenario_names()).unwrap_or_default()
}

#[wasm_bindgen]
pub fn simulate(scenario: &str, seed: u32) -> Result<String, JsError> {
    simulate_json(scenario, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn infer(
    times: &[f64],
    t_min: f64,
    t_max: f64,
    k: usize,
    burn_in: usize,
    samples: usize,
    seed: u32,
    center: bool,
) -> Result<String, JsError> {
    infer_json(times, t_min, t_max, k, burn_in, samples, seed, center).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = priorDraw)]
pub fn prior_draw(sigma: f64, l: f64, span: f64, k: usize, seed: u32) -> Result<String, JsError> {
    prior_draw_json(sigma, l, span, k, seed).map_err(|e| JsError::new(&e))
}
