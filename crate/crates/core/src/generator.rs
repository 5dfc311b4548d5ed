//! Forward simulation of modulated gamma renewal streams.
//!
//! Warped intervals are drawn directly (`w₀ ~ γ(1,1)`, then `w_i ~ γ(a,1)`) and
//! mapped back to real time through `Λ⁻¹`. No thinning is involved, so bursty
//! shapes (`a < 1`, unbounded hazard at zero) are handled like any other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{chol_factor, sq_exp_covariance, GridFunction, TimeGrid, BASE_JITTER};
use crate::renewal::{EventStream, LengthScalePrior, PriorSpec};
use crate::spline::NaturalSpline;
use crate::warp::CumulativeWarp;

/// Version of [`LAMBDA3_VERTICES`]; bump whenever the table changes.
pub const LAMBDA3_TABLE_VERSION: u32 = 1;

/// Canonical piecewise-linear third test intensity `λ₃/a` on `[0, 100]`, as `(t, value)`.
pub const LAMBDA3_VERTICES: [(f64, f64); 5] =
    [(0.0, 2.0), (25.0, 3.0), (50.0, 1.0), (75.0, 2.5), (100.0, 3.0)];

/// Quadrature mesh intervals used when simulating.
const SIMULATION_MESH: usize = 20_000;

/// The three parametric benchmark intensities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ParametricId {
    /// `2 e^{-t/15} + e^{-((t-25)/10)²}` on `[0, 50]`.
    Lambda1,
    /// `5 sin(t²) + 6` on `[0, 5]`.
    Lambda2,
    /// Piecewise linear through [`LAMBDA3_VERTICES`] on `[0, 100]`.
    Lambda3,
}

impl TryFrom<u8> for ParametricId {
    type Error = Error;

    fn try_from(id: u8) -> Result<Self> {
        match id {
            1 => Ok(ParametricId::Lambda1),
            2 => Ok(ParametricId::Lambda2),
            3 => Ok(ParametricId::Lambda3),
            other => Err(Error::invalid(format!("no parametric intensity {other}"))),
        }
    }
}

impl From<ParametricId> for u8 {
    fn from(id: ParametricId) -> u8 {
        match id {
            ParametricId::Lambda1 => 1,
            ParametricId::Lambda2 => 2,
            ParametricId::Lambda3 => 3,
        }
    }
}

impl ParametricId {
    pub fn window(self) -> (f64, f64) {
        match self {
            ParametricId::Lambda1 => (0.0, 50.0),
            ParametricId::Lambda2 => (0.0, 5.0),
            ParametricId::Lambda3 => (0.0, 100.0),
        }
    }

    fn eval_unchecked(self, t: f64) -> f64 {
        match self {
            ParametricId::Lambda1 => {
                let z = (t - 25.0) / 10.0;
                2.0 * (-t / 15.0).exp() + (-z * z).exp()
            }
            ParametricId::Lambda2 => 5.0 * (t * t).sin() + 6.0,
            ParametricId::Lambda3 => {
                let seg = LAMBDA3_VERTICES
                    .windows(2)
                    .find(|w| t <= w[1].0)
                    .unwrap_or(&LAMBDA3_VERTICES[3..5]);
                let ((t0, v0), (t1, v1)) = (seg[0], seg[1]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Normalized intensity `λ(t)/a` of a parametric benchmark.
pub fn parametric_intensity(id: ParametricId, t: f64) -> Result<f64> {
    let (lo, hi) = id.window();
    if !(t >= lo && t <= hi) {
        return Err(Error::OutOfRange { value: t, lo, hi });
    }
    Ok(id.eval_unchecked(t))
}

/// Where the normalized intensity of a scenario comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensitySource {
    Parametric {
        id: ParametricId,
    },
    /// `log(λ/a)` on a grid, spline-interpolated.
    Explicit {
        log_normalized: GridFunction,
    },
    /// A seeded draw `f ~ GP(0, σ C_l)` with `λ = e^{f + c}`. The offset `c` is zero
    /// unless `target_events` is set, in which case it is chosen so that
    /// `∫ λ/a dt` equals the target.
    GpDraw {
        sigma: f64,
        l: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_events: Option<f64>,
    },
}

/// One synthetic benchmark stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub source: IntensitySource,
    pub a: f64,
    pub window: (f64, f64),
    pub seed: u64,
    /// Length-scale prior to use when inferring this scenario; default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_prior: Option<LengthScalePrior>,
    /// Center the inference prior on the stream's average rate instead of zero.
    #[serde(default)]
    pub center_prior: bool,
}

impl ScenarioSpec {
    /// Inference prior for a simulated stream of this scenario on `grid`.
    pub fn prior_for(&self, grid: &TimeGrid, stream: &EventStream) -> PriorSpec {
        let mut prior = PriorSpec::default_for(grid);
        if let Some(l_prior) = self.l_prior {
            prior = prior.with_l_prior(l_prior);
        }
        if self.center_prior {
            prior = prior.with_empirical_mean(stream);
        }
        prior
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("scenario {}: empty window", self.name)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::invalid(format!("scenario {}: shape must be positive", self.name)));
        }
        match &self.source {
            IntensitySource::Parametric { id } => {
                let (plo, phi) = id.window();
                if lo < plo || hi > phi {
                    return Err(Error::invalid(format!(
                        "scenario {}: window exceeds the intensity's interval [{plo}, {phi}]",
                        self.name
                    )));
                }
            }
            IntensitySource::Explicit { log_normalized } => {
                let g = log_normalized.grid();
                if lo < g.t_min() || hi > g.t_max() {
                    return Err(Error::invalid(format!(
                        "scenario {}: window exceeds the explicit intensity's grid",
                        self.name
                    )));
                }
            }
            IntensitySource::GpDraw {
                sigma,
                l,
                target_events,
            } => {
                if !(*sigma > 0.0 && *l > 0.0) {
                    return Err(Error::invalid(format!(
                        "scenario {}: GP parameters must be positive",
                        self.name
                    )));
                }
                if let Some(n) = target_events {
                    if !(*n > 0.0) {
                        return Err(Error::invalid(format!(
                            "scenario {}: target event count must be positive",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds a bursty-to-regular scenario whose log intensity is a seeded GP draw.
pub fn gp_scenario(sigma: f64, l: f64, a: f64, window: (f64, f64), seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        name: format!("gp-a-{a:04.1}-ell-{l:.1}-t-{:04.0}-seed-{seed}", window.1 - window.0),
        source: IntensitySource::GpDraw {
            sigma,
            l,
            target_events: None,
        },
        a,
        window,
        seed,
        l_prior: None,
        center_prior: false,
    }
}

/// Parameters the stream was generated with; `σ` and `l` only exist for GP sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub a: f64,
    pub sigma: Option<f64>,
    pub l: Option<f64>,
}

/// Ground-truth normalized intensity `λ/a` of a simulated stream.
#[derive(Debug, Clone)]
pub enum TruthCurve {
    Parametric(ParametricId),
    /// `exp(spline)` of a log-normalized grid function.
    LogSpline(NaturalSpline),
}

impl TruthCurve {
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            TruthCurve::Parametric(id) => parametric_intensity(*id, t),
            TruthCurve::LogSpline(s) => Ok(s.eval(t)?.exp()),
        }
    }

    /// Samples the curve on every node of `grid`.
    pub fn on_grid(&self, grid: &TimeGrid) -> Result<GridFunction> {
        let values = grid.nodes().into_iter().map(|t| self.eval(t)).collect::<Result<_>>()?;
        GridFunction::new(*grid, values)
    }
}

/// A simulated stream together with the truth it was drawn from.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub spec: ScenarioSpec,
    pub truth: TruthCurve,
    pub params: TrueParams,
    pub stream: EventStream,
}

impl Simulation {
    /// Truth `λ/a` on an evaluation grid.
    pub fn truth_on(&self, grid: &TimeGrid) -> Result<GridFunction> {
        self.truth.on_grid(grid)
    }

    /// `∫ λ/a dt` over the window (the expected count, up to end effects).
    pub fn expected_count(&self) -> Result<f64> {
        let (lo, hi) = self.spec.window;
        let mesh = TimeGrid::new(lo, hi, SIMULATION_MESH + 1)?;
        let w = CumulativeWarp::from_samples(lo, hi, self.truth.on_grid(&mesh)?.into_values())?;
        Ok(w.total())
    }
}

/// Number of nodes for a GP source draw: at least eight per length scale.
/// `n` independent standard normal variates from a seeded stream.
pub fn standard_normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn gp_source_nodes(span: f64, l: f64) -> usize {
    ((8.0 * span / l).ceil() as usize + 1).clamp(50, 1500)
}

fn build_truth(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<TruthCurve> {
    let (lo, hi) = spec.window;
    Ok(match &spec.source {
        IntensitySource::Parametric { id } => TruthCurve::Parametric(*id),
        IntensitySource::Explicit { log_normalized } => {
            TruthCurve::LogSpline(NaturalSpline::new(log_normalized))
        }
        IntensitySource::GpDraw {
            sigma,
            l,
            target_events,
        } => {
            let grid = TimeGrid::new(lo, hi, gp_source_nodes(hi - lo, *l))?;
            let factor = chol_factor(&sq_exp_covariance(&grid, *sigma, *l)?, BASE_JITTER * sigma)?;
            let noise: Vec<f64> = (0..grid.k()).map(|_| StandardNormal.sample(&mut *rng)).collect();
            let f = factor.mul_vec(&noise);
            let mut log_norm: Vec<f64> = f.iter().map(|v| v - spec.a.ln()).collect();
            if let Some(target) = target_events {
                let mesh_spline = NaturalSpline::from_values(grid, &log_norm);
                let mesh = TimeGrid::new(lo, hi, SIMULATION_MESH + 1)?;
                let values = mesh.nodes().iter().map(|&t| mesh_spline.eval_unchecked(t).exp()).collect();
                let count = CumulativeWarp::from_samples(lo, hi, values)?.total();
                let shift = (target / count).ln();
                log_norm.iter_mut().for_each(|v| *v += shift);
            }
            TruthCurve::LogSpline(NaturalSpline::new(&GridFunction::new(grid, log_norm)?))
        }
    })
}

/// Simulates one stream from `spec`; deterministic given `spec.seed`.
pub fn simulate_stream(spec: &ScenarioSpec) -> Result<Simulation> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth = build_truth(spec, &mut rng)?;
    let (lo, hi) = spec.window;

    let mesh = TimeGrid::new(lo, hi, SIMULATION_MESH + 1)?;
    let lambda = truth
        .on_grid(&mesh)?
        .into_values()
        .into_iter()
        .map(|v| spec.a * v)
        .collect();
    let warp = CumulativeWarp::from_samples(lo, hi, lambda)?;
    let total = warp.total();

    let interval = Gamma::new(spec.a, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let mut times: Vec<f64> = Vec::new();
    let mut u: f64 = Exp1.sample(&mut rng);
    while u < total {
        let t = warp.inverse_warp(u)?;
        // Intervals far below the mesh resolution can map onto the same time.
        if t > lo && t < hi && times.last().is_none_or(|&prev| t > prev) {
            times.push(t);
        }
        u += interval.sample(&mut rng);
    }

    let (sigma, l) = match spec.source {
        IntensitySource::GpDraw { sigma, l, .. } => (Some(sigma), Some(l)),
        _ => (None, None),
    };
    Ok(Simulation {
        spec: spec.clone(),
        truth,
        params: TrueParams { a: spec.a, sigma, l },
        stream: EventStream::new(spec.name.clone(), lo, hi, times)?,
    })
}

/// The synthetic benchmark scenarios, each with shape `a = 3` except the bursty pair.
pub fn benchmark_scenarios(seed: u64) -> Vec<ScenarioSpec> {
    let parametric = |name: &str, id: ParametricId, l_prior| ScenarioSpec {
        name: name.to_string(),
        source: IntensitySource::Parametric { id },
        a: 3.0,
        window: id.window(),
        seed,
        l_prior,
        center_prior: false,
    };
    let mut out = vec![
        parametric("lambda1", ParametricId::Lambda1, None),
        parametric(
            "lambda2",
            ParametricId::Lambda2,
            Some(LengthScalePrior::lognormal_with_mode(0.2, LAMBDA2_L_PRIOR_SD)),
        ),
        parametric("lambda3", ParametricId::Lambda3, None),
    ];
    out.extend(bursty_scenarios(seed));
    out
}

/// Log-space spread of the log-normal length-scale prior used for `λ₂`.
pub const LAMBDA2_L_PRIOR_SD: f64 = 0.5;

/// GP magnitude of the bursty scenarios: gives well over two decades of dynamic range at `l = 70`.
pub const BURSTY_SIGMA: f64 = 2.0;

/// The high-count and low-count bursty scenarios (`a = 0.5`, `l = 70`, span 3000).
pub fn bursty_scenarios(seed: u64) -> Vec<ScenarioSpec> {
    [("bursty-n236", 236.0), ("bursty-n30", 30.0)]
        .into_iter()
        .map(|(name, n)| ScenarioSpec {
            name: name.to_string(),
            source: IntensitySource::GpDraw {
                sigma: BURSTY_SIGMA,
                l: 70.0,
                target_events: Some(n),
            },
            a: 0.5,
            window: (0.0, 3000.0),
            seed,
            l_prior: None,
            center_prior: true,
        })
        .collect()
}

/// A list of scenarios, stored as TOML.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRegistry {
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioSpec>,
}

impl ScenarioRegistry {
    pub fn from_toml(text: &str) -> Result<Self> {
        let reg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for s in &reg.scenarios {
            s.validate()?;
        }
        Ok(reg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<&ScenarioSpec> {
        self.scenarios.iter().find(|s| s.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parametric_point_values() {
        let want = 2.0 * (-5.0f64 / 3.0).exp() + 1.0;
        assert!((parametric_intensity(ParametricId::Lambda1, 25.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 1.3778).abs() < 1e-4);
        assert_eq!(parametric_intensity(ParametricId::Lambda2, 0.0).unwrap(), 6.0);
        assert_eq!(parametric_intensity(ParametricId::Lambda3, 50.0).unwrap(), 1.0);
        assert_eq!(parametric_intensity(ParametricId::Lambda3, 100.0).unwrap(), 3.0);
        assert!((parametric_intensity(ParametricId::Lambda3, 12.5).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn parametric_out_of_interval() {
        assert!(matches!(
            parametric_intensity(ParametricId::Lambda2, 5.5),
            Err(Error::OutOfRange { .. })
        ));
        assert!(parametric_intensity(ParametricId::Lambda1, -0.1).is_err());
    }

    #[test]
    fn deterministic_and_inside_window() {
        let spec = &benchmark_scenarios(5)[0];
        let a = simulate_stream(spec).unwrap();
        let b = simulate_stream(spec).unwrap();
        assert_eq!(a.stream, b.stream);
        assert!(a.stream.times().iter().all(|&t| t > 0.0 && t < 50.0));
        assert!(!a.stream.is_empty());
    }

    #[test]
    fn gp_scenario_regimes() {
        let s = gp_scenario(1.0, 70.0, 0.5, (0.0, 3000.0), 1);
        assert_eq!(s.name, "gp-a-00.5-ell-70.0-t-3000-seed-1");
        assert!(matches!(s.source, IntensitySource::GpDraw { .. }));
        let poisson = gp_scenario(1.0, 10.0, 1.0, (0.0, 100.0), 2);
        let sim = simulate_stream(&poisson).unwrap();
        assert_eq!(sim.params.a, 1.0);
        assert_eq!(sim.params.l, Some(10.0));
    }

    #[test]
    fn target_count_rescales_gp_draw() {
        for spec in bursty_scenarios(3) {
            let sim = simulate_stream(&spec).unwrap();
            let IntensitySource::GpDraw { target_events: Some(n), .. } = spec.source else {
                unreachable!()
            };
            assert!((sim.expected_count().unwrap() / n - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn registry_toml_round_trip() {
        let reg = ScenarioRegistry {
            scenarios: benchmark_scenarios(9),
        };
        let text = reg.to_toml().unwrap();
        assert_eq!(ScenarioRegistry::from_toml(&text).unwrap(), reg);
        assert!(text.contains("kind = \"parametric\""));
    }

    #[test]
    fn empty_stream_is_valid() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let spec = ScenarioSpec {
            name: "quiet".into(),
            source: IntensitySource::Explicit {
                log_normalized: GridFunction::constant(g, -30.0).unwrap(),
            },
            a: 1.0,
            window: (0.0, 1.0),
            seed: 0,
            l_prior: None,
            center_prior: false,
        };
        assert!(simulate_stream(&spec).unwrap().stream.is_empty());
    }
}
