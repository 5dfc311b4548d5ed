//! Posterior inference over the latent log intensity and `(a, σ, l)`.
//!
//! Each iteration applies, in order: an elliptical slice update of `f`, slice
//! updates of `σ` and `l` in the whitened parameterization, and a random-walk
//! Metropolis–Hastings update of the gamma shape `a`.

mod diagnostics;
mod state;
mod updates;

pub use diagnostics::{diagnostics, DiagnosticsReport, TraceSummary};
pub use state::{unit_factor, FlatLikelihood, Likelihood, ModelState};
pub use updates::{ellipse_point, update_a, update_f, update_hypers, EllipseMove, HyperMove, MAX_SHRINKS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::TimeGrid;
use crate::renewal::{EventStream, Hyperparams, PriorSpec, StreamModel};
use crate::warp::DEFAULT_REFINE;

/// Chain length, grid and proposal settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    pub seed: u64,
    pub k: usize,
    pub refine: usize,
    pub mh_step_log_a: f64,
    /// `None` uses [`PriorSpec::default_for`] on the working grid.
    pub prior: Option<PriorSpec>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            samples: 5000,
            thin: 1,
            seed: 0,
            k: 200,
            refine: DEFAULT_REFINE,
            mh_step_log_a: 0.15,
            prior: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::invalid("need at least one retained sample"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thinning stride must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::invalid("grid needs at least 2 nodes"));
        }
        if self.refine == 0 {
            return Err(Error::invalid("refinement factor must be at least 1"));
        }
        if !(self.mh_step_log_a > 0.0 && self.mh_step_log_a.is_finite()) {
            return Err(Error::invalid("shape proposal step must be positive"));
        }
        Ok(())
    }

    pub fn prior_for(&self, grid: &TimeGrid) -> PriorSpec {
        self.prior.unwrap_or_else(|| PriorSpec::default_for(grid))
    }

    pub fn iterations(&self) -> usize {
        self.burn_in + self.samples * self.thin
    }
}

/// Retained draws plus chain-level diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub grid: TimeGrid,
    pub refine: usize,
    /// One row of grid log intensities per retained draw.
    pub f_draws: Vec<Vec<f64>>,
    pub a_draws: Vec<f64>,
    pub sigma_draws: Vec<f64>,
    pub l_draws: Vec<f64>,
    pub loglik_draws: Vec<f64>,
    /// Fraction of accepted shape moves over all iterations.
    pub accept_rate_a: f64,
    /// Mean stepping-out expansions per hyperparameter update.
    pub slice_expansions: f64,
    /// Mean bracket shrinks per latent-function update.
    pub ellipse_shrinks: f64,
    pub wall_time: f64,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.a_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_draws.is_empty()
    }

    /// Draws only, for equality checks that must ignore timing.
    pub fn same_draws(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.f_draws == other.f_draws
            && self.a_draws == other.a_draws
            && self.sigma_draws == other.sigma_draws
            && self.l_draws == other.l_draws
            && self.loglik_draws == other.loglik_draws
            && self.accept_rate_a == other.accept_rate_a
    }
}

/// Starting point: `f` at the prior mean, `σ = 1`, `a = 1`, `l` at the prior mean, each clipped to its support.
pub fn initial_hyperparams(prior: &PriorSpec) -> Hyperparams {
    let clip = |x: f64, (lo, hi): (f64, f64)| x.clamp(lo.exp(), hi.exp());
    Hyperparams::new(
        clip(1.0, prior.log_a_bounds),
        clip(1.0, prior.log_sigma_bounds),
        prior.l_prior.mean().max(prior.l_min),
    )
}

/// Runs the full sampler on one stream.
pub fn run_chain(stream: &EventStream, cfg: &ChainConfig) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let grid = TimeGrid::new(stream.t_min(), stream.t_max(), cfg.k)?;
    let model = StreamModel::new(stream.clone(), grid, cfg.refine)?;
    run_chain_with(&model, cfg)
}

/// Runs the sampler against any likelihood on its grid.
pub fn run_chain_with<L: Likelihood>(lik: &L, cfg: &ChainConfig) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let grid = *lik.grid();
    if grid.k() != cfg.k {
        return Err(Error::invalid(format!(
            "likelihood grid has {} nodes, config asks for {}",
            grid.k(),
            cfg.k
        )));
    }
    let prior = cfg.prior_for(&grid);
    prior.validate(&grid)?;

    let clock = Stopwatch::start();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let at = |iteration: usize| move |e: Error| Error::Chain {
        iteration,
        source: Box::new(e),
    };
    let mut state = ModelState::new(lik, initial_hyperparams(&prior), prior.mean_log_intensity, vec![0.0; grid.k()]).map_err(at(0))?;

    let n = cfg.samples;
    let mut out = PosteriorSamples {
        grid,
        refine: cfg.refine,
        f_draws: Vec::with_capacity(n),
        a_draws: Vec::with_capacity(n),
        sigma_draws: Vec::with_capacity(n),
        l_draws: Vec::with_capacity(n),
        loglik_draws: Vec::with_capacity(n),
        accept_rate_a: 0.0,
        slice_expansions: 0.0,
        ellipse_shrinks: 0.0,
        wall_time: 0.0,
    };
    let (mut accepted, mut expansions, mut shrinks) = (0usize, 0usize, 0usize);
    let total = cfg.iterations();
    for it in 0..total {
        shrinks += update_f(lik, &mut state, &mut rng).map_err(at(it))?.shrinks;
        expansions += update_hypers(lik, &prior, &mut state, &mut rng)
            .map_err(at(it))?
            .expansions;
        if update_a(lik, &prior, cfg.mh_step_log_a, &mut state, &mut rng) {
            accepted += 1;
        }
        if it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0 {
            out.f_draws.push(state.f.clone());
            out.a_draws.push(state.hyper.a);
            out.sigma_draws.push(state.hyper.sigma);
            out.l_draws.push(state.hyper.l);
            out.loglik_draws.push(state.loglik);
        }
    }
    let total = total.max(1) as f64;
    out.accept_rate_a = accepted as f64 / total;
    out.slice_expansions = expansions as f64 / total;
    out.ellipse_shrinks = shrinks as f64 / total;
    out.wall_time = clock.elapsed();
    Ok(out)
}

/// Wall clock; reads zero where no monotonic clock is available (browser wasm).
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}
