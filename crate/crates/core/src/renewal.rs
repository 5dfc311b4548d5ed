//! The modulated gamma renewal model: interval density, stream likelihood with
//! partially observed end intervals, hyperparameter priors.
//!
//! Event times are mapped through `Λ` into warped intervals. Interior intervals
//! (between consecutive events) are scored under `γ(a, 1)` together with the
//! Jacobian `λ(t_i)` of the later event; the leading interval from `t_min` and the
//! trailing interval to `t_max` are only partially observed and are scored by the
//! survival `e^{-w}` of a unit exponential.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gp::{GridFunction, TimeGrid};
use crate::spline::NaturalSpline;
use crate::warp::{cumulative_from_spline, CumulativeWarp, DEFAULT_REFINE};

/// Warped intervals below this are floored (coincident events).
pub const MIN_WARPED_INTERVAL: f64 = 1e-12;

/// Model parameters. The gamma scale is fixed at one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Gamma shape: `< 1` bursty, `1` Poisson, `> 1` regular.
    pub a: f64,
    /// GP magnitude (variance scale of the log intensity).
    pub sigma: f64,
    /// GP length scale.
    pub l: f64,
}

impl Hyperparams {
    pub fn new(a: f64, sigma: f64, l: f64) -> Self {
        Self { a, sigma, l }
    }

    /// Gamma scale `b`, pinned to one for identifiability.
    pub const fn b(&self) -> f64 {
        1.0
    }
}

/// Prior on the GP length scale, before truncation at `l_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LengthScalePrior {
    /// Density `rate * exp(-rate * l)`.
    Exponential { rate: f64 },
    /// `log l ~ Normal(mu, sd)`.
    LogNormal { mu: f64, sd: f64 },
}

impl LengthScalePrior {
    /// Log-normal prior whose density peaks at `mode`.
    pub fn lognormal_with_mode(mode: f64, sd: f64) -> Self {
        LengthScalePrior::LogNormal {
            mu: mode.ln() + sd * sd,
            sd,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LengthScalePrior::Exponential { rate } => 1.0 / rate,
            LengthScalePrior::LogNormal { mu, sd } => (mu + 0.5 * sd * sd).exp(),
        }
    }

    /// Log density at `l > 0`, ignoring truncation.
    pub fn ln_density(&self, l: f64) -> f64 {
        match *self {
            LengthScalePrior::Exponential { rate } => rate.ln() - rate * l,
            LengthScalePrior::LogNormal { mu, sd } => {
                let z = (l.ln() - mu) / sd;
                -l.ln() - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
            }
        }
    }
}

/// Priors of the generative model: truncated prior on `l`, log-uniform on `σ` and `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub l_prior: LengthScalePrior,
    /// Truncation floor for `l`; must stay well above the grid spacing.
    pub l_min: f64,
    pub log_sigma_bounds: (f64, f64),
    pub log_a_bounds: (f64, f64),
    /// Constant prior mean of the log intensity; zero gives the plain `GP(0, C)` prior.
    #[serde(default)]
    pub mean_log_intensity: f64,
}

impl PriorSpec {
    /// Scale-aware defaults for a working grid: `Exp(10 / span)` on `l`, truncated
    /// at `5 d`, and `[0.01, 100]` for both `σ` and `a`.
    pub fn default_for(grid: &TimeGrid) -> Self {
        Self {
            l_prior: LengthScalePrior::Exponential {
                rate: 10.0 / grid.span(),
            },
            l_min: 5.0 * grid.d(),
            log_sigma_bounds: (0.01f64.ln(), 100f64.ln()),
            log_a_bounds: (0.01f64.ln(), 100f64.ln()),
            mean_log_intensity: 0.0,
        }
    }

    /// Centers the GP prior at the stream's average event rate, `log(max(n, 1) / span)`.
    pub fn with_empirical_mean(mut self, stream: &EventStream) -> Self {
        let span = stream.t_max() - stream.t_min();
        self.mean_log_intensity = (stream.len().max(1) as f64 / span).ln();
        self
    }

    pub fn with_l_prior(mut self, l_prior: LengthScalePrior) -> Self {
        self.l_prior = l_prior;
        self
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ordered(self.log_sigma_bounds) {
            return Err(Error::invalid(format!(
                "log sigma bounds {:?} are not ordered",
                self.log_sigma_bounds
            )));
        }
        if !ordered(self.log_a_bounds) {
            return Err(Error::invalid(format!(
                "log a bounds {:?} are not ordered",
                self.log_a_bounds
            )));
        }
        match self.l_prior {
            LengthScalePrior::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                return Err(Error::invalid(format!("exponential rate {rate} must be positive")));
            }
            LengthScalePrior::LogNormal { mu, sd } if !(sd > 0.0 && mu.is_finite()) => {
                return Err(Error::invalid(format!("bad log-normal prior ({mu}, {sd})")));
            }
            _ => {}
        }
        if !self.mean_log_intensity.is_finite() {
            return Err(Error::invalid("prior mean of the log intensity must be finite"));
        }
        if !(self.l_min >= 5.0 * grid.d() * (1.0 - 1e-12)) {
            return Err(Error::invalid(format!(
                "l_min {} must be at least 5 grid spacings ({})",
                self.l_min,
                5.0 * grid.d()
            )));
        }
        Ok(())
    }
}

/// One observed stream: event times strictly inside `(t_min, t_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    label: String,
    t_min: f64,
    t_max: f64,
    times: Vec<f64>,
}

impl EventStream {
    pub fn new(label: impl Into<String>, t_min: f64, t_max: f64, times: Vec<f64>) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
            return Err(Error::invalid(format!(
                "degenerate window [{t_min}, {t_max}]"
            )));
        }
        check_strictly_increasing(&times)?;
        if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
            if !(first > t_min && last < t_max) {
                return Err(Error::invalid(format!(
                    "events must lie strictly inside ({t_min}, {t_max}); got [{first}, {last}]"
                )));
            }
        }
        Ok(Self {
            label: label.into(),
            t_min,
            t_max,
            times,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Same stream with every time and the window moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::new(
            self.label.clone(),
            self.t_min + delta,
            self.t_max + delta,
            self.times.iter().map(|t| t + delta).collect(),
        )
    }
}

fn check_strictly_increasing(times: &[f64]) -> Result<()> {
    if let Some(bad) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid(format!("non-finite event time {bad}")));
    }
    if let Some(pair) = times.windows(2).find(|p| p[1] <= p[0]) {
        return Err(Error::invalid(format!(
            "event times must be strictly increasing; found {} then {}",
            pair[0], pair[1]
        )));
    }
    Ok(())
}

/// Log density of `γ(x | a, b) = x^{a-1} e^{-x/b} / (Γ(a) b^a)`.
pub fn gamma_log_density(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("gamma density needs x > 0, got {x}")));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::invalid(format!("gamma parameters must be positive, got ({a}, {b})")));
    }
    Ok((a - 1.0) * x.ln() - x / b - ln_gamma(a) - a * b.ln())
}

/// Warped intervals `[leading, interior..., trailing]`, one more than the number of events.
pub fn warped_intervals(w: &CumulativeWarp, stream: &EventStream) -> Result<Vec<f64>> {
    check_strictly_increasing(stream.times())?;
    let mut out = Vec::with_capacity(stream.len() + 1);
    let mut prev = 0.0;
    for &t in stream.times() {
        let u = w.warp(t)?;
        out.push(u - prev);
        prev = u;
    }
    out.push(w.total() - prev);
    Ok(out)
}

/// Sufficient statistics of the warped intervals for a fixed intensity; the
/// likelihood as a function of the shape `a` is then O(1) to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntervalStats {
    /// `Σ log λ(t_i)` over events that close an interior interval.
    pub log_jacobian: f64,
    /// `Σ log w_i` over interior intervals.
    pub sum_log_w: f64,
    /// `Σ w_i` over interior intervals.
    pub sum_w: f64,
    /// Number of interior intervals.
    pub interior: usize,
    /// Leading plus trailing warped interval.
    pub end_mass: f64,
    /// Set when some interior interval was floored at [`MIN_WARPED_INTERVAL`].
    pub floored: bool,
}

impl IntervalStats {
    /// Stream log likelihood at shape `a` (scale one).
    pub fn log_likelihood(&self, a: f64) -> f64 {
        let mut ll = self.log_jacobian - self.sum_w - self.end_mass;
        if self.interior > 0 {
            ll += (a - 1.0) * self.sum_log_w - self.interior as f64 * ln_gamma(a);
        }
        ll
    }
}

/// Log likelihood value plus a flag for floored (coincident) intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub floored: bool,
}

/// Warp and interval statistics of one stream under one log intensity.
#[derive(Debug, Clone)]
pub struct StreamFit {
    pub warp: CumulativeWarp,
    pub stats: IntervalStats,
}

/// A stream bound to an inference grid and quadrature refinement.
#[derive(Debug, Clone)]
pub struct StreamModel {
    stream: EventStream,
    grid: TimeGrid,
    refine: usize,
}

impl StreamModel {
    pub fn new(stream: EventStream, grid: TimeGrid, refine: usize) -> Result<Self> {
        if refine == 0 {
            return Err(Error::invalid("refinement factor must be at least 1"));
        }
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        if !(same(stream.t_min(), grid.t_min()) && same(stream.t_max(), grid.t_max())) {
            return Err(Error::invalid(format!(
                "stream window [{}, {}] differs from grid window [{}, {}]",
                stream.t_min(),
                stream.t_max(),
                grid.t_min(),
                grid.t_max()
            )));
        }
        Ok(Self {
            stream,
            grid,
            refine,
        })
    }

    pub fn stream(&self) -> &EventStream {
        &self.stream
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn refine(&self) -> usize {
        self.refine
    }

    /// Integrates `λ = e^f` and collects interval statistics.
    pub fn fit(&self, logf: &[f64]) -> Result<StreamFit> {
        let spline = NaturalSpline::from_values(self.grid, logf);
        let warp = cumulative_from_spline(&spline, self.refine)?;
        let mut stats = IntervalStats::default();
        let times = self.stream.times();
        match times.len() {
            0 => stats.end_mass = warp.total(),
            _ => {
                let mut prev = warp.warp_unchecked(times[0]);
                let lead = prev;
                for &t in &times[1..] {
                    let u = warp.warp_unchecked(t);
                    let mut w = u - prev;
                    if !(w >= MIN_WARPED_INTERVAL) {
                        w = MIN_WARPED_INTERVAL;
                        stats.floored = true;
                    }
                    stats.log_jacobian += spline.eval_unchecked(t);
                    stats.sum_log_w += w.ln();
                    stats.sum_w += w;
                    stats.interior += 1;
                    prev = u;
                }
                stats.end_mass = lead + (warp.total() - prev);
            }
        }
        Ok(StreamFit { warp, stats })
    }
}

/// Log likelihood of `stream` under log intensity `logf` and shape `hyper.a`.
///
/// Uses the default quadrature refinement; see [`StreamModel`] for other choices.
pub fn stream_log_likelihood(
    stream: &EventStream,
    logf: &GridFunction,
    hyper: &Hyperparams,
) -> Result<LogLikelihood> {
    if !(hyper.a > 0.0) {
        return Err(Error::invalid(format!("shape must be positive, got {}", hyper.a)));
    }
    let model = StreamModel::new(stream.clone(), *logf.grid(), DEFAULT_REFINE)?;
    let fit = model.fit(logf.values())?;
    Ok(LogLikelihood {
        value: fit.stats.log_likelihood(hyper.a),
        floored: fit.stats.floored,
    })
}

/// Joint log prior density of `(log a, log σ, l)`. Returns `-∞` outside the support.
///
/// The `a` and `σ` terms are densities over their logarithms (uniform), the `l`
/// term is a density over `l` itself.
pub fn log_prior(hyper: &Hyperparams, spec: &PriorSpec) -> f64 {
    let Hyperparams { a, sigma, l } = *hyper;
    if !(a > 0.0 && sigma > 0.0 && l > 0.0) || !l.is_finite() {
        return f64::NEG_INFINITY;
    }
    let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
    if !inside(a.ln(), spec.log_a_bounds) || !inside(sigma.ln(), spec.log_sigma_bounds) {
        return f64::NEG_INFINITY;
    }
    if l < spec.l_min {
        return f64::NEG_INFINITY;
    }
    let width = |(lo, hi): (f64, f64)| (hi - lo).ln();
    spec.l_prior.ln_density(l) - width(spec.log_a_bounds) - width(spec.log_sigma_bounds)
}

/// `e^{f} / a` on the grid: expected events per unit time.
pub fn normalized_intensity(logf: &GridFunction, a: f64) -> Result<GridFunction> {
    if !(a > 0.0) {
        return Err(Error::invalid(format!("shape must be positive, got {a}")));
    }
    logf.map(|v| v.exp() / a)
}
