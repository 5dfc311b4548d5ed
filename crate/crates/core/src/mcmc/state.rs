use std::sync::Arc;

use crate::error::Result;
use crate::gp::{chol_factor, sq_exp_covariance, CholFactor, GridFunction, TimeGrid, BASE_JITTER};
use crate::renewal::{Hyperparams, StreamFit, StreamModel};

/// Anything that scores a log intensity on the grid together with a gamma shape.
///
/// `fit` does the expensive part (integrating the intensity) once per latent
/// function; `log_likelihood` then evaluates any shape cheaply.
pub trait Likelihood {
    type Fit: Clone + std::fmt::Debug;

    fn grid(&self) -> &TimeGrid;

    fn fit(&self, logf: &[f64]) -> Result<Self::Fit>;

    fn log_likelihood(&self, fit: &Self::Fit, a: f64) -> f64;
}

impl Likelihood for StreamModel {
    type Fit = StreamFit;

    fn grid(&self) -> &TimeGrid {
        StreamModel::grid(self)
    }

    fn fit(&self, logf: &[f64]) -> Result<StreamFit> {
        StreamModel::fit(self, logf)
    }

    fn log_likelihood(&self, fit: &StreamFit, a: f64) -> f64 {
        fit.stats.log_likelihood(a)
    }
}

/// Constant likelihood. Under it the chain must reproduce the prior.
#[derive(Debug, Clone, Copy)]
pub struct FlatLikelihood {
    grid: TimeGrid,
}

impl FlatLikelihood {
    pub fn new(grid: TimeGrid) -> Self {
        Self { grid }
    }
}

impl Likelihood for FlatLikelihood {
    type Fit = ();

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn fit(&self, _logf: &[f64]) -> Result<()> {
        Ok(())
    }

    fn log_likelihood(&self, _fit: &(), _a: f64) -> f64 {
        0.0
    }
}

/// Factor of the unit-magnitude covariance at length scale `l`; the factor at
/// magnitude `σ` is this one scaled by `√σ`.
pub fn unit_factor(grid: &TimeGrid, l: f64) -> Result<CholFactor> {
    chol_factor(&sq_exp_covariance(grid, 1.0, l)?, BASE_JITTER)
}

/// Current point of one chain with its cached factor, fit and log likelihood.
///
/// The latent function is held in whitened form `ν`, with
/// `f = m + √σ · L(l) · ν` for the prior mean `m`, so hyperparameter moves carry `f` along coherently.
#[derive(Debug, Clone)]
pub struct ModelState<F> {
    pub(crate) whitened: Vec<f64>,
    pub(crate) f: Vec<f64>,
    pub(crate) hyper: Hyperparams,
    pub(crate) mean: f64,
    pub(crate) factor: Arc<CholFactor>,
    pub(crate) fit: F,
    pub(crate) loglik: f64,
}

impl<F: Clone> ModelState<F> {
    pub fn new<L: Likelihood<Fit = F>>(
        lik: &L,
        hyper: Hyperparams,
        mean: f64,
        whitened: Vec<f64>,
    ) -> Result<Self> {
        let grid = *lik.grid();
        if whitened.len() != grid.k() {
            return Err(crate::error::Error::invalid(format!(
                "whitened state has length {}, expected {}",
                whitened.len(),
                grid.k()
            )));
        }
        let factor = Arc::new(unit_factor(&grid, hyper.l)?);
        let f = latent(&factor.mul_vec(&whitened), hyper.sigma, mean);
        let fit = lik.fit(&f)?;
        let loglik = lik.log_likelihood(&fit, hyper.a);
        Ok(Self {
            whitened,
            f,
            hyper,
            mean,
            factor,
            fit,
            loglik,
        })
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    /// Log intensity on the grid.
    pub fn log_intensity(&self) -> &[f64] {
        &self.f
    }

    pub fn whitened(&self) -> &[f64] {
        &self.whitened
    }

    pub fn fit(&self) -> &F {
        &self.fit
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn factor(&self) -> &CholFactor {
        &self.factor
    }

    pub fn log_intensity_function(&self, grid: TimeGrid) -> Result<GridFunction> {
        GridFunction::new(grid, self.f.clone())
    }
}

/// `mean + √σ · v`.
pub(crate) fn latent(v: &[f64], sigma: f64, mean: f64) -> Vec<f64> {
    let s = sigma.sqrt();
    v.iter().map(|x| mean + s * x).collect()
}
