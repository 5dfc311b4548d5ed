//! The three transition kernels applied on every iteration.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::state::{latent, unit_factor, Likelihood, ModelState};
use crate::error::{Error, Result};
use crate::renewal::{log_prior, PriorSpec};

/// Bracket shrinks allowed in one elliptical slice update.
pub const MAX_SHRINKS: usize = 1000;

/// Initial slice widths in log space.
const SIGMA_WIDTH: f64 = 1.0;
const L_WIDTH: f64 = 0.7;
/// Stepping-out budget per slice update.
const MAX_STEP_OUT: usize = 8;

/// Outcome of one elliptical slice update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseMove {
    pub shrinks: usize,
    /// Log slice height the accepted point had to exceed.
    pub threshold: f64,
}

/// Point at angle `theta` on the ellipse through `current` and `aux`.
pub fn ellipse_point(current: &[f64], aux: &[f64], theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    current.iter().zip(aux).map(|(x, y)| x * c + y * s).collect()
}

fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Elliptical slice sampling of the latent function given the hyperparameters.
pub fn update_f<L, R>(lik: &L, state: &mut ModelState<L::Fit>, rng: &mut R) -> Result<EllipseMove>
where
    L: Likelihood,
    R: Rng + ?Sized,
{
    let k = state.whitened.len();
    let eta = standard_normals(rng, k);
    let prior_draw = latent(&state.factor.mul_vec(&eta), state.hyper.sigma, 0.0);
    let mean = state.mean;
    let centered: Vec<f64> = state.f.iter().map(|v| v - mean).collect();
    let u: f64 = rng.random();
    let threshold = state.loglik + u.ln();

    let mut theta = rng.random::<f64>() * 2.0 * PI;
    let (mut lo, mut hi) = (theta - 2.0 * PI, theta);
    let mut shrinks = 0;
    loop {
        let mut f = ellipse_point(&centered, &prior_draw, theta);
        f.iter_mut().for_each(|v| *v += mean);
        if let Ok(fit) = lik.fit(&f) {
            let ll = lik.log_likelihood(&fit, state.hyper.a);
            if ll > threshold {
                state.whitened = ellipse_point(&state.whitened, &eta, theta);
                state.f = f;
                state.fit = fit;
                state.loglik = ll;
                return Ok(EllipseMove { shrinks, threshold });
            }
        }
        shrinks += 1;
        if shrinks > MAX_SHRINKS {
            return Err(Error::numerical(format!(
                "elliptical slice bracket shrank {MAX_SHRINKS} times without acceptance"
            )));
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        theta = lo + rng.random::<f64>() * (hi - lo);
    }
}

/// Result of a univariate slice update.
struct SliceDraw {
    x: f64,
    expansions: usize,
    /// False when shrinkage collapsed and the chain stayed at the start point.
    moved: bool,
}

/// Univariate slice sampling with stepping out and shrinkage.
fn slice_1d<R, G>(x0: f64, logp0: f64, width: f64, rng: &mut R, mut logp: G) -> SliceDraw
where
    R: Rng + ?Sized,
    G: FnMut(f64) -> f64,
{
    let height = logp0 + rng.random::<f64>().ln();
    let mut left = x0 - width * rng.random::<f64>();
    let mut right = left + width;
    let mut j = (MAX_STEP_OUT as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = MAX_STEP_OUT - 1 - j;
    let mut expansions = 0;
    while j > 0 && logp(left) > height {
        left -= width;
        j -= 1;
        expansions += 1;
    }
    while k > 0 && logp(right) > height {
        right += width;
        k -= 1;
        expansions += 1;
    }
    for _ in 0..MAX_SHRINKS {
        let x = left + rng.random::<f64>() * (right - left);
        if logp(x) > height {
            return SliceDraw {
                x,
                expansions,
                moved: true,
            };
        }
        if x < x0 {
            left = x;
        } else {
            right = x;
        }
    }
    SliceDraw {
        x: x0,
        expansions,
        moved: false,
    }
}

/// Counts from one hyperparameter update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperMove {
    pub expansions: usize,
}

/// Slice sampling of `log σ` then `log l`, holding the whitened latent values fixed.
///
/// Proposals with `l < l_min` or whose covariance cannot be factorized have zero
/// posterior mass.
pub fn update_hypers<L, R>(
    lik: &L,
    prior: &PriorSpec,
    state: &mut ModelState<L::Fit>,
    rng: &mut R,
) -> Result<HyperMove>
where
    L: Likelihood,
    R: Rng + ?Sized,
{
    let grid = *lik.grid();
    let mut moves = HyperMove::default();

    // log σ: uniform prior in log space, f scales by √σ.
    let base = state.factor.mul_vec(&state.whitened);
    let mean = state.mean;
    let (lo, hi) = prior.log_sigma_bounds;
    let a = state.hyper.a;
    let mut last = None;
    let draw = slice_1d(state.hyper.sigma.ln(), state.loglik, SIGMA_WIDTH, rng, |x| {
        if !(x >= lo && x <= hi) {
            return f64::NEG_INFINITY;
        }
        let f = latent(&base, x.exp(), mean);
        match lik.fit(&f) {
            Ok(fit) => {
                let ll = lik.log_likelihood(&fit, a);
                last = Some((x, f, fit, ll));
                ll
            }
            Err(_) => f64::NEG_INFINITY,
        }
    });
    moves.expansions += draw.expansions;
    if draw.moved {
        let (f, fit, ll) = match last {
            Some((x, f, fit, ll)) if x == draw.x => (f, fit, ll),
            _ => {
                let f = latent(&base, draw.x.exp(), mean);
                let fit = lik.fit(&f)?;
                let ll = lik.log_likelihood(&fit, a);
                (f, fit, ll)
            }
        };
        state.hyper.sigma = draw.x.exp();
        state.f = f;
        state.fit = fit;
        state.loglik = ll;
    }

    // log l: truncated prior on l plus the log-transform Jacobian.
    let sigma = state.hyper.sigma;
    let logp0 = log_prior(&state.hyper, prior) + state.hyper.l.ln() + state.loglik;
    let mut last = None;
    let whitened = &state.whitened;
    let current_hyper = state.hyper;
    let draw = slice_1d(state.hyper.l.ln(), logp0, L_WIDTH, rng, |y| {
        let l = y.exp();
        let mut h = current_hyper;
        h.l = l;
        let lp = log_prior(&h, prior);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let Ok(factor) = unit_factor(&grid, l) else {
            return f64::NEG_INFINITY;
        };
        let f = latent(&factor.mul_vec(whitened), sigma, mean);
        match lik.fit(&f) {
            Ok(fit) => {
                let ll = lik.log_likelihood(&fit, a);
                let total = lp + y + ll;
                last = Some((y, factor, f, fit, ll));
                total
            }
            Err(_) => f64::NEG_INFINITY,
        }
    });
    moves.expansions += draw.expansions;
    if draw.moved {
        let (factor, f, fit, ll) = match last {
            Some((y, factor, f, fit, ll)) if y == draw.x => (factor, f, fit, ll),
            _ => {
                let factor = unit_factor(&grid, draw.x.exp())?;
                let f = latent(&factor.mul_vec(&state.whitened), sigma, mean);
                let fit = lik.fit(&f)?;
                let ll = lik.log_likelihood(&fit, a);
                (factor, f, fit, ll)
            }
        };
        state.hyper.l = draw.x.exp();
        state.factor = Arc::new(factor);
        state.f = f;
        state.fit = fit;
        state.loglik = ll;
    }
    Ok(moves)
}

/// Gaussian random-walk Metropolis–Hastings on `log a`. Returns whether the move was accepted.
pub fn update_a<L, R>(
    lik: &L,
    prior: &PriorSpec,
    step: f64,
    state: &mut ModelState<L::Fit>,
    rng: &mut R,
) -> bool
where
    L: Likelihood,
    R: Rng + ?Sized,
{
    let z: f64 = StandardNormal.sample(rng);
    let proposal = (state.hyper.a.ln() + step * z).exp();
    let (lo, hi) = prior.log_a_bounds;
    if !(proposal.ln() >= lo && proposal.ln() <= hi) {
        return false;
    }
    let mut proposed = state.hyper;
    proposed.a = proposal;
    let ll = lik.log_likelihood(&state.fit, proposal);
    // The walk is symmetric in log a and the prior is uniform there.
    let log_ratio = ll - state.loglik + log_prior(&proposed, prior) - log_prior(&state.hyper, prior);
    let u: f64 = rng.random();
    if u.ln() < log_ratio {
        state.hyper.a = proposal;
        state.loglik = ll;
        true
    } else {
        false
    }
}
