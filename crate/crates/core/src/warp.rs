//! Numerical cumulative intensity `Λ(t) = ∫ λ(u) du` measured from `t_min`, and the
//! monotone time warp built on it.

use crate::error::{Error, Result};
use crate::gp::GridFunction;
use crate::spline::NaturalSpline;

/// Default number of quadrature sub-intervals per grid interval.
pub const DEFAULT_REFINE: usize = 8;

/// Log intensities beyond this magnitude signal a divergent state.
pub const MAX_LOG_INTENSITY: f64 = 700.0;

/// `λ` and `Λ` tabulated on a uniform refined mesh over `[t_min, t_max]`.
///
/// `Λ` is the cumulative trapezoid of `λ`, so it starts at exactly zero and is
/// strictly increasing whenever `λ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeWarp {
    t_min: f64,
    t_max: f64,
    h: f64,
    lambda: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CumulativeWarp {
    /// Builds the warp from positive intensity samples on a uniform mesh.
    pub fn from_samples(t_min: f64, t_max: f64, lambda: Vec<f64>) -> Result<Self> {
        if t_max <= t_min {
            return Err(Error::invalid(format!(
                "degenerate window [{t_min}, {t_max}]"
            )));
        }
        if lambda.len() < 2 {
            return Err(Error::invalid("warp needs at least two mesh nodes"));
        }
        if let Some(bad) = lambda.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::numerical(format!("intensity sample {bad} is not positive")));
        }
        let h = (t_max - t_min) / (lambda.len() - 1) as f64;
        let mut cumulative = Vec::with_capacity(lambda.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for pair in lambda.windows(2) {
            acc += 0.5 * h * (pair[0] + pair[1]);
            cumulative.push(acc);
        }
        Ok(Self {
            t_min,
            t_max,
            h,
            lambda,
            cumulative,
        })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.len() {
            self.t_max
        } else {
            self.t_min + i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn lambda_at_nodes(&self) -> &[f64] {
        &self.lambda
    }

    pub fn cumulative_at_nodes(&self) -> &[f64] {
        &self.cumulative
    }

    /// `Λ(t_max)`.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("warp has nodes")
    }

    /// `Λ(t)` for `t` in the window, by linear interpolation of the node table.
    pub fn warp(&self, t: f64) -> Result<f64> {
        if !(t >= self.t_min && t <= self.t_max) {
            return Err(Error::OutOfRange {
                value: t,
                lo: self.t_min,
                hi: self.t_max,
            });
        }
        Ok(self.warp_unchecked(t))
    }

    pub(crate) fn warp_unchecked(&self, t: f64) -> f64 {
        let n = self.len();
        let x = (t - self.t_min) / self.h;
        let i = (x.floor().max(0.0) as usize).min(n - 2);
        let s = t - self.node(i);
        if s <= 0.0 {
            return self.cumulative[i];
        }
        if t >= self.node(i + 1) {
            return self.cumulative[i + 1];
        }
        let frac = s / self.h;
        self.cumulative[i] + frac * (self.cumulative[i + 1] - self.cumulative[i])
    }

    /// The time `t` with `Λ(t) = u`.
    pub fn inverse_warp(&self, u: f64) -> Result<f64> {
        let total = self.total();
        if !(u >= 0.0 && u <= total) {
            return Err(Error::OutOfRange {
                value: u,
                lo: 0.0,
                hi: total,
            });
        }
        if u == 0.0 {
            return Ok(self.t_min);
        }
        // First node with cumulative >= u; u > 0 so that index is at least 1.
        let hi = self.cumulative.partition_point(|&c| c < u).max(1);
        let lo = hi - 1;
        let (c0, c1) = (self.cumulative[lo], self.cumulative[hi]);
        let t = if c1 > c0 {
            self.node(lo) + (u - c0) / (c1 - c0) * (self.node(hi) - self.node(lo))
        } else {
            self.node(lo)
        };
        Ok(t.clamp(self.t_min, self.t_max))
    }
}

/// Tabulates `λ = exp(spline of logf)` on `r` sub-intervals per grid interval and
/// integrates it with the cumulative trapezoid rule.
pub fn cumulative_intensity(logf: &GridFunction, r: usize) -> Result<CumulativeWarp> {
    if r == 0 {
        return Err(Error::invalid("refinement factor must be at least 1"));
    }
    let spline = NaturalSpline::new(logf);
    cumulative_from_spline(&spline, r)
}

pub(crate) fn cumulative_from_spline(spline: &NaturalSpline, r: usize) -> Result<CumulativeWarp> {
    let grid = *spline.grid();
    let k = grid.k();
    let step = grid.d() / r as f64;
    let mut lambda = Vec::with_capacity((k - 1) * r + 1);
    for j in 0..k - 1 {
        for q in 0..r {
            lambda.push(spline.eval_in_cell(j, q as f64 * step));
        }
    }
    lambda.push(spline.eval_in_cell(k - 2, grid.d()));
    for v in lambda.iter_mut() {
        if !(v.abs() <= MAX_LOG_INTENSITY) {
            return Err(Error::numerical(format!(
                "log intensity {v} exceeds ±{MAX_LOG_INTENSITY}"
            )));
        }
        *v = v.exp();
    }
    CumulativeWarp::from_samples(grid.t_min(), grid.t_max(), lambda)
}

/// `Λ(t)`; see [`CumulativeWarp::warp`].
pub fn warp(w: &CumulativeWarp, t: f64) -> Result<f64> {
    w.warp(t)
}

/// `Λ⁻¹(u)`; see [`CumulativeWarp::inverse_warp`].
pub fn inverse_warp(w: &CumulativeWarp, u: f64) -> Result<f64> {
    w.inverse_warp(u)
}
