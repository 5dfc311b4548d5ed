//! Natural cubic spline through the values of a [`GridFunction`].

use crate::error::Result;
use crate::gp::{GridFunction, TimeGrid};

/// Natural cubic spline on a uniform grid (zero second derivative at both ends).
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    grid: TimeGrid,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(f: &GridFunction) -> Self {
        Self::from_values(*f.grid(), f.values())
    }

    pub(crate) fn from_values(grid: TimeGrid, y: &[f64]) -> Self {
        let k = grid.k();
        let h = grid.d();
        let mut m = vec![0.0; k];
        if k > 2 {
            // Interior rows: m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]) / h^2.
            let n = k - 2;
            let scale = 6.0 / (h * h);
            let mut c = vec![0.0; n];
            let mut rhs: Vec<f64> = (1..k - 1)
                .map(|i| scale * (y[i + 1] - 2.0 * y[i] + y[i - 1]))
                .collect();
            c[0] = 0.25;
            rhs[0] *= 0.25;
            for i in 1..n {
                let denom = 4.0 - c[i - 1];
                c[i] = 1.0 / denom;
                rhs[i] = (rhs[i] - rhs[i - 1]) / denom;
            }
            for i in (0..n - 1).rev() {
                rhs[i] -= c[i] * rhs[i + 1];
            }
            m[1..k - 1].copy_from_slice(&rhs);
        }
        Self {
            grid,
            y: y.to_vec(),
            m,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Value at `t`; errors outside the grid window.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.grid.check_contains(t)?;
        Ok(self.eval_unchecked(t))
    }

    /// Value at `t`, which the caller guarantees lies in the window.
    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        let k = self.grid.k();
        let h = self.grid.d();
        let j = (((t - self.grid.t_min()) / h).floor().max(0.0) as usize).min(k - 2);
        self.eval_in_cell(j, t - self.grid.node(j))
    }

    /// Value at offset `s` from node `j`, `0 <= s <= d`.
    pub(crate) fn eval_in_cell(&self, j: usize, s: f64) -> f64 {
        if s == 0.0 {
            return self.y[j];
        }
        let h = self.grid.d();
        let u = h - s;
        if u == 0.0 {
            return self.y[j + 1];
        }
        let (m0, m1) = (self.m[j], self.m[j + 1]);
        (m0 * u * u * u + m1 * s * s * s) / (6.0 * h)
            + (self.y[j] / h - m0 * h / 6.0) * u
            + (self.y[j + 1] / h - m1 * h / 6.0) * s
    }
}

/// Interpolates `f` at each of `times` with a natural cubic spline.
pub fn interp_eval(f: &GridFunction, times: &[f64]) -> Result<Vec<f64>> {
    let spline = NaturalSpline::new(f);
    times.iter().map(|&t| spline.eval(t)).collect()
}
