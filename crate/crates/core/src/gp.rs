//! Uniform time grids, squared-exponential covariance and Gaussian-process prior draws.
//!
//! The latent log intensity is only ever represented on a [`TimeGrid`] of `k`
//! equally spaced nodes. Because the nodes are uniform, the covariance matrix
//! is Toeplitz: every entry is a function of the lag `|i - j|` alone, and we
//! build it from a single lag table so the Toeplitz structure holds exactly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `k` uniformly spaced nodes spanning `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    k: usize,
    d: f64,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, k: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) {
            return Err(Error::invalid("grid window must be finite"));
        }
        if t_max <= t_min {
            return Err(Error::invalid(format!(
                "degenerate window [{t_min}, {t_max}]"
            )));
        }
        if k < 2 {
            return Err(Error::invalid(format!("grid needs k >= 2 nodes, got {k}")));
        }
        Ok(Self {
            t_min,
            t_max,
            k,
            d: (t_max - t_min) / (k - 1) as f64,
        })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Node spacing.
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn span(&self) -> f64 {
        self.t_max - self.t_min
    }

    /// Node `j`. The last node is pinned to `t_max` so the window is covered exactly.
    pub fn node(&self, j: usize) -> f64 {
        if j + 1 == self.k {
            self.t_max
        } else {
            self.t_min + j as f64 * self.d
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.k).map(|j| self.node(j)).collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }

    pub(crate) fn check_contains(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                value: t,
                lo: self.t_min,
                hi: self.t_max,
            })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    t_min: f64,
    t_max: f64,
    k: usize,
}

impl TryFrom<RawGrid> for TimeGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        TimeGrid::new(raw.t_min, raw.t_max, raw.k)
    }
}

impl From<TimeGrid> for RawGrid {
    fn from(g: TimeGrid) -> Self {
        RawGrid {
            t_min: g.t_min,
            t_max: g.t_max,
            k: g.k,
        }
    }
}

/// Builds the `k`-node grid over `[t_min, t_max]`.
pub fn make_grid(t_min: f64, t_max: f64, k: usize) -> Result<TimeGrid> {
    TimeGrid::new(t_min, t_max, k)
}

/// A function sampled on every node of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridFunction")]
pub struct GridFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.k() {
            return Err(Error::invalid(format!(
                "grid function needs {} values, got {}",
                grid.k(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite grid value {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.k()])
    }

    /// Samples `g` at every node.
    pub fn from_fn(grid: TimeGrid, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(g).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| g(v)).collect())
    }
}

#[derive(Deserialize)]
struct RawGridFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TryFrom<RawGridFunction> for GridFunction {
    type Error = Error;

    fn try_from(raw: RawGridFunction) -> Result<Self> {
        GridFunction::new(raw.grid, raw.values)
    }
}

/// `C[i][j] = sigma * exp(-((t_i - t_j) / l)^2)` on the grid nodes.
pub fn sq_exp_covariance(grid: &TimeGrid, sigma: f64, l: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid(format!(
            "length scale must be positive, got {l}"
        )));
    }
    let k = grid.k();
    let d = grid.d();
    let lags: Vec<f64> = (0..k)
        .map(|m| {
            let z = m as f64 * d / l;
            sigma * (-z * z).exp()
        })
        .collect();
    Ok(DMatrix::from_fn(k, k, |i, j| lags[i.abs_diff(j)]))
}

/// Lower Cholesky factor of `C + jitter * I`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    lower: DMatrix<f64>,
    jitter: f64,
}

impl CholFactor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `lower * v`, exploiting the triangular shape.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        let mut out = vec![0.0; n];
        // Column-major storage: accumulate column by column.
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 {
                continue;
            }
            let col = self.lower.column(j);
            for i in j..n {
                out[i] += col[i] * vj;
            }
        }
        out
    }

    /// Solves `lower * x = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = b.to_vec();
        for j in 0..n {
            x[j] /= self.lower[(j, j)];
            let xj = x[j];
            for i in j + 1..n {
                x[i] -= self.lower[(i, j)] * xj;
            }
        }
        x
    }
}

/// Default starting jitter, relative to the largest diagonal entry.
pub const BASE_JITTER: f64 = 1e-8;
/// Largest jitter tried, relative to the largest diagonal entry.
pub const MAX_JITTER: f64 = 1e-2;

/// Factorizes a symmetric matrix, adding diagonal jitter when needed.
///
/// Tries `base_jitter` first, then escalates by factors of ten up to
/// `1e-2 * max(diag)`. A zero base tries the bare matrix and then starts the
/// escalation at `1e-8 * max(diag)`.
pub fn chol_factor(c: &DMatrix<f64>, base_jitter: f64) -> Result<CholFactor> {
    if !c.is_square() || c.nrows() == 0 {
        return Err(Error::invalid("covariance must be a non-empty square matrix"));
    }
    if !(base_jitter >= 0.0 && base_jitter.is_finite()) {
        return Err(Error::invalid(format!("bad jitter {base_jitter}")));
    }
    let n = c.nrows();
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (c[(i, j)], c[(j, i)]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::invalid("covariance is not symmetric"));
            }
        }
    }
    let scale = c.diagonal().max();
    let cap = MAX_JITTER * scale;

    let mut schedule = vec![base_jitter];
    let mut next = if base_jitter > 0.0 {
        base_jitter * 10.0
    } else {
        BASE_JITTER * scale
    };
    while next <= cap * (1.0 + 1e-9) {
        schedule.push(next);
        next *= 10.0;
    }

    let mut attempted = Vec::with_capacity(schedule.len());
    for jitter in schedule {
        attempted.push(jitter);
        let mut m = c.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            let lower = ch.unpack();
            if lower.diagonal().iter().all(|&v| v > 0.0 && v.is_finite()) {
                return Ok(CholFactor { lower, jitter });
            }
        }
    }
    Err(Error::Factorization { attempted })
}

/// Maps standard-normal `noise` through the factor: a zero-mean draw with covariance `L Lᵀ`.
pub fn gp_prior_draw(grid: &TimeGrid, factor: &CholFactor, noise: &[f64]) -> Result<GridFunction> {
    if factor.dim() != grid.k() {
        return Err(Error::invalid(format!(
            "factor is {0}x{0} but grid has {1} nodes",
            factor.dim(),
            grid.k()
        )));
    }
    if noise.len() != grid.k() {
        return Err(Error::invalid(format!(
            "noise has length {}, expected {}",
            noise.len(),
            grid.k()
        )));
    }
    GridFunction::new(*grid, factor.mul_vec(noise))
}

#[cfg(test)]
mod tests {
    use super::*;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn grid_examples() {
        let g = make_grid(0.0, 50.0, 200).unwrap();
        assert!((g.d() - 50.0 / 199.0).abs() < 1e-15);
        assert!((g.d() - 0.2513).abs() < 1e-4);

        let g = make_grid(0.0, 1.0, 2).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 1.0]);
        assert_eq!(g.d(), 1.0);

        let g = make_grid(0.0, 100.0, 5).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 25.0, 50.0, 75.0, 100.0]);
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(matches!(make_grid(1.0, 1.0, 10), Err(Error::InvalidInput(_))));
        assert!(matches!(make_grid(2.0, 1.0, 10), Err(Error::InvalidInput(_))));
        assert!(matches!(make_grid(0.0, 1.0, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn grid_function_checks_length_and_finiteness() {
        let g = make_grid(0.0, 1.0, 3).unwrap();
        assert!(GridFunction::new(g, vec![0.0; 2]).is_err());
        assert!(GridFunction::new(g, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn covariance_three_nodes() {
        let g = make_grid(0.0, 2.0, 3).unwrap();
        let c = sq_exp_covariance(&g, 1.0, 1.0).unwrap();
        let e1 = (-1.0f64).exp();
        let e4 = (-4.0f64).exp();
        let want = [[1.0, e1, e4], [e1, 1.0, e1], [e4, e1, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((c[(i, j)] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn covariance_diagonal_and_unit_lag() {
        let g = make_grid(0.0, 10.0, 11).unwrap();
        let c = sq_exp_covariance(&g, 2.5, 3.0).unwrap();
        for i in 0..11 {
            assert_eq!(c[(i, i)], 2.5);
        }
        assert!((c[(0, 3)] - 2.5 * (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn covariance_is_exactly_toeplitz() {
        let g = make_grid(-3.0, 17.0, 40).unwrap();
        let c = sq_exp_covariance(&g, 0.7, 2.3).unwrap();
        for i in 0..39 {
            for j in 0..39 {
                assert_eq!(c[(i, j)], c[(i + 1, j + 1)]);
                assert_eq!(c[(i, j)], c[(j, i)]);
            }
        }
    }

    #[test]
    fn covariance_rejects_nonpositive_params() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        assert!(sq_exp_covariance(&g, 0.0, 1.0).is_err());
        assert!(sq_exp_covariance(&g, 1.0, -1.0).is_err());
    }

    #[test]
    fn chol_identity_needs_no_jitter() {
        let f = chol_factor(&DMatrix::identity(5, 5), 0.0).unwrap();
        assert_eq!(f.jitter(), 0.0);
        assert_eq!(f.lower(), &DMatrix::<f64>::identity(5, 5));
    }

    #[test]
    fn chol_reproduces_small_covariance() {
        let g = make_grid(0.0, 2.0, 3).unwrap();
        let c = sq_exp_covariance(&g, 1.0, 1.0).unwrap();
        let f = chol_factor(&c, 0.0).unwrap();
        let back = f.lower() * f.lower().transpose();
        assert!((back - &c).abs().max() < 1e-10);
    }

    #[test]
    fn chol_rank_deficient_records_jitter() {
        let g = make_grid(0.0, 1.0, 50).unwrap();
        let c = sq_exp_covariance(&g, 1.0, 1e6).unwrap();
        let f = chol_factor(&c, 0.0).unwrap();
        assert!(f.jitter() > 0.0);
        assert!(f.jitter() <= MAX_JITTER);
        let mut target = c.clone();
        for i in 0..50 {
            target[(i, i)] += f.jitter();
        }
        let back = f.lower() * f.lower().transpose();
        let rel = (back - &target).norm() / target.norm();
        assert!(rel < 1e-8, "relative frobenius error {rel}");
    }

    #[test]
    fn chol_reports_attempted_jitters() {
        // Indefinite matrix: no jitter up to the cap can fix it.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match chol_factor(&m, 0.0) {
            Err(Error::Factorization { attempted }) => {
                assert_eq!(attempted[0], 0.0);
                assert!((attempted.last().unwrap() - 1e-2).abs() < 1e-12);
                assert_eq!(attempted.len(), 8);
            }
            other => panic!("expected factorization failure, got {other:?}"),
        }
    }

    #[test]
    fn solve_inverts_mul() {
        let g = make_grid(0.0, 10.0, 30).unwrap();
        let c = sq_exp_covariance(&g, 1.3, 2.0).unwrap();
        let f = chol_factor(&c, 1e-8).unwrap();
        let v: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = f.solve_lower(&f.mul_vec(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn prior_draw_of_zero_noise_is_zero() {
        let g = make_grid(0.0, 10.0, 20).unwrap();
        let f = chol_factor(&sq_exp_covariance(&g, 1.0, 2.0).unwrap(), 1e-8).unwrap();
        let draw = gp_prior_draw(&g, &f, &[0.0; 20]).unwrap();
        assert!(draw.values().iter().all(|&v| v == 0.0));
        assert!(gp_prior_draw(&g, &f, &[0.0; 19]).is_err());
    }

    #[test]
    fn prior_draw_moments_match_covariance() {
        let g = make_grid(0.0, 10.0, 21).unwrap();
        let l = 2.0;
        let f = chol_factor(&sq_exp_covariance(&g, 1.0, l).unwrap(), 1e-8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let k = g.k();
        let mut sum = vec![0.0; k];
        let mut sq = vec![0.0; k];
        let mut lag = vec![0.0; k - 1];
        for _ in 0..n {
            let noise: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            let v = gp_prior_draw(&g, &f, &noise).unwrap().into_values();
            for j in 0..k {
                sum[j] += v[j];
                sq[j] += v[j] * v[j];
                if j + 1 < k {
                    lag[j] += v[j] * v[j + 1];
                }
            }
        }
        let nf = n as f64;
        let var: Vec<f64> = (0..k)
            .map(|j| sq[j] / nf - (sum[j] / nf).powi(2))
            .collect();
        for &v in &var {
            assert!((0.94..=1.06).contains(&v), "node variance {v}");
        }
        let expected = (-(g.d() / l).powi(2)).exp();
        for j in 0..k - 1 {
            let cov = lag[j] / nf - (sum[j] / nf) * (sum[j + 1] / nf);
            let corr = cov / (var[j] * var[j + 1]).sqrt();
            assert!((corr - expected).abs() < 0.05, "lag-d correlation {corr}");
        }
    }
}
