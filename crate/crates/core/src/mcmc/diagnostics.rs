use serde::{Deserialize, Serialize};

use super::PosteriorSamples;

/// Mean, standard deviation and lag-1 autocorrelation of one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub mean: f64,
    pub sd: f64,
    /// `None` for a constant trace, where the autocorrelation is undefined.
    pub lag1: Option<f64>,
}

impl TraceSummary {
    pub fn of(trace: &[f64]) -> Self {
        let n = trace.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                sd: f64::NAN,
                lag1: None,
            };
        }
        let mean = trace.iter().sum::<f64>() / n as f64;
        let var = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let lag1 = if n > 1 && var > 0.0 {
            let cov = trace
                .windows(2)
                .map(|w| (w[0] - mean) * (w[1] - mean))
                .sum::<f64>()
                / n as f64;
            Some(cov / var)
        } else {
            None
        };
        Self {
            mean,
            sd: var.sqrt(),
            lag1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub draws: usize,
    pub accept_rate_a: f64,
    pub slice_expansions: f64,
    pub ellipse_shrinks: f64,
    pub a: TraceSummary,
    pub sigma: TraceSummary,
    pub l: TraceSummary,
    pub loglik: TraceSummary,
    pub wall_time: f64,
}

pub fn diagnostics(samples: &PosteriorSamples) -> DiagnosticsReport {
    DiagnosticsReport {
        draws: samples.len(),
        accept_rate_a: samples.accept_rate_a,
        slice_expansions: samples.slice_expansions,
        ellipse_shrinks: samples.ellipse_shrinks,
        a: TraceSummary::of(&samples.a_draws),
        sigma: TraceSummary::of(&samples.sigma_draws),
        l: TraceSummary::of(&samples.l_draws),
        loglik: TraceSummary::of(&samples.loglik_draws),
        wall_time: samples.wall_time,
    }
}
