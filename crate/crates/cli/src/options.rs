use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use mrp_core::io::EventFormat;
use mrp_core::{ChainConfig, EventStream, LengthScalePrior, PriorSpec, TimeGrid};

/// Sampler and grid settings shared by `infer` and `evaluate`.
#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Grid nodes for the latent log intensity.
    #[arg(long, default_value_t = 200)]
    pub k: usize,
    /// Quadrature sub-intervals per grid cell.
    #[arg(long, default_value_t = 8)]
    pub refine: usize,
    #[arg(long = "burn-in", default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for independent chains (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Length-scale prior: `exp:RATE` or `lognormal:MU,SD` (default `exp:10/span`).
    #[arg(long = "prior-l", value_parser = parse_l_prior)]
    pub prior_l: Option<LengthScalePrior>,
    /// Support of the gamma shape `a`, as `LO,HI` (default 0.01,100).
    #[arg(long = "a-bounds", value_parser = parse_pair, allow_hyphen_values = true)]
    pub a_bounds: Option<(f64, f64)>,
    /// Support of the GP magnitude `σ`, as `LO,HI` (default 0.01,100).
    #[arg(long = "sigma-bounds", value_parser = parse_pair, allow_hyphen_values = true)]
    pub sigma_bounds: Option<(f64, f64)>,
    /// Prior mean of the log intensity: `zero`, `empirical` (log of events per unit time) or a number.
    #[arg(long = "prior-mean", value_parser = parse_prior_mean)]
    pub prior_mean: Option<PriorMean>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorMean {
    Zero,
    Empirical,
    Fixed(f64),
}

pub fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(',').context("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().with_context(|| format!("bad number {lo:?}"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("bad number {hi:?}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        bail!("need finite LO < HI, got {lo},{hi}");
    }
    Ok((lo, hi))
}

pub fn parse_l_prior(s: &str) -> Result<LengthScalePrior> {
    let (kind, rest) = s.split_once(':').context("expected exp:RATE or lognormal:MU,SD")?;
    match kind.trim().to_ascii_lowercase().as_str() {
        "exp" | "exponential" => {
            let rate: f64 = rest.trim().parse().with_context(|| format!("bad rate {rest:?}"))?;
            if !(rate > 0.0 && rate.is_finite()) {
                bail!("rate must be positive");
            }
            Ok(LengthScalePrior::Exponential { rate })
        }
        "lognormal" => {
            let (mu, sd) = rest.split_once(',').context("expected lognormal:MU,SD")?;
            let mu: f64 = mu.trim().parse().with_context(|| format!("bad mu {mu:?}"))?;
            let sd: f64 = sd.trim().parse().with_context(|| format!("bad sd {sd:?}"))?;
            if !(sd > 0.0 && mu.is_finite() && sd.is_finite()) {
                bail!("need finite MU and positive SD");
            }
            Ok(LengthScalePrior::LogNormal { mu, sd })
        }
        other => bail!("unknown prior kind {other:?} (exp, lognormal)"),
    }
}

pub fn parse_prior_mean(s: &str) -> Result<PriorMean> {
    match s.trim().to_ascii_lowercase().as_str() {
        "zero" => Ok(PriorMean::Zero),
        "empirical" => Ok(PriorMean::Empirical),
        other => {
            let m: f64 = other.parse().with_context(|| format!("expected zero, empirical or a number, got {s:?}"))?;
            if !m.is_finite() {
                bail!("prior mean must be finite");
            }
            Ok(PriorMean::Fixed(m))
        }
    }
}

pub fn parse_format(s: &str) -> Result<EventFormat> {
    Ok(s.parse::<EventFormat>()?)
}

impl ChainArgs {
    pub fn config(&self) -> ChainConfig {
        ChainConfig {
            burn_in: self.burn_in,
            samples: self.samples,
            thin: self.thin,
            seed: self.seed,
            k: self.k,
            refine: self.refine,
            ..ChainConfig::default()
        }
    }

    /// Whether any flag overrides a scenario's own prior choice.
    pub fn overrides_prior(&self) -> bool {
        self.prior_l.is_some() || self.a_bounds.is_some() || self.sigma_bounds.is_some() || self.prior_mean.is_some()
    }

    /// Applies the prior flags on top of `base`.
    pub fn prior(&self, mut base: PriorSpec, stream: &EventStream) -> PriorSpec {
        if let Some(p) = self.prior_l {
            base = base.with_l_prior(p);
        }
        if let Some((lo, hi)) = self.a_bounds {
            base.log_a_bounds = (lo.ln(), hi.ln());
        }
        if let Some((lo, hi)) = self.sigma_bounds {
            base.log_sigma_bounds = (lo.ln(), hi.ln());
        }
        match self.prior_mean {
            None | Some(PriorMean::Zero) => {}
            Some(PriorMean::Empirical) => base = base.with_empirical_mean(stream),
            Some(PriorMean::Fixed(m)) => base.mean_log_intensity = m,
        }
        base
    }

    pub fn default_prior(&self, grid: &TimeGrid, stream: &EventStream) -> PriorSpec {
        self.prior(PriorSpec::default_for(grid), stream)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("a-bounds", self.a_bounds), ("sigma-bounds", self.sigma_bounds)] {
            if let Some((lo, _)) = b {
                if !(lo > 0.0) {
                    bail!("--{name} must be positive");
                }
            }
        }
        if self.jobs == Some(0) {
            bail!("--jobs must be at least 1");
        }
        self.config().validate()?;
        Ok(())
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            b = b.num_threads(j);
        }
        b.build().context("building worker pool")
    }
}

/// Output directory flag shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Directory for all written files (created if missing).
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
}

impl OutArgs {
    pub fn ensure(&self) -> Result<&PathBuf> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(&self.out_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_flag_forms() {
        assert_eq!(parse_l_prior("exp:0.2").unwrap(), LengthScalePrior::Exponential { rate: 0.2 });
        assert_eq!(
            parse_l_prior("lognormal:-1.4,0.5").unwrap(),
            LengthScalePrior::LogNormal { mu: -1.4, sd: 0.5 }
        );
        assert!(parse_l_prior("exp:-1").is_err());
        assert!(parse_l_prior("gamma:1,2").is_err());
        assert!(parse_l_prior("lognormal:1").is_err());
    }

    #[test]
    fn pairs_and_means() {
        assert_eq!(parse_pair("-5, 10").unwrap(), (-5.0, 10.0));
        assert!(parse_pair("3,1").is_err());
        assert!(parse_pair("3").is_err());
        assert_eq!(parse_prior_mean("Empirical").unwrap(), PriorMean::Empirical);
        assert_eq!(parse_prior_mean("-4.5").unwrap(), PriorMean::Fixed(-4.5));
        assert!(parse_prior_mean("nan").is_err());
    }
}
