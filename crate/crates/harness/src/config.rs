//! Experiment configuration.
//!
//! A config is a single JSON object. Every field has a default, so `{}` is a
//! valid config describing the default desk-scale Ginibre run.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use circlaw::Ensemble;
use serde::{Deserialize, Serialize};

/// A statistic evaluated on every sampled spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Semi-discrete `W₁` to the uniform disk.
    W1Sd,
    /// Discrete `W₁` on a pixel grid, exact network simplex.
    W1Oracle,
    /// Largest discrepancy over centred balls.
    KolmogorovBall,
    /// Multiscale discrepancy `D_p`.
    DP,
    /// Grid maximum of `|U_n^r − U_∞|` with `r = 1/n`.
    PotentialGap,
    /// Pair energy against an independent sample, `r = κ/√n`.
    PairEnergy,
    /// `W₁` of the mean Ginibre ESD; depends on `n` only.
    MeanEsdW1,
    /// Lipschitz lower bound on `W₁`.
    LowerBound,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::W1Sd,
        Metric::W1Oracle,
        Metric::KolmogorovBall,
        Metric::DP,
        Metric::PotentialGap,
        Metric::PairEnergy,
        Metric::MeanEsdW1,
        Metric::LowerBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::W1Sd => "w1_sd",
            Metric::W1Oracle => "w1_oracle",
            Metric::KolmogorovBall => "kolmogorov_ball",
            Metric::DP => "d_p",
            Metric::PotentialGap => "potential_gap",
            Metric::PairEnergy => "pair_energy",
            Metric::MeanEsdW1 => "mean_esd_w1",
            Metric::LowerBound => "lower_bound",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match Metric::ALL.iter().find(|m| m.name() == s) {
            Some(m) => Ok(*m),
            None => bail!("unknown metric `{s}`"),
        }
    }
}

/// Numerical parameters shared by all metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Raster resolution of the disk quadrature.
    pub resolution: usize,
    /// Mass tolerance of the dual ascent, as a multiple of `1/n`.
    pub tol_mass: f64,
    pub max_iters: usize,
    /// Pair-energy cutoff `r = κ/√n`.
    pub kappa: f64,
    /// Localization radius `R > 1` of the potential gap.
    #[serde(rename = "R_loc")]
    pub r_loc: f64,
    /// Exponent slack of the rate checks.
    pub epsilon: f64,
    /// Exponent of `d_p`.
    pub p: f64,
    /// Pixel grid of the discrete oracle.
    pub oracle_grid: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            resolution: 1024,
            tol_mass: 1e-3,
            max_iters: 200,
            kappa: 0.25,
            r_loc: 1.01,
            epsilon: 0.2,
            p: 1.0,
            oracle_grid: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: Ensemble,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub master_seed: u64,
    pub metrics: Vec<Metric>,
    pub params: SolverParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ensemble: Ensemble::ComplexGinibre,
            sizes: vec![16, 32, 64, 128, 256],
            replicas: 20,
            master_seed: 20240101,
            metrics: vec![Metric::W1Sd],
            params: SolverParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.sizes.is_empty(), "no sizes given");
        ensure!(self.sizes[0] >= 1, "sizes must be positive");
        ensure!(self.sizes.windows(2).all(|w| w[0] < w[1]), "sizes must be strictly increasing");
        ensure!(self.replicas >= 1, "at least one replica is required");
        ensure!(!self.metrics.is_empty(), "no metrics given");
        ensure!(self.ensemble != Ensemble::Custom, "custom points cannot be sampled");
        let p = &self.params;
        ensure!(p.r_loc > 1.0 && p.r_loc.is_finite(), "R_loc must exceed 1, got {}", p.r_loc);
        ensure!(p.kappa > 0.0 && p.kappa.is_finite(), "kappa must be positive");
        ensure!(p.tol_mass > 0.0, "tol_mass must be positive");
        ensure!(p.resolution >= 64, "resolution must be at least 64");
        ensure!(p.epsilon >= 0.0 && p.epsilon < 0.5, "epsilon must lie in [0, 1/2)");
        ensure!(p.p >= 1.0, "p must be at least 1");
        ensure!(p.oracle_grid >= 2, "oracle grid too small");
        Ok(())
    }
}
