//! Declarative configuration: one TOML table per subcommand, with every
//! protocol default built in.

use std::path::Path;

use acbias::datagen::{ArConfig, TargetSpec};
use acbias::fastkan::RbfGrid;
use acbias::theory::{Density, SplineBasisSpec};
use acbias::trainer::{RunSpec, TrainConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn rho_steps(from: usize, to: usize) -> Vec<f64> {
    (from..=to).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArEntry {
    pub order: usize,
    #[serde(default)]
    pub rho2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    pub omega_low: f64,
    pub omega_mid: f64,
    pub omega_high: f64,
    pub noise_sd: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        let t = TargetSpec::default();
        Self { omega_low: t.omega_low, omega_mid: t.omega_mid, omega_high: t.omega_high, noise_sd: t.noise_sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub ar_configs: Vec<ArEntry>,
    pub rho_grid: Vec<f64>,
    /// Seeds 0..seeds; the protocol uses 100, the default is 10.
    pub seeds: u64,
    pub variants: Vec<String>,
    pub length: usize,
    pub train_ratio: f64,
    pub hidden_width: usize,
    pub rbf_lo: f64,
    pub rbf_hi: f64,
    pub rbf_size: usize,
    pub layernorm: bool,
    pub base_path: bool,
    pub target: TargetSection,
    pub train: TrainSection,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let grid = RbfGrid::default();
        Self {
            ar_configs: vec![
                ArEntry { order: 1, rho2: 0.0 },
                ArEntry { order: 2, rho2: 0.1 },
                ArEntry { order: 5, rho2: 0.01 },
            ],
            rho_grid: rho_steps(1, 8),
            seeds: 10,
            variants: Variant::ALL.iter().map(|v| v.to_string()).collect(),
            length: 5000,
            train_ratio: 0.8,
            hidden_width: 50,
            rbf_lo: grid.lo,
            rbf_hi: grid.hi,
            rbf_size: grid.size,
            layernorm: true,
            base_path: true,
            target: TargetSection::default(),
            train: TrainSection::default(),
        }
    }
}

impl ExperimentSection {
    pub fn variants(&self) -> Result<Vec<Variant>, CliError> {
        let mut out: Vec<Variant> = self
            .variants
            .iter()
            .map(|s| s.parse::<Variant>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<_, _>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.ar_configs.is_empty() {
            return Err(CliError::usage("experiment.ar_configs is empty"));
        }
        if self.rho_grid.is_empty() {
            return Err(CliError::usage("experiment.rho_grid is empty"));
        }
        if self.seeds == 0 {
            return Err(CliError::usage("experiment.seeds must be positive"));
        }
        if self.variants()?.is_empty() {
            return Err(CliError::usage("experiment.variants is empty"));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(CliError::usage("experiment.train_ratio must lie in (0, 1)"));
        }
        if self.hidden_width < 2 {
            return Err(CliError::usage("experiment.hidden_width must be at least 2"));
        }
        // surface generator and optimizer errors as usage errors
        for entry in &self.ar_configs {
            for &rho in &self.rho_grid {
                let spec = self.run_spec(entry, rho, Variant::Kan, 0);
                spec.ar.validate().map_err(|e| CliError::Usage(e.to_string()))?;
                spec.target.validate().map_err(|e| CliError::Usage(e.to_string()))?;
                spec.grid.validate().map_err(|e| CliError::Usage(e.to_string()))?;
                spec.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn run_spec(&self, entry: &ArEntry, rho1: f64, variant: Variant, seed: u64) -> RunSpec {
        let t = &self.train;
        RunSpec {
            ar: ArConfig::new(entry.order, rho1, entry.rho2, self.length, seed),
            target: TargetSpec {
                omega_low: self.target.omega_low,
                omega_mid: self.target.omega_mid,
                omega_high: self.target.omega_high,
                noise_sd: self.target.noise_sd,
            },
            train_ratio: self.train_ratio,
            hidden_width: self.hidden_width,
            grid: RbfGrid { lo: self.rbf_lo, hi: self.rbf_hi, size: self.rbf_size },
            layernorm: self.layernorm,
            base_path: self.base_path,
            variant,
            train: TrainConfig {
                learning_rate: t.learning_rate,
                batch_size: t.batch_size,
                epochs: t.epochs,
                beta1: t.beta1,
                beta2: t.beta2,
                epsilon: t.epsilon,
                seed,
            },
        }
    }

    /// Every run for one AR entry, ordered by (variant, ρ1, seed).
    pub fn runs_for(&self, entry: &ArEntry) -> Result<Vec<RunSpec>, CliError> {
        let mut out = Vec::new();
        for variant in self.variants()? {
            for &rho in &self.rho_grid {
                for seed in 0..self.seeds {
                    out.push(self.run_spec(entry, rho, variant, seed));
                }
            }
        }
        Ok(out)
    }

    /// The single-lag-group entry (N = 1).
    pub fn order_one(&self) -> Result<&ArEntry, CliError> {
        self.ar_configs
            .iter()
            .find(|e| e.order == 1)
            .ok_or_else(|| CliError::usage("epoch dynamics needs an ar_configs entry with order = 1"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    pub rho_grid: Vec<f64>,
    pub lags: Vec<usize>,
    pub degrees: Vec<usize>,
    pub grids: Vec<usize>,
    pub densities: Vec<String>,
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            rho_grid: rho_steps(0, 8),
            lags: vec![3, 6, 15],
            degrees: vec![3],
            grids: vec![8],
            densities: vec!["uniform".into()],
        }
    }
}

fn check_rhos(name: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::usage(format!("{name} is empty")));
    }
    if let Some(bad) = grid.iter().find(|r| !(r.abs() < 1.0)) {
        return Err(CliError::usage(format!("{name} value {bad} is outside (-1, 1)")));
    }
    Ok(())
}

fn check_spline(lags: &[usize], degrees: &[usize], grids: &[usize]) -> Result<(), CliError> {
    if lags.is_empty() || degrees.is_empty() || grids.is_empty() {
        return Err(CliError::usage("lags, degrees and grids must be non-empty"));
    }
    if lags.contains(&0) {
        return Err(CliError::usage("lag counts must be positive"));
    }
    if let Some(g) = grids.iter().find(|&&g| g < 2) {
        return Err(CliError::usage(format!("spline grid {g} needs at least 2 points")));
    }
    if let Some(k) = degrees.iter().find(|&&k| k > 8) {
        return Err(CliError::usage(format!("spline degree {k} is unsupported (max 8)")));
    }
    Ok(())
}

impl TheorySection {
    pub fn densities(&self) -> Result<Vec<Density>, CliError> {
        self.densities.iter().map(|s| s.parse::<Density>().map_err(|e| CliError::Usage(e.to_string()))).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_rhos("theory.rho_grid", &self.rho_grid)?;
        check_spline(&self.lags, &self.degrees, &self.grids)?;
        if self.densities()?.is_empty() {
            return Err(CliError::usage("theory.densities is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualSection {
    pub rho_grid: Vec<f64>,
    pub samples: Vec<usize>,
    pub lags: usize,
    pub degree: usize,
    pub grid: usize,
    pub seed: u64,
}

impl Default for ResidualSection {
    fn default() -> Self {
        Self { rho_grid: rho_steps(0, 8), samples: vec![10_000, 100_000], lags: 3, degree: 3, grid: 8, seed: 11 }
    }
}

impl ResidualSection {
    pub fn spec(&self) -> Result<SplineBasisSpec, CliError> {
        let (a, b) = Density::Normal.default_domain();
        SplineBasisSpec::new(self.grid, self.degree, a, b).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_rhos("residual.rho_grid", &self.rho_grid)?;
        check_spline(&[self.lags], &[self.degree], &[self.grid])?;
        if self.samples.is_empty() || self.samples.iter().any(|&n| n <= 10 * self.lags) {
            return Err(CliError::usage("residual.samples must be non-empty and exceed 10 x lags"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeDecaySection {
    pub rho_grid: Vec<f64>,
    pub lags: usize,
    pub degree: usize,
    pub grid: usize,
    /// Step size as a fraction of 1/λ_max.
    pub eta_fraction: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for ModeDecaySection {
    fn default() -> Self {
        Self { rho_grid: vec![0.0, 0.5, 0.8], lags: 3, degree: 2, grid: 4, eta_fraction: 0.5, steps: 2000, seed: 5 }
    }
}

impl ModeDecaySection {
    pub fn validate(&self) -> Result<(), CliError> {
        check_rhos("mode_decay.rho_grid", &self.rho_grid)?;
        check_spline(&[self.lags], &[self.degree], &[self.grid])?;
        if !(self.eta_fraction > 0.0 && self.eta_fraction < 1.0) {
            return Err(CliError::usage("mode_decay.eta_fraction must lie in (0, 1)"));
        }
        if self.steps < 2 {
            return Err(CliError::usage("mode_decay.steps must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSection {
    /// Seeds exported per (N, ρ1); `--seeds` overrides.
    pub seeds: u64,
}

impl Default for GenSection {
    fn default() -> Self {
        Self { seeds: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    pub theory: TheorySection,
    pub residual: ResidualSection,
    pub mode_decay: ModeDecaySection,
    pub gen: GenSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical serialization; hashed into every manifest.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_protocol() {
        let c = Config::default();
        let e = &c.experiment;
        assert_eq!(e.ar_configs.len(), 3);
        assert_eq!(e.ar_configs.iter().map(|a| 3 * a.order).collect::<Vec<_>>(), vec![3, 6, 15]);
        assert_eq!(e.rho_grid.len(), 8);
        assert_eq!(e.seeds, 10);
        assert_eq!(e.train.epochs, 150);
        assert_eq!(e.train.batch_size, 256);
        assert_eq!(e.train.learning_rate, 0.005);
        assert_eq!(e.length, 5000);
        let spec = e.run_spec(&e.ar_configs[2], 0.4, Variant::DctKan, 3);
        assert_eq!(spec.kan_config().widths, vec![15, 50, 1]);
        assert_eq!(spec.train.seed, 3);
        c.experiment.validate().unwrap();
        c.theory.validate().unwrap();
        c.residual.validate().unwrap();
        c.mode_decay.validate().unwrap();
    }

    #[test]
    fn epoch_dynamics_run_count() {
        let e = ExperimentSection::default();
        assert_eq!(e.runs_for(e.order_one().unwrap()).unwrap().len(), 2 * 8 * 10);
    }

    #[test]
    fn partial_toml_and_round_trip() {
        let c = Config::from_toml("[experiment]\nseeds = 3\nrho_grid = [0.2]\n[experiment.train]\nepochs = 4\n").unwrap();
        assert_eq!(c.experiment.seeds, 3);
        assert_eq!(c.experiment.train.epochs, 4);
        assert_eq!(c.experiment.train.batch_size, 256);
        assert_eq!(c.theory, TheorySection::default());
        let back = Config::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(Config::from_toml("[experiment]\nseedz = 3\n").is_err());
        assert!(Config::from_toml("[experiment]\nseeds = \"ten\"\n").is_err());
        let c = Config::from_toml("[experiment]\nrho_grid = []\n").unwrap();
        assert!(c.experiment.validate().is_err());
        let c = Config::from_toml("[experiment]\nrho_grid = [0.95]\n[[experiment.ar_configs]]\norder = 2\nrho2 = 0.1\n").unwrap();
        assert!(c.experiment.validate().is_err());
        let c = Config::from_toml("[theory]\ngrids = [1]\n").unwrap();
        assert!(c.theory.validate().is_err());
        let c = Config::from_toml("[theory]\ndensities = [\"cauchy\"]\n").unwrap();
        assert!(c.theory.validate().is_err());
        let c = Config::from_toml("[experiment]\nvariants = [\"mlp\"]\n").unwrap();
        assert!(c.experiment.validate().is_err());
        let c = Config::from_toml("[[experiment.ar_configs]]\norder = 2\n").unwrap();
        assert!(c.experiment.order_one().is_err());
    }
}
