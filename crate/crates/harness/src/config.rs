use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lti_ident::estimator::FitConfig;
use lti_ident::linalg::Fingerprint;
use lti_ident::physical::DcMotorParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Unit-parameter DC motor, one input, two outputs.
    DcMotor,
    /// Random square system, noise-free observations.
    Table1Cell,
    /// Random square system with observation noise.
    Table3Cell,
    /// Any dimensions; nothing forced.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DesignKind {
    /// One high-variance component per environment over a low base.
    MaxVariability,
    /// Variances drawn uniformly from `[variance_low, variance_high]`.
    RandomUniform,
}

/// One experiment cell, run once per seed.
///
/// Serialized as a flat document: the fit settings appear at top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub d_u: usize,
    /// State dimension for `custom`; defaults to `d_u`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_x: Option<usize>,
    /// Output dimension for `custom`; defaults to `d_u`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_y: Option<usize>,
    pub design: DesignKind,
    /// Environment count of random designs; defaults to `d_u + 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_envs: Option<usize>,
    pub variance_low: f64,
    pub variance_high: f64,
    pub b_identity: bool,
    pub c_identity: bool,
    pub control_mean_nonzero: bool,
    /// Control means are drawn uniformly from `[-mean_scale, mean_scale]`.
    pub mean_scale: f64,
    pub obs_noise_var: f64,
    pub steps_per_env: usize,
    pub validation_fraction: f64,
    pub dt: f64,
    pub motor_r: f64,
    pub motor_l: f64,
    pub motor_k: f64,
    pub motor_j: f64,
    pub motor_d: f64,
    #[serde(flatten)]
    pub fit: FitConfig,
    pub seeds: Vec<u64>,
    pub persist_datasets: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(ExperimentKind::Custom)
    }
}

/// Factor names a result table can group by, in column order.
pub const FACTORS: &[&str] = &[
    "kind",
    "d_u",
    "design",
    "b_identity",
    "c_identity",
    "control_mean_nonzero",
    "obs_noise_var",
    "steps_per_env",
    "epochs",
];

impl ExperimentConfig {
    /// Defaults of each kind: the reference training setup for the random
    /// systems and the reference motor run for `dc_motor`.
    pub fn preset(kind: ExperimentKind) -> Self {
        let motor = DcMotorParams::default();
        let base = Self {
            kind,
            d_u: 3,
            d_x: None,
            d_y: None,
            design: DesignKind::MaxVariability,
            num_envs: None,
            variance_low: 0.1,
            variance_high: 1.0,
            b_identity: false,
            c_identity: false,
            control_mean_nonzero: true,
            mean_scale: 1.0,
            obs_noise_var: 0.0,
            steps_per_env: 12_000,
            validation_fraction: 0.1,
            dt: 1e-2,
            motor_r: motor.r,
            motor_l: motor.l,
            motor_k: motor.k,
            motor_j: motor.j,
            motor_d: motor.d,
            fit: FitConfig::default(),
            seeds: (0..5).collect(),
            persist_datasets: true,
            output_dir: None,
        };
        match kind {
            ExperimentKind::DcMotor => Self {
                d_u: 1,
                design: DesignKind::RandomUniform,
                num_envs: Some(3),
                control_mean_nonzero: false,
                steps_per_env: 5000,
                fit: FitConfig {
                    learning_rate: 1e-2,
                    epochs: 50,
                    batch_size: 8,
                    ..FitConfig::default()
                },
                ..base
            },
            ExperimentKind::Table3Cell => Self {
                d_u: 2,
                design: DesignKind::RandomUniform,
                seeds: (0..3).collect(),
                ..base
            },
            ExperimentKind::Table1Cell | ExperimentKind::Custom => base,
        }
    }

    pub fn motor_params(&self) -> DcMotorParams {
        DcMotorParams {
            r: self.motor_r,
            l: self.motor_l,
            k: self.motor_k,
            j: self.motor_j,
            d: self.motor_d,
        }
    }

    /// `(d_x, d_u, d_y)` of the generating system.
    pub fn dims(&self) -> (usize, usize, usize) {
        match self.kind {
            ExperimentKind::DcMotor => (2, 1, 2),
            ExperimentKind::Custom => (
                self.d_x.unwrap_or(self.d_u),
                self.d_u,
                self.d_y.unwrap_or(self.d_u),
            ),
            _ => (self.d_u, self.d_u, self.d_u),
        }
    }

    pub fn env_count(&self) -> usize {
        match self.design {
            DesignKind::MaxVariability => self.d_u + 1,
            DesignKind::RandomUniform => self.num_envs.unwrap_or(self.d_u + 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        if self.seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        if self.d_u == 0 {
            bail!("d_u must be positive");
        }
        let (d_x, d_u, d_y) = self.dims();
        match self.kind {
            ExperimentKind::DcMotor if self.d_u != 1 => bail!("dc_motor has a single input; set d_u = 1"),
            ExperimentKind::Table1Cell if self.obs_noise_var != 0.0 => {
                bail!("table1_cell is noise-free; use table3_cell for observation noise")
            }
            ExperimentKind::Custom if d_x == 0 || d_y < d_u => {
                bail!("custom dimensions need d_x > 0 and d_y >= d_u")
            }
            _ => {}
        }
        if self.kind != ExperimentKind::Custom && (self.d_x.is_some() || self.d_y.is_some()) {
            bail!("d_x and d_y can only be set for custom experiments");
        }
        if self.design == DesignKind::MaxVariability && self.num_envs.is_some_and(|n| n != self.d_u + 1) {
            bail!("max_variability designs have exactly d_u + 1 environments");
        }
        if self.env_count() < 2 {
            bail!("at least two environments are required");
        }
        if !(self.variance_low > 0.0 && self.variance_low < self.variance_high && self.variance_high.is_finite()) {
            bail!("need 0 < variance_low < variance_high");
        }
        if !(self.obs_noise_var >= 0.0 && self.obs_noise_var.is_finite()) {
            bail!("obs_noise_var must be nonnegative");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            bail!("validation_fraction must lie in (0, 1)");
        }
        if self.steps_per_env < 2 {
            bail!("steps_per_env must be at least 2");
        }
        if !(self.dt > 0.0 && self.mean_scale > 0.0) {
            bail!("dt and mean_scale must be positive");
        }
        Ok(())
    }

    /// Identifies the cell: every setting except the seed list and the
    /// output location.
    pub fn fingerprint(&self) -> String {
        let cell = Self {
            seeds: Vec::new(),
            output_dir: None,
            persist_datasets: false,
            ..self.clone()
        };
        let json = serde_json::to_string(&cell).expect("config serializes");
        Fingerprint::new().tag("ExperimentConfig").tag(&json).hex()
    }

    /// Value of a table factor, formatted for CSV.
    pub fn factor(&self, name: &str) -> Option<String> {
        let value = match name {
            "kind" => serde_plain(&self.kind),
            "d_u" => self.d_u.to_string(),
            "design" => serde_plain(&self.design),
            "b_identity" => self.b_identity.to_string(),
            "c_identity" => self.c_identity.to_string(),
            "control_mean_nonzero" => self.control_mean_nonzero.to_string(),
            "obs_noise_var" => self.obs_noise_var.to_string(),
            "steps_per_env" => self.steps_per_env.to_string(),
            "epochs" => self.fit.epochs.to_string(),
            _ => return None,
        };
        Some(value)
    }

    /// Parses a flat TOML document. `kind` selects the preset the remaining
    /// keys override; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().context("parsing experiment config")?;
        let kind = match table.get("kind") {
            Some(v) => v.clone().try_into::<ExperimentKind>().context("field `kind`")?,
            None => ExperimentKind::Custom,
        };
        let mut merged = toml::Table::try_from(Self::preset(kind))?;
        let known: Vec<String> = merged
            .keys()
            .cloned()
            .chain(["d_x", "d_y", "num_envs", "output_dir"].map(String::from))
            .collect();
        for (key, value) in table {
            if !known.contains(&key) {
                bail!("unknown config key `{key}`");
            }
            merged.insert(key, value);
        }
        Ok(merged.try_into()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use lti_ident::estimator::Weighting;

    #[test]
    fn presets_validate() {
        for kind in [
            ExperimentKind::DcMotor,
            ExperimentKind::Table1Cell,
            ExperimentKind::Table3Cell,
            ExperimentKind::Custom,
        ] {
            ExperimentConfig::preset(kind).validate().unwrap();
        }
    }

    #[test]
    fn flat_toml_roundtrip() {
        let cfg = ExperimentConfig::preset(ExperimentKind::DcMotor);
        let text = cfg.to_toml_string().unwrap();
        assert!(text.contains("learning_rate = 0.01"));
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn kind_selects_preset_and_keys_override() {
        let cfg = ExperimentConfig::from_toml_str(
            "kind = \"dc_motor\"\nepochs = 3\nweighting = \"covariance\"\nseeds = [7]\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::DcMotor);
        assert_eq!(cfg.fit.epochs, 3);
        assert_eq!(cfg.fit.batch_size, 8);
        assert_eq!(cfg.fit.weighting, Weighting::Covariance);
        assert_eq!(cfg.seeds, vec![7]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml_str("learning_rat = 0.1").is_err());
        let cfg = ExperimentConfig::from_toml_str("kind = \"table1_cell\"\nobs_noise_var = 0.1").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::from_toml_str("seeds = []").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fingerprint_ignores_seeds_and_location() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            seeds: vec![9],
            output_dir: Some("/tmp/x".into()),
            ..a.clone()
        };
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = ExperimentConfig { d_u: 2, ..a.clone() };
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
