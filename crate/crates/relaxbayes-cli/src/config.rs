//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use relaxbayes::nn::{Activation, ModelSpec};
use relaxbayes::optim::{OptimizerConfig, OptimizerKind, Schedule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub optimizer: OptimizerSection,
    pub dataset: DatasetSpec,
    #[serde(default = "default_epochs")]
    pub epochs: u64,
    pub batch_size: usize,
    /// Evaluate every this many epochs (and always after the last one).
    #[serde(default = "one")]
    pub eval_every: u64,
    /// Predictive samples for bSAM; zero means plug-in at the mean.
    #[serde(default)]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_epochs() -> u64 {
    1
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Bias-free multinomial logistic regression.
    Logreg {},
    Mlp {
        hidden: Vec<usize>,
        #[serde(default)]
        activation: ActivationName,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    #[default]
    Relu,
    Tanh,
}

impl ModelConfig {
    pub fn build(&self, input_dim: usize, num_classes: usize) -> Result<ModelSpec> {
        Ok(match self {
            ModelConfig::Logreg {} => ModelSpec::logreg(input_dim, num_classes)?,
            ModelConfig::Mlp { hidden, activation } => {
                let act = match activation {
                    ActivationName::Relu => Activation::Relu,
                    ActivationName::Tanh => Activation::Tanh,
                };
                ModelSpec::mlp(input_dim, hidden, num_classes, act)?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Sgd,
    Adam,
    SamSgd,
    SamAdam,
    Bsam,
}

impl From<OptimizerName> for OptimizerKind {
    fn from(n: OptimizerName) -> Self {
        match n {
            OptimizerName::Sgd => OptimizerKind::Sgd,
            OptimizerName::Adam => OptimizerKind::Adam,
            OptimizerName::SamSgd => OptimizerKind::SamSgd,
            OptimizerName::SamAdam => OptimizerKind::SamAdam,
            OptimizerName::Bsam => OptimizerKind::Bsam,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub kind: OptimizerName,
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    /// Total prior precision `N delta`; the per-example `delta` is this over `N`.
    #[serde(default)]
    pub n_delta: f64,
    /// Defaults to 0.05 for the SAM family and bSAM, zero otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Defaults to 0.1 for bSAM and 1e-8 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default = "default_true")]
    pub noisy_linearization: bool,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_m() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl OptimizerSection {
    pub fn new(kind: OptimizerName, lr: f64) -> Self {
        Self {
            kind,
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            n_delta: 0.0,
            rho: None,
            gamma: None,
            m: 1,
            schedule: ScheduleConfig::Constant {},
            noisy_linearization: true,
        }
    }

    /// Library optimizer config for a training set of `n_train` examples.
    pub fn to_optimizer(&self, n_train: usize, steps_per_epoch: u64, epochs: u64, seed: u64) -> OptimizerConfig {
        let mut c = OptimizerConfig::new(self.kind.into());
        c.lr = self.lr;
        c.beta1 = self.beta1;
        c.beta2 = self.beta2;
        c.delta = self.n_delta / n_train.max(1) as f64;
        if let Some(rho) = self.rho {
            c.rho = rho;
        }
        if let Some(gamma) = self.gamma {
            c.gamma = gamma;
        }
        c.n_train = n_train;
        c.m = self.m;
        c.noisy_linearization = self.noisy_linearization;
        c.seed = seed;
        c.schedule = match &self.schedule {
            ScheduleConfig::Constant {} => Schedule::Constant,
            ScheduleConfig::Cosine {} => Schedule::Cosine {
                total_steps: steps_per_epoch * epochs,
            },
            ScheduleConfig::Step {
                milestone_epochs,
                factor,
            } => Schedule::Step {
                milestones: milestone_epochs.iter().map(|e| e * steps_per_epoch).collect(),
                factor: *factor,
            },
        };
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant {},
    /// Half-cosine decay to zero over the whole run.
    Cosine {},
    Step { milestone_epochs: Vec<u64>, factor: f64 },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::Constant {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Logreg2d {
        #[serde(default = "default_logreg_n")]
        n: usize,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default)]
        seed: u64,
        /// Test-set size; defaults to `n`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_test: Option<usize>,
    },
    TwoMoons {
        #[serde(default = "default_moons_n")]
        n: usize,
        #[serde(default = "default_moons_noise")]
        noise: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_test: Option<usize>,
    },
    IdxFiles {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default = "default_classes")]
        num_classes: usize,
        #[serde(default)]
        normalization: Normalization,
    },
}

pub fn default_logreg_n() -> usize {
    30
}

pub fn default_margin() -> f64 {
    0.1
}

pub fn default_moons_n() -> usize {
    200
}

pub fn default_moons_noise() -> f64 {
    0.1
}

fn default_classes() -> usize {
    10
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Pixels in `[0, 1]`.
    #[default]
    Unit,
    /// Subtract the training-set pixel mean and divide by its standard deviation.
    Standardize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Grid values: rho, m, or S depending on the kind; unused for the noise ablation.
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Also use each seed as the seed of a synthetic dataset.
    #[serde(default)]
    pub reseed_data: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    RhoSensitivity,
    Msharpness,
    McSamples,
    NoiseAblation,
}

impl RunConfig {
    /// Parse JSON; relative dataset paths are resolved against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let DatasetSpec::IdxFiles {
            train_images,
            train_labels,
            test_images,
            test_labels,
            ..
        } = &mut cfg.dataset
        {
            for p in [train_images, train_labels, test_images, test_labels] {
                if p.is_relative() {
                    *p = base_dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be at least one".into());
        }
        if self.batch_size < self.optimizer.m || self.batch_size % self.optimizer.m != 0 {
            return bad(format!(
                "batch_size {} must be a positive multiple of m = {}",
                self.batch_size, self.optimizer.m
            ));
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least one".into());
        }
        match &self.dataset {
            DatasetSpec::Logreg2d { n, n_test, .. } | DatasetSpec::TwoMoons { n, n_test, .. } => {
                if *n < 2 || n_test.is_some_and(|t| t < 2) {
                    return bad("synthetic datasets need at least two examples per split".into());
                }
            }
            DatasetSpec::IdxFiles {
                train_images,
                train_labels,
                test_images,
                test_labels,
                num_classes,
                ..
            } => {
                for p in [train_images, train_labels, test_images, test_labels] {
                    if !p.is_file() {
                        return bad(format!("dataset file {} does not exist", p.display()));
                    }
                }
                if *num_classes < 2 {
                    return bad("num_classes must be at least two".into());
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.seeds.is_empty() {
                return bad("sweep needs at least one seed".into());
            }
            if s.kind != SweepKind::NoiseAblation && s.values.is_empty() {
                return bad("sweep grid is empty".into());
            }
            if s.reseed_data && matches!(self.dataset, DatasetSpec::IdxFiles { .. }) {
                return bad("reseed_data needs a synthetic dataset".into());
            }
            let integral = matches!(s.kind, SweepKind::Msharpness | SweepKind::McSamples);
            if integral && s.values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
                return bad("m and S sweep values must be non-negative integers".into());
            }
        }
        // Steps per epoch do not matter for validation.
        self.optimizer.to_optimizer(2, 1, self.epochs, self.seed).validate()?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"kind": "logreg"},
        "optimizer": {"kind": "bsam", "lr": 0.1},
        "dataset": {"kind": "logreg2d"},
        "batch_size": 30
    }"#;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::from_json(MINIMAL, Path::new(".")).unwrap();
        c.validate().unwrap();
        assert_eq!(c.epochs, 1);
        assert_eq!(c.optimizer.m, 1);
        assert!(c.optimizer.noisy_linearization);
        assert_eq!(
            c.dataset,
            DatasetSpec::Logreg2d {
                n: 30,
                margin: 0.1,
                seed: 0,
                n_test: None
            }
        );
        let o = c.optimizer.to_optimizer(30, 1, 1, 0);
        assert_eq!((o.rho, o.gamma), (0.05, 0.1));
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        let cases = [
            MINIMAL.replace("\"batch_size\"", "\"batchsize\": 1, \"batch_size\""),
            MINIMAL.replace("\"lr\": 0.1", "\"lr\": 0.1, \"rh0\": 0.1"),
            MINIMAL.replace("{\"kind\": \"logreg2d\"}", "{\"kind\": \"logreg2d\", \"nn\": 3}"),
            MINIMAL.replace("{\"kind\": \"logreg\"}", "{\"kind\": \"logreg\", \"hidden\": [3]}"),
            MINIMAL.replace("\"lr\": 0.1", "\"lr\": 0.1, \"schedule\": {\"kind\": \"cosine\", \"steps\": 3}"),
        ];
        for text in cases {
            let err = RunConfig::from_json(&text, Path::new(".")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{err}");
            assert_eq!(err.exit_code(), 1);
        }
    }

    #[test]
    fn batch_must_be_multiple_of_m() {
        let mut c = RunConfig::from_json(MINIMAL, Path::new(".")).unwrap();
        c.optimizer.m = 4;
        assert!(c.validate().is_err());
        c.batch_size = 32;
        c.validate().unwrap();
    }

    #[test]
    fn missing_idx_file_is_config_error() {
        let text = MINIMAL.replace(
            "{\"kind\": \"logreg2d\"}",
            r#"{"kind": "idx_files", "train_images": "nope", "train_labels": "nope",
                "test_images": "nope", "test_labels": "nope"}"#,
        );
        let c = RunConfig::from_json(&text, Path::new("/nonexistent")).unwrap();
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("/nonexistent/nope"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_json(MINIMAL, Path::new(".")).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
