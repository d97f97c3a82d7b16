//! Flat key-value experiment configuration.
//!
//! The on-disk format is one `key = value` per line, `#` comments, every key
//! optional (defaults below), unknown keys rejected so a typo cannot silently
//! fall back to a default.

use crate::dataset::{augment_pairs, make_blobs, make_moons, make_rings, PointDataset};
use crate::error::{Error, Result};
use crate::field::{build_supervisor, ResponseField, SupervisorSpec, TemperatureSchedule};
use crate::optim::{OptimizerKind, OptimizerSettings, RKDOConfig};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Blobs,
    Moons,
    Rings,
}

impl DatasetKind {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Blobs => "blobs",
            DatasetKind::Moons => "moons",
            DatasetKind::Rings => "rings",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(DatasetKind::Blobs),
            "moons" => Ok(DatasetKind::Moons),
            "rings" => Ok(DatasetKind::Rings),
            _ => Err(Error::Parse(format!(
                "unknown dataset {s:?}; expected blobs, moons, or rings"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupervisorKind {
    PositivePairs,
    KnnGaussian,
    LabelUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMethod {
    Rkdo,
    Icon,
    Both,
}

/// Complete experiment description. All fields have working defaults; the
/// stock configuration trains paired blob views with positive-pair
/// supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    /// Datasets the `compare` command sweeps over.
    pub compare_datasets: Vec<DatasetKind>,
    pub blobs_k: usize,
    pub blobs_n_per: usize,
    pub blobs_dim: usize,
    pub blobs_sigma: f64,
    pub moons_n_per: usize,
    pub moons_noise: f64,
    pub rings_k: usize,
    pub rings_n_per: usize,
    pub rings_noise: f64,
    /// Whether to double the dataset into jittered positive-pair views.
    pub pairing: bool,
    pub jitter_sigma: f64,
    pub supervisor: SupervisorKind,
    pub knn_k: usize,
    pub knn_sigma: f64,
    pub alpha: f64,
    pub recursion_depth: usize,
    /// Step count for single `train` runs.
    pub steps: usize,
    pub tau0: f64,
    pub beta: f64,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub icon_debias: f64,
    /// Optimizer-update budgets for compare sweeps; strictly increasing.
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub embedding_dim: usize,
    /// Neighborhood size for the neighborhood-accuracy metric.
    pub neighbors: usize,
    pub train_method: TrainMethod,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetKind::Blobs,
            compare_datasets: vec![DatasetKind::Blobs, DatasetKind::Moons],
            blobs_k: 3,
            blobs_n_per: 20,
            blobs_dim: 2,
            blobs_sigma: 0.06,
            moons_n_per: 30,
            moons_noise: 0.06,
            rings_k: 2,
            rings_n_per: 30,
            rings_noise: 0.05,
            pairing: true,
            jitter_sigma: 0.02,
            supervisor: SupervisorKind::PositivePairs,
            knn_k: 5,
            knn_sigma: 0.2,
            alpha: 0.2,
            recursion_depth: 3,
            steps: 100,
            tau0: 0.5,
            beta: 0.1,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.001,
            weight_decay: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            icon_debias: 0.2,
            budgets: vec![50, 100, 250, 500],
            seeds: vec![42, 123, 456, 789, 101],
            embedding_dim: 8,
            neighbors: 5,
            train_method: TrainMethod::Both,
            out_dir: None,
        }
    }
}

const VALID_KEYS: &[&str] = &[
    "dataset",
    "compare.datasets",
    "blobs.k",
    "blobs.n_per",
    "blobs.dim",
    "blobs.sigma",
    "moons.n_per",
    "moons.noise",
    "rings.k",
    "rings.n_per",
    "rings.noise",
    "pairing",
    "jitter_sigma",
    "supervisor",
    "knn.k",
    "knn.sigma",
    "alpha",
    "recursion_depth",
    "steps",
    "tau0",
    "beta",
    "optimizer",
    "learning_rate",
    "weight_decay",
    "adam.beta1",
    "adam.beta2",
    "icon.debias",
    "budgets",
    "seeds",
    "embedding_dim",
    "neighbors",
    "train.method",
    "out_dir",
];

fn parse_typed<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Parse(format!("key {key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_typed(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Parses the flat key-value format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    line_no + 1
                )));
            };
            config.apply(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = DatasetKind::parse(value)?,
            "compare.datasets" => {
                self.compare_datasets = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(DatasetKind::parse)
                    .collect::<Result<_>>()?;
            }
            "blobs.k" => self.blobs_k = parse_typed(key, value)?,
            "blobs.n_per" => self.blobs_n_per = parse_typed(key, value)?,
            "blobs.dim" => self.blobs_dim = parse_typed(key, value)?,
            "blobs.sigma" => self.blobs_sigma = parse_typed(key, value)?,
            "moons.n_per" => self.moons_n_per = parse_typed(key, value)?,
            "moons.noise" => self.moons_noise = parse_typed(key, value)?,
            "rings.k" => self.rings_k = parse_typed(key, value)?,
            "rings.n_per" => self.rings_n_per = parse_typed(key, value)?,
            "rings.noise" => self.rings_noise = parse_typed(key, value)?,
            "pairing" => {
                self.pairing = match value {
                    "augmented" => true,
                    "none" => false,
                    _ => {
                        return Err(Error::Parse(format!(
                            "key pairing: expected augmented or none, got {value:?}"
                        )))
                    }
                }
            }
            "jitter_sigma" => self.jitter_sigma = parse_typed(key, value)?,
            "supervisor" => {
                self.supervisor = match value {
                    "positive_pairs" => SupervisorKind::PositivePairs,
                    "knn_gaussian" => SupervisorKind::KnnGaussian,
                    "label_uniform" => SupervisorKind::LabelUniform,
                    _ => {
                        return Err(Error::Parse(format!(
                            "key supervisor: expected positive_pairs, knn_gaussian, or \
                             label_uniform, got {value:?}"
                        )))
                    }
                }
            }
            "knn.k" => self.knn_k = parse_typed(key, value)?,
            "knn.sigma" => self.knn_sigma = parse_typed(key, value)?,
            "alpha" => self.alpha = parse_typed(key, value)?,
            "recursion_depth" => self.recursion_depth = parse_typed(key, value)?,
            "steps" => self.steps = parse_typed(key, value)?,
            "tau0" => self.tau0 = parse_typed(key, value)?,
            "beta" => self.beta = parse_typed(key, value)?,
            "optimizer" => {
                self.optimizer = match value {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => {
                        return Err(Error::Parse(format!(
                            "key optimizer: expected adam or sgd, got {value:?}"
                        )))
                    }
                }
            }
            "learning_rate" => self.learning_rate = parse_typed(key, value)?,
            "weight_decay" => self.weight_decay = parse_typed(key, value)?,
            "adam.beta1" => self.adam_beta1 = parse_typed(key, value)?,
            "adam.beta2" => self.adam_beta2 = parse_typed(key, value)?,
            "icon.debias" => self.icon_debias = parse_typed(key, value)?,
            "budgets" => self.budgets = parse_list(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "embedding_dim" => self.embedding_dim = parse_typed(key, value)?,
            "neighbors" => self.neighbors = parse_typed(key, value)?,
            "train.method" => {
                self.train_method = match value {
                    "rkdo" => TrainMethod::Rkdo,
                    "icon" => TrainMethod::Icon,
                    "both" => TrainMethod::Both,
                    _ => {
                        return Err(Error::Parse(format!(
                            "key train.method: expected rkdo, icon, or both, got {value:?}"
                        )))
                    }
                }
            }
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            _ => {
                return Err(Error::Parse(format!(
                    "unknown config key {key:?}; valid keys: {}",
                    VALID_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds must be non-empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::invalid("seeds must be distinct"));
        }
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("budgets must be non-empty and strictly increasing"));
        }
        if self.compare_datasets.is_empty() {
            return Err(Error::invalid("compare.datasets must be non-empty"));
        }
        if !(0.0..1.0).contains(&self.icon_debias) {
            return Err(Error::invalid("icon.debias must lie in [0,1)"));
        }
        if self.embedding_dim == 0 {
            return Err(Error::invalid("embedding_dim must be positive"));
        }
        if self.neighbors == 0 {
            return Err(Error::invalid("neighbors must be positive"));
        }
        // Training parameters get their full check here so errors surface at
        // load time rather than mid-run.
        self.rkdo_config(self.steps, self.seeds[0])?.validate()
    }

    /// Builds the configured dataset family for one seed, including the
    /// pairing augmentation when enabled.
    pub fn build_dataset(&self, kind: DatasetKind, seed: u64) -> Result<PointDataset> {
        let base = match kind {
            DatasetKind::Blobs => make_blobs(
                self.blobs_k,
                self.blobs_n_per,
                self.blobs_dim,
                self.blobs_sigma,
                seed,
            )?,
            DatasetKind::Moons => make_moons(self.moons_n_per, self.moons_noise, seed)?,
            DatasetKind::Rings => make_rings(self.rings_k, self.rings_n_per, self.rings_noise, seed)?,
        };
        if self.pairing {
            augment_pairs(&base, self.jitter_sigma, seed)
        } else {
            Ok(base)
        }
    }

    /// Builds the supervisory field the configuration asks for.
    pub fn build_supervisor_field(&self, dataset: &PointDataset) -> Result<ResponseField> {
        let spec = match self.supervisor {
            SupervisorKind::PositivePairs => SupervisorSpec::PositivePairs { pairs: vec![] },
            SupervisorKind::KnnGaussian => SupervisorSpec::KnnGaussian {
                k: self.knn_k,
                sigma: self.knn_sigma,
            },
            SupervisorKind::LabelUniform => SupervisorSpec::LabelUniform,
        };
        build_supervisor(&spec, dataset)
    }

    /// Training configuration for a run of `steps` recorded steps.
    pub fn rkdo_config(&self, steps: usize, seed: u64) -> Result<RKDOConfig> {
        Ok(RKDOConfig {
            alpha: self.alpha,
            recursion_depth: self.recursion_depth,
            steps,
            schedule: TemperatureSchedule::new(self.tau0, self.beta, steps)?,
            optimizer: OptimizerSettings {
                kind: self.optimizer,
                learning_rate: self.learning_rate,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                epsilon: 1e-8,
                weight_decay: self.weight_decay,
            },
            seed,
        })
    }

    /// Canonical text rendering, used to fingerprint runs in manifests.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset = {}", self.dataset.name());
        let _ = writeln!(
            s,
            "compare.datasets = {}",
            self.compare_datasets
                .iter()
                .map(|d| d.name())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "blobs.k = {}", self.blobs_k);
        let _ = writeln!(s, "blobs.n_per = {}", self.blobs_n_per);
        let _ = writeln!(s, "blobs.dim = {}", self.blobs_dim);
        let _ = writeln!(s, "blobs.sigma = {}", self.blobs_sigma);
        let _ = writeln!(s, "moons.n_per = {}", self.moons_n_per);
        let _ = writeln!(s, "moons.noise = {}", self.moons_noise);
        let _ = writeln!(s, "rings.k = {}", self.rings_k);
        let _ = writeln!(s, "rings.n_per = {}", self.rings_n_per);
        let _ = writeln!(s, "rings.noise = {}", self.rings_noise);
        let _ = writeln!(
            s,
            "pairing = {}",
            if self.pairing { "augmented" } else { "none" }
        );
        let _ = writeln!(s, "jitter_sigma = {}", self.jitter_sigma);
        let _ = writeln!(
            s,
            "supervisor = {}",
            match self.supervisor {
                SupervisorKind::PositivePairs => "positive_pairs",
                SupervisorKind::KnnGaussian => "knn_gaussian",
                SupervisorKind::LabelUniform => "label_uniform",
            }
        );
        let _ = writeln!(s, "knn.k = {}", self.knn_k);
        let _ = writeln!(s, "knn.sigma = {}", self.knn_sigma);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "recursion_depth = {}", self.recursion_depth);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "tau0 = {}", self.tau0);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(
            s,
            "optimizer = {}",
            match self.optimizer {
                OptimizerKind::Adam => "adam",
                OptimizerKind::Sgd => "sgd",
            }
        );
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "weight_decay = {}", self.weight_decay);
        let _ = writeln!(s, "adam.beta1 = {}", self.adam_beta1);
        let _ = writeln!(s, "adam.beta2 = {}", self.adam_beta2);
        let _ = writeln!(s, "icon.debias = {}", self.icon_debias);
        let _ = writeln!(
            s,
            "budgets = {}",
            self.budgets
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(
            s,
            "seeds = {}",
            self.seeds
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "embedding_dim = {}", self.embedding_dim);
        let _ = writeln!(s, "neighbors = {}", self.neighbors);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_comments() {
        let text = "
            # experiment settings
            dataset = moons
            alpha = 0.5          # stronger pull
            seeds = 1, 2, 3
            budgets = 10,20
            pairing = none
            supervisor = knn_gaussian
        ";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.dataset, DatasetKind::Moons);
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.budgets, vec![10, 20]);
        assert!(!cfg.pairing);
        assert_eq!(cfg.supervisor, SupervisorKind::KnnGaussian);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = ExperimentConfig::parse("laerning_rate = 0.1").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("laerning_rate"), "message was {msg}");
        assert!(msg.contains("learning_rate"), "should list valid keys");
    }

    #[test]
    fn malformed_lines_and_values_are_errors() {
        assert!(ExperimentConfig::parse("alpha").is_err());
        assert!(ExperimentConfig::parse("alpha = fast").is_err());
        assert!(ExperimentConfig::parse("dataset = cifar").is_err());
    }

    #[test]
    fn validation_catches_bad_collections() {
        assert!(ExperimentConfig::parse("seeds = 1,1").is_err());
        assert!(ExperimentConfig::parse("budgets = 20,10").is_err());
        assert!(ExperimentConfig::parse("seeds = ").is_err());
        assert!(ExperimentConfig::parse("alpha = 0").is_err());
    }

    #[test]
    fn dataset_and_supervisor_construction_round_trip() {
        let cfg = ExperimentConfig::default();
        let ds = cfg.build_dataset(DatasetKind::Blobs, 42).unwrap();
        assert_eq!(ds.len(), 120, "3 blobs x 20 points, doubled by pairing");
        assert!(ds.pair_map().is_some());
        let p0 = cfg.build_supervisor_field(&ds).unwrap();
        assert_eq!(p0.len(), 120);
    }

    #[test]
    fn canonical_text_reparses_to_same_config() {
        let cfg = ExperimentConfig::default();
        let text = cfg.canonical_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
