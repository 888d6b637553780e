//! One declarative TOML file configures every subcommand. All keys have
//! defaults; flags may override a few of them (seed, target, output paths).

use std::path::{Path, PathBuf};

use ppsr_core::nmf::MultiViewConfig;
use ppsr_core::paillier::FixedPointCodec;
use ppsr_core::similarity::{SimilarityError, SimilarityWeights};
use ppsr_core::synth::{SyntheticSpec, ViewPattern};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub similarity: SimilarityConfig,
    #[serde(default)]
    pub crypto: CryptoConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// "synthetic", "lastfm", "delicious", or "movielens-hetrec".
    #[serde(default = "default_kind")]
    pub kind: String,
    /// Directory containing the HetRec .dat files (non-synthetic kinds).
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: SyntheticConfig,
}

fn default_kind() -> String {
    "synthetic".into()
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            path: None,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_items: usize,
    pub n_users: usize,
    pub k_true: usize,
    pub n_views: usize,
    pub noise: f64,
    /// "informative" or "complementary".
    pub pattern: String,
    pub rating_density: f64,
    pub social_signal: bool,
    pub rating_signal: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_items: 90,
            n_users: 60,
            k_true: 3,
            n_views: 2,
            noise: 0.4,
            pattern: "informative".into(),
            rating_density: 0.5,
            social_signal: true,
            rating_signal: true,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn to_spec(&self, seed_override: Option<u64>) -> Result<SyntheticSpec, CliError> {
        let pattern = match self.pattern.as_str() {
            "informative" => ViewPattern::Informative,
            "complementary" => ViewPattern::Complementary,
            other => {
                return Err(CliError::Config(format!(
                    "unknown view pattern {other:?} (expected \"informative\" or \"complementary\")"
                )))
            }
        };
        Ok(SyntheticSpec {
            n_items: self.n_items,
            n_users: self.n_users,
            k_true: self.k_true,
            n_views: self.n_views,
            noise: self.noise,
            pattern,
            rating_density: self.rating_density,
            social_signal: self.social_signal,
            rating_signal: self.rating_signal,
            seed: seed_override.unwrap_or(self.seed),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringConfig {
    pub k: usize,
    /// Per-view weights; padded with 1.0 when shorter than the view count.
    pub lambda_view: Vec<f64>,
    /// Uniform off-diagonal pair weight.
    pub lambda_pair: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            k: 3,
            lambda_view: vec![],
            lambda_pair: 0.1,
            max_iters: 300,
            rel_tol: 1e-5,
            epsilon: 1e-12,
            seed: 7,
        }
    }
}

impl ClusteringConfig {
    pub fn to_multiview(&self, n_views: usize, seed_override: Option<u64>) -> MultiViewConfig {
        let mut config = MultiViewConfig::new(self.k, n_views);
        let mut lambda_view = self.lambda_view.clone();
        lambda_view.resize(n_views, 1.0);
        config.lambda_view = lambda_view;
        for s in 0..n_views {
            for t in 0..n_views {
                config.lambda_pair[s][t] = if s == t { 0.0 } else { self.lambda_pair };
            }
        }
        config.max_iters = self.max_iters;
        config.rel_tol = self.rel_tol;
        config.epsilon = self.epsilon;
        config.seed = seed_override.unwrap_or(self.seed);
        config
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilarityConfig {
    pub min_df: usize,
    pub lambda_p: f64,
    pub lambda_c: f64,
    pub lambda_i: f64,
    pub lambda_r: f64,
    pub lambda_f: f64,
    pub lambda_lk: f64,
    pub lambda_cmt: f64,
    pub lambda_rp: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            min_df: 2,
            lambda_p: 1.0,
            lambda_c: 1.0,
            lambda_i: 1.0,
            lambda_r: 1.0,
            lambda_f: 1.0,
            lambda_lk: 1.0,
            lambda_cmt: 1.0,
            lambda_rp: 1.0,
        }
    }
}

impl SimilarityConfig {
    pub fn to_weights(&self) -> Result<SimilarityWeights, SimilarityError> {
        SimilarityWeights::new(
            self.lambda_p,
            self.lambda_c,
            self.lambda_i,
            self.lambda_r,
            self.lambda_f,
            self.lambda_lk,
            self.lambda_cmt,
            self.lambda_rp,
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CryptoConfig {
    pub key_bits: u64,
    pub scale: u64,
    pub key_seed: u64,
}

impl Default for CryptoConfig {
    fn default() -> Self {
        Self {
            key_bits: 512,
            scale: FixedPointCodec::DEFAULT_SCALE,
            key_seed: 42,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub k_min: usize,
    pub k_max: usize,
    /// Held-out items rated at least this high count as relevant.
    pub relevance_threshold: u32,
    pub seed_items_per_test_user: usize,
    pub train_fraction: f64,
    /// "in-process" or "socket".
    pub transport: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: (1..=10).collect(),
            k_min: 3,
            k_max: 10,
            relevance_threshold: 4,
            seed_items_per_test_user: 3,
            train_fraction: 0.75,
            transport: "in-process".into(),
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: AppConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.dataset.kind.as_str() {
            "synthetic" => {}
            "lastfm" | "delicious" | "movielens-hetrec" => {
                if self.dataset.path.is_none() {
                    return Err(CliError::Config(format!(
                        "dataset.path is required for kind {:?}",
                        self.dataset.kind
                    )));
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown dataset kind {other:?}"
                )))
            }
        }
        if self.clustering.k == 0 {
            return Err(CliError::Config("clustering.k must be positive".into()));
        }
        if self.clustering.max_iters == 0 {
            return Err(CliError::Config("clustering.max_iters must be positive".into()));
        }
        if !(self.clustering.rel_tol > 0.0) {
            return Err(CliError::Config("clustering.rel_tol must be positive".into()));
        }
        if self.crypto.key_bits < 512 || self.crypto.key_bits % 2 != 0 {
            return Err(CliError::Config(
                "crypto.key_bits must be even and at least 512".into(),
            ));
        }
        if self.crypto.scale == 0 {
            return Err(CliError::Config("crypto.scale must be positive".into()));
        }
        let exp = &self.experiment;
        if exp.seeds.is_empty() {
            return Err(CliError::Config("experiment.seeds must be non-empty".into()));
        }
        if exp.k_min == 0 || exp.k_min > exp.k_max {
            return Err(CliError::Config(
                "experiment.k_min must be in 1..=k_max".into(),
            ));
        }
        if !(0.0 < exp.train_fraction && exp.train_fraction < 1.0) {
            return Err(CliError::Config(
                "experiment.train_fraction must be in (0, 1)".into(),
            ));
        }
        match exp.transport.as_str() {
            "in-process" | "socket" => {}
            other => {
                return Err(CliError::Config(format!(
                    "unknown transport {other:?} (expected \"in-process\" or \"socket\")"
                )))
            }
        }
        self.similarity.to_weights().map_err(CliError::config)?;
        Ok(())
    }
}
