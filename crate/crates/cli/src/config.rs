//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use gtagcdcf::ingest::FeedbackKind;
use gtagcdcf::model::{Hyperparams, LinkFunction};
use gtagcdcf::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gtagcdcf,
    Pmf,
    Ubcf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mae,
    Map,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Map => "map",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub interactions: PathBuf,
    pub tags: PathBuf,
    pub feedback: FeedbackKind,
    pub metric: Metric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Protocol {
    Upl {
        #[serde(default = "default_upl_values")]
        upl_values: Vec<usize>,
        #[serde(default = "default_folds")]
        folds: u32,
    },
    Cv,
}

fn default_upl_values() -> Vec<usize> {
    vec![5, 10, 15]
}

fn default_folds() -> u32 {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub init_scale: f64,
    pub link: LinkFunction,
    pub predict_through_link: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        Self {
            d: base.d,
            alpha: base.hyperparams.alpha,
            beta: base.hyperparams.beta,
            lambda: base.hyperparams.lambda,
            epsilon: base.epsilon,
            max_iterations: base.max_iterations,
            max_halvings: base.max_halvings,
            init_scale: base.init_scale,
            link: base.link,
            predict_through_link: base.predict_through_link,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hyperparams: Hyperparams {
                alpha: self.alpha,
                beta: self.beta,
                lambda: self.lambda,
            },
            d: self.d,
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            max_halvings: self.max_halvings,
            init_scale: self.init_scale,
            seed,
            link: self.link,
            predict_through_link: self.predict_through_link,
        }
    }
}

fn default_neighborhood() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub method: Method,
    pub protocol: Protocol,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default = "default_neighborhood")]
    pub neighborhood: usize,
    pub domains: Vec<DomainSpec>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            bail!("config must declare at least one domain");
        }
        for d in &self.domains {
            match (d.feedback, d.metric) {
                (FeedbackKind::ExplicitRating, Metric::Map) => {
                    bail!(
                        "domain {:?}: MAP requested on an explicit-rating domain (use mae)",
                        d.name
                    )
                }
                (FeedbackKind::ImplicitCount, Metric::Mae) => {
                    bail!(
                        "domain {:?}: MAE requested on an implicit-feedback domain (use map)",
                        d.name
                    )
                }
                _ => {}
            }
        }
        if let Protocol::Upl { upl_values, folds } = &self.protocol {
            if upl_values.is_empty() || *folds == 0 {
                bail!("upl protocol needs at least one UPL value and one fold");
            }
            for upl in upl_values {
                if !matches!(upl, 5 | 10 | 15) {
                    bail!("UPL values must be 5, 10 or 15 (got {})", upl);
                }
            }
        }
        Ok(())
    }
}
