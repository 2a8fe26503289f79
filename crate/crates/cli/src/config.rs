//! TOML run configuration.
//!
//! Every section is optional and falls back to the library defaults. A run
//! seed given on the command line replaces `seed`; the synthesizer, trainer
//! and transfer stage all derive their randomness from it.

use std::path::Path;

use indrnn_har::features::{FeatureConfig, WindowSpec};
use indrnn_har::nn::NetworkConfig;
use indrnn_har::pipeline::{SyntheticSpec, TrainConfig, TransferConfig};
use indrnn_har::sensor::Task;
use indrnn_har::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for featurization and inference; 0 lets the pool
    /// decide.
    pub threads: usize,
    pub task: TaskChoice,
    pub window: WindowSpec,
    pub features: FeatureConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub transfer: TransferConfig,
    pub synth: SyntheticSpec,
}

/// `task` as written in the config file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskChoice {
    #[default]
    Activity,
    LocationGroup,
}

impl From<TaskChoice> for Task {
    fn from(t: TaskChoice) -> Self {
        match t {
            TaskChoice::Activity => Task::Activity,
            TaskChoice::LocationGroup => Task::LocationGroup,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            context: format!("reading {}", path.display()),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::BadConfig(format!("{}: {e}", path.display())))
    }

    /// Applies overrides and propagates the run seed and task.
    pub fn resolve(
        mut self,
        seed: Option<u64>,
        threads: Option<usize>,
        task: Option<TaskChoice>,
    ) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(t) = threads {
            self.threads = t;
        }
        if let Some(t) = task {
            self.task = t;
        }
        self.synth.seed = self.seed;
        self.train.seed = self.seed;
        self.network.n_classes = Task::from(self.task).n_classes();
        self.window.validate()?;
        self.features.validate()?;
        self.network.validate()?;
        Ok(self)
    }

    pub fn task(&self) -> Task {
        self.task.into()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
