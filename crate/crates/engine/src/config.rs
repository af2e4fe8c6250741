//! Run configuration loaded from TOML with `key=value` overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use graphvec_core::{ModelKind, NegativeSampleSpec, OrderingKind};
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::evaluate::EvalSettings;
use crate::pipeline::{TrainMode, TrainSettings};

/// Environment variable giving the root for relative dataset paths.
pub const DATA_ROOT_ENV: &str = "GRAPHVEC_DATA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageMode {
    InMemory,
    Partitioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainerKind {
    Sync,
    Pipelined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub run_dir: PathBuf,
    pub model: String,
    pub dim: usize,
    pub epochs: u64,
    pub lr: f32,
    pub eps: f32,
    pub batch_size: usize,
    pub train_negatives: usize,
    pub train_degree_fraction: f64,
    pub storage: StorageMode,
    /// Number of node partitions; must match the dataset.
    pub partitions: u32,
    pub buffer_capacity: u32,
    pub ordering: String,
    pub prefetch: bool,
    pub async_writeback: bool,
    pub io_delay_ms: u64,
    pub trainer: TrainerKind,
    pub staleness_bound: usize,
    pub loader_workers: usize,
    pub update_workers: usize,
    pub transfer_latency_ms: u64,
    /// Sampled evaluation candidates; 0 ranks against every node.
    pub eval_negatives: usize,
    pub eval_degree_fraction: f64,
    pub eval_filtered: bool,
    pub eval_max_edges: Option<usize>,
    pub eval_every_epoch: bool,
    pub checkpoint: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: PathBuf::from("data"),
            run_dir: PathBuf::from("runs/default"),
            model: "distmult".into(),
            dim: 100,
            epochs: 10,
            lr: 0.1,
            eps: 1e-10,
            batch_size: 10_000,
            train_negatives: 1000,
            train_degree_fraction: 0.5,
            storage: StorageMode::InMemory,
            partitions: 1,
            buffer_capacity: 2,
            ordering: "elimination".into(),
            prefetch: true,
            async_writeback: true,
            io_delay_ms: 0,
            trainer: TrainerKind::Pipelined,
            staleness_bound: 16,
            loader_workers: 2,
            update_workers: 2,
            transfer_latency_ms: 0,
            eval_negatives: 0,
            eval_degree_fraction: 0.0,
            eval_filtered: true,
            eval_max_edges: None,
            eval_every_epoch: false,
            checkpoint: false,
            seed: 0,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> EngineError {
    EngineError::Config(e.to_string())
}

/// Parses an override value as TOML, falling back to a plain string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v"),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

impl RunConfig {
    /// Loads `path` (if any), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| EngineError::io(p, e))?;
                text.parse::<toml::Table>().map_err(|e| EngineError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (k, v) =
                o.split_once('=').ok_or_else(|| EngineError::Config(format!("override `{o}` is not key=value")))?;
            table.insert(k.trim().replace('-', "_"), parse_value(v.trim()));
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        self.model.parse().map_err(|_| EngineError::Config(format!("unknown model `{}`", self.model)))
    }

    pub fn ordering_kind(&self) -> Result<OrderingKind> {
        self.ordering.parse().map_err(|_| EngineError::Config(format!("unknown ordering `{}`", self.ordering)))
    }

    /// Dataset directory, resolved against the data root variable when relative.
    pub fn resolved_data_dir(&self) -> PathBuf {
        match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) if self.data_dir.is_relative() => PathBuf::from(root).join(&self.data_dir),
            _ => self.data_dir.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.model_kind()?;
        self.ordering_kind()?;
        kind.check_dim(self.dim)?;
        let bad = |m: String| Err(EngineError::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        match self.storage {
            StorageMode::InMemory if self.partitions != 1 => {
                return bad(format!("in-memory storage needs partitions = 1, got {}", self.partitions));
            }
            StorageMode::Partitioned if self.buffer_capacity < 2 || self.buffer_capacity > self.partitions => {
                return bad(format!(
                    "partitioned storage needs 2 <= buffer_capacity <= partitions, got c = {}, p = {}",
                    self.buffer_capacity, self.partitions
                ));
            }
            _ => {}
        }
        for f in [self.train_degree_fraction, self.eval_degree_fraction] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("degree fraction {f} outside [0, 1]"));
            }
        }
        self.train_settings()?.validate()
    }

    pub fn train_settings(&self) -> Result<TrainSettings> {
        Ok(TrainSettings {
            kind: self.model_kind()?,
            dim: self.dim,
            lr: self.lr,
            eps: self.eps,
            batch_size: self.batch_size,
            negatives: NegativeSampleSpec::new(self.train_negatives, self.train_degree_fraction)?,
            seed: self.seed,
            mode: match self.trainer {
                TrainerKind::Sync => TrainMode::Sync,
                TrainerKind::Pipelined => TrainMode::Pipelined,
            },
            staleness_bound: self.staleness_bound,
            loader_workers: self.loader_workers,
            update_workers: self.update_workers,
            transfer_latency: Duration::from_millis(self.transfer_latency_ms),
        })
    }

    pub fn eval_settings(&self) -> Result<EvalSettings> {
        let mut s = EvalSettings::new(self.model_kind()?, self.dim);
        s.negatives = match self.eval_negatives {
            _ if self.eval_filtered => None,
            0 => None,
            n => Some(NegativeSampleSpec::new(n, self.eval_degree_fraction)?),
        };
        s.filtered = self.eval_filtered;
        s.max_edges = self.eval_max_edges;
        s.seed = self.seed;
        Ok(s)
    }
}
