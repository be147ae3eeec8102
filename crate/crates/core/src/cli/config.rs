//! Run configuration: one JSON file; credentials come from the environment.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{HttpClient, JudgeBackend, GEN_KEY_ENV, JUDGE_KEY_ENV};
use crate::bench::SynthConfig;
use crate::generation::{Conditioning, GeneratorBackend, HttpGenerator, MockGenerator, MockGeneratorConfig, DEFAULT_K_MAX};
use crate::verifier::CannedJudge;

fn default_k_max() -> u32 {
    DEFAULT_K_MAX
}

fn default_timeout() -> u64 {
    120
}

fn default_conditions() -> Vec<Condition> {
    vec![Condition::Full]
}

fn default_replicates() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Mock(MockGeneratorConfig),
    Http {
        endpoint: String,
        #[serde(default = "default_timeout")]
        timeout_s: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JudgeConfig {
    Off,
    /// Canned judge that never reports drift and scores every shot 1.0.
    Mock,
    Http {
        endpoint: String,
        #[serde(default = "default_timeout")]
        timeout_s: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    #[default]
    Deterministic,
    Judge,
}

/// Ablation conditions: which channels reach the generator and whether
/// failed shots are regenerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    B0,
    B1,
    B2,
    Full,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::B0 => "B0",
            Condition::B1 => "B1",
            Condition::B2 => "B2",
            Condition::Full => "Full",
        }
    }

    /// Row label in reports.
    pub fn label(self) -> &'static str {
        match self {
            Condition::Full => "EduStory (Full)",
            other => other.name(),
        }
    }

    pub fn conditioning(self) -> Conditioning {
        match self {
            Condition::B0 => Conditioning { planner: false, state: false },
            Condition::B1 => Conditioning { planner: true, state: false },
            Condition::B2 | Condition::Full => Conditioning::FULL,
        }
    }

    /// Without the verifier channel nothing is regenerated; shots are still
    /// checked so the flagged count is reported.
    pub fn k_max(self, configured: u32) -> u32 {
        match self {
            Condition::Full => configured,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(default)]
    pub plans: Vec<PathBuf>,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task2Config {
    pub k: usize,
    /// Run file whose first `k` shots and `S_k` form the prefix; the
    /// plan's reference shots are used when absent.
    #[serde(default)]
    pub prefix_run: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    #[serde(default = "judge_off")]
    pub judge: JudgeConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default)]
    pub base_seed: u64,
    pub paths: PathsConfig,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    /// Videos per plan and condition; replicate `r` offsets the base seed
    /// by `r * 1_000_000`.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub exclude_flagged: bool,
    #[serde(default)]
    pub task2: Option<Task2Config>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub planner: Option<PlannerConfig>,
}

fn judge_off() -> JudgeConfig {
    JudgeConfig::Off
}

impl RunConfig {
    /// Parses and validates a config; relative paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.paths.plans.iter_mut().for_each(resolve);
        if let Some(d) = config.paths.dataset.as_mut() {
            resolve(d);
        }
        resolve(&mut config.paths.output);
        if let Some(p) = config.task2.as_mut().and_then(|t| t.prefix_run.as_mut()) {
            resolve(p);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if let BackendConfig::Mock(mock) = &self.backend {
            mock.validate()?;
        }
        let endpoints = [
            match &self.backend {
                BackendConfig::Http { endpoint, .. } => Some(("backend", endpoint)),
                _ => None,
            },
            match &self.judge {
                JudgeConfig::Http { endpoint, .. } => Some(("judge", endpoint)),
                _ => None,
            },
            self.planner.as_ref().map(|p| ("planner", &p.endpoint)),
        ];
        for (name, endpoint) in endpoints.into_iter().flatten() {
            if endpoint.trim().is_empty() {
                return Err(format!("{name}.endpoint must not be empty"));
            }
        }
        if self.judge == JudgeConfig::Off && self.mode == ModeConfig::Judge {
            return Err("mode `judge` needs a judge; judge is `off`".into());
        }
        if self.conditions.is_empty() {
            return Err("conditions must not be empty".into());
        }
        if self.replicates == 0 {
            return Err("replicates must be at least 1".into());
        }
        Ok(())
    }

    pub fn generator(&self) -> Arc<dyn GeneratorBackend> {
        match &self.backend {
            BackendConfig::Mock(c) => Arc::new(MockGenerator::new(c.clone())),
            BackendConfig::Http { endpoint, timeout_s } => Arc::new(HttpGenerator::new(HttpClient::from_env(
                endpoint.clone(),
                GEN_KEY_ENV,
                Duration::from_secs(*timeout_s),
            ))),
        }
    }

    pub fn judge(&self) -> Option<Arc<dyn JudgeBackend>> {
        match &self.judge {
            JudgeConfig::Off => None,
            JudgeConfig::Mock => Some(Arc::new(CannedJudge::clean())),
            JudgeConfig::Http { endpoint, timeout_s } => Some(Arc::new(HttpClient::from_env(
                endpoint.clone(),
                JUDGE_KEY_ENV,
                Duration::from_secs(*timeout_s),
            ))),
        }
    }
}
