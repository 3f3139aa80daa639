//! Run settings: a JSON file merged with command-line overrides.
//!
//! Credentials never live here; the HTTP backend reads its key from the
//! environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wmplan_core::env::TaskSpec;
use wmplan_core::gateway::Decoding;
use wmplan_core::orchestrator::ConfigError;
use wmplan_core::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Oracle,
    Replay {
        transcript: PathBuf,
        #[serde(default)]
        strict: bool,
    },
    Http(HttpConfig),
}

impl BackendConfig {
    pub fn label(&self) -> String {
        match self {
            BackendConfig::Oracle => "oracle".into(),
            BackendConfig::Replay { transcript, .. } => format!("replay:{}", transcript.display()),
            BackendConfig::Http(h) => format!("http:{}", h.model),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

fn default_timeout_secs() -> u64 {
    120
}

/// Everything that can be set from the config file or from flags. Unset
/// fields fall back to per-task defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub manifest: Option<PathBuf>,
    pub backend: Option<BackendConfig>,
    pub max_total_steps: Option<u32>,
    pub max_sub_steps: Option<u32>,
    pub history_window: Option<usize>,
    pub facts_window: Option<usize>,
    pub facts_cap: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub temperature: Option<f32>,
    pub max_tokens: Option<u32>,
    pub prompt_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, SettingsError> {
        let text = std::fs::read_to_string(path).map_err(|source| SettingsError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| SettingsError::Parse { path: path.into(), source })
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: Settings) -> Settings {
        Settings {
            manifest: over.manifest.or(self.manifest),
            backend: over.backend.or(self.backend),
            max_total_steps: over.max_total_steps.or(self.max_total_steps),
            max_sub_steps: over.max_sub_steps.or(self.max_sub_steps),
            history_window: over.history_window.or(self.history_window),
            facts_window: over.facts_window.or(self.facts_window),
            facts_cap: over.facts_cap.or(self.facts_cap),
            seed: over.seed.or(self.seed),
            output_dir: over.output_dir.or(self.output_dir),
            temperature: over.temperature.or(self.temperature),
            max_tokens: over.max_tokens.or(self.max_tokens),
            prompt_dir: over.prompt_dir.or(self.prompt_dir),
            workers: over.workers.or(self.workers),
        }
    }

    pub fn backend(&self) -> BackendConfig {
        self.backend.clone().unwrap_or(BackendConfig::Oracle)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn run_config(&self, task: &TaskSpec) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::for_task(task);
        cfg.backend = self.backend().label();
        if let Some(v) = self.max_total_steps {
            cfg.max_total_steps = v;
        }
        if let Some(v) = self.max_sub_steps {
            cfg.max_sub_steps = v;
            cfg.actor.max_sub_steps = v;
        }
        cfg.planner.history_window = self.history_window.or(cfg.planner.history_window);
        cfg.planner.facts_window = self.facts_window.or(cfg.planner.facts_window);
        cfg.belief.facts_cap = self.facts_cap.or(cfg.belief.facts_cap);
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        let d = Decoding::default();
        cfg.decoding = Decoding {
            temperature: self.temperature.unwrap_or(d.temperature),
            max_tokens: self.max_tokens.unwrap_or(d.max_tokens),
        };
        cfg.validate(task)?;
        Ok(cfg)
    }
}
