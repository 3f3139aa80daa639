//! Filesystem, network and CLI side of `wmplan-core`.

pub mod config;
pub mod http;
pub mod results;

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use wmplan_core::actor::SkillLibrary;
use wmplan_core::env::{bundled_manifest, CheckpointTracker, TaskManifest, TaskSpec};
use wmplan_core::gateway::{ChatBackend, GatewayError, OracleBackend, PromptSet, ReplayBackend, TemplateError};
use wmplan_core::orchestrator::{run_episode_with, ConfigError, Outcome, Resources, Termination};
use wmplan_core::symbolic::SymbolicTracker;
use wmplan_core::{EpisodeRecord, RunConfig};

use config::{BackendConfig, Settings};

/// The manifest named in the settings, or the bundled default suite. Fixture
/// paths are resolved relative to the manifest's directory.
pub fn load_tasks(settings: &Settings) -> anyhow::Result<Vec<TaskSpec>> {
    let (manifest, base) = match &settings.manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
            let m = TaskManifest::from_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            (m, path.parent().map(Path::to_path_buf))
        }
        None => (bundled_manifest(), None),
    };
    let load = |name: &str| base.as_ref().and_then(|b| std::fs::read_to_string(b.join(name)).ok());
    let tasks = manifest.resolve(&load).map_err(anyhow::Error::msg)?;
    if tasks.is_empty() {
        return Err(ConfigError::EmptyManifest.into());
    }
    Ok(tasks)
}

pub fn find_task(tasks: Vec<TaskSpec>, id: &str) -> anyhow::Result<TaskSpec> {
    let known: Vec<String> = tasks.iter().map(|t| t.id().to_string()).collect();
    tasks
        .into_iter()
        .find(|t| t.id() == id)
        .ok_or_else(|| anyhow::anyhow!("task `{id}` is not in the manifest (known: {})", known.join(", ")))
}

pub fn make_backend(cfg: &BackendConfig, task: &TaskSpec) -> Result<Box<dyn ChatBackend>, GatewayError> {
    Ok(match cfg {
        BackendConfig::Oracle => Box::new(OracleBackend::new(task.domain())?),
        BackendConfig::Replay { transcript, strict } => {
            let text = std::fs::read_to_string(transcript)
                .map_err(|e| GatewayError::BackendUnavailable(format!("{}: {e}", transcript.display())))?;
            let b = ReplayBackend::from_json(&text).map_err(GatewayError::BackendUnavailable)?;
            Box::new(b.strict(*strict))
        }
        BackendConfig::Http(h) => Box::new(http::HttpBackend::new(h, http::api_key_from_env())?),
    })
}

/// Bundled prompts, with per-file overrides from `prompt_dir` if set.
pub fn resources(settings: &Settings, task: &TaskSpec) -> Result<Resources, TemplateError> {
    let domain = task.domain();
    let prompts = match &settings.prompt_dir {
        Some(dir) => PromptSet::load(domain, &|name: &str| std::fs::read_to_string(dir.join(name)).ok())?,
        None => PromptSet::bundled(domain),
    };
    Ok(Resources { prompts, skills: SkillLibrary::bundled(domain), tracker: SymbolicTracker::for_domain(domain) })
}

/// A record for an episode that never started.
fn failed_record(cfg: RunConfig, termination: Termination, error: String) -> EpisodeRecord {
    EpisodeRecord {
        config: cfg,
        goal: String::new(),
        initial_observation: String::new(),
        planner_steps: Vec::new(),
        sub_episodes: Vec::new(),
        beliefs: Vec::new(),
        verification: Vec::new(),
        outcome: Outcome { success: false, progress_rate: 0.0, total_env_steps: 0, termination, error: Some(error) },
        tokens: Default::default(),
        calls: Default::default(),
        parse_failures: Default::default(),
        checkpoints: CheckpointTracker::new(Vec::new()),
    }
}

/// Runs one task end to end. Prompt-loading and backend construction
/// failures end up in the record rather than aborting.
pub fn run_task(settings: &Settings, task: &TaskSpec) -> Result<(EpisodeRecord, Duration), ConfigError> {
    let cfg = settings.run_config(task)?;
    let start = Instant::now();
    let record = match (resources(settings, task), make_backend(&settings.backend(), task)) {
        (Err(e), _) => failed_record(cfg, Termination::ConfigError, e.to_string()),
        (_, Err(e)) => failed_record(cfg, Termination::BackendError, e.to_string()),
        (Ok(res), Ok(mut backend)) => run_episode_with(&cfg, task, backend.as_mut(), &res),
    };
    Ok((record, start.elapsed()))
}

/// Runs tasks on up to `workers` threads; results keep manifest order.
pub fn run_suite(
    settings: &Settings,
    tasks: &[TaskSpec],
) -> anyhow::Result<Vec<Result<(EpisodeRecord, Duration), ConfigError>>> {
    if tasks.is_empty() {
        return Err(ConfigError::EmptyManifest.into());
    }
    let workers = settings.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(|| tasks.par_iter().map(|t| run_task(settings, t)).collect()))
}
