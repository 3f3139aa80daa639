//! On-disk layout: `<outdir>/<task>/<timestamp>/{record.json, trajectory.jsonl, metrics.json}`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;
use wmplan_core::gateway::CallCount;
use wmplan_core::orchestrator::{report_tokens, trajectory_jsonl, ParseFailures, TaskSummary, TokenShares};
use wmplan_core::{ComponentTag, EpisodeRecord, TokenLedger};

pub const RECORD_FILE: &str = "record.json";
pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";
pub const METRICS_FILE: &str = "metrics.json";

/// The only file that carries timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(flatten)]
    pub summary: TaskSummary,
    pub wall_clock_secs: f64,
    pub ledger: TokenLedger,
    pub token_shares: TokenShares,
    pub calls: BTreeMap<ComponentTag, CallCount>,
    pub parse_failures: ParseFailures,
    pub checkpoints_reached: usize,
    pub checkpoints_total: usize,
}

impl Metrics {
    pub fn new(record: &EpisodeRecord, elapsed: Duration) -> Self {
        Self {
            summary: TaskSummary::from_record(record),
            wall_clock_secs: elapsed.as_secs_f64(),
            ledger: record.tokens.clone(),
            token_shares: report_tokens(&record.tokens),
            calls: record.calls.clone(),
            parse_failures: record.parse_failures,
            checkpoints_reached: record.checkpoints.reached().iter().filter(|r| **r).count(),
            checkpoints_total: record.checkpoints.labels().len(),
        }
    }
}

fn timestamp() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string()
}

/// Task ids become directory names; anything outside `[A-Za-z0-9._-]` is replaced.
pub fn safe_name(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        "_".into()
    } else {
        s
    }
}

/// Writes the three files and returns the run directory.
pub fn write_episode(outdir: &Path, record: &EpisodeRecord, elapsed: Duration) -> io::Result<PathBuf> {
    let base = outdir.join(safe_name(&record.config.task_id));
    fs::create_dir_all(&base)?;
    let stamp = timestamp();
    let mut dir = base.join(&stamp);
    let mut n = 1;
    while dir.exists() {
        dir = base.join(format!("{stamp}-{n}"));
        n += 1;
    }
    fs::create_dir(&dir)?;
    fs::write(dir.join(RECORD_FILE), serde_json::to_string_pretty(record)?)?;
    fs::write(dir.join(TRAJECTORY_FILE), trajectory_jsonl(record))?;
    fs::write(dir.join(METRICS_FILE), serde_json::to_string_pretty(&Metrics::new(record, elapsed))?)?;
    Ok(dir)
}

/// All metrics files under `dir`, in path order.
pub fn load_metrics(dir: &Path) -> io::Result<Vec<(PathBuf, Metrics)>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(io::Error::other)?;
        if entry.file_type().is_file() && entry.file_name() == METRICS_FILE {
            let text = fs::read_to_string(entry.path())?;
            let m: Metrics = serde_json::from_str(&text)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", entry.path().display())))?;
            out.push((entry.path().to_path_buf(), m));
        }
    }
    Ok(out)
}

/// Keeps the newest run of each task (run directories sort by timestamp).
pub fn latest_per_task(all: Vec<(PathBuf, Metrics)>) -> Vec<Metrics> {
    let mut by_task: BTreeMap<String, (PathBuf, Metrics)> = BTreeMap::new();
    for (path, m) in all {
        match by_task.get(&m.summary.task_id) {
            Some((p, _)) if *p >= path => {}
            _ => {
                by_task.insert(m.summary.task_id.clone(), (path, m));
            }
        }
    }
    by_task.into_values().map(|(_, m)| m).collect()
}

/// Token ledger summed over runs.
pub fn combined_ledger<'a>(metrics: impl IntoIterator<Item = &'a Metrics>) -> TokenLedger {
    let mut total = TokenLedger::default();
    for m in metrics {
        for tag in ComponentTag::ALL {
            let c = m.ledger.get(tag);
            total.record(tag, c.prompt_tokens, c.completion_tokens);
        }
    }
    total
}
