use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use wmplan_core::orchestrator::{aggregate, report_tokens, TaskSummary};
use wmplan_core::Domain;
use wmplan_harness::config::{BackendConfig, HttpConfig, Settings};
use wmplan_harness::results::{combined_ledger, latest_per_task, load_metrics, write_episode};
use wmplan_harness::{find_task, load_tasks, run_suite, run_task};

#[derive(Parser)]
#[command(name = "wmplan", version, about = "Plan, act and track beliefs in text environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single task from the manifest.
    Run {
        #[arg(long)]
        task: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run every task in the manifest and aggregate.
    Suite {
        /// Only run tasks of this domain.
        #[arg(long)]
        domain: Option<Domain>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Re-execute a task against a recorded transcript.
    Replay {
        #[arg(long)]
        task: String,
        #[arg(long)]
        transcript: PathBuf,
        /// Check component tags and prompt prefixes stored in the transcript.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Aggregate metrics from a results directory.
    Report {
        #[arg(long, default_value = "results")]
        results: PathBuf,
        /// Print the machine-readable report instead of the table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Oracle,
    Replay,
    Http,
}

#[derive(Args, Default)]
struct RunOpts {
    /// JSON settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Replay transcript (with --backend replay).
    #[arg(long = "replay-transcript")]
    replay_transcript: Option<PathBuf>,
    /// OpenAI-compatible base URL (with --backend http).
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    max_total_steps: Option<u32>,
    #[arg(long)]
    max_sub_steps: Option<u32>,
    #[arg(long)]
    history_window: Option<usize>,
    #[arg(long)]
    facts_window: Option<usize>,
    #[arg(long)]
    facts_cap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    temperature: Option<f32>,
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    prompt_dir: Option<PathBuf>,
    /// Parallel episodes for `suite` (default: one per core).
    #[arg(long)]
    workers: Option<usize>,
}

impl RunOpts {
    fn settings(self) -> anyhow::Result<Settings> {
        let file = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let backend = match self.backend {
            None => {
                if self.base_url.is_some() || self.model.is_some() || self.replay_transcript.is_some() {
                    anyhow::bail!("backend options given without --backend");
                }
                None
            }
            Some(BackendKind::Oracle) => Some(BackendConfig::Oracle),
            Some(BackendKind::Replay) => Some(BackendConfig::Replay {
                transcript: self.replay_transcript.context("--backend replay needs --replay-transcript")?,
                strict: false,
            }),
            Some(BackendKind::Http) => {
                let from_file = match &file.backend {
                    Some(BackendConfig::Http(h)) => Some(h.clone()),
                    _ => None,
                };
                let base_url = self.base_url.or_else(|| from_file.as_ref().map(|h| h.base_url.clone()));
                let model = self.model.or_else(|| from_file.as_ref().map(|h| h.model.clone()));
                let mut h = HttpConfig {
                    base_url: base_url.context("--backend http needs --base-url")?,
                    model: model.context("--backend http needs --model")?,
                    max_retries: 3,
                    backoff_ms: 500,
                    timeout_secs: 120,
                };
                if let Some(f) = from_file {
                    h.max_retries = f.max_retries;
                    h.backoff_ms = f.backoff_ms;
                    h.timeout_secs = f.timeout_secs;
                }
                if let Some(r) = self.max_retries {
                    h.max_retries = r;
                }
                Some(BackendConfig::Http(h))
            }
        };
        let flags = Settings {
            manifest: self.manifest,
            backend,
            max_total_steps: self.max_total_steps,
            max_sub_steps: self.max_sub_steps,
            history_window: self.history_window,
            facts_window: self.facts_window,
            facts_cap: self.facts_cap,
            seed: self.seed,
            output_dir: self.output_dir,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            prompt_dir: self.prompt_dir,
            workers: self.workers,
        };
        Ok(file.merge(flags))
    }
}

fn run_one(settings: &Settings, task_id: &str) -> anyhow::Result<bool> {
    let task = find_task(load_tasks(settings)?, task_id)?;
    let (record, elapsed) = run_task(settings, &task)?;
    let dir = write_episode(&settings.output_dir(), &record, elapsed)?;
    let o = &record.outcome;
    println!(
        "{}: success={} pr={:.2} steps={} termination={:?}{}",
        record.config.task_id,
        o.success,
        o.progress_rate,
        o.total_env_steps,
        o.termination,
        o.error.as_deref().map(|e| format!(" error={e}")).unwrap_or_default()
    );
    println!("results: {}", dir.display());
    Ok(o.success)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { task, opts } => {
            let settings = opts.settings()?;
            let ok = run_one(&settings, &task)?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Replay { task, transcript, strict, opts } => {
            let mut settings = opts.settings()?;
            settings.backend = Some(BackendConfig::Replay { transcript, strict });
            let ok = run_one(&settings, &task)?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Suite { domain, opts } => {
            let settings = opts.settings()?;
            let mut tasks = load_tasks(&settings)?;
            if let Some(d) = domain {
                tasks.retain(|t| t.domain() == d);
            }
            let outdir = settings.output_dir();
            let mut summaries = Vec::new();
            for (task, result) in tasks.iter().zip(run_suite(&settings, &tasks)?) {
                match result {
                    Ok((record, elapsed)) => {
                        write_episode(&outdir, &record, elapsed)?;
                        summaries.push(TaskSummary::from_record(&record));
                    }
                    Err(e) => eprintln!("{}: {e}", task.id()),
                }
            }
            let report = aggregate(summaries)?;
            std::fs::create_dir_all(&outdir)?;
            std::fs::write(outdir.join("suite_report.json"), serde_json::to_string_pretty(&report)?)?;
            print!("{}", report.render_table());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { results, json } => {
            let metrics = latest_per_task(load_metrics(&results)?);
            let shares = report_tokens(&combined_ledger(&metrics));
            let report = aggregate(metrics.iter().map(|m| m.summary.clone()).collect())
                .with_context(|| format!("no metrics.json files under {}", results.display()))?;
            if json {
                let out = serde_json::json!({ "suite": report, "token_shares": shares });
                println!("{}", serde_json::to_string_pretty(&out)?);
            } else {
                print!("{}", report.render_table());
                if shares.zero_total {
                    println!("tokens: none recorded");
                } else {
                    println!(
                        "tokens: {} total; planner {:.1}%, actor {:.1}%, verification {:.1}%, synthesis {:.1}%",
                        shares.total_tokens, shares.planner, shares.actor, shares.verification, shares.synthesis
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
