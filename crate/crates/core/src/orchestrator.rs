//! Episode loop: plan, execute, update belief, repeat. Also the episode
//! record, the trajectory log and suite/token aggregation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actor::{execute_subgoal, ActorConfig, ActorContext, SkillLibrary};
use crate::belief::{belief_update, BeliefConfig, BeliefContext};
use crate::domain::{BeliefState, ComponentTag, Plan, SubEpisode, TokenLedger, VerificationReport};
use crate::env::{build_environment, CheckpointTracker, Domain, Environment, TaskSpec};
use crate::gateway::{CallCount, ChatBackend, Decoding, Gateway, PromptSet};
use crate::planner::{plan_next, PlannerConfig, PlannerContext, PlannerError, PlannerStep};
use crate::symbolic::SymbolicTracker;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("config is for task `{config}` but the task is `{task}`")]
    TaskMismatch { config: String, task: String },
    #[error("config domain {config} does not match task domain {task}")]
    DomainMismatch { config: Domain, task: Domain },
    #[error("the manifest has no tasks")]
    EmptyManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task_id: String,
    pub domain: Domain,
    /// Free-form backend description kept in the record (e.g. `oracle`).
    pub backend: String,
    pub max_total_steps: u32,
    pub max_sub_steps: u32,
    pub seed: u64,
    pub decoding: Decoding,
    pub planner: PlannerConfig,
    pub actor: ActorConfig,
    pub belief: BeliefConfig,
}

impl RunConfig {
    /// Defaults for a task: 100 env steps (150 for adventure), 35 per subgoal.
    pub fn for_task(task: &TaskSpec) -> Self {
        let actor = ActorConfig::default();
        Self {
            task_id: task.id().to_string(),
            domain: task.domain(),
            backend: String::new(),
            max_total_steps: task.domain().default_max_total_steps(),
            max_sub_steps: actor.max_sub_steps,
            seed: 0,
            decoding: Decoding::default(),
            planner: PlannerConfig::default(),
            actor,
            belief: BeliefConfig::default(),
        }
    }

    pub fn validate(&self, task: &TaskSpec) -> Result<(), ConfigError> {
        if self.max_total_steps == 0 {
            return Err(ConfigError::NonPositive("max_total_steps"));
        }
        if self.max_sub_steps == 0 {
            return Err(ConfigError::NonPositive("max_sub_steps"));
        }
        if self.actor.skill_limit == 0 {
            return Err(ConfigError::NonPositive("skill_limit"));
        }
        if self.task_id != task.id() {
            return Err(ConfigError::TaskMismatch { config: self.task_id.clone(), task: task.id().to_string() });
        }
        if self.domain != task.domain() {
            return Err(ConfigError::DomainMismatch { config: self.domain, task: task.domain() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The environment reported success.
    Success,
    /// The planner declared the task complete.
    TaskCompleteDeclared,
    /// The environment-step budget ran out.
    StepBudgetExhausted,
    /// Planner iterations reached max_total_steps.
    PlannerIterationCap,
    PlannerParseError,
    BackendError,
    ConfigError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub progress_rate: f64,
    pub total_env_steps: u32,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailures {
    pub planner_reprompts: u32,
    pub verification: u32,
    pub synthesis: u32,
}

impl ParseFailures {
    pub fn total(&self) -> u32 {
        self.planner_reprompts + self.verification + self.synthesis
    }
}

/// Everything about one episode. Contains no timing, so identical inputs
/// serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub config: RunConfig,
    pub goal: String,
    pub initial_observation: String,
    pub planner_steps: Vec<PlannerStep>,
    pub sub_episodes: Vec<SubEpisode>,
    /// b_0 .. b_n.
    pub beliefs: Vec<BeliefState>,
    pub verification: Vec<VerificationReport>,
    pub outcome: Outcome,
    pub tokens: TokenLedger,
    pub calls: BTreeMap<ComponentTag, CallCount>,
    pub parse_failures: ParseFailures,
    pub checkpoints: CheckpointTracker,
}

/// Prompt and skill material for an episode.
pub struct Resources {
    pub prompts: PromptSet,
    pub skills: SkillLibrary,
    pub tracker: SymbolicTracker,
}

impl Resources {
    pub fn bundled(domain: Domain) -> Self {
        Self {
            prompts: PromptSet::bundled(domain),
            skills: SkillLibrary::bundled(domain),
            tracker: SymbolicTracker::for_domain(domain),
        }
    }
}

/// Runs one episode with the bundled prompts and skills.
pub fn run_episode(cfg: &RunConfig, task: &TaskSpec, backend: &mut dyn ChatBackend) -> EpisodeRecord {
    run_episode_with(cfg, task, backend, &Resources::bundled(task.domain()))
}

pub fn run_episode_with(
    cfg: &RunConfig,
    task: &TaskSpec,
    backend: &mut dyn ChatBackend,
    res: &Resources,
) -> EpisodeRecord {
    let mut env = build_environment(task);
    env.reset();
    let goal = env.goal_text().to_string();
    let initial_observation = env.initial_observation();
    let b0 = BeliefState::initial(res.tracker.init_memory(&initial_observation));

    let mut record = EpisodeRecord {
        config: cfg.clone(),
        goal: goal.clone(),
        initial_observation: initial_observation.clone(),
        planner_steps: Vec::new(),
        sub_episodes: Vec::new(),
        beliefs: alloc::vec![b0.clone()],
        verification: Vec::new(),
        outcome: Outcome {
            success: false,
            progress_rate: 0.0,
            total_env_steps: 0,
            termination: Termination::StepBudgetExhausted,
            error: None,
        },
        tokens: TokenLedger::default(),
        calls: BTreeMap::new(),
        parse_failures: ParseFailures::default(),
        checkpoints: env.checkpoints().clone(),
    };

    if let Err(e) = cfg.validate(task) {
        record.outcome.termination = Termination::ConfigError;
        record.outcome.error = Some(e.to_string());
        return record;
    }

    let mut gw = Gateway::with_decoding(backend, cfg.decoding);
    let planner_ctx = PlannerContext {
        prompts: &res.prompts,
        goal: &goal,
        initial_observation: &initial_observation,
        config: &cfg.planner,
    };
    let actor_cfg = ActorConfig { max_sub_steps: cfg.max_sub_steps, ..cfg.actor.clone() };
    let actor_ctx = ActorContext { prompts: &res.prompts, skills: &res.skills, tracker: &res.tracker, config: &actor_cfg };
    let belief_ctx = BeliefContext { prompts: &res.prompts, config: &cfg.belief };

    let mut belief = b0;
    let mut latest_plan: Option<Plan> = None;
    let mut total = 0u32;
    let mut error: Option<String> = None;

    let termination = loop {
        if env.is_success() {
            break Termination::Success;
        }
        if total >= cfg.max_total_steps {
            break Termination::StepBudgetExhausted;
        }
        if record.planner_steps.len() as u32 >= cfg.max_total_steps {
            break Termination::PlannerIterationCap;
        }

        gw.observe_ground_truth(&env.ground_state());
        let step = match plan_next(&mut gw, &planner_ctx, &record.planner_steps, &belief) {
            Ok(s) => s,
            Err(e @ PlannerError::Parse { .. }) => {
                error = Some(e.to_string());
                break Termination::PlannerParseError;
            }
            Err(PlannerError::Gateway(e)) => {
                error = Some(e.to_string());
                break Termination::BackendError;
            }
        };
        if step.plan.is_some() {
            latest_plan = step.plan.clone();
        }
        let Some(subgoal) = step.subgoal.clone().filter(|_| !step.task_complete) else {
            record.planner_steps.push(step);
            break if env.is_success() { Termination::Success } else { Termination::TaskCompleteDeclared };
        };

        let budget = cfg.max_sub_steps.min(cfg.max_total_steps - total);
        let acted = execute_subgoal(&mut gw, &actor_ctx, &subgoal, env.as_mut(), belief.symbolic.clone(), budget);
        total += acted.episode.env_steps_consumed;
        record.planner_steps.push(step);

        if let Some(e) = acted.error {
            record.sub_episodes.push(acted.episode);
            error = Some(e.to_string());
            break Termination::BackendError;
        }

        gw.observe_ground_truth(&env.ground_state());
        let update = belief_update(&mut gw, &belief_ctx, &belief, acted.memory, &acted.episode, latest_plan.as_ref());
        record.parse_failures.verification += update.report.parse_errors() as u32;
        if update.synthesis_failed && update.error.is_none() {
            record.parse_failures.synthesis += 1;
        }
        record.sub_episodes.push(acted.episode);
        record.verification.push(update.report);
        belief = update.belief;
        record.beliefs.push(belief.clone());
        if let Some(e) = update.error {
            error = Some(e.to_string());
            break Termination::BackendError;
        }
    };

    record.outcome = Outcome {
        success: env.is_success(),
        progress_rate: env.progress_rate(),
        total_env_steps: total,
        termination,
        error,
    };
    record.tokens = gw.ledger().clone();
    record.calls = gw.call_counts().clone();
    record.parse_failures.planner_reprompts = gw.calls(ComponentTag::Planner).reprompts;
    record.checkpoints = env.checkpoints().clone();
    record
}

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TrajectoryEvent {
    PlannerStep {
        k: u32,
        reasoning: String,
        plan: Option<Vec<String>>,
        subgoal: Option<String>,
        search_locations: Option<Vec<String>>,
        task_complete: bool,
    },
    ActorStep {
        k: u32,
        index: usize,
        action: String,
        observation: String,
        sent: bool,
    },
    BeliefUpdate {
        k: u32,
        subgoal_status: String,
        env_steps: u32,
        answers: Vec<String>,
        status_line: String,
        justification: String,
        learned_facts: Vec<String>,
    },
    EpisodeEnd {
        success: bool,
        progress_rate: f64,
        total_env_steps: u32,
        termination: Termination,
        error: Option<String>,
    },
}

pub fn trajectory_events(r: &EpisodeRecord) -> Vec<TrajectoryEvent> {
    let mut out = Vec::new();
    for (i, step) in r.planner_steps.iter().enumerate() {
        out.push(TrajectoryEvent::PlannerStep {
            k: step.k,
            reasoning: step.reasoning.clone(),
            plan: step.plan.as_ref().map(|p| p.subgoals.clone()),
            subgoal: step.subgoal.as_ref().map(|s| s.description.clone()),
            search_locations: step.subgoal.as_ref().and_then(|s| s.search_locations.clone()),
            task_complete: step.task_complete,
        });
        if let Some(ep) = r.sub_episodes.get(i) {
            for (index, s) in ep.steps.iter().enumerate() {
                out.push(TrajectoryEvent::ActorStep {
                    k: step.k,
                    index,
                    action: s.action.clone(),
                    observation: s.observation.clone(),
                    sent: s.sent,
                });
            }
            if let (Some(report), Some(after)) = (r.verification.get(i), r.beliefs.get(i + 1)) {
                out.push(TrajectoryEvent::BeliefUpdate {
                    k: after.k,
                    subgoal_status: ep.status.label(),
                    env_steps: ep.env_steps_consumed,
                    answers: report.entries.iter().map(|e| e.answer.clone()).collect(),
                    status_line: after.textual.status_line.clone(),
                    justification: after.textual.justification.clone(),
                    learned_facts: after
                        .textual
                        .learned_facts
                        .iter()
                        .filter(|f| f.k == after.k)
                        .map(|f| f.text.clone())
                        .collect(),
                });
            }
        }
    }
    out.push(TrajectoryEvent::EpisodeEnd {
        success: r.outcome.success,
        progress_rate: r.outcome.progress_rate,
        total_env_steps: r.outcome.total_env_steps,
        termination: r.outcome.termination,
        error: r.outcome.error.clone(),
    });
    out
}

/// One JSON object per line, newline-terminated.
pub fn trajectory_jsonl(r: &EpisodeRecord) -> String {
    let mut out = String::new();
    for e in trajectory_events(r) {
        out.push_str(&serde_json::to_string(&e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Percentage of total tokens per component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenShares {
    pub planner: f64,
    pub actor: f64,
    pub verification: f64,
    pub synthesis: f64,
    pub total_tokens: u64,
    pub zero_total: bool,
}

impl TokenShares {
    pub fn get(&self, tag: ComponentTag) -> f64 {
        match tag {
            ComponentTag::Planner => self.planner,
            ComponentTag::Actor => self.actor,
            ComponentTag::Verification => self.verification,
            ComponentTag::Synthesis => self.synthesis,
        }
    }
}

pub fn report_tokens(ledger: &TokenLedger) -> TokenShares {
    let total = ledger.total();
    let pct = |tag| {
        if total == 0 {
            0.0
        } else {
            ledger.get(tag).total() as f64 * 100.0 / total as f64
        }
    };
    TokenShares {
        planner: pct(ComponentTag::Planner),
        actor: pct(ComponentTag::Actor),
        verification: pct(ComponentTag::Verification),
        synthesis: pct(ComponentTag::Synthesis),
        total_tokens: total,
        zero_total: total == 0,
    }
}

/// Per-task line of a suite report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub domain: Domain,
    pub success: bool,
    pub progress_rate: f64,
    pub total_env_steps: u32,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tokens: u64,
}

impl TaskSummary {
    pub fn from_record(r: &EpisodeRecord) -> Self {
        Self {
            task_id: r.config.task_id.clone(),
            domain: r.config.domain,
            success: r.outcome.success,
            progress_rate: r.outcome.progress_rate,
            total_env_steps: r.outcome.total_env_steps,
            termination: r.outcome.termination,
            error: r.outcome.error.clone(),
            tokens: r.tokens.total(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub tasks: usize,
    pub successes: usize,
    /// Fraction in [0, 1].
    pub success_rate: f64,
    pub mean_progress_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub domains: BTreeMap<Domain, DomainStats>,
    pub overall: DomainStats,
    pub tasks: Vec<TaskSummary>,
}

fn stats<'a>(items: impl Iterator<Item = &'a TaskSummary>) -> DomainStats {
    let (mut n, mut ok, mut pr) = (0usize, 0usize, 0.0f64);
    for t in items {
        n += 1;
        ok += t.success as usize;
        pr += t.progress_rate;
    }
    DomainStats {
        tasks: n,
        successes: ok,
        success_rate: if n == 0 { 0.0 } else { ok as f64 / n as f64 },
        mean_progress_rate: if n == 0 { 0.0 } else { pr / n as f64 },
    }
}

pub fn aggregate(tasks: Vec<TaskSummary>) -> Result<SuiteReport, ConfigError> {
    if tasks.is_empty() {
        return Err(ConfigError::EmptyManifest);
    }
    let mut domains = BTreeMap::new();
    for d in Domain::ALL {
        if tasks.iter().any(|t| t.domain == d) {
            domains.insert(d, stats(tasks.iter().filter(|t| t.domain == d)));
        }
    }
    let overall = stats(tasks.iter());
    Ok(SuiteReport { domains, overall, tasks })
}

impl SuiteReport {
    /// Fixed-width table of per-domain results.
    pub fn render_table(&self) -> String {
        let mut out = format!("{:<12} {:>6} {:>8} {:>8}\n", "domain", "tasks", "sr%", "pr%");
        let row = |name: &str, s: &DomainStats| {
            format!(
                "{:<12} {:>6} {:>8.1} {:>8.1}\n",
                name,
                s.tasks,
                s.success_rate * 100.0,
                s.mean_progress_rate * 100.0
            )
        };
        for (d, s) in &self.domains {
            out.push_str(&row(d.as_str(), s));
        }
        out.push_str(&row("all", &self.overall));
        out
    }
}
