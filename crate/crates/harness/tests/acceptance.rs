//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any of criteria 1-7 fails. Criterion 8 needs a live
//! endpoint (WMPLAN_LIVE_BASE_URL and WMPLAN_LIVE_MODEL) and never gates.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmplan_core::actor::{extract_command, ActorCommand};
use wmplan_core::belief::{belief_update, extract_synthesis, BeliefConfig, BeliefContext, SynthesisJson};
use wmplan_core::domain::{ActorStep, BeliefState};
use wmplan_core::env::blocksworld::{BlocksState, BlocksTask};
use wmplan_core::env::gripper::GripperTask;
use wmplan_core::env::{build_environment, bundled_fixture, CheckpointTracker, GroundState, TaskSpec};
use wmplan_core::gateway::{
    ChatBackend, ChatRequest, Completion, Gateway, GatewayError, OracleBackend, PromptSet,
};
use wmplan_core::orchestrator::{aggregate, report_tokens, TaskSummary, Termination};
use wmplan_core::planner::{parse_completion, parse_execute_subgoal, parse_full_plan, render_subgoal};
use wmplan_core::symbolic::SymbolicTracker;
use wmplan_core::{
    run_episode, ComponentTag, Domain, RunConfig, SubEpisode, SubEpisodeStatus, Subgoal, TokenLedger,
};
use wmplan_harness::config::{BackendConfig, HttpConfig, Settings};
use wmplan_harness::results::{write_episode, TRAJECTORY_FILE};
use wmplan_harness::run_task;

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(domain: Domain, name: &str) -> TaskSpec {
    TaskSpec::from_fixture(domain, bundled_fixture(name).unwrap()).unwrap()
}

// 1 ------------------------------------------------------------------------

fn truth(s: &BlocksState) -> Vec<String> {
    let mut v: Vec<String> = s.predicates().iter().map(|p| p.to_string()).collect();
    v.sort();
    v
}

fn reachable(n: usize) -> Vec<BlocksState> {
    let start = BlocksState::all_on_table(n);
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for a in s.applicable() {
            let next = s.apply(a).unwrap();
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    seen.into_iter().collect()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let tracker = SymbolicTracker::for_domain(Domain::Blocksworld);
    let (mut checked, mut mismatches) = (0usize, 0usize);
    for n in 1..=4 {
        for s in reachable(n) {
            let m = tracker.init_memory(&s.render());
            checked += 1;
            mismatches += (m.sorted_predicates() != truth(&s)) as usize;
            for a in s.applicable() {
                let next = s.apply(a).unwrap();
                let m2 = tracker.update_memory(&m, &next.render(), Some(&a.to_string()));
                checked += 1;
                mismatches += (m2.sorted_predicates() != truth(&next)) as usize;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let mut s = BlocksState::random(6, &mut rng);
        let mut m = tracker.init_memory(&s.render());
        for _ in 0..20 {
            let acts = s.applicable();
            s = s.apply(acts[rng.gen_range(0..acts.len())]).unwrap();
            m = tracker.update_memory(&m, &s.render(), None);
            checked += 1;
            mismatches += (m.sorted_predicates() != truth(&s)) as usize;
        }
    }
    let t = start.elapsed();
    ensure(mismatches == 0, || format!("{mismatches} mismatches out of {checked}"))?;
    ensure(t < Duration::from_secs(10), || format!("took {t:?}"))?;
    Ok(format!("{checked} memory updates, 0 mismatches, {:.2}s", t.as_secs_f64()))
}

// 2 ------------------------------------------------------------------------

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tasks = Vec::new();
    for i in 0..20 {
        let n = 4 + i % 3;
        tasks.push(TaskSpec::Blocksworld(BlocksTask::random(&format!("bw-{i}"), n, &mut rng)));
    }
    for i in 0..20 {
        let balls = 2 + i % 3;
        tasks.push(TaskSpec::Gripper(GripperTask::random(&format!("gr-{i}"), 2, balls, &mut rng)));
    }
    let mut summaries = Vec::new();
    let mut max_steps = 0;
    for task in &tasks {
        let cfg = RunConfig::for_task(task);
        let mut oracle = OracleBackend::new(task.domain()).unwrap();
        let r = run_episode(&cfg, task, &mut oracle);
        ensure(r.outcome.total_env_steps <= 100, || format!("{} used {} steps", task.id(), r.outcome.total_env_steps))?;
        max_steps = max_steps.max(r.outcome.total_env_steps);
        summaries.push(TaskSummary::from_record(&r));
    }
    let report = aggregate(summaries).map_err(|e| e.to_string())?;
    for (d, s) in &report.domains {
        ensure(s.success_rate == 1.0 && s.mean_progress_rate == 1.0, || {
            format!("{d}: sr {} pr {}", s.success_rate, s.mean_progress_rate)
        })?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(30), || format!("took {t:?}"))?;
    Ok(format!("40/40 solved, pr 1.0, max {max_steps} env steps, {:.2}s", t.as_secs_f64()))
}

// 3 ------------------------------------------------------------------------

fn criterion_3() -> Check {
    let transcript = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/replay/alfworld_two_soapbars.json");
    let settings = Settings {
        backend: Some(BackendConfig::Replay { transcript: transcript.into(), strict: true }),
        ..Default::default()
    };
    let task = fixture(Domain::Household, "alfworld_two_soapbars.json");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut logs = Vec::new();
    let mut last = None;
    for _ in 0..2 {
        let (record, elapsed) = run_task(&settings, &task).map_err(|e| e.to_string())?;
        let dir = write_episode(tmp.path(), &record, elapsed).map_err(|e| e.to_string())?;
        logs.push(fs::read(dir.join(TRAJECTORY_FILE)).map_err(|e| e.to_string())?);
        last = Some(record);
    }
    let r = last.unwrap();
    let expected = [
        "Find and take the first soapbar",
        "Find and take the first soapbar",
        "Take soapbar 1 from toilet 1",
        "Take soapbar 2 from toilet 1",
    ];
    let got: Vec<String> = r
        .planner_steps
        .iter()
        .take(4)
        .filter_map(|s| s.subgoal.as_ref().map(|g| g.description.clone()))
        .collect();
    ensure(got == expected, || format!("subgoals {got:?}"))?;
    let fact = "indicating a potential restriction or condition not met for that action";
    ensure(
        r.beliefs.iter().any(|b| b.textual.learned_facts.iter().any(|f| f.text.contains(fact))),
        || "learned fact missing".into(),
    )?;
    ensure(r.outcome.success, || format!("outcome {:?}", r.outcome))?;
    ensure(logs[0] == logs[1], || "trajectory.jsonl differs between runs".into())?;
    Ok(format!(
        "4 subgoals verbatim, fact present, success in {} env steps, {} byte log identical",
        r.outcome.total_env_steps,
        logs[0].len()
    ))
}

// 4 ------------------------------------------------------------------------

const FRAGMENTS: &[&str] = &[
    "FULL PLAN", "Subgoals:", "EXECUTE_SUBGOAL[", "TASK COMPLETE", "DESC:", "SEARCH_LOCATIONS:", "]", "[",
    "\n", "\n\n", "  ", "1.", "2)", "```", "`", "{", "}", "\"", "\\", ":", ",", "#", "null", "SUBGOAL COMPLETED",
    "REQUEST_REPLAN[", "status_line", "learned_facts", "ANSWER:", "JUSTIFICATION:", "é", "\u{1F600}", "\r\n",
    "go to desk 1", "b1", "look", "{\"status_line\": \"Status: ok\"}",
];

fn noise(rng: &mut ChaCha8Rng, max_parts: usize) -> String {
    let parts = rng.gen_range(0..=max_parts);
    let mut s = String::new();
    for _ in 0..parts {
        match rng.gen_range(0..4) {
            0 | 1 => s.push_str(FRAGMENTS[rng.gen_range(0..FRAGMENTS.len())]),
            2 => s.push(rng.gen::<char>()),
            _ => {
                for _ in 0..rng.gen_range(1..8) {
                    s.push(rng.gen_range(b' '..=b'~') as char);
                }
            }
        }
    }
    s
}

#[derive(Clone, Copy, Debug)]
enum Fault {
    /// Actor never finishes; it keeps issuing commands.
    EndlessActor,
    /// Planner output never parses.
    MalformedPlanner,
    /// Backend goes down after some number of calls.
    BackendDown,
    /// Every component answers with noise.
    Noise,
    /// Actor alternates garbage, empty replies and replan requests.
    FlakyActor,
}

struct FaultBackend {
    fault: Fault,
    rng: ChaCha8Rng,
    calls: u32,
    fail_at: u32,
}

impl ChatBackend for FaultBackend {
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        self.calls += 1;
        let rng = &mut self.rng;
        let good_planner = "Next.\nEXECUTE_SUBGOAL[\n  DESC: Look around\n  SEARCH_LOCATIONS: null\n]";
        let text = match (self.fault, req.tag) {
            (Fault::BackendDown, _) if self.calls >= self.fail_at => {
                return Err(GatewayError::BackendUnavailable("injected outage".into()))
            }
            (Fault::MalformedPlanner, ComponentTag::Planner) => noise(rng, 12).replace("EXECUTE_SUBGOAL[", "").replace("TASK COMPLETE", ""),
            (Fault::Noise, _) => noise(rng, 16),
            (_, ComponentTag::Planner) => good_planner.to_string(),
            (Fault::FlakyActor, ComponentTag::Actor) => match rng.gen_range(0..4) {
                0 => String::new(),
                1 => "REQUEST_REPLAN[stuck]".into(),
                _ => noise(rng, 6),
            },
            (_, ComponentTag::Actor) => {
                let cmds = ["look", "inventory", "check valid actions", "go to nowhere", "pickup(b9)"];
                format!("Trying.\n```\n{}\n```", cmds[rng.gen_range(0..cmds.len())])
            }
            (_, ComponentTag::Verification) => "ANSWER: No\nJUSTIFICATION: nothing changed".into(),
            (_, ComponentTag::Synthesis) => {
                r#"{"status_line": "Status: no progress", "justification": "", "learned_facts": []}"#.into()
            }
        };
        Ok(Completion::text(text))
    }

    fn observe_ground_truth(&mut self, _state: &GroundState) {}
}

fn criterion_4() -> Check {
    let mut pool: Vec<TaskSpec> = vec![
        fixture(Domain::Blocksworld, "blocksworld_three_tower.json"),
        fixture(Domain::Blocksworld, "blocksworld_four_swap.json"),
        fixture(Domain::Gripper, "gripper_two_balls.json"),
        fixture(Domain::Household, "alfworld_two_soapbars.json"),
        fixture(Domain::Adventure, "zork_secret_passage.json"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    pool.push(TaskSpec::Blocksworld(BlocksTask::random("bw-r", 5, &mut rng)));
    pool.push(TaskSpec::Gripper(GripperTask::random("gr-r", 3, 3, &mut rng)));

    let faults = [Fault::EndlessActor, Fault::MalformedPlanner, Fault::BackendDown, Fault::Noise, Fault::FlakyActor];
    let (mut crashes, mut violations) = (0usize, Vec::new());
    let mut terminations = std::collections::BTreeMap::new();
    for i in 0..200usize {
        let task = &pool[i % pool.len()];
        let fault = faults[(i / pool.len()) % faults.len()];
        let cfg = RunConfig::for_task(task);
        let limit = if task.domain() == Domain::Adventure { 150 } else { 100 };
        let mut backend = FaultBackend {
            fault,
            rng: ChaCha8Rng::seed_from_u64(i as u64),
            calls: 0,
            fail_at: 1 + (i as u32 * 7) % 60,
        };
        match catch_unwind(AssertUnwindSafe(|| run_episode(&cfg, task, &mut backend))) {
            Err(_) => crashes += 1,
            Ok(r) => {
                *terminations.entry(format!("{:?}", r.outcome.termination)).or_insert(0) += 1;
                let total: u32 = r.sub_episodes.iter().map(|e| e.env_steps_consumed).sum();
                if r.outcome.total_env_steps > limit || total != r.outcome.total_env_steps {
                    violations.push(format!("{} {fault:?}: {} steps", task.id(), r.outcome.total_env_steps));
                }
                for e in &r.sub_episodes {
                    if e.steps.len() > 35 || e.env_steps_consumed > 35 {
                        violations.push(format!("{} {fault:?}: sub-episode of {}", task.id(), e.steps.len()));
                    }
                }
                if r.outcome.termination == Termination::BackendError && r.outcome.error.is_none() {
                    violations.push(format!("{}: backend error without annotation", task.id()));
                }
            }
        }
    }
    ensure(crashes == 0, || format!("{crashes} crashes"))?;
    ensure(violations.is_empty(), || violations.join("; "))?;
    Ok(format!("200 episodes, 0 crashes, budgets held; terminations {terminations:?}"))
}

// 5 ------------------------------------------------------------------------

fn phrase(rng: &mut ChaCha8Rng) -> String {
    let words: Vec<String> = (0..rng.gen_range(1..5))
        .map(|_| {
            let mut w = String::new();
            w.push(rng.gen_range(b'a'..=b'z') as char);
            for _ in 0..rng.gen_range(0..8) {
                w.push(if rng.gen_bool(0.8) { rng.gen_range(b'a'..=b'z') } else { rng.gen_range(b'0'..=b'9') } as char);
            }
            w
        })
        .collect();
    words.join(" ")
}

fn printable(rng: &mut ChaCha8Rng, max: usize) -> String {
    (0..rng.gen_range(0..=max)).map(|_| rng.gen_range(b' '..=b'~') as char).collect()
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut crashes = 0;
    for _ in 0..10_000 {
        let text = noise(&mut rng, 40);
        let ok = catch_unwind(|| {
            let _ = parse_full_plan(&text, 0);
            let _ = parse_execute_subgoal(&text, 0);
            let _ = parse_completion(&text, 0);
            let _ = extract_command(&text);
            let _ = extract_synthesis(&text, false);
            let _ = extract_synthesis(&text, true);
        });
        crashes += ok.is_err() as usize;
    }
    let mut failures = Vec::new();
    for i in 0..1000u32 {
        let locs = rng.gen_bool(0.5).then(|| (0..rng.gen_range(1..6)).map(|_| phrase(&mut rng)).collect());
        let s = Subgoal { description: phrase(&mut rng), search_locations: locs, issued_at_k: i };
        if parse_execute_subgoal(&format!("Reasoning.\n{}", render_subgoal(&s)), i).ok() != Some(s.clone()) {
            failures.push(format!("subgoal {s:?}"));
        }

        let items: Vec<String> = (0..rng.gen_range(1..8)).map(|_| phrase(&mut rng)).collect();
        let mut text = String::from("FULL PLAN\nSubgoals:\n");
        for (j, it) in items.iter().enumerate() {
            text.push_str(&format!("{}. {it}\n", j + 1));
        }
        text.push_str("\nEXECUTE_SUBGOAL[\n  DESC: x\n]");
        if parse_full_plan(&text, i).ok().flatten().map(|p| p.subgoals) != Some(items.clone()) {
            failures.push(format!("plan {items:?}"));
        }

        let cmd = phrase(&mut rng);
        if extract_command(&format!("Thinking.\n```\n{cmd}\n```")).ok() != Some(ActorCommand::Command(cmd.clone())) {
            failures.push(format!("command {cmd:?}"));
        }

        let syn = SynthesisJson {
            status_line: format!("Status: {}", printable(&mut rng, 30)),
            justification: printable(&mut rng, 40),
            learned_facts: (0..rng.gen_range(0..4)).map(|_| printable(&mut rng, 30)).collect(),
        };
        let json = serde_json::to_string_pretty(&syn).unwrap();
        if extract_synthesis(&json, true).ok() != Some(syn.clone())
            || extract_synthesis(&format!("Here it is:\n```json\n{json}\n```"), false).ok() != Some(syn.clone())
        {
            failures.push(format!("synthesis {syn:?}"));
        }
    }
    ensure(crashes == 0, || format!("{crashes} parser panics"))?;
    ensure(failures.is_empty(), || format!("{} round-trip failures, first: {}", failures.len(), failures[0]))?;
    Ok("10000 fuzz cases x 6 parsers, 0 panics; 1000 x 4 round trips exact".into())
}

// 6 ------------------------------------------------------------------------

fn progress_after(task: &TaskSpec, actions: &[&str]) -> f64 {
    let mut env = build_environment(task);
    env.reset();
    for a in actions {
        env.step(a);
    }
    env.progress_rate()
}

fn criterion_6() -> Check {
    let house = fixture(Domain::Household, "alfworld_two_soapbars.json");
    let tower = fixture(Domain::Blocksworld, "blocksworld_three_tower.json");
    let grip = fixture(Domain::Gripper, "gripper_two_balls.json");
    let mut tracker = CheckpointTracker::new((0..8).map(|i| format!("c{i}")).collect());
    tracker.observe(|i| i < 3);
    tracker.observe(|i| i == 5);
    tracker.observe(|_| false);

    let cases: [(&str, f64, f64); 5] = [
        ("household: saw soapbars", progress_after(&house, &["go to toilet 1"]), 1.0 / 4.0),
        (
            "household: one soapbar binned",
            progress_after(&house, &["go to toilet 1", "take soapbar 1 from toilet 1", "go to garbagecan 1", "put soapbar 1 in/on garbagecan 1"]),
            3.0 / 4.0,
        ),
        ("blocksworld: initial", progress_after(&tower, &[]), 1.0 / 3.0),
        ("blocksworld: b2 on b3", progress_after(&tower, &["pickup(b2)", "stack(b2,b3)"]), 2.0 / 3.0),
        // two delivery checkpoints plus "a ball has been picked up"
        (
            "gripper: one ball moved",
            progress_after(&grip, &["pick(ball1,room1,left)", "move(room1,room2)", "drop(ball1,room2,left)"]),
            2.0 / 3.0,
        ),
    ];
    for (name, got, want) in cases {
        ensure(got == want, || format!("{name}: {got} != {want}"))?;
    }
    ensure(tracker.progress_rate() == 0.5, || format!("ever-satisfied tracker: {}", tracker.progress_rate()))?;

    let summary = |domain, success, pr| TaskSummary {
        task_id: "t".into(),
        domain,
        success,
        progress_rate: pr,
        total_env_steps: 0,
        termination: Termination::Success,
        error: None,
        tokens: 0,
    };
    let r = aggregate(vec![summary(Domain::Gripper, true, 1.0), summary(Domain::Gripper, false, 0.5)])
        .map_err(|e| e.to_string())?;
    let g = &r.domains[&Domain::Gripper];
    ensure(g.success_rate == 0.5 && g.mean_progress_rate == 0.75, || format!("suite: {g:?}"))?;
    let r = aggregate(vec![
        summary(Domain::Blocksworld, true, 1.0),
        summary(Domain::Adventure, false, 0.25),
        summary(Domain::Adventure, false, 0.0),
        summary(Domain::Adventure, true, 1.0),
    ])
    .map_err(|e| e.to_string())?;
    let a = &r.domains[&Domain::Adventure];
    ensure(a.successes == 1 && a.success_rate == 1.0 / 3.0 && a.mean_progress_rate == 1.25 / 3.0, || format!("{a:?}"))?;
    ensure(r.overall.success_rate == 0.5 && r.overall.mean_progress_rate == 2.25 / 4.0, || format!("{:?}", r.overall))?;
    ensure(aggregate(Vec::new()).is_err(), || "empty suite accepted".into())?;

    let mut ledger = TokenLedger::default();
    ledger.record(ComponentTag::Actor, 600, 100);
    ledger.record(ComponentTag::Planner, 150, 30);
    ledger.record(ComponentTag::Verification, 80, 20);
    ledger.record(ComponentTag::Synthesis, 15, 5);
    let s = report_tokens(&ledger);
    let got = [s.actor, s.planner, s.verification, s.synthesis];
    ensure(got == [70.0, 18.0, 10.0, 2.0], || format!("shares {got:?}"))?;
    let z = report_tokens(&TokenLedger::default());
    ensure(z.zero_total && z.planner == 0.0, || "zero ledger".into())?;
    Ok("5 progress fixtures, tracker, 2 suite fixtures exact; shares 70/18/10/2".into())
}

// 7 ------------------------------------------------------------------------

struct Counting<B> {
    inner: B,
    log: Vec<(ComponentTag, u32)>,
}

impl<B: ChatBackend> ChatBackend for Counting<B> {
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        self.log.push((req.tag, req.attempt));
        self.inner.complete(req)
    }

    fn observe_ground_truth(&mut self, state: &GroundState) {
        self.inner.observe_ground_truth(state)
    }
}

fn criterion_7() -> Check {
    // a single update in isolation
    let task = fixture(Domain::Household, "alfworld_two_soapbars.json");
    let env = build_environment(&task);
    let tracker = SymbolicTracker::for_domain(Domain::Household);
    let prev = BeliefState::initial(tracker.init_memory(&env.initial_observation()));
    let obs = "You arrive at toilet 1. On the toilet 1, you see a soapbar 1, and a soapbar 2.";
    let mem = tracker.update_memory(&prev.symbolic, obs, Some("go to toilet 1"));
    let episode = SubEpisode {
        subgoal: Subgoal { description: "Go to toilet 1".into(), search_locations: None, issued_at_k: 0 },
        steps: vec![ActorStep { action: "go to toilet 1".into(), observation: obs.into(), sent: true }],
        status: SubEpisodeStatus::Completed,
        env_steps_consumed: 1,
    };
    let prompts = PromptSet::bundled(Domain::Household);
    let cfg = BeliefConfig::default();
    let ctx = BeliefContext { prompts: &prompts, config: &cfg };
    let mut backend = Counting {
        inner: wmplan_core::gateway::FnBackend(|r: &ChatRequest| {
            Ok(Completion::text(match r.tag {
                ComponentTag::Synthesis => r#"{"status_line":"Status: at toilet 1","justification":"","learned_facts":[]}"#,
                _ => "ANSWER: Yes\nJUSTIFICATION: seen",
            }))
        }),
        log: Vec::new(),
    };
    {
        let mut gw = Gateway::new(&mut backend);
        let _ = belief_update(&mut gw, &ctx, &prev, mem, &episode, None);
        let c = gw.call_counts();
        let v = c.get(&ComponentTag::Verification).copied().unwrap_or_default();
        let s = c.get(&ComponentTag::Synthesis).copied().unwrap_or_default();
        ensure(v.first == 5 && s.first == 1, || format!("single update: {v:?} {s:?}"))?;
    }

    // every update of a whole oracle episode
    let task = fixture(Domain::Gripper, "gripper_two_balls.json");
    let mut backend = Counting { inner: OracleBackend::new(Domain::Gripper).unwrap(), log: Vec::new() };
    let r = run_episode(&RunConfig::for_task(&task), &task, &mut backend);
    let mut updates = Vec::new();
    let mut cur: Option<(u32, u32)> = None;
    for (tag, attempt) in &backend.log {
        match tag {
            ComponentTag::Verification | ComponentTag::Synthesis => {
                let c = cur.get_or_insert((0, 0));
                if *attempt == 0 {
                    if *tag == ComponentTag::Verification {
                        c.0 += 1
                    } else {
                        c.1 += 1
                    }
                }
            }
            _ => updates.extend(cur.take()),
        }
    }
    updates.extend(cur.take());
    ensure(updates.len() == r.verification.len() && !updates.is_empty(), || format!("{} updates", updates.len()))?;
    ensure(updates.iter().all(|u| *u == (5, 1)), || format!("per-update counts {updates:?}"))?;
    Ok(format!("5 verification + 1 synthesis per update (1 isolated, {} in an episode)", updates.len()))
}

// 8 ------------------------------------------------------------------------

fn criterion_8() -> Option<Check> {
    let base_url = std::env::var("WMPLAN_LIVE_BASE_URL").ok()?;
    let model = std::env::var("WMPLAN_LIVE_MODEL").ok()?;
    let settings = Settings {
        backend: Some(BackendConfig::Http(HttpConfig {
            base_url,
            model,
            max_retries: 3,
            backoff_ms: 1000,
            timeout_secs: 120,
        })),
        ..Default::default()
    };
    let task = fixture(Domain::Adventure, "zork_secret_passage.json");
    let mut notes = Vec::new();
    for attempt in 1..=3 {
        let (r, _) = match run_task(&settings, &task) {
            Ok(x) => x,
            Err(e) => return Some(Err(e.to_string())),
        };
        let clean = r.parse_failures.total() == 0 && r.outcome.error.is_none();
        notes.push(format!(
            "attempt {attempt}: {:?}, pr {:.2}, parse failures {}",
            r.outcome.termination,
            r.outcome.progress_rate,
            r.parse_failures.total()
        ));
        if clean {
            return Some(Ok(notes.join("; ")));
        }
    }
    Some(Err(notes.join("; ")))
}

fn main() {
    let criteria: [Criterion; 7] = [
        (1, "symbolic memory matches ground truth", criterion_1),
        (2, "oracle end-to-end", criterion_2),
        (3, "golden replay", criterion_3),
        (4, "budget invariants under faults", criterion_4),
        (5, "parser robustness", criterion_5),
        (6, "metrics arithmetic", criterion_6),
        (7, "per-update call pattern", criterion_7),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let result = catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {n}: PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL {name}: {detail}");
            }
        }
    }
    match criterion_8() {
        None => println!("criterion 8: SKIP live smoke test: WMPLAN_LIVE_BASE_URL / WMPLAN_LIVE_MODEL not set"),
        Some(Ok(d)) => println!("criterion 8: PASS live smoke test: {d}"),
        Some(Err(d)) => println!("criterion 8: FAIL (non-gating) live smoke test: {d}"),
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
