//! Acceptance criteria. Each prints one PASS/FAIL line; the process fails
//! if any criterion fails. Time limits are pinned below and include all
//! setup for the criterion.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use featseq::mastery::{apply_demotion, update_mastery};
use featseq::profile::{init_profile, GameType};
use featseq::rng::SplitMix64;
use featseq::selector::{apply_result, plan_session};
use featseq::sim::synth::{chain, covering_lexicon, random_dag};
use featseq::sim::{run_cohort, run_student, simulate_session, CohortSpec, SimStudent, SkillRange};
use featseq::store::replay;
use featseq::{
    Error, GameResult, LanguageModel, Mastery, MasteryParams, ProfileStore, Score, SessionPlan,
    StudentProfile,
};

const LIMIT_THREE_GAMES: Duration = Duration::from_millis(1);
const LIMIT_DROP_GRID: Duration = Duration::from_secs(1);
const LIMIT_UNLOCK: Duration = Duration::from_secs(10);
const LIMIT_DETERMINISM: Duration = Duration::from_secs(10);

const DROP_CAP: u32 = 10_000;
const UNLOCK_THRESHOLD: u32 = 75_000;
const REOPEN_AFTER: u32 = 10;
const DEMOTION: u32 = 10_000;

const UNLOCK_TRACES: u64 = 1000;
const REPLAY_TRACES: u64 = 500;
const TRACE_MAX_FEATURES: usize = 30;
const TRACE_SESSIONS: u32 = 60;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Outcome {
    check!(elapsed < limit, "took {elapsed:?}, limit {limit:?}");
    Ok(format!("{elapsed:.2?} < {limit:?}"))
}

struct Step {
    before: StudentProfile,
    plan: SessionPlan,
    result: GameResult,
    after: StudentProfile,
}

struct Trace {
    model: LanguageModel,
    params: MasteryParams,
    year: u32,
    steps: Vec<Step>,
}

/// Random curriculum of up to `TRACE_MAX_FEATURES` nodes, played by a
/// student of random per-feature skill through plan/apply.
fn random_trace(seed: u64) -> Trace {
    let mut rng = SplitMix64::new(seed);
    let n = 1 + rng.below(TRACE_MAX_FEATURES as u64) as usize;
    let model = random_dag(n, 3, rng.next_u64());
    let lexicon = covering_lexicon(&model, 3);
    let params = MasteryParams::for_model(&model);
    let year = 1 + rng.below(3) as u32;
    let skill = model.features.keys().map(|id| (id.clone(), rng.unit_f64())).collect();
    let mut sim = SimStudent::new("trace", skill, rng.unit_f64() * 0.1, rng.next_u64()).unwrap();
    let mut profile = init_profile(&model, "trace", year, &params).unwrap();
    let mut steps = Vec::new();
    for _ in 0..TRACE_SESSIONS {
        let plan = match plan_session(&profile, &model, &lexicon, &params, rng.next_u64()) {
            Ok(plan) => plan,
            Err(Error::EmptyPool) => break,
            Err(e) => panic!("trace {seed}: {e}"),
        };
        let result = simulate_session(&mut sim, &plan);
        let after = apply_result(&profile, &model, &plan, &result, &params).unwrap().0;
        steps.push(Step {
            before: profile,
            plan,
            result,
            after: after.clone(),
        });
        profile = after;
    }
    Trace {
        model,
        params,
        year,
        steps,
    }
}

fn three_perfect_games() -> Outcome {
    let params = MasteryParams::default();
    let start = Instant::now();
    let mut m = Mastery::new(50_000).unwrap();
    let mut seen = Vec::new();
    for _ in 0..3 {
        m = update_mastery(m, Score::perfect(), &params);
        seen.push(m);
    }
    let elapsed = start.elapsed();
    let shown: Vec<String> = seen.iter().map(|m| m.to_string()).collect();
    check!(shown == ["8.3333", "9.4444", "10.0000"], "got {shown:?}");
    check!(seen.iter().map(|m| m.units()).eq([83_333, 94_444, 100_000]), "units {seen:?}");
    within(elapsed, LIMIT_THREE_GAMES).map(|t| format!("8.3333 -> 9.4444 -> 10.0000, {t}"))
}

/// Integer EMA with round-half-even, no clamp and no snap.
fn uncapped(m: u32, correct: u32, total: u32) -> i64 {
    let num = 2 * u64::from(correct) * 100_000 + u64::from(m) * u64::from(total);
    let den = 3 * u64::from(total);
    let (q, r) = (num / den, num % den);
    let up = 2 * r > den || (2 * r == den && q % 2 == 1);
    (q + u64::from(up)) as i64
}

fn drop_cap_grid() -> Outcome {
    let params = MasteryParams::default();
    check!(params.max_drop == DROP_CAP, "default max_drop {}", params.max_drop);
    let start = Instant::now();
    let mut capped = 0;
    for m in (0..=100_000u32).step_by(100) {
        for k in 0..=100u32 {
            let after = update_mastery(Mastery::new(m).unwrap(), Score::new(k, 100).unwrap(), &params);
            let drop = i64::from(m) - i64::from(after.units());
            check!(drop <= i64::from(DROP_CAP), "m={m} score={k}/100 dropped {drop}");
            let ema_drop = i64::from(m) - uncapped(m, k, 100);
            if ema_drop > i64::from(DROP_CAP) {
                capped += 1;
                check!(drop == i64::from(DROP_CAP), "m={m} score={k}/100: cap not exact ({drop})");
            }
        }
    }
    within(start.elapsed(), LIMIT_DROP_GRID)
        .map(|t| format!("1001x101 grid, {capped} cells at the cap, {t}"))
}

fn unlock_gate() -> Outcome {
    let start = Instant::now();
    let mut plans = 0;
    for seed in 0..UNLOCK_TRACES {
        let trace = random_trace(seed);
        check!(
            trace.params.unlock_threshold.units() == UNLOCK_THRESHOLD,
            "threshold {}",
            trace.params.unlock_threshold
        );
        for step in &trace.steps {
            let fid = &step.plan.feature_id;
            let state = &step.before.states[fid];
            let gated = trace.model.features[fid]
                .prerequisites
                .iter()
                .all(|p| step.before.states[p].mastery.units() > UNLOCK_THRESHOLD);
            check!(
                gated || state.times_played > 0,
                "trace {seed}: session {} planned `{fid}` without support",
                step.plan.session_index
            );
            plans += 1;
        }
    }
    within(start.elapsed(), LIMIT_UNLOCK)
        .map(|t| format!("{UNLOCK_TRACES} traces, {plans} plans, {t}"))
}

/// `old` is assumed mastered; `new` is the only open feature and is played
/// at 50% so it never masters.
fn reopen_horizon() -> Outcome {
    let model = LanguageModel::parse(
        r#"{"language":"en","threshold":7.5,"features":[
        {"id":"new","label":"n","kind":"syntax","year":2,"prerequisites":[]},
        {"id":"old","label":"o","kind":"syntax","year":1,"prerequisites":[]}]}"#,
    )
    .unwrap();
    let lexicon = covering_lexicon(&model, 8);
    let params = MasteryParams::for_model(&model);
    check!(params.reopen_after == REOPEN_AFTER, "reopen_after {}", params.reopen_after);
    let mut profile = init_profile(&model, "s", 2, &params).unwrap();
    let mut reopened_at = Vec::new();
    let mut saw_nine = false;
    for session in 1..=33u32 {
        let staleness = profile.states["old"].staleness(profile.session_counter);
        let plan = plan_session(&profile, &model, &lexicon, &params, u64::from(session)).unwrap();
        if plan.feature_id == "old" {
            reopened_at.push(staleness);
        } else if staleness == REOPEN_AFTER - 1 {
            saw_nine = true;
        }
        let outcomes: Vec<bool> = if plan.feature_id == "old" {
            vec![true; plan.items.len()]
        } else {
            (0..plan.items.len()).map(|i| i % 2 == 0).collect()
        };
        let r = GameResult::new(session, plan.feature_id.clone(), plan.game_type, outcomes, plan.seed).unwrap();
        profile = apply_result(&profile, &model, &plan, &r, &params).unwrap().0;
    }
    check!(saw_nine, "staleness 9 never observed");
    check!(reopened_at == [10, 10, 10], "reopened at staleness {reopened_at:?}");
    Ok("reopened 3 times, each at staleness 10; passed over at 9".into())
}

fn demotion() -> Outcome {
    let model = LanguageModel::parse(
        r#"{"language":"en","threshold":7.5,"features":[
        {"id":"a","label":"a","kind":"grapheme","year":1,"prerequisites":[]},
        {"id":"b","label":"b","kind":"grapheme","year":2,"prerequisites":["a"]},
        {"id":"c","label":"c","kind":"grapheme","year":2,"prerequisites":["b"]}]}"#,
    )
    .unwrap();
    let lexicon = covering_lexicon(&model, 8);
    let params = MasteryParams::for_model(&model);
    check!(params.demotion_amount == DEMOTION, "demotion {}", params.demotion_amount);
    let mut p = init_profile(&model, "s", 2, &params).unwrap();
    let mut reports = Vec::new();
    for session in 1..=2u32 {
        let plan = plan_session(&p, &model, &lexicon, &params, u64::from(session)).unwrap();
        check!(plan.feature_id == "b", "session {session} planned {}", plan.feature_id);
        let r = GameResult::new(session, "b", plan.game_type, vec![false; plan.items.len()], plan.seed).unwrap();
        let (next, report) = apply_result(&p, &model, &plan, &r, &params).unwrap();
        reports.push(report);
        p = next;
    }
    // b: 50_000 -> 40_000 -> 30_000 (drop cap), then demoted to 20_000.
    check!(reports[0].demoted.is_empty() && reports[0].streak == 1, "first session demoted");
    check!(reports[1].demoted == ["a", "b"], "demoted {:?}", reports[1].demoted);
    check!(p.states["b"].mastery.units() == 20_000, "b at {}", p.states["b"].mastery.units());
    check!(p.states["a"].mastery.units() == 90_000, "a at {}", p.states["a"].mastery.units());
    check!(p.states["b"].non_improving_streak == 0, "streak not reset");

    // Floor at zero: b at 4_000 with prerequisite a at 6_000.
    let mut low = p.clone();
    low.states.get_mut("a").unwrap().set_mastery(Mastery::new(6_000).unwrap());
    low.states.get_mut("b").unwrap().set_mastery(Mastery::new(4_000).unwrap());
    low.states.get_mut("b").unwrap().non_improving_streak = params.non_improving_limit;
    let (floored, _) = apply_demotion(&low, &model, "b", &params).unwrap();
    check!(
        floored.states["a"].mastery.units() == 0 && floored.states["b"].mastery.units() == 0,
        "floor: a {} b {}",
        floored.states["a"].mastery,
        floored.states["b"].mastery
    );
    check!(floored.states["b"].non_improving_streak == 0, "floor: streak not reset");
    Ok("b 50000->20000, a 100000->90000, streak 0; floored at 0".into())
}

fn accuracy_first() -> Outcome {
    let mut plans = 0;
    for seed in 0..UNLOCK_TRACES {
        let trace = random_trace(seed);
        let mut seen = BTreeSet::new();
        for step in &trace.steps {
            let fid = &step.plan.feature_id;
            let expected = if seen.insert(fid.clone()) {
                GameType::Accuracy
            } else {
                GameType::Automaticity
            };
            check!(
                step.plan.game_type == expected,
                "trace {seed}: session {} `{fid}` got {:?}",
                step.plan.session_index,
                step.plan.game_type
            );
            plans += 1;
        }
    }
    Ok(format!("{UNLOCK_TRACES} traces, {plans} plans"))
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let model = random_dag(30, 3, 2024);
    let lexicon = covering_lexicon(&model, 10);
    let params = MasteryParams::for_model(&model);
    let spec = CohortSpec {
        size: 100,
        year: 1,
        skill: SkillRange { min: 0.3, max: 0.95 },
        learning_rate: 0.05,
        n_sessions: 200,
        master_seed: 77,
    };
    let run = || {
        let r = run_cohort(&model, &lexicon, &spec, spec.n_sessions, &params, spec.master_seed).unwrap();
        [r.to_json(), r.trajectories_csv(), r.sessions_jsonl()]
    };
    let (first, second) = (run(), run());
    let elapsed = start.elapsed();
    check!(model.len() == 30, "model has {} features", model.len());
    for (name, (a, b)) in ["report", "trajectories", "sessions"].iter().zip(first.iter().zip(&second)) {
        check!(a == b, "{name} differs between runs");
    }
    let sessions = first[2].lines().count();
    within(elapsed, LIMIT_DETERMINISM).map(|t| format!("100x200 on 30 features, {sessions} log lines identical, {t}"))
}

fn replay_integrity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut sessions = 0;
    for seed in 0..REPLAY_TRACES {
        let trace = random_trace(seed + 1_000_000);
        let store = ProfileStore::new(dir.path(), &trace.model.language);
        let id = format!("s{seed}");
        let initial = init_profile(&trace.model, &id, trace.year, &trace.params).unwrap();
        store.create(&initial).unwrap();
        for step in &trace.steps {
            let mut after = step.after.clone();
            after.student_id = id.clone();
            store.commit(&after, &step.result).unwrap();
            sessions += 1;
        }
        let stored = store.load_profile(&id).unwrap();
        let log = store.load_log(&id).unwrap();
        let rebuilt = replay(&trace.model, &trace.params, &id, trace.year, &log).unwrap();
        check!(
            serde_json::to_string(&rebuilt).unwrap() == serde_json::to_string(&stored).unwrap(),
            "trace {seed}: replay differs from snapshot"
        );
    }
    Ok(format!("{REPLAY_TRACES} traces, {sessions} sessions"))
}

fn chain_completion() -> Outcome {
    let mut summary = Vec::new();
    for d in 1..=6usize {
        let model = chain(d + 1, 1);
        let lexicon = covering_lexicon(&model, 8);
        let params = MasteryParams::for_model(&model);
        let bound = 3 * (d as u32 + 1);
        let sim = SimStudent::uniform("perfect", &model, 1.0, 0.0, d as u64).unwrap();
        let out = run_student(&model, &lexicon, &params, sim, 1, bound).unwrap();
        check!(
            out.mastered_at.len() == model.len(),
            "d={d}: mastered {} of {} within {bound}",
            out.mastered_at.len(),
            model.len()
        );
        let last = out.mastered_at.values().copied().max().unwrap();
        check!(last <= bound, "d={d}: last mastery at session {last} > {bound}");
        summary.push(format!("d{d}:{last}/{bound}"));
    }
    Ok(summary.join(" "))
}

fn validation() -> Outcome {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data");
    let lexicon = data.join("abc.lexicon.json");
    let featseq = |model: &str| {
        Command::new(env!("CARGO_BIN_EXE_featseq"))
            .arg("validate")
            .arg(data.join(model))
            .arg(&lexicon)
            .output()
            .unwrap()
    };

    let cyclic = LanguageModel::parse(&std::fs::read_to_string(data.join("cycle.model.json")).unwrap()).unwrap();
    check!(
        matches!(cyclic.topological_order(), Err(Error::CyclicModel(ref ids)) if ids.len() == 3),
        "cyclic model ordered"
    );
    let out = featseq("cycle.model.json");
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    check!(out.status.code() == Some(1), "cycle: exit {:?}", out.status.code());
    check!(text == "error: cycle detected among a, b, c\n", "cycle: output {text:?}");

    let dangling = std::fs::read_to_string(data.join("dangling.model.json")).unwrap();
    check!(
        matches!(LanguageModel::parse(&dangling), Err(Error::UnknownPrerequisite { .. })),
        "dangling model accepted"
    );
    let out = featseq("dangling.model.json");
    check!(out.status.code() == Some(1), "dangling: exit {:?}", out.status.code());

    let out = featseq("abc.model.json");
    check!(out.status.code() == Some(0) && out.stdout.is_empty(), "clean pair flagged");
    let out = featseq("no-such-model.json");
    check!(out.status.code() == Some(2), "unreadable: exit {:?}", out.status.code());
    Ok("cycle exit 1 listing a, b, c; dangling exit 1; clean 0; unreadable 2".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("three perfect games", three_perfect_games),
        ("drop cap", drop_cap_grid),
        ("unlock gate", unlock_gate),
        ("reopen horizon", reopen_horizon),
        ("demotion", demotion),
        ("accuracy first", accuracy_first),
        ("determinism", determinism),
        ("replay integrity", replay_integrity),
        ("chain completion", chain_completion),
        ("validation", validation),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
