//! Synthetic-student cohorts driven through the real plan/apply loop.
//!
//! Each simulated student answers items as independent Bernoulli draws with
//! a per-feature success probability that grows linearly with practice.
//! Students are independent: with the `parallel` feature they run on the
//! rayon pool, and results are always assembled in student order, so the
//! report does not depend on scheduling.

pub mod synth;

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Mastery;
use crate::graph::{LanguageModel, Severity};
use crate::mastery::MasteryParams;
use crate::profile::{init_profile, FeatureStatus, GameResult, StudentProfile};
use crate::rng::{derive_seed, SplitMix64};
use crate::selector::{apply_result, plan_session, Lexicon, SessionPlan};
use crate::store::log_to_jsonl;

#[derive(Clone, Debug)]
pub struct SimStudent {
    pub student_id: String,
    /// Probability of answering an item on each feature correctly.
    pub skill: BTreeMap<String, f64>,
    /// Added to a feature's skill after each session on it, capped at 1.
    pub learning_rate: f64,
    rng: SplitMix64,
}

impl SimStudent {
    pub fn new(
        student_id: impl Into<String>,
        skill: BTreeMap<String, f64>,
        learning_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if let Some((id, p)) = skill.iter().find(|(_, &p)| !in_unit(p)) {
            return Err(Error::OutOfRange(format!("skill {p} for `{id}`")));
        }
        if !in_unit(learning_rate) {
            return Err(Error::OutOfRange(format!("learning rate {learning_rate}")));
        }
        Ok(SimStudent {
            student_id: student_id.into(),
            skill,
            learning_rate,
            rng: SplitMix64::new(seed),
        })
    }

    /// Same skill on every feature of `model`.
    pub fn uniform(
        student_id: impl Into<String>,
        model: &LanguageModel,
        skill: f64,
        learning_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        let skill = model.features.keys().map(|id| (id.clone(), skill)).collect();
        SimStudent::new(student_id, skill, learning_rate, seed)
    }

    fn next_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Plays `plan`: one draw per item, then practice raises the skill.
pub fn simulate_session(sim: &mut SimStudent, plan: &SessionPlan) -> GameResult {
    let p = sim.skill.get(&plan.feature_id).copied().unwrap_or(0.0);
    let outcomes: Vec<bool> = plan.items.iter().map(|_| sim.rng.unit_f64() < p).collect();
    sim.skill
        .insert(plan.feature_id.clone(), (p + sim.learning_rate).min(1.0));
    GameResult::new(
        plan.session_index,
        plan.feature_id.clone(),
        plan.game_type,
        outcomes,
        plan.seed,
    )
    .expect("plans carry at least one item")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillRange {
    pub min: f64,
    pub max: f64,
}

/// Cohort description, the `cohort.json` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub size: usize,
    #[serde(default = "default_year")]
    pub year: u32,
    /// Each student's per-feature skill is drawn uniformly from this range.
    pub skill: SkillRange,
    pub learning_rate: f64,
    pub n_sessions: u32,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_year() -> u32 {
    1
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let SkillRange { min, max } = self.skill;
        if !(0.0..=1.0).contains(&min) || !(0.0..=1.0).contains(&max) || min > max {
            return Err(Error::OutOfRange(format!("skill range [{min}, {max}]")));
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::OutOfRange(format!("learning rate {}", self.learning_rate)));
        }
        if self.year < 1 {
            return Err(Error::InvalidYear(self.year));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Ran the requested number of sessions.
    SessionLimit,
    /// Every feature mastered and none due for reopening.
    Completed,
    /// No playable feature while some remain unmastered.
    EmptyPool,
    /// The chosen feature has no lexicon content.
    NoContent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemotionEvent {
    pub session_index: u32,
    pub feature_id: String,
    pub demoted: Vec<String>,
    pub relocked: Vec<String>,
}

/// One row of the per-session trajectory: every feature's mastery and
/// status after the session, in feature id order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrajectoryRow {
    pub feature_id: String,
    pub cells: Vec<(Mastery, FeatureStatus)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentOutcome {
    pub student_id: String,
    pub seed: u64,
    pub sessions_run: u32,
    pub stop: StopReason,
    /// Session after which each feature first opened (0 = open from the start).
    pub opened_at: BTreeMap<String, u32>,
    /// Session at which each feature was first mastered through play.
    pub mastered_at: BTreeMap<String, u32>,
    /// Plays between first opening and first mastery.
    pub plays_to_master: BTreeMap<String, u32>,
    pub final_mastery: BTreeMap<String, Mastery>,
    pub demotions: Vec<DemotionEvent>,
    #[serde(skip)]
    pub trajectory: Vec<TrajectoryRow>,
    #[serde(skip)]
    pub log: Vec<GameResult>,
}

impl StudentOutcome {
    pub fn starved(&self) -> bool {
        matches!(self.stop, StopReason::EmptyPool | StopReason::NoContent)
    }
}

/// Nearest-rank percentiles of an integer sample.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Percentiles {
    pub count: usize,
    pub min: u32,
    pub p10: u32,
    pub p50: u32,
    pub p90: u32,
    pub max: u32,
}

impl Percentiles {
    pub fn of(mut values: Vec<u32>) -> Self {
        if values.is_empty() {
            return Percentiles::default();
        }
        values.sort_unstable();
        let rank = |p: usize| values[(p * values.len()).div_ceil(100).max(1) - 1];
        Percentiles {
            count: values.len(),
            min: values[0],
            p10: rank(10),
            p50: rank(50),
            p90: rank(90),
            max: values[values.len() - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub students: usize,
    pub sessions_total: u64,
    pub completed: usize,
    pub starvation_count: usize,
    pub demotions_total: usize,
    pub sessions_run: Percentiles,
    pub features_mastered: Percentiles,
    pub plays_to_master: Percentiles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub n_sessions: u32,
    pub master_seed: u64,
    pub features: Vec<String>,
    pub aggregate: Aggregate,
    pub students: Vec<StudentOutcome>,
}

impl CohortReport {
    /// The JSON summary.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per student, session and feature.
    pub fn trajectories_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["student_id", "session_index", "feature_id", "mastery", "status", "played"])
            .expect("in-memory write");
        for student in &self.students {
            for (i, row) in student.trajectory.iter().enumerate() {
                let session = (i + 1).to_string();
                for (fid, (m, status)) in self.features.iter().zip(&row.cells) {
                    let status = match status {
                        FeatureStatus::Locked => "locked",
                        FeatureStatus::Open => "open",
                        FeatureStatus::Mastered => "mastered",
                    };
                    let played = if *fid == row.feature_id { "1" } else { "0" };
                    w.write_record([
                        student.student_id.as_str(),
                        session.as_str(),
                        fid.as_str(),
                        m.to_string().as_str(),
                        status,
                        played,
                    ])
                    .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// All session logs, students in order, each line prefixed by a
    /// `{"student_id": ..., "result": ...}` wrapper.
    pub fn sessions_jsonl(&self) -> String {
        let mut out = String::new();
        for student in &self.students {
            for result in &student.log {
                let line = serde_json::json!({
                    "student_id": student.student_id,
                    "result": result,
                });
                out.push_str(&line.to_string());
                out.push('\n');
            }
        }
        out
    }

    /// A single student's log in session-log format.
    pub fn student_log(&self, index: usize) -> String {
        log_to_jsonl(&self.students[index].log)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// Runs one student for up to `n_sessions`, stopping early when planning
/// fails.
pub fn run_student(
    model: &LanguageModel,
    lexicon: &Lexicon,
    params: &MasteryParams,
    mut sim: SimStudent,
    year: u32,
    n_sessions: u32,
) -> Result<StudentOutcome> {
    let features: Vec<&String> = model.features.keys().collect();
    let mut profile = init_profile(model, &sim.student_id, year, params)?;
    let mut outcome = StudentOutcome {
        student_id: sim.student_id.clone(),
        seed: 0,
        sessions_run: 0,
        stop: StopReason::SessionLimit,
        opened_at: BTreeMap::new(),
        mastered_at: BTreeMap::new(),
        plays_to_master: BTreeMap::new(),
        final_mastery: BTreeMap::new(),
        demotions: Vec::new(),
        trajectory: Vec::with_capacity(n_sessions as usize),
        log: Vec::with_capacity(n_sessions as usize),
    };
    for (id, s) in &profile.states {
        if s.status == FeatureStatus::Open {
            outcome.opened_at.insert(id.clone(), 0);
        }
    }

    for _ in 0..n_sessions {
        let seed = sim.next_seed();
        let plan = match plan_session(&profile, model, lexicon, params, seed) {
            Ok(plan) => plan,
            Err(Error::EmptyPool) => {
                outcome.stop = if all_mastered(&profile) {
                    StopReason::Completed
                } else {
                    StopReason::EmptyPool
                };
                break;
            }
            Err(Error::NoContent(_)) => {
                outcome.stop = StopReason::NoContent;
                break;
            }
            Err(e) => return Err(e),
        };
        let result = simulate_session(&mut sim, &plan);
        let (next, report) = apply_result(&profile, model, &plan, &result, params)?;
        profile = next;
        let session = report.session_index;

        for id in &report.opened {
            outcome.opened_at.entry(id.clone()).or_insert(session);
        }
        if report.status == FeatureStatus::Mastered
            && outcome.opened_at.contains_key(&report.feature_id)
            && !outcome.mastered_at.contains_key(&report.feature_id)
        {
            outcome.mastered_at.insert(report.feature_id.clone(), session);
            let plays = profile.states[&report.feature_id].times_played;
            outcome.plays_to_master.insert(report.feature_id.clone(), plays);
        }
        if !report.demoted.is_empty() {
            outcome.demotions.push(DemotionEvent {
                session_index: session,
                feature_id: report.feature_id.clone(),
                demoted: report.demoted.clone(),
                relocked: report.relocked.clone(),
            });
        }
        outcome.trajectory.push(TrajectoryRow {
            feature_id: report.feature_id.clone(),
            cells: features
                .iter()
                .map(|id| {
                    let s = &profile.states[id.as_str()];
                    (s.mastery, s.status)
                })
                .collect(),
        });
        outcome.log.push(result);
        outcome.sessions_run = session;
    }
    outcome.final_mastery = profile
        .states
        .iter()
        .map(|(id, s)| (id.clone(), s.mastery))
        .collect();
    Ok(outcome)
}

fn all_mastered(profile: &StudentProfile) -> bool {
    profile
        .states
        .values()
        .all(|s| s.status == FeatureStatus::Mastered)
}

fn check_inputs(model: &LanguageModel, lexicon: &Lexicon, params: &MasteryParams, spec: &CohortSpec) -> Result<()> {
    params.validate()?;
    spec.validate()?;
    model.topological_order()?;
    if let Some(v) = lexicon
        .check(model)
        .into_iter()
        .find(|v| v.severity() == Severity::Error)
    {
        return Err(Error::InvalidLexicon(v.to_string()));
    }
    Ok(())
}

/// Builds student `index` of the cohort: id `student-NNNN`, seed split off
/// `master_seed`, skills drawn in feature id order from the student's own
/// generator.
pub fn cohort_student(model: &LanguageModel, spec: &CohortSpec, master_seed: u64, index: usize) -> Result<(SimStudent, u64)> {
    let seed = derive_seed(master_seed, index as u64);
    let mut rng = SplitMix64::new(seed);
    let width = spec.skill.max - spec.skill.min;
    let skill = model
        .features
        .keys()
        .map(|id| (id.clone(), (spec.skill.min + width * rng.unit_f64()).min(1.0)))
        .collect();
    let student = SimStudent::new(
        format!("student-{index:04}"),
        skill,
        spec.learning_rate,
        rng.next_u64(),
    )?;
    Ok((student, seed))
}

pub fn run_cohort(
    model: &LanguageModel,
    lexicon: &Lexicon,
    spec: &CohortSpec,
    n_sessions: u32,
    params: &MasteryParams,
    master_seed: u64,
) -> Result<CohortReport> {
    run_cohort_with(Execution::default(), model, lexicon, spec, n_sessions, params, master_seed)
}

pub fn run_cohort_with(
    execution: Execution,
    model: &LanguageModel,
    lexicon: &Lexicon,
    spec: &CohortSpec,
    n_sessions: u32,
    params: &MasteryParams,
    master_seed: u64,
) -> Result<CohortReport> {
    check_inputs(model, lexicon, params, spec)?;
    let one = |index: usize| -> Result<StudentOutcome> {
        let (student, seed) = cohort_student(model, spec, master_seed, index)?;
        let mut outcome = run_student(model, lexicon, params, student, spec.year, n_sessions)?;
        outcome.seed = seed;
        Ok(outcome)
    };
    let students: Vec<StudentOutcome> = match execution {
        Execution::Sequential => (0..spec.size).map(one).collect::<Result<_>>()?,
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..spec.size).into_par_iter().map(one).collect::<Result<_>>()?,
    };

    let aggregate = Aggregate {
        students: students.len(),
        sessions_total: students.iter().map(|s| u64::from(s.sessions_run)).sum(),
        completed: students.iter().filter(|s| s.stop == StopReason::Completed).count(),
        starvation_count: students.iter().filter(|s| s.starved()).count(),
        demotions_total: students.iter().map(|s| s.demotions.len()).sum(),
        sessions_run: Percentiles::of(students.iter().map(|s| s.sessions_run).collect()),
        features_mastered: Percentiles::of(
            students
                .iter()
                .map(|s| s.final_mastery.values().filter(|m| m.is_max()).count() as u32)
                .collect(),
        ),
        plays_to_master: Percentiles::of(
            students
                .iter()
                .flat_map(|s| s.plays_to_master.values().copied())
                .collect(),
        ),
    };
    Ok(CohortReport {
        n_sessions,
        master_seed,
        features: model.features.keys().cloned().collect(),
        aggregate,
        students,
    })
}
