#![allow(dead_code)]

use std::path::PathBuf;

use featseq::rng::SplitMix64;
use featseq::selector::{apply_result, plan_session};
use featseq::sim::{simulate_session, synth, SimStudent};
use featseq::{
    profile::init_profile, Error, GameResult, LanguageModel, Lexicon, MasteryParams, SessionPlan,
    StudentProfile, TransitionReport,
};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap()
}

pub struct Step {
    pub before: StudentProfile,
    pub plan: SessionPlan,
    pub result: GameResult,
    pub after: StudentProfile,
    pub report: TransitionReport,
}

pub struct Trace {
    pub model: LanguageModel,
    pub params: MasteryParams,
    pub year: u32,
    pub initial: StudentProfile,
    pub steps: Vec<Step>,
}

/// A random curriculum (up to `max_features` nodes) and a random student
/// playing up to `sessions` sessions through the real pipeline. Skills are
/// spread over [0, 1] so demotions and relocks happen.
pub fn random_trace(seed: u64, max_features: usize, sessions: u32) -> Trace {
    let mut rng = SplitMix64::new(seed);
    let n = 1 + rng.below(max_features as u64) as usize;
    let model = synth::random_dag(n, 3, rng.next_u64());
    let lexicon = synth::covering_lexicon(&model, 3);
    let params = MasteryParams::for_model(&model);
    let year = 1 + rng.below(3) as u32;
    let skill = model
        .features
        .keys()
        .map(|id| (id.clone(), rng.unit_f64()))
        .collect();
    let learning = rng.unit_f64() * 0.1;
    let mut sim = SimStudent::new("trace", skill, learning, rng.next_u64()).unwrap();

    let initial = init_profile(&model, "trace", year, &params).unwrap();
    let mut profile = initial.clone();
    let mut steps = Vec::new();
    for _ in 0..sessions {
        let plan = match plan_session(&profile, &model, &lexicon, &params, rng.next_u64()) {
            Ok(plan) => plan,
            Err(Error::EmptyPool) => break,
            Err(e) => panic!("planning failed: {e}"),
        };
        let result = simulate_session(&mut sim, &plan);
        let (after, report) = apply_result(&profile, &model, &plan, &result, &params).unwrap();
        steps.push(Step {
            before: profile,
            plan,
            result,
            after: after.clone(),
            report,
        });
        profile = after;
    }
    Trace {
        model,
        params,
        year,
        initial,
        steps,
    }
}

impl Trace {
    pub fn last(&self) -> &StudentProfile {
        self.steps.last().map_or(&self.initial, |s| &s.after)
    }

    pub fn log(&self) -> Vec<GameResult> {
        self.steps.iter().map(|s| s.result.clone()).collect()
    }
}

/// Reads a lexicon for the `abc` golden model.
pub fn abc() -> (LanguageModel, Lexicon) {
    let model = LanguageModel::parse(&read("abc.model.json")).unwrap();
    let lexicon = Lexicon::load(&read("abc.lexicon.json"), &model).unwrap();
    (model, lexicon)
}
