use std::path::Path;

use anyhow::{bail, Context};
use featseq::graph::Severity;
use featseq::rng::session_seed;
use featseq::selector::{apply_result, plan_session};
use featseq::store::replay;
use featseq::{
    profile::init_profile, Error, GameResult, LanguageModel, Lexicon, MasteryParams, ProfileStore,
    Result, SessionPlan, StudentProfile, TransitionReport,
};

use crate::config::EngineConfig;

/// Process exit status for each engine error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NotFound(_) => 3,
        Error::EmptyPool => 4,
        Error::NoContent(_) => 5,
        Error::PlanResultMismatch(_) => 6,
        Error::LockContention(_) => 7,
        Error::SessionIndexMismatch { .. } => 8,
        Error::AlreadyExists(_) => 9,
        Error::Io { .. } => 2,
        _ => 10,
    }
}

/// Stable machine-readable name of an error, used in wire responses.
pub fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::MalformedDocument(_) => "MalformedDocument",
        Error::DuplicateFeatureId(_) => "DuplicateFeatureId",
        Error::UnknownPrerequisite { .. } => "UnknownPrerequisite",
        Error::InvalidThreshold(_) => "InvalidThreshold",
        Error::InvalidFeature { .. } => "InvalidFeature",
        Error::CyclicModel(_) => "CyclicModel",
        Error::UnknownFeature(_) => "UnknownFeature",
        Error::InvalidYear(_) => "InvalidYear",
        Error::SessionIndexMismatch { .. } => "SessionIndexMismatch",
        Error::FeatureLocked(_) => "FeatureLocked",
        Error::InvalidResult(_) => "InvalidResult",
        Error::OutOfRange(_) => "OutOfRange",
        Error::InvalidParams(_) => "InvalidParams",
        Error::DemotionNotTriggered { .. } => "DemotionNotTriggered",
        Error::EmptyPool => "EmptyPool",
        Error::NoContent(_) => "NoContent",
        Error::PlanResultMismatch(_) => "PlanResultMismatch",
        Error::InvalidLexicon(_) => "InvalidLexicon",
        Error::InvalidStudentId(_) => "InvalidStudentId",
        Error::NotFound(_) => "NotFound",
        Error::AlreadyExists(_) => "AlreadyExists",
        Error::CorruptRecord { .. } => "CorruptRecord",
        Error::LockContention(_) => "LockContention",
        Error::Io { .. } => "Io",
    }
}

#[derive(Clone, Debug)]
pub struct Engine {
    pub model: LanguageModel,
    pub lexicon: Lexicon,
    pub params: MasteryParams,
    pub store: ProfileStore,
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Engine {
    /// Loads and validates the model and lexicon named by `cfg`.
    pub fn from_config(cfg: &EngineConfig) -> anyhow::Result<Self> {
        let model = LanguageModel::parse(&read(&cfg.model)?)
            .with_context(|| format!("loading model {}", cfg.model.display()))?;
        let errors: Vec<String> = model
            .validate()
            .into_iter()
            .filter(|v| v.severity() == Severity::Error)
            .map(|v| v.to_string())
            .collect();
        if !errors.is_empty() {
            bail!("model {} is invalid: {}", cfg.model.display(), errors.join("; "));
        }
        let lexicon = Lexicon::load(&read(&cfg.lexicon)?, &model)
            .with_context(|| format!("loading lexicon {}", cfg.lexicon.display()))?;

        let mut overrides = cfg.params.clone();
        if let Some(n) = cfg.items_per_session {
            if overrides.is_null() {
                overrides = serde_json::json!({});
            }
            if let Some(obj) = overrides.as_object_mut() {
                obj.insert("items_per_session".into(), n.into());
            }
        }
        let params = MasteryParams::for_model(&model).with_overrides(&overrides)?;
        let store = ProfileStore::new(&cfg.data_dir, &model.language);
        Ok(Engine {
            model,
            lexicon,
            params,
            store,
        })
    }

    pub fn init_student(&self, student_id: &str, year: u32) -> Result<StudentProfile> {
        let _lock = self.store.lock(student_id)?;
        let profile = init_profile(&self.model, student_id, year, &self.params)?;
        self.store.create(&profile)?;
        Ok(profile)
    }

    pub fn profile(&self, student_id: &str) -> Result<StudentProfile> {
        self.store.load_profile(student_id)
    }

    /// The next session plan. Without a seed, the default is derived from
    /// the student id and the upcoming session index.
    pub fn plan(&self, student_id: &str, seed: Option<u64>) -> Result<SessionPlan> {
        let profile = self.store.load_profile(student_id)?;
        let seed = seed.unwrap_or_else(|| session_seed(student_id, profile.session_counter + 1));
        plan_session(&profile, &self.model, &self.lexicon, &self.params, seed)
    }

    /// Checks `result` against the plan its seed reproduces, applies it, and
    /// persists it: log line first, then snapshot.
    pub fn submit(&self, student_id: &str, result: &GameResult) -> Result<TransitionReport> {
        let _lock = self.store.lock(student_id)?;
        let profile = self.store.load_profile(student_id)?;
        if result.session_index != profile.session_counter + 1 {
            return Err(Error::SessionIndexMismatch {
                counter: profile.session_counter,
                got: result.session_index,
            });
        }
        result.checked_score()?;
        let plan = plan_session(&profile, &self.model, &self.lexicon, &self.params, result.seed)?;
        let (next, report) = apply_result(&profile, &self.model, &plan, result, &self.params)?;
        self.store.commit(&next, result)?;
        Ok(report)
    }

    /// Replays the session log and compares it with the stored snapshot.
    pub fn verify(&self, student_id: &str) -> Result<bool> {
        let stored = self.store.load_profile(student_id)?;
        let log = self.store.load_log(student_id)?;
        let rebuilt = replay(&self.model, &self.params, student_id, stored.year, &log)?;
        Ok(rebuilt == stored)
    }
}
