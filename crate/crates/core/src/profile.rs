//! Per-student state: the curriculum graph instantiated with mastery values
//! and usage counters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::{Mastery, Score};
use crate::graph::LanguageModel;
use crate::mastery::MasteryParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureStatus {
    Locked,
    Open,
    Mastered,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameType {
    Accuracy,
    Automaticity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureState {
    pub mastery: Mastery,
    pub status: FeatureStatus,
    pub times_played: u32,
    pub last_used_session: Option<u32>,
    pub last_score: Option<f64>,
    pub non_improving_streak: u32,
}

impl FeatureState {
    fn new(mastery: Mastery, status: FeatureStatus) -> Self {
        FeatureState {
            mastery,
            status,
            times_played: 0,
            last_used_session: None,
            last_score: None,
            non_improving_streak: 0,
        }
    }

    /// Sets mastery and derives open/mastered from it. Locked features stay
    /// locked; only the unlock rule opens them.
    pub fn set_mastery(&mut self, mastery: Mastery) {
        self.mastery = mastery;
        if self.status != FeatureStatus::Locked {
            self.status = if mastery.is_max() {
                FeatureStatus::Mastered
            } else {
                FeatureStatus::Open
            };
        }
    }

    /// Sessions since last use; a feature never used counts from session 0.
    pub fn staleness(&self, session_counter: u32) -> u32 {
        session_counter - self.last_used_session.unwrap_or(0)
    }
}

/// One scored play session, exactly as written to the session log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameResult {
    pub session_index: u32,
    pub feature_id: String,
    pub game_type: GameType,
    pub item_outcomes: Vec<bool>,
    pub score: f64,
    pub seed: u64,
}

impl GameResult {
    pub fn new(
        session_index: u32,
        feature_id: impl Into<String>,
        game_type: GameType,
        item_outcomes: Vec<bool>,
        seed: u64,
    ) -> Result<Self> {
        let score = Score::from_outcomes(&item_outcomes)
            .map_err(|_| Error::InvalidResult("at least one item outcome is required".into()))?
            .as_f64();
        Ok(GameResult {
            session_index,
            feature_id: feature_id.into(),
            game_type,
            item_outcomes,
            score,
            seed,
        })
    }

    /// The exact score, after checking the stated `score` agrees with the
    /// outcomes.
    pub fn checked_score(&self) -> Result<Score> {
        let exact = Score::from_outcomes(&self.item_outcomes)
            .map_err(|_| Error::InvalidResult("at least one item outcome is required".into()))?;
        if (exact.as_f64() - self.score).abs() > 1e-9 {
            return Err(Error::InvalidResult(format!(
                "score {} disagrees with outcomes ({}/{})",
                self.score,
                exact.correct(),
                exact.total()
            )));
        }
        Ok(exact)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentProfile {
    pub student_id: String,
    pub year: u32,
    pub model_language: String,
    pub states: BTreeMap<String, FeatureState>,
    pub session_counter: u32,
    /// Last session that replayed an already-mastered feature.
    #[serde(default)]
    pub last_reopen_session: Option<u32>,
}

/// Instantiates the curriculum for a student in school `year`. Features from
/// earlier years are assumed mastered; the rest open at `open_init` when
/// their prerequisites already clear the threshold, else start locked at 0.
pub fn init_profile(
    model: &LanguageModel,
    student_id: &str,
    year: u32,
    params: &MasteryParams,
) -> Result<StudentProfile> {
    if year < 1 {
        return Err(Error::InvalidYear(year));
    }
    let mut profile = StudentProfile {
        student_id: student_id.to_owned(),
        year,
        model_language: model.language.clone(),
        states: BTreeMap::new(),
        session_counter: 0,
        last_reopen_session: None,
    };
    for id in model.topological_order()? {
        let feature = &model.features[&id];
        let state = if feature.year < year {
            FeatureState::new(Mastery::MAX, FeatureStatus::Mastered)
        } else if profile.prerequisites_surpass(model, &id, params.unlock_threshold) {
            FeatureState::new(params.open_init, FeatureStatus::Open)
        } else {
            FeatureState::new(Mastery::ZERO, FeatureStatus::Locked)
        };
        profile.states.insert(id, state);
    }
    Ok(profile)
}

impl StudentProfile {
    pub fn state(&self, id: &str) -> Result<&FeatureState> {
        self.states
            .get(id)
            .ok_or_else(|| Error::UnknownFeature(id.to_owned()))
    }

    pub fn state_mut(&mut self, id: &str) -> Result<&mut FeatureState> {
        self.states
            .get_mut(id)
            .ok_or_else(|| Error::UnknownFeature(id.to_owned()))
    }

    /// Whether every direct prerequisite of `id` is strictly above `threshold`.
    /// Prerequisites without a state count as unmet.
    pub fn prerequisites_surpass(&self, model: &LanguageModel, id: &str, threshold: Mastery) -> bool {
        model.features[id]
            .prerequisites
            .iter()
            .all(|p| self.states.get(p).is_some_and(|s| s.mastery > threshold))
    }

    /// Whether `id` may be played: unlocked, and either already played or
    /// backed by prerequisites above the threshold.
    pub fn is_playable(&self, model: &LanguageModel, id: &str, params: &MasteryParams) -> bool {
        self.states.get(id).is_some_and(|s| {
            s.status != FeatureStatus::Locked
                && (s.times_played > 0
                    || self.prerequisites_surpass(model, id, params.unlock_threshold))
        })
    }

    /// Opens every locked feature whose prerequisites all surpass the
    /// threshold. First openings start at `open_init`; features that were
    /// open before keep their mastery. Returns opened ids, ascending.
    pub fn recompute_status(&mut self, model: &LanguageModel, params: &MasteryParams) -> Vec<String> {
        let mut opened = Vec::new();
        loop {
            let ready: Vec<String> = self
                .states
                .iter()
                .filter(|(id, s)| {
                    s.status == FeatureStatus::Locked
                        && self.prerequisites_surpass(model, id, params.unlock_threshold)
                })
                .map(|(id, _)| id.clone())
                .collect();
            if ready.is_empty() {
                break;
            }
            for id in ready {
                let state = self.states.get_mut(&id).expect("id from states");
                let mastery = if state.mastery == Mastery::ZERO {
                    params.open_init
                } else {
                    state.mastery
                };
                state.status = FeatureStatus::Open;
                state.set_mastery(mastery);
                opened.push(id);
            }
        }
        opened.sort();
        opened
    }

    /// Re-locks never-played features whose prerequisites no longer surpass
    /// the threshold. An assumed (never-played) mastery is withdrawn to
    /// `open_init`. Returns re-locked ids, ascending.
    pub fn relock_unsupported(&mut self, model: &LanguageModel, params: &MasteryParams) -> Vec<String> {
        let mut relocked = Vec::new();
        loop {
            let unsupported: Vec<String> = self
                .states
                .iter()
                .filter(|(id, s)| {
                    s.status != FeatureStatus::Locked
                        && s.times_played == 0
                        && !self.prerequisites_surpass(model, id, params.unlock_threshold)
                })
                .map(|(id, _)| id.clone())
                .collect();
            if unsupported.is_empty() {
                break;
            }
            for id in unsupported {
                let state = self.states.get_mut(&id).expect("id from states");
                if state.mastery.is_max() {
                    state.mastery = params.open_init;
                }
                state.status = FeatureStatus::Locked;
                relocked.push(id);
            }
        }
        relocked.sort();
        relocked
    }

    /// Bookkeeping for a finished session: advances the session counter and
    /// the feature's usage counters. Mastery is left to the caller.
    pub fn record_session(&mut self, result: &GameResult) -> Result<()> {
        if result.session_index != self.session_counter + 1 {
            return Err(Error::SessionIndexMismatch {
                counter: self.session_counter,
                got: result.session_index,
            });
        }
        let score = result.checked_score()?;
        let state = self.state_mut(&result.feature_id)?;
        if state.status == FeatureStatus::Locked {
            return Err(Error::FeatureLocked(result.feature_id.clone()));
        }
        state.times_played += 1;
        state.last_used_session = Some(result.session_index);
        state.last_score = Some(score.as_f64());
        self.session_counter = result.session_index;
        Ok(())
    }

    /// Checks the profile covers exactly the model's features and that its
    /// per-feature invariants hold.
    pub fn check_consistency(&self, model: &LanguageModel) -> Result<()> {
        if !self.states.keys().eq(model.features.keys()) {
            return Err(Error::InvalidResult(
                "profile features differ from the model".into(),
            ));
        }
        for (id, s) in &self.states {
            if (s.status == FeatureStatus::Mastered) != s.mastery.is_max() {
                return Err(Error::InvalidResult(format!(
                    "feature `{id}` status {:?} disagrees with mastery {}",
                    s.status, s.mastery
                )));
            }
            if s.last_used_session.is_some_and(|u| u > self.session_counter) {
                return Err(Error::InvalidResult(format!(
                    "feature `{id}` used after the current session"
                )));
            }
        }
        Ok(())
    }
}
