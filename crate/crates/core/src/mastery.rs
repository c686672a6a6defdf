//! Mastery re-evaluation: the clamped, snapped moving-average update, the
//! non-improvement streak and the demotion rule it triggers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::{round_half_even, Mastery, Score};
use crate::graph::LanguageModel;
use crate::profile::StudentProfile;

/// Every tunable of the update and selection rules. Missing JSON fields take
/// the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasteryParams {
    /// Smoothing factor `alpha_num / alpha_den`, the weight of the new score.
    pub alpha_num: u32,
    pub alpha_den: u32,
    /// Results at or above this are promoted to the maximum.
    pub snap_threshold: Mastery,
    /// Largest decrease a single session may cause, in units.
    pub max_drop: u32,
    /// Units removed from a feature and its direct prerequisites on demotion.
    pub demotion_amount: u32,
    /// Sessions after last use before a mastered feature is offered again.
    pub reopen_after: u32,
    /// Consecutive non-improving sessions that trigger demotion.
    pub non_improving_limit: u32,
    /// Mastery given to a feature the first time it opens.
    pub open_init: Mastery,
    pub max_mastery: Mastery,
    /// Prerequisites must be strictly above this before dependents open.
    pub unlock_threshold: Mastery,
    /// A feature last used this many sessions ago or fewer counts as recent.
    pub recent_window: u32,
    /// Scores below this count as not having done well.
    pub poor_score: f64,
    pub items_per_session: usize,
}

impl Default for MasteryParams {
    fn default() -> Self {
        MasteryParams {
            alpha_num: 2,
            alpha_den: 3,
            snap_threshold: Mastery::saturating(97_500),
            max_drop: 10_000,
            demotion_amount: 10_000,
            reopen_after: 10,
            non_improving_limit: 2,
            open_init: Mastery::saturating(50_000),
            max_mastery: Mastery::MAX,
            unlock_threshold: Mastery::saturating(75_000),
            recent_window: 2,
            poor_score: 0.5,
            items_per_session: 7,
        }
    }
}

impl MasteryParams {
    /// Defaults with the unlock threshold taken from the model file.
    pub fn for_model(model: &LanguageModel) -> Self {
        MasteryParams {
            unlock_threshold: model.threshold_mastery(),
            ..MasteryParams::default()
        }
    }

    /// Applies a partial JSON object of overrides on top of `self`.
    pub fn with_overrides(&self, overrides: &serde_json::Value) -> Result<Self> {
        let mut merged = serde_json::to_value(self).expect("params serialize");
        match (merged.as_object_mut(), overrides) {
            (Some(base), serde_json::Value::Object(patch)) => {
                for (k, v) in patch {
                    base.insert(k.clone(), v.clone());
                }
            }
            (_, serde_json::Value::Null) => {}
            _ => return Err(Error::InvalidParams("overrides must be a JSON object".into())),
        }
        let params: MasteryParams =
            serde_json::from_value(merged).map_err(|e| Error::InvalidParams(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidParams(msg.to_owned()));
        if self.alpha_num == 0 || self.alpha_den == 0 || self.alpha_num > self.alpha_den {
            return fail("smoothing factor must lie in (0, 1]");
        }
        if self.max_mastery != Mastery::MAX {
            return fail("max_mastery is fixed at 100000");
        }
        if self.snap_threshold > self.max_mastery {
            return fail("snap_threshold exceeds max_mastery");
        }
        if !(0.0..=1.0).contains(&self.poor_score) {
            return fail("poor_score must lie in [0, 1]");
        }
        if self.items_per_session == 0 {
            return fail("items_per_session must be at least 1");
        }
        Ok(())
    }
}

/// One moving-average step: weight the session score against the previous
/// mastery only, round once (half to even), cap the loss at `max_drop`, and
/// snap to the maximum from `snap_threshold` upwards.
pub fn update_mastery(m: Mastery, score: Score, params: &MasteryParams) -> Mastery {
    let max = u128::from(params.max_mastery.units());
    let an = u128::from(params.alpha_num);
    let ad = u128::from(params.alpha_den);
    let correct = u128::from(score.correct());
    let total = u128::from(score.total());

    // alpha * (correct / total) * max + (1 - alpha) * m, over a common denominator.
    let num = an * correct * max + (ad - an) * u128::from(m.units()) * total;
    let raw = round_half_even(num, ad * total) as u64;

    let floor = u64::from(m.units().saturating_sub(params.max_drop));
    let capped = Mastery::saturating(raw.max(floor));
    if capped >= params.snap_threshold {
        params.max_mastery
    } else {
        capped
    }
}

/// Counts consecutive sessions in which mastery did not rise. A session that
/// leaves the feature at the maximum resets the count: there is nothing left
/// to improve.
pub fn update_streak(prev: Mastery, new: Mastery, streak: u32) -> u32 {
    if new.is_max() || new > prev {
        0
    } else {
        streak + 1
    }
}

/// Lowers `feature_id` and each of its direct prerequisites by
/// `demotion_amount` (floored at zero), resets the feature's streak and
/// re-locks never-played features whose prerequisites no longer clear the
/// unlock threshold. Returns the new profile and the demoted ids, sorted.
pub fn apply_demotion(
    profile: &StudentProfile,
    model: &LanguageModel,
    feature_id: &str,
    params: &MasteryParams,
) -> Result<(StudentProfile, Vec<String>)> {
    let feature = model.feature(feature_id)?;
    let streak = profile.state(feature_id)?.non_improving_streak;
    if streak < params.non_improving_limit {
        return Err(Error::DemotionNotTriggered {
            feature: feature_id.to_owned(),
            streak,
            limit: params.non_improving_limit,
        });
    }

    let mut next = profile.clone();
    let mut demoted: Vec<String> = feature.prerequisites.iter().cloned().collect();
    demoted.push(feature_id.to_owned());
    demoted.sort();

    for id in &demoted {
        let state = next.state_mut(id)?;
        let lowered = state.mastery.saturating_sub(params.demotion_amount);
        state.set_mastery(lowered);
    }
    next.state_mut(feature_id)?.non_improving_streak = 0;
    next.relock_unsupported(model, params);
    Ok((next, demoted))
}
