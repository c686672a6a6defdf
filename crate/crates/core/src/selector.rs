//! The session planning pipeline and the result feedback loop.
//!
//! Planning runs four rules in a fixed order: build the candidate pool,
//! prioritize it, pick the game type, then sample content from the lexicon.
//! Each rule appends one line to the plan's rationale, prefixed by a name
//! from [`RULE_NAMES`].

use std::cmp::Reverse;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Mastery;
use crate::graph::{sort_violations, LanguageModel, Violation};
use crate::mastery::{update_mastery, update_streak, MasteryParams};
use crate::profile::{FeatureState, FeatureStatus, GameResult, GameType, StudentProfile};
use crate::rng::{sample_indices, SplitMix64};

/// Every rule name that can prefix a rationale line.
pub const RULE_NAMES: &[&str] = &[
    "candidate-pool",
    "reopen-first",
    "avoid-recent-failure",
    "order-by-usage",
    "select-feature",
    "game-type-accuracy",
    "game-type-automaticity",
    "content-sample",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentKind {
    Word,
    Sentence,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentItem {
    pub text: String,
    pub kind: ContentKind,
    pub features: BTreeSet<String>,
    pub difficulty: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    pub language: String,
    pub items: Vec<ContentItem>,
}

impl Lexicon {
    /// Parses the lexicon file (a JSON array of items) without checking it
    /// against a model.
    pub fn parse(text: &str, language: impl Into<String>) -> Result<Self> {
        let items: Vec<ContentItem> =
            serde_json::from_str(text).map_err(|e| Error::InvalidLexicon(e.to_string()))?;
        Ok(Lexicon {
            language: language.into(),
            items,
        })
    }

    /// Parses and rejects the lexicon on any error-severity violation.
    pub fn load(text: &str, model: &LanguageModel) -> Result<Self> {
        let lexicon = Lexicon::parse(text, model.language.clone())?;
        if let Some(v) = lexicon.check(model).first() {
            return Err(Error::InvalidLexicon(v.to_string()));
        }
        Ok(lexicon)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.items).expect("lexicon serialization is infallible")
    }

    pub fn check(&self, model: &LanguageModel) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, item) in self.items.iter().enumerate() {
            if item.text.trim().is_empty() {
                out.push(Violation::InvalidLexiconItem {
                    item: i,
                    reason: "empty text".into(),
                });
            }
            if item.features.is_empty() {
                out.push(Violation::InvalidLexiconItem {
                    item: i,
                    reason: "no features".into(),
                });
            }
            if !(1..=5).contains(&item.difficulty) {
                out.push(Violation::InvalidLexiconItem {
                    item: i,
                    reason: format!("difficulty {} outside 1..=5", item.difficulty),
                });
            }
            for f in item.features.iter().filter(|f| !model.contains(f)) {
                out.push(Violation::UnknownLexiconFeature {
                    item: i,
                    text: item.text.clone(),
                    feature: f.clone(),
                });
            }
        }
        sort_violations(&mut out);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolClass {
    Open,
    Reopen,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub feature_id: String,
    pub class: PoolClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionPlan {
    pub session_index: u32,
    pub feature_id: String,
    pub game_type: GameType,
    pub items: Vec<ContentItem>,
    pub seed: u64,
    pub rationale: Vec<String>,
}

/// What one result did to the profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionReport {
    pub student_id: String,
    pub session_index: u32,
    pub feature_id: String,
    pub game_type: GameType,
    pub score: f64,
    pub mastery_before: Mastery,
    pub mastery_after: Mastery,
    pub mastery_delta: i64,
    pub status: FeatureStatus,
    pub streak: u32,
    pub demoted: Vec<String>,
    pub relocked: Vec<String>,
    pub opened: Vec<String>,
}

/// Playable features: open ones below the maximum, plus mastered ones not
/// used for at least `reopen_after` sessions. Sorted by id.
pub fn candidate_pool(
    profile: &StudentProfile,
    model: &LanguageModel,
    params: &MasteryParams,
) -> Result<Vec<Candidate>> {
    let pool: Vec<Candidate> = profile
        .states
        .iter()
        .filter(|(id, _)| profile.is_playable(model, id, params))
        .filter_map(|(id, s)| {
            let class = match s.status {
                FeatureStatus::Open if !s.mastery.is_max() => PoolClass::Open,
                FeatureStatus::Mastered
                    if s.staleness(profile.session_counter) >= params.reopen_after =>
                {
                    PoolClass::Reopen
                }
                _ => return None,
            };
            Some(Candidate {
                feature_id: id.clone(),
                class,
            })
        })
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(pool)
}

fn usage_key(id: &str, s: &FeatureState, counter: u32) -> impl Ord {
    let staleness = match s.last_used_session {
        Some(used) => u64::from(counter - used),
        None => u64::MAX,
    };
    (
        s.times_played,
        Reverse(s.mastery),
        Reverse(staleness),
        id.to_owned(),
    )
}

fn did_poorly_recently(s: &FeatureState, counter: u32, params: &MasteryParams) -> bool {
    match (s.last_score, s.last_used_session) {
        (Some(score), Some(used)) => score < params.poor_score && counter - used < params.recent_window,
        _ => false,
    }
}

fn prioritize_traced(
    pool: &[Candidate],
    profile: &StudentProfile,
    params: &MasteryParams,
) -> (Vec<String>, Vec<String>) {
    let counter = profile.session_counter;
    let state = |id: &str| &profile.states[id];
    let mut trace = Vec::new();

    let mut reopen: Vec<&str> = pool
        .iter()
        .filter(|c| c.class == PoolClass::Reopen)
        .map(|c| c.feature_id.as_str())
        .collect();
    reopen.sort_unstable();

    let (mut avoided, mut regular): (Vec<&str>, Vec<&str>) = pool
        .iter()
        .filter(|c| c.class == PoolClass::Open)
        .map(|c| c.feature_id.as_str())
        .partition(|id| did_poorly_recently(state(id), counter, params));
    regular.sort_by_cached_key(|id| usage_key(id, state(id), counter));
    avoided.sort_by_cached_key(|id| usage_key(id, state(id), counter));

    // Back-to-back reopen sessions would let a large mastered set starve
    // the open features forever.
    let reopen_blocked = profile.last_reopen_session == Some(counter)
        && !(regular.is_empty() && avoided.is_empty());
    let mut order: Vec<String> = Vec::with_capacity(pool.len());
    let mut deferred = reopen.as_slice();
    match reopen.first() {
        Some(first) if !reopen_blocked => {
            trace.push(format!("reopen-first: {first}"));
            order.push((*first).to_owned());
            deferred = &reopen[1..];
        }
        Some(_) => trace.push(format!("reopen-first: deferred, session {counter} was a reopen")),
        None => {}
    }
    if !avoided.is_empty() {
        trace.push(format!("avoid-recent-failure: {}", avoided.join(",")));
    }
    if !regular.is_empty() {
        trace.push(format!("order-by-usage: {}", regular.join(",")));
    }
    order.extend(regular.iter().map(|s| (*s).to_owned()));
    order.extend(avoided.iter().map(|s| (*s).to_owned()));
    order.extend(deferred.iter().map(|s| (*s).to_owned()));
    (order, trace)
}

/// Orders the pool: at most one reopened feature leads, unless the previous
/// session was itself a reopen and open features are waiting; open features
/// that went badly in the recent window go last; the rest sort by fewest
/// plays, then highest mastery, then longest unused, then id.
pub fn prioritize(pool: &[Candidate], profile: &StudentProfile, params: &MasteryParams) -> Vec<String> {
    prioritize_traced(pool, profile, params).0
}

/// Accuracy games for a feature's first exposure, automaticity afterwards.
pub fn choose_game_type(state: &FeatureState) -> GameType {
    if state.times_played == 0 {
        GameType::Accuracy
    } else {
        GameType::Automaticity
    }
}

/// Samples up to `n` distinct items exercising `feature_id`, in sampled
/// order. Candidates are taken in lexicon order and drawn with
/// [`sample_indices`] from a SplitMix64 seeded with `seed`.
pub fn select_content(
    lexicon: &Lexicon,
    feature_id: &str,
    n: usize,
    seed: u64,
) -> Result<Vec<ContentItem>> {
    let matches: Vec<&ContentItem> = lexicon
        .items
        .iter()
        .filter(|item| item.features.contains(feature_id))
        .collect();
    if matches.is_empty() {
        return Err(Error::NoContent(feature_id.to_owned()));
    }
    let mut rng = SplitMix64::new(seed);
    Ok(sample_indices(matches.len(), n, &mut rng)
        .into_iter()
        .map(|i| matches[i].clone())
        .collect())
}

/// Plans the next session. A pure function of its arguments.
pub fn plan_session(
    profile: &StudentProfile,
    model: &LanguageModel,
    lexicon: &Lexicon,
    params: &MasteryParams,
    seed: u64,
) -> Result<SessionPlan> {
    let pool = candidate_pool(profile, model, params)?;
    let list = |class| {
        pool.iter()
            .filter(|c| c.class == class)
            .map(|c| c.feature_id.as_str())
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut rationale = vec![format!(
        "candidate-pool: open=[{}] reopen=[{}]",
        list(PoolClass::Open),
        list(PoolClass::Reopen)
    )];

    let (order, trace) = prioritize_traced(&pool, profile, params);
    rationale.extend(trace);
    let feature_id = order.into_iter().next().expect("pool is non-empty");
    rationale.push(format!("select-feature: {feature_id}"));

    let state = profile.state(&feature_id)?;
    let game_type = choose_game_type(state);
    rationale.push(match game_type {
        GameType::Accuracy => format!("game-type-accuracy: `{feature_id}` never played"),
        GameType::Automaticity => format!(
            "game-type-automaticity: `{feature_id}` played {} times",
            state.times_played
        ),
    });

    let items = select_content(lexicon, &feature_id, params.items_per_session, seed)?;
    rationale.push(format!(
        "content-sample: {} items, seed {seed}",
        items.len()
    ));

    Ok(SessionPlan {
        session_index: profile.session_counter + 1,
        feature_id,
        game_type,
        items,
        seed,
        rationale,
    })
}

/// Folds a result for `plan` into the profile. See [`apply_game_result`].
pub fn apply_result(
    profile: &StudentProfile,
    model: &LanguageModel,
    plan: &SessionPlan,
    result: &GameResult,
    params: &MasteryParams,
) -> Result<(StudentProfile, TransitionReport)> {
    let mismatch = |what: &str, planned: String, got: String| {
        Err(Error::PlanResultMismatch(format!(
            "{what}: planned {planned}, result has {got}"
        )))
    };
    if result.feature_id != plan.feature_id {
        return mismatch("feature", plan.feature_id.clone(), result.feature_id.clone());
    }
    if result.session_index != plan.session_index {
        return mismatch(
            "session index",
            plan.session_index.to_string(),
            result.session_index.to_string(),
        );
    }
    if result.game_type != plan.game_type {
        return mismatch(
            "game type",
            format!("{:?}", plan.game_type),
            format!("{:?}", result.game_type),
        );
    }
    if result.seed != plan.seed {
        return mismatch("seed", plan.seed.to_string(), result.seed.to_string());
    }
    apply_game_result(profile, model, result, params)
}

/// The update half of the loop, in order: record the session, update
/// mastery and streak, demote on a full streak, re-lock never-played
/// features left without support, then open newly reachable features.
/// Session-log replay goes through here.
pub fn apply_game_result(
    profile: &StudentProfile,
    model: &LanguageModel,
    result: &GameResult,
    params: &MasteryParams,
) -> Result<(StudentProfile, TransitionReport)> {
    let feature = model.feature(&result.feature_id)?;
    let mut next = profile.clone();
    let reopened = profile.state(&feature.id)?.status == FeatureStatus::Mastered;
    next.record_session(result)?;
    if reopened {
        next.last_reopen_session = Some(result.session_index);
    }
    let score = result.checked_score()?;

    let state = next.state_mut(&feature.id)?;
    let before = state.mastery;
    let after = update_mastery(before, score, params);
    state.non_improving_streak = update_streak(before, after, state.non_improving_streak);
    state.set_mastery(after);

    let mut demoted = Vec::new();
    if state.non_improving_streak >= params.non_improving_limit {
        let (demoted_profile, ids) = crate::mastery::apply_demotion(&next, model, &feature.id, params)?;
        next = demoted_profile;
        demoted = ids;
    }
    let mut relocked = relocked_between(profile, &next);
    relocked.extend(next.relock_unsupported(model, params));
    relocked.sort();
    let opened = next.recompute_status(model, params);

    let end = next.state(&feature.id)?;
    let report = TransitionReport {
        student_id: next.student_id.clone(),
        session_index: result.session_index,
        feature_id: feature.id.clone(),
        game_type: result.game_type,
        score: score.as_f64(),
        mastery_before: before,
        mastery_after: end.mastery,
        mastery_delta: i64::from(end.mastery.units()) - i64::from(before.units()),
        status: end.status,
        streak: end.non_improving_streak,
        demoted,
        relocked,
        opened,
    };
    Ok((next, report))
}

fn relocked_between(before: &StudentProfile, after: &StudentProfile) -> Vec<String> {
    after
        .states
        .iter()
        .filter(|(id, s)| {
            s.status == FeatureStatus::Locked
                && before.states[id.as_str()].status != FeatureStatus::Locked
        })
        .map(|(id, _)| id.clone())
        .collect()
}
