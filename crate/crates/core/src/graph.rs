//! The curriculum: language features linked by prerequisite edges.
//!
//! Models are parsed from the JSON model file, may be inspected while still
//! cyclic (so [`LanguageModel::validate`] can report the cycle), and are
//! immutable afterwards. Every ordering produced here breaks ties by
//! ascending feature id.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Mastery;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Grapheme,
    Phoneme,
    Morphology,
    Syntax,
    Vocabulary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feature {
    pub id: String,
    pub label: String,
    pub kind: FeatureKind,
    /// School year in which the feature is introduced.
    pub year: u32,
    #[serde(default)]
    pub prerequisites: BTreeSet<String>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    language: String,
    threshold: f64,
    features: Vec<Feature>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanguageModel {
    pub language: String,
    /// Unlock threshold in mastery points (0..=10).
    pub threshold: f64,
    pub features: BTreeMap<String, Feature>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// A structural problem found in a model or lexicon. Violations are data:
/// validation never fails, it reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    CycleDetected {
        members: Vec<String>,
    },
    YearInversion {
        feature: String,
        feature_year: u32,
        prerequisite: String,
        prerequisite_year: u32,
    },
    UnknownLexiconFeature {
        item: usize,
        text: String,
        feature: String,
    },
    InvalidLexiconItem {
        item: usize,
        reason: String,
    },
}

impl Violation {
    pub fn severity(&self) -> Severity {
        match self {
            Violation::YearInversion { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }

    fn sort_key(&self) -> (String, u8, usize) {
        match self {
            Violation::CycleDetected { members } => {
                (members.first().cloned().unwrap_or_default(), 0, 0)
            }
            Violation::YearInversion { feature, .. } => (feature.clone(), 1, 0),
            Violation::UnknownLexiconFeature { feature, item, .. } => (feature.clone(), 2, *item),
            Violation::InvalidLexiconItem { item, .. } => (String::new(), 3, *item),
        }
    }
}

/// Sorts violations into the canonical reporting order.
pub fn sort_violations(violations: &mut [Violation]) {
    violations.sort_by_key(Violation::sort_key);
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity() {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match self {
            Violation::CycleDetected { members } => {
                write!(f, "{severity}: cycle detected among {}", members.join(", "))
            }
            Violation::YearInversion {
                feature,
                feature_year,
                prerequisite,
                prerequisite_year,
            } => write!(
                f,
                "{severity}: year inversion: `{feature}` (year {feature_year}) requires \
                 `{prerequisite}` (year {prerequisite_year})"
            ),
            Violation::UnknownLexiconFeature { item, text, feature } => write!(
                f,
                "{severity}: lexicon item {item} (`{text}`) references unknown feature `{feature}`"
            ),
            Violation::InvalidLexiconItem { item, reason } => {
                write!(f, "{severity}: lexicon item {item}: {reason}")
            }
        }
    }
}

impl LanguageModel {
    /// Builds a model, checking the per-feature and referential invariants.
    /// Cycles are accepted here and surface through [`validate`](Self::validate).
    pub fn new(language: impl Into<String>, threshold: f64, features: Vec<Feature>) -> Result<Self> {
        if !threshold.is_finite() || !(0.0..=10.0).contains(&threshold) {
            return Err(Error::InvalidThreshold(threshold));
        }
        let mut map = BTreeMap::new();
        for feature in features {
            if feature.id.is_empty() {
                return Err(Error::InvalidFeature {
                    id: feature.id,
                    reason: "empty id".into(),
                });
            }
            if feature.year < 1 {
                return Err(Error::InvalidFeature {
                    id: feature.id,
                    reason: "year must be at least 1".into(),
                });
            }
            if feature.prerequisites.contains(&feature.id) {
                return Err(Error::InvalidFeature {
                    id: feature.id,
                    reason: "lists itself as a prerequisite".into(),
                });
            }
            if map.contains_key(&feature.id) {
                return Err(Error::DuplicateFeatureId(feature.id));
            }
            map.insert(feature.id.clone(), feature);
        }
        for feature in map.values() {
            if let Some(missing) = feature
                .prerequisites
                .iter()
                .find(|p| !map.contains_key(p.as_str()))
            {
                return Err(Error::UnknownPrerequisite {
                    feature: feature.id.clone(),
                    prerequisite: missing.clone(),
                });
            }
        }
        Ok(LanguageModel {
            language: language.into(),
            threshold,
            features: map,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        LanguageModel::new(doc.language, doc.threshold, doc.features)
    }

    /// Serializes to the model file format, features sorted by id.
    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            language: self.language.clone(),
            threshold: self.threshold,
            features: self.features.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization is infallible")
    }

    pub fn threshold_mastery(&self) -> Mastery {
        Mastery::from_points(self.threshold).expect("threshold validated at construction")
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, id: &str) -> Result<&Feature> {
        self.features
            .get(id)
            .ok_or_else(|| Error::UnknownFeature(id.to_owned()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.features.contains_key(id)
    }

    pub fn edge_count(&self) -> usize {
        self.features.values().map(|f| f.prerequisites.len()).sum()
    }

    /// Features that list `id` as a direct prerequisite, ascending.
    pub fn dependents<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Feature> + 'a {
        self.features
            .values()
            .filter(move |f| f.prerequisites.contains(id))
    }

    /// Reports cycles (errors) and year inversions (warnings), sorted by
    /// feature id. Empty means the model is sound.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> = self
            .cycles()
            .into_iter()
            .map(|members| Violation::CycleDetected { members })
            .collect();

        for feature in self.features.values() {
            for prereq_id in &feature.prerequisites {
                let prereq = &self.features[prereq_id];
                if prereq.year > feature.year {
                    out.push(Violation::YearInversion {
                        feature: feature.id.clone(),
                        feature_year: feature.year,
                        prerequisite: prereq.id.clone(),
                        prerequisite_year: prereq.year,
                    });
                }
            }
        }
        sort_violations(&mut out);
        out
    }

    /// Non-trivial strongly connected components, each sorted, ordered by
    /// their smallest member.
    fn cycles(&self) -> Vec<Vec<String>> {
        let mut graph = DiGraph::<&str, ()>::with_capacity(self.len(), self.edge_count());
        let index: BTreeMap<&str, _> = self
            .features
            .keys()
            .map(|id| (id.as_str(), graph.add_node(id.as_str())))
            .collect();
        for feature in self.features.values() {
            for prereq in &feature.prerequisites {
                graph.add_edge(index[prereq.as_str()], index[feature.id.as_str()], ());
            }
        }
        let mut cycles: Vec<Vec<String>> = petgraph::algo::tarjan_scc(&graph)
            .into_iter()
            .filter(|scc| scc.len() > 1)
            .map(|scc| {
                let mut members: Vec<String> =
                    scc.into_iter().map(|n| graph[n].to_owned()).collect();
                members.sort();
                members
            })
            .collect();
        cycles.sort();
        cycles
    }

    /// Kahn's algorithm with the smallest ready id emitted first.
    pub fn topological_order(&self) -> Result<Vec<String>> {
        let mut pending: BTreeMap<&str, usize> = self
            .features
            .values()
            .map(|f| (f.id.as_str(), f.prerequisites.len()))
            .collect();
        let mut ready: BTreeSet<&str> = pending
            .iter()
            .filter(|(_, &n)| n == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut order = Vec::with_capacity(self.len());

        while let Some(id) = ready.pop_first() {
            order.push(id.to_owned());
            for dependent in self.dependents(id) {
                let remaining = pending
                    .get_mut(dependent.id.as_str())
                    .expect("dependent is a known feature");
                *remaining -= 1;
                if *remaining == 0 {
                    ready.insert(dependent.id.as_str());
                }
            }
        }

        if order.len() < self.len() {
            let stuck = pending
                .into_iter()
                .filter(|(_, n)| *n > 0)
                .map(|(id, _)| id.to_owned())
                .collect();
            return Err(Error::CyclicModel(stuck));
        }
        Ok(order)
    }

    /// Length of the longest prerequisite chain ending at `id`; roots are 0.
    pub fn depth(&self, id: &str) -> Result<usize> {
        self.feature(id)?;
        let depths = self.depths()?;
        Ok(depths[id])
    }

    /// Depth of every feature.
    pub fn depths(&self) -> Result<BTreeMap<String, usize>> {
        let mut depths: BTreeMap<String, usize> = BTreeMap::new();
        for id in self.topological_order()? {
            let d = self.features[&id]
                .prerequisites
                .iter()
                .map(|p| depths[p] + 1)
                .max()
                .unwrap_or(0);
            depths.insert(id, d);
        }
        Ok(depths)
    }
}
