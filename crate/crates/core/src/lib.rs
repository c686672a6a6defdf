//! Deterministic adaptive content sequencing for language-learning games.
//!
//! A curriculum is a prerequisite graph of language features ([`graph`]).
//! Each student gets an instantiated copy of that graph with per-feature
//! mastery ([`profile`]). Every session the [`selector`] rule pipeline picks
//! one feature, a game type and a handful of lexicon items; the scored
//! outcome is folded back through the clamped moving-average update in
//! [`mastery`]. The [`sim`] module drives synthetic cohorts through the same
//! loop.
//!
//! All arithmetic on mastery values is integer fixed point, and every
//! ordering decision has an explicit tie-break, so identical inputs produce
//! byte-identical plans, reports and logs.

pub mod error;
pub mod fixed;
pub mod graph;
pub mod mastery;
pub mod profile;
pub mod rng;
pub mod selector;
pub mod sim;
pub mod store;

pub use error::{Error, Result};
pub use fixed::{Mastery, Score};
pub use graph::{Feature, FeatureKind, LanguageModel, Severity, Violation};
pub use mastery::MasteryParams;
pub use profile::{FeatureState, FeatureStatus, GameResult, GameType, StudentProfile};
pub use selector::{ContentItem, ContentKind, Lexicon, SessionPlan, TransitionReport};
pub use store::ProfileStore;
