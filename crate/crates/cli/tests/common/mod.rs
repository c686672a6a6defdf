#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use featseq::{GameResult, GameType, SessionPlan};
use featseq_cli::{Engine, EngineConfig};
use tempfile::TempDir;

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// A temp directory holding a config for the a→b→c model.
pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn abc() -> Self {
        Self::with("abc.model.json", "abc.lexicon.json")
    }

    pub fn with(model: &str, lexicon: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = serde_json::json!({
            "data_dir": "data",
            "model": data(model),
            "lexicon": data(lexicon),
        });
        std::fs::write(dir.path().join("featseq.json"), cfg.to_string()).unwrap();
        Workspace { dir }
    }

    pub fn config_path(&self) -> PathBuf {
        self.dir.path().join("featseq.json")
    }

    pub fn engine(&self) -> Engine {
        Engine::from_config(&EngineConfig::load(&self.config_path()).unwrap()).unwrap()
    }

    pub fn featseq(&self, args: &[&str]) -> Output {
        std::process::Command::new(env!("CARGO_BIN_EXE_featseq"))
            .env("FEATSEQ_CONFIG", self.config_path())
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }

    pub fn write(&self, name: &str, body: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// A perfect result for `plan`, one correct outcome per item.
pub fn perfect(plan: &SessionPlan) -> GameResult {
    GameResult::new(
        plan.session_index,
        plan.feature_id.clone(),
        plan.game_type,
        vec![true; plan.items.len()],
        plan.seed,
    )
    .unwrap()
}

pub fn result_for(
    session_index: u32,
    feature: &str,
    game_type: GameType,
    outcomes: Vec<bool>,
    seed: u64,
) -> GameResult {
    GameResult::new(session_index, feature, game_type, outcomes, seed).unwrap()
}
