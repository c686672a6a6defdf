//! File-backed profile storage.
//!
//! Layout: `<data_dir>/<language>/<student_id>/profile.json` holds the latest
//! snapshot and `sessions.jsonl` the append-only result log, one
//! [`GameResult`] per LF-terminated line. The log is the source of truth;
//! [`replay`] rebuilds a snapshot from it.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::LanguageModel;
use crate::mastery::MasteryParams;
use crate::profile::{init_profile, GameResult, StudentProfile};
use crate::selector::apply_game_result;

const SNAPSHOT: &str = "profile.json";
const LOG: &str = "sessions.jsonl";
const LOCK: &str = ".lock";

#[derive(Clone, Debug)]
pub struct ProfileStore {
    root: PathBuf,
}

/// Exclusive hold on one student directory; released on drop.
#[derive(Debug)]
pub struct StudentLock {
    path: PathBuf,
}

impl Drop for StudentLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn check_student_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidStudentId(id.to_owned()))
    }
}

impl ProfileStore {
    /// A store for one language under `data_dir`.
    pub fn new(data_dir: impl AsRef<Path>, language: &str) -> Self {
        ProfileStore {
            root: data_dir.as_ref().join(language),
        }
    }

    pub fn student_dir(&self, student_id: &str) -> PathBuf {
        self.root.join(student_id)
    }

    pub fn exists(&self, student_id: &str) -> bool {
        self.student_dir(student_id).join(SNAPSHOT).is_file()
    }

    /// Takes the per-student lock file, failing fast if another holder has it.
    pub fn lock(&self, student_id: &str) -> Result<StudentLock> {
        check_student_id(student_id)?;
        let dir = self.student_dir(student_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(StudentLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::LockContention(student_id.to_owned()))
            }
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Stores a brand-new profile with an empty session log.
    pub fn create(&self, profile: &StudentProfile) -> Result<()> {
        check_student_id(&profile.student_id)?;
        if self.exists(&profile.student_id) {
            return Err(Error::AlreadyExists(profile.student_id.clone()));
        }
        let dir = self.student_dir(&profile.student_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let log = dir.join(LOG);
        File::create(&log).map_err(|e| Error::io(&log, e))?;
        self.save_profile(profile)
    }

    /// Writes the snapshot atomically: temp file, fsync, rename.
    pub fn save_profile(&self, profile: &StudentProfile) -> Result<()> {
        check_student_id(&profile.student_id)?;
        let dir = self.student_dir(&profile.student_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let target = dir.join(SNAPSHOT);
        let tmp = dir.join(format!("{SNAPSHOT}.tmp"));
        let mut body = serde_json::to_string_pretty(profile).expect("profile serializes");
        body.push('\n');
        let mut file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        file.write_all(body.as_bytes())
            .and_then(|_| file.sync_all())
            .map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))
    }

    /// Loads the snapshot and checks it against the session log length.
    pub fn load_profile(&self, student_id: &str) -> Result<StudentProfile> {
        check_student_id(student_id)?;
        let path = self.student_dir(student_id).join(SNAPSHOT);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(student_id.to_owned()))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let profile: StudentProfile =
            serde_json::from_str(&text).map_err(|e| Error::CorruptRecord {
                path: path.clone(),
                line: e.line(),
                reason: e.to_string(),
            })?;
        let log = self.load_log(student_id)?;
        if log.len() != profile.session_counter as usize {
            return Err(Error::CorruptRecord {
                path: self.student_dir(student_id).join(LOG),
                line: log.len().min(profile.session_counter as usize) + 1,
                reason: format!(
                    "log holds {} results but the snapshot counts {} sessions",
                    log.len(),
                    profile.session_counter
                ),
            });
        }
        Ok(profile)
    }

    pub fn load_log(&self, student_id: &str) -> Result<Vec<GameResult>> {
        check_student_id(student_id)?;
        let path = self.student_dir(student_id).join(LOG);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(student_id.to_owned()))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        parse_log(&text, &path)
    }

    /// Appends one result and fsyncs before returning.
    pub fn append_result(&self, student_id: &str, result: &GameResult) -> Result<()> {
        check_student_id(student_id)?;
        let path = self.student_dir(student_id).join(LOG);
        let mut file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::NotFound(student_id.to_owned()),
                _ => Error::io(&path, e),
            })?;
        let line = log_line(result);
        file.write_all(line.as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(|e| Error::io(&path, e))
    }

    /// Log first, then snapshot: a crash in between leaves a log that is
    /// one entry ahead, which [`load_profile`](Self::load_profile) detects.
    pub fn commit(&self, profile: &StudentProfile, result: &GameResult) -> Result<()> {
        self.append_result(&profile.student_id, result)?;
        self.save_profile(profile)
    }
}

/// One log line, LF-terminated.
pub fn log_line(result: &GameResult) -> String {
    let mut line = serde_json::to_string(result).expect("result serializes");
    line.push('\n');
    line
}

pub fn log_to_jsonl(results: &[GameResult]) -> String {
    results.iter().map(log_line).collect()
}

/// Parses a session log. Every line, including the last, must be a complete
/// LF-terminated record.
pub fn parse_log(text: &str, path: &Path) -> Result<Vec<GameResult>> {
    let corrupt = |line: usize, reason: String| Error::CorruptRecord {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut out = Vec::new();
    let mut rest = text;
    let mut lineno = 0;
    while !rest.is_empty() {
        lineno += 1;
        let Some(end) = rest.find('\n') else {
            return Err(corrupt(lineno, "truncated record (no line terminator)".into()));
        };
        let line = &rest[..end];
        rest = &rest[end + 1..];
        let result: GameResult =
            serde_json::from_str(line).map_err(|e| corrupt(lineno, e.to_string()))?;
        if result.session_index as usize != lineno {
            return Err(corrupt(
                lineno,
                format!("session index {} out of sequence", result.session_index),
            ));
        }
        out.push(result);
    }
    Ok(out)
}

/// Rebuilds a profile from scratch by folding the log over a fresh
/// instantiation.
pub fn replay(
    model: &LanguageModel,
    params: &MasteryParams,
    student_id: &str,
    year: u32,
    log: &[GameResult],
) -> Result<StudentProfile> {
    let mut profile = init_profile(model, student_id, year, params)?;
    for result in log {
        profile = apply_game_result(&profile, model, result, params)?.0;
    }
    Ok(profile)
}
