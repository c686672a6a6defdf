use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use featseq::graph::{sort_violations, Severity};
use featseq::sim::{run_cohort, CohortSpec};
use featseq::{Error, GameResult, LanguageModel, Lexicon, StudentProfile};
use featseq_cli::config::CONFIG_ENV;
use featseq_cli::{exit_code, Engine, EngineConfig};

/// Adaptive feature sequencing engine.
#[derive(Parser)]
#[command(name = "featseq", version)]
struct Cli {
    /// Engine config file.
    #[arg(long, global = true, env = CONFIG_ENV, default_value = "featseq.json")]
    config: PathBuf,
    /// Overrides the config's data directory.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Seed for `plan`, master seed for `simulate`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model and lexicon pair; prints one line per violation.
    Validate { model: PathBuf, lexicon: PathBuf },
    /// Create a student profile.
    Init { student_id: String, year: u32 },
    /// Print the next session plan.
    Plan { student_id: String },
    /// Apply a game result and print the transition report.
    Submit { student_id: String, result: PathBuf },
    /// Run a simulated cohort and write the report files.
    Simulate {
        cohort: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Show a student's profile.
    Inspect { student_id: String },
    /// Replay the session log and compare it with the stored profile.
    Verify { student_id: String },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<std::net::SocketAddr>,
    },
}

/// Unreadable files, bad config and usage errors.
const EXIT_INPUT: u8 = 2;
const EXIT_VIOLATIONS: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .chain()
                .find_map(|e| e.downcast_ref::<Error>())
                .map_or(EXIT_INPUT, exit_code);
            ExitCode::from(code)
        }
    }
}

/// Loads the config and engine. Failures here exit 2 whatever the cause.
fn engine(cli: &Cli) -> Result<Engine, u8> {
    let load = || -> anyhow::Result<Engine> {
        let mut cfg = EngineConfig::load(&cli.config)?;
        if let Some(dir) = &cli.data_dir {
            cfg.data_dir = dir.clone();
        }
        Engine::from_config(&cfg)
    };
    load().map_err(|err| {
        eprintln!("error: {err:#}");
        EXIT_INPUT
    })
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Validate { model, lexicon } => return validate(model, lexicon),
        Command::Serve { listen } => {
            let addr = match listen {
                Some(a) => *a,
                None => match EngineConfig::load(&cli.config) {
                    Ok(cfg) => cfg.listen,
                    Err(err) => {
                        eprintln!("error: {err:#}");
                        return Ok(EXIT_INPUT);
                    }
                },
            };
            let engine = match engine(&cli) {
                Ok(e) => e,
                Err(code) => return Ok(code),
            };
            tokio::runtime::Runtime::new()?
                .block_on(featseq_cli::server::serve(engine, addr))?;
            return Ok(0);
        }
        _ => {}
    }

    let engine = match engine(&cli) {
        Ok(e) => e,
        Err(code) => return Ok(code),
    };
    match &cli.command {
        Command::Init { student_id, year } => {
            let profile = engine.init_student(student_id, *year)?;
            if cli.json {
                print_json(&profile);
            } else {
                print!("{}", render_profile(&profile));
            }
        }
        Command::Plan { student_id } => print_json(&engine.plan(student_id, cli.seed)?),
        Command::Submit { student_id, result } => {
            let text = std::fs::read_to_string(result)
                .with_context(|| format!("reading {}", result.display()))?;
            let result: GameResult = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", result.display()))?;
            print_json(&engine.submit(student_id, &result)?);
        }
        Command::Simulate { cohort, out } => simulate(&cli, &engine, cohort, out)?,
        Command::Inspect { student_id } => {
            let profile = engine.profile(student_id)?;
            if cli.json {
                print_json(&profile);
            } else {
                print!("{}", render_profile(&profile));
            }
        }
        Command::Verify { student_id } => {
            if !engine.verify(student_id)? {
                println!("{student_id}: snapshot differs from log replay");
                return Ok(EXIT_VIOLATIONS);
            }
            println!("{student_id}: ok");
        }
        Command::Validate { .. } | Command::Serve { .. } => unreachable!(),
    }
    Ok(0)
}

fn validate(model_path: &Path, lexicon_path: &Path) -> anyhow::Result<u8> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|e| {
            eprintln!("error: cannot read {}: {e}", p.display());
        })
    };
    let (Ok(model_text), Ok(lexicon_text)) = (read(model_path), read(lexicon_path)) else {
        return Ok(EXIT_INPUT);
    };
    let model = match LanguageModel::parse(&model_text) {
        Ok(m) => m,
        Err(e @ Error::MalformedDocument(_)) => {
            eprintln!("error: {}: {e}", model_path.display());
            return Ok(EXIT_INPUT);
        }
        Err(e) => {
            println!("error: {e}");
            return Ok(EXIT_VIOLATIONS);
        }
    };
    let lexicon = match Lexicon::parse(&lexicon_text, model.language.clone()) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {}: {e}", lexicon_path.display());
            return Ok(EXIT_INPUT);
        }
    };
    let mut violations = model.validate();
    violations.extend(lexicon.check(&model));
    sort_violations(&mut violations);
    for v in &violations {
        println!("{v}");
    }
    let failed = violations.iter().any(|v| v.severity() == Severity::Error);
    Ok(if failed { EXIT_VIOLATIONS } else { 0 })
}

fn simulate(cli: &Cli, engine: &Engine, cohort: &Path, out: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(cohort)
        .with_context(|| format!("reading {}", cohort.display()))?;
    let spec: CohortSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", cohort.display()))?;
    let seed = cli.seed.unwrap_or(spec.master_seed);
    let report = run_cohort(
        &engine.model,
        &engine.lexicon,
        &spec,
        spec.n_sessions,
        &engine.params,
        seed,
    )?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let files = [
        ("cohort_report.json", report.to_json()),
        ("cohort_trajectories.csv", report.trajectories_csv()),
        ("cohort_sessions.jsonl", report.sessions_jsonl()),
    ];
    for (name, body) in files {
        let path = out.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    if cli.json {
        print_json(&report.aggregate);
    } else {
        let a = &report.aggregate;
        println!(
            "{} students, {} sessions, {} completed, {} starved, {} demotions",
            a.students, a.sessions_total, a.completed, a.starvation_count, a.demotions_total
        );
        println!(
            "plays to master: p10 {} p50 {} p90 {}",
            a.plays_to_master.p10, a.plays_to_master.p50, a.plays_to_master.p90
        );
    }
    Ok(())
}

fn render_profile(p: &StudentProfile) -> String {
    let mut out = format!(
        "student {} (year {}, {}), {} sessions\n",
        p.student_id, p.year, p.model_language, p.session_counter
    );
    out.push_str(&format!(
        "{:<16} {:<9} {:>10} {:>6} {:>5} {:>6} {:>6}\n",
        "feature", "status", "mastery", "played", "last", "score", "streak"
    ));
    for (id, s) in &p.states {
        let last = s.last_used_session.map_or("-".into(), |n| n.to_string());
        let score = s.last_score.map_or("-".into(), |x| format!("{x:.2}"));
        let status = format!("{:?}", s.status).to_lowercase();
        out.push_str(&format!(
            "{:<16} {:<9} {:>10} {:>6} {:>5} {:>6} {:>6}\n",
            id,
            status,
            format!("{}/10", s.mastery),
            s.times_played,
            last,
            score,
            s.non_improving_streak
        ));
    }
    out
}
