//! Argument parsing and subcommand dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use clap::{Parser, Subcommand};

use crate::api::{self, ApiError, ErrorKind};
use crate::server::{self, AppState};
use fabula_core::directive::AssemblySettings;
use fabula_core::engine::{audit, AuditRow, TypedQuery};
use fabula_core::narrative::{Scorer, ScorerSettings};
use fabula_core::version::{BranchPolicy, VersionSource, VersionStore};
use fabula_core::world::{validate_world, WorldState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_MALFORMED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fabula", version, about = "Versioned story graphs with causal and reader-affect physics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a world file against the schema rules.
    Validate { world: PathBuf },
    /// Record a world file as a version in a project.
    IngestFixture {
        world: PathBuf,
        #[arg(long, default_value = ".fabula")]
        project: PathBuf,
    },
    /// Run a typed query and record its world as a new version.
    Query {
        world: PathBuf,
        query: PathBuf,
        #[arg(long, default_value = "auto")]
        branch_policy: BranchPolicy,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".fabula")]
        project: PathBuf,
    },
    /// Score trajectories at evenly spaced syuzhet anchors.
    Score {
        world: PathBuf,
        /// Scorer name; repeat or comma-separate for several. All when absent.
        #[arg(long)]
        scorer: Vec<String>,
        #[arg(long, default_value_t = 7)]
        anchors: usize,
        #[arg(long, num_args = 1..)]
        focals: Vec<String>,
    },
    /// Summarize every scorer over every world in a directory.
    AuditAffective {
        dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        anchors: usize,
        #[arg(long)]
        json: bool,
    },
    /// Print the project's version rows as JSON lines.
    Export {
        #[arg(long, default_value = ".fabula")]
        project: PathBuf,
    },
    /// Serve the JSON API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = ".fabula")]
        project: PathBuf,
    },
}

fn exit_code(e: &ApiError) -> i32 {
    match e.kind {
        ErrorKind::Malformed => EXIT_MALFORMED,
        _ => EXIT_INVALID,
    }
}

fn read_file(path: &Path) -> Result<String, ApiError> {
    std::fs::read_to_string(path).map_err(|e| ApiError::malformed(format!("{}: {e}", path.display())))
}

fn load_world(path: &Path) -> Result<WorldState, ApiError> {
    WorldState::from_json(&read_file(path)?).map_err(|e| ApiError::malformed(format!("{}: {e}", path.display())))
}

fn settings() -> Result<AssemblySettings, ApiError> {
    let scorer = ScorerSettings::from_env().map_err(|e| ApiError::malformed(e.to_string()))?;
    Ok(AssemblySettings {
        scorer,
        ..Default::default()
    })
}

fn open_store(dir: &Path) -> Result<VersionStore, ApiError> {
    Ok(VersionStore::open(dir)?)
}

fn require_valid(world: &WorldState, out: &mut dyn Write) -> Result<(), i32> {
    let report = validate_world(world);
    if report.is_valid() {
        return Ok(());
    }
    let _ = out.write_all(api::render(&report).as_bytes());
    Err(EXIT_INVALID)
}

fn audit_table(rows: &[AuditRow]) -> String {
    let mut s = format!(
        "{:<10} {:>7} {:>8} {:>8} {:>8} {:>8}\n",
        "scorer", "samples", "min", "median", "mean", "max"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<10} {:>7} {:>8.4} {:>8.4} {:>8.4} {:>8.4}\n",
            r.scorer.as_str(),
            r.samples,
            r.min,
            r.median,
            r.mean,
            r.max
        ));
    }
    s
}

fn run(command: Command, out: &mut dyn Write) -> Result<i32, ApiError> {
    match command {
        Command::Validate { world } => {
            let w = load_world(&world)?;
            let report = validate_world(&w);
            let _ = out.write_all(api::render(&report).as_bytes());
            Ok(if report.is_valid() { EXIT_OK } else { EXIT_INVALID })
        }
        Command::IngestFixture { world, project } => {
            let w = load_world(&world)?;
            if let Err(code) = require_valid(&w, out) {
                return Ok(code);
            }
            let mut store = open_store(&project)?;
            let row = api::ingest(&mut store, &w, VersionSource::Ingestion)?;
            let _ = out.write_all(api::render(&row).as_bytes());
            Ok(EXIT_OK)
        }
        Command::Query {
            world,
            query,
            branch_policy,
            seed,
            project,
        } => {
            let w = load_world(&world)?;
            let mut q: TypedQuery = api::parse(&read_file(&query)?, "query")?;
            if let Some(seed) = seed {
                q.seed = Some(seed);
            }
            if let Err(code) = require_valid(&w, out) {
                return Ok(code);
            }
            let settings = settings()?;
            let mut store = open_store(&project)?;
            let row = api::ingest(&mut store, &w, VersionSource::Ingestion)?;
            let req = api::QueryRequest {
                version_id: Some(row.id),
                query: q,
                branch_policy,
            };
            let resp = api::query(&mut store, &req, &settings)?;
            let _ = out.write_all(api::render(&resp).as_bytes());
            Ok(EXIT_OK)
        }
        Command::Score {
            world,
            scorer,
            anchors,
            focals,
        } => {
            let w = load_world(&world)?;
            let scorers = scorer
                .iter()
                .flat_map(|s| api::split_ids(s))
                .map(|s| s.parse::<Scorer>().map_err(|e| ApiError::malformed(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let focals: Vec<String> = focals.iter().flat_map(|f| api::split_ids(f)).collect();
            let t = api::scores(&w, &scorers, Some(anchors), &focals, &settings()?)?;
            let _ = out.write_all(api::render(&t).as_bytes());
            Ok(EXIT_OK)
        }
        Command::AuditAffective { dir, anchors, json } => {
            if anchors == 0 {
                return Err(ApiError::malformed("anchors must be positive"));
            }
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| ApiError::malformed(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            let worlds = paths.iter().map(|p| load_world(p)).collect::<Result<Vec<_>, _>>()?;
            let s = settings()?;
            let rows = audit(&worlds, anchors, &s.scorer, s.options);
            let text = if json { api::render(&rows) } else { audit_table(&rows) };
            let _ = out.write_all(text.as_bytes());
            Ok(EXIT_OK)
        }
        Command::Export { project } => {
            let store = open_store(&project)?;
            let _ = out.write_all(store.export_jsonl().as_bytes());
            Ok(EXIT_OK)
        }
        Command::Serve { port, host, project } => {
            let store = open_store(&project)?;
            let project_id = project
                .canonicalize()
                .ok()
                .and_then(|p| p.file_name().map(|n| n.to_string_lossy().trim_start_matches('.').to_string()))
                .filter(|n| !n.is_empty())
                .unwrap_or_else(|| "default".to_string());
            let state = Arc::new(AppState {
                project_id: project_id.clone(),
                store: RwLock::new(store),
                settings: settings()?,
            });
            let _ = writeln!(out, "serving project `{project_id}` on http://{host}:{port}");
            let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError {
                kind: ErrorKind::Internal,
                message: e.to_string(),
            })?;
            rt.block_on(server::serve(state, &host, port)).map_err(|e| ApiError {
                kind: ErrorKind::Internal,
                message: e.to_string(),
            })?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_MALFORMED } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
