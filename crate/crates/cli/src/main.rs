use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use citelens_core::corpus::PaperId;
use citelens_core::engine::SCHEMA_VERSION;
use citelens_core::simulate::{run_script, SessionScript, SimulationSummary};
use citelens_core::strategies::StrategyReport;
use citelens_core::usage::UsageStats;
use citelens_core::{Engine, IngestOutcome};
use citelens_server::{section_filter, ServerConfig, DEFAULT_PORT};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "citelens", version, about = "Citation augmentation engine")]
struct Cli {
    /// Directory holding the corpus, documents and event log.
    #[arg(long, global = true, env = "CITELENS_DATA_DIR", default_value = "./data")]
    data_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse bundle files, resolve their references and add them to the data directory.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Replay a JSONL session script and print usage statistics.
    Simulate {
        script: PathBuf,
        /// Record the session into the data directory instead of a scratch copy.
        #[arg(long)]
        persist: bool,
    },
    /// Run the four selection strategies on a document and pool their top k.
    Eval {
        #[arg(long)]
        doc: String,
        #[arg(long, value_delimiter = ',')]
        peers: Vec<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// `intro_related` or `all`.
        #[arg(long)]
        sections: Option<String>,
    },
    /// Print usage statistics from the data directory's event log.
    Stats,
    /// Start the HTTP server.
    Serve {
        #[arg(long, env = "CITELENS_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest { paths } => ingest(&cli.data_dir, &paths, cli.format),
        Command::Simulate { script, persist } => simulate(&cli.data_dir, &script, persist, cli.seed, cli.format),
        Command::Eval { doc, peers, k, sections } => {
            eval(&cli.data_dir, &doc, &peers, k, sections.as_deref(), cli.seed, cli.format)
        }
        Command::Stats => {
            let engine = open(&cli.data_dir)?;
            print_stats(&engine.usage(), cli.format);
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { port } => {
            let config = ServerConfig { port, data_dir: cli.data_dir };
            tokio::runtime::Runtime::new()?.block_on(citelens_server::serve(config))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn open(dir: &Path) -> Result<Engine> {
    let engine = Engine::open(dir).with_context(|| format!("opening {}", dir.display()))?;
    if let Some(c) = engine.recovery() {
        eprintln!(
            "warning: event log damaged at line {}; recovered up to seq {} ({} bytes set aside)",
            c.line, c.last_valid_seq, c.dropped_bytes
        );
    }
    Ok(engine)
}

fn ingest(dir: &Path, paths: &[PathBuf], format: Format) -> Result<ExitCode> {
    let mut engine = open(dir)?;
    let mut missing = false;
    let mut failed = false;
    let mut reports = Vec::new();
    for path in paths {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                missing = true;
                continue;
            }
        };
        match engine.ingest_bytes(&bytes) {
            Ok(outcome) => {
                if format == Format::Text {
                    print_ingest(path, &outcome);
                }
                reports.push(json!({ "path": path, "outcome": outcome }));
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failed = true;
            }
        }
    }
    if format == Format::Json {
        println!("{}", json!({ "schema_version": SCHEMA_VERSION, "documents": reports }));
    }
    Ok(if missing {
        ExitCode::from(2)
    } else if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn print_ingest(path: &Path, o: &IngestOutcome) {
    let r = &o.parse_report;
    let s = &o.resolution;
    println!("{}: {}", path.display(), o.paper_id);
    println!(
        "  markers {} (linked {}, unlinked {}, skipped {}), entries {}",
        r.markers, r.linked, r.unlinked, r.skipped, r.entries
    );
    println!(
        "  resolved: exact {}, fuzzy {}, external {}, registered {}, unresolved {}",
        s.exact_norm, s.fuzzy, s.external, s.registered, s.unresolved
    );
    for w in r.warnings.iter().chain(&o.warnings) {
        println!("  warning: {w}");
    }
}

fn simulate(dir: &Path, script: &Path, persist: bool, seed: u64, format: Format) -> Result<ExitCode> {
    let script = match SessionScript::load(script) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", script.display());
            return Ok(ExitCode::from(2));
        }
    };
    let mut engine = if persist {
        open(dir)?
    } else if dir.exists() {
        open(dir)?.detached()
    } else {
        Engine::in_memory()
    };
    match run_script(&mut engine, &script, seed) {
        Ok(summary) => {
            print_simulation(&summary, format);
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("script aborted: {e}");
            Ok(ExitCode::from(2))
        }
    }
}

fn print_simulation(s: &SimulationSummary, format: Format) {
    match format {
        Format::Json => println!("{}", json!({ "schema_version": SCHEMA_VERSION, "simulation": s })),
        Format::Text => {
            println!("operations {}  events {}  seed {}  window {}", s.operations, s.events, s.seed, s.window);
            println!("history {}  library {}", s.history.len(), s.library.len());
            print!("{}", s.stats);
        }
    }
}

fn print_stats(stats: &UsageStats, format: Format) {
    match format {
        Format::Json => println!("{}", json!({ "schema_version": SCHEMA_VERSION, "usage": stats })),
        Format::Text => print!("{stats}"),
    }
}

fn eval(
    dir: &Path,
    doc: &str,
    peers: &[String],
    k: usize,
    sections: Option<&str>,
    seed: u64,
    format: Format,
) -> Result<ExitCode> {
    let engine = open(dir)?;
    let filter = match section_filter(sections) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return Ok(ExitCode::from(2));
        }
    };
    let ids: Vec<PaperId> = peers.iter().map(PaperId::new).collect();
    for id in std::iter::once(&PaperId::new(doc)).chain(&ids) {
        if engine.document(id).is_err() {
            eprintln!("unknown document {id}");
            return Ok(ExitCode::from(2));
        }
    }
    let report = match engine.evaluate_strategies(&PaperId::new(doc), &ids, k, seed, filter) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return Ok(ExitCode::from(2));
        }
    };
    match format {
        Format::Json => println!("{}", json!({ "schema_version": SCHEMA_VERSION, "report": report })),
        Format::Text => print_report(&engine, &report),
    }
    Ok(ExitCode::SUCCESS)
}

fn print_report(engine: &Engine, r: &StrategyReport) {
    let title = |p: &PaperId| engine.corpus().get(p).map(|m| m.title.clone()).unwrap_or_default();
    println!("k {}  seed {}", r.k, r.seed);
    for (name, ranked) in &r.per_strategy {
        println!("{}:", serde_json::to_value(name).unwrap().as_str().unwrap_or_default());
        for x in ranked {
            println!("  {:>8.3}  {}  {}", x.score, x.paper_id, title(&x.paper_id));
        }
    }
    println!("pooled {}", r.pooled.len());
    for (n, count) in &r.overlap_histogram {
        println!("  selected by {n}: {count}");
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
}
