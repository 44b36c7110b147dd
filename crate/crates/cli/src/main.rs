use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use repnet_core::analysis::report;
use repnet_core::game::compute_payment;
use repnet_core::log::EventLog;
use repnet_core::rng;
use repnet_core::sim::{log_name, run_batch, validate_file, BatchSpec, ValidationError};
use repnet_server::{router, Registry, SessionConfig};

#[derive(Parser)]
#[command(name = "repnet", version, about = "Dynamic-network prisoner's dilemma: simulate, validate, analyze, serve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of headless sessions and write one log per session.
    Simulate {
        /// Batch spec (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Root seed; overrides `root_seed` in the batch spec.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `output_path` in the batch spec.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a log through the engine and check its invariants.
    Validate {
        #[arg(long)]
        log: PathBuf,
    },
    /// Compute treatment tables from a directory of logs.
    Analyze {
        /// Directory holding `.ndjson` logs (searched one level deep).
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Host a live session over WebSocket until it ends.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        session_config: PathBuf,
    },
    /// Draw payments for a finished session. With the session's own seed
    /// this reproduces the payment records in the log.
    Pay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        seed: u64,
    },
}

enum Failure {
    /// The input was read but did not pass (exit 1).
    Invalid(String),
    /// The input could not be used at all (exit 2).
    BadInput(String),
}

type Outcome = Result<(), Failure>;

fn bad(e: impl std::fmt::Display) -> Failure {
    Failure::BadInput(e.to_string())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, seed, out } => simulate(&config, seed, out),
        Command::Validate { log } => validate(&log),
        Command::Analyze { logs, out } => analyze(&logs, &out),
        Command::Serve { port, host, session_config } => serve(&host, port, &session_config),
        Command::Pay { log, seed } => pay(&log, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::BadInput(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn simulate(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Outcome {
    let mut spec = BatchSpec::load(config).map_err(bad)?;
    if let Some(seed) = seed {
        spec.root_seed = seed;
    }
    let out = out
        .or_else(|| spec.output_path.clone())
        .ok_or_else(|| bad("no output directory: pass --out or set output_path"))?;
    let logs = run_batch(&spec, Some(&out)).map_err(bad)?;
    let mut logs = logs.iter();
    for t in &spec.treatments {
        for rep in 0..spec.replications {
            let log = logs.next().expect("one log per job");
            let coop: Vec<f64> = log
                .records
                .iter()
                .filter_map(|r| match r {
                    repnet_core::log::Record::RoundSummary { cooperation_rate, .. } => Some(*cooperation_rate),
                    _ => None,
                })
                .collect();
            let mean = coop.iter().sum::<f64>() / coop.len().max(1) as f64;
            println!("{}\trounds={}\tmean_cooperation={mean:.3}", log_name(&t.name, rep), log.rounds_played());
        }
    }
    println!("wrote {} logs to {}", spec.treatments.len() * spec.replications, out.display());
    Ok(())
}

fn validate(path: &Path) -> Outcome {
    match validate_file(path) {
        Ok(report) => {
            println!("{}", report.summary());
            if report.passed() {
                println!("{}: valid ({} rounds)", path.display(), report.rounds);
                Ok(())
            } else {
                Err(Failure::Invalid(format!("{}: invalid", path.display())))
            }
        }
        Err(e @ ValidationError::SchemaVersion { .. }) => Err(bad(e)),
        Err(e) => Err(bad(format!("{}: {e}", path.display()))),
    }
}

fn analyze(dir: &Path, out: &Path) -> Outcome {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| bad(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ndjson"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(bad(format!("no .ndjson logs in {}", dir.display())));
    }
    let logs = paths
        .iter()
        .map(|p| EventLog::read_from(p).map_err(|e| bad(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let r = report(&logs);
    r.write_to(out).map_err(|e| bad(format!("{}: {e}", out.display())))?;
    for ((t, measure), ms) in &r.means {
        if measure == "cooperation_rate" || measure == "welfare" {
            let v = ms.mean.map_or("undefined".into(), |m| format!("{m:.3}"));
            println!("{t}\t{measure}\t{v}\t(n={})", ms.n);
        }
    }
    println!("analyzed {} logs; tables in {}", logs.len(), out.display());
    Ok(())
}

fn pay(path: &Path, seed: u64) -> Outcome {
    let log = EventLog::read_from(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let payments = compute_payment(&log, &mut rng::stream(seed, "payment")).map_err(bad)?;
    let mut out = String::from("player,strategy,rounds,points,ecu,sgd\n");
    for p in payments {
        let rounds: Vec<String> = p.rounds.iter().map(u32::to_string).collect();
        let who = log.header.roster.get(p.player.0).map_or("", String::as_str);
        out += &format!("{},{who},{},{},{},{:.2}\n", p.player.0, rounds.join(" "), p.points, p.ecu, p.sgd);
    }
    // A closed pipe (`| head`) is not an error worth a panic.
    let _ = std::io::stdout().write_all(out.as_bytes());
    Ok(())
}

fn serve(host: &str, port: u16, session_config: &Path) -> Outcome {
    let cfg = SessionConfig::load(session_config).map_err(bad)?;
    let runtime = tokio::runtime::Runtime::new().map_err(bad)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port)).await.map_err(|e| bad(format!("{host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(bad)?;
        let registry = Registry::new();
        let created = registry.create_session(cfg).map_err(bad)?;
        for (label, token) in &created.tokens {
            println!("seat {label}: token {token}  ws://{addr}/ws/{}", created.session_id);
        }
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let finished = created.finished;
        let watcher = tokio::spawn(async move {
            let done = finished.await;
            let _ = stop_tx.send(());
            done
        });
        // Graceful shutdown lets the closing frames reach clients; a client
        // that never acknowledges the close cannot hold the process open.
        let server = axum::serve(listener, router(registry.clone())).with_graceful_shutdown(async {
            let _ = stop_rx.await;
        });
        let server = tokio::spawn(async move { server.await });
        let path = watcher.await.map_err(bad)?.map_err(bad)?.map_err(bad)?;
        let _ = tokio::time::timeout(std::time::Duration::from_secs(5), server).await;
        println!("session {} ended; log written to {}", created.session_id, path.display());
        Ok(())
    })
}
