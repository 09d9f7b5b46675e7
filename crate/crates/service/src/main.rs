use std::path::PathBuf;

use clap::{Parser, Subcommand};

use taskpos_core::events::{digest_records, read_log};
use taskpos_core::world::load_scenario;
use taskpos_service::api::{self, AppState, ServeConfig};
use taskpos_service::{run_suite, BackendSpec, RunConfig, SuiteReport};

#[derive(Parser)]
#[command(name = "taskpos", about = "Task positioning agent: service, suite runner and log replay")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve the HTTP API against a live simulated robot.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "oracle")]
        backend: BackendSpec,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulated seconds per wall second (0 = unpaced).
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Directory for event logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        /// Suite report to serve at /api/report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every session of a suite headless and write a report.
    Run {
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "oracle")]
        backend: BackendSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        /// Save the reasoning transcript for later replay.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Rebuild the suite report from an event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().cmd {
        Cmd::Serve { scenario, backend, port, seed, speed, log_dir, report } => {
            let state = AppState::new(ServeConfig {
                backend,
                run: RunConfig { seed, ..RunConfig::default() },
                speed,
                log_dir,
            });
            if let Some(p) = report {
                let r: SuiteReport = serde_json::from_slice(&std::fs::read(p)?)?;
                state.set_report(r);
            }
            let name = state.load(&scenario)?;
            eprintln!("scenario {name} loaded; serving on 127.0.0.1:{port}");
            let rt = tokio::runtime::Runtime::new()?;
            let result = rt.block_on(api::serve(state.clone(), port));
            state.shutdown();
            result?;
        }
        Cmd::Replay { log, out } => {
            let records = read_log(&log)?;
            let suite = records
                .iter()
                .find_map(|r| match &r.event {
                    taskpos_core::events::Event::SessionStarted { suite, .. } => suite.clone(),
                    _ => None,
                })
                .unwrap_or_else(|| "custom".into());
            let report = SuiteReport::from_records(&suite, &records);
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => std::fs::write(p, json)?,
                None => println!("{json}"),
            }
            eprintln!("{}", report.summary_line());
            eprintln!("event log digest {}", digest_records(&records));
        }
        Cmd::Run { suite, scenario, backend, seed, out, log, transcript } => {
            let path = match (scenario, suite) {
                (Some(p), _) => p,
                (None, Some(s)) => PathBuf::from(format!("scenarios/suite_{}.json", s.to_lowercase())),
                (None, None) => anyhow::bail!("give --suite or --scenario"),
            };
            let scenario = load_scenario(&path)?;
            let run = run_suite(&scenario, &backend, RunConfig { seed, ..RunConfig::default() }, log.as_deref())?;
            if let Some(t) = transcript {
                run.gateway.save_transcript(t)?;
            }
            let json = serde_json::to_string_pretty(&run.report)?;
            match out {
                Some(p) => std::fs::write(p, json)?,
                None => println!("{json}"),
            }
            eprintln!("{}", run.report.summary_line());
            eprintln!("event log digest {}", run.events.digest());
        }
    }
    Ok(())
}
