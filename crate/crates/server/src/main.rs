use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use talkwatch::ingest::{FixtureTransport, MediaWikiClient, RevisionSource, DEFAULT_USER_AGENT};
use talkwatch::pipeline::Monitor;
use talkwatch::{Config, Store};
use talkwatch_server::monitor::spawn_monitor;
use talkwatch_server::{router, ApiState};
use tracing::{error, info, warn};

#[derive(Parser)]
#[command(name = "talkwatch-server", version, about = "Monitor talk pages and serve the moderator API")]
struct Args {
    /// TOML configuration; every key has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides server.bind.
    #[arg(long)]
    bind: Option<String>,
    /// Replay recorded revisions from these fixture roots instead of
    /// polling the live wiki. The configured page list is ignored.
    #[arg(long, num_args = 1..)]
    fixtures: Vec<PathBuf>,
    /// Pause between monitor ticks, in milliseconds.
    #[arg(long, default_value_t = 1000)]
    tick_ms: u64,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            error!("{message}");
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(args: Args) -> Result<(), String> {
    let config = match &args.config {
        Some(path) => Config::load(path).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    if config.server.tokens.is_empty() {
        return Err("server.tokens is empty; no one could use the API".into());
    }
    let ranking = config.ranking_config().map_err(|e| e.to_string())?;
    let descriptor = config.scorer_descriptor().map_err(|e| e.to_string())?;
    let scorer = descriptor.instantiate().map_err(|e| e.to_string())?;

    let (store, report) = Store::open(&config.store_path).map_err(|e| e.to_string())?;
    if let Some(d) = &report.diagnostic {
        warn!("recovered store with problem: {d}");
    }
    info!(
        path = %config.store_path.display(),
        last_sequence_no = report.last_sequence_no,
        "store open"
    );
    let store = Arc::new(store);

    let (source, pages): (Box<dyn RevisionSource + Send>, _) = if args.fixtures.is_empty() {
        let agent = config.user_agent.as_deref().unwrap_or(DEFAULT_USER_AGENT);
        let client = MediaWikiClient::new(config.api_url.clone(), agent, config.request_timeout());
        (Box::new(client), config.page_configs().map_err(|e| e.to_string())?)
    } else {
        let fixtures = FixtureTransport::open_all(&args.fixtures).map_err(|e| e.to_string())?;
        let interval = Duration::from_secs(config.poll_interval_secs);
        let pages = fixtures
            .page_titles()
            .into_iter()
            .map(|t| talkwatch::ingest::PageConfig::new(t, interval, true))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        (Box::new(fixtures), pages)
    };

    let state = ApiState::new(
        store.clone(),
        config.server.tokens.iter().map(|t| (t.token.clone(), t.principal.clone())),
        ranking,
        descriptor.scorer_id.clone(),
    );
    let monitor = Monitor::new(source, pages, scorer, store);
    let bind = args.bind.unwrap_or(config.server.bind.clone());

    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let listener = runtime
        .block_on(tokio::net::TcpListener::bind(&bind))
        .map_err(|e| format!("cannot bind {bind}: {e}"))?;
    let handle = spawn_monitor(monitor, state.status_handle(), Duration::from_millis(args.tick_ms), config.compact_every);
    info!(%bind, scorer = %descriptor.scorer_id, "serving");
    let served = runtime.block_on(async {
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    handle.stop();
    served.map_err(|e| e.to_string())
}
