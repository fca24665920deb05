use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use kiln_service::api::{router, validate_document};
use kiln_service::bench::{preset, run, Problem, PRESETS};
use kiln_service::store::Store;

#[derive(Parser)]
#[command(name = "kiln", version, about = "Experiment planning service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the REST API over a data directory.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "KILN_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Check a wire-format document; exits 1 and lists errors if invalid.
    Validate { file: PathBuf },
    /// Run a strategy on a synthetic problem and write per-iteration CSV.
    Bench {
        /// branin, zdt1 or zdt1:DIM
        #[arg(long)]
        problem: String,
        /// A preset name or a path to a strategy-config JSON file.
        #[arg(long)]
        strategy: String,
        #[arg(long, default_value_t = 10)]
        init: usize,
        #[arg(long, default_value_t = 30)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve {
            port,
            data_dir,
            host,
        } => serve(&host, port, data_dir),
        Command::Validate { file } => return validate(&file),
        Command::Bench {
            problem,
            strategy,
            init,
            iters,
            seed,
            out,
        } => bench(&problem, &strategy, init, iters, seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn serve(host: &str, port: u16, data_dir: PathBuf) -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let store =
        Store::open(&data_dir).with_context(|| format!("opening {}", data_dir.display()))?;
    let app = router(Arc::new(store));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        tracing::info!(
            "serving {} on {}",
            data_dir.display(),
            listener.local_addr()?
        );
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn validate(file: &PathBuf) -> ExitCode {
    let bytes = match std::fs::read(file) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: reading {}: {e}", file.display());
            return ExitCode::FAILURE;
        }
    };
    match validate_document(&bytes) {
        Ok(kind) => {
            println!("{}: valid {kind} document", file.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            for err in e.errors() {
                println!("{}: {err}", file.display());
            }
            ExitCode::FAILURE
        }
    }
}

fn bench(
    problem: &str,
    strategy: &str,
    init: usize,
    iters: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let problem = Problem::parse(problem)?;
    let config = if PRESETS.contains(&strategy) {
        preset(strategy, seed)?
    } else {
        let text = std::fs::read_to_string(strategy).with_context(|| {
            format!(
                "`{strategy}` is neither a preset ({}) nor a readable file",
                PRESETS.join(", ")
            )
        })?;
        kiln_core::wire::from_json(
            &serde_json::from_str(&text)?,
            &serde_json::from_str(&text)?,
            "",
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?
    };
    let result = run(problem, config, init, iters, seed)?;
    match out {
        Some(path) => result.write_csv(BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))?,
        None => result.write_csv(io::stdout().lock())?,
    }
    eprintln!("{}", result.summary(strategy, seed));
    Ok(())
}
