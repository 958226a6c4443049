use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heprep::event::{Session, SessionConfig};
use heprep_cli::{exit, CliError};
use heprep_wire::server::DEFAULT_PORT;

#[derive(Parser)]
#[command(name = "heprep", version, about = "HepRep event server and file tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the event loop over TCP (PORT) and WebSocket (PORT+1).
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Session seed; drawn from entropy when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Hit smearing sigma in mm.
        #[arg(long)]
        smear: Option<f64>,
        /// Probability that an event carries an outlier hit.
        #[arg(long)]
        outlier: Option<f64>,
        #[arg(long, default_value = "127.0.0.1")]
        bind: Ipv4Addr,
    },
    /// Write events 1..N as DIR/event_NNNNNN.heprep.xml.
    Export {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        events: u64,
        #[arg(long)]
        out: PathBuf,
        /// Only instances of these types (the type catalog stays complete).
        #[arg(long, value_delimiter = ',')]
        types: Vec<String>,
    },
    /// Parse and validate a file; prints one violation per line.
    Validate { file: PathBuf },
    /// Print selected instances of a file, tab-separated.
    Query {
        file: PathBuf,
        #[arg(long = "type")]
        types: Vec<String>,
        #[arg(long = "where")]
        wheres: Vec<String>,
        #[arg(long = "exclude-att")]
        excludes: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(exit::USAGE as u8);
        }
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("heprep: {e}");
            if let CliError::Usage(_) = e {
                eprintln!(
                    "usage: heprep query FILE [--type T]... [--where \"NAME OP LITERAL\"]... [--exclude-att A]..."
                );
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Serve {
            port,
            seed,
            smear,
            outlier,
            bind,
        } => serve(port, seed, smear, outlier, bind),
        Command::Export {
            seed,
            events,
            out,
            types,
        } => {
            let files = heprep_cli::export(SessionConfig::with_seed(seed), events, &out, &types)?;
            log::info!("exported {} events to {}", files.len(), out.display());
            Ok(exit::OK)
        }
        Command::Validate { file } => {
            let violations = heprep_cli::validate_file(&file)?;
            for v in &violations {
                println!("{v}");
            }
            Ok(if violations.is_empty() {
                exit::OK
            } else {
                exit::VIOLATIONS
            })
        }
        Command::Query {
            file,
            types,
            wheres,
            excludes,
        } => {
            let req = heprep_cli::request_from_flags(&types, &wheres, &excludes)?;
            let doc = heprep_cli::read_document(&file)?;
            let lines = heprep_cli::query_lines(&doc, &req).map_err(|e| CliError::Usage(e.to_string()))?;
            for l in lines {
                println!("{l}");
            }
            Ok(exit::OK)
        }
    }
}

fn serve(
    port: u16,
    seed: Option<u64>,
    smear: Option<f64>,
    outlier: Option<f64>,
    bind: Ipv4Addr,
) -> Result<i32, CliError> {
    let seed = seed.unwrap_or_else(|| {
        let s = rand::random();
        log::info!("no --seed given; using seed {s}");
        s
    });
    let mut config = SessionConfig::with_seed(seed);
    if let Some(s) = smear {
        if !(s.is_finite() && s >= 0.0) {
            return Err(CliError::Usage("--smear must be a finite non-negative number".into()));
        }
        config.generator.smear_sigma = s;
    }
    if let Some(p) = outlier {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Usage("--outlier must lie in [0, 1]".into()));
        }
        config.generator.outlier_probability = p;
    }
    let mut session = Session::new(config);
    session.next_event();
    let addr = SocketAddr::from((bind, port));
    let handle = heprep_wire::serve(addr, session).map_err(|source| CliError::Io {
        path: PathBuf::from(format!("{addr} (and WebSocket port above it)")),
        source,
    })?;
    log::info!(
        "serving seed {seed}: tcp {} websocket ws://{}{}",
        handle.tcp_addr(),
        handle.ws_addr(),
        heprep_wire::server::WS_PATH
    );
    handle.wait();
    Ok(exit::OK)
}
