use std::error::Error;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use duagate::bench::{self, LatencyConfig, ReportFormat, TrajectoryConfig};
use duagate::middleware::{http, HttpTransport, MiddlewareConfig, Transport, TrustedMiddleware};
use duagate::ontology::{bootstrap_vocabulary, validate_instances, vocabulary_graph};
use duagate::policy::PolicyRegistry;
use duagate::query::{eval_ask, eval_select, eval_update, Query, QueryForm};
use duagate::store::{load_lines, serialize_lines, Graph, Namespaces};
use duagate::synth::{generate, strip_category, strip_properties, GeneratorSpec};
use duagate::trust::TrustRegistry;

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "duagate", version, about = "DUA compliance and trust middleware")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ASK, SELECT or update query against a data file.
    Query {
        #[arg(long)]
        data: PathBuf,
        /// Query text; `@path` reads it from a file.
        query: String,
        /// Where to write the graph after an update.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check instance-level integrity rules.
    Validate {
        #[arg(long)]
        data: PathBuf,
    },
    Trust {
        #[command(subcommand)]
        command: TrustCommand,
    },
    /// Generate the synthetic universe in line format.
    Gen {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        patients: usize,
        /// Category IRI to withdraw from the custodian.
        #[arg(long)]
        strip_category: Vec<String>,
        /// Property IRI to remove everywhere.
        #[arg(long)]
        strip_properties: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the middleware HTTP service.
    Serve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Peer base URLs, comma separated.
        #[arg(long, value_delimiter = ',')]
        peers: Vec<String>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Append-only transaction log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Milliseconds between propagation rounds.
        #[arg(long, default_value_t = 500)]
        propagate_ms: u64,
        /// Directory of policy templates replacing the built-in ones.
        #[arg(long)]
        policies: Option<PathBuf>,
    },
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    Vocab {
        #[command(subcommand)]
        command: VocabCommand,
    },
}

#[derive(Subcommand)]
enum TrustCommand {
    /// Print a principal's trust record as JSON.
    Show {
        #[arg(long)]
        data: PathBuf,
        /// IRI or prefixed name.
        principal: String,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Per-stage latency over dataset sizes.
    Latency {
        #[arg(long, default_value = "1k,10k,100k")]
        sizes: String,
        #[arg(long, default_value_t = 1000)]
        txns: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory of pre-generated `<label>.nt` datasets.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// `.json` writes JSON, anything else CSV.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score trajectories under random violations.
    Trajectory {
        #[arg(long, default_value_t = 0.3)]
        prob: f64,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        cap: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum VocabCommand {
    /// Write the vocabulary in line format.
    Export {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<Graph> {
    let f = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut g = Graph::new();
    load_lines(&mut g, BufReader::new(f)).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(g)
}

fn write_out(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Expands `prefix:local` with the registered prefixes; other text is kept.
fn expand(name: &str) -> String {
    match name.split_once(':') {
        Some((prefix, local)) if !local.starts_with("//") => Namespaces::default()
            .expand(prefix, local)
            .unwrap_or_else(|| name.to_string()),
        _ => name.to_string(),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Query { data, query, output } => {
            let text = match query.strip_prefix('@') {
                Some(p) => std::fs::read_to_string(p).map_err(|e| format!("{p}: {e}"))?,
                None => query,
            };
            let q = Query::parse(&text)?;
            let mut g = load(&data)?;
            match q.form {
                QueryForm::Ask => println!("{}", eval_ask(&q, &g)?),
                QueryForm::Select => print!("{}", eval_select(&q, &g)?.to_tsv()),
                QueryForm::Update => {
                    let s = eval_update(&q, &mut g)?;
                    eprintln!("deleted {} inserted {}", s.deleted, s.inserted);
                    write_out(Some(output.as_deref().unwrap_or(&data)), &serialize_lines(&g))?;
                }
            }
        }
        Command::Validate { data } => {
            let report = validate_instances(&load(&data)?);
            for v in &report.violations {
                println!("{}\t{}\t{}", v.rule, v.iri, v.message);
            }
            if !report.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
            eprintln!("no violations");
        }
        Command::Trust {
            command: TrustCommand::Show { data, principal },
        } => {
            let registry = TrustRegistry::from_graph(&load(&data)?);
            let iri = expand(&principal);
            let rec = registry
                .get(&iri)
                .ok_or_else(|| format!("<{iri}> is not a user or organization"))?;
            println!("{}", serde_json::to_string_pretty(rec)?);
        }
        Command::Gen {
            seed,
            patients,
            strip_category: categories,
            strip_properties: properties,
            output,
        } => {
            let mut g = generate(&GeneratorSpec::new(seed, patients))?;
            for c in &categories {
                strip_category(&mut g, &expand(c));
            }
            for p in &properties {
                strip_properties(&mut g, &expand(p));
            }
            write_out(output.as_deref(), &serialize_lines(&g))?;
        }
        Command::Serve {
            data,
            config,
            peers,
            listen,
            log,
            propagate_ms,
            policies,
        } => {
            let mut g = load(&data)?;
            bootstrap_vocabulary(&mut g);
            let config = match config {
                Some(p) => MiddlewareConfig::load(&p)?,
                None => MiddlewareConfig::default(),
            };
            let policies = match policies {
                Some(dir) => PolicyRegistry::from_dir(&dir)?,
                None => PolicyRegistry::builtin(),
            };
            let mut tm = TrustedMiddleware::new(g, config, policies).with_peers(&peers);
            if let Some(path) = log {
                tm = tm.with_log_file(&path)?;
            }
            let tm = Arc::new(tm);
            let transport: Arc<dyn Transport> = Arc::new(HttpTransport::new(Duration::from_secs(5))?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&listen).await?;
                tracing::info!(addr = %listener.local_addr()?, peers = peers.len(), "serving");
                if !peers.is_empty() {
                    http::spawn_propagation(tm.clone(), transport, Duration::from_millis(propagate_ms));
                }
                tokio::select! {
                    r = http::serve(tm, listener) => r,
                    _ = tokio::signal::ctrl_c() => Ok(()),
                }
            })?;
        }
        Command::Bench {
            command:
                BenchCommand::Latency {
                    sizes,
                    txns,
                    seed,
                    data_dir,
                    output,
                },
        } => {
            let cfg = LatencyConfig {
                sizes: bench::parse_sizes(&sizes)?,
                transactions: txns,
                seed,
                data_dir,
            };
            let report = bench::run_latency(&cfg)?;
            bench::emit_report(&report, |r| r.to_csv(), ReportFormat::for_path(&output), &output)?;
        }
        Command::Bench {
            command:
                BenchCommand::Trajectory {
                    prob,
                    runs,
                    seed,
                    cap,
                    output,
                },
        } => {
            let cfg = TrajectoryConfig {
                violation_prob: prob,
                runs,
                seed,
                cap,
                ..TrajectoryConfig::default()
            };
            let report = bench::run_trajectory(&cfg)?;
            for s in &report.scenarios {
                match s.mean_transactions_to_zero {
                    Some(m) => eprintln!("{}: mean transactions to zero {m:.1}", s.scenario.name()),
                    None => eprintln!("{}: no run reached zero", s.scenario.name()),
                }
            }
            bench::emit_report(&report, |r| r.to_csv(), ReportFormat::for_path(&output), &output)?;
        }
        Command::Vocab {
            command: VocabCommand::Export { output },
        } => write_out(output.as_deref(), &serialize_lines(&vocabulary_graph()))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
