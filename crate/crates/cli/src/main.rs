use std::path::{Path, PathBuf};
use std::process::ExitCode;

use argverify_core::canonical::{self, FloatStyle};
use argverify_core::fuzz::{self, FuzzConfig};
use argverify_core::{
    build_report, render, run_pipeline, CasePackage, ContestationSession, PipelineError, ReportFormat, VerificationResult,
};
use argverify_service::{ProviderMode, ServiceConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  I/O or runtime failure
  2  validation error (malformed case, config or session file)
  3  provider error (a provider failed or was unreachable)
  4  replay divergence
  5  fuzz property violation";

#[derive(Parser)]
#[command(name = "argverify", version, about = "Contestable, argument-based verification of media claims", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification pipeline on a case and write the result and a Markdown report.
    #[command(after_help = EXIT_CODES)]
    Verify(VerifyArgs),
    /// Render a report from a result or session file.
    #[command(after_help = EXIT_CODES)]
    Report(ReportArgs),
    /// Replay a session's contest log and compare with its stored state.
    #[command(after_help = EXIT_CODES)]
    Replay(ReplayArgs),
    /// Start the HTTP service.
    #[command(after_help = EXIT_CODES)]
    Serve(ServeArgs),
    /// Check the scoring semantics on random acyclic graphs.
    #[command(after_help = EXIT_CODES)]
    Fuzz(FuzzArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Providers {
    Mock,
    Remote,
}

#[derive(Args)]
struct VerifyArgs {
    /// Case package (JSON).
    #[arg(long)]
    case: PathBuf,
    /// TOML config; its `pipeline` and `providers` tables are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mock")]
    providers: Providers,
    /// Result JSON path; the report goes next to it with a `.md` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(Args)]
struct ReportArgs {
    /// Verification result (JSON).
    #[arg(long, required_unless_present = "session", conflicts_with = "session")]
    result: Option<PathBuf>,
    /// Contestation session (JSON); the report reflects its current state and log.
    #[arg(long)]
    session: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    session: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// TOML config file; `ARGVERIFY_*` variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Listen address, overriding the config.
    #[arg(long)]
    listen: Option<String>,
}

#[derive(Args)]
struct FuzzArgs {
    /// Maximum arguments per graph (at most 64).
    #[arg(long, default_value_t = 12)]
    nodes: usize,
    #[arg(long, default_value_t = 1000)]
    graphs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write a counterexample; defaults to the working directory.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Check a deliberately broken evaluator instead of the real one.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(1, format!("{}: {e}", path.display()))
    }
    fn validation(message: impl Into<String>) -> Self {
        Self::new(2, message)
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(path: &Path, body: &[u8]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    std::fs::write(path, body).map_err(|e| Failure::io(path, e))
}

/// Parses JSON, naming the offending field on failure.
fn parse<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = read(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            Failure::validation(format!("invalid {what} {}: {inner}", path.display()))
        } else {
            Failure::validation(format!("invalid {what} {}: field `{field}`: {inner}", path.display()))
        }
    })
}

fn report_path(out: &Path) -> PathBuf {
    let md = out.with_extension("md");
    if md == out {
        out.with_extension("report.md")
    } else {
        md
    }
}

fn verify(args: VerifyArgs) -> Outcome {
    let case: CasePackage = parse(&args.case, "case")?;
    let violations = case.validate();
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(Failure::validation(format!("invalid case {}:\n{}", args.case.display(), lines.join("\n"))));
    }
    let mut config = ServiceConfig::load(args.config.as_deref()).map_err(|e| Failure::validation(e.to_string()))?;
    config.providers.mode = match args.providers {
        Providers::Mock => ProviderMode::Mock,
        Providers::Remote => ProviderMode::Remote,
    };
    let result = run_pipeline(&case, &config.pipeline, &config.providers.build()).map_err(|e| match e {
        PipelineError::Provider(p) => Failure::new(3, format!("provider `{}` failed: {p}", p.provider())),
        other => Failure::validation(other.to_string()),
    })?;
    let json = canonical::to_string(&result, FloatStyle::Exact).map_err(|e| Failure::new(1, e.to_string()))?;
    write(&args.out, json.as_bytes())?;
    let md_path = report_path(&args.out);
    let report = build_report(&result, &[], None);
    write(&md_path, &render(&report, ReportFormat::Markdown))?;
    for f in &report.sections {
        println!("{:<13} σ={:.6}  {}", f.claim_kind.as_str(), f.sigma, f.final_verdict);
    }
    println!("overall: {}", report.overall_status);
    println!("wrote {} and {}", args.out.display(), md_path.display());
    let provider_failures: Vec<String> = result
        .section_errors()
        .filter(|e| e.is_provider_failure())
        .map(|e| format!("  {} ({:?}, provider {}): {}", e.claim.kind, e.stage, e.provider_id.as_deref().unwrap_or("?"), e.message))
        .collect();
    if !provider_failures.is_empty() {
        return Err(Failure::new(
            3,
            format!("provider failures in {} section(s):\n{}", provider_failures.len(), provider_failures.join("\n")),
        ));
    }
    Ok(())
}

fn report(args: ReportArgs) -> Outcome {
    let (result, log) = match (&args.result, &args.session) {
        (Some(path), _) => (parse::<VerificationResult>(path, "result")?, vec![]),
        (None, Some(path)) => {
            let s: ContestationSession = parse(path, "session")?;
            (s.current, s.log)
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let format = match args.format {
        Format::Json => ReportFormat::Json,
        Format::Markdown => ReportFormat::Markdown,
    };
    let body = render(&build_report(&result, &log, None), format);
    match &args.out {
        Some(path) => write(path, &body),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&body).map_err(|e| Failure::new(1, e.to_string()))
        }
    }
}

fn replay(args: ReplayArgs) -> Outcome {
    let session: ContestationSession = parse(&args.session, "session")?;
    match session.check_replay() {
        Ok(Ok(())) => {
            println!("replay ok: {} action(s), digest {}", session.log.len(), session.current_digest);
            Ok(())
        }
        Ok(Err(d)) => {
            let section = d.first_section.map_or_else(|| "none (difference outside the sections)".to_owned(), |k| k.to_string());
            Err(Failure::new(
                4,
                format!(
                    "replay diverges from stored state\n  first divergent section: {section}\n  stored digest:     {}\n  recomputed digest: {}",
                    d.stored_digest, d.recomputed_digest
                ),
            ))
        }
        Err(e) => {
            let section = session.log.get(e.index).map(|a| a.claim_kind.to_string()).unwrap_or_default();
            Err(Failure::new(
                4,
                format!("replay diverges: log entry {} cannot be applied\n  first divergent section: {section}\n  {}", e.index, e.error),
            ))
        }
    }
}

fn serve(args: ServeArgs) -> Outcome {
    let mut config = ServiceConfig::load(args.config.as_deref()).map_err(|e| Failure::validation(e.to_string()))?;
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(1, e.to_string()))?;
    runtime.block_on(async {
        let listener =
            tokio::net::TcpListener::bind(&config.listen).await.map_err(|e| Failure::new(1, format!("bind {}: {e}", config.listen)))?;
        let addr = listener.local_addr().map_err(|e| Failure::new(1, e.to_string()))?;
        eprintln!("argverify listening on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        argverify_service::serve_on(listener, config, shutdown).await.map_err(|e| Failure::new(1, e.to_string()))
    })
}

fn run_fuzz(args: FuzzArgs) -> Outcome {
    let cfg = FuzzConfig { nodes: args.nodes, graphs: args.graphs, seed: args.seed };
    let eval = if args.inject_fault { fuzz::faulty } else { fuzz::topological };
    let summary = fuzz::run_fuzz(&cfg, eval).map_err(Failure::validation)?;
    let Some(cx) = summary.counterexample else {
        println!(
            "fuzz ok: {} graph(s) checked (nodes ≤ {}, seed {}); boundedness, neutral fixedness, reflection symmetry, evaluator equivalence and monotonicity hold",
            summary.graphs_checked, cfg.nodes, cfg.seed
        );
        return Ok(());
    };
    let path = args.dump.unwrap_or_else(|| PathBuf::from(format!("argverify-counterexample-{}-{}.json", cx.seed, cx.graph_index)));
    let body = canonical::to_string(&cx, FloatStyle::Exact).map_err(|e| Failure::new(1, e.to_string()))?;
    write(&path, body.as_bytes())?;
    let first = &cx.violations[0];
    Err(Failure::new(
        5,
        format!(
            "property violated on graph {} of seed {}: {} at {}: {}\ncounterexample written to {}",
            cx.graph_index,
            cx.seed,
            first.property,
            first.node.as_deref().unwrap_or("graph"),
            first.detail,
            path.display()
        ),
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| default_level.into()))
        .init();
    let outcome = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Report(a) => report(a),
        Command::Replay(a) => replay(a),
        Command::Serve(a) => serve(a),
        Command::Fuzz(a) => run_fuzz(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
