use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use laylens_client::Client;
use laylens_core::explain::ParserConfig;
use laylens_core::mock::{FaultMode, MockConfig};
use laylens_core::survey::{summary_report, SurveyResponse};
use laylens_core::{AnalysisJob, JobState, MediaType};
use laylens_service::config::{DEFAULT_MAX_IMAGE_BYTES, DEFAULT_MAX_INFLIGHT};
use laylens_service::{BackendChoice, Endpoints, MockBackends, RunningService, ServiceConfig};

#[derive(Parser)]
#[command(name = "laylens", version, about = "Explainable deepfake analysis service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Analyze one image and print the finished job.
    Analyze(AnalyzeArgs),
    /// Summarize a survey responses JSONL file.
    SurveyReport(SurveyArgs),
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// Use the built-in deterministic mock backends.
    #[arg(long, env = "LAYLENS_MOCK")]
    mock: bool,
    #[arg(long, env = "LAYLENS_DETECTOR_URL")]
    detector_url: Option<String>,
    #[arg(long, env = "LAYLENS_SIMPLIFIER_URL")]
    simplifier_url: Option<String>,
    #[arg(long, env = "LAYLENS_EDITOR_URL")]
    editor_url: Option<String>,
    /// Mock detector fault: none, fenced, prose_wrapped, trailing_commas, bad_emoji, garbage, flaky_5xx:N
    #[arg(long, env = "LAYLENS_DETECT_FAULT", default_value = "none")]
    detect_fault: FaultMode,
    #[arg(long, env = "LAYLENS_SIMPLIFY_FAULT", default_value = "none")]
    simplify_fault: FaultMode,
    #[arg(long, env = "LAYLENS_EDIT_FAULT", default_value = "none")]
    edit_fault: FaultMode,
    /// Artificial delay added to every mock backend call.
    #[arg(long, env = "LAYLENS_MOCK_LATENCY_MS", default_value_t = 0)]
    mock_latency_ms: u64,
    #[arg(long, env = "LAYLENS_JACCARD_THRESHOLD", default_value_t = 0.5)]
    jaccard_threshold: f64,
    #[arg(long, env = "LAYLENS_INSTRUCTION_CAP", default_value_t = 480)]
    instruction_cap: usize,
}

impl BackendArgs {
    fn choice(&self) -> Result<BackendChoice> {
        let urls = [&self.detector_url, &self.simplifier_url, &self.editor_url];
        if self.mock {
            if urls.iter().any(|u| u.is_some()) {
                tracing::warn!("--mock given; ignoring backend URLs");
            }
            let role = |fault_mode| MockConfig { fault_mode, latency_ms: self.mock_latency_ms, ..MockConfig::default() };
            return Ok(BackendChoice::Mock(MockBackends {
                detect: role(self.detect_fault),
                simplify: role(self.simplify_fault),
                edit: role(self.edit_fault),
            }));
        }
        match urls {
            [Some(d), Some(s), Some(e)] => Ok(BackendChoice::Remote(Endpoints {
                detector: d.clone(),
                simplifier: s.clone(),
                editor: e.clone(),
            })),
            _ => bail!("either --mock or all of --detector-url, --simplifier-url and --editor-url are required"),
        }
    }

    fn parser(&self) -> ParserConfig {
        ParserConfig { jaccard_threshold: self.jaccard_threshold, instruction_cap: self.instruction_cap }
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "LAYLENS_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long, env = "LAYLENS_DATA_DIR", default_value = "./data")]
    data_dir: PathBuf,
    /// Also expose the mock backends over HTTP at this address.
    #[arg(long, env = "LAYLENS_MOCK_SERVE")]
    mock_serve: Option<SocketAddr>,
    #[arg(long, env = "LAYLENS_MAX_IMAGE_BYTES", default_value_t = DEFAULT_MAX_IMAGE_BYTES)]
    max_image_bytes: usize,
    #[arg(long, env = "LAYLENS_MAX_INFLIGHT", default_value_t = DEFAULT_MAX_INFLIGHT)]
    max_inflight: usize,
    /// Allow cross-origin requests from this origin.
    #[arg(long, env = "LAYLENS_ALLOW_ORIGIN")]
    allow_origin: Option<String>,
    #[command(flatten)]
    backends: BackendArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    file: PathBuf,
    /// Print the job as JSON.
    #[arg(long)]
    json: bool,
    /// Submit to a running service instead of starting one in-process.
    #[arg(long, env = "LAYLENS_SERVER")]
    server: Option<String>,
    /// Data directory for the in-process service (default: a temporary one).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    timeout_secs: u64,
    #[command(flatten)]
    backends: BackendArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct SurveyArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let result = match cli.command {
        Command::Serve(args) => runtime.block_on(serve(args)).map(|_| ExitCode::SUCCESS),
        Command::Analyze(args) => runtime.block_on(analyze(args)),
        Command::SurveyReport(args) => survey_report(args).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

async fn serve(args: ServeArgs) -> Result<()> {
    let mut cfg = ServiceConfig::new(args.listen, &args.data_dir, args.backends.choice()?);
    cfg.mock_serve = args.mock_serve;
    cfg.max_image_bytes = args.max_image_bytes;
    cfg.max_inflight = args.max_inflight;
    cfg.allow_origin = args.allow_origin;
    cfg.parser = args.backends.parser();
    let service = RunningService::start(cfg).await?;
    eprintln!("laylens listening on {}", service.base_url());
    if let Some(mock) = service.mock() {
        eprintln!("mock backends on {}", mock.base_url());
    }
    let token = service.shutdown_token();
    tokio::spawn(async move {
        let _ = tokio::signal::ctrl_c().await;
        token.cancel();
    });
    service.wait().await?;
    Ok(())
}

fn media_type_of(path: &Path, bytes: &[u8]) -> Result<MediaType> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        return Ok(MediaType::Png);
    }
    if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        return Ok(MediaType::Jpeg);
    }
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => Ok(MediaType::Png),
        Some("jpg" | "jpeg") => Ok(MediaType::Jpeg),
        _ => bail!("{} is neither PNG nor JPEG", path.display()),
    }
}

async fn analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let bytes = std::fs::read(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let media_type = media_type_of(&args.file, &bytes)?;
    let timeout = Duration::from_secs(args.timeout_secs);

    let job = match &args.server {
        Some(url) => run_against(&Client::new(url.clone()), bytes, media_type, Duration::from_millis(500), timeout).await?,
        None => {
            let tmp;
            let data_dir = match &args.data_dir {
                Some(d) => d.clone(),
                None => {
                    tmp = tempfile::tempdir()?;
                    tmp.path().to_path_buf()
                }
            };
            let mut cfg = ServiceConfig::new(SocketAddr::from(([127, 0, 0, 1], 0)), data_dir, args.backends.choice()?);
            cfg.parser = args.backends.parser();
            let service = RunningService::start(cfg).await?;
            let client = Client::new(service.base_url());
            let job = run_against(&client, bytes, media_type, Duration::from_millis(20), timeout).await;
            service.shutdown().await?;
            job?
        }
    };

    if args.json {
        emit(&format!("{}\n", serde_json::to_string_pretty(&job)?))?;
    } else {
        emit(&describe(&job))?;
    }
    Ok(match job.state() {
        JobState::Completed | JobState::CompletedPartial => ExitCode::SUCCESS,
        _ => ExitCode::FAILURE,
    })
}

async fn run_against(
    client: &Client,
    bytes: Vec<u8>,
    media_type: MediaType,
    poll: Duration,
    timeout: Duration,
) -> Result<AnalysisJob> {
    let id = client.submit(bytes, media_type).await.context("submitting image")?;
    Ok(client.wait_for_terminal(&id, poll, timeout).await?)
}

fn describe(job: &AnalysisJob) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "job {} {}", job.job_id(), job.state());
    if let Some(v) = job.verdict() {
        let conf = job.confidence().map(|c| format!(" (confidence {c:.2})")).unwrap_or_default();
        let v = match v {
            laylens_core::Verdict::Fake => "fake",
            laylens_core::Verdict::Real => "real",
        };
        let _ = writeln!(out, "verdict: {v}{conf}");
    }
    for (i, f) in job.findings().iter().enumerate() {
        let b = f.bbox();
        let _ = writeln!(out, "  [{i}] {} at ({},{})-({},{}), {} px", f.label(), b.x_min, b.y_min, b.x_max, b.y_max, f.area());
    }
    if let Some(tiers) = job.explanations() {
        let _ = writeln!(out, "technical: {}", tiers.technical);
        for e in &tiers.simplified {
            let _ = writeln!(out, "  {} {}: {}", e.emoji, e.region, e.simple_explanation);
        }
        if let Some(s) = &tiers.overall_summary {
            let _ = writeln!(out, "summary: {s}");
        }
    }
    if let Some(r) = job.overlay() {
        let _ = writeln!(out, "overlay: {}", r.sha256);
    }
    if let Some(r) = job.reconstruction() {
        let _ = writeln!(out, "reconstruction: {}", r.sha256);
    }
    for (stage, err) in job.stage_errors() {
        let _ = writeln!(out, "stage error [{stage}]: {err}");
    }
    out
}

fn survey_report(args: SurveyArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let mut responses = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: SurveyResponse = serde_json::from_str(line).with_context(|| format!("line {}", i + 1))?;
        r.validate().with_context(|| format!("line {}", i + 1))?;
        responses.push(r);
    }
    let summary = summary_report(&responses);
    match args.format {
        ReportFormat::Text => emit(&summary.to_text())?,
        ReportFormat::Json => emit(&format!("{}\n", serde_json::to_string_pretty(&summary)?))?,
        ReportFormat::Csv => emit(&summary.to_csv())?,
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}
