//! Command-line interface. Failures print `{"error", "message"}` on stderr and
//! exit with a code from [`ExitCode`].

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sketchedit_core::cad_seq::parse;
use sketchedit_core::captioning::{
    synthesize, CaptionBackend, Dataset, DatasetError, Modality, SynthConfig, TemplateCaptioner,
};
use sketchedit_core::geometry::{
    assemble, cloud_to_xyz, mesh, mesh_to_obj, render_preview, sample_point_cloud, CameraConfig, SampleConfig,
};
use sketchedit_core::metrics::{evaluate, EmbeddingBackend, EvalConfig, MetricsError};
use sketchedit_core::pipeline::{edit, run_batch, EditOptions, ModelBackend, PipelineError, ScriptedBackend};
use sketchedit_core::session::SessionStore;

use crate::api::{parse_results, serve_on, AppState};
use crate::clients::{HttpCaptionBackend, HttpEmbeddingBackend, HttpModelBackend};
use crate::config::{Endpoint, StoreConfig};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Failure = 1,
    Usage = 2,
    InvalidInput = 3,
    BackendUnavailable = 4,
    Io = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: ExitCode,
}

impl CliError {
    fn new(kind: &'static str, code: ExitCode, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), code }
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new("InvalidInput", ExitCode::InvalidInput, message)
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::new("Io", ExitCode::Io, format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let m = e.to_string();
        match e {
            PipelineError::BackendUnavailable(_) => {
                CliError::new("BackendUnavailable", ExitCode::BackendUnavailable, m)
            }
            PipelineError::LocatingFailed { .. } => CliError::new("LocatingFailed", ExitCode::Failure, m),
            PipelineError::Io(_) => CliError::new("Io", ExitCode::Io, m),
            _ => CliError::input(m),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Caption(c) => {
                CliError::new("BackendUnavailable", ExitCode::BackendUnavailable, c.to_string())
            }
            DatasetError::Exhausted { .. } => CliError::new("SynthesisExhausted", ExitCode::Failure, e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Backend(m) => CliError::new("BackendUnavailable", ExitCode::BackendUnavailable, m),
            other => CliError::input(other.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "sketchedit", version, about = "Text-instructed editing of sketch-and-extrude CAD models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModalityArg {
    Sequence,
    Visual,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a filtered triplet dataset.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSONL; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        variants: usize,
        /// Captioning service URL; the record-driven template captioner when omitted.
        #[arg(long)]
        captioner: Option<String>,
        #[arg(long, value_enum, default_value_t = ModalityArg::Sequence)]
        modality: ModalityArg,
    },
    /// Generate edit candidates for one model or for a test set.
    Edit {
        /// File holding one model sequence.
        #[arg(long, conflicts_with = "testset", required_unless_present = "testset")]
        model: Option<PathBuf>,
        #[arg(long, requires = "model")]
        instruction: Option<String>,
        /// Triplet JSONL to run in batch mode.
        #[arg(long)]
        testset: Option<PathBuf>,
        /// `scripted`, or the completion endpoint URL. Defaults to the config or environment.
        #[arg(long)]
        backend: Option<String>,
        /// Triplet JSONL that scripts the `scripted` backend; defaults to the test set.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 3)]
        retries: usize,
        /// Batch results JSONL; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score batch results against their test set.
    Eval {
        #[arg(long)]
        testset: PathBuf,
        #[arg(long)]
        results: PathBuf,
        /// Embedding service URL; D-CLIP is omitted without one.
        #[arg(long)]
        embedder: Option<String>,
        #[arg(long)]
        single_threaded: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `bind` from the config.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Export a model as OBJ mesh, PNG preview or XYZ point cloud, chosen by extension.
    Render {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        points: usize,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn load_config(path: Option<&Path>) -> CliResult<StoreConfig> {
    match path {
        Some(p) => StoreConfig::load(p).map_err(|e| CliError::input(e.to_string())),
        None => {
            let mut cfg = StoreConfig::default();
            cfg.apply_env(|k| std::env::var(k).ok());
            Ok(cfg)
        }
    }
}

fn load_dataset(path: &Path) -> CliResult<Dataset> {
    Ok(Dataset::from_jsonl(&read(path)?)?)
}

fn scripted(path: &Path) -> CliResult<ScriptedBackend> {
    Ok(ScriptedBackend::from_triplets(&load_dataset(path)?.triplets))
}

/// Backend chosen by `script`, then `url`, of an endpoint.
pub fn model_backend(ep: &Endpoint) -> Result<Arc<dyn ModelBackend>, CliError> {
    if let Some(script) = &ep.script {
        return Ok(Arc::new(scripted(script)?));
    }
    let url = ep.url.as_deref().ok_or_else(|| CliError::input("no model backend configured"))?;
    HttpModelBackend::new(url, ep).map(|b| Arc::new(b) as Arc<dyn ModelBackend>).map_err(CliError::input)
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth { count, seed, out, variants, captioner, modality } => {
            let mut cfg = SynthConfig::new(count, seed);
            cfg.variants_per_base = variants;
            cfg.modality = match modality {
                ModalityArg::Sequence => Modality::Sequence,
                ModalityArg::Visual => Modality::Visual,
            };
            let backend: Box<dyn CaptionBackend> = match captioner {
                None => Box::new(TemplateCaptioner),
                Some(url) => Box::new(HttpCaptionBackend::new(&url, &Endpoint::default()).map_err(CliError::input)?),
            };
            let ds = synthesize(&cfg, backend.as_ref())?;
            match out {
                Some(p) => {
                    write(&p, ds.to_jsonl())?;
                    println!("{}", json!({ "triplets": ds.len(), "out": p }));
                }
                None => print!("{}", ds.to_jsonl()),
            }
            Ok(())
        }
        Command::Edit { model, instruction, testset, backend, script, k, seed, retries, out, config } => {
            let mut cfg = load_config(config.as_deref())?;
            match backend.as_deref() {
                Some("scripted") => {
                    cfg.model.script = Some(
                        script
                            .or_else(|| testset.clone())
                            .ok_or_else(|| CliError::input("scripted backend needs --script"))?,
                    );
                }
                Some(url) => {
                    cfg.model.script = None;
                    cfg.model.url = Some(url.to_string());
                }
                None => {}
            }
            let backend = model_backend(&cfg.model)?;
            let opts = EditOptions {
                k,
                retries,
                sampling: sketchedit_core::pipeline::SamplingConfig { seed, ..cfg.sampling },
                parallel: true,
            };
            if let Some(ts) = testset {
                let ds = load_dataset(&ts)?;
                let lines = run_batch(&ds, backend.as_ref(), &opts)?;
                let mut body = String::new();
                for l in &lines {
                    body.push_str(&serde_json::to_string(l).expect("result serializes"));
                    body.push('\n');
                }
                match out {
                    Some(p) => write(&p, body)?,
                    None => print!("{body}"),
                }
                return Ok(());
            }
            let path = model.expect("clap enforces --model");
            let text = read(&path)?;
            let orig = parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let instruction = instruction.ok_or_else(|| CliError::input("--instruction is required with --model"))?;
            let result = edit(&orig, &instruction, backend.as_ref(), &opts)?;
            println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
            Ok(())
        }
        Command::Eval { testset, results, embedder, single_threaded, format } => {
            let ds = load_dataset(&testset)?;
            let lines = parse_results(&read(&results)?).map_err(CliError::input)?;
            let embedder = embedder
                .map(|u| HttpEmbeddingBackend::new(&u, &Endpoint::default()).map_err(CliError::input))
                .transpose()?;
            let cfg = EvalConfig { parallel: !single_threaded, ..EvalConfig::default() };
            let report = evaluate(&ds, &lines, &cfg, embedder.as_ref().map(|e| e as &dyn EmbeddingBackend))?;
            match format {
                ReportFormat::Table => print!("{}", report.table()),
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
            }
            Ok(())
        }
        Command::Serve { config, bind } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(b) = bind {
                cfg.bind = b;
            }
            serve(cfg)
        }
        Command::Render { model, out, points } => render(&model, &out, points),
        Command::Config { config } => {
            print!("{}", load_config(config.as_deref())?.to_toml());
            Ok(())
        }
    }
}

fn render(model: &Path, out: &Path, points: usize) -> CliResult {
    let text = read(model)?;
    let m = parse(&text).map_err(|e| CliError::input(format!("{}: {e}", model.display())))?;
    let geometry =
        |e: sketchedit_core::geometry::GeometryError| CliError::new("Geometry", ExitCode::InvalidInput, e.to_string());
    let assembly = assemble::<f64>(&m).map_err(geometry)?;
    let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let summary = match ext.as_str() {
        "obj" | "png" => {
            let tm = mesh(&assembly).map_err(geometry)?;
            if ext == "obj" {
                write(out, mesh_to_obj(&tm))?;
            } else {
                write(out, render_preview(&tm, &CameraConfig::default()).map_err(geometry)?.to_png())?;
            }
            json!({ "out": out, "vertices": tm.vertices.len(), "triangles": tm.triangles.len() })
        }
        "xyz" => {
            let cloud =
                sample_point_cloud(&assembly, &SampleConfig { points, ..SampleConfig::default() }).map_err(geometry)?;
            write(out, cloud_to_xyz(&cloud))?;
            json!({ "out": out, "points": cloud.points.len() })
        }
        _ => return Err(CliError::input(format!("unsupported output extension {:?}; use .obj, .png or .xyz", ext))),
    };
    println!("{summary}");
    Ok(())
}

/// Builds the application state and serves until interrupted.
pub fn serve(cfg: StoreConfig) -> CliResult {
    let state = app_state(&cfg)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new("Io", ExitCode::Io, e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .map_err(|e| CliError::new("Io", ExitCode::Io, format!("bind {}: {e}", cfg.bind)))?;
        let addr = listener.local_addr().map_err(|e| CliError::new("Io", ExitCode::Io, e.to_string()))?;
        eprintln!("{}", json!({ "listening": addr.to_string() }));
        tokio::select! {
            r = serve_on(listener, state) => r.map_err(|e| CliError::new("Io", ExitCode::Io, e.to_string())),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}

/// State for the HTTP API. Must be called outside an async runtime.
pub fn app_state(cfg: &StoreConfig) -> CliResult<AppState> {
    let store = SessionStore::open(&cfg.data_dir, cfg.selective_path())
        .map_err(|e| CliError::new("Io", ExitCode::Io, e.to_string()))?;
    let embedder = match &cfg.embedder.url {
        Some(u) => Some(Arc::new(HttpEmbeddingBackend::new(u, &cfg.embedder).map_err(CliError::input)?)
            as Arc<dyn EmbeddingBackend>),
        None => None,
    };
    Ok(AppState {
        store,
        model: model_backend(&cfg.model)?,
        embedder,
        options: cfg.edit_options(),
        eval: EvalConfig::default(),
        camera: CameraConfig::default(),
    })
}

/// Parses arguments, runs, and maps failures to stderr JSON and an exit code.
pub fn main() -> std::process::ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return std::process::ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::new("Usage", ExitCode::Usage, e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return std::process::ExitCode::from(ExitCode::Usage as u8);
        }
    };
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::ExitCode::from(e.code as u8)
        }
    }
}
