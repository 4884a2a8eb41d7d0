use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use personagram_core::corpus::{FilterQuery, PersonaCorpus};
use personagram_core::engine::{clock_from_env, Engine, EngineError, SessionStore, DEFAULT_GENERATION_COUNT};
use personagram_core::gateway::{ImageRef, ImageSource};
use personagram_core::pipeline::{Dimension, FeatureMatrix, ProductBatch, Provenance, FIRST_DISPLAY_COUNT};
use personagram_core::scaffold::{self, FeatureSelection, GalleryEntry, PromptDraft};
use personagram_core::session::{metrics_csv, replay_events, EventLogFile, SessionState, UsageMetrics};
use personagram_core::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "personagram", version, about = "Persona-driven product ideation, headless")]
struct Cli {
    /// Settings file (defaults to $PERSONAGRAM_CONFIG, then ./personagram.json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Persona corpus (JSON lines), overriding the settings file.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Fixture directory for mock providers, overriding the settings file.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Provider config file, overriding the settings file.
    #[arg(long, global = true)]
    providers: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Query the persona corpus.
    #[command(subcommand)]
    Personas(PersonasCommand),
    /// Infer nine products for a persona and attach reference images.
    Infer {
        #[arg(long)]
        persona_id: String,
        /// How many suggestions get a reference image.
        #[arg(long, default_value_t = FIRST_DISPLAY_COUNT)]
        display: usize,
    },
    /// Extract the 27-entry feature matrix from a product image.
    Features(FeaturesArgs),
    /// Compose a prompt draft from selected features.
    Compose {
        #[arg(long)]
        selections_file: PathBuf,
        #[arg(long)]
        subject: String,
    },
    /// Generate images from a prompt draft.
    Generate {
        #[arg(long)]
        draft_file: PathBuf,
        #[arg(short = 'n', default_value_t = DEFAULT_GENERATION_COUNT)]
        n: usize,
    },
    /// Usage metrics of a session document or event log.
    Metrics {
        #[arg(long, required = true, num_args = 1..)]
        session_file: Vec<PathBuf>,
    },
    /// Session documents.
    #[command(subcommand)]
    Session(SessionCommand),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum PersonasCommand {
    /// Ids of personas matching every facet clause.
    Filter {
        /// PATH=VALUE, e.g. `Age=18–25`; alternatives separated by `|`.
        #[arg(long)]
        facet: Vec<String>,
    },
    /// Preview one persona.
    Show { id: String },
}

#[derive(Debug, Subcommand)]
enum SessionCommand {
    /// Rebuild a session from an event log and report its metrics.
    Replay {
        #[arg(long)]
        events_file: PathBuf,
    },
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long)]
    image: String,
    #[arg(long)]
    persona_id: String,
    #[arg(long)]
    product: String,
    /// Search rank of the image.
    #[arg(long, default_value_t = 0)]
    rank: u32,
}

struct Failure {
    code: String,
    message: String,
    exit: u8,
}

impl Failure {
    fn domain(code: &str, message: impl std::fmt::Display) -> Self {
        Failure {
            code: code.to_string(),
            message: message.to_string(),
            exit: 1,
        }
    }

    fn usage(message: impl std::fmt::Display) -> Self {
        Failure {
            code: "usage_error".into(),
            message: message.to_string(),
            exit: 2,
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure::domain(e.code(), e)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::domain("io_error", format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::domain("invalid_input", format!("{}: {e}", path.display())))
}

fn settings(cli: &Cli) -> Result<Settings, Failure> {
    let lookup = |name: &str| std::env::var(name).ok();
    let mut settings = match Settings::discover(cli.config.as_deref(), &lookup) {
        Some(path) => Settings::load(&path).map_err(|e| Failure::domain("config_error", e))?,
        None => {
            let corpus = cli
                .corpus
                .clone()
                .ok_or_else(|| Failure::domain("config_error", "no settings file found and no --corpus given"))?;
            Settings::with_corpus(corpus)
        }
    };
    settings
        .apply_env(&lookup)
        .map_err(|e| Failure::domain("config_error", e))?;
    if let Some(p) = &cli.corpus {
        settings.corpus = p.clone();
    }
    if let Some(p) = &cli.fixtures {
        settings.fixtures = Some(p.clone());
    }
    if let Some(p) = &cli.providers {
        settings.providers = Some(p.clone());
    }
    Ok(settings)
}

/// Engine over the configured corpus and providers; sessions stay in memory.
fn engine(cli: &Cli) -> Result<Engine, Failure> {
    let s = settings(cli)?;
    let corpus = s.corpus().map_err(|e| Failure::domain("corpus_error", e))?;
    let gateway = s.gateway().map_err(|e| Failure::domain("config_error", e))?;
    Ok(Engine::new(
        Arc::new(corpus),
        gateway,
        SessionStore::in_memory(),
        clock_from_env(),
    ))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable output") + "\n"
}

fn no_csv(what: &str) -> Failure {
    Failure::usage(format!("csv output is not available for {what}; use json or text"))
}

fn text_products(batch: &ProductBatch) -> String {
    let mut out = format!("persona {}\n", batch.persona_id);
    for (i, s) in batch.suggestions.iter().enumerate() {
        out += &format!("{}. {} [{}]\n", i + 1, s.name, s.category_hint);
        out += &format!("   attributes: {}\n", s.considered_attributes.join(", "));
        out += &format!("   reason: {}\n", s.reason);
        if let Some(img) = &s.image {
            out += &format!("   image: {}\n", img.url);
        }
    }
    for w in &batch.warnings {
        out += &format!("warning: {w}\n");
    }
    out
}

fn text_matrix(m: &FeatureMatrix) -> String {
    let mut out = format!("{} ({})\n", m.provenance.product_name, m.provenance.image.url);
    for dim in Dimension::ALL {
        out += &format!("{dim}\n");
        for e in m.entries(dim) {
            out += &format!("  {}: {}\n", e.key, e.phrase);
        }
    }
    out
}

fn text_metrics(m: &UsageMetrics) -> String {
    let mut out = format!("{} ({}, {})\n", m.session_id, m.participant, m.mode.label());
    for (kind, count) in &m.counts {
        out += &format!("  {kind}: {count}\n");
    }
    out += &format!(
        "  total interactions: {}\n  duration: {:.1} min\n  switch rate: {:.2} per 10 min\n",
        m.total_interactions, m.duration_min, m.tab_switch_rate
    );
    out
}

/// A session document, or failing that an event log replayed into one.
fn load_session(path: &Path) -> Result<SessionState, Failure> {
    let text = read(path)?;
    match SessionState::load(&text) {
        Ok(s) => Ok(s),
        Err(doc_err) => {
            let log = EventLogFile::parse(&text)
                .map_err(|_| Failure::domain("invalid_input", format!("{}: {doc_err}", path.display())))?;
            Ok(replay_events(&log)
                .map_err(|e| Failure::domain("invalid_input", format!("{}: {e}", path.display())))?
                .0)
        }
    }
}

async fn run(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Personas(PersonasCommand::Filter { facet }) => {
            let query = FilterQuery::parse_clauses(facet).map_err(|e| Failure::domain("validation_error", e))?;
            let s = settings(cli)?;
            let corpus = PersonaCorpus::load_path(&s.corpus).map_err(|e| Failure::domain("corpus_error", e))?;
            let ids = corpus.filter(&query);
            Ok(match cli.format {
                Format::Json => json(&serde_json::json!({"count": ids.len(), "ids": ids})),
                Format::Csv => std::iter::once("id".to_string()).chain(ids).map(|l| l + "\n").collect(),
                Format::Text => ids.into_iter().map(|l| l + "\n").collect(),
            })
        }
        Command::Personas(PersonasCommand::Show { id }) => {
            let s = settings(cli)?;
            let corpus = PersonaCorpus::load_path(&s.corpus).map_err(|e| Failure::domain("corpus_error", e))?;
            let card = corpus.preview(id).map_err(|e| Failure::domain("not_found", e))?;
            match cli.format {
                Format::Json => Ok(json(&card)),
                Format::Csv => Err(no_csv("personas show")),
                Format::Text => {
                    let mut out = format!("{}\n{}\n", card.id, card.headline);
                    for (facet, value) in card.facets.iter() {
                        out += &format!("  {}: {value}\n", facet.path());
                    }
                    Ok(out)
                }
            }
        }
        Command::Infer { persona_id, display } => {
            let batch = engine(cli)?.infer_for_persona(persona_id, *display).await?;
            match cli.format {
                Format::Json => Ok(json(&batch)),
                Format::Csv => Err(no_csv("infer")),
                Format::Text => Ok(text_products(&batch)),
            }
        }
        Command::Features(args) => {
            let provenance = Provenance {
                persona_id: args.persona_id.clone(),
                product_name: args.product.clone(),
                image: ImageRef {
                    url: args.image.clone(),
                    source: ImageSource::Search,
                    query: args.product.clone(),
                    rank: args.rank,
                },
            };
            let matrix = engine(cli)?.features_for_image(provenance).await?;
            match cli.format {
                Format::Json => Ok(json(&matrix)),
                Format::Csv => {
                    let mut out = String::from("dimension,key,phrase\n");
                    for dim in Dimension::ALL {
                        for e in matrix.entries(dim) {
                            out += &format!("{dim},{},\"{}\"\n", e.key, e.phrase.replace('"', "\"\""));
                        }
                    }
                    Ok(out)
                }
                Format::Text => Ok(text_matrix(&matrix)),
            }
        }
        Command::Compose {
            selections_file,
            subject,
        } => {
            let selections: Vec<FeatureSelection> = parse_json(selections_file)?;
            let mut draft = PromptDraft::new(subject).map_err(|e| Failure::domain("validation_error", e))?;
            for s in selections {
                draft
                    .add_selection(s)
                    .map_err(|e| Failure::domain("validation_error", e))?;
            }
            match cli.format {
                Format::Json => Ok(json(&draft)),
                Format::Csv => Err(no_csv("compose")),
                Format::Text => Ok(format!("{}\n", draft.effective_prompt())),
            }
        }
        Command::Generate { draft_file, n } => {
            let draft: PromptDraft = parse_json(draft_file)?;
            let s = settings(cli)?;
            let gateway = s.gateway().map_err(|e| Failure::domain("config_error", e))?;
            let entry: GalleryEntry = scaffold::generate(&gateway, &draft, *n, "g1".into(), clock_from_env().now_ms())
                .await
                .map_err(EngineError::from)?;
            match cli.format {
                Format::Json => Ok(json(&entry)),
                Format::Csv => Err(no_csv("generate")),
                Format::Text => Ok(entry.images.iter().map(|i| format!("{}\n", i.url)).collect()),
            }
        }
        Command::Metrics { session_file } => {
            let mut rows = Vec::new();
            for path in session_file {
                let session = load_session(path)?;
                rows.push(
                    session
                        .compute_metrics()
                        .map_err(|e| Failure::domain("validation_error", format!("{}: {e}", path.display())))?,
                );
            }
            Ok(match cli.format {
                Format::Json if rows.len() == 1 => json(&rows[0]),
                Format::Json => json(&rows),
                Format::Csv => metrics_csv(&rows),
                Format::Text => rows.iter().map(text_metrics).collect(),
            })
        }
        Command::Session(SessionCommand::Replay { events_file }) => {
            let log = EventLogFile::parse(&read(events_file)?)
                .map_err(|e| Failure::domain("invalid_input", format!("{}: {e}", events_file.display())))?;
            let (session, metrics) = replay_events(&log)
                .map_err(|e| Failure::domain("validation_error", format!("{}: {e}", events_file.display())))?;
            Ok(match cli.format {
                Format::Json => json(&serde_json::json!({"session": session, "metrics": metrics})),
                Format::Csv => metrics_csv(std::slice::from_ref(&metrics)),
                Format::Text => text_metrics(&metrics),
            })
        }
        Command::Serve { port, host } => {
            let mut s = settings(cli)?;
            if let Some(p) = port {
                s.port = *p;
            }
            if let Some(h) = host {
                s.host = h.clone();
            }
            personagram_server::serve(&s)
                .await
                .map_err(|e| Failure::domain("serve_error", e))?;
            Ok(String::new())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let message = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!(
                "usage_error: {}",
                if first.is_empty() { message.as_str() } else { first }
            );
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let level = if matches!(cli.command, Command::Serve { .. }) {
        tracing_subscriber::filter::LevelFilter::INFO
    } else {
        tracing_subscriber::filter::LevelFilter::WARN
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .with_ansi(false)
        .init();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(&cli)) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}: {}", f.code, f.message.replace('\n', " "));
            ExitCode::from(f.exit)
        }
    }
}
