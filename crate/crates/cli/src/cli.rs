//! Command-line interface. Every subcommand is a thin shell over the core
//! library; `--json` emits the same compact JSON the HTTP service serves.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 I/O error.

use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use amiedot_core::error::Error as CoreError;
use amiedot_core::model::{
    ts_second, AnnotationRecord, Approach, AuthorName, ConsultationEvent, DocumentRecord,
    UserRecord,
};
use amiedot_core::store::{LogRecord, Store};
use amiedot_core::workload::{self, WorkloadSpec};

use crate::config::ServiceConfig;
use crate::wire::{self, ReportKind, ReportParams, SelectorParams};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{0}")]
    Usage(String),
    #[error("{rejected} record(s) rejected during import")]
    ImportRejections { rejected: usize },
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(CoreError::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::Io(_)) | CliError::Core(CoreError::CorruptLog { .. }) => 2,
            _ => 1,
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

#[derive(Parser, Debug)]
#[command(
    name = "amiedot",
    version,
    about = "Annotation-event store: log who used which document when, query the log, report on it, recommend from it"
)]
pub struct Cli {
    /// Path of the annotation log (JSON Lines).
    #[arg(long, global = true, env = "AMIEDOT_LOG")]
    pub log: Option<PathBuf>,
    /// Flat key=value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Enforce that a document cannot be held by two users at once.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Emit machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// Replacement stopword list (one word per line).
    #[arg(long, global = true)]
    pub stopwords: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Import a JSON-Lines batch of users, documents, and events.
    Import {
        file: PathBuf,
    },
    /// Register one user, from flags or stdin JSON.
    AddUser(AddUserArgs),
    /// Register one document, from flags or stdin JSON.
    AddDoc(AddDocArgs),
    /// Record one consultation event, from flags or stdin JSON.
    AddEvent(AddEventArgs),
    /// List events matching user/document/time constraints; the first
    /// output line is the tracking-projection shape code.
    Query(SelectorArgs),
    /// Run a named report: most-consulted | reasons | objectives |
    /// activity | groups --by | trend --doc --bucket | keywords --doc |
    /// discipline --keyword.
    Report(ReportArgs),
    /// Recommend documents for a user.
    Recommend {
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Score by keyword overlap with the user's interest profile
        /// instead of by neighbors.
        #[arg(long)]
        interest: bool,
    },
    /// Generate a synthetic workload fixture (JSON Lines).
    Gen(GenArgs),
    /// Print store counts.
    Stats,
    /// Serve the HTTP API over the same log.
    Serve {
        /// host:port to listen on.
        #[arg(long, env = "AMIEDOT_BIND")]
        bind: Option<String>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SelectorArgs {
    /// Fix the user axis to one annotator reference.
    #[arg(long)]
    pub user: Option<String>,
    /// Fix the document axis to one document reference.
    #[arg(long)]
    pub doc: Option<String>,
    /// Fix the time axis to one second (RFC 3339).
    #[arg(long)]
    pub at: Option<String>,
    /// Start (inclusive) of a time range (RFC 3339).
    #[arg(long)]
    pub from: Option<String>,
    /// End (exclusive) of a time range (RFC 3339).
    #[arg(long)]
    pub to: Option<String>,
}

impl SelectorArgs {
    fn params(&self) -> SelectorParams {
        SelectorParams {
            user: self.user.clone(),
            doc: self.doc.clone(),
            at: self.at.clone(),
            from: self.from.clone(),
            to: self.to.clone(),
        }
    }
}

#[derive(Args, Debug)]
pub struct AddUserArgs {
    /// Read the record as one JSON object from stdin.
    #[arg(long)]
    pub stdin: bool,
    #[arg(long = "ref")]
    pub annotator_ref: Option<String>,
    #[arg(long)]
    pub first_name: Option<String>,
    #[arg(long)]
    pub last_name: Option<String>,
    #[arg(long)]
    pub email: Option<String>,
    #[arg(long)]
    pub postal_address: Option<String>,
    #[arg(long)]
    pub region: Option<String>,
    /// One of: under-18, 18-25, 26-40, 41-60, over-60.
    #[arg(long)]
    pub age_group: Option<String>,
    #[arg(long)]
    pub country: Option<String>,
    #[arg(long)]
    pub social_class: Option<String>,
    /// teaching | research | student | general-public | other:<label>.
    #[arg(long)]
    pub area: Option<String>,
}

#[derive(Args, Debug)]
pub struct AddDocArgs {
    /// Read the record as one JSON object from stdin.
    #[arg(long)]
    pub stdin: bool,
    #[arg(long = "ref")]
    pub doc_ref: Option<String>,
    #[arg(long)]
    pub title: Option<String>,
    /// Repeatable.
    #[arg(long = "keyword")]
    pub keywords: Vec<String>,
    /// "First Last", repeatable.
    #[arg(long = "author")]
    pub authors: Vec<String>,
    /// Publication date, YYYY-MM-DD.
    #[arg(long)]
    pub published: Option<String>,
    /// pdf | word | html | text | other:<label>.
    #[arg(long, default_value = "pdf")]
    pub format: String,
    #[arg(long = "abstract")]
    pub abstract_text: Option<String>,
}

#[derive(Args, Debug)]
pub struct AddEventArgs {
    /// Read the record as one JSON object from stdin.
    #[arg(long)]
    pub stdin: bool,
    /// Generated when omitted.
    #[arg(long)]
    pub event_ref: Option<String>,
    #[arg(long)]
    pub user: Option<String>,
    #[arg(long)]
    pub doc: Option<String>,
    /// Session start (RFC 3339); now when omitted.
    #[arg(long)]
    pub at: Option<String>,
    #[arg(long)]
    pub duration: Option<i64>,
    /// new-annotation | follow-up.
    #[arg(long, default_value = "new-annotation")]
    pub approach: String,
    /// Why the document was consulted (e.g. academic-reading).
    #[arg(long)]
    pub reason: Option<String>,
    #[arg(long)]
    pub context: Option<String>,
    /// Free comment; attaching any annotation flag records an annotation.
    #[arg(long)]
    pub annotation_body: Option<String>,
    #[arg(long)]
    pub annotation_type: Option<String>,
    #[arg(long)]
    pub annotation_location: Option<String>,
    /// Why the annotation was made (e.g. summary).
    #[arg(long)]
    pub annotation_objective: Option<String>,
    #[arg(long)]
    pub annotation_ref: Option<String>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// most-consulted | reasons | objectives | activity | groups | trend |
    /// keywords | discipline.
    pub name: String,
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Grouping attribute for the groups report: social_class |
    /// area_of_activity | age_group | region.
    #[arg(long)]
    pub by: Option<String>,
    /// Bucket width in seconds for the trend report.
    #[arg(long)]
    pub bucket: Option<i64>,
    /// Document keyword for the discipline report.
    #[arg(long)]
    pub keyword: Option<String>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub users: usize,
    #[arg(long, default_value_t = 200)]
    pub docs: usize,
    #[arg(long, default_value_t = 2000)]
    pub events: usize,
    #[arg(long, default_value_t = 2)]
    pub communities: usize,
    #[arg(long, default_value = "2024-01-01T00:00:00Z")]
    pub from: String,
    #[arg(long, default_value = "2025-01-01T00:00:00Z")]
    pub to: String,
    #[arg(long, default_value_t = 0.35)]
    pub annotation_rate: f64,
    /// Inject this many lending conflicts into the stream.
    #[arg(long, default_value_t = 0)]
    pub plant_overlaps: usize,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    config: ServiceConfig,
    json: bool,
}

impl Context {
    fn open_store(&self) -> Result<Store, CliError> {
        let store = Store::open(&self.config.log_path)?;
        for warning in store.warnings() {
            eprintln!("warning: {warning}");
        }
        Ok(store)
    }

    fn stopwords(&self) -> Result<amiedot_core::analytics::StopwordList, CliError> {
        match &self.config.stopword_path {
            Some(path) => Ok(amiedot_core::analytics::StopwordList::from_file(path)?),
            None => Ok(amiedot_core::analytics::StopwordList::default()),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut config = ServiceConfig::load(cli.config.as_deref())?;
    if let Some(log) = cli.log {
        config.log_path = log;
    }
    if cli.strict {
        config.strict_lending = true;
    }
    if let Some(stopwords) = cli.stopwords {
        config.stopword_path = Some(stopwords);
    }
    let ctx = Context {
        config,
        json: cli.json,
    };

    match cli.command {
        Command::Import { file } => import(&ctx, &file),
        Command::AddUser(args) => add_user(&ctx, args),
        Command::AddDoc(args) => add_doc(&ctx, args),
        Command::AddEvent(args) => add_event(&ctx, args),
        Command::Query(args) => query(&ctx, &args),
        Command::Report(args) => report(&ctx, &args),
        Command::Recommend {
            user,
            top,
            interest,
        } => recommend(&ctx, &user, top, interest),
        Command::Gen(args) => gen(&args),
        Command::Stats => stats(&ctx),
        Command::Serve { bind } => {
            let mut config = ctx.config;
            if let Some(bind) = bind {
                config.bind_address = bind;
            }
            config.validate()?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(crate::server::serve(config)).map_err(Into::into)
        }
    }
}

// ---------------------------------------------------------------------------
// Import
// ---------------------------------------------------------------------------

#[derive(Debug, serde::Serialize)]
struct RejectedLine {
    line: usize,
    error: String,
    detail: String,
}

#[derive(Debug, serde::Serialize)]
struct ImportReport {
    users: u64,
    documents: u64,
    events: u64,
    rejected: Vec<RejectedLine>,
}

fn import(ctx: &Context, file: &std::path::Path) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(file)?;
    let mut store = ctx.open_store()?;
    let mut report = ImportReport {
        users: 0,
        documents: 0,
        events: 0,
        rejected: Vec::new(),
    };
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str::<LogRecord>(line)
            .map_err(|e| CoreError::validation("record", e.to_string()))
            .and_then(|record| match record {
                LogRecord::User(user) => store.register_user(user).map(|()| &mut report.users),
                LogRecord::Document(doc) => {
                    store.register_document(doc).map(|()| &mut report.documents)
                }
                LogRecord::Event(event) => store
                    .ingest_event(event, ctx.config.strict_lending)
                    .map(|()| &mut report.events),
            });
        match outcome {
            Ok(counter) => *counter += 1,
            Err(e @ (CoreError::Io(_) | CoreError::CorruptLog { .. })) => return Err(e.into()),
            Err(e) => report.rejected.push(RejectedLine {
                line: idx + 1,
                error: e.code().to_string(),
                detail: e.to_string(),
            }),
        }
    }
    if ctx.json {
        println!("{}", serde_json::to_string(&report).expect("report serializes"));
    } else {
        println!(
            "imported {} user(s), {} document(s), {} event(s)",
            report.users, report.documents, report.events
        );
        for r in &report.rejected {
            eprintln!("line {}: {} ({})", r.line, r.detail, r.error);
        }
    }
    if report.rejected.is_empty() {
        Ok(())
    } else {
        Err(CliError::ImportRejections {
            rejected: report.rejected.len(),
        })
    }
}

// ---------------------------------------------------------------------------
// Single-record adds
// ---------------------------------------------------------------------------

fn read_stdin_record<T: serde::de::DeserializeOwned>() -> Result<T, CliError> {
    let mut raw = String::new();
    std::io::stdin().read_to_string(&mut raw)?;
    serde_json::from_str(&raw).map_err(|e| usage(format!("invalid record on stdin: {e}")))
}

fn require_flag<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| usage(format!("--{flag} is required (or use --stdin)")))
}

fn add_user(ctx: &Context, args: AddUserArgs) -> Result<(), CliError> {
    let record: UserRecord = if args.stdin {
        read_stdin_record()?
    } else {
        UserRecord {
            annotator_ref: require_flag(args.annotator_ref, "ref")?,
            first_name: require_flag(args.first_name, "first-name")?,
            last_name: require_flag(args.last_name, "last-name")?,
            email: require_flag(args.email, "email")?,
            postal_address: args.postal_address,
            region: args.region,
            age_group: require_flag(args.age_group, "age-group")?
                .parse()
                .map_err(usage)?,
            country: args.country,
            social_class: args.social_class,
            area_of_activity: require_flag(args.area, "area")?.parse().map_err(usage)?,
        }
    };
    let mut store = ctx.open_store()?;
    let reference = record.annotator_ref.clone();
    store.register_user(record)?;
    emit_registered(ctx, "registered", &reference);
    Ok(())
}

fn add_doc(ctx: &Context, args: AddDocArgs) -> Result<(), CliError> {
    let record: DocumentRecord = if args.stdin {
        read_stdin_record()?
    } else {
        let authors = args
            .authors
            .iter()
            .map(|raw| match raw.rsplit_once(' ') {
                Some((first, last)) => Ok(AuthorName {
                    first_name: first.to_string(),
                    last_name: last.to_string(),
                }),
                None => Err(usage(format!(
                    "--author {raw:?}: expected \"First Last\""
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let publication_date = args
            .published
            .map(|raw| {
                raw.parse::<chrono::NaiveDate>()
                    .map_err(|e| usage(format!("--published {raw:?}: {e}")))
            })
            .transpose()?;
        DocumentRecord {
            doc_ref: require_flag(args.doc_ref, "ref")?,
            title: require_flag(args.title, "title")?,
            keywords: args.keywords.into_iter().collect(),
            authors,
            publication_date,
            format: args.format.parse().map_err(usage)?,
            abstract_text: args.abstract_text,
        }
    };
    let mut store = ctx.open_store()?;
    let reference = record.doc_ref.clone();
    store.register_document(record)?;
    emit_registered(ctx, "registered", &reference);
    Ok(())
}

fn add_event(ctx: &Context, args: AddEventArgs) -> Result<(), CliError> {
    let record: ConsultationEvent = if args.stdin {
        read_stdin_record()?
    } else {
        let has_annotation = args.annotation_body.is_some()
            || args.annotation_type.is_some()
            || args.annotation_location.is_some()
            || args.annotation_objective.is_some()
            || args.annotation_ref.is_some();
        let annotations = if has_annotation {
            vec![AnnotationRecord {
                annotation_ref: args.annotation_ref.unwrap_or_else(|| "a1".to_string()),
                a_type: args
                    .annotation_type
                    .as_deref()
                    .unwrap_or("text")
                    .parse()
                    .map_err(usage)?,
                location: args
                    .annotation_location
                    .as_deref()
                    .unwrap_or("left-margin")
                    .parse()
                    .map_err(usage)?,
                objective: args
                    .annotation_objective
                    .as_deref()
                    .unwrap_or("for-information")
                    .parse()
                    .map_err(usage)?,
                body: args.annotation_body.unwrap_or_default(),
            }]
        } else {
            Vec::new()
        };
        let session_start = match args.at {
            Some(raw) => ts_second::parse(&raw).map_err(usage)?,
            None => amiedot_core::model::truncate_to_second(chrono::Utc::now()),
        };
        ConsultationEvent {
            event_ref: args
                .event_ref
                .unwrap_or_else(|| format!("e-{}", uuid::Uuid::new_v4())),
            context_ref: args.context,
            annotator_ref: require_flag(args.user, "user")?,
            doc_ref: require_flag(args.doc, "doc")?,
            session_start,
            duration_seconds: args.duration,
            approach: args.approach.parse::<Approach>().map_err(usage)?,
            reason: require_flag(args.reason, "reason")?.parse().map_err(usage)?,
            annotations,
        }
    };
    let mut store = ctx.open_store()?;
    let reference = record.event_ref.clone();
    store.ingest_event(record, ctx.config.strict_lending)?;
    emit_registered(ctx, "ingested", &reference);
    Ok(())
}

fn emit_registered(ctx: &Context, verb: &str, reference: &str) {
    if ctx.json {
        println!("{}", serde_json::json!({ verb: reference }));
    } else {
        println!("{verb} {reference}");
    }
}

// ---------------------------------------------------------------------------
// Query, reports, recommendations, stats
// ---------------------------------------------------------------------------

fn query(ctx: &Context, args: &SelectorArgs) -> Result<(), CliError> {
    let store = ctx.open_store()?;
    let response = wire::run_query(&store, &args.params())?;
    if ctx.json {
        println!(
            "{}",
            serde_json::to_string(&response).expect("response serializes")
        );
    } else {
        println!("{}", response.shape);
        print!("{}", wire::render_events(&response.events));
    }
    Ok(())
}

fn report(ctx: &Context, args: &ReportArgs) -> Result<(), CliError> {
    let kind = ReportKind::parse(&args.name).ok_or_else(|| {
        usage(format!(
            "unknown report {:?}; expected one of: {}",
            args.name,
            ReportKind::NAMES.join(", ")
        ))
    })?;
    let params = ReportParams {
        selector: args.selector.params(),
        top: args.top,
        by: args.by.clone(),
        bucket: args.bucket,
        keyword: args.keyword.clone(),
    };
    let store = ctx.open_store()?;
    let output = wire::run_report(&store, kind, &params, &ctx.stopwords()?)?;
    if ctx.json {
        println!("{}", output.to_json());
    } else {
        print!("{}", output.to_text(kind));
    }
    Ok(())
}

fn recommend(ctx: &Context, user: &str, top: usize, interest: bool) -> Result<(), CliError> {
    let store = ctx.open_store()?;
    let recs = if interest {
        amiedot_core::recommend::recommend_by_interest(&store, user, top)?
    } else {
        amiedot_core::recommend::recommend(&store, user, top)?
    };
    if ctx.json {
        println!("{}", serde_json::to_string(&recs).expect("recs serialize"));
    } else {
        print!("{}", wire::render_recommendations(&recs));
    }
    Ok(())
}

fn stats(ctx: &Context) -> Result<(), CliError> {
    let store = ctx.open_store()?;
    let stats = store.stats();
    if ctx.json {
        println!("{}", serde_json::to_string(&stats).expect("stats serialize"));
    } else {
        print!("{}", wire::render_stats(&stats));
    }
    Ok(())
}

fn gen(args: &GenArgs) -> Result<(), CliError> {
    let spec = WorkloadSpec {
        seed: args.seed,
        n_users: args.users,
        n_docs: args.docs,
        n_events: args.events,
        n_communities: args.communities,
        time_span: (
            ts_second::parse(&args.from).map_err(usage)?,
            ts_second::parse(&args.to).map_err(usage)?,
        ),
        annotation_rate: args.annotation_rate,
    };
    let mut workload = workload::generate(&spec)?;
    let planted = workload::plant_overlaps(&mut workload, args.plant_overlaps, spec.seed)?;
    let jsonl = workload::to_jsonl(&workload);
    match &args.out {
        Some(path) => {
            std::fs::write(path, &jsonl)?;
            eprintln!(
                "wrote {} user(s), {} document(s), {} event(s) ({} planted conflict(s)) to {}",
                workload.users.len(),
                workload.documents.len(),
                workload.events.len(),
                planted.len(),
                path.display()
            );
        }
        None => print!("{jsonl}"),
    }
    Ok(())
}
