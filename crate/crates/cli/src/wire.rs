//! Response shaping shared by the CLI and the HTTP service, so both emit
//! byte-identical JSON for the same store state. Every JSON body here is
//! the compact serde encoding of the value the core library returns.

use serde::Serialize;

use amiedot_core::analytics::{
    self, DisciplineEntry, RankedList, StopwordList, TrendSeries, UserAttribute,
};
use amiedot_core::error::{Error, Result};
use amiedot_core::model::{ts_second, ConsultationEvent, QuerySelector, TimeConstraint};
use amiedot_core::recommend::Recommendation;
use amiedot_core::store::{Store, StoreStats};

// ---------------------------------------------------------------------------
// Selector parameters
// ---------------------------------------------------------------------------

/// The raw user/doc/at/from/to strings taken from CLI flags or HTTP query
/// parameters.
#[derive(Debug, Clone, Default)]
pub struct SelectorParams {
    pub user: Option<String>,
    pub doc: Option<String>,
    pub at: Option<String>,
    pub from: Option<String>,
    pub to: Option<String>,
}

impl SelectorParams {
    pub fn time_constraint(&self) -> Result<TimeConstraint> {
        if self.at.is_some() && (self.from.is_some() || self.to.is_some()) {
            return Err(Error::validation(
                "at",
                "a point constraint cannot be combined with from/to",
            ));
        }
        if let Some(at) = &self.at {
            let point = ts_second::parse(at).map_err(|e| Error::validation("at", e))?;
            return Ok(TimeConstraint::At(point));
        }
        match (&self.from, &self.to) {
            (None, None) => Ok(TimeConstraint::Any),
            (from, to) => {
                let start = match from {
                    Some(raw) => ts_second::parse(raw).map_err(|e| Error::validation("from", e))?,
                    None => chrono::DateTime::<chrono::Utc>::MIN_UTC,
                };
                let end = match to {
                    Some(raw) => ts_second::parse(raw).map_err(|e| Error::validation("to", e))?,
                    None => amiedot_core::model::truncate_to_second(
                        chrono::DateTime::<chrono::Utc>::MAX_UTC,
                    ),
                };
                TimeConstraint::range(start, end)
            }
        }
    }

    pub fn selector(&self) -> Result<QuerySelector> {
        Ok(QuerySelector::from_parts(
            self.user.clone(),
            self.doc.clone(),
            self.time_constraint()?,
        ))
    }
}

// ---------------------------------------------------------------------------
// Query response
// ---------------------------------------------------------------------------

/// Shape code first, then the matching events.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResponse {
    pub shape: String,
    pub events: Vec<ConsultationEvent>,
}

pub fn run_query(store: &Store, params: &SelectorParams) -> Result<QueryResponse> {
    let selector = params.selector()?;
    let shape = amiedot_core::store::classify_selector(&selector);
    let events = store.query(&selector)?.into_iter().cloned().collect();
    Ok(QueryResponse {
        shape: shape.code().to_string(),
        events,
    })
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    MostConsulted,
    Reasons,
    Objectives,
    Activity,
    Groups,
    Trend,
    Keywords,
    Discipline,
}

impl ReportKind {
    pub const NAMES: [&'static str; 8] = [
        "most-consulted",
        "reasons",
        "objectives",
        "activity",
        "groups",
        "trend",
        "keywords",
        "discipline",
    ];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "most-consulted" => Some(Self::MostConsulted),
            "reasons" => Some(Self::Reasons),
            "objectives" => Some(Self::Objectives),
            "activity" => Some(Self::Activity),
            "groups" => Some(Self::Groups),
            "trend" => Some(Self::Trend),
            "keywords" => Some(Self::Keywords),
            "discipline" => Some(Self::Discipline),
            _ => None,
        }
    }

    fn key_header(&self) -> &'static str {
        match self {
            Self::MostConsulted => "document",
            Self::Reasons => "reason",
            Self::Objectives => "objective",
            Self::Activity => "user",
            Self::Groups => "group",
            Self::Keywords => "token",
            Self::Trend | Self::Discipline => "key",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportParams {
    pub selector: SelectorParams,
    pub top: usize,
    pub by: Option<String>,
    pub bucket: Option<i64>,
    pub keyword: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportOutput {
    Ranked(RankedList),
    Trend(TrendSeries),
    Discipline(Vec<DisciplineEntry>),
}

fn required<'a, T>(value: &'a Option<T>, flag: &str, report: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::validation(flag, format!("required for the {report} report")))
}

pub fn run_report(
    store: &Store,
    kind: ReportKind,
    params: &ReportParams,
    stopwords: &StopwordList,
) -> Result<ReportOutput> {
    let time = params.selector.time_constraint()?;
    match kind {
        ReportKind::MostConsulted => Ok(ReportOutput::Ranked(
            analytics::most_consulted_documents(store, &time, params.top)?,
        )),
        ReportKind::Reasons => Ok(ReportOutput::Ranked(analytics::reason_frequencies(
            store,
            &params.selector.selector()?,
        )?)),
        ReportKind::Objectives => Ok(ReportOutput::Ranked(
            analytics::annotation_objective_frequencies(store, &params.selector.selector()?)?,
        )),
        ReportKind::Activity => {
            Ok(ReportOutput::Ranked(analytics::user_activity(store, &time)?))
        }
        ReportKind::Groups => {
            let by = required(&params.by, "by", "groups")?;
            let attribute: UserAttribute =
                by.parse().map_err(|e: String| Error::validation("by", e))?;
            Ok(ReportOutput::Ranked(analytics::group_frequency(
                store, attribute, &time,
            )?))
        }
        ReportKind::Trend => {
            let doc = required(&params.selector.doc, "doc", "trend")?;
            let bucket = *required(&params.bucket, "bucket", "trend")?;
            Ok(ReportOutput::Trend(analytics::document_trend(
                store, doc, bucket, &time,
            )?))
        }
        ReportKind::Keywords => {
            let doc = required(&params.selector.doc, "doc", "keywords")?;
            Ok(ReportOutput::Ranked(analytics::suggest_keywords(
                store,
                doc,
                params.top,
                stopwords,
            )?))
        }
        ReportKind::Discipline => {
            let keyword = required(&params.keyword, "keyword", "discipline")?;
            Ok(ReportOutput::Discipline(analytics::discipline_view(
                store,
                keyword,
                &params.selector.selector()?,
            )?))
        }
    }
}

impl ReportOutput {
    /// Compact JSON of the inner value, exactly as the library serializes
    /// it.
    pub fn to_json(&self) -> String {
        match self {
            Self::Ranked(list) => serde_json::to_string(list),
            Self::Trend(series) => serde_json::to_string(series),
            Self::Discipline(entries) => serde_json::to_string(entries),
        }
        .expect("report values serialize")
    }

    pub fn to_text(&self, kind: ReportKind) -> String {
        match self {
            Self::Ranked(list) => render_ranked(kind.key_header(), list),
            Self::Trend(series) => render_trend(series),
            Self::Discipline(entries) => render_discipline(entries),
        }
    }
}

// ---------------------------------------------------------------------------
// Plain-text tables
// ---------------------------------------------------------------------------

pub fn fmt_score(score: f64) -> String {
    if score.fract() == 0.0 && score.abs() < 1e15 {
        format!("{}", score as i64)
    } else {
        format!("{score:.6}")
    }
}

pub fn render_ranked(key_header: &str, list: &RankedList) -> String {
    if list.entries.is_empty() {
        return format!("(no entries; basis {})\n", list.basis);
    }
    let width = list
        .entries
        .iter()
        .map(|e| e.key.len())
        .chain([key_header.len()])
        .max()
        .unwrap_or(0);
    let mut out = format!("{key_header:<width$}  score\n");
    for entry in &list.entries {
        out.push_str(&format!("{:<width$}  {}\n", entry.key, fmt_score(entry.score)));
    }
    out.push_str(&format!("basis: {}\n", list.basis));
    out
}

pub fn render_trend(series: &TrendSeries) -> String {
    if series.buckets.is_empty() {
        return "(no events)\n".to_string();
    }
    let mut out = format!("bucket ({}s wide)    count\n", series.bucket_width_seconds);
    for bucket in &series.buckets {
        out.push_str(&format!(
            "{}  {}\n",
            bucket
                .bucket_start
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            bucket.count
        ));
    }
    out
}

pub fn render_discipline(entries: &[DisciplineEntry]) -> String {
    if entries.is_empty() {
        return "(no annotations)\n".to_string();
    }
    let mut out = String::new();
    for entry in entries {
        out.push_str(&format!("{}  {}\n", entry.event_ref, entry.bodies.join(" | ")));
    }
    out
}

pub fn render_events(events: &[ConsultationEvent]) -> String {
    let mut out = String::new();
    for event in events {
        out.push_str(&format!(
            "{}  {}  user={} doc={} reason={} annotations={}\n",
            event
                .session_start
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            event.event_ref,
            event.annotator_ref,
            event.doc_ref,
            event.reason,
            event.annotations.len()
        ));
    }
    out
}

pub fn render_recommendations(recs: &[Recommendation]) -> String {
    if recs.is_empty() {
        return "(no recommendations)\n".to_string();
    }
    let mut out = String::new();
    for rec in recs {
        let neighbors = rec
            .contributing_neighbors
            .iter()
            .map(|n| format!("{}({})", n.annotator_ref, fmt_score(n.similarity)))
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!(
            "{}  score={}  neighbors=[{}]\n",
            rec.doc_ref,
            fmt_score(rec.score),
            neighbors
        ));
    }
    out
}

pub fn render_stats(stats: &StoreStats) -> String {
    let mut out = format!(
        "users: {}\ndocuments: {}\nevents: {}\nannotations: {}\n",
        stats.n_users, stats.n_docs, stats.n_events, stats.n_annotations
    );
    if let Some(span) = &stats.time_span {
        out.push_str(&format!(
            "span: {} .. {}\n",
            span.min.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            span.max.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        ));
    }
    out
}
