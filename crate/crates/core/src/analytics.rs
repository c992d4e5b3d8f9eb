//! Aggregations over query results: consultation rankings, histograms,
//! user relatedness, per-discipline views, time-bucketed trends, and
//! keyword suggestions. Every operation is a read-only pass over
//! [`Store::query`] output and deterministic for a fixed store state.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QuerySelector, TimeConstraint};
use crate::store::Store;

// ---------------------------------------------------------------------------
// Carriers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub key: String,
    pub score: f64,
}

/// Keys ordered by score descending, key ascending on ties. `basis` is the
/// size of the population tallied (events for consultation counts,
/// annotations for objective counts, and so on).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
    pub basis: u64,
}

impl RankedList {
    fn from_scores(scores: BTreeMap<String, f64>, top_k: Option<usize>, basis: u64) -> Self {
        let mut entries: Vec<RankedEntry> = scores
            .into_iter()
            .map(|(key, score)| RankedEntry { key, score })
            .collect();
        entries.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then_with(|| a.key.cmp(&b.key))
        });
        if let Some(k) = top_k {
            entries.truncate(k);
        }
        RankedList { entries, basis }
    }

    fn from_counts(counts: BTreeMap<String, u64>, top_k: Option<usize>, basis: u64) -> Self {
        Self::from_scores(
            counts.into_iter().map(|(k, c)| (k, c as f64)).collect(),
            top_k,
            basis,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendBucket {
    #[serde(with = "crate::model::ts_second")]
    pub bucket_start: DateTime<Utc>,
    pub count: u64,
}

/// Contiguous, non-overlapping buckets aligned to epoch multiples of the
/// width; counts sum to the number of matched events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub bucket_width_seconds: i64,
    pub buckets: Vec<TrendBucket>,
}

/// Annotations of one matched event, for discipline views.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisciplineEntry {
    pub event_ref: String,
    pub bodies: Vec<String>,
}

/// User attribute an event tally can be grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserAttribute {
    SocialClass,
    AreaOfActivity,
    AgeGroup,
    Region,
}

impl UserAttribute {
    pub const ALL: [UserAttribute; 4] = [
        UserAttribute::SocialClass,
        UserAttribute::AreaOfActivity,
        UserAttribute::AgeGroup,
        UserAttribute::Region,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            UserAttribute::SocialClass => "social_class",
            UserAttribute::AreaOfActivity => "area_of_activity",
            UserAttribute::AgeGroup => "age_group",
            UserAttribute::Region => "region",
        }
    }
}

impl std::str::FromStr for UserAttribute {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|a| a.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown group attribute {s:?} (expected one of social_class, area_of_activity, age_group, region)"))
    }
}

// ---------------------------------------------------------------------------
// Stopwords
// ---------------------------------------------------------------------------

const DEFAULT_STOPWORDS: &str = include_str!("data/stopwords.txt");

/// Tokens excluded from keyword suggestions. Defaults to the built-in
/// 50-word English list; a replacement list can be loaded from a file with
/// one word per line (`#` comments and blanks ignored).
#[derive(Debug, Clone)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn from_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    fn parse(raw: &str) -> Self {
        let words = raw
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopwordList {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

// ---------------------------------------------------------------------------
// Rankings and histograms
// ---------------------------------------------------------------------------

fn require_top_k(top_k: usize) -> Result<()> {
    if top_k == 0 {
        return Err(Error::validation("top_k", "must be at least 1"));
    }
    Ok(())
}

fn time_selector(time: &TimeConstraint) -> QuerySelector {
    QuerySelector::all().with_time(*time)
}

/// Documents ranked by how often they were consulted within the window.
pub fn most_consulted_documents(
    store: &Store,
    time: &TimeConstraint,
    top_k: usize,
) -> Result<RankedList> {
    require_top_k(top_k)?;
    let events = store.query(&time_selector(time))?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for event in &events {
        *counts.entry(event.doc_ref.clone()).or_default() += 1;
    }
    Ok(RankedList::from_counts(counts, Some(top_k), events.len() as u64))
}

/// Histogram of consultation reasons over the matched events.
pub fn reason_frequencies(store: &Store, selector: &QuerySelector) -> Result<RankedList> {
    let events = store.query(selector)?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for event in &events {
        *counts.entry(event.reason.to_string()).or_default() += 1;
    }
    Ok(RankedList::from_counts(counts, None, events.len() as u64))
}

/// Histogram of annotation objectives over the annotations of matched
/// events.
pub fn annotation_objective_frequencies(
    store: &Store,
    selector: &QuerySelector,
) -> Result<RankedList> {
    let events = store.query(selector)?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut basis = 0u64;
    for event in &events {
        for annotation in &event.annotations {
            *counts.entry(annotation.objective.to_string()).or_default() += 1;
            basis += 1;
        }
    }
    Ok(RankedList::from_counts(counts, None, basis))
}

/// Users ranked by how many consultations they made within the window.
pub fn user_activity(store: &Store, time: &TimeConstraint) -> Result<RankedList> {
    let events = store.query(&time_selector(time))?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for event in &events {
        *counts.entry(event.annotator_ref.clone()).or_default() += 1;
    }
    Ok(RankedList::from_counts(counts, None, events.len() as u64))
}

/// Event counts grouped by a registry attribute of the consulting user.
/// Absent optional attributes bucket under `"unknown"`.
pub fn group_frequency(
    store: &Store,
    group_by: UserAttribute,
    time: &TimeConstraint,
) -> Result<RankedList> {
    let events = store.query(&time_selector(time))?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for event in &events {
        let key = match store.user(&event.annotator_ref) {
            Some(user) => match group_by {
                UserAttribute::SocialClass => {
                    user.social_class.clone().unwrap_or_else(|| "unknown".into())
                }
                UserAttribute::AreaOfActivity => user.area_of_activity.to_string(),
                UserAttribute::AgeGroup => user.age_group.to_string(),
                UserAttribute::Region => {
                    user.region.clone().unwrap_or_else(|| "unknown".into())
                }
            },
            None => "unknown".into(),
        };
        *counts.entry(key).or_default() += 1;
    }
    Ok(RankedList::from_counts(counts, None, events.len() as u64))
}

// ---------------------------------------------------------------------------
// User relatedness
// ---------------------------------------------------------------------------

/// Jaccard coefficient of two document sets; zero when either is empty.
pub(crate) fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    intersection as f64 / union as f64
}

/// The set of documents a user has consulted, within a time window.
pub(crate) fn consulted_documents<'s>(
    store: &'s Store,
    user: &str,
    time: &TimeConstraint,
) -> BTreeSet<&'s str> {
    store
        .events()
        .iter()
        .filter(|e| e.annotator_ref == user && time.matches(e.session_start))
        .map(|e| e.doc_ref.as_str())
        .collect()
}

/// Relatedness of two users: the Jaccard coefficient of their consulted
/// document sets. Symmetric, in [0, 1], and 1 for a user against itself
/// whenever the user has consulted anything.
pub fn user_similarity(store: &Store, user_a: &str, user_b: &str) -> Result<f64> {
    for user in [user_a, user_b] {
        if store.user(user).is_none() {
            return Err(Error::UnknownUser(user.to_string()));
        }
    }
    let a = consulted_documents(store, user_a, &TimeConstraint::Any);
    let b = consulted_documents(store, user_b, &TimeConstraint::Any);
    Ok(jaccard(&a, &b))
}

/// Other users ranked by similarity to `user`; zero-score users omitted.
/// `basis` is the number of candidate users examined.
pub fn related_users(store: &Store, user: &str, top_k: usize) -> Result<RankedList> {
    require_top_k(top_k)?;
    if store.user(user).is_none() {
        return Err(Error::UnknownUser(user.to_string()));
    }
    let own = consulted_documents(store, user, &TimeConstraint::Any);
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    let mut candidates = 0u64;
    for other in store.users() {
        if other.annotator_ref == user {
            continue;
        }
        candidates += 1;
        let theirs = consulted_documents(store, &other.annotator_ref, &TimeConstraint::Any);
        let similarity = jaccard(&own, &theirs);
        if similarity > 0.0 {
            scores.insert(other.annotator_ref.clone(), similarity);
        }
    }
    Ok(RankedList::from_scores(scores, Some(top_k), candidates))
}

// ---------------------------------------------------------------------------
// Discipline views, trends, keyword suggestions
// ---------------------------------------------------------------------------

/// Annotations on matched events whose document keywords contain the
/// (lowercased) keyword, ordered by session start. Events without
/// annotations contribute nothing.
pub fn discipline_view(
    store: &Store,
    keyword: &str,
    selector: &QuerySelector,
) -> Result<Vec<DisciplineEntry>> {
    let keyword = keyword.to_lowercase();
    let events = store.query(selector)?;
    Ok(events
        .iter()
        .filter(|e| {
            store
                .document(&e.doc_ref)
                .is_some_and(|d| d.keywords.contains(&keyword))
        })
        .filter(|e| !e.annotations.is_empty())
        .map(|e| DisciplineEntry {
            event_ref: e.event_ref.clone(),
            bodies: e.annotations.iter().map(|a| a.body.clone()).collect(),
        })
        .collect())
}

/// Consultations of one document bucketed over time. Buckets are aligned
/// to epoch multiples of the width and run contiguously from the first
/// occupied bucket to the last, zero-filled in between.
pub fn document_trend(
    store: &Store,
    doc_ref: &str,
    bucket_width_seconds: i64,
    time: &TimeConstraint,
) -> Result<TrendSeries> {
    if store.document(doc_ref).is_none() {
        return Err(Error::UnknownDocument(doc_ref.to_string()));
    }
    if bucket_width_seconds <= 0 {
        return Err(Error::validation("bucket_width_seconds", "must be positive"));
    }
    let selector = QuerySelector::all().with_doc(doc_ref).with_time(*time);
    let events = store.query(&selector)?;

    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for event in &events {
        let bucket = event
            .session_start
            .timestamp()
            .div_euclid(bucket_width_seconds)
            * bucket_width_seconds;
        *counts.entry(bucket).or_default() += 1;
    }

    let mut buckets = Vec::new();
    if let (Some(&first), Some(&last)) = (counts.keys().next(), counts.keys().next_back()) {
        let mut start = first;
        while start <= last {
            buckets.push(TrendBucket {
                bucket_start: Utc.timestamp_opt(start, 0).single().expect("aligned bucket"),
                count: counts.get(&start).copied().unwrap_or(0),
            });
            start += bucket_width_seconds;
        }
    }
    Ok(TrendSeries {
        bucket_width_seconds,
        buckets,
    })
}

/// Candidate descriptors for a document, mined from the annotation bodies
/// left on it: lowercased tokens split on non-alphanumerics, minus tokens
/// shorter than three characters and stopwords, ranked by frequency.
pub fn suggest_keywords(
    store: &Store,
    doc_ref: &str,
    top_k: usize,
    stopwords: &StopwordList,
) -> Result<RankedList> {
    require_top_k(top_k)?;
    if store.document(doc_ref).is_none() {
        return Err(Error::UnknownDocument(doc_ref.to_string()));
    }
    let selector = QuerySelector::all().with_doc(doc_ref);
    let events = store.query(&selector)?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut basis = 0u64;
    for event in events {
        for annotation in &event.annotations {
            for token in annotation
                .body
                .to_lowercase()
                .split(|c: char| !c.is_alphanumeric())
            {
                if token.chars().count() < 3 || stopwords.contains(token) {
                    continue;
                }
                *counts.entry(token.to_string()).or_default() += 1;
                basis += 1;
            }
        }
    }
    Ok(RankedList::from_counts(counts, Some(top_k), basis))
}
