//! Neighbor-based document recommendation over the consultation log.
//!
//! A user's neighbors are the other users whose consulted-document sets
//! overlap theirs (Jaccard-weighted); a candidate document scores the sum
//! of the similarities of the neighbors who consulted it. A content
//! fallback scores unconsulted documents by keyword overlap with the
//! user's interest profile. Both are read-only and deterministic for a
//! fixed store state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analytics::jaccard;
use crate::error::{Error, Result};
use crate::model::TimeConstraint;
use crate::store::Store;

/// One neighbor's contribution to a recommendation score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborContribution {
    pub annotator_ref: String,
    pub similarity: f64,
}

/// A document suggested to a user, with the neighbors that earned it its
/// score. Interest-based recommendations have no neighbor notion and carry
/// an empty list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub doc_ref: String,
    pub score: f64,
    pub contributing_neighbors: Vec<NeighborContribution>,
}

/// Keyword and format tallies over a user's consulted documents; each
/// consultation event contributes one count per keyword of its document
/// and one count for the document's format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterestProfile {
    pub annotator_ref: String,
    pub keyword_weights: BTreeMap<String, u64>,
    pub format_weights: BTreeMap<String, u64>,
}

fn require_user(store: &Store, user: &str) -> Result<()> {
    if store.user(user).is_none() {
        return Err(Error::UnknownUser(user.to_string()));
    }
    Ok(())
}

fn require_top_k(top_k: usize) -> Result<()> {
    if top_k == 0 {
        return Err(Error::validation("top_k", "must be at least 1"));
    }
    Ok(())
}

/// Consultation-count-weighted keyword and format tallies for one user.
pub fn interest_profile(store: &Store, user: &str) -> Result<InterestProfile> {
    interest_profile_in_window(store, user, &TimeConstraint::Any)
}

/// As [`interest_profile`], restricted to events inside the window.
pub fn interest_profile_in_window(
    store: &Store,
    user: &str,
    time: &TimeConstraint,
) -> Result<InterestProfile> {
    require_user(store, user)?;
    let mut keyword_weights: BTreeMap<String, u64> = BTreeMap::new();
    let mut format_weights: BTreeMap<String, u64> = BTreeMap::new();
    for event in store.events() {
        if event.annotator_ref != user || !time.matches(event.session_start) {
            continue;
        }
        let Some(doc) = store.document(&event.doc_ref) else {
            continue;
        };
        for keyword in &doc.keywords {
            *keyword_weights.entry(keyword.clone()).or_default() += 1;
        }
        *format_weights.entry(doc.format.to_string()).or_default() += 1;
    }
    Ok(InterestProfile {
        annotator_ref: user.to_string(),
        keyword_weights,
        format_weights,
    })
}

/// Collaborative recommendation: up to `top_k` documents the user has not
/// consulted, scored by the summed similarity of the neighbors who did,
/// ordered by score descending then document reference ascending. Empty
/// (not an error) when the user has no overlapping neighbors.
pub fn recommend(store: &Store, user: &str, top_k: usize) -> Result<Vec<Recommendation>> {
    recommend_in_window(store, user, top_k, &TimeConstraint::Any)
}

/// As [`recommend`], considering only events inside the window.
pub fn recommend_in_window(
    store: &Store,
    user: &str,
    top_k: usize,
    time: &TimeConstraint,
) -> Result<Vec<Recommendation>> {
    require_user(store, user)?;
    require_top_k(top_k)?;

    // One pass over the log builds every user's consulted set. Ordered by
    // user, so score summation order (and hence the exact float) is stable
    // across calls and processes.
    let mut sets: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for event in store.events() {
        if time.matches(event.session_start) {
            sets.entry(event.annotator_ref.as_str())
                .or_default()
                .insert(event.doc_ref.as_str());
        }
    }
    let own = sets.remove(user).unwrap_or_default();
    if own.is_empty() {
        return Ok(Vec::new());
    }

    struct Candidate<'s> {
        score: f64,
        neighbors: Vec<(&'s str, f64)>,
    }
    let mut candidates: BTreeMap<&str, Candidate> = BTreeMap::new();
    for (neighbor, theirs) in &sets {
        let similarity = jaccard(&own, theirs);
        if similarity <= 0.0 {
            continue;
        }
        for doc in theirs.difference(&own) {
            let candidate = candidates.entry(doc).or_insert(Candidate {
                score: 0.0,
                neighbors: Vec::new(),
            });
            candidate.score += similarity;
            candidate.neighbors.push((neighbor, similarity));
        }
    }

    let mut recommendations: Vec<Recommendation> = candidates
        .into_iter()
        .filter(|(_, c)| c.score > 0.0)
        .map(|(doc, mut candidate)| {
            candidate.neighbors.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("similarities are finite")
                    .then_with(|| a.0.cmp(b.0))
            });
            Recommendation {
                doc_ref: doc.to_string(),
                score: candidate.score,
                contributing_neighbors: candidate
                    .neighbors
                    .into_iter()
                    .map(|(annotator_ref, similarity)| NeighborContribution {
                        annotator_ref: annotator_ref.to_string(),
                        similarity,
                    })
                    .collect(),
            }
        })
        .collect();
    recommendations.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.doc_ref.cmp(&b.doc_ref))
    });
    recommendations.truncate(top_k);
    Ok(recommendations)
}

/// Content fallback: unconsulted documents scored by the summed profile
/// weight of the keywords they share with the user's interest profile.
/// Ordering and exclusion match [`recommend`]; a user with no events gets
/// an empty list rather than a guess.
pub fn recommend_by_interest(
    store: &Store,
    user: &str,
    top_k: usize,
) -> Result<Vec<Recommendation>> {
    recommend_by_interest_in_window(store, user, top_k, &TimeConstraint::Any)
}

/// As [`recommend_by_interest`], considering only events inside the window.
pub fn recommend_by_interest_in_window(
    store: &Store,
    user: &str,
    top_k: usize,
    time: &TimeConstraint,
) -> Result<Vec<Recommendation>> {
    require_user(store, user)?;
    require_top_k(top_k)?;

    let own = crate::analytics::consulted_documents(store, user, time);
    if own.is_empty() {
        return Ok(Vec::new());
    }
    let profile = interest_profile_in_window(store, user, time)?;

    let mut recommendations: Vec<Recommendation> = store
        .documents()
        .filter(|doc| !own.contains(doc.doc_ref.as_str()))
        .filter_map(|doc| {
            let score: u64 = doc
                .keywords
                .iter()
                .filter_map(|k| profile.keyword_weights.get(k))
                .sum();
            (score > 0).then(|| Recommendation {
                doc_ref: doc.doc_ref.clone(),
                score: score as f64,
                contributing_neighbors: Vec::new(),
            })
        })
        .collect();
    recommendations.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.doc_ref.cmp(&b.doc_ref))
    });
    recommendations.truncate(top_k);
    Ok(recommendations)
}
