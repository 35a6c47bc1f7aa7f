//! Candidate-generation filters over an inverted index.
//!
//! Four filters share the index: a Boolean conjunction with early exit
//! ([`boolean_and`]), a Boolean conjunction ranked by static score
//! ([`boolean_static_heap`]), document-at-a-time WAND with an optional
//! aggressiveness factor ([`wand_topk`]), and a scored Boolean variant that
//! ranks only full conjunctive matches ([`scored_boolean_wand`]).

mod boolean;
mod wand;

pub use boolean::{boolean_and, boolean_static_heap, ScoreSource};
pub use wand::{scored_boolean_wand, wand_topk};

use std::str::FromStr;

use crate::index::{IndexError, InvertedIndex};

/// Ordered doc ids in index order.
pub type DocSet = Vec<u32>;

/// `(doc_id, score)` pairs in descending score order, ties by ascending id.
pub type ScoredList = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub qid: String,
    pub terms: Vec<String>,
}

impl Query {
    pub fn new(qid: impl Into<String>, terms: Vec<String>) -> Self {
        Query {
            qid: qid.into(),
            terms,
        }
    }

    /// Terms in first-occurrence order with duplicates removed. Duplicate
    /// query terms carry no extra weight (k3 = 0).
    pub fn distinct_terms(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.terms
            .iter()
            .map(String::as_str)
            .filter(|t| seen.insert(*t))
            .collect()
    }
}

/// Work done by one filter invocation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchCounters {
    /// Documents fully scored.
    pub docs_scored: u64,
    /// Cursor advance operations (`successor` / `f_search` calls that had to
    /// move).
    pub postings_advanced: u64,
    /// Heap admissions, including while the heap was filling.
    pub heap_inserts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMethod {
    BooleanAnd,
    BooleanStaticHeap,
    Wand,
    ScoredBooleanWand,
}

impl FilterMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterMethod::BooleanAnd => "boolean_and",
            FilterMethod::BooleanStaticHeap => "boolean_static_heap",
            FilterMethod::Wand => "wand",
            FilterMethod::ScoredBooleanWand => "scored_boolean_wand",
        }
    }
}

impl std::fmt::Display for FilterMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "boolean_and" => Ok(FilterMethod::BooleanAnd),
            "boolean_static_heap" => Ok(FilterMethod::BooleanStaticHeap),
            "wand" => Ok(FilterMethod::Wand),
            "scored_boolean_wand" => Ok(FilterMethod::ScoredBooleanWand),
            other => Err(format!(
                "unknown filter method {other:?} (expected boolean_and, \
                 boolean_static_heap, wand, or scored_boolean_wand)"
            )),
        }
    }
}

/// A filter choice at a given depth. `theta` only affects [`FilterMethod::Wand`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub method: FilterMethod,
    pub k: usize,
    pub theta: f64,
}

impl FilterSpec {
    pub fn new(method: FilterMethod, k: usize) -> Self {
        FilterSpec {
            method,
            k,
            theta: 1.0,
        }
    }
}

/// Uniform filter output: documents in emission order with the score each
/// would carry in a run file. Boolean filters have no natural score and get
/// `-rank` so that descending score preserves their emission order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub docs: Vec<u32>,
    pub scores: Vec<f64>,
    pub counters: SearchCounters,
}

/// Runs the filter described by `spec`. The static-heap method draws its
/// ordering key from the doc table's static scores.
pub fn run_filter(index: &InvertedIndex, spec: &FilterSpec, query: &Query) -> FilterOutput {
    match spec.method {
        FilterMethod::BooleanAnd => from_doc_set(boolean_and(index, query, spec.k)),
        FilterMethod::BooleanStaticHeap => from_doc_set(boolean_static_heap(
            index,
            query,
            spec.k,
            ScoreSource::StaticScoreFile,
        )),
        FilterMethod::Wand => {
            let (scored, counters) = wand_topk(index, query, spec.k, spec.theta);
            from_scored(scored, counters)
        }
        FilterMethod::ScoredBooleanWand => {
            let (scored, counters) = scored_boolean_wand(index, query, spec.k);
            from_scored(scored, counters)
        }
    }
}

fn from_doc_set(docs: DocSet) -> FilterOutput {
    let scores = (1..=docs.len()).map(|rank| -(rank as f64)).collect();
    FilterOutput {
        docs,
        scores,
        counters: SearchCounters::default(),
    }
}

fn from_scored(scored: ScoredList, counters: SearchCounters) -> FilterOutput {
    FilterOutput {
        docs: scored.iter().map(|&(d, _)| d).collect(),
        scores: scored.iter().map(|&(_, s)| s).collect(),
        counters,
    }
}

/// Scores one document directly against a query: the sum of BM25
/// contributions over the distinct query terms it contains.
pub fn bm25_score(index: &InvertedIndex, doc: u32, query: &Query) -> Result<f64, IndexError> {
    let dl = index.doc_length(doc)?;
    let mut score = 0.0;
    for term in query.distinct_terms() {
        let Some(list) = index.postings(term) else {
            continue;
        };
        let mut cursor = list.cursor();
        if cursor.f_search(doc) == Some(doc) {
            score += index.contribution(index.idf(list.df()), cursor.tf(), dl);
        }
    }
    Ok(score)
}
