//! Judged effectiveness metrics over ranked lists and document sets.
//!
//! Everything here assumes TREC-style inputs: a [`Ranking`] of external
//! document ids per query and a [`Qrels`] map of graded judgments. Unjudged
//! documents are treated as non-relevant; binary relevance means grade >= 1.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("metric '{0}' takes no parameter")]
    UnexpectedParameter(String),
    #[error("metric '{kind}' requires a {what} parameter, e.g. '{example}'")]
    MissingParameter {
        kind: &'static str,
        what: &'static str,
        example: &'static str,
    },
    #[error("cannot parse '{0}' as a number")]
    BadNumber(String),
    #[error("persistence must lie strictly between 0 and 1, got {0}")]
    PersistenceOutOfRange(f64),
    #[error("cutoff must be at least 1")]
    ZeroCutoff,
    #[error("duplicate document '{doc}' in ranking for query '{qid}'")]
    DuplicateDoc { qid: String, doc: String },
}

/// Graded judgments: (qid, docno) -> grade, with grade >= 1 meaning relevant.
#[derive(Debug, Clone, Default)]
pub struct Qrels {
    grades: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment, returning the previous grade if this overrides one.
    pub fn insert(&mut self, qid: &str, docno: &str, grade: u32) -> Option<u32> {
        self.grades
            .entry(qid.to_string())
            .or_default()
            .insert(docno.to_string(), grade)
    }

    pub fn grade(&self, qid: &str, docno: &str) -> Option<u32> {
        self.grades.get(qid).and_then(|m| m.get(docno)).copied()
    }

    pub fn is_judged(&self, qid: &str, docno: &str) -> bool {
        self.grade(qid, docno).is_some()
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(String::as_str)
    }

    /// All (qid, docno, grade) triples in deterministic order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.grades.iter().flat_map(|(qid, docs)| {
            docs.iter()
                .map(move |(doc, &g)| (qid.as_str(), doc.as_str(), g))
        })
    }

    /// Number of judged documents with grade >= 1 for this query.
    pub fn relevant_count(&self, qid: &str) -> usize {
        self.grades
            .get(qid)
            .map_or(0, |m| m.values().filter(|&&g| g >= 1).count())
    }

    /// Judged relevant document ids for this query.
    pub fn relevant_docs(&self, qid: &str) -> BTreeSet<&str> {
        self.grades.get(qid).map_or_else(BTreeSet::new, |m| {
            m.iter()
                .filter(|&(_, &g)| g >= 1)
                .map(|(d, _)| d.as_str())
                .collect()
        })
    }

    /// Judged grades for this query sorted descending, for ideal-DCG bases.
    pub fn ideal_gains(&self, qid: &str) -> Vec<u32> {
        let mut gains: Vec<u32> = self
            .grades
            .get(qid)
            .map_or_else(Vec::new, |m| m.values().copied().collect());
        gains.sort_unstable_by(|a, b| b.cmp(a));
        gains
    }

    /// Largest grade anywhere in the judgment set; 0 when empty.
    pub fn max_grade(&self) -> u32 {
        self.grades
            .values()
            .flat_map(|m| m.values())
            .copied()
            .max()
            .unwrap_or(0)
    }
}

/// An ordered, duplicate-free list of external document ids for one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    qid: String,
    docs: Vec<String>,
}

impl Ranking {
    pub fn new(qid: impl Into<String>, docs: Vec<String>) -> Result<Self, MetricError> {
        let qid = qid.into();
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in &docs {
            if !seen.insert(doc.as_str()) {
                return Err(MetricError::DuplicateDoc {
                    qid,
                    doc: doc.clone(),
                });
            }
        }
        Ok(Self { qid, docs })
    }

    pub fn qid(&self) -> &str {
        &self.qid
    }

    pub fn docs(&self) -> &[String] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// A metric plus its parameters, parsed from strings like `rbp:0.8`,
/// `ndcg:20`, `ap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricSpec {
    Rbp { p: f64 },
    DcgAt { k: usize },
    NdcgAt { k: usize },
    PrecisionAt { k: usize },
    AveragePrecision,
    ReciprocalRank,
    /// `grade_max` of `None` defaults to the largest grade in the qrels.
    ErrAt { k: usize, grade_max: Option<u32> },
}

impl MetricSpec {
    pub fn parse(s: &str) -> Result<Self, MetricError> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let cutoff = |kind: &'static str, example: &'static str| -> Result<usize, MetricError> {
            let raw = arg.ok_or(MetricError::MissingParameter {
                kind,
                what: "cutoff",
                example,
            })?;
            let k: usize = raw
                .parse()
                .map_err(|_| MetricError::BadNumber(raw.to_string()))?;
            if k == 0 {
                return Err(MetricError::ZeroCutoff);
            }
            Ok(k)
        };
        match kind {
            "rbp" => {
                let raw = arg.ok_or(MetricError::MissingParameter {
                    kind: "rbp",
                    what: "persistence",
                    example: "rbp:0.8",
                })?;
                let p: f64 = raw
                    .parse()
                    .map_err(|_| MetricError::BadNumber(raw.to_string()))?;
                if !(p > 0.0 && p < 1.0) {
                    return Err(MetricError::PersistenceOutOfRange(p));
                }
                Ok(Self::Rbp { p })
            }
            "dcg" => Ok(Self::DcgAt {
                k: cutoff("dcg", "dcg:20")?,
            }),
            "ndcg" => Ok(Self::NdcgAt {
                k: cutoff("ndcg", "ndcg:20")?,
            }),
            "p" => Ok(Self::PrecisionAt {
                k: cutoff("p", "p:10")?,
            }),
            "err" => Ok(Self::ErrAt {
                k: cutoff("err", "err:20")?,
                grade_max: None,
            }),
            "ap" | "rr" => {
                if arg.is_some() {
                    return Err(MetricError::UnexpectedParameter(kind.to_string()));
                }
                Ok(if kind == "ap" {
                    Self::AveragePrecision
                } else {
                    Self::ReciprocalRank
                })
            }
            other => Err(MetricError::UnknownMetric(other.to_string())),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Rbp { p } => write!(f, "rbp:{p}"),
            Self::DcgAt { k } => write!(f, "dcg:{k}"),
            Self::NdcgAt { k } => write!(f, "ndcg:{k}"),
            Self::PrecisionAt { k } => write!(f, "p:{k}"),
            Self::AveragePrecision => write!(f, "ap"),
            Self::ReciprocalRank => write!(f, "rr"),
            Self::ErrAt { k, .. } => write!(f, "err:{k}"),
        }
    }
}

/// Per-position relevance: the grade of the document there plus whether it
/// was judged at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelEntry {
    pub grade: u32,
    pub judged: bool,
}

/// Grades down the ranking; unjudged positions carry grade 0.
pub fn relevance_vector(ranking: &Ranking, qrels: &Qrels) -> Vec<RelEntry> {
    ranking
        .docs()
        .iter()
        .map(|doc| match qrels.grade(ranking.qid(), doc) {
            Some(grade) => RelEntry { grade, judged: true },
            None => RelEntry {
                grade: 0,
                judged: false,
            },
        })
        .collect()
}

/// A metric score. `residual` is nonzero only for RBP, where it bounds the
/// mass the unevaluated tail could still contribute. `no_relevant` marks
/// queries whose qrels contain no relevant document, where the value is
/// pinned to 0 by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreResult {
    pub value: f64,
    pub residual: f64,
    pub no_relevant: bool,
}

impl ScoreResult {
    fn plain(value: f64) -> Self {
        Self {
            value,
            residual: 0.0,
            no_relevant: false,
        }
    }

    fn none_relevant() -> Self {
        Self {
            value: 0.0,
            residual: 0.0,
            no_relevant: true,
        }
    }
}

/// Scores one ranking against the qrels under the given metric.
pub fn evaluate(spec: &MetricSpec, ranking: &Ranking, qrels: &Qrels) -> ScoreResult {
    let rels = relevance_vector(ranking, qrels);
    match *spec {
        MetricSpec::Rbp { p } => rbp(&rels, p),
        MetricSpec::DcgAt { k } => ScoreResult::plain(dcg(&rels, k)),
        MetricSpec::NdcgAt { k } => ndcg(&rels, k, ranking.qid(), qrels),
        MetricSpec::PrecisionAt { k } => ScoreResult::plain(precision_at(&rels, k)),
        MetricSpec::AveragePrecision => average_precision(&rels, ranking.qid(), qrels),
        MetricSpec::ReciprocalRank => ScoreResult::plain(reciprocal_rank(&rels)),
        MetricSpec::ErrAt { k, grade_max } => {
            let gmax = grade_max.unwrap_or_else(|| qrels.max_grade());
            ScoreResult::plain(err(&rels, k, gmax))
        }
    }
}

fn rbp(rels: &[RelEntry], p: f64) -> ScoreResult {
    let mut value = 0.0;
    let mut weight = 1.0 - p;
    for e in rels {
        if e.grade >= 1 {
            value += weight;
        }
        weight *= p;
    }
    ScoreResult {
        value,
        residual: p.powi(rels.len() as i32),
        no_relevant: false,
    }
}

fn discount(position: usize) -> f64 {
    ((position + 1) as f64).log2()
}

fn dcg(rels: &[RelEntry], k: usize) -> f64 {
    rels.iter()
        .take(k)
        .enumerate()
        .map(|(i, e)| f64::from(e.grade) / discount(i + 1))
        .sum()
}

fn ndcg(rels: &[RelEntry], k: usize, qid: &str, qrels: &Qrels) -> ScoreResult {
    if qrels.relevant_count(qid) == 0 {
        return ScoreResult::none_relevant();
    }
    let ideal: f64 = qrels
        .ideal_gains(qid)
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / discount(i + 1))
        .sum();
    ScoreResult::plain(dcg(rels, k) / ideal)
}

fn precision_at(rels: &[RelEntry], k: usize) -> f64 {
    let hits = rels.iter().take(k).filter(|e| e.grade >= 1).count();
    hits as f64 / k as f64
}

fn average_precision(rels: &[RelEntry], qid: &str, qrels: &Qrels) -> ScoreResult {
    let judged_relevant = qrels.relevant_count(qid);
    if judged_relevant == 0 {
        return ScoreResult::none_relevant();
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, e) in rels.iter().enumerate() {
        if e.grade >= 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    ScoreResult::plain(sum / judged_relevant as f64)
}

fn reciprocal_rank(rels: &[RelEntry]) -> f64 {
    rels.iter()
        .position(|e| e.grade >= 1)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

fn err(rels: &[RelEntry], k: usize, grade_max: u32) -> f64 {
    let denom = 2f64.powi(grade_max as i32);
    let mut value = 0.0;
    let mut continue_prob = 1.0;
    for (i, e) in rels.iter().take(k).enumerate() {
        let stop = (2f64.powi(e.grade as i32) - 1.0) / denom;
        value += continue_prob * stop / (i + 1) as f64;
        continue_prob *= 1.0 - stop;
    }
    value
}

/// Fraction of the query's judged relevant documents contained in the set.
pub fn set_recall(doc_set: &BTreeSet<String>, qrels: &Qrels, qid: &str) -> ScoreResult {
    let relevant = qrels.relevant_docs(qid);
    if relevant.is_empty() {
        return ScoreResult::none_relevant();
    }
    let hits = relevant
        .iter()
        .filter(|d| doc_set.contains(**d))
        .count();
    ScoreResult::plain(hits as f64 / relevant.len() as f64)
}
