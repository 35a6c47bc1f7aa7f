//! Judgment-free comparison of two rankings or document sets.
//!
//! The centrepiece is the maximized effectiveness difference: the largest
//! score gap any admissible binary judgment set could produce between two
//! rankings under a weighted-precision metric. Because those metrics are
//! linear in the per-document relevance bits, the maximum decomposes per
//! document, which keeps the computation linear; [`med_bruteforce`]
//! enumerates judgment sets outright and serves as the oracle for that
//! shortcut. Rank-biased overlap and set-overlap coefficients round out the
//! toolkit.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::metrics::{MetricError, MetricSpec, Ranking};

const BRUTEFORCE_UNIVERSE_LIMIT: usize = 20;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("metric '{0}' cannot weight positions here; use rbp:P, dcg:K, or p:K")]
    UnsupportedProfile(String),
    #[error("persistence must lie strictly between 0 and 1, got {0}")]
    PersistenceOutOfRange(f64),
    #[error("document '{0}' is both forced relevant and forced nonrelevant")]
    OverlappingConstraints(String),
    #[error("union of {0} documents exceeds the brute-force limit of {BRUTEFORCE_UNIVERSE_LIMIT}")]
    UniverseTooLarge(usize),
    #[error("overlap denominator is empty: {0}")]
    EmptySet(&'static str),
}

/// Per-position weight of a weighted-precision metric. Weights are
/// nonnegative and non-increasing in the position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightProfile {
    Rbp { p: f64 },
    DcgAt { k: usize },
    PrecisionAt { k: usize },
}

impl WeightProfile {
    /// Accepts the `rbp:P`, `dcg:K`, and `p:K` subset of the metric syntax.
    pub fn parse(s: &str) -> Result<Self, SimilarityError> {
        match MetricSpec::parse(s)? {
            MetricSpec::Rbp { p } => Ok(Self::Rbp { p }),
            MetricSpec::DcgAt { k } => Ok(Self::DcgAt { k }),
            MetricSpec::PrecisionAt { k } => Ok(Self::PrecisionAt { k }),
            _ => Err(SimilarityError::UnsupportedProfile(s.to_string())),
        }
    }

    /// Weight of 1-based position `i`.
    pub fn weight(&self, i: usize) -> f64 {
        debug_assert!(i >= 1);
        match *self {
            Self::Rbp { p } => (1.0 - p) * p.powi(i as i32 - 1),
            Self::DcgAt { k } => {
                if i <= k {
                    1.0 / ((i + 1) as f64).log2()
                } else {
                    0.0
                }
            }
            Self::PrecisionAt { k } => {
                if i <= k {
                    1.0 / k as f64
                } else {
                    0.0
                }
            }
        }
    }
}

/// Partial judgments pinning documents relevant or nonrelevant before the
/// adversarial maximization runs over the rest.
#[derive(Debug, Clone, Default)]
pub struct MedConstraints {
    pub forced_relevant: BTreeSet<String>,
    pub forced_nonrelevant: BTreeSet<String>,
}

impl MedConstraints {
    pub fn none() -> Self {
        Self::default()
    }

    fn validate(&self) -> Result<(), SimilarityError> {
        if let Some(doc) = self
            .forced_relevant
            .intersection(&self.forced_nonrelevant)
            .next()
        {
            return Err(SimilarityError::OverlappingConstraints(doc.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AOverB,
    BOverA,
}

#[derive(Debug, Clone)]
pub struct MedResult {
    pub value: f64,
    pub direction: Direction,
    /// Judgment set realising the maximum; documents outside it are
    /// nonrelevant. Re-scoring both rankings with it reproduces `value`.
    pub witness: BTreeSet<String>,
}

/// Weighted-precision score of a ranking under a hypothesised relevant set.
pub fn judged_score(ranking: &Ranking, relevant: &BTreeSet<String>, profile: WeightProfile) -> f64 {
    ranking
        .docs()
        .iter()
        .enumerate()
        .filter(|(_, doc)| relevant.contains(*doc))
        .map(|(i, _)| profile.weight(i + 1))
        .sum()
}

/// Maximized effectiveness difference between two rankings.
///
/// For every document, relevance changes the score gap by exactly
/// `delta(d) = w_a(d) - w_b(d)`, the weight difference of its positions
/// (0 when absent from a list). Each direction therefore takes the forced
/// documents as given and marks a free document relevant iff its delta
/// pushes that direction; the larger directional sum wins.
pub fn med(
    a: &Ranking,
    b: &Ranking,
    profile: WeightProfile,
    constraints: &MedConstraints,
) -> Result<MedResult, SimilarityError> {
    constraints.validate()?;

    let mut delta: BTreeMap<&str, f64> = BTreeMap::new();
    for (i, doc) in a.docs().iter().enumerate() {
        *delta.entry(doc).or_insert(0.0) += profile.weight(i + 1);
    }
    for (i, doc) in b.docs().iter().enumerate() {
        *delta.entry(doc).or_insert(0.0) -= profile.weight(i + 1);
    }

    let mut gain_a = 0.0;
    let mut gain_b = 0.0;
    let mut free_a: BTreeSet<String> = BTreeSet::new();
    let mut free_b: BTreeSet<String> = BTreeSet::new();
    for (doc, &d) in &delta {
        if constraints.forced_relevant.contains(*doc) {
            gain_a += d;
            gain_b -= d;
        } else if !constraints.forced_nonrelevant.contains(*doc) {
            if d > 0.0 {
                gain_a += d;
                free_a.insert(doc.to_string());
            } else if d < 0.0 {
                gain_b -= d;
                free_b.insert(doc.to_string());
            }
        }
    }

    let (value, direction, mut witness) = if gain_a >= gain_b {
        (gain_a, Direction::AOverB, free_a)
    } else {
        (gain_b, Direction::BOverA, free_b)
    };
    witness.extend(constraints.forced_relevant.iter().cloned());
    Ok(MedResult {
        value,
        direction,
        witness,
    })
}

/// Exhaustive oracle for [`med`]: scores both rankings under every
/// admissible judgment subset of the union and returns the largest absolute
/// difference. Only viable for unions of at most 20 documents.
pub fn med_bruteforce(
    a: &Ranking,
    b: &Ranking,
    profile: WeightProfile,
    constraints: &MedConstraints,
) -> Result<f64, SimilarityError> {
    constraints.validate()?;

    let universe: BTreeSet<&str> = a
        .docs()
        .iter()
        .chain(b.docs().iter())
        .map(String::as_str)
        .collect();
    if universe.len() > BRUTEFORCE_UNIVERSE_LIMIT {
        return Err(SimilarityError::UniverseTooLarge(universe.len()));
    }

    let forced: Vec<&str> = universe
        .iter()
        .copied()
        .filter(|d| constraints.forced_relevant.contains(*d))
        .collect();
    let free: Vec<&str> = universe
        .iter()
        .copied()
        .filter(|d| {
            !constraints.forced_relevant.contains(*d)
                && !constraints.forced_nonrelevant.contains(*d)
        })
        .collect();

    let score = |ranking: &Ranking, relevant: &BTreeSet<&str>| -> f64 {
        ranking
            .docs()
            .iter()
            .enumerate()
            .filter(|(_, doc)| relevant.contains(doc.as_str()))
            .map(|(i, _)| profile.weight(i + 1))
            .sum()
    };

    let mut best = 0.0f64;
    for mask in 0u32..(1u32 << free.len()) {
        let mut relevant: BTreeSet<&str> = forced.iter().copied().collect();
        for (j, doc) in free.iter().enumerate() {
            if mask & (1 << j) != 0 {
                relevant.insert(doc);
            }
        }
        let diff = (score(a, &relevant) - score(b, &relevant)).abs();
        best = best.max(diff);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RboResult {
    /// Mass from the evaluated prefix of depth `min(|a|, |b|)`.
    pub base: f64,
    /// Weight mass beyond the evaluated prefix.
    pub residual: f64,
    /// Base plus the tail extrapolated at the depth-d agreement ratio.
    pub ext: f64,
}

/// Rank-biased overlap of two rankings, evaluated to the shorter depth.
pub fn rbo(a: &Ranking, b: &Ranking, p: f64) -> Result<RboResult, SimilarityError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SimilarityError::PersistenceOutOfRange(p));
    }
    let d = a.len().min(b.len());
    if d == 0 {
        return Ok(RboResult {
            base: 0.0,
            residual: 1.0,
            ext: 0.0,
        });
    }

    let mut seen_a: BTreeSet<&str> = BTreeSet::new();
    let mut seen_b: BTreeSet<&str> = BTreeSet::new();
    let mut agreement = 0usize;
    let mut base = 0.0;
    let mut weight = 1.0 - p;
    for i in 0..d {
        let doc_a = a.docs()[i].as_str();
        let doc_b = b.docs()[i].as_str();
        seen_a.insert(doc_a);
        if seen_b.contains(doc_a) {
            agreement += 1;
        }
        seen_b.insert(doc_b);
        if seen_a.contains(doc_b) {
            agreement += 1;
        }
        base += weight * agreement as f64 / (i + 1) as f64;
        weight *= p;
    }

    let residual = p.powi(d as i32);
    let ext = base + residual * agreement as f64 / d as f64;
    Ok(RboResult {
        base,
        residual,
        ext,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapVariant {
    Jaccard,
    MinDenominator,
    CoverageAInB,
}

impl OverlapVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "jaccard" => Some(Self::Jaccard),
            "min_denominator" => Some(Self::MinDenominator),
            "coverage_a_in_b" => Some(Self::CoverageAInB),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Jaccard => "jaccard",
            Self::MinDenominator => "min_denominator",
            Self::CoverageAInB => "coverage_a_in_b",
        }
    }
}

/// Set agreement under the chosen denominator.
pub fn overlap(
    a: &BTreeSet<String>,
    b: &BTreeSet<String>,
    variant: OverlapVariant,
) -> Result<f64, SimilarityError> {
    let inter = a.intersection(b).count() as f64;
    match variant {
        OverlapVariant::Jaccard => {
            if a.is_empty() && b.is_empty() {
                return Err(SimilarityError::EmptySet("both sets"));
            }
            let union = (a.len() + b.len()) as f64 - inter;
            Ok(inter / union)
        }
        OverlapVariant::MinDenominator => {
            if a.is_empty() || b.is_empty() {
                return Err(SimilarityError::EmptySet("one of the sets"));
            }
            Ok(inter / a.len().min(b.len()) as f64)
        }
        OverlapVariant::CoverageAInB => {
            if a.is_empty() {
                return Err(SimilarityError::EmptySet("set a"));
            }
            Ok(inter / a.len() as f64)
        }
    }
}
