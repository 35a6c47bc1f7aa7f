//! Deterministic synthetic corpora and query logs.
//!
//! Desk-scale stand-ins for web-sized collections: documents draw their
//! terms from a Zipf-distributed vocabulary, and queries sample terms
//! proportionally to document frequency so frequent terms show up the way
//! they do in real logs. Everything is seeded, so a given configuration
//! always produces byte-identical output.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::corpus::Collection;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub num_docs: usize,
    pub vocab_size: usize,
    /// Inclusive bounds on tokens per document.
    pub doc_len_range: (usize, usize),
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_docs: 20_000,
            vocab_size: 4_000,
            doc_len_range: (60, 180),
            zipf_exponent: 1.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QueryConfig {
    pub num_queries: usize,
    /// Every query's terms must jointly match at least this many documents.
    pub min_union: usize,
    pub seed: u64,
}

/// Samples an index proportionally to the weights behind `cumulative`,
/// where `cumulative[i]` is the sum of weights `0..=i`.
fn sample_cumulative(rng: &mut ChaCha12Rng, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("nonempty weights");
    let draw = rng.gen_range(0.0..total);
    cumulative.partition_point(|&c| c <= draw)
}

/// Generates `(ext_id, text)` pairs. Term `w0000` is the most frequent and
/// frequencies fall off as rank^-s.
pub fn generate_corpus(config: &SynthConfig) -> Vec<(String, String)> {
    assert!(config.vocab_size > 0 && config.num_docs > 0);
    assert!(config.doc_len_range.0 >= 1 && config.doc_len_range.0 <= config.doc_len_range.1);
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    let mut cumulative = Vec::with_capacity(config.vocab_size);
    let mut total = 0.0;
    for rank in 1..=config.vocab_size {
        total += 1.0 / (rank as f64).powf(config.zipf_exponent);
        cumulative.push(total);
    }

    let width = (config.vocab_size.max(2) - 1).to_string().len();
    let terms: Vec<String> = (0..config.vocab_size)
        .map(|i| format!("w{i:0width$}"))
        .collect();

    let (lo, hi) = config.doc_len_range;
    (0..config.num_docs)
        .map(|doc| {
            let len = rng.gen_range(lo..=hi);
            let text = (0..len)
                .map(|_| terms[sample_cumulative(&mut rng, &cumulative)].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            (format!("d{doc:06}"), text)
        })
        .collect()
}

/// Generates a query log over the collection's vocabulary. Term choice is
/// df-weighted; query lengths are drawn from a fixed 1-4 term mix. A query
/// is accepted once its discriminative terms (those matching under half the
/// collection, hence carrying positive clamped idf) jointly match at least
/// `min_union` documents, so every query guarantees a ranked pool of that
/// size no matter how many stopword-like terms it also carries.
pub fn generate_queries(collection: &Collection, config: &QueryConfig) -> Vec<(String, String)> {
    let mut doc_sets: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for (doc, record) in collection.docs.iter().enumerate() {
        for token in &record.tokens {
            doc_sets.entry(token).or_default().insert(doc as u32);
        }
    }
    let terms: Vec<&str> = doc_sets.keys().copied().collect();
    assert!(!terms.is_empty(), "collection has no tokens");
    let mut cumulative = Vec::with_capacity(terms.len());
    let mut total = 0.0;
    for term in &terms {
        total += doc_sets[*term].len() as f64;
        cumulative.push(total);
    }

    let num_docs = collection.num_docs();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut queries = Vec::with_capacity(config.num_queries);
    for qid in 0..config.num_queries {
        let len = match rng.gen_range(0..100) {
            0..=9 => 1,
            10..=39 => 2,
            40..=74 => 3,
            _ => 4,
        };
        let mut accepted: Option<Vec<&str>> = None;
        for _ in 0..10_000 {
            let picked: Vec<&str> = (0..len)
                .map(|_| terms[sample_cumulative(&mut rng, &cumulative)])
                .collect();
            let mut scored_union: BTreeSet<u32> = BTreeSet::new();
            for t in &picked {
                if doc_sets[*t].len() * 2 < num_docs {
                    scored_union.extend(&doc_sets[*t]);
                }
            }
            if scored_union.len() >= config.min_union {
                accepted = Some(picked);
                break;
            }
        }
        let picked = accepted.unwrap_or_else(|| {
            panic!("no viable {len}-term query found; lower min_union ({})", config.min_union)
        });
        queries.push((format!("q{qid:03}"), picked.join(" ")));
    }
    queries
}
