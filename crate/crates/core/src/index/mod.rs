//! Inverted index construction, BM25 term statistics, and persistence.

mod codec;
mod storage;

pub use codec::{Cursor, PostingsList, BLOCK_LEN};
pub use storage::{load_index, save_index};

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::corpus::{Collection, TokenizerConfig};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("invalid bm25 parameters: {0}")]
    InvalidParams(&'static str),
    #[error("doc id {0} out of range (index holds {1} documents)")]
    DocOutOfRange(u32, u32),
    #[error("failed to access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checksum failure in section {0:?} (file corrupt or truncated)")]
    Checksum(&'static str),
    #[error("malformed section {section:?}: {reason}")]
    Corrupt {
        section: &'static str,
        reason: String,
    },
}

/// BM25 parameters. `k3` is accepted for interface parity with the classic
/// formulation but must be zero: duplicate query terms are deduplicated and
/// weighted once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub k3: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 0.9,
            b: 0.4,
            k3: 0.0,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), IndexError> {
        if !(self.k1 > 0.0) {
            return Err(IndexError::InvalidParams("k1 must be positive"));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(IndexError::InvalidParams("b must lie in [0, 1]"));
        }
        if self.k3 != 0.0 {
            return Err(IndexError::InvalidParams("k3 must be 0"));
        }
        Ok(())
    }
}

/// Per-document table entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DocEntry {
    pub ext_id: String,
    pub length: u32,
    pub static_score: f64,
}

/// Immutable inverted index over a [`Collection`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub params: Bm25Params,
    pub doc_table: Vec<DocEntry>,
    pub avg_dl: f64,
    pub tokenizer: TokenizerConfig,
    lexicon: BTreeMap<String, PostingsList>,
}

impl InvertedIndex {
    pub fn num_docs(&self) -> u32 {
        self.doc_table.len() as u32
    }

    pub fn num_terms(&self) -> usize {
        self.lexicon.len()
    }

    pub fn postings(&self, term: &str) -> Option<&PostingsList> {
        self.lexicon.get(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &PostingsList)> {
        self.lexicon.iter().map(|(t, p)| (t.as_str(), p))
    }

    pub fn doc_length(&self, doc: u32) -> Result<u32, IndexError> {
        self.doc_table
            .get(doc as usize)
            .map(|d| d.length)
            .ok_or(IndexError::DocOutOfRange(doc, self.num_docs()))
    }

    /// Robertson-Sparck Jones idf, clamped below at zero so a term occurring
    /// in most documents cannot subtract from a score.
    pub fn idf(&self, df: u32) -> f64 {
        let n = f64::from(self.num_docs());
        let df = f64::from(df);
        ((n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    /// BM25 contribution of one term occurrence count within a document.
    pub fn contribution(&self, idf: f64, tf: u32, dl: u32) -> f64 {
        let tf = f64::from(tf);
        let norm = if self.avg_dl > 0.0 {
            1.0 - self.params.b + self.params.b * f64::from(dl) / self.avg_dl
        } else {
            1.0
        };
        idf * tf * (self.params.k1 + 1.0) / (tf + self.params.k1 * norm)
    }

    pub(crate) fn from_parts(
        params: Bm25Params,
        doc_table: Vec<DocEntry>,
        avg_dl: f64,
        tokenizer: TokenizerConfig,
        lexicon: BTreeMap<String, PostingsList>,
    ) -> Self {
        InvertedIndex {
            params,
            doc_table,
            avg_dl,
            tokenizer,
            lexicon,
        }
    }
}

/// Builds the inverted index for `collection`. Construction is deterministic:
/// repeated builds over the same collection serialize to identical bytes.
pub fn build_index(
    collection: &Collection,
    params: Bm25Params,
) -> Result<InvertedIndex, IndexError> {
    params.validate()?;
    let doc_table: Vec<DocEntry> = collection
        .docs
        .iter()
        .map(|d| DocEntry {
            ext_id: d.ext_id.clone(),
            length: d.length(),
            static_score: d.static_score,
        })
        .collect();
    let total_len: u64 = doc_table.iter().map(|d| u64::from(d.length)).sum();
    let avg_dl = if doc_table.is_empty() {
        0.0
    } else {
        total_len as f64 / doc_table.len() as f64
    };

    let mut accum: BTreeMap<&str, Vec<(u32, u32)>> = BTreeMap::new();
    let mut counts: HashMap<&str, u32> = HashMap::new();
    for (doc_id, doc) in collection.docs.iter().enumerate() {
        counts.clear();
        for token in &doc.tokens {
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
        for (&term, &tf) in &counts {
            accum.entry(term).or_default().push((doc_id as u32, tf));
        }
    }

    let mut index = InvertedIndex {
        params,
        doc_table,
        avg_dl,
        tokenizer: collection.tokenizer.clone(),
        lexicon: BTreeMap::new(),
    };
    for (term, mut postings) in accum {
        // Appends happened in doc order per term, so ids are ascending; the
        // sort is a cheap no-op guard.
        postings.sort_unstable_by_key(|&(doc, _)| doc);
        let mut list = PostingsList::from_postings(&postings);
        let idf = index.idf(list.df());
        list.upper_bound = postings
            .iter()
            .map(|&(doc, tf)| index.contribution(idf, tf, index.doc_table[doc as usize].length))
            .fold(0.0, f64::max);
        index.lexicon.insert(term.to_string(), list);
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::collection_of;
    use approx::assert_abs_diff_eq;

    fn postings_of(index: &InvertedIndex, term: &str) -> Vec<(u32, u32)> {
        index.postings(term).unwrap().postings()
    }

    #[test]
    fn builds_the_two_document_example() {
        let index = build_index(&collection_of(&["a b a", "b c"]), Bm25Params::default()).unwrap();
        assert_eq!(index.num_docs(), 2);
        assert_eq!(index.avg_dl, 2.5);
        assert_eq!(postings_of(&index, "a"), [(0, 2)]);
        assert_eq!(postings_of(&index, "b"), [(0, 1), (1, 1)]);
        assert_eq!(postings_of(&index, "c"), [(1, 1)]);
        assert_eq!(index.num_terms(), 3);
    }

    #[test]
    fn empty_collection_builds_empty_index() {
        let index = build_index(&collection_of(&[]), Bm25Params::default()).unwrap();
        assert_eq!(index.num_docs(), 0);
        assert_eq!(index.num_terms(), 0);
        assert_eq!(index.avg_dl, 0.0);
    }

    #[test]
    fn repeated_terms_accumulate_tf() {
        let index = build_index(&collection_of(&["x x x"]), Bm25Params::default()).unwrap();
        assert_eq!(postings_of(&index, "x"), [(0, 3)]);
    }

    #[test]
    fn rejects_bad_params() {
        let col = collection_of(&["a"]);
        for params in [
            Bm25Params {
                k1: 0.0,
                ..Default::default()
            },
            Bm25Params {
                b: 1.5,
                ..Default::default()
            },
            Bm25Params {
                k3: 1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                build_index(&col, params),
                Err(IndexError::InvalidParams(_))
            ));
        }
    }

    #[test]
    fn idf_clamps_at_zero_for_very_common_terms() {
        let index = build_index(
            &collection_of(&["t", "t", "t", "u"]),
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(index.idf(3), 0.0);
        assert!(index.idf(1) > 0.0);
    }

    #[test]
    fn upper_bounds_match_exhaustive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let docs: Vec<String> = (0..60)
            .map(|_| {
                let len = rng.gen_range(1..30);
                (0..len)
                    .map(|_| format!("w{}", rng.gen_range(0..25)))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let texts: Vec<&str> = docs.iter().map(String::as_str).collect();
        let index = build_index(&collection_of(&texts), Bm25Params::default()).unwrap();
        for (_, list) in index.terms() {
            let idf = index.idf(list.df());
            let max = list
                .postings()
                .iter()
                .map(|&(doc, tf)| index.contribution(idf, tf, index.doc_table[doc as usize].length))
                .fold(0.0, f64::max);
            assert_abs_diff_eq!(list.upper_bound(), max, epsilon = 1e-9);
        }
    }

    #[test]
    fn contribution_handles_empty_collection_average() {
        let index = build_index(&collection_of(&["", ""]), Bm25Params::default()).unwrap();
        assert_eq!(index.avg_dl, 0.0);
        assert!(index.contribution(1.0, 1, 0).is_finite());
    }
}
