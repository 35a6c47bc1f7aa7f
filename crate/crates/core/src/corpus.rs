//! Corpus ingestion: JSONL parsing, tokenization, spam pruning, and document
//! ordering.
//!
//! A corpus is a JSONL file with one `{"id": ..., "text": ...}` object per
//! line. Ingestion optionally prunes documents by spam score (strictly
//! greater than the threshold survives) and orders the surviving documents by
//! a static score so that internal document ids reflect static priority.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate document id {ext_id:?}")]
    DuplicateId { line: usize, ext_id: String },
    #[error("spam_threshold requires spam_scores")]
    ThresholdWithoutScores,
}

/// One line of the corpus file.
#[derive(Debug, Clone, Deserialize)]
pub struct RawDocument {
    #[serde(rename = "id")]
    pub ext_id: String,
    pub text: String,
}

/// Term normalization applied after lowercasing. Tokens are already
/// lowercased by [`tokenize`], so both variants currently pass tokens
/// through; the enum is the seam where a heavier stemmer would plug in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stemmer {
    #[default]
    None,
    LowercaseOnly,
}

impl Stemmer {
    fn apply(self, token: String) -> String {
        match self {
            Stemmer::None | Stemmer::LowercaseOnly => token,
        }
    }
}

/// Tokenization settings shared by the corpus and by query parsing. An index
/// remembers the configuration it was built with so queries can be tokenized
/// identically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizerConfig {
    pub stemmer: Stemmer,
    pub stopwords: Option<BTreeSet<String>>,
}

impl TokenizerConfig {
    fn keeps(&self, token: &str) -> bool {
        match &self.stopwords {
            Some(set) => !set.contains(token),
            None => true,
        }
    }
}

/// Splits `text` into maximal alphanumeric runs, lowercases them, and drops
/// stopwords.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|run| !run.is_empty())
        .map(str::to_lowercase)
        .filter(|t| config.keeps(t))
        .map(|t| config.stemmer.apply(t))
        .collect()
}

/// Tie rule applied between documents with equal static score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StaticTiebreak {
    /// Longer documents first, then ascending external id.
    #[default]
    DocLength,
    /// Ascending external id.
    ExtId,
}

#[derive(Debug, Clone, Default)]
pub struct IngestConfig {
    pub stopwords: Option<BTreeSet<String>>,
    pub stemmer: Stemmer,
    pub spam_scores: Option<HashMap<String, i64>>,
    /// Documents survive only with `spam_score > spam_threshold`. Requires
    /// `spam_scores`; documents without a score are pruned.
    pub spam_threshold: Option<i64>,
    pub static_scores: Option<HashMap<String, f64>>,
    pub static_tiebreak: StaticTiebreak,
}

impl IngestConfig {
    pub fn tokenizer(&self) -> TokenizerConfig {
        TokenizerConfig {
            stemmer: self.stemmer,
            stopwords: self.stopwords.clone(),
        }
    }
}

/// How the internal document ids of a [`Collection`] were assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocOrder {
    /// File order of the corpus.
    CorpusOrder,
    /// Descending static score; earlier ids carry higher static priority.
    StaticScoreDesc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocRecord {
    pub ext_id: String,
    pub tokens: Vec<String>,
    pub static_score: f64,
}

impl DocRecord {
    pub fn length(&self) -> u32 {
        self.tokens.len() as u32
    }
}

/// Tokenized documents in final id order. The internal id of a document is
/// its position in `docs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    pub docs: Vec<DocRecord>,
    pub ordering: DocOrder,
    pub tokenizer: TokenizerConfig,
}

impl Collection {
    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }
}

/// Counts of what ingestion dropped or ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub docs_read: usize,
    pub spam_pruned: usize,
    /// Spam score entries whose ext_id never appears in the corpus.
    pub unknown_spam_ids: usize,
    /// Static score entries whose ext_id never appears in the corpus.
    pub unknown_static_ids: usize,
}

pub fn load_corpus<P: AsRef<Path>>(
    path: P,
    config: &IngestConfig,
) -> Result<(Collection, IngestStats), IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(BufReader::new(file), config)
}

/// Reader-based body of [`load_corpus`].
pub fn parse_corpus<R: BufRead>(
    reader: R,
    config: &IngestConfig,
) -> Result<(Collection, IngestStats), IngestError> {
    if config.spam_threshold.is_some() && config.spam_scores.is_none() {
        return Err(IngestError::ThresholdWithoutScores);
    }
    let tokenizer = config.tokenizer();
    let mut stats = IngestStats::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut docs: Vec<DocRecord> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            path: format!("<line {}>", idx + 1),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument =
            serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        if !seen.insert(raw.ext_id.clone()) {
            return Err(IngestError::DuplicateId {
                line: idx + 1,
                ext_id: raw.ext_id,
            });
        }
        stats.docs_read += 1;
        if let Some(threshold) = config.spam_threshold {
            let scores = config.spam_scores.as_ref().expect("checked above");
            match scores.get(&raw.ext_id) {
                Some(&score) if score > threshold => {}
                _ => {
                    stats.spam_pruned += 1;
                    continue;
                }
            }
        }
        let static_score = config
            .static_scores
            .as_ref()
            .and_then(|m| m.get(&raw.ext_id).copied())
            .unwrap_or(0.0);
        docs.push(DocRecord {
            tokens: tokenize(&raw.text, &tokenizer),
            ext_id: raw.ext_id,
            static_score,
        });
    }

    if let Some(scores) = &config.spam_scores {
        stats.unknown_spam_ids = scores.keys().filter(|id| !seen.contains(*id)).count();
    }
    if let Some(scores) = &config.static_scores {
        stats.unknown_static_ids = scores.keys().filter(|id| !seen.contains(*id)).count();
    }

    let ordering = if config.static_scores.is_some() {
        sort_by_static(&mut docs, config.static_tiebreak);
        DocOrder::StaticScoreDesc
    } else {
        DocOrder::CorpusOrder
    };

    Ok((
        Collection {
            docs,
            ordering,
            tokenizer,
        },
        stats,
    ))
}

fn sort_by_static(docs: &mut [DocRecord], tiebreak: StaticTiebreak) {
    docs.sort_by(|a, b| {
        let by_score = b.static_score.total_cmp(&a.static_score);
        match tiebreak {
            StaticTiebreak::DocLength => by_score
                .then_with(|| b.length().cmp(&a.length()))
                .then_with(|| a.ext_id.cmp(&b.ext_id)),
            StaticTiebreak::ExtId => by_score.then_with(|| a.ext_id.cmp(&b.ext_id)),
        }
    });
}

/// Reads a stopword file: one word per line, lowercased, blanks ignored.
pub fn load_stopwords<P: AsRef<Path>>(path: P) -> Result<BTreeSet<String>, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

fn load_tsv_scores<T, P: AsRef<Path>>(
    path: P,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<HashMap<String, T>, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, value) = line.split_once('\t').ok_or_else(|| IngestError::Malformed {
            line: idx + 1,
            reason: "expected ext_id<TAB>score".into(),
        })?;
        let value = parse(value.trim()).ok_or_else(|| IngestError::Malformed {
            line: idx + 1,
            reason: format!("unparsable score {:?}", value.trim()),
        })?;
        map.insert(id.to_string(), value);
    }
    Ok(map)
}

/// Reads a spam score file: TSV `ext_id<TAB>integer`.
pub fn load_spam_scores<P: AsRef<Path>>(path: P) -> Result<HashMap<String, i64>, IngestError> {
    load_tsv_scores(path, |v| v.parse().ok())
}

/// Reads a static score file: TSV `ext_id<TAB>float`.
pub fn load_static_scores<P: AsRef<Path>>(path: P) -> Result<HashMap<String, f64>, IngestError> {
    load_tsv_scores(path, |v| v.parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(corpus: &str, config: &IngestConfig) -> (Collection, IngestStats) {
        parse_corpus(corpus.as_bytes(), config).unwrap()
    }

    fn ids(col: &Collection) -> Vec<&str> {
        col.docs.iter().map(|d| d.ext_id.as_str()).collect()
    }

    #[test]
    fn tokenize_lowercases_alphanumeric_runs() {
        let cfg = TokenizerConfig::default();
        assert_eq!(tokenize("Hello, World! 42", &cfg), ["hello", "world", "42"]);
        assert_eq!(tokenize("", &cfg), Vec::<String>::new());
        assert_eq!(tokenize("--- ---", &cfg), Vec::<String>::new());
        assert_eq!(tokenize("a-b_c", &cfg), ["a", "b", "c"]);
    }

    #[test]
    fn tokenize_drops_stopwords_after_lowercasing() {
        let cfg = TokenizerConfig {
            stopwords: Some(["the".to_string()].into()),
            ..Default::default()
        };
        assert_eq!(tokenize("The the THE cat", &cfg), ["cat"]);
    }

    #[test]
    fn corpus_order_assigns_ids_by_file_position() {
        let (col, stats) = parse(
            "{\"id\":\"x\",\"text\":\"one\"}\n{\"id\":\"y\",\"text\":\"two\"}\n{\"id\":\"z\",\"text\":\"three\"}\n",
            &IngestConfig::default(),
        );
        assert_eq!(ids(&col), ["x", "y", "z"]);
        assert_eq!(col.ordering, DocOrder::CorpusOrder);
        assert_eq!(stats.docs_read, 3);
    }

    #[test]
    fn spam_pruning_is_strictly_greater_than_threshold() {
        let config = IngestConfig {
            spam_scores: Some(
                [("a", 90), ("b", 60), ("c", 71), ("d", 70)]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            ),
            spam_threshold: Some(70),
            ..Default::default()
        };
        let corpus = ["a", "b", "c", "d"]
            .map(|id| format!("{{\"id\":\"{id}\",\"text\":\"t\"}}"))
            .join("\n");
        let (col, stats) = parse(&corpus, &config);
        assert_eq!(ids(&col), ["a", "c"]);
        assert_eq!(stats.spam_pruned, 2);
    }

    #[test]
    fn docs_without_spam_score_are_pruned() {
        let config = IngestConfig {
            spam_scores: Some([("a".to_string(), 99)].into_iter().collect()),
            spam_threshold: Some(70),
            ..Default::default()
        };
        let (col, stats) = parse(
            "{\"id\":\"a\",\"text\":\"t\"}\n{\"id\":\"b\",\"text\":\"t\"}\n",
            &config,
        );
        assert_eq!(ids(&col), ["a"]);
        assert_eq!(stats.spam_pruned, 1);
    }

    #[test]
    fn static_ordering_sorts_desc_with_length_then_ext_id_ties() {
        let config = IngestConfig {
            static_scores: Some(
                [("a", 1.0), ("b", 2.0), ("c", 2.0)]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            ),
            ..Default::default()
        };
        // a has 5 tokens, b has 9, c has 2; b and c tie on score.
        let corpus = "{\"id\":\"a\",\"text\":\"1 2 3 4 5\"}\n\
                      {\"id\":\"b\",\"text\":\"1 2 3 4 5 6 7 8 9\"}\n\
                      {\"id\":\"c\",\"text\":\"1 2\"}\n";
        let (col, _) = parse(corpus, &config);
        assert_eq!(ids(&col), ["b", "c", "a"]);
        assert_eq!(col.ordering, DocOrder::StaticScoreDesc);
    }

    #[test]
    fn static_tiebreak_ext_id_ignores_length() {
        let config = IngestConfig {
            static_scores: Some(
                [("a", 2.0), ("b", 2.0)]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            ),
            static_tiebreak: StaticTiebreak::ExtId,
            ..Default::default()
        };
        let corpus = "{\"id\":\"b\",\"text\":\"1 2 3\"}\n{\"id\":\"a\",\"text\":\"1\"}\n";
        let (col, _) = parse(corpus, &config);
        assert_eq!(ids(&col), ["a", "b"]);
    }

    #[test]
    fn missing_static_score_defaults_to_zero() {
        let config = IngestConfig {
            static_scores: Some([("b".to_string(), 1.0)].into_iter().collect()),
            ..Default::default()
        };
        let (col, _) = parse(
            "{\"id\":\"a\",\"text\":\"t\"}\n{\"id\":\"b\",\"text\":\"t\"}\n",
            &config,
        );
        assert_eq!(ids(&col), ["b", "a"]);
        assert_eq!(col.docs[1].static_score, 0.0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_corpus(
            "{\"id\":\"a\",\"text\":\"t\"}\nnot json\n".as_bytes(),
            &IngestConfig::default(),
        )
        .unwrap_err();
        match err {
            IngestError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn duplicate_ext_id_fails() {
        let err = parse_corpus(
            "{\"id\":\"a\",\"text\":\"t\"}\n{\"id\":\"a\",\"text\":\"u\"}\n".as_bytes(),
            &IngestConfig::default(),
        )
        .unwrap_err();
        match err {
            IngestError::DuplicateId { line, ext_id } => {
                assert_eq!((line, ext_id.as_str()), (2, "a"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn threshold_without_scores_is_rejected() {
        let config = IngestConfig {
            spam_threshold: Some(70),
            ..Default::default()
        };
        assert!(matches!(
            parse_corpus("".as_bytes(), &config),
            Err(IngestError::ThresholdWithoutScores)
        ));
    }

    #[test]
    fn unknown_score_ids_are_counted_not_fatal() {
        let config = IngestConfig {
            spam_scores: Some(
                [("a".to_string(), 80), ("ghost".to_string(), 99)]
                    .into_iter()
                    .collect(),
            ),
            spam_threshold: Some(70),
            static_scores: Some(
                [("a".to_string(), 1.0), ("phantom".to_string(), 2.0)]
                    .into_iter()
                    .collect(),
            ),
            ..Default::default()
        };
        let (col, stats) = parse("{\"id\":\"a\",\"text\":\"t\"}\n", &config);
        assert_eq!(ids(&col), ["a"]);
        assert_eq!(stats.unknown_spam_ids, 1);
        assert_eq!(stats.unknown_static_ids, 1);
    }

    #[test]
    fn empty_input_yields_empty_collection() {
        let (col, stats) = parse("", &IngestConfig::default());
        assert!(col.docs.is_empty());
        assert_eq!(stats, IngestStats::default());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn corpus_strategy() -> impl Strategy<Value = Vec<(String, String, i64, f64)>> {
            // (ext_id, text, spam score, static score) with unique ids.
            prop::collection::hash_map("[a-z]{1,6}", ("[a-z ]{0,20}", 0i64..100, 0.0f64..10.0), 0..40)
                .prop_map(|m| {
                    m.into_iter()
                        .map(|(id, (text, spam, fixed))| (id, text, spam, fixed))
                        .collect()
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            /// Pruning then ordering must agree with an independent
            /// filter-then-sort pass over the raw records.
            #[test]
            fn prune_and_order_match_naive_pass(docs in corpus_strategy(), threshold in 0i64..100) {
                let jsonl: String = docs
                    .iter()
                    .map(|(id, text, _, _)| {
                        format!("{}\n", serde_json::json!({ "id": id, "text": text }))
                    })
                    .collect();
                let config = IngestConfig {
                    spam_scores: Some(docs.iter().map(|(id, _, s, _)| (id.clone(), *s)).collect()),
                    spam_threshold: Some(threshold),
                    static_scores: Some(docs.iter().map(|(id, _, _, g)| (id.clone(), *g)).collect()),
                    ..Default::default()
                };
                let (col, _) = parse_corpus(jsonl.as_bytes(), &config).unwrap();

                let tokenizer = TokenizerConfig::default();
                let mut expected: Vec<(String, usize, f64)> = docs
                    .iter()
                    .filter(|(_, _, spam, _)| *spam > threshold)
                    .map(|(id, text, _, fixed)| (id.clone(), tokenize(text, &tokenizer).len(), *fixed))
                    .collect();
                expected.sort_by(|a, b| {
                    b.2.total_cmp(&a.2)
                        .then_with(|| b.1.cmp(&a.1))
                        .then_with(|| a.0.cmp(&b.0))
                });

                let got: Vec<&str> = col.docs.iter().map(|d| d.ext_id.as_str()).collect();
                let want: Vec<&str> = expected.iter().map(|(id, _, _)| id.as_str()).collect();
                prop_assert_eq!(got, want);
            }

            /// Parsing the same input twice yields identical collections.
            #[test]
            fn ingestion_is_deterministic(docs in corpus_strategy()) {
                let jsonl: String = docs
                    .iter()
                    .map(|(id, text, _, _)| {
                        format!("{}\n", serde_json::json!({ "id": id, "text": text }))
                    })
                    .collect();
                let config = IngestConfig {
                    static_scores: Some(docs.iter().map(|(id, _, _, g)| (id.clone(), *g)).collect()),
                    ..Default::default()
                };
                let (a, _) = parse_corpus(jsonl.as_bytes(), &config).unwrap();
                let (b, _) = parse_corpus(jsonl.as_bytes(), &config).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
