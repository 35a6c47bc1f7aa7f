//! Helpers shared by unit tests across modules.

use crate::corpus::{tokenize, Collection, DocOrder, DocRecord, TokenizerConfig};

/// Builds an in-memory collection from whitespace-separated token strings;
/// document `i` gets ext id `d{i}` and static score 0.
pub(crate) fn collection_of(docs: &[&str]) -> Collection {
    collection_with_scores(&docs.iter().map(|&d| (d, 0.0)).collect::<Vec<_>>())
}

/// Like [`collection_of`] but with explicit static scores. Ids stay in slice
/// order regardless of the scores.
pub(crate) fn collection_with_scores(docs: &[(&str, f64)]) -> Collection {
    let tokenizer = TokenizerConfig::default();
    Collection {
        docs: docs
            .iter()
            .enumerate()
            .map(|(i, &(text, static_score))| DocRecord {
                ext_id: format!("d{i}"),
                tokens: tokenize(text, &tokenizer),
                static_score,
            })
            .collect(),
        ordering: DocOrder::CorpusOrder,
        tokenizer,
    }
}
