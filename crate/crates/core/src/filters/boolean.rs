//! Boolean conjunction filters.
//!
//! Both filters run the same adaptive document-at-a-time intersection: the
//! cursors are kept sorted by candidate, the laggard list is advanced past
//! the target with `successor`, and every other list is forwarded with
//! `f_search`. A document is emitted only when all candidates align.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::ControlFlow;

use crate::index::{Cursor, InvertedIndex};

use super::{DocSet, Query, SearchCounters};

/// Cursor plus the per-term data scoring callers need at a match.
pub(super) struct ConjCursor<'a> {
    pub cursor: Cursor<'a>,
    pub idf: f64,
    /// Position of the term in the query. Scoring callers sum contributions
    /// in this order so a document's score never depends on cursor history.
    pub term_rank: usize,
}

/// Drives the intersection of `cursors`, invoking `on_match` with every
/// aligned document (all cursors positioned on it) until a list is exhausted
/// or the callback breaks. Counts cursor movement into `counters`.
pub(super) fn drive_conjunction<'a>(
    cursors: &mut Vec<ConjCursor<'a>>,
    counters: &mut SearchCounters,
    mut on_match: impl FnMut(u32, &[ConjCursor<'a>], &mut SearchCounters) -> ControlFlow<()>,
) {
    if cursors.is_empty() {
        return;
    }
    loop {
        if cursors.iter().any(|c| c.cursor.candidate().is_none()) {
            return;
        }
        // Descending by candidate: the laggard sits last.
        cursors.sort_by(|a, b| b.cursor.candidate().cmp(&a.cursor.candidate()));
        let x = cursors.last().unwrap().cursor.candidate().unwrap();
        if cursors[0].cursor.candidate() == Some(x) {
            if on_match(x, cursors, counters).is_break() {
                return;
            }
        }
        let last = cursors.len() - 1;
        counters.postings_advanced += 1;
        let Some(next) = cursors[last].cursor.successor(x) else {
            return;
        };
        for c in &mut cursors[..last] {
            if c.cursor.candidate().unwrap() < next {
                counters.postings_advanced += 1;
                c.cursor.f_search(next);
            }
        }
    }
}

/// Opens one cursor per distinct query term. `None` when the query is empty
/// or any term is missing from the lexicon, in which case the conjunction is
/// empty by definition.
pub(super) fn conjunction_cursors<'a>(
    index: &'a InvertedIndex,
    query: &Query,
) -> Option<Vec<ConjCursor<'a>>> {
    let terms = query.distinct_terms();
    if terms.is_empty() {
        return None;
    }
    let mut cursors = Vec::with_capacity(terms.len());
    for (term_rank, term) in terms.into_iter().enumerate() {
        let list = index.postings(term)?;
        cursors.push(ConjCursor {
            cursor: list.cursor(),
            idf: index.idf(list.df()),
            term_rank,
        });
    }
    Some(cursors)
}

/// Conjunctive Boolean filter: the first `k` documents containing every
/// query term, in index order. Exits as soon as `k` matches are found.
pub fn boolean_and(index: &InvertedIndex, query: &Query, k: usize) -> DocSet {
    let Some(mut cursors) = conjunction_cursors(index, query) else {
        return Vec::new();
    };
    if k == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut counters = SearchCounters::default();
    drive_conjunction(&mut cursors, &mut counters, |doc, _, _| {
        out.push(doc);
        if out.len() == k {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    out
}

/// Where [`boolean_static_heap`] reads its ordering key from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreSource {
    /// The index order itself: earlier documents rank higher. On a
    /// collection ordered by descending static score this reproduces
    /// [`boolean_and`] while still traversing the whole conjunction.
    IndexOrder,
    /// The static score column of the doc table.
    StaticScoreFile,
}

#[derive(PartialEq)]
struct HeapEntry {
    key: f64,
    doc: u32,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    /// The max element is the *worst* entry: lowest key, then largest doc id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| self.doc.cmp(&other.doc))
    }
}

/// Conjunctive Boolean filter ranked by static score: traverses the whole
/// conjunction and keeps the `k` best documents under `(key desc, doc asc)`
/// in a bounded min-heap. Returns them in index order.
pub fn boolean_static_heap(
    index: &InvertedIndex,
    query: &Query,
    k: usize,
    source: ScoreSource,
) -> DocSet {
    let Some(mut cursors) = conjunction_cursors(index, query) else {
        return Vec::new();
    };
    if k == 0 {
        return Vec::new();
    }
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
    let mut counters = SearchCounters::default();
    drive_conjunction(&mut cursors, &mut counters, |doc, _, _| {
        let key = match source {
            ScoreSource::IndexOrder => -f64::from(doc),
            ScoreSource::StaticScoreFile => index.doc_table[doc as usize].static_score,
        };
        heap.push(HeapEntry { key, doc });
        if heap.len() > k {
            heap.pop();
        }
        ControlFlow::Continue(())
    });
    let mut out: Vec<u32> = heap.into_iter().map(|e| e.doc).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, Bm25Params, InvertedIndex};
    use crate::testutil::{collection_of, collection_with_scores};

    /// Ten documents over terms `s1`, `s2`, `s3` placed so the three postings
    /// lists are {1,3,5,7}, {3,4,5,9}, and {1,3,5,6}.
    fn worked_example_index() -> InvertedIndex {
        let lists: [&[u32]; 3] = [&[1, 3, 5, 7], &[3, 4, 5, 9], &[1, 3, 5, 6]];
        let docs: Vec<String> = (0..10u32)
            .map(|doc| {
                lists
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.contains(&doc))
                    .map(|(i, _)| format!("s{}", i + 1))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let texts: Vec<&str> = docs.iter().map(String::as_str).collect();
        build_index(&collection_of(&texts), Bm25Params::default()).unwrap()
    }

    fn query(terms: &[&str]) -> Query {
        Query::new("q", terms.iter().map(|t| t.to_string()).collect())
    }

    #[test]
    fn intersects_the_three_list_example() {
        let index = worked_example_index();
        assert_eq!(
            boolean_and(&index, &query(&["s1", "s2", "s3"]), 10),
            [3, 5]
        );
    }

    #[test]
    fn early_exit_stops_at_k() {
        let index = worked_example_index();
        assert_eq!(boolean_and(&index, &query(&["s1", "s2", "s3"]), 1), [3]);
    }

    #[test]
    fn missing_term_or_empty_query_yields_empty() {
        let index = worked_example_index();
        assert!(boolean_and(&index, &query(&["s1", "nope"]), 10).is_empty());
        assert!(boolean_and(&index, &query(&[]), 10).is_empty());
    }

    #[test]
    fn single_term_returns_list_prefix() {
        let index = worked_example_index();
        assert_eq!(boolean_and(&index, &query(&["s2"]), 3), [3, 4, 5]);
        assert_eq!(boolean_and(&index, &query(&["s2"]), 100), [3, 4, 5, 9]);
    }

    #[test]
    fn matches_naive_intersection_on_random_lists() {
        use rand::{Rng, SeedableRng};
        use std::collections::BTreeSet;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for round in 0..300 {
            let num_lists = rng.gen_range(2..=4);
            let lists: Vec<BTreeSet<u32>> = (0..num_lists)
                .map(|_| {
                    let len = rng.gen_range(0..60);
                    (0..len).map(|_| rng.gen_range(0..200u32)).collect()
                })
                .collect();
            let universe: BTreeSet<u32> = lists.iter().flatten().copied().collect();
            let max_doc = universe.iter().next_back().copied().unwrap_or(0);
            let docs: Vec<String> = (0..=max_doc)
                .map(|doc| {
                    lists
                        .iter()
                        .enumerate()
                        .filter(|(_, l)| l.contains(&doc))
                        .map(|(i, _)| format!("r{i}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            let texts: Vec<&str> = docs.iter().map(String::as_str).collect();
            let index = build_index(&collection_of(&texts), Bm25Params::default()).unwrap();
            let q = Query::new("q", (0..num_lists).map(|i| format!("r{i}")).collect());

            let expected: Vec<u32> = lists
                .iter()
                .skip(1)
                .fold(lists[0].clone(), |acc, l| acc.intersection(l).copied().collect())
                .into_iter()
                .collect();
            let got = boolean_and(&index, &q, usize::MAX);
            assert_eq!(got, expected, "round {round}");

            let k = rng.gen_range(0..=expected.len() + 1);
            let truncated = boolean_and(&index, &q, k);
            assert_eq!(truncated, expected[..k.min(expected.len())], "round {round} k {k}");
        }
    }

    #[test]
    fn static_heap_keeps_the_top_static_scores() {
        // Matches {3, 5, 9} carry static scores 0.1, 0.9, 0.5.
        let mut docs: Vec<(&str, f64)> = (0..10).map(|_| ("filler", 0.0)).collect();
        docs[3] = ("m", 0.1);
        docs[5] = ("m", 0.9);
        docs[9] = ("m", 0.5);
        let index =
            build_index(&collection_with_scores(&docs), Bm25Params::default()).unwrap();
        let got = boolean_static_heap(&index, &query(&["m"]), 2, ScoreSource::StaticScoreFile);
        assert_eq!(got, [5, 9], "top two by static score, in index order");
    }

    #[test]
    fn static_heap_returns_all_matches_when_k_is_large() {
        let mut docs: Vec<(&str, f64)> = (0..10).map(|_| ("filler", 0.0)).collect();
        docs[3] = ("m", 0.1);
        docs[5] = ("m", 0.9);
        docs[9] = ("m", 0.5);
        let index =
            build_index(&collection_with_scores(&docs), Bm25Params::default()).unwrap();
        let got = boolean_static_heap(&index, &query(&["m"]), 10, ScoreSource::StaticScoreFile);
        assert_eq!(got, [3, 5, 9]);
    }

    #[test]
    fn static_heap_breaks_score_ties_toward_lower_ids() {
        let docs: Vec<(&str, f64)> = vec![("m", 0.5), ("m", 0.5), ("m", 0.5)];
        let index =
            build_index(&collection_with_scores(&docs), Bm25Params::default()).unwrap();
        let got = boolean_static_heap(&index, &query(&["m"]), 2, ScoreSource::StaticScoreFile);
        assert_eq!(got, [0, 1]);
    }

    #[test]
    fn index_order_source_agrees_with_boolean_and_on_preordered_input() {
        let index = worked_example_index();
        let q = query(&["s1", "s3"]);
        for k in [1, 2, 3, 10] {
            assert_eq!(
                boolean_static_heap(&index, &q, k, ScoreSource::IndexOrder),
                boolean_and(&index, &q, k)
            );
        }
    }
}
