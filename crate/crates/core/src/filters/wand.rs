//! WAND: weak-AND document-at-a-time retrieval with upper-bound pruning.
//!
//! Cursors are kept sorted by candidate. The pivot is the first position at
//! which the running sum of term upper bounds reaches the threshold
//! `theta * s_min`, where `s_min` is the k-th largest score generated so far
//! (zero while the heap is filling, so nothing is pruned until k scores
//! exist). A document is fully scored only when the leading candidates align
//! at the pivot; otherwise the leading cursors are forwarded to it. With
//! `theta = 1` the result is exactly the exhaustive top-k; larger `theta`
//! trades effectiveness for fewer scored documents.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::ops::ControlFlow;

use crate::index::InvertedIndex;

use super::boolean::{conjunction_cursors, drive_conjunction};
use super::{Query, ScoredList, SearchCounters};

#[derive(Debug, Clone, Copy, PartialEq)]
struct RankedDoc {
    doc: u32,
    score: f64,
}

impl Eq for RankedDoc {}

impl PartialOrd for RankedDoc {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RankedDoc {
    /// Higher score wins; ties prefer the smaller doc id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.doc.cmp(&self.doc))
    }
}

/// Bounded min-heap over `(score desc, doc asc)`.
struct TopK {
    k: usize,
    heap: BinaryHeap<Reverse<RankedDoc>>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn is_full(&self) -> bool {
        self.heap.len() == self.k
    }

    /// K-th largest score generated so far; zero while filling.
    fn s_min(&self) -> f64 {
        if self.is_full() {
            self.heap.peek().map_or(0.0, |Reverse(worst)| worst.score)
        } else {
            0.0
        }
    }

    fn push(&mut self, doc: u32, score: f64) {
        self.heap.push(Reverse(RankedDoc { doc, score }));
        if self.heap.len() > self.k {
            self.heap.pop();
        }
    }

    fn into_sorted(self) -> ScoredList {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|Reverse(r)| (r.doc, r.score))
            .collect()
    }
}

struct WandCursor<'a> {
    cursor: crate::index::Cursor<'a>,
    idf: f64,
    upper: f64,
    /// Position of the term in the query; fixes the summation order when a
    /// document is scored (f64 addition is order-sensitive at the ulp level,
    /// and tie-breaking must not depend on cursor history).
    term_rank: usize,
}

/// Top-k disjunctive retrieval with WAND pruning.
///
/// Returns the ranked list (descending score, ties by ascending doc id; only
/// documents with nonzero score) together with work counters. Heap admission
/// is strict: a document tying the current `s_min` does not evict. A
/// single-term query degenerates to an exhaustive scan of its postings list,
/// so `theta` has no effect there.
///
/// # Panics
/// Panics if `theta < 1.0`.
pub fn wand_topk(
    index: &InvertedIndex,
    query: &Query,
    k: usize,
    theta: f64,
) -> (ScoredList, SearchCounters) {
    assert!(theta >= 1.0, "theta must be at least 1");
    let mut counters = SearchCounters::default();
    let mut pool: Vec<WandCursor> = query
        .distinct_terms()
        .into_iter()
        .enumerate()
        .filter_map(|(term_rank, term)| {
            let list = index.postings(term)?;
            Some(WandCursor {
                cursor: list.cursor(),
                idf: index.idf(list.df()),
                upper: list.upper_bound(),
                term_rank,
            })
        })
        .collect();
    if pool.is_empty() || k == 0 {
        return (Vec::new(), counters);
    }
    let theta = if pool.len() == 1 { 1.0 } else { theta };

    let mut heap = TopK::new(k);
    loop {
        pool.retain(|c| c.cursor.candidate().is_some());
        if pool.is_empty() {
            break;
        }
        pool.sort_by_key(|c| c.cursor.candidate());
        let threshold = theta * heap.s_min();
        let mut acc = 0.0;
        let mut pivot = None;
        for (i, c) in pool.iter().enumerate() {
            acc += c.upper;
            if acc >= threshold {
                pivot = Some(i);
                break;
            }
        }
        let Some(pivot) = pivot else {
            break;
        };
        let pivot_doc = pool[pivot].cursor.candidate().unwrap();
        if pool[0].cursor.candidate() == Some(pivot_doc) {
            let dl = index.doc_table[pivot_doc as usize].length;
            let mut parts: Vec<(usize, f64)> = Vec::with_capacity(pool.len());
            for c in pool.iter_mut() {
                if c.cursor.candidate() != Some(pivot_doc) {
                    break;
                }
                parts.push((c.term_rank, index.contribution(c.idf, c.cursor.tf(), dl)));
                counters.postings_advanced += 1;
                c.cursor.successor(pivot_doc);
            }
            parts.sort_unstable_by_key(|&(rank, _)| rank);
            let score: f64 = parts.iter().map(|&(_, part)| part).sum();
            counters.docs_scored += 1;
            if score > heap.s_min() {
                heap.push(pivot_doc, score);
                counters.heap_inserts += 1;
            }
        } else {
            for c in &mut pool[..pivot] {
                if c.cursor.candidate().unwrap() < pivot_doc {
                    counters.postings_advanced += 1;
                    c.cursor.f_search(pivot_doc);
                }
            }
        }
    }
    (heap.into_sorted(), counters)
}

/// Scored Boolean retrieval: scores exactly the documents containing every
/// query term and returns the k best by BM25 (descending, ties by ascending
/// doc id). The conjunction is always traversed in full, so `k` barely
/// changes the work done.
pub fn scored_boolean_wand(
    index: &InvertedIndex,
    query: &Query,
    k: usize,
) -> (ScoredList, SearchCounters) {
    let mut counters = SearchCounters::default();
    let Some(mut cursors) = conjunction_cursors(index, query) else {
        return (Vec::new(), counters);
    };
    if k == 0 {
        return (Vec::new(), counters);
    }
    let mut heap = TopK::new(k);
    drive_conjunction(&mut cursors, &mut counters, |doc, aligned, counters| {
        let dl = index.doc_table[doc as usize].length;
        let mut parts: Vec<(usize, f64)> = aligned
            .iter()
            .map(|c| (c.term_rank, index.contribution(c.idf, c.cursor.tf(), dl)))
            .collect();
        parts.sort_unstable_by_key(|&(rank, _)| rank);
        let score: f64 = parts.iter().map(|&(_, part)| part).sum();
        counters.docs_scored += 1;
        // Every conjunctive match is eligible: admit freely while filling,
        // then strictly beat the current minimum.
        if !heap.is_full() || score > heap.s_min() {
            heap.push(doc, score);
            counters.heap_inserts += 1;
        }
        ControlFlow::Continue(())
    });
    (heap.into_sorted(), counters)
}
