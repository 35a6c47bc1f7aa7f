//! Delta-encoded postings blocks and forward-only cursors.
//!
//! Document ids are stored as gaps in fixed-size blocks. Each block keeps its
//! final doc id in a skip table so a cursor can locate the target block by
//! binary search and only decode within it; `f_search` therefore never scans
//! a whole list.

/// Entries per block. Small enough that decoding one block is cheap, large
/// enough that the skip table stays short.
pub const BLOCK_LEN: usize = 128;

/// Postings for one term: strictly ascending doc ids with term frequencies,
/// plus the precomputed score upper bound for the term.
#[derive(Debug, Clone, PartialEq)]
pub struct PostingsList {
    pub(crate) upper_bound: f64,
    /// Final doc id of each block (skip entries).
    block_last: Vec<u32>,
    /// Per-entry doc id gaps. The first gap is relative to -1, every later
    /// one to its predecessor, so all gaps are >= 1.
    gaps: Vec<u32>,
    tfs: Vec<u32>,
}

impl PostingsList {
    /// Builds a list from `(doc_id, tf)` pairs with strictly ascending ids.
    pub fn from_postings(postings: &[(u32, u32)]) -> Self {
        let mut gaps = Vec::with_capacity(postings.len());
        let mut tfs = Vec::with_capacity(postings.len());
        let mut block_last = Vec::with_capacity(postings.len().div_ceil(BLOCK_LEN));
        let mut prev: i64 = -1;
        for (i, &(doc, tf)) in postings.iter().enumerate() {
            assert!(i64::from(doc) > prev, "doc ids must be strictly ascending");
            gaps.push((i64::from(doc) - prev) as u32);
            tfs.push(tf);
            prev = i64::from(doc);
            if (i + 1) % BLOCK_LEN == 0 || i + 1 == postings.len() {
                block_last.push(doc);
            }
        }
        PostingsList {
            upper_bound: 0.0,
            block_last,
            gaps,
            tfs,
        }
    }

    /// Rebuilds a list from raw storage vectors, recomputing skip entries.
    pub(crate) fn from_raw(upper_bound: f64, gaps: Vec<u32>, tfs: Vec<u32>) -> Self {
        assert_eq!(gaps.len(), tfs.len());
        let mut block_last = Vec::with_capacity(gaps.len().div_ceil(BLOCK_LEN));
        let mut prev: i64 = -1;
        for (i, &gap) in gaps.iter().enumerate() {
            prev += i64::from(gap);
            if (i + 1) % BLOCK_LEN == 0 || i + 1 == gaps.len() {
                block_last.push(prev as u32);
            }
        }
        PostingsList {
            upper_bound,
            block_last,
            gaps,
            tfs,
        }
    }

    pub fn df(&self) -> u32 {
        self.gaps.len() as u32
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    pub(crate) fn gaps(&self) -> &[u32] {
        &self.gaps
    }

    pub(crate) fn tfs(&self) -> &[u32] {
        &self.tfs
    }

    fn num_blocks(&self) -> usize {
        self.block_last.len()
    }

    fn decode_block(&self, block: usize, out: &mut Vec<u32>) {
        out.clear();
        let start = block * BLOCK_LEN;
        let end = (start + BLOCK_LEN).min(self.gaps.len());
        let mut prev: i64 = if block == 0 {
            -1
        } else {
            i64::from(self.block_last[block - 1])
        };
        for &gap in &self.gaps[start..end] {
            prev += i64::from(gap);
            out.push(prev as u32);
        }
    }

    /// Decodes the whole list; intended for inspection and tests.
    pub fn postings(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.len());
        let mut prev: i64 = -1;
        for (&gap, &tf) in self.gaps.iter().zip(&self.tfs) {
            prev += i64::from(gap);
            out.push((prev as u32, tf));
        }
        out
    }

    pub fn cursor(&self) -> Cursor<'_> {
        let mut ids = Vec::with_capacity(BLOCK_LEN);
        if !self.is_empty() {
            self.decode_block(0, &mut ids);
        }
        Cursor {
            list: self,
            pos: 0,
            block: 0,
            ids,
        }
    }
}

/// Forward-only position in a [`PostingsList`]. The candidate it points at
/// strictly increases across advancing calls; once the list is exhausted the
/// candidate stays `None`.
#[derive(Debug, Clone)]
pub struct Cursor<'a> {
    list: &'a PostingsList,
    /// Absolute entry index; equal to the list length once exhausted.
    pos: usize,
    block: usize,
    /// Decoded doc ids of `block`.
    ids: Vec<u32>,
}

impl<'a> Cursor<'a> {
    pub fn candidate(&self) -> Option<u32> {
        if self.pos < self.list.len() {
            Some(self.ids[self.pos - self.block * BLOCK_LEN])
        } else {
            None
        }
    }

    /// Term frequency at the current candidate.
    ///
    /// # Panics
    /// Panics if the cursor is exhausted.
    pub fn tf(&self) -> u32 {
        assert!(self.pos < self.list.len(), "cursor exhausted");
        self.list.tfs[self.pos]
    }

    /// Advances to the least posting with `doc_id >= x` and returns it. The
    /// cursor does not move when its candidate already satisfies the bound.
    pub fn f_search(&mut self, x: u32) -> Option<u32> {
        let current = self.candidate()?;
        if current >= x {
            return Some(current);
        }
        // Locate the first block at or after the current one whose last id
        // reaches x, then binary search inside it.
        let rel = self.list.block_last[self.block..].partition_point(|&last| last < x);
        let block = self.block + rel;
        if block == self.list.num_blocks() {
            self.pos = self.list.len();
            return None;
        }
        let start_in_block = if block == self.block {
            self.pos - self.block * BLOCK_LEN
        } else {
            self.list.decode_block(block, &mut self.ids);
            self.block = block;
            0
        };
        let offset = start_in_block + self.ids[start_in_block..].partition_point(|&id| id < x);
        debug_assert!(offset < self.ids.len());
        self.pos = block * BLOCK_LEN + offset;
        Some(self.ids[offset])
    }

    /// Advances to the least posting with `doc_id > x` and returns it.
    pub fn successor(&mut self, x: u32) -> Option<u32> {
        match x.checked_add(1) {
            Some(next) => self.f_search(next),
            None => {
                self.pos = self.list.len();
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list_of(ids: &[u32]) -> PostingsList {
        let postings: Vec<(u32, u32)> = ids.iter().map(|&d| (d, 1)).collect();
        PostingsList::from_postings(&postings)
    }

    #[test]
    fn round_trips_postings() {
        let postings: Vec<(u32, u32)> = (0..500).map(|i| (i * 3 + 1, i % 7 + 1)).collect();
        let list = PostingsList::from_postings(&postings);
        assert_eq!(list.postings(), postings);
        assert_eq!(list.df(), 500);
    }

    #[test]
    fn successor_and_f_search_follow_the_worked_sequence() {
        let list = list_of(&[1, 3, 5, 7]);
        let mut c = list.cursor();
        assert_eq!(c.candidate(), Some(1));
        assert_eq!(c.successor(3), Some(5));
        assert_eq!(c.candidate(), Some(5));
        assert_eq!(c.successor(8), None);
        assert_eq!(c.candidate(), None);

        let mut c = list.cursor();
        assert_eq!(c.f_search(4), Some(5));
        assert_eq!(c.f_search(5), Some(5));
        assert_eq!(c.f_search(0), Some(5), "cursor never moves backwards");
    }

    #[test]
    fn exhausted_cursor_stays_exhausted() {
        let list = list_of(&[2, 9]);
        let mut c = list.cursor();
        assert_eq!(c.f_search(10), None);
        assert_eq!(c.f_search(0), None);
        assert_eq!(c.successor(0), None);
    }

    #[test]
    fn successor_at_id_limit_exhausts() {
        let list = list_of(&[u32::MAX - 1, u32::MAX]);
        let mut c = list.cursor();
        assert_eq!(c.f_search(u32::MAX), Some(u32::MAX));
        assert_eq!(c.successor(u32::MAX), None);
    }

    #[test]
    fn f_search_crosses_block_boundaries() {
        let ids: Vec<u32> = (0..1000).map(|i| i * 2).collect();
        let list = list_of(&ids);
        let mut c = list.cursor();
        assert_eq!(c.f_search(501), Some(502));
        assert_eq!(c.f_search(1998), Some(1998));
        assert_eq!(c.successor(1998), None);
    }

    #[test]
    fn cursor_matches_linear_scan_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let len = rng.gen_range(1..400);
            let mut ids: Vec<u32> = (0..len).map(|_| rng.gen_range(0..4000)).collect();
            ids.sort_unstable();
            ids.dedup();
            let list = list_of(&ids);

            let mut cursor = list.cursor();
            let mut oracle_pos = 0usize;
            let mut probe = 0u32;
            for _ in 0..40 {
                probe = probe.saturating_add(rng.gen_range(0..200));
                let expected = ids[oracle_pos..].iter().position(|&d| d >= probe).map(|i| {
                    oracle_pos += i;
                    ids[oracle_pos]
                });
                assert_eq!(cursor.f_search(probe), expected, "probe {probe} in {ids:?}");
                if expected.is_none() {
                    break;
                }
            }
        }
    }
}
