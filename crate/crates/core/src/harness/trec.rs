//! TREC run, qrels, and query-log file formats.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::metrics::{Qrels, Ranking};

use super::HarnessError;

/// A reference run: per query, documents with their final-stage scores in
/// descending score order. Equal scores keep their input order.
#[derive(Debug, Clone, Default)]
pub struct GoldRun {
    per_query: BTreeMap<String, Vec<(String, f64)>>,
}

impl GoldRun {
    /// Groups raw `(qid, docno, score)` rows, rejects duplicate documents
    /// within a query, and stable-sorts each query by descending score.
    pub fn from_entries(entries: Vec<(String, String, f64)>) -> Result<Self, HarnessError> {
        let mut per_query: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (qid, doc, score) in entries {
            per_query.entry(qid).or_default().push((doc, score));
        }
        for (qid, list) in &mut per_query {
            let mut seen: HashSet<&str> = HashSet::with_capacity(list.len());
            for (doc, _) in list.iter() {
                if !seen.insert(doc.as_str()) {
                    return Err(HarnessError::DuplicateRunDoc {
                        qid: qid.clone(),
                        doc: doc.clone(),
                    });
                }
            }
            drop(seen);
            list.sort_by(|a, b| b.1.total_cmp(&a.1));
        }
        Ok(Self { per_query })
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.per_query.keys().map(String::as_str)
    }

    pub fn num_queries(&self) -> usize {
        self.per_query.len()
    }

    pub fn ranking(&self, qid: &str) -> Option<&[(String, f64)]> {
        self.per_query.get(qid).map(Vec::as_slice)
    }

    /// The query's document order as a [`Ranking`], scores dropped.
    pub fn as_ranking(&self, qid: &str) -> Option<Ranking> {
        self.per_query.get(qid).map(|list| {
            let docs = list.iter().map(|(d, _)| d.clone()).collect();
            Ranking::new(qid, docs).expect("run entries are duplicate-free")
        })
    }
}

/// Reads a 6-column TREC run: `qid Q0 docno rank score tag`. The stored rank
/// column is ignored; order comes from re-sorting by score.
pub fn parse_trec_run<P: AsRef<Path>>(path: P) -> Result<GoldRun, HarnessError> {
    let path = path.as_ref();
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(HarnessError::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                reason: format!("expected 6 columns, found {}", cols.len()),
            });
        }
        let score: f64 = cols[4].parse().map_err(|_| HarnessError::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            reason: format!("cannot parse score '{}'", cols[4]),
        })?;
        entries.push((cols[0].to_string(), cols[2].to_string(), score));
    }
    GoldRun::from_entries(entries)
}

/// Writes a run in canonical form: queries in lexicographic qid order,
/// ranks renumbered from 1, shortest round-tripping score text.
pub fn write_trec_run<P: AsRef<Path>>(
    run: &GoldRun,
    path: P,
    tag: &str,
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for (qid, list) in &run.per_query {
        for (rank, (doc, score)) in list.iter().enumerate() {
            writeln!(out, "{qid} Q0 {doc} {} {score} {tag}", rank + 1).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Reads 4-column qrels: `qid iter docno grade`. Later duplicates override
/// earlier ones; the returned count says how many overrides happened.
pub fn parse_qrels<P: AsRef<Path>>(path: P) -> Result<(Qrels, usize), HarnessError> {
    let path = path.as_ref();
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut qrels = Qrels::new();
    let mut overrides = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(HarnessError::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                reason: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        let grade: u32 = cols[3].parse().map_err(|_| HarnessError::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            reason: format!("cannot parse grade '{}'", cols[3]),
        })?;
        if qrels.insert(cols[0], cols[2], grade).is_some() {
            overrides += 1;
        }
    }
    Ok((qrels, overrides))
}

/// Writes qrels in canonical form: qid then docno order, iteration column 0.
pub fn write_qrels<P: AsRef<Path>>(qrels: &Qrels, path: P) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for (qid, doc, grade) in qrels.entries() {
        writeln!(out, "{qid} 0 {doc} {grade}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a query log: one `qid<TAB>query text` per line, order preserved.
pub fn parse_queries<P: AsRef<Path>>(path: P) -> Result<Vec<(String, String)>, HarnessError> {
    let path = path.as_ref();
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut queries = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((qid, text)) = line.split_once('\t') else {
            return Err(HarnessError::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                reason: "expected qid<TAB>query text".to_string(),
            });
        };
        if !seen.insert(qid.to_string()) {
            return Err(HarnessError::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                reason: format!("duplicate qid '{qid}'"),
            });
        }
        queries.push((qid.to_string(), text.to_string()));
    }
    Ok(queries)
}
