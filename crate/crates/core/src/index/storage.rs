//! Binary index persistence.
//!
//! Layout: 5-byte magic `CLIX1`, a little-endian `u32` format version, then
//! four sections (`params`, `docs`, `tokenizer`, `lexicon`). Each section is
//! written as `[payload_len: u64][payload][crc32: u32]`; loading verifies the
//! checksum before parsing, so truncation or corruption anywhere surfaces as
//! a checksum failure naming the section.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::corpus::{Stemmer, TokenizerConfig};

use super::codec::PostingsList;
use super::{Bm25Params, DocEntry, IndexError, InvertedIndex};

const MAGIC: &[u8; 5] = b"CLIX1";
const VERSION: u32 = 1;

const SECTIONS: [&str; 4] = ["params", "docs", "tokenizer", "lexicon"];

struct SectionWriter {
    buf: Vec<u8>,
}

impl SectionWriter {
    fn new() -> Self {
        SectionWriter { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn u32_slice(&mut self, vs: &[u32]) {
        for &v in vs {
            self.u32(v);
        }
    }

    fn finish(self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(&(self.buf.len() as u64).to_le_bytes())?;
        out.write_all(&self.buf)?;
        out.write_all(&crc32fast::hash(&self.buf).to_le_bytes())
    }
}

struct SectionReader<'a> {
    section: &'static str,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> SectionReader<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> IndexError {
        IndexError::Corrupt {
            section: self.section,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        if self.pos + n > self.buf.len() {
            return Err(self.corrupt("payload ends early"));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, IndexError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String, IndexError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.corrupt("invalid utf-8"))
    }

    fn u32_vec(&mut self, n: usize) -> Result<Vec<u32>, IndexError> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.u32()?);
        }
        Ok(out)
    }

    fn done(&self) -> Result<(), IndexError> {
        if self.pos != self.buf.len() {
            return Err(self.corrupt("trailing bytes"));
        }
        Ok(())
    }
}

pub fn save_index<P: AsRef<Path>>(index: &InvertedIndex, path: P) -> Result<(), IndexError> {
    let path = path.as_ref();
    let io_err = |source| IndexError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    write_index(index, &mut file).map_err(io_err)?;
    file.flush().map_err(io_err)
}

fn write_index(index: &InvertedIndex, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;

    let mut params = SectionWriter::new();
    params.f64(index.params.k1);
    params.f64(index.params.b);
    params.f64(index.params.k3);
    params.finish(out)?;

    let mut docs = SectionWriter::new();
    docs.u32(index.doc_table.len() as u32);
    docs.f64(index.avg_dl);
    for doc in &index.doc_table {
        docs.str(&doc.ext_id);
        docs.u32(doc.length);
        docs.f64(doc.static_score);
    }
    docs.finish(out)?;

    let mut tok = SectionWriter::new();
    tok.u8(match index.tokenizer.stemmer {
        Stemmer::None => 0,
        Stemmer::LowercaseOnly => 1,
    });
    match &index.tokenizer.stopwords {
        None => tok.u8(0),
        Some(words) => {
            tok.u8(1);
            tok.u32(words.len() as u32);
            for word in words {
                tok.str(word);
            }
        }
    }
    tok.finish(out)?;

    let mut lex = SectionWriter::new();
    lex.u64(index.num_terms() as u64);
    for (term, list) in index.terms() {
        lex.str(term);
        lex.u32(list.df());
        lex.f64(list.upper_bound());
        lex.u32_slice(list.gaps());
        lex.u32_slice(list.tfs());
    }
    lex.finish(out)
}

pub fn load_index<P: AsRef<Path>>(path: P) -> Result<InvertedIndex, IndexError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IndexError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_index(&bytes)
}

fn read_index(bytes: &[u8]) -> Result<InvertedIndex, IndexError> {
    if bytes.len() < MAGIC.len() + 4 {
        return Err(IndexError::BadMagic);
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(IndexError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[MAGIC.len()..MAGIC.len() + 4].try_into().unwrap());
    if version != VERSION {
        return Err(IndexError::Version {
            found: version,
            expected: VERSION,
        });
    }

    let mut rest = &bytes[MAGIC.len() + 4..];
    let mut payloads: Vec<&[u8]> = Vec::with_capacity(SECTIONS.len());
    for section in SECTIONS {
        let (payload, tail) = split_section(rest, section)?;
        payloads.push(payload);
        rest = tail;
    }
    if !rest.is_empty() {
        return Err(IndexError::Corrupt {
            section: "lexicon",
            reason: "trailing bytes after final section".into(),
        });
    }

    let mut params = SectionReader {
        section: "params",
        buf: payloads[0],
        pos: 0,
    };
    let params_value = Bm25Params {
        k1: params.f64()?,
        b: params.f64()?,
        k3: params.f64()?,
    };
    params.done()?;

    let mut docs = SectionReader {
        section: "docs",
        buf: payloads[1],
        pos: 0,
    };
    let num_docs = docs.u32()? as usize;
    let avg_dl = docs.f64()?;
    let mut doc_table = Vec::with_capacity(num_docs);
    for _ in 0..num_docs {
        doc_table.push(DocEntry {
            ext_id: docs.str()?,
            length: docs.u32()?,
            static_score: docs.f64()?,
        });
    }
    docs.done()?;

    let mut tok = SectionReader {
        section: "tokenizer",
        buf: payloads[2],
        pos: 0,
    };
    let stemmer = match tok.u8()? {
        0 => Stemmer::None,
        1 => Stemmer::LowercaseOnly,
        other => return Err(tok.corrupt(format!("unknown stemmer tag {other}"))),
    };
    let stopwords = match tok.u8()? {
        0 => None,
        1 => {
            let n = tok.u32()? as usize;
            let mut words = std::collections::BTreeSet::new();
            for _ in 0..n {
                words.insert(tok.str()?);
            }
            Some(words)
        }
        other => return Err(tok.corrupt(format!("unknown stopword tag {other}"))),
    };
    tok.done()?;

    let mut lex = SectionReader {
        section: "lexicon",
        buf: payloads[3],
        pos: 0,
    };
    let num_terms = lex.u64()? as usize;
    let mut lexicon = BTreeMap::new();
    for _ in 0..num_terms {
        let term = lex.str()?;
        let df = lex.u32()? as usize;
        let upper = lex.f64()?;
        let gaps = lex.u32_vec(df)?;
        let tfs = lex.u32_vec(df)?;
        lexicon.insert(term, PostingsList::from_raw(upper, gaps, tfs));
    }
    lex.done()?;

    Ok(InvertedIndex::from_parts(
        params_value,
        doc_table,
        avg_dl,
        TokenizerConfig { stemmer, stopwords },
        lexicon,
    ))
}

fn split_section<'a>(
    bytes: &'a [u8],
    section: &'static str,
) -> Result<(&'a [u8], &'a [u8]), IndexError> {
    if bytes.len() < 8 {
        return Err(IndexError::Checksum(section));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let Some(total) = len.checked_add(12) else {
        return Err(IndexError::Checksum(section));
    };
    if bytes.len() < total {
        return Err(IndexError::Checksum(section));
    }
    let payload = &bytes[8..8 + len];
    let stored = u32::from_le_bytes(bytes[8 + len..8 + len + 4].try_into().unwrap());
    if crc32fast::hash(payload) != stored {
        return Err(IndexError::Checksum(section));
    }
    Ok((payload, &bytes[total..]))
}

#[cfg(test)]
mod tests {
    use super::super::{build_index, Bm25Params};
    use super::*;
    use crate::corpus::IngestConfig;

    fn sample_index() -> InvertedIndex {
        let config = IngestConfig {
            stopwords: Some(["of".to_string()].into()),
            ..Default::default()
        };
        let corpus = "{\"id\":\"a\",\"text\":\"the life of pi\"}\n\
                      {\"id\":\"b\",\"text\":\"pi day of the year\"}\n\
                      {\"id\":\"c\",\"text\":\"a slice of pie\"}\n";
        let (col, _) = crate::corpus::parse_corpus(corpus.as_bytes(), &config).unwrap();
        build_index(&col, Bm25Params::default()).unwrap()
    }

    fn saved_bytes(index: &InvertedIndex) -> Vec<u8> {
        let mut buf = Vec::new();
        write_index(index, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trips_through_bytes() {
        let index = sample_index();
        let loaded = read_index(&saved_bytes(&index)).unwrap();
        assert_eq!(index, loaded);
    }

    #[test]
    fn round_trips_an_empty_index() {
        let index = build_index(&crate::testutil::collection_of(&[]), Bm25Params::default())
            .unwrap();
        assert_eq!(read_index(&saved_bytes(&index)).unwrap(), index);
    }

    #[test]
    fn builds_are_bit_identical() {
        let a = saved_bytes(&sample_index());
        let b = saved_bytes(&sample_index());
        assert_eq!(a, b);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = saved_bytes(&sample_index());
        bytes[0] = b'X';
        assert!(matches!(read_index(&bytes), Err(IndexError::BadMagic)));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = saved_bytes(&sample_index());
        bytes[5] = 9;
        assert!(matches!(
            read_index(&bytes),
            Err(IndexError::Version {
                found: 9,
                expected: 1
            })
        ));
    }

    #[test]
    fn truncation_fails_the_checksum() {
        let bytes = saved_bytes(&sample_index());
        let cut = read_index(&bytes[..bytes.len() - 6]);
        assert!(matches!(cut, Err(IndexError::Checksum("lexicon"))), "{cut:?}");
    }

    #[test]
    fn corruption_names_the_failing_section() {
        let index = sample_index();
        let clean = saved_bytes(&index);
        // Flip one payload byte inside the docs section (skip magic, version,
        // and the whole params section).
        let params_len = 8 + 24 + 4;
        let docs_payload_start = 9 + params_len + 8;
        let mut bytes = clean.clone();
        bytes[docs_payload_start + 4] ^= 0xFF;
        assert!(matches!(
            read_index(&bytes),
            Err(IndexError::Checksum("docs"))
        ));
    }

    #[test]
    fn save_and_load_via_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.idx");
        let index = sample_index();
        save_index(&index, &path).unwrap();
        assert_eq!(load_index(&path).unwrap(), index);
    }
}
