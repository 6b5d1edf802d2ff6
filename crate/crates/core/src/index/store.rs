//! On-disk index format.
//!
//! ```text
//! "ZSIX" | version:u8 | header_len:u32 | header (JSON: field, tokenization)
//! n_units:u64 | n_units × (doc_id:str, paragraph+1:u32, len:u32)
//! total_len:u64
//! n_terms:u64 | n_terms × (term:str, n:u32, n × (unit:u32, tf:u32))
//! ```
//! Integers are little-endian; `str` is a u32 byte length followed by UTF-8.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DocRef, IndexField, InvertedIndex, Posting, TokenizationConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ZSIX";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    field: IndexField,
    tokenization: TokenizationConfig,
}

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.0.write_all(b)
    }
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.0
            .read_exact(&mut buf)
            .map_err(|e| Error::IndexFormat(format!("truncated file ({e})")))?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn blob(&mut self) -> Result<Vec<u8>> {
        let len = self.u32()? as usize;
        let mut buf = vec![0u8; len];
        self.0
            .read_exact(&mut buf)
            .map_err(|e| Error::IndexFormat(format!("truncated file ({e})")))?;
        Ok(buf)
    }
    fn str(&mut self) -> Result<String> {
        String::from_utf8(self.blob()?).map_err(|_| Error::IndexFormat("invalid UTF-8".into()))
    }
}

impl InvertedIndex {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Writer(BufWriter::new(file));
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.0.flush().map_err(|e| Error::io(path, e))
    }

    fn write_to<W: Write>(&self, w: &mut Writer<W>) -> std::io::Result<()> {
        w.bytes(MAGIC)?;
        w.bytes(&[FORMAT_VERSION])?;
        let header = serde_json::to_vec(&Header {
            field: self.field,
            tokenization: self.tokenization.clone(),
        })?;
        w.u32(header.len() as u32)?;
        w.bytes(&header)?;
        w.u64(self.docs.len() as u64)?;
        for (doc, len) in self.docs.iter().zip(&self.doc_lens) {
            w.str(&doc.doc_id)?;
            w.u32(doc.paragraph.map_or(0, |p| p + 1))?;
            w.u32(*len)?;
        }
        w.u64(self.total_len)?;
        w.u64(self.postings.len() as u64)?;
        for (term, postings) in &self.postings {
            w.str(term)?;
            w.u32(postings.len() as u32)?;
            for p in postings {
                w.u32(p.doc)?;
                w.u32(p.tf)?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<InvertedIndex> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = Reader(BufReader::new(file));
        let magic: [u8; 4] = r.array()?;
        if &magic != MAGIC {
            return Err(Error::IndexFormat(path.display().to_string()));
        }
        let [version] = r.array::<1>()?;
        if version != FORMAT_VERSION {
            return Err(Error::IndexVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header: Header = serde_json::from_slice(&r.blob()?)
            .map_err(|e| Error::IndexFormat(format!("bad header: {e}")))?;

        let n = r.u64()? as usize;
        let mut docs = Vec::with_capacity(n.min(1 << 24));
        let mut doc_lens = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let doc_id = r.str()?;
            let paragraph = match r.u32()? {
                0 => None,
                p => Some(p - 1),
            };
            docs.push(DocRef { doc_id, paragraph });
            doc_lens.push(r.u32()?);
        }
        let total_len = r.u64()?;
        if total_len != doc_lens.iter().map(|&l| l as u64).sum::<u64>() {
            return Err(Error::IndexFormat("length statistics do not add up".into()));
        }
        let n_terms = r.u64()?;
        let mut postings = BTreeMap::new();
        for _ in 0..n_terms {
            let term = r.str()?;
            let len = r.u32()? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let doc = r.u32()?;
                if doc as usize >= n {
                    return Err(Error::IndexFormat(format!("posting for `{term}` points past the last unit")));
                }
                list.push(Posting { doc, tf: r.u32()? });
            }
            postings.insert(term, list);
        }
        Ok(InvertedIndex {
            field: header.field,
            tokenization: header.tokenization,
            docs,
            doc_lens,
            total_len,
            postings,
        })
    }
}
