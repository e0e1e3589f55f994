use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chunk::DocumentChunk;
use super::embed::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 3;

/// Exact (flat) cosine index. Write entries, then freeze before querying.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    entries: Vec<(usize, EmbeddingVector)>,
    frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk: DocumentChunk,
    pub score: f64,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: Vec::new(),
            frozen: false,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn entries(&self) -> &[(usize, EmbeddingVector)] {
        &self.entries
    }

    pub fn insert(&mut self, id: usize, vector: EmbeddingVector) -> Result<()> {
        if self.frozen {
            return Err(Error::Integrity("cannot insert into a frozen index".into()));
        }
        if vector.dimension() != self.dimension {
            return Err(Error::Integrity(format!(
                "vector for chunk {id} has dimension {}, index expects {}",
                vector.dimension(),
                self.dimension
            )));
        }
        self.entries.push((id, vector));
        Ok(())
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Top-`k` `(chunk id, cosine)` pairs, by score descending then id
    /// ascending.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if !self.frozen {
            return Err(Error::Integrity("index must be frozen before querying".into()));
        }
        if query.dimension() != self.dimension {
            return Err(Error::Integrity(format!(
                "query has dimension {}, index expects {}",
                query.dimension(),
                self.dimension
            )));
        }
        let mut scored: Vec<(usize, f64)> = self.entries.iter().map(|(id, v)| (*id, v.cosine(query))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Header line `{"dimension", "count"}` followed by one
    /// `{"id", "vector"}` record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::json!({"dimension": self.dimension, "count": self.entries.len()}).to_string();
        out.push('\n');
        for (id, v) in &self.entries {
            out.push_str(&serde_json::to_string(&IndexRecord { id: *id, vector: v.clone() }).expect("serializable"));
            out.push('\n');
        }
        out
    }

    /// Loads a persisted index; the result is frozen.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: IndexHeader = serde_json::from_str(lines.next().unwrap_or(""))
            .map_err(|e| Error::json("index header", e))?;
        let mut index = VectorIndex::new(header.dimension);
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: IndexRecord =
                serde_json::from_str(line).map_err(|e| Error::json(format!("index record {}", i + 1), e))?;
            index.insert(rec.id, rec.vector)?;
        }
        if index.len() != header.count {
            return Err(Error::Integrity(format!(
                "index header announces {} entries, file holds {}",
                header.count,
                index.len()
            )));
        }
        index.freeze();
        Ok(index)
    }
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    dimension: usize,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct IndexRecord {
    id: usize,
    vector: EmbeddingVector,
}

/// Embeds every chunk and returns a frozen index.
pub fn build_index(chunks: &[DocumentChunk], embedder: &dyn Embedder) -> Result<VectorIndex> {
    let mut index = VectorIndex::new(embedder.dimension());
    for chunk in chunks {
        index.insert(chunk.id, embedder.embed(&chunk.text)?)?;
    }
    index.freeze();
    Ok(index)
}

/// Chunks together with their index.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub chunks: BTreeMap<usize, DocumentChunk>,
    pub index: VectorIndex,
}

impl KnowledgeBase {
    pub fn new(chunks: Vec<DocumentChunk>, index: VectorIndex) -> Result<Self> {
        let chunks: BTreeMap<usize, DocumentChunk> = chunks.into_iter().map(|c| (c.id, c)).collect();
        if let Some((id, _)) = index.entries().iter().find(|(id, _)| !chunks.contains_key(id)) {
            return Err(Error::Integrity(format!("index entry {id} has no stored chunk")));
        }
        Ok(Self { chunks, index })
    }

    pub fn query(&self, embedder: &dyn Embedder, text: &str, k: usize) -> Result<Vec<RetrievalResult>> {
        let q = embedder.embed(text)?;
        Ok(self
            .index
            .search(&q, k)?
            .into_iter()
            .map(|(id, score)| RetrievalResult {
                chunk: self.chunks[&id].clone(),
                score,
            })
            .collect())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let chunks: String = self
            .chunks
            .values()
            .map(|c| serde_json::to_string(c).expect("serializable") + "\n")
            .collect();
        write(&dir.join(CHUNKS_FILE), &chunks)?;
        write(&dir.join(INDEX_FILE), &self.index.to_jsonl())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let chunks_text = read(&dir.join(CHUNKS_FILE))?;
        let chunks = chunks_text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::json("chunk record", e)))
            .collect::<Result<Vec<DocumentChunk>>>()?;
        let index = VectorIndex::from_jsonl(&read(&dir.join(INDEX_FILE))?)?;
        Self::new(chunks, index)
    }
}

pub const CHUNKS_FILE: &str = "chunks.jsonl";
pub const INDEX_FILE: &str = "index.jsonl";

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
