//! Documentation ingestion, embeddings and the retrieval index.

mod chunk;
mod crawl;
mod embed;
mod index;

pub use chunk::{
    classify_path, ingest_repository, java_comments, normalize, split_text, ChunkKind, ChunkSink, ChunkingConfig,
    DocumentChunk, DEFAULT_CHUNK_OVERLAP, DEFAULT_CHUNK_SIZE,
};
pub use crawl::{crawl_site, html_to_text, CrawlOutcome, Fetcher, HttpFetcher};
pub use embed::{
    embedder_registry, tokenize, Embedder, EmbedderRegistry, EmbedderSettings, EmbeddingVector, HashedEmbedder,
    RemoteEmbedder, DEFAULT_DIMENSION,
};
pub(crate) use embed::excerpt;
pub use index::{build_index, KnowledgeBase, RetrievalResult, VectorIndex, CHUNKS_FILE, DEFAULT_TOP_K, INDEX_FILE};
