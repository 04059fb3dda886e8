//! Decentralized retrieval memory: one exact vector store partition per
//! (player, world), fed by sentence-aware overlapping chunks.

mod chunk;
mod embed;
mod store;

pub use chunk::{chunk_text, chunk_text_from, reassemble, Chunk, ChunkSource};
pub use embed::{cosine, embed, EmbedderSpec, EMBEDDINGS_KEY_ENV};
pub use store::{MemoryRecord, MemoryStore, PartitionKey, RecordKey, SharedStore, STORE_FORMAT_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("vector dimension {got} does not match store dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("invalid embedder: {0}")]
    InvalidEmbedder(String),
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
