//! Bag-of-n-gram vectors and word-embedding document vectors.

mod embedding;
mod vocabulary;

pub use embedding::{embed_document, load_embedding_table, EmbedScheme, EmbeddingTable};
pub use vocabulary::{build_vocabulary, vectorize, SparseVector, Vocabulary, WeightScheme};
