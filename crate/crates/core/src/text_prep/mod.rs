//! Text cleaning, token vocabularies and embedding tables.

mod clean;
mod embedding;
mod tokens;

pub use clean::{clean_text, clean_text_with, PrepProfile, StopWords};
pub use embedding::{
    coverage_ratio, init_embedding_table, load_pretrained_vectors, EmbeddingTable, PretrainedVectors,
    INIT_RANGE,
};
pub use tokens::{build_token_vocab, encode_sequence, TokenVocab, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
