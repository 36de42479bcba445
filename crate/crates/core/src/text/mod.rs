//! Tokenization, vocabulary and the text encoder slot.

mod encoder;
mod tokenize;
mod vocab;

pub use encoder::{
    EncodedBatch, EncoderKind, PrecomputedEmbeddings, EMBEDDING_PATH, PROJECTION_PREFIX, TextEncoder, TextEncoderSpec, TextInput,
};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};
