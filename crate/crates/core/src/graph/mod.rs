//! Visit-succession graphs and node2vec embeddings.

pub mod embedding;
pub mod skipgram;
pub mod transition;
pub mod walk;

pub use embedding::{cosine, embed_graph, EmbeddingTable};
pub use skipgram::train_skipgram;
pub use transition::{build_transition_graph, TransitionGraph};
pub use walk::{node2vec_walks, Node2Vec, WalkConfig};
