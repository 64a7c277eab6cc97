pub mod detect;
pub mod embeddings;
pub mod generate;
pub mod gradcheck;
pub mod train;
pub mod transfer;
