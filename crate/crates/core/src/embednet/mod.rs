//! Feature-embedding network for regression on masked inputs: learned
//! per-feature embeddings, a shared encoder, masked global average pooling,
//! and a prediction head, plus training, checkpointing, embedding export,
//! and cluster metrics.

mod checkpoint;
mod metrics;
mod model;
mod train;

pub use checkpoint::{
    checkpoint_from_json, checkpoint_to_json, load_checkpoint, save_checkpoint,
    CHECKPOINT_FORMAT_VERSION,
};
pub use metrics::{
    embedding_cluster_metrics, embeddings_to_csv, export_embeddings, ClusterMetrics, EmbeddingRow,
};
pub use model::{masked_global_pool, EmbedNetConfig, FeatureEmbeddingModel, ParamLayout};
pub use train::{
    batch_gradient, mean_squared_error, split_indices, train, train_weighted, EpochStats,
    TrainingTrace,
};

pub(crate) use model::ModelGrads;
pub(crate) use train::{batch_loss_and_flat_grads, train_loop, TrainOptions};
