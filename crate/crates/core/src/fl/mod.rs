//! In-process federated learning: an MLP classifier, local Adam training,
//! FedAvg aggregation, single-client probing, and the multi-round loop.

pub mod mlp;
pub mod train;

pub use mlp::{forward, gradient, init_model, loss, softmax_in_place, Layout, MlpSpec, ModelParams};
pub use train::{
    evaluate, federated_train, fedavg, fedavg_weighted, probe_client, round_seed, train_local, AdamConfig,
    TrainingOutcome, TrainingPlan,
};
