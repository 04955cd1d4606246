//! Review-aware Bayesian personalized ranking.
//!
//! Two text-aware matrix factorization rankers ([`ModelKind::Diff`] and
//! [`ModelKind::Shared`]) next to plain BPR matrix factorization and a
//! popularity baseline. Items carry a text feature vector built by averaging
//! pre-trained word embeddings over their reviews; models are trained by
//! pairwise stochastic gradient ascent and evaluated by exact per-user AUC.

pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod synthetic;
pub mod textfeat;
pub mod train;

pub use checkpoint::{load_model, save_model};
pub use corpus::{
    filter_min_activity, ingest, split, stats, Dataset, Ingested, Interaction, Split, StatsReport,
};
pub use error::{CheckpointError, DataError, EvalError, ModelError, TrainError};
pub use eval::{
    auc, improvement_report, report_csv, select_test_pairs, AucSummary, ColdMode, EvalSetting, Improvement,
    ReportRow, SettingKind,
};
pub use model::{
    init_params, pairwise_diff, rank, Dims, Matrix, ModelKind, ModelScorer, Params, Scorer,
    UserTextScope,
};
pub use textfeat::{
    compose_item_features, load_embeddings, synth_embeddings, tokenize, DocScope, EmbeddingTable,
    FeatureMatrix, StopWords,
};
pub use train::{bpr_objective, fit, sample_triple, sgd_step, FitResult, TrainConfig, Triple};
