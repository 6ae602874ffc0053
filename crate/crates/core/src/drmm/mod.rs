//! Deep Relevance Matching Model: matching histograms, the feed-forward
//! matching network with term gating, pairwise hinge-loss training with
//! Adadelta, and the persisted model format.

mod adadelta;
mod cache;
mod features;
mod gating;
mod histogram;
mod loss;
mod model;
mod network;
mod pairs;
mod train;

pub use adadelta::{AdadeltaConfig, AdadeltaState};
pub use cache::{feature_key, FeatureCache};
pub use features::{
    sort_ranked, FeatureExtractor, GatingInput, Granularity, QueryFeatures, QueryTerms,
    UnitFeatures, VectorCache,
};
pub use gating::{gating_weights, softmax};
pub use histogram::{
    build_histogram, histogram_counts, transform_counts, HistogramConfig, HistogramMode,
    MatchingHistogram, TermRef,
};
pub use loss::hinge_loss;
pub use model::DrmmModel;
pub use network::{
    accumulate_pair_gradient, backward, pair_loss, Dense, ForwardOutput, ModelParams, PairInput,
};
pub use pairs::{filter_qrels, retrieved_sets, sample_pairs, PairSample, RetrievedSets, TrainingPair};
pub use train::{
    initial_params, mean_average_precision, train, EpochRecord, ModelSpec, TrainConfig, TrainOutcome, TrainingLog,
};
