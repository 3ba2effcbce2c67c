//! Classifier families, fold ensembles and model files.

pub mod adam;
pub mod classifier;
pub mod early_stop;
pub mod ensemble;
pub mod gbm;
pub mod lstm;
pub mod persist;

pub use classifier::{
    h_from_probability, train_member, Classifier, Family, FeatureConfig, FeatureKind, Featurizer, Member, MemberFit,
    Preprocessing, TrainConfig,
};
pub use early_stop::{steps_until_stop, EarlyStopper, StopDecision};
pub use ensemble::{
    score, stratified_folds, train_ensemble, youden_threshold, EnsembleFit, EnsembleModel, HighlightScorer,
};
pub use gbm::{train_gbm, GbmConfig, GbmFit, GbmModel};
pub use lstm::{lstm_forward, train_lstm, EmbeddingSource, LstmConfig, LstmFit, LstmModel, LstmOutput};
pub use persist::{load_model, model_to_bytes, save_model};
