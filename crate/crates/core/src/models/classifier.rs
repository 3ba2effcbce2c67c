use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::gbm::{train_gbm, GbmConfig, GbmModel};
use super::lstm::{train_lstm, LstmConfig, LstmModel};
use crate::corpus::{stem_tokens, LabeledExample, PunctMode, TokenSequence};
use crate::error::{Error, Result};
use crate::features::{
    build_vocabulary, embed_document, vectorize, EmbedScheme, EmbeddingTable, SparseVector, Vocabulary, WeightScheme,
};

/// Token preprocessing a model was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Preprocessing {
    pub punct: PunctMode,
    pub stem: bool,
    pub stopwords: bool,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Preprocessing { punct: PunctMode::Strip, stem: false, stopwords: false }
    }
}

impl std::fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let on = |b: bool| if b { "on" } else { "off" };
        let punct = match self.punct {
            PunctMode::Keep => "keep",
            PunctMode::Strip => "strip",
        };
        write!(f, "punct={punct} stem={} stopwords={}", on(self.stem), on(self.stopwords))
    }
}

impl Preprocessing {
    /// Turn keep-mode, unstemmed tokens into this model's input.
    ///
    /// Tokens that already lost information the model needs (punctuation for a
    /// punctuated model, unstemmed forms for an unstemmed one) are refused.
    pub fn apply(&self, tokens: &TokenSequence) -> Result<TokenSequence> {
        if tokens.stemmed && !self.stem {
            return Err(Error::Incompatible(format!("stemmed tokens given to a model trained with {self}")));
        }
        if tokens.punct_mode == PunctMode::Strip && self.punct == PunctMode::Keep {
            return Err(Error::Incompatible(format!(
                "punctuation-stripped tokens given to a model trained with {self}"
            )));
        }
        let mut t = if self.punct == PunctMode::Strip { tokens.strip_punct() } else { tokens.clone() };
        if self.stopwords {
            t = t.without_stopwords();
        }
        if self.stem && !t.stemmed {
            t = stem_tokens(&t);
        }
        Ok(t)
    }

    /// Refuse to score under flags other than the ones used in training.
    pub fn ensure_matches(&self, requested: &Preprocessing) -> Result<()> {
        if self == requested {
            Ok(())
        } else {
            Err(Error::Incompatible(format!("model was trained with {self} but scoring requested {requested}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Ngrams,
    Embedding,
}

/// Feature pipeline for the tree family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub scheme: WeightScheme,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub max_terms: usize,
    pub embed_scheme: EmbedScheme,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            kind: FeatureKind::Ngrams,
            scheme: WeightScheme::Tfidf,
            ngram_min: 1,
            ngram_max: 1,
            max_terms: 120_000,
            embed_scheme: EmbedScheme::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Featurizer {
    Ngrams {
        vocab: Vocabulary,
        scheme: WeightScheme,
    },
    Embedding {
        table: Arc<EmbeddingTable>,
        scheme: EmbedScheme,
        /// Unigram document frequencies for idf weighting.
        vocab: Option<Vocabulary>,
    },
}

impl Featurizer {
    pub fn fit(config: &FeatureConfig, docs: &[TokenSequence], table: Option<Arc<EmbeddingTable>>) -> Result<Self> {
        match config.kind {
            FeatureKind::Ngrams => Ok(Featurizer::Ngrams {
                vocab: build_vocabulary(docs, config.max_terms, config.ngram_min, config.ngram_max)?,
                scheme: config.scheme,
            }),
            FeatureKind::Embedding => {
                let table =
                    table.ok_or_else(|| Error::InvalidInput("embedding features need an embedding table".into()))?;
                let vocab = match config.embed_scheme {
                    EmbedScheme::Tfidf => Some(build_vocabulary(docs, config.max_terms, 1, 1)?),
                    EmbedScheme::Mean => None,
                };
                Ok(Featurizer::Embedding { table, scheme: config.embed_scheme, vocab })
            }
        }
    }

    pub fn transform(&self, tokens: &TokenSequence) -> Result<SparseVector> {
        match self {
            Featurizer::Ngrams { vocab, scheme } => Ok(vectorize(tokens, vocab, *scheme)),
            Featurizer::Embedding { table, scheme, vocab } => {
                Ok(SparseVector::from_dense(&embed_document(tokens, table, *scheme, vocab.as_ref())?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gbm,
    Lstm,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbm" => Ok(Family::Gbm),
            "lstm" => Ok(Family::Lstm),
            other => Err(Error::InvalidInput(format!("unknown model family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub family: Family,
    pub preprocessing: Preprocessing,
    pub features: FeatureConfig,
    pub gbm: GbmConfig,
    pub lstm: LstmConfig,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            family: Family::Gbm,
            preprocessing: Preprocessing::default(),
            features: FeatureConfig::default(),
            gbm: GbmConfig::default(),
            lstm: LstmConfig::default(),
            folds: 7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Gbm { featurizer: Featurizer, model: GbmModel },
    Lstm(LstmModel),
}

/// One trained model together with the preprocessing it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub preprocessing: Preprocessing,
    pub classifier: Classifier,
}

/// Map a class-1 probability onto the h-score range `[-1, 1]`.
pub fn h_from_probability(p: f64) -> f64 {
    2.0 * p - 1.0
}

impl Member {
    /// Probability of the highlight class for keep-mode, unstemmed tokens.
    pub fn probability(&self, tokens: &TokenSequence) -> Result<f64> {
        let t = self.preprocessing.apply(tokens)?;
        self.probability_preprocessed(&t)
    }

    pub(crate) fn probability_preprocessed(&self, t: &TokenSequence) -> Result<f64> {
        match &self.classifier {
            Classifier::Gbm { featurizer, model } => Ok(model.predict_proba(&featurizer.transform(t)?)),
            Classifier::Lstm(m) => Ok(m.predict_proba(t)),
        }
    }

    pub fn h_score(&self, tokens: &TokenSequence) -> Result<f64> {
        Ok(h_from_probability(self.probability(tokens)?))
    }
}

/// A trained member and its dev AUC trace (per boosting round or epoch).
#[derive(Debug, Clone)]
pub struct MemberFit {
    pub member: Member,
    pub dev_auc_trace: Vec<f64>,
    pub best_step: usize,
}

/// Train one model on `train`, early-stopping on `dev`.
pub fn train_member(
    train: &[LabeledExample],
    dev: &[LabeledExample],
    config: &TrainConfig,
    table: Option<Arc<EmbeddingTable>>,
    seed: u64,
) -> Result<MemberFit> {
    let prep = config.preprocessing;
    let prepare = |set: &[LabeledExample]| -> Result<Vec<(TokenSequence, u8)>> {
        set.iter().map(|e| Ok((prep.apply(&e.tokens)?, e.label()))).collect()
    };
    let train = prepare(train)?;
    let dev = prepare(dev)?;
    match config.family {
        Family::Gbm => {
            let docs: Vec<TokenSequence> = train.iter().map(|e| e.0.clone()).collect();
            let featurizer = Featurizer::fit(&config.features, &docs, table)?;
            let featurize = |set: &[(TokenSequence, u8)]| -> Result<(Vec<SparseVector>, Vec<u8>)> {
                let x = set.iter().map(|e| featurizer.transform(&e.0)).collect::<Result<Vec<_>>>()?;
                Ok((x, set.iter().map(|e| e.1).collect()))
            };
            let (x, y) = featurize(&train)?;
            let (dx, dy) = featurize(&dev)?;
            let fit = train_gbm(&x, &y, &dx, &dy, &config.gbm)?;
            Ok(MemberFit {
                member: Member { preprocessing: prep, classifier: Classifier::Gbm { featurizer, model: fit.model } },
                dev_auc_trace: fit.dev_auc_trace,
                best_step: fit.best_round,
            })
        }
        Family::Lstm => {
            let fit = train_lstm(&train, &dev, table, &config.lstm, seed)?;
            Ok(MemberFit {
                member: Member { preprocessing: prep, classifier: Classifier::Lstm(fit.model) },
                dev_auc_trace: fit.dev_auc_trace,
                best_step: fit.best_epoch,
            })
        }
    }
}
