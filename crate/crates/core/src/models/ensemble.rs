use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::classifier::{h_from_probability, train_member, Family, Member, Preprocessing, TrainConfig};
use crate::corpus::{LabeledExample, TokenSequence};
use crate::error::{Error, Result};
use crate::evaluation::roc_auc;
use crate::features::EmbeddingTable;
use crate::numeric::mean;
use crate::rng;

/// Anything that maps keep-mode, unstemmed tokens to an h-score in `[-1, 1]`.
pub trait HighlightScorer {
    fn h_score(&self, tokens: &TokenSequence) -> Result<f64>;
}

impl HighlightScorer for Member {
    fn h_score(&self, tokens: &TokenSequence) -> Result<f64> {
        Member::h_score(self, tokens)
    }
}

pub fn score<S: HighlightScorer + ?Sized>(model: &S, tokens: &TokenSequence) -> Result<f64> {
    model.h_score(tokens)
}

/// Fold models whose score is the mean of member h-scores.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub family: Family,
    pub preprocessing: Preprocessing,
    pub members: Vec<Member>,
    /// h-score cutoff; scores at or above it count as highlights.
    pub threshold: f64,
}

impl EnsembleModel {
    /// Each member's h-score, in member order.
    pub fn member_scores(&self, tokens: &TokenSequence) -> Result<Vec<f64>> {
        if self.members.is_empty() {
            return Err(Error::NotTrained);
        }
        let t = self.preprocessing.apply(tokens)?;
        self.members.iter().map(|m| Ok(h_from_probability(m.probability_preprocessed(&t)?))).collect()
    }

    pub fn is_highlight(&self, tokens: &TokenSequence) -> Result<bool> {
        Ok(self.h_score(tokens)? >= self.threshold)
    }
}

impl HighlightScorer for EnsembleModel {
    fn h_score(&self, tokens: &TokenSequence) -> Result<f64> {
        let scores = self.member_scores(tokens)?;
        Ok(mean(&scores).expect("members checked non-empty"))
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleFit {
    pub model: EnsembleModel,
    /// Fold index of every input example.
    pub folds: Vec<usize>,
    /// Held-out h-score of every input example from the member that did not see it.
    pub oof_scores: Vec<f64>,
    pub oof_auc: f64,
    pub dev_auc_traces: Vec<Vec<f64>>,
    pub best_steps: Vec<usize>,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    let mut folds = vec![0; labels.len()];
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| (labels[i] != 0) as u8 == class).collect();
        if idx.len() < k {
            return Err(Error::InvalidInput(format!(
                "class {class} has {} examples, fewer than the {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng::substream(seed, "folds", class as u64));
        for (j, i) in idx.into_iter().enumerate() {
            folds[i] = j % k;
        }
    }
    Ok(folds)
}

/// Cutoff maximizing TPR − FPR with the rule `score >= t`.
///
/// Candidates are the distinct scores; among equal maxima the highest cutoff wins.
pub fn youden_threshold(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let pos = labels.iter().filter(|&&y| y != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = (f64::NEG_INFINITY, scores[order[0]]);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let j = tp as f64 / pos as f64 - fp as f64 / neg as f64;
        if j > best.0 {
            best = (j, s);
        }
    }
    Ok(best.1)
}

/// Train one member per fold on the other folds, early-stopping on the held-out
/// fold, and pick the decision threshold on the pooled held-out scores.
pub fn train_ensemble(
    examples: &[LabeledExample],
    config: &TrainConfig,
    table: Option<Arc<EmbeddingTable>>,
) -> Result<EnsembleFit> {
    let k = config.folds;
    if examples.len() < 2 * k {
        return Err(Error::InvalidInput(format!("{} examples is too few for {k}-fold training", examples.len())));
    }
    let labels: Vec<u8> = examples.iter().map(|e| e.label()).collect();
    let folds = stratified_folds(&labels, k, config.seed)?;
    let fits = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<LabeledExample> =
                (0..examples.len()).filter(|&i| folds[i] != f).map(|i| examples[i].clone()).collect();
            let held: Vec<usize> = (0..examples.len()).filter(|&i| folds[i] == f).collect();
            let dev: Vec<LabeledExample> = held.iter().map(|&i| examples[i].clone()).collect();
            let fit =
                train_member(&train, &dev, config, table.clone(), rng::derive_seed(config.seed, "fold", f as u64))?;
            let scores = dev.iter().map(|e| fit.member.h_score(&e.tokens)).collect::<Result<Vec<f64>>>()?;
            Ok((fit, held, scores))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut oof_scores = vec![0.0; examples.len()];
    let mut members = Vec::with_capacity(k);
    let mut dev_auc_traces = Vec::with_capacity(k);
    let mut best_steps = Vec::with_capacity(k);
    for (fit, held, scores) in fits {
        for (i, s) in held.into_iter().zip(scores) {
            oof_scores[i] = s;
        }
        members.push(fit.member);
        dev_auc_traces.push(fit.dev_auc_trace);
        best_steps.push(fit.best_step);
    }
    let threshold = youden_threshold(&oof_scores, &labels)?;
    let oof_auc = roc_auc(&oof_scores, &labels)?;
    Ok(EnsembleFit {
        model: EnsembleModel { family: config.family, preprocessing: config.preprocessing, members, threshold },
        folds,
        oof_scores,
        oof_auc,
        dev_auc_traces,
        best_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, PunctMode, Source};
    use crate::models::classifier::Classifier;
    use crate::models::gbm::{GbmModel, Node, Tree};
    use chrono::{TimeZone, Utc};

    fn constant_member(p: f64) -> Member {
        let margin = (p / (1.0 - p)).ln();
        Member {
            preprocessing: Preprocessing::default(),
            classifier: Classifier::Gbm {
                featurizer: crate::models::Featurizer::Ngrams {
                    vocab: crate::features::Vocabulary::from_parts(vec![], vec![], 1, 1, 0),
                    scheme: crate::features::WeightScheme::Count,
                },
                model: GbmModel {
                    trees: vec![Tree { nodes: vec![Node::Leaf(0.0)] }],
                    learning_rate: 0.1,
                    base_score: margin,
                },
            },
        }
    }

    #[test]
    fn ensemble_is_exact_member_mean() {
        let toks = tokenize("anything at all", PunctMode::Keep);
        let members: Vec<Member> = [0.2, 0.9, 0.55, 0.4, 0.7, 0.61, 0.33].map(constant_member).to_vec();
        let hs: Vec<f64> = members.iter().map(|m| m.h_score(&toks).unwrap()).collect();
        let e = EnsembleModel { family: Family::Gbm, preprocessing: Preprocessing::default(), members, threshold: 0.0 };
        assert_eq!(e.member_scores(&toks).unwrap(), hs);
        assert_eq!(score(&e, &toks).unwrap(), mean(&hs).unwrap());
    }

    #[test]
    fn empty_ensemble_is_untrained() {
        let e = EnsembleModel {
            family: Family::Gbm,
            preprocessing: Preprocessing::default(),
            members: vec![],
            threshold: 0.0,
        };
        assert!(matches!(e.h_score(&tokenize("x", PunctMode::Keep)), Err(Error::NotTrained)));
    }

    #[test]
    fn folds_are_stratified_and_balanced() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 3 == 0) as u8).collect();
        let f = stratified_folds(&labels, 7, 1).unwrap();
        for fold in 0..7 {
            let pos = (0..100).filter(|&i| f[i] == fold && labels[i] == 1).count();
            let neg = (0..100).filter(|&i| f[i] == fold && labels[i] == 0).count();
            assert!((4..=5).contains(&pos), "{pos}");
            assert!((9..=10).contains(&neg), "{neg}");
        }
        assert_eq!(f, stratified_folds(&labels, 7, 1).unwrap());
        assert!(stratified_folds(&[1, 1, 1, 1, 1, 1, 1, 0], 7, 0).is_err());
    }

    fn youden_oracle(scores: &[f64], labels: &[u8]) -> f64 {
        let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let neg = labels.len() as f64 - pos;
        scores
            .iter()
            .map(|&t| {
                let tp = (0..scores.len()).filter(|&i| scores[i] >= t && labels[i] == 1).count() as f64;
                let fp = (0..scores.len()).filter(|&i| scores[i] >= t && labels[i] == 0).count() as f64;
                tp / pos - fp / neg
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn youden_matches_brute_force() {
        use rand::Rng;
        let mut r = rng::substream(5, "youden", 0);
        for _ in 0..200 {
            let n = r.gen_range(2..30);
            let scores: Vec<f64> = (0..n).map(|_| (r.gen_range(0..8) as f64) / 4.0 - 1.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| r.gen_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let t = youden_threshold(&scores, &labels).unwrap();
            let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
            let neg = n as f64 - pos;
            let tp = (0..n).filter(|&i| scores[i] >= t && labels[i] == 1).count() as f64;
            let fp = (0..n).filter(|&i| scores[i] >= t && labels[i] == 0).count() as f64;
            assert!((tp / pos - fp / neg - youden_oracle(&scores, &labels)).abs() < 1e-12);
        }
    }

    fn example(text: &str, source: Source, i: usize) -> LabeledExample {
        LabeledExample::new(tokenize(text, PunctMode::Keep), source, format!("t{i}"), Utc.timestamp_opt(0, 0).unwrap())
    }

    #[test]
    fn gbm_ensemble_on_planted_words() {
        let mut ex = Vec::new();
        for i in 0..70 {
            ex.push(example(&format!("great insight number {i}"), Source::Clip, i));
            ex.push(example(&format!("plain filler number {i}"), Source::Nonclip, i));
        }
        let config = TrainConfig { seed: 3, ..TrainConfig::default() };
        let fit = train_ensemble(&ex, &config, None).unwrap();
        assert_eq!(fit.model.members.len(), 7);
        assert_eq!(fit.oof_auc, 1.0);
        assert!(fit.model.is_highlight(&ex[0].tokens).unwrap());
        assert!(!fit.model.is_highlight(&ex[1].tokens).unwrap());
        let again = train_ensemble(&ex, &config, None).unwrap();
        assert_eq!(again.model, fit.model);
    }

    #[test]
    fn duplicated_data_gives_identical_members() {
        let mut ex = Vec::new();
        for i in 0..14 {
            ex.push(example("good bit", Source::Clip, i));
            ex.push(example("dull bit", Source::Nonclip, i));
        }
        let fit = train_ensemble(&ex, &TrainConfig::default(), None).unwrap();
        let toks = tokenize("good", PunctMode::Keep);
        let scores = fit.model.member_scores(&toks).unwrap();
        assert!(scores.iter().all(|&s| s == scores[0]));
        assert_eq!(fit.model.h_score(&toks).unwrap(), scores[0]);
    }
}
