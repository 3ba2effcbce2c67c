//! Gradient-boosted regression trees with logistic loss.
//!
//! Trees are grown depth-first with exact greedy splits over sparse columns.
//! Features absent from a row are zero and travel as one aggregated group
//! during split search.

use serde::{Deserialize, Serialize};

use super::early_stop::{EarlyStopper, StopDecision};
use crate::error::{Error, Result};
use crate::evaluation::roc_auc;
use crate::features::SparseVector;
use crate::numeric::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmConfig {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub max_rounds: usize,
    /// Stop after this many rounds without dev AUC improvement.
    pub early_stop_rounds: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian sum on each side of a split.
    pub min_child_weight: f64,
    /// Minimum loss reduction for a split.
    pub gamma: f64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            learning_rate: 0.1,
            max_depth: 4,
            max_rounds: 500,
            early_stop_rounds: 40,
            lambda: 1.0,
            min_child_weight: 1.0,
            gamma: 0.0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.max_depth >= 1
            && self.early_stop_rounds >= 1
            && self.lambda >= 0.0
            && self.min_child_weight >= 0.0
            && self.gamma >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid gbm config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &SparseVector) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x.get(feature) < threshold { left } else { right } as usize
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, left as usize).max(go(t, right as usize)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    /// Log-odds of the training positive rate.
    pub base_score: f64,
}

impl GbmModel {
    pub fn margin(&self, x: &SparseVector) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &SparseVector) -> f64 {
        sigmoid(self.margin(x))
    }
}

/// Fitted model plus its per-round dev AUC trace.
#[derive(Debug, Clone)]
pub struct GbmFit {
    pub model: GbmModel,
    pub dev_auc_trace: Vec<f64>,
    /// Rounds kept in the model (the best dev round).
    pub best_round: usize,
}

fn check_binary(labels: &[u8]) -> Result<()> {
    let pos = labels.iter().filter(|&&y| y != 0).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Boost trees on `train` until dev ROC AUC stops improving for `early_stop_rounds` rounds.
///
/// The returned model keeps the trees up to the best dev round.
pub fn train_gbm(
    train: &[SparseVector],
    labels: &[u8],
    dev: &[SparseVector],
    dev_labels: &[u8],
    config: &GbmConfig,
) -> Result<GbmFit> {
    config.validate()?;
    if train.len() != labels.len() || dev.len() != dev_labels.len() {
        return Err(Error::InvalidInput("features and labels differ in length".into()));
    }
    if train.len() < 2 {
        return Err(Error::InvalidInput("need at least two training examples".into()));
    }
    check_binary(labels)?;
    check_binary(dev_labels)?;

    let pos = labels.iter().filter(|&&y| y != 0).count() as f64;
    let base_score = (pos / (labels.len() as f64 - pos)).ln();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l != 0))).collect();
    let mut margin = vec![base_score; train.len()];
    let mut dev_margin = vec![base_score; dev.len()];
    let mut trees = Vec::new();
    let mut stopper = EarlyStopper::new(config.early_stop_rounds);
    let mut trace = Vec::new();

    for _ in 0..config.max_rounds {
        let (g, h): (Vec<f64>, Vec<f64>) = margin
            .iter()
            .zip(&y)
            .map(|(&m, &yi)| {
                let p = sigmoid(m);
                (p - yi, (p * (1.0 - p)).max(1e-16))
            })
            .unzip();
        let tree = TreeBuilder { x: train, g: &g, h: &h, config }.build();
        for (m, x) in margin.iter_mut().zip(train) {
            *m += config.learning_rate * tree.predict(x);
        }
        for (m, x) in dev_margin.iter_mut().zip(dev) {
            *m += config.learning_rate * tree.predict(x);
        }
        trees.push(tree);
        let auc = roc_auc(&dev_margin, dev_labels)?;
        trace.push(auc);
        if stopper.observe(auc) == StopDecision::Stop {
            break;
        }
    }
    let best_round = stopper.best_step().max(1).min(trees.len());
    trees.truncate(best_round);
    Ok(GbmFit {
        model: GbmModel { trees, learning_rate: config.learning_rate, base_score },
        dev_auc_trace: trace,
        best_round,
    })
}

struct TreeBuilder<'a> {
    x: &'a [SparseVector],
    g: &'a [f64],
    h: &'a [f64],
    config: &'a GbmConfig,
}

struct SplitCandidate {
    gain: f64,
    feature: u32,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn build(&self) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let rows: Vec<usize> = (0..self.x.len()).collect();
        self.grow(&mut tree, rows, 0);
        tree
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.config.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.config.lambda)
    }

    fn grow(&self, tree: &mut Tree, rows: Vec<usize>, depth: usize) -> u32 {
        let id = tree.nodes.len() as u32;
        let g: f64 = rows.iter().map(|&r| self.g[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.h[r]).sum();
        tree.nodes.push(Node::Leaf(self.leaf_value(g, h)));
        if depth >= self.config.max_depth || rows.len() < 2 {
            return id;
        }
        let Some(split) = self.best_split(&rows, g, h) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[r].get(split.feature) < split.threshold);
        let left = self.grow(tree, left_rows, depth + 1);
        let right = self.grow(tree, right_rows, depth + 1);
        tree.nodes[id as usize] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }

    fn best_split(&self, rows: &[usize], g_total: f64, h_total: f64) -> Option<SplitCandidate> {
        let mut entries: Vec<(u32, f64, usize)> =
            rows.iter().flat_map(|&r| self.x[r].entries.iter().map(move |&(f, v)| (f, v, r))).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

        let parent = self.score(g_total, h_total);
        let mut best: Option<SplitCandidate> = None;
        let mut start = 0;
        while start < entries.len() {
            let feature = entries[start].0;
            let mut end = start;
            while end < entries.len() && entries[end].0 == feature {
                end += 1;
            }
            self.scan_feature(&entries[start..end], rows.len(), feature, g_total, h_total, parent, &mut best);
            start = end;
        }
        best
    }

    /// Evaluate every threshold of one feature. `col` holds the node's
    /// non-zero entries sorted by value; the remaining rows share value 0.
    #[allow(clippy::too_many_arguments)]
    fn scan_feature(
        &self,
        col: &[(u32, f64, usize)],
        n_rows: usize,
        feature: u32,
        g_total: f64,
        h_total: f64,
        parent: f64,
        best: &mut Option<SplitCandidate>,
    ) {
        let g_nz: f64 = col.iter().map(|e| self.g[e.2]).sum();
        let h_nz: f64 = col.iter().map(|e| self.h[e.2]).sum();
        let (g_zero, h_zero) = (g_total - g_nz, h_total - h_nz);

        // ordered groups of (value, g, h), the implicit zeros merged in by value
        let mut groups: Vec<(f64, f64, f64)> = Vec::new();
        let mut zero_pending = col.len() < n_rows;
        let mut i = 0;
        while i < col.len() {
            let v = col[i].1;
            if zero_pending && v > 0.0 {
                groups.push((0.0, g_zero, h_zero));
                zero_pending = false;
            }
            let (mut gs, mut hs) = (0.0, 0.0);
            while i < col.len() && col[i].1 == v {
                gs += self.g[col[i].2];
                hs += self.h[col[i].2];
                i += 1;
            }
            if zero_pending && v == 0.0 {
                gs += g_zero;
                hs += h_zero;
                zero_pending = false;
            }
            groups.push((v, gs, hs));
        }
        if zero_pending {
            groups.push((0.0, g_zero, h_zero));
        }

        let (mut gl, mut hl) = (0.0, 0.0);
        for w in 0..groups.len().saturating_sub(1) {
            gl += groups[w].1;
            hl += groups[w].2;
            let (gr, hr) = (g_total - gl, h_total - hl);
            if hl < self.config.min_child_weight || hr < self.config.min_child_weight {
                continue;
            }
            let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.config.gamma;
            if gain <= 1e-12 || best.as_ref().is_some_and(|b| gain <= b.gain) {
                continue;
            }
            let threshold = 0.5 * (groups[w].0 + groups[w + 1].0);
            *best = Some(SplitCandidate { gain, feature, threshold });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn dense(rows: &[Vec<f64>]) -> Vec<SparseVector> {
        rows.iter().map(|r| SparseVector::from_dense(r)).collect()
    }

    #[test]
    fn separable_single_feature() {
        let x = dense(&(0..40).map(|i| vec![f64::from(i)]).collect::<Vec<_>>());
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let fit = train_gbm(&x, &y, &x, &y, &GbmConfig::default()).unwrap();
        let p: Vec<f64> = x.iter().map(|v| fit.model.predict_proba(v)).collect();
        assert_eq!(roc_auc(&p, &y).unwrap(), 1.0);
        assert!(p.iter().all(|&q| q > 0.0 && q < 1.0));
    }

    #[test]
    fn constant_feature_degenerates_to_base() {
        let x = dense(&vec![vec![1.0]; 30]);
        let y: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let fit = train_gbm(&x, &y, &x, &y, &GbmConfig::default()).unwrap();
        assert_eq!(fit.best_round, 1);
        assert!((fit.model.margin(&x[0]) - fit.model.base_score).abs() < 1e-12);
        assert!((fit.model.predict_proba(&x[0]) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(fit.dev_auc_trace.len(), 41);
    }

    #[test]
    fn single_class_rejected() {
        let x = dense(&[vec![1.0], vec![2.0]]);
        assert!(matches!(train_gbm(&x, &[1, 1], &x, &[0, 1], &GbmConfig::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn negative_values_and_implicit_zeros_split_correctly() {
        // label depends on sign; zeros (absent) are negative class
        let vals = [-3.0, -2.0, -1.0, 0.0, 0.0, 1.0, 2.0, 3.0];
        let x = dense(&vals.iter().map(|&v| vec![v]).collect::<Vec<_>>());
        let y: Vec<u8> = vals.iter().map(|&v| u8::from(v > 0.0)).collect();
        let cfg = GbmConfig { min_child_weight: 0.0, ..GbmConfig::default() };
        let fit = train_gbm(&x, &y, &x, &y, &cfg).unwrap();
        let first = &fit.model.trees[0].nodes[0];
        assert!(matches!(first, Node::Split { threshold, .. } if *threshold == 0.5));
    }

    #[test]
    fn respects_max_depth_and_feature_permutation() {
        let mut rng = rng::substream(1, "gbm", 0);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..6).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect())
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[1] + r[4] > 0.6)).collect();
        let cfg = GbmConfig { max_depth: 3, max_rounds: 30, ..GbmConfig::default() };
        let fit = train_gbm(&dense(&rows), &y, &dense(&rows), &y, &cfg).unwrap();
        assert!(fit.model.trees.iter().all(|t| t.depth() <= 3));

        let perm = [5usize, 3, 0, 4, 1, 2];
        let permuted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut out = vec![0.0; 6];
                for (i, &p) in perm.iter().enumerate() {
                    out[p] = r[i];
                }
                out
            })
            .collect();
        let fit_p = train_gbm(&dense(&permuted), &y, &dense(&permuted), &y, &cfg).unwrap();
        for (a, b) in dense(&rows).iter().zip(dense(&permuted).iter()) {
            assert!((fit.model.predict_proba(a) - fit_p.model.predict_proba(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn halts_within_patience_of_last_improvement() {
        let mut rng = rng::substream(2, "gbm-noise", 0);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let y: Vec<u8> = (0..300).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let all = dense(&rows);
        let (train, dev) = all.split_at(200);
        let cfg = GbmConfig { max_rounds: 400, ..GbmConfig::default() };
        let fit = train_gbm(train, &y[..200], dev, &y[200..], &cfg).unwrap();
        let best = fit
            .dev_auc_trace
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &a)| if a > acc.1 { (i + 1, a) } else { acc });
        assert_eq!(fit.best_round, best.0);
        assert!(fit.dev_auc_trace.len() - best.0 <= 40);
        assert!(fit.dev_auc_trace.len() < 400);
    }
}
