//! Single-layer LSTM classifier with optional bidirectionality and attention.
//!
//! Gate pre-activations for a step are `z = x·U + h_prev·W + b` with `U: d×4H`,
//! `W: H×4H` and `b: 4H`, column blocks ordered input, forget, output,
//! candidate. Attention scores each hidden state with
//! `u_t = tanh(H_t·Uw + bw)`, `α = softmax(u_t·ctx)`, and classifies the
//! context `Σ α_t H_t`. Without attention the readout is the forward state at
//! the last token, concatenated with the backward state at the first token
//! when bidirectional. The output layer is a two-way softmax.
//!
//! Sequences are truncated to `max_sequence` tokens and only real tokens are
//! run through the network. This is equivalent to zero padding with padded
//! steps masked out: attention over padding is exactly zero and the
//! non-attention readout uses the last real state.
//!
//! All parameters live in one flat `f64` vector described by [`Layout`].

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::early_stop::{EarlyStopper, StopDecision};
use crate::corpus::TokenSequence;
use crate::error::{Error, Result};
use crate::evaluation::roc_auc;
use crate::features::EmbeddingTable;
use crate::numeric::sigmoid;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub hidden_size: usize,
    /// Width of the attention projection; 0 means the readout width.
    pub attention_size: usize,
    /// Width of trainable embeddings; ignored with a pretrained table.
    pub embedding_dim: usize,
    /// Trainable vocabulary size cap.
    pub max_vocab: usize,
    /// Minimum training count for a word to get its own trainable row.
    pub min_count: usize,
    pub bidirectional: bool,
    pub attention: bool,
    pub max_sequence: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without dev AUC improvement.
    pub early_stop_epochs: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden_size: 32,
            attention_size: 0,
            embedding_dim: 32,
            max_vocab: 20_000,
            min_count: 1,
            bidirectional: false,
            attention: false,
            max_sequence: 400,
            learning_rate: 0.001,
            batch_size: 128,
            max_epochs: 20,
            early_stop_epochs: 2,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.hidden_size > 0
            && self.embedding_dim > 0
            && self.max_vocab > 0
            && self.max_sequence > 0
            && self.learning_rate > 0.0
            && self.batch_size > 0
            && self.early_stop_epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid lstm config {self:?}")))
        }
    }

    fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }
}

/// Offsets of every parameter block in the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub d: usize,
    pub h: usize,
    pub dirs: usize,
    /// Attention width, 0 without attention.
    pub att: usize,
    /// Trainable embedding rows (vocabulary plus UNK), 0 when pretrained.
    pub emb_rows: usize,
    emb: usize,
    dir: Vec<usize>,
    attn: usize,
    out: usize,
    pub total: usize,
}

impl Layout {
    fn new(d: usize, h: usize, dirs: usize, att: usize, emb_rows: usize) -> Self {
        let emb = 0;
        let mut cursor = emb_rows * d;
        let dir = (0..dirs)
            .map(|_| {
                let start = cursor;
                cursor += d * 4 * h + h * 4 * h + 4 * h;
                start
            })
            .collect();
        let attn = cursor;
        let width = dirs * h;
        if att > 0 {
            cursor += width * att + 2 * att;
        }
        let out = cursor;
        cursor += width * 2 + 2;
        Layout { d, h, dirs, att, emb_rows, emb, dir, attn, out, total: cursor }
    }

    /// Readout width.
    pub fn width(&self) -> usize {
        self.dirs * self.h
    }

    fn u(&self, k: usize) -> usize {
        self.dir[k]
    }

    fn w(&self, k: usize) -> usize {
        self.dir[k] + self.d * 4 * self.h
    }

    fn b(&self, k: usize) -> usize {
        self.w(k) + self.h * 4 * self.h
    }

    fn uw(&self) -> usize {
        self.attn
    }

    fn bw(&self) -> usize {
        self.attn + self.width() * self.att
    }

    fn ctx(&self) -> usize {
        self.bw() + self.att
    }

    fn wc(&self) -> usize {
        self.out
    }

    fn bc(&self) -> usize {
        self.out + self.width() * 2
    }

    /// Named parameter blocks, for gradient checks and inspection.
    pub fn groups(&self) -> Vec<(String, Range<usize>)> {
        let mut g = Vec::new();
        if self.emb_rows > 0 {
            g.push(("embedding".to_string(), self.emb..self.emb + self.emb_rows * self.d));
        }
        for k in 0..self.dirs {
            g.push((format!("U[{k}]"), self.u(k)..self.w(k)));
            g.push((format!("W[{k}]"), self.w(k)..self.b(k)));
            g.push((format!("b[{k}]"), self.b(k)..self.b(k) + 4 * self.h));
        }
        if self.att > 0 {
            g.push(("Uw".to_string(), self.uw()..self.bw()));
            g.push(("bw".to_string(), self.bw()..self.ctx()));
            g.push(("ctx".to_string(), self.ctx()..self.ctx() + self.att));
        }
        g.push(("Wc".to_string(), self.wc()..self.bc()));
        g.push(("bc".to_string(), self.bc()..self.bc() + 2));
        g
    }
}

/// Where input vectors come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSource {
    /// Rows live in the parameter vector; the last row is UNK.
    Trainable { vocab: Vec<String> },
    /// A fixed table; unknown words use its mean vector.
    Pretrained(Arc<EmbeddingTable>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub config: LstmConfig,
    pub embedding: EmbeddingSource,
    pub params: Vec<f64>,
    layout: Layout,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmOutput {
    /// Probability of the highlight class.
    pub probability: f64,
    /// One weight per real (non-padded) token, attention variant only.
    pub attention: Option<Vec<f64>>,
}

struct DirCache {
    /// T×4H post-activation gates (i, f, o, q), indexed by sequence position.
    gates: Vec<f64>,
    cell: Vec<f64>,
    tanh_cell: Vec<f64>,
    hidden: Vec<f64>,
}

struct Cache {
    dirs: Vec<DirCache>,
    /// T×width concatenated hidden states.
    states: Vec<f64>,
    /// T×att attention projections.
    u: Vec<f64>,
    alpha: Vec<f64>,
    readout: Vec<f64>,
    probs: [f64; 2],
}

impl LstmModel {
    /// Fresh model with parameters uniform in ±1/√hidden_size.
    pub fn new(config: LstmConfig, embedding: EmbeddingSource, seed: u64) -> Result<Self> {
        config.validate()?;
        let (d, emb_rows, index) = match &embedding {
            EmbeddingSource::Trainable { vocab } => {
                (config.embedding_dim, vocab.len() + 1, vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect())
            }
            EmbeddingSource::Pretrained(t) => (t.dimension(), 0, HashMap::new()),
        };
        let dirs = config.directions();
        let att = match (config.attention, config.attention_size) {
            (false, _) => 0,
            (true, 0) => dirs * config.hidden_size,
            (true, a) => a,
        };
        let layout = Layout::new(d, config.hidden_size, dirs, att, emb_rows);
        let bound = 1.0 / (config.hidden_size as f64).sqrt();
        let mut r = rng::substream(seed, "lstm-init", 0);
        let params = (0..layout.total).map(|_| r.gen_range(-bound..bound)).collect();
        Ok(LstmModel { config, embedding, params, layout, index })
    }

    /// Rebuild from stored parts; fails when `params` does not fit the layout.
    pub fn from_parts(config: LstmConfig, embedding: EmbeddingSource, params: Vec<f64>) -> Result<Self> {
        let mut m = LstmModel::new(config, embedding, 0)?;
        if params.len() != m.layout.total {
            return Err(Error::Format(format!("expected {} lstm parameters, found {}", m.layout.total, params.len())));
        }
        m.params = params;
        Ok(m)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn unk_id(&self) -> usize {
        match &self.embedding {
            EmbeddingSource::Trainable { vocab } => vocab.len(),
            EmbeddingSource::Pretrained(t) => t.len(),
        }
    }

    /// Token ids, truncated to `max_sequence`; unknown words map to the UNK id.
    pub fn encode(&self, tokens: &TokenSequence) -> Vec<usize> {
        tokens
            .tokens
            .iter()
            .take(self.config.max_sequence)
            .map(|t| match &self.embedding {
                EmbeddingSource::Trainable { .. } => self.index.get(t).copied(),
                EmbeddingSource::Pretrained(table) => table.index_of(t),
            })
            .map(|id| id.unwrap_or_else(|| self.unk_id()))
            .collect()
    }

    /// Like [`encode`](Self::encode), but an empty sequence becomes a single UNK.
    pub fn encode_nonempty(&self, tokens: &TokenSequence) -> Vec<usize> {
        let ids = self.encode(tokens);
        if ids.is_empty() {
            vec![self.unk_id()]
        } else {
            ids
        }
    }

    fn input<'a>(&'a self, params: &'a [f64], id: usize) -> &'a [f64] {
        let d = self.layout.d;
        match &self.embedding {
            EmbeddingSource::Trainable { .. } => &params[self.layout.emb + id * d..self.layout.emb + (id + 1) * d],
            EmbeddingSource::Pretrained(t) if id < t.len() => t.row(id),
            EmbeddingSource::Pretrained(t) => t.unk_vector(),
        }
    }

    pub fn forward(&self, tokens: &TokenSequence) -> Result<LstmOutput> {
        self.forward_ids(&self.encode(tokens))
    }

    pub fn forward_ids(&self, ids: &[usize]) -> Result<LstmOutput> {
        if ids.is_empty() {
            return Err(Error::InvalidInput("empty token sequence".into()));
        }
        let cache = self.run(&self.params, ids);
        Ok(LstmOutput { probability: cache.probs[1], attention: (self.layout.att > 0).then_some(cache.alpha) })
    }

    /// Attention over a zero-padded window of `max_sequence` positions.
    pub fn padded_attention(&self, tokens: &TokenSequence) -> Result<Option<Vec<f64>>> {
        let out = self.forward(tokens)?;
        Ok(out.attention.map(|mut a| {
            a.resize(self.config.max_sequence, 0.0);
            a
        }))
    }

    /// Class-1 probability; an empty sequence is read as one unknown token.
    pub fn predict_proba(&self, tokens: &TokenSequence) -> f64 {
        self.run(&self.params, &self.encode_nonempty(tokens)).probs[1]
    }

    fn run_direction(&self, p: &[f64], k: usize, ids: &[usize]) -> DirCache {
        let Layout { d, h, .. } = self.layout;
        let g4 = 4 * h;
        let n = ids.len();
        let u = &p[self.layout.u(k)..self.layout.w(k)];
        let w = &p[self.layout.w(k)..self.layout.b(k)];
        let b = &p[self.layout.b(k)..self.layout.b(k) + g4];
        let mut c = DirCache {
            gates: vec![0.0; n * g4],
            cell: vec![0.0; n * h],
            tanh_cell: vec![0.0; n * h],
            hidden: vec![0.0; n * h],
        };
        let mut prev: Option<usize> = None;
        let mut z = vec![0.0; g4];
        for step in 0..n {
            let t = if k == 0 { step } else { n - 1 - step };
            z.copy_from_slice(b);
            let x = self.input(p, ids[t]);
            for (i, &xi) in x.iter().enumerate().take(d) {
                if xi != 0.0 {
                    for (zj, uj) in z.iter_mut().zip(&u[i * g4..(i + 1) * g4]) {
                        *zj += xi * uj;
                    }
                }
            }
            if let Some(pt) = prev {
                for i in 0..h {
                    let hi = c.hidden[pt * h + i];
                    for (zj, wj) in z.iter_mut().zip(&w[i * g4..(i + 1) * g4]) {
                        *zj += hi * wj;
                    }
                }
            }
            for j in 0..h {
                let ig = sigmoid(z[j]);
                let fg = sigmoid(z[h + j]);
                let og = sigmoid(z[2 * h + j]);
                let qg = z[3 * h + j].tanh();
                let c_prev = prev.map_or(0.0, |pt| c.cell[pt * h + j]);
                let cell = fg * c_prev + ig * qg;
                let tc = cell.tanh();
                c.gates[t * g4 + j] = ig;
                c.gates[t * g4 + h + j] = fg;
                c.gates[t * g4 + 2 * h + j] = og;
                c.gates[t * g4 + 3 * h + j] = qg;
                c.cell[t * h + j] = cell;
                c.tanh_cell[t * h + j] = tc;
                c.hidden[t * h + j] = og * tc;
            }
            prev = Some(t);
        }
        c
    }

    fn run(&self, p: &[f64], ids: &[usize]) -> Cache {
        let l = &self.layout;
        let (h, width, att) = (l.h, l.width(), l.att);
        let n = ids.len();
        let dirs: Vec<DirCache> = (0..l.dirs).map(|k| self.run_direction(p, k, ids)).collect();
        let mut states = vec![0.0; n * width];
        for t in 0..n {
            for (k, dc) in dirs.iter().enumerate() {
                states[t * width + k * h..t * width + (k + 1) * h].copy_from_slice(&dc.hidden[t * h..(t + 1) * h]);
            }
        }

        let mut u = Vec::new();
        let mut alpha = Vec::new();
        let mut readout = vec![0.0; width];
        if att > 0 {
            let uw = &p[l.uw()..l.bw()];
            let bw = &p[l.bw()..l.ctx()];
            let ctx = &p[l.ctx()..l.ctx() + att];
            u = vec![0.0; n * att];
            let mut scores = vec![0.0; n];
            for t in 0..n {
                let ut = &mut u[t * att..(t + 1) * att];
                ut.copy_from_slice(bw);
                for i in 0..width {
                    let s = states[t * width + i];
                    for (uj, wj) in ut.iter_mut().zip(&uw[i * att..(i + 1) * att]) {
                        *uj += s * wj;
                    }
                }
                for v in ut.iter_mut() {
                    *v = v.tanh();
                }
                scores[t] = ut.iter().zip(ctx).map(|(a, b)| a * b).sum();
            }
            let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            alpha = exps.iter().map(|e| e / z).collect();
            for t in 0..n {
                for i in 0..width {
                    readout[i] += alpha[t] * states[t * width + i];
                }
            }
        } else {
            readout[..h].copy_from_slice(&states[(n - 1) * width..(n - 1) * width + h]);
            if l.dirs == 2 {
                readout[h..].copy_from_slice(&states[h..2 * h]);
            }
        }

        let wc = &p[l.wc()..l.bc()];
        let bc = &p[l.bc()..l.bc() + 2];
        let mut logits = [bc[0], bc[1]];
        for i in 0..width {
            logits[0] += readout[i] * wc[i * 2];
            logits[1] += readout[i] * wc[i * 2 + 1];
        }
        let m = logits[0].max(logits[1]);
        let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
        let probs = [e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1])];
        Cache { dirs, states, u, alpha, readout, probs }
    }

    /// Cross-entropy of one example at parameters `p`, accumulating its gradient into `grad`.
    pub fn loss_and_grad(&self, p: &[f64], ids: &[usize], label: u8, grad: &mut [f64]) -> f64 {
        let l = &self.layout;
        let (h, width, att) = (l.h, l.width(), l.att);
        let n = ids.len();
        let cache = self.run(p, ids);
        let y = usize::from(label != 0);
        let py = cache.probs[y];
        let loss = if py.is_nan() { f64::NAN } else { -py.max(f64::MIN_POSITIVE).ln() };

        let mut dlogits = cache.probs;
        dlogits[y] -= 1.0;
        let wc = &p[l.wc()..l.bc()];
        let mut dread = vec![0.0; width];
        for i in 0..width {
            grad[l.wc() + i * 2] += cache.readout[i] * dlogits[0];
            grad[l.wc() + i * 2 + 1] += cache.readout[i] * dlogits[1];
            dread[i] = wc[i * 2] * dlogits[0] + wc[i * 2 + 1] * dlogits[1];
        }
        grad[l.bc()] += dlogits[0];
        grad[l.bc() + 1] += dlogits[1];

        let mut dstates = vec![0.0; n * width];
        if att > 0 {
            let uw = &p[l.uw()..l.bw()];
            let ctx = &p[l.ctx()..l.ctx() + att];
            let dalpha: Vec<f64> =
                (0..n).map(|t| (0..width).map(|i| dread[i] * cache.states[t * width + i]).sum()).collect();
            let weighted: f64 = cache.alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
            for t in 0..n {
                for i in 0..width {
                    dstates[t * width + i] += cache.alpha[t] * dread[i];
                }
                let ds = cache.alpha[t] * (dalpha[t] - weighted);
                let ut = &cache.u[t * att..(t + 1) * att];
                for j in 0..att {
                    grad[l.ctx() + j] += ds * ut[j];
                    let da = ds * ctx[j] * (1.0 - ut[j] * ut[j]);
                    grad[l.bw() + j] += da;
                    for i in 0..width {
                        grad[l.uw() + i * att + j] += cache.states[t * width + i] * da;
                        dstates[t * width + i] += uw[i * att + j] * da;
                    }
                }
            }
        } else {
            for i in 0..h {
                dstates[(n - 1) * width + i] += dread[i];
            }
            if l.dirs == 2 {
                for i in 0..h {
                    dstates[h + i] += dread[h + i];
                }
            }
        }

        for k in 0..l.dirs {
            self.backprop_direction(p, k, ids, &cache.dirs[k], &dstates, grad);
        }
        loss
    }

    fn backprop_direction(&self, p: &[f64], k: usize, ids: &[usize], c: &DirCache, dstates: &[f64], grad: &mut [f64]) {
        let l = &self.layout;
        let (d, h, width) = (l.d, l.h, l.width());
        let g4 = 4 * h;
        let n = ids.len();
        let u = &p[l.u(k)..l.w(k)];
        let w = &p[l.w(k)..l.b(k)];
        let trainable = l.emb_rows > 0;
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; g4];
        for step in (0..n).rev() {
            let t = if k == 0 { step } else { n - 1 - step };
            let prev = (step > 0).then(|| if k == 0 { step - 1 } else { n - step });
            for j in 0..h {
                let gi = c.gates[t * g4 + j];
                let gf = c.gates[t * g4 + h + j];
                let go = c.gates[t * g4 + 2 * h + j];
                let gq = c.gates[t * g4 + 3 * h + j];
                let tc = c.tanh_cell[t * h + j];
                let dh = dstates[t * width + k * h + j] + dh_next[j];
                let dout = dh * tc;
                let dcell = dh * go * (1.0 - tc * tc) + dc_next[j];
                let c_prev = prev.map_or(0.0, |pt| c.cell[pt * h + j]);
                dc_next[j] = dcell * gf;
                dz[j] = dcell * gq * gi * (1.0 - gi);
                dz[h + j] = dcell * c_prev * gf * (1.0 - gf);
                dz[2 * h + j] = dout * go * (1.0 - go);
                dz[3 * h + j] = dcell * gi * (1.0 - gq * gq);
            }
            let x = self.input(p, ids[t]);
            for i in 0..d {
                let xi = x[i];
                let row = l.u(k) + i * g4;
                let mut dx = 0.0;
                for j in 0..g4 {
                    grad[row + j] += xi * dz[j];
                    dx += u[i * g4 + j] * dz[j];
                }
                if trainable {
                    grad[l.emb + ids[t] * d + i] += dx;
                }
            }
            for j in 0..g4 {
                grad[l.b(k) + j] += dz[j];
            }
            match prev {
                Some(pt) => {
                    for i in 0..h {
                        let hp = c.hidden[pt * h + i];
                        let row = l.w(k) + i * g4;
                        let mut acc = 0.0;
                        for j in 0..g4 {
                            grad[row + j] += hp * dz[j];
                            acc += w[i * g4 + j] * dz[j];
                        }
                        dh_next[i] = acc;
                    }
                }
                None => dh_next.fill(0.0),
            }
        }
    }

    /// Summed loss and gradient over a batch, computed in fixed-size chunks so
    /// the floating-point result does not depend on thread count.
    fn batch_gradient(&self, batch: &[(Vec<usize>, u8)]) -> (f64, Vec<f64>) {
        const CHUNK: usize = 16;
        let total = self.layout.total;
        let parts: Vec<(f64, Vec<f64>)> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; total];
                let loss = chunk.iter().map(|(ids, y)| self.loss_and_grad(&self.params, ids, *y, &mut g)).sum();
                (loss, g)
            })
            .collect();
        let mut grad = vec![0.0; total];
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        (loss, grad)
    }
}

/// Single forward pass.
pub fn lstm_forward(model: &LstmModel, tokens: &TokenSequence) -> Result<LstmOutput> {
    model.forward(tokens)
}

/// Fitted LSTM and its per-epoch dev AUC trace.
#[derive(Debug, Clone)]
pub struct LstmFit {
    pub model: LstmModel,
    pub dev_auc_trace: Vec<f64>,
    /// 1-based epoch of the best dev AUC, 0 if no epoch ran.
    pub best_epoch: usize,
}

/// The `max_vocab` most frequent training words seen at least `min_count` times.
pub fn trainable_vocabulary(docs: &[&TokenSequence], max_vocab: usize, min_count: usize) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        for t in &d.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(max_vocab).map(|(w, _)| w.to_string()).collect()
}

fn dev_auc(model: &LstmModel, dev: &[(Vec<usize>, u8)]) -> Result<f64> {
    let scores: Vec<f64> = dev.par_iter().map(|(ids, _)| model.run(&model.params, ids).probs[1]).collect();
    let labels: Vec<u8> = dev.iter().map(|d| d.1).collect();
    roc_auc(&scores, &labels)
}

/// Train with Adam on mini-batches, stopping after `early_stop_epochs` epochs
/// without dev AUC improvement; returns the parameters of the best epoch.
///
/// With `pretrained` the embedding table is frozen, otherwise embeddings are
/// trained from a vocabulary built on `train`.
pub fn train_lstm(
    train: &[(TokenSequence, u8)],
    dev: &[(TokenSequence, u8)],
    pretrained: Option<Arc<EmbeddingTable>>,
    config: &LstmConfig,
    seed: u64,
) -> Result<LstmFit> {
    config.validate()?;
    for set in [train, dev] {
        let pos = set.iter().filter(|e| e.1 != 0).count();
        if pos == 0 || pos == set.len() {
            return Err(Error::SingleClass);
        }
    }
    let embedding = match pretrained {
        Some(t) => EmbeddingSource::Pretrained(t),
        None => {
            let docs: Vec<&TokenSequence> = train.iter().map(|e| &e.0).collect();
            EmbeddingSource::Trainable { vocab: trainable_vocabulary(&docs, config.max_vocab, config.min_count) }
        }
    };
    let mut model = LstmModel::new(config.clone(), embedding, seed)?;
    let encode = |set: &[(TokenSequence, u8)], m: &LstmModel| -> Vec<(Vec<usize>, u8)> {
        set.iter().map(|(t, y)| (m.encode_nonempty(t), *y)).collect()
    };
    let train_ids = encode(train, &model);
    let dev_ids = encode(dev, &model);

    let mut opt = Adam::new(model.layout.total, config.learning_rate);
    let mut stopper = EarlyStopper::new(config.early_stop_epochs);
    let mut best_params = model.params.clone();
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..train_ids.len()).collect();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng::substream(seed, "lstm-epoch", epoch as u64));
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(Vec<usize>, u8)> = idx.iter().map(|&i| train_ids[i].clone()).collect();
            let (loss, mut grad) = model.batch_gradient(&batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, batch: b });
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(&mut model.params, &grad);
        }
        let auc = dev_auc(&model, &dev_ids)?;
        trace.push(auc);
        match stopper.observe(auc) {
            StopDecision::Improved => best_params.clone_from(&model.params),
            StopDecision::Stop => break,
            StopDecision::Continue => {}
        }
    }
    model.params = best_params;
    Ok(LstmFit { model, dev_auc_trace: trace, best_epoch: stopper.best_step() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PunctMode;

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::new(s.split_whitespace().map(String::from).collect(), PunctMode::Strip)
    }

    fn small(attention: bool, bidirectional: bool) -> LstmModel {
        let config = LstmConfig { hidden_size: 3, embedding_dim: 4, attention, bidirectional, ..LstmConfig::default() };
        let vocab = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
        let mut m = LstmModel::new(config, EmbeddingSource::Trainable { vocab }, 5).unwrap();
        // larger weights than the default init make the check more demanding
        let mut r = rng::substream(6, "wide", 0);
        m.params.iter_mut().for_each(|p| *p = r.gen_range(-1.0..1.0));
        m
    }

    #[test]
    fn zero_weights_give_one_half() {
        let mut m = small(false, true);
        m.params.fill(0.0);
        assert_eq!(m.forward(&seq("a b c")).unwrap().probability, 0.5);
        assert!(m.forward(&seq("")).is_err());
        assert_eq!(m.predict_proba(&seq("")), 0.5);
    }

    #[test]
    fn single_token_attention_is_one() {
        let m = small(true, false);
        assert_eq!(m.forward(&seq("b")).unwrap().attention.unwrap(), vec![1.0]);
        let padded = m.padded_attention(&seq("a b zzz")).unwrap().unwrap();
        assert_eq!(padded.len(), 400);
        assert!(padded[3..].iter().all(|&a| a == 0.0));
        assert!((padded.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncates_to_max_sequence() {
        let m = small(false, false);
        let long = TokenSequence::new(vec!["a".to_string(); 450], PunctMode::Strip);
        assert_eq!(m.encode(&long).len(), 400);
        assert_eq!(m.encode(&seq("a zzz")), vec![0, 5]);
    }

    #[test]
    fn memorizes_two_documents() {
        let mut data = Vec::new();
        for _ in 0..20 {
            data.push((seq("good great fun"), 1));
            data.push((seq("dull boring slow"), 0));
        }
        let config = LstmConfig {
            hidden_size: 4,
            embedding_dim: 4,
            learning_rate: 0.05,
            batch_size: 8,
            max_epochs: 10,
            ..LstmConfig::default()
        };
        let fit = train_lstm(&data, &data, None, &config, 1).unwrap();
        assert_eq!(fit.dev_auc_trace[fit.best_epoch - 1], 1.0);
        let zero = LstmConfig { max_epochs: 0, ..config };
        let fresh = train_lstm(&data, &data, None, &zero, 1).unwrap();
        assert!(fresh.dev_auc_trace.is_empty());
        assert_eq!(fresh.best_epoch, 0);
    }

    #[test]
    fn nan_parameters_poison_the_loss() {
        let data = [(seq("a b"), 1), (seq("c d"), 0)];
        let config = LstmConfig { hidden_size: 2, embedding_dim: 2, ..LstmConfig::default() };
        let mut m = LstmModel::new(config, EmbeddingSource::Trainable { vocab: vec!["a".into()] }, 0).unwrap();
        m.params[0] = f64::NAN;
        let ids: Vec<(Vec<usize>, u8)> = data.iter().map(|(t, y)| (m.encode(t), *y)).collect();
        let (loss, _) = m.batch_gradient(&ids);
        assert!(loss.is_nan());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let batch = [(vec![0, 1, 2, 5], 1u8), (vec![3, 3], 0), (vec![4, 0, 1, 2, 3], 1)];
        for (att, bi) in [(false, false), (false, true), (true, false), (true, true)] {
            let m = small(att, bi);
            let mut grad = vec![0.0; m.layout.total];
            for (ids, y) in &batch {
                m.loss_and_grad(&m.params, ids, *y, &mut grad);
            }
            let loss = |p: &[f64]| -> f64 {
                let mut scratch = vec![0.0; p.len()];
                batch.iter().map(|(ids, y)| m.loss_and_grad(p, ids, *y, &mut scratch)).sum()
            };
            let mut p = m.params.clone();
            let mut worst: f64 = 0.0;
            for i in 0..p.len() {
                let orig = p[i];
                p[i] = orig + 1e-6;
                let up = loss(&p);
                p[i] = orig - 1e-6;
                let down = loss(&p);
                p[i] = orig;
                let numeric = (up - down) / 2e-6;
                let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-6);
                worst = worst.max(rel);
            }
            assert!(worst < 1e-4, "attention={att} bidirectional={bi}: {worst}");
        }
    }
}
