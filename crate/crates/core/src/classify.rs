//! Word n-gram text classifiers: an averaged-embedding softmax model trained
//! by SGD, and a linear hinge-loss baseline with C chosen by stratified k-fold F1.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Label;

/// Longest word n-gram emitted by [`tokenize`].
pub const MAX_NGRAM: usize = 6;

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercased words. Anything that is not alphanumeric separates words, except
/// an apostrophe with letters or digits on both sides.
pub fn words(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if is_apostrophe(c)
            && !cur.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            cur.push('\'');
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// All contiguous word n-grams for n = 1..=6, joined with `_`, shortest first.
pub fn tokenize(text: &str) -> Vec<String> {
    let w = words(text);
    let mut out = Vec::new();
    for n in 1..=MAX_NGRAM.min(w.len()) {
        for win in w.windows(n) {
            out.push(win.join("_"));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    min_freq: u32,
    entries: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    min_freq: u32,
    entries: Vec<String>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        let index = r
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i as u32))
            .collect();
        Vocab {
            min_freq: r.min_freq,
            entries: r.entries,
            index,
        }
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            min_freq: v.min_freq,
            entries: v.entries,
        }
    }
}

impl Vocab {
    /// N-grams occurring at least `min_freq` times, indexed in sorted order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_freq: u32) -> Result<Self> {
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in texts {
            for g in tokenize(t) {
                *counts.entry(g).or_default() += 1;
            }
        }
        let entries: Vec<String> = counts
            .into_iter()
            .filter(|(_, n)| *n >= min_freq.max(1))
            .map(|(g, _)| g)
            .collect();
        if entries.is_empty() {
            return Err(Error::EmptyVocab);
        }
        Ok(VocabRepr { min_freq, entries }.into())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_freq(&self) -> u32 {
        self.min_freq
    }

    pub fn get(&self, ngram: &str) -> Option<u32> {
        self.index.get(ngram).copied()
    }

    pub fn ngram(&self, id: u32) -> &str {
        &self.entries[id as usize]
    }

    /// In-vocabulary n-gram ids of `text`, with repeats.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text).iter().filter_map(|g| self.get(g)).collect()
    }
}

/// A probability model over the two classes.
pub trait Classifier {
    /// Probability of the positive class.
    fn predict(&self, text: &str) -> f64;

    /// Up to `k` n-grams most indicative of the positive class, best first.
    fn top_features(&self, k: usize) -> Vec<(String, f64)>;

    fn classify(&self, text: &str, threshold: f64) -> Label {
        classify_probability(self.predict(text), threshold)
    }
}

/// Positive iff `p >= threshold`.
pub fn classify_probability(p: f64, threshold: f64) -> Label {
    if p >= threshold {
        Label::Positive
    } else {
        Label::Negative
    }
}

fn rank_features(scores: impl Iterator<Item = (String, f64)>, k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = scores.collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub dim: usize,
    pub epochs: usize,
    pub step: f64,
    pub min_freq: u32,
    pub seed: u64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dim: 100,
            epochs: 20,
            step: 0.05,
            min_freq: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub params: EmbeddingParams,
    pub train_size: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// A document as n-gram ids plus its label.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDoc {
    pub ids: Vec<u32>,
    pub label: Label,
}

fn class_index(l: Label) -> usize {
    match l {
        Label::Negative => 0,
        Label::Positive => 1,
    }
}

/// Averaged n-gram embeddings feeding a two-way softmax layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    vocab: Vocab,
    dim: usize,
    /// N × D, row-major.
    embedding: Vec<f64>,
    /// D × 2, row-major (column 0 negative, column 1 positive).
    output: Vec<f64>,
    bias: [f64; 2],
    meta: Option<TrainingMeta>,
}

fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

impl EmbeddingModel {
    /// All parameters zero: every prediction is 0.5.
    pub fn zeroed(vocab: Vocab, dim: usize) -> Self {
        let n = vocab.len();
        EmbeddingModel {
            vocab,
            dim,
            embedding: vec![0.0; n * dim],
            output: vec![0.0; dim * 2],
            bias: [0.0; 2],
            meta: None,
        }
    }

    /// Embeddings uniform in ±1/√D, softmax layer zero.
    pub fn initialized(vocab: Vocab, dim: usize, seed: u64) -> Self {
        let mut m = EmbeddingModel::zeroed(vocab, dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = 1.0 / (dim as f64).sqrt();
        for w in &mut m.embedding {
            *w = rng.gen_range(-a..a);
        }
        m
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn meta(&self) -> Option<&TrainingMeta> {
        self.meta.as_ref()
    }

    pub fn encode(&self, text: &str, label: Label) -> EncodedDoc {
        EncodedDoc {
            ids: self.vocab.encode(text),
            label,
        }
    }

    fn hidden(&self, ids: &[u32]) -> Vec<f64> {
        let mut h = vec![0.0; self.dim];
        if ids.is_empty() {
            return h;
        }
        for &id in ids {
            let row = &self.embedding[id as usize * self.dim..(id as usize + 1) * self.dim];
            for (hd, e) in h.iter_mut().zip(row) {
                *hd += e;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        h.iter_mut().for_each(|x| *x *= inv);
        h
    }

    fn logits(&self, h: &[f64]) -> [f64; 2] {
        let mut z = self.bias;
        for (d, hd) in h.iter().enumerate() {
            z[0] += hd * self.output[2 * d];
            z[1] += hd * self.output[2 * d + 1];
        }
        z
    }

    /// Class probabilities (negative, positive) for encoded ids.
    pub fn probabilities(&self, ids: &[u32]) -> [f64; 2] {
        softmax(self.logits(&self.hidden(ids)))
    }

    /// Mean negative log-likelihood.
    pub fn loss(&self, docs: &[EncodedDoc]) -> f64 {
        if docs.is_empty() {
            return 0.0;
        }
        let total: f64 = docs
            .iter()
            .map(|d| {
                -self.probabilities(&d.ids)[class_index(d.label)]
                    .max(f64::MIN_POSITIVE)
                    .ln()
            })
            .sum();
        total / docs.len() as f64
    }

    /// Per-document gradient pieces: (h, dz, dh).
    fn doc_grad(&self, doc: &EncodedDoc) -> (Vec<f64>, [f64; 2], Vec<f64>) {
        let h = self.hidden(&doc.ids);
        let p = softmax(self.logits(&h));
        let y = class_index(doc.label);
        let mut dz = p;
        dz[y] -= 1.0;
        let dh = (0..self.dim)
            .map(|d| self.output[2 * d] * dz[0] + self.output[2 * d + 1] * dz[1])
            .collect();
        (h, dz, dh)
    }

    pub fn param_count(&self) -> usize {
        self.embedding.len() + self.output.len() + 2
    }

    /// Parameters flattened as [embedding, output, bias].
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.embedding);
        v.extend_from_slice(&self.output);
        v.extend_from_slice(&self.bias);
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let (e, rest) = flat.split_at(self.embedding.len());
        let (o, b) = rest.split_at(self.output.len());
        self.embedding.copy_from_slice(e);
        self.output.copy_from_slice(o);
        self.bias.copy_from_slice(b);
    }

    /// Analytic gradient of [`loss`](Self::loss), in [`params_flat`](Self::params_flat) layout.
    pub fn gradient(&self, docs: &[EncodedDoc]) -> Vec<f64> {
        let mut g = vec![0.0; self.param_count()];
        if docs.is_empty() {
            return g;
        }
        let off_out = self.embedding.len();
        let off_bias = off_out + self.output.len();
        let scale = 1.0 / docs.len() as f64;
        for doc in docs {
            let (h, dz, dh) = self.doc_grad(doc);
            for d in 0..self.dim {
                g[off_out + 2 * d] += scale * h[d] * dz[0];
                g[off_out + 2 * d + 1] += scale * h[d] * dz[1];
            }
            g[off_bias] += scale * dz[0];
            g[off_bias + 1] += scale * dz[1];
            if !doc.ids.is_empty() {
                let share = scale / doc.ids.len() as f64;
                for &id in &doc.ids {
                    let base = id as usize * self.dim;
                    for d in 0..self.dim {
                        g[base + d] += share * dh[d];
                    }
                }
            }
        }
        g
    }

    /// One plain SGD step on a single document.
    fn sgd_step(&mut self, doc: &EncodedDoc, lr: f64) {
        let (h, dz, dh) = self.doc_grad(doc);
        for (out, hd) in self.output.chunks_exact_mut(2).zip(&h) {
            out[0] -= lr * hd * dz[0];
            out[1] -= lr * hd * dz[1];
        }
        self.bias[0] -= lr * dz[0];
        self.bias[1] -= lr * dz[1];
        if !doc.ids.is_empty() {
            let share = lr / doc.ids.len() as f64;
            for &id in &doc.ids {
                let base = id as usize * self.dim;
                for (e, g) in self.embedding[base..base + self.dim].iter_mut().zip(&dh) {
                    *e -= share * g;
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params_flat().iter().all(|x| x.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(
            &SavedModel::Embedding(self.clone()).versioned(),
        )?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        match SavedModel::from_json(text)? {
            SavedModel::Embedding(m) => Ok(m),
            SavedModel::Linear(_) => Err(Error::Invalid("expected an embedding model".into())),
        }
    }
}

impl Classifier for EmbeddingModel {
    fn predict(&self, text: &str) -> f64 {
        self.probabilities(&self.vocab.encode(text))[1]
    }

    /// Scores each n-gram by how far its embedding pushes the positive logit
    /// above the negative one.
    fn top_features(&self, k: usize) -> Vec<(String, f64)> {
        let diff: Vec<f64> = (0..self.dim)
            .map(|d| self.output[2 * d + 1] - self.output[2 * d])
            .collect();
        let scores = (0..self.vocab.len()).map(|i| {
            let row = &self.embedding[i * self.dim..(i + 1) * self.dim];
            let s: f64 = row.iter().zip(&diff).map(|(e, w)| e * w).sum();
            (self.vocab.ngram(i as u32).to_string(), s)
        });
        rank_features(scores, k)
    }
}

fn check_two_classes<S: AsRef<str>>(corpus: &[(S, Label)]) -> Result<()> {
    let pos = corpus.iter().any(|(_, l)| *l == Label::Positive);
    let neg = corpus.iter().any(|(_, l)| *l == Label::Negative);
    if pos && neg {
        Ok(())
    } else {
        Err(Error::SingleClass)
    }
}

/// Trains the embedding model by seeded per-document SGD on the mean NLL.
pub fn train_embedding<S: AsRef<str>>(
    corpus: &[(S, Label)],
    params: &EmbeddingParams,
) -> Result<EmbeddingModel> {
    check_two_classes(corpus)?;
    if params.dim == 0 || params.step <= 0.0 {
        return Err(Error::Invalid("dim and step must be positive".into()));
    }
    let vocab = Vocab::build(corpus.iter().map(|(t, _)| t.as_ref()), params.min_freq)?;
    let mut model = EmbeddingModel::initialized(vocab, params.dim, params.seed);
    let docs: Vec<EncodedDoc> = corpus
        .iter()
        .map(|(t, l)| model.encode(t.as_ref(), *l))
        .collect();
    let initial_loss = model.loss(&docs);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..docs.len()).collect();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            model.sgd_step(&docs[i], params.step);
        }
    }
    if !model.is_finite() {
        return Err(Error::Invariant(
            "training diverged to non-finite parameters".into(),
        ));
    }
    model.meta = Some(TrainingMeta {
        params: *params,
        train_size: docs.len(),
        initial_loss,
        final_loss: model.loss(&docs),
    });
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub min_freq: u32,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            c_grid: vec![1.0, 10.0, 100.0, 1000.0],
            folds: 5,
            min_freq: 2,
            seed: 0,
            max_iter: 1000,
            tol: 1e-3,
        }
    }
}

/// Hinge-loss linear model over L2-normalized n-gram presence vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    vocab: Vocab,
    weights: Vec<f64>,
    bias: f64,
    c: f64,
    /// Mean validation F1 for each C tried.
    cv_f1: Vec<(f64, f64)>,
}

type SparseVec = Vec<(u32, f64)>;

fn features(vocab: &Vocab, text: &str) -> SparseVec {
    let mut ids = vocab.encode(text);
    ids.sort_unstable();
    ids.dedup();
    let norm = (ids.len() as f64).sqrt();
    ids.into_iter().map(|i| (i, 1.0 / norm)).collect()
}

/// Dual coordinate descent for the L2-regularized hinge-loss SVM
/// (min ½‖w‖² + C Σ max(0, 1 − y(w·x + b))), with the bias as a constant feature.
fn fit_svm(
    x: &[SparseVec],
    y: &[f64],
    n_features: usize,
    c: f64,
    params: &LinearParams,
    seed: u64,
) -> (Vec<f64>, f64) {
    let mut w = vec![0.0; n_features];
    let mut b = 0.0;
    let mut alpha = vec![0.0; x.len()];
    let qd: Vec<f64> = x
        .iter()
        .map(|xi| xi.iter().map(|(_, v)| v * v).sum::<f64>() + 1.0)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    for _ in 0..params.max_iter {
        order.shuffle(&mut rng);
        let (mut max_pg, mut min_pg) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let margin: f64 = x[i].iter().map(|(j, v)| w[*j as usize] * v).sum::<f64>() + b;
            let g = y[i] * margin - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg);
            min_pg = min_pg.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * y[i];
                for (j, v) in &x[i] {
                    w[*j as usize] += delta * v;
                }
                b += delta;
            }
        }
        if max_pg - min_pg < params.tol {
            break;
        }
    }
    (w, b)
}

fn f1_score(pred: &[bool], truth: &[bool]) -> f64 {
    let tp = pred.iter().zip(truth).filter(|(p, t)| **p && **t).count() as f64;
    let fp = pred.iter().zip(truth).filter(|(p, t)| **p && !**t).count() as f64;
    let fn_ = pred.iter().zip(truth).filter(|(p, t)| !**p && **t).count() as f64;
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

/// Fold index per document, stratified by class. Every fold gets at least one
/// document of each class.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Stratification {
            folds,
            reason: "need at least 2 folds".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0; labels.len()];
    for class in [Label::Positive, Label::Negative] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < folds {
            return Err(Error::Stratification {
                folds,
                reason: format!("only {} {} document(s)", idx.len(), class.as_str()),
            });
        }
        idx.shuffle(&mut rng);
        for (n, i) in idx.into_iter().enumerate() {
            assign[i] = n % folds;
        }
    }
    Ok(assign)
}

/// Picks C by mean stratified k-fold F1 (ties to the smaller C), then refits on everything.
pub fn train_linear<S: AsRef<str>>(
    corpus: &[(S, Label)],
    params: &LinearParams,
) -> Result<LinearModel> {
    check_two_classes(corpus)?;
    if params.c_grid.is_empty()
        || params
            .c_grid
            .iter()
            .any(|c| c.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::Invalid(
            "C grid must be non-empty and positive".into(),
        ));
    }
    let labels: Vec<Label> = corpus.iter().map(|(_, l)| *l).collect();
    let fold_of = stratified_folds(&labels, params.folds, params.seed)?;
    let vocab = Vocab::build(corpus.iter().map(|(t, _)| t.as_ref()), params.min_freq)?;
    let x: Vec<SparseVec> = corpus
        .iter()
        .map(|(t, _)| features(&vocab, t.as_ref()))
        .collect();
    let y: Vec<f64> = labels
        .iter()
        .map(|l| if l.is_positive() { 1.0 } else { -1.0 })
        .collect();

    let mut grid = params.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut cv_f1 = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for &c in &grid {
        let mut scores = Vec::with_capacity(params.folds);
        for fold in 0..params.folds {
            let train: Vec<usize> = (0..x.len()).filter(|&i| fold_of[i] != fold).collect();
            let test: Vec<usize> = (0..x.len()).filter(|&i| fold_of[i] == fold).collect();
            let tx: Vec<SparseVec> = train.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let (w, b) = fit_svm(&tx, &ty, vocab.len(), c, params, params.seed ^ fold as u64);
            let pred: Vec<bool> = test
                .iter()
                .map(|&i| x[i].iter().map(|(j, v)| w[*j as usize] * v).sum::<f64>() + b >= 0.0)
                .collect();
            let truth: Vec<bool> = test.iter().map(|&i| y[i] > 0.0).collect();
            scores.push(f1_score(&pred, &truth));
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        cv_f1.push((c, mean));
        if best.is_none_or(|(_, m)| mean > m) {
            best = Some((c, mean));
        }
    }
    let c = best.expect("non-empty grid").0;
    let (weights, bias) = fit_svm(&x, &y, vocab.len(), c, params, params.seed);
    Ok(LinearModel {
        vocab,
        weights,
        bias,
        c,
        cv_f1,
    })
}

impl LinearModel {
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn cv_f1(&self) -> &[(f64, f64)] {
        &self.cv_f1
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn margin(&self, text: &str) -> f64 {
        features(&self.vocab, text)
            .iter()
            .map(|(j, v)| self.weights[*j as usize] * v)
            .sum::<f64>()
            + self.bias
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(
            &SavedModel::Linear(self.clone()).versioned(),
        )?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        match SavedModel::from_json(text)? {
            SavedModel::Linear(m) => Ok(m),
            SavedModel::Embedding(_) => Err(Error::Invalid("expected a linear model".into())),
        }
    }
}

impl Classifier for LinearModel {
    /// Logistic squashing of the margin, so the 0.5 threshold is the decision boundary.
    fn predict(&self, text: &str) -> f64 {
        1.0 / (1.0 + (-self.margin(text)).exp())
    }

    fn top_features(&self, k: usize) -> Vec<(String, f64)> {
        let scores = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| (self.vocab.ngram(i as u32).to_string(), *w));
        rank_features(scores, k)
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk container for either model kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Embedding(EmbeddingModel),
    Linear(LinearModel),
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    format: String,
    version: u32,
    model: T,
}

impl SavedModel {
    fn versioned(self) -> impl Serialize {
        Versioned {
            format: "ssom-classifier".into(),
            version: MODEL_FORMAT_VERSION,
            model: self,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Versioned<SavedModel> = serde_json::from_str(text)?;
        if v.format != "ssom-classifier" || v.version != MODEL_FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported model container {} v{}",
                v.format, v.version
            )));
        }
        Ok(v.model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.clone().versioned())?)
    }

    pub fn as_classifier(&self) -> &dyn Classifier {
        match self {
            SavedModel::Embedding(m) => m,
            SavedModel::Linear(m) => m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCase {
    pub index: usize,
    pub probability: f64,
}

/// The ⌈fraction·n⌉ texts whose prediction is closest to 0.5, closest first;
/// ties keep input order.
pub fn select_edge_cases<C: Classifier + ?Sized, S: AsRef<str>>(
    model: &C,
    texts: &[S],
    fraction: f64,
) -> Result<Vec<EdgeCase>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Invalid(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    let probs: Vec<f64> = texts.iter().map(|t| model.predict(t.as_ref())).collect();
    Ok(edge_cases_from_probabilities(&probs, fraction))
}

pub fn edge_cases_from_probabilities(probs: &[f64], fraction: f64) -> Vec<EdgeCase> {
    // the small slack keeps e.g. 0.05·1000 from rounding up to 51
    let count = ((fraction * probs.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut cases: Vec<EdgeCase> = probs
        .iter()
        .enumerate()
        .map(|(index, &probability)| EdgeCase { index, probability })
        .collect();
    cases.sort_by(|a, b| {
        (a.probability - 0.5)
            .abs()
            .total_cmp(&(b.probability - 0.5).abs())
            .then(a.index.cmp(&b.index))
    });
    cases.truncate(count.min(probs.len()));
    cases
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRound {
    pub round: usize,
    pub train_size: usize,
    pub added: usize,
    pub final_loss: f64,
}

/// Retrains after each round of labeling the pool's edge cases with `annotate`.
/// The training set only grows; the pool shrinks by what was labeled.
pub fn iterative_learning<F>(
    seed_corpus: Vec<(String, Label)>,
    mut pool: Vec<String>,
    rounds: usize,
    fraction: f64,
    params: &EmbeddingParams,
    mut annotate: F,
) -> Result<(EmbeddingModel, Vec<LearningRound>)>
where
    F: FnMut(&str) -> Label,
{
    let mut corpus = seed_corpus;
    let mut history = Vec::new();
    let mut model = train_embedding(&corpus, params)?;
    for round in 0..rounds {
        if pool.is_empty() {
            break;
        }
        let picked = select_edge_cases(&model, &pool, fraction)?;
        let mut take: Vec<usize> = picked.iter().map(|e| e.index).collect();
        take.sort_unstable();
        for &i in take.iter().rev() {
            let text = pool.remove(i);
            let label = annotate(&text);
            corpus.push((text, label));
        }
        model = train_embedding(&corpus, params)?;
        history.push(LearningRound {
            round,
            train_size: corpus.len(),
            added: take.len(),
            final_loss: model.meta().map_or(f64::NAN, |m| m.final_loss),
        });
    }
    Ok((model, history))
}
