//! Classical baselines over tweet feature vectors: one-vs-rest logistic
//! regression, linear hinge-loss SVM, and a one-hidden-layer relu MLP.
//!
//! All three train by seeded mini-batch gradient descent on the autodiff
//! tape, with mean-over-batch losses, so a duplicated example behaves like a
//! proportionally weighted one. The L2 penalty `0.5 * l2 * ||W||^2` covers
//! weight matrices only, never biases.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{
    parse_checkpoint, read_checkpoint, render_checkpoint, Checkpoint, CheckpointError, Init,
    Optimizer, ParamId, ParamStore, Tape, Tensor, Var,
};
use crate::corpus::SentimentLabel;
use crate::features::FeatureVector;
use crate::scalar::Scalar;

pub const N_CLASSES: usize = 3;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("feature vector has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class {label} absent from training data ({requirement})")]
    ClassAbsent { label: SentimentLabel, requirement: &'static str },
    #[error("training set is empty")]
    Empty,
    #[error("{kind} does not produce probabilities")]
    NoProbabilities { kind: &'static str },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("checkpoint mismatch: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    LogisticOvR,
    HingeSvm,
}

/// Linear scorer: `scores = W x + b` with one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<S: Scalar> {
    pub w: Tensor<S>,
    pub b: Tensor<S>,
    pub kind: LinearKind,
}

/// One hidden relu layer: `scores = W2 relu(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<S: Scalar> {
    pub w1: Tensor<S>,
    pub b1: Tensor<S>,
    pub w2: Tensor<S>,
    pub b2: Tensor<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassicalModel<S: Scalar> {
    Linear(LinearModel<S>),
    Mlp(MlpModel<S>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClassicalKind {
    LogisticOvR,
    HingeSvm,
    Mlp { hidden: usize },
}

impl ClassicalKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassicalKind::LogisticOvR => "ovr-lr",
            ClassicalKind::HingeSvm => "svm",
            ClassicalKind::Mlp { .. } => "mlp",
        }
    }
}

pub const DEFAULT_MLP_HIDDEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_penalty: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.1, epochs: 50, batch_size: 32, l2_penalty: 1e-4, seed: 42 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassicalError> {
        if !(self.lr > 0.0) {
            return Err(ClassicalError::BadConfig(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.epochs < 1 {
            return Err(ClassicalError::BadConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(ClassicalError::BadConfig("batch_size must be >= 1".into()));
        }
        if self.l2_penalty < 0.0 {
            return Err(ClassicalError::BadConfig(format!(
                "l2_penalty must be >= 0, got {}",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

/// Loss and weight norm after each epoch, recorded as observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub loss: f64,
    pub weight_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedClassical<S: Scalar> {
    pub model: ClassicalModel<S>,
    pub history: Vec<EpochRecord>,
}

impl<S: Scalar> ClassicalModel<S> {
    pub fn input_dim(&self) -> usize {
        match self {
            ClassicalModel::Linear(m) => m.w.cols(),
            ClassicalModel::Mlp(m) => m.w1.cols(),
        }
    }

    pub fn kind(&self) -> ClassicalKind {
        match self {
            ClassicalModel::Linear(m) => match m.kind {
                LinearKind::LogisticOvR => ClassicalKind::LogisticOvR,
                LinearKind::HingeSvm => ClassicalKind::HingeSvm,
            },
            ClassicalModel::Mlp(m) => ClassicalKind::Mlp { hidden: m.b1.numel() },
        }
    }

    fn check_dim(&self, x: &[S]) -> Result<(), ClassicalError> {
        if x.len() != self.input_dim() {
            return Err(ClassicalError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Raw class scores for one feature vector.
    pub fn scores(&self, x: &[S]) -> Result<[S; N_CLASSES], ClassicalError> {
        self.check_dim(x)?;
        Ok(match self {
            ClassicalModel::Linear(m) => affine3(&m.w, &m.b, x),
            ClassicalModel::Mlp(m) => {
                let h = m.b1.numel();
                let mut hidden = vec![S::zero(); h];
                for i in 0..h {
                    let mut acc = m.b1.data()[i];
                    for (j, &xv) in x.iter().enumerate() {
                        acc += m.w1.at2(i, j) * xv;
                    }
                    hidden[i] = if acc > S::zero() { acc } else { S::zero() };
                }
                affine3(&m.w2, &m.b2, &hidden)
            }
        })
    }

    /// Argmax of the scores; ties resolve to the lowest class index.
    pub fn predict(&self, f: &FeatureVector<S>) -> Result<SentimentLabel, ClassicalError> {
        let scores = self.scores(&f.values)?;
        Ok(argmax_label(&scores))
    }

    /// Softmax over the three scores. The hinge SVM is margin-based and
    /// refuses; use [`ClassicalModel::scores`] for it instead.
    pub fn predict_proba(&self, f: &FeatureVector<S>) -> Result<[S; N_CLASSES], ClassicalError> {
        if let ClassicalModel::Linear(m) = self {
            if m.kind == LinearKind::HingeSvm {
                return Err(ClassicalError::NoProbabilities { kind: "svm" });
            }
        }
        let scores = self.scores(&f.values)?;
        Ok(softmax3(&scores))
    }
}

fn affine3<S: Scalar>(w: &Tensor<S>, b: &Tensor<S>, x: &[S]) -> [S; N_CLASSES] {
    let mut out = [S::zero(); N_CLASSES];
    for c in 0..N_CLASSES {
        let mut acc = b.data()[c];
        for (j, &xv) in x.iter().enumerate() {
            acc += w.at2(c, j) * xv;
        }
        out[c] = acc;
    }
    out
}

fn softmax3<S: Scalar>(scores: &[S; N_CLASSES]) -> [S; N_CLASSES] {
    let m = scores.iter().fold(scores[0], |m, &v| if v > m { v } else { m });
    let mut exps = [S::zero(); N_CLASSES];
    let mut z = S::zero();
    for (e, &s) in exps.iter_mut().zip(scores.iter()) {
        *e = (s - m).exp();
        z += *e;
    }
    for e in &mut exps {
        *e /= z;
    }
    exps
}

pub fn argmax_label<S: Scalar>(scores: &[S; N_CLASSES]) -> SentimentLabel {
    let mut best = 0usize;
    for c in 1..N_CLASSES {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    SentimentLabel::from_index(best).expect("index < 3")
}

struct Prepared<'a, S: Scalar> {
    xs: Vec<&'a [S]>,
    ys: Vec<usize>,
    dim: usize,
}

fn prepare<'a, S: Scalar>(
    data: &'a [(FeatureVector<S>, SentimentLabel)],
    kind: ClassicalKind,
) -> Result<Prepared<'a, S>, ClassicalError> {
    if data.is_empty() {
        return Err(ClassicalError::Empty);
    }
    let dim = data[0].0.len();
    for (f, _) in data {
        if f.len() != dim {
            return Err(ClassicalError::DimensionMismatch { expected: dim, got: f.len() });
        }
    }
    let mut present = [false; N_CLASSES];
    for (_, y) in data {
        present[y.index()] = true;
    }
    match kind {
        // One binary problem per class: every class needs positives.
        ClassicalKind::LogisticOvR => {
            for &c in &SentimentLabel::ALL {
                if !present[c.index()] {
                    return Err(ClassicalError::ClassAbsent {
                        label: c,
                        requirement: "one-vs-rest needs every class present",
                    });
                }
            }
        }
        // Margins are meaningless with a single class.
        ClassicalKind::HingeSvm => {
            if present.iter().filter(|&&p| p).count() < 2 {
                let label = SentimentLabel::ALL
                    .into_iter()
                    .find(|c| !present[c.index()])
                    .expect("fewer than 2 present implies one absent");
                return Err(ClassicalError::ClassAbsent {
                    label,
                    requirement: "hinge training needs at least two distinct classes",
                });
            }
        }
        ClassicalKind::Mlp { .. } => {}
    }
    Ok(Prepared {
        xs: data.iter().map(|(f, _)| f.values.as_slice()).collect(),
        ys: data.iter().map(|(_, y)| y.index()).collect(),
        dim,
    })
}

/// Which parameters are registered for each model kind, in order.
/// Weight-matrix names (L2-penalized) are listed before bias names.
fn registered_params<S: Scalar>(
    kind: ClassicalKind,
    dim: usize,
    store: &mut ParamStore<S>,
    rng: &mut ChaCha8Rng,
) -> (Vec<ParamId>, Vec<ParamId>) {
    match kind {
        ClassicalKind::LogisticOvR | ClassicalKind::HingeSvm => {
            let w = store.register(
                "w",
                &[N_CLASSES, dim],
                Init::GlorotUniform { fan_in: dim, fan_out: N_CLASSES },
                rng,
            );
            let b = store.register("b", &[N_CLASSES], Init::Zeros, rng);
            (vec![w], vec![b])
        }
        ClassicalKind::Mlp { hidden } => {
            let w1 = store.register(
                "w1",
                &[hidden, dim],
                Init::GlorotUniform { fan_in: dim, fan_out: hidden },
                rng,
            );
            let b1 = store.register("b1", &[hidden], Init::Zeros, rng);
            let w2 = store.register(
                "w2",
                &[N_CLASSES, hidden],
                Init::GlorotUniform { fan_in: hidden, fan_out: N_CLASSES },
                rng,
            );
            let b2 = store.register("b2", &[N_CLASSES], Init::Zeros, rng);
            (vec![w1, w2], vec![b1, b2])
        }
    }
}

fn scores_on_tape<S: Scalar>(
    kind: ClassicalKind,
    tape: &mut Tape<S>,
    weights: &[Var],
    biases: &[Var],
    x: Var,
) -> Var {
    match kind {
        ClassicalKind::LogisticOvR | ClassicalKind::HingeSvm => {
            let wx = tape.matmul(weights[0], x);
            tape.add(wx, biases[0])
        }
        ClassicalKind::Mlp { .. } => {
            let z1 = tape.matmul(weights[0], x);
            let z1 = tape.add(z1, biases[0]);
            let h = tape.relu(z1);
            let z2 = tape.matmul(weights[1], h);
            tape.add(z2, biases[1])
        }
    }
}

/// Per-example loss node. `scores` is the `[3]` score vector of the example.
fn example_loss<S: Scalar>(
    kind: ClassicalKind,
    tape: &mut Tape<S>,
    scores: Var,
    gold: usize,
) -> Var {
    match kind {
        ClassicalKind::Mlp { .. } => {
            let p = tape.softmax(scores);
            tape.cross_entropy(p, gold)
        }
        ClassicalKind::LogisticOvR => {
            // Sum of three independent binary cross-entropies: class c is a
            // positive example for its own classifier, negative for the rest.
            let one = tape.constant(Tensor::vector(vec![S::one()]));
            let mut terms = Vec::with_capacity(N_CLASSES);
            for c in 0..N_CLASSES {
                let s = tape.select_elements(scores, &[c]);
                let p = tape.sigmoid(s);
                let q = tape.sub(one, p);
                let pair = tape.concat_rows(p, q);
                let target = if gold == c { 0 } else { 1 };
                terms.push(tape.cross_entropy(pair, target));
            }
            tape.add_n(&terms)
        }
        ClassicalKind::HingeSvm => {
            // One-vs-rest hinge: sum_c max(0, 1 - y_c * s_c), y_c = ±1.
            let one = tape.constant(Tensor::vector(vec![S::one()]));
            let mut terms = Vec::with_capacity(N_CLASSES);
            for c in 0..N_CLASSES {
                let s = tape.select_elements(scores, &[c]);
                let y = if gold == c { S::one() } else { -S::one() };
                let ys = tape.scale(s, y);
                let margin_gap = tape.sub(one, ys);
                let hinge = tape.relu(margin_gap);
                terms.push(tape.sum(hinge));
            }
            tape.add_n(&terms)
        }
    }
}

fn l2_term<S: Scalar>(
    tape: &mut Tape<S>,
    weight_vars: &[Var],
    l2_penalty: f64,
) -> Option<Var> {
    if l2_penalty == 0.0 {
        return None;
    }
    let mut terms = Vec::with_capacity(weight_vars.len());
    for &w in weight_vars {
        let sq = tape.mul(w, w);
        terms.push(tape.sum(sq));
    }
    let total = tape.add_n(&terms);
    Some(tape.scale(total, S::c(0.5 * l2_penalty)))
}

fn weight_norm<S: Scalar>(store: &ParamStore<S>, weight_ids: &[ParamId]) -> f64 {
    weight_ids
        .iter()
        .map(|&id| {
            store
                .value(id)
                .data()
                .iter()
                .map(|&v| v.to_f64_c().powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Train a classical model with seeded mini-batch SGD. Deterministic for a
/// given config; history records one entry per epoch.
pub fn train_classical<S: Scalar>(
    kind: ClassicalKind,
    data: &[(FeatureVector<S>, SentimentLabel)],
    cfg: &TrainConfig,
) -> Result<TrainedClassical<S>, ClassicalError> {
    cfg.validate()?;
    let prepared = prepare(data, kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store: ParamStore<S> = ParamStore::new();
    let (weight_ids, bias_ids) = registered_params(kind, prepared.dim, &mut store, &mut rng);
    let mut optimizer = Optimizer::sgd(cfg.lr);

    let n = prepared.xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape: Tape<S> = Tape::new();
            let weight_vars: Vec<Var> =
                weight_ids.iter().map(|&id| store.var(&mut tape, id)).collect();
            let bias_vars: Vec<Var> =
                bias_ids.iter().map(|&id| store.var(&mut tape, id)).collect();

            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let x = tape.constant(Tensor::vector(prepared.xs[i].to_vec()));
                let scores = scores_on_tape(kind, &mut tape, &weight_vars, &bias_vars, x);
                losses.push(example_loss(kind, &mut tape, scores, prepared.ys[i]));
            }
            let mut loss = tape.mean_n(&losses);
            if let Some(reg) = l2_term(&mut tape, &weight_vars, cfg.l2_penalty) {
                loss = tape.add(loss, reg);
            }
            epoch_loss += tape.value(loss).item().to_f64_c() * batch.len() as f64;

            tape.backward(loss);
            store.zero_grads();
            store.absorb_grads(&tape);
            optimizer.step(&mut store);
        }
        history.push(EpochRecord {
            loss: epoch_loss / n as f64,
            weight_norm: weight_norm(&store, &weight_ids),
        });
    }

    let model = match kind {
        ClassicalKind::LogisticOvR | ClassicalKind::HingeSvm => {
            ClassicalModel::Linear(LinearModel {
                w: store.value(weight_ids[0]).clone(),
                b: store.value(bias_ids[0]).clone(),
                kind: if kind == ClassicalKind::LogisticOvR {
                    LinearKind::LogisticOvR
                } else {
                    LinearKind::HingeSvm
                },
            })
        }
        ClassicalKind::Mlp { .. } => ClassicalModel::Mlp(MlpModel {
            w1: store.value(weight_ids[0]).clone(),
            b1: store.value(bias_ids[0]).clone(),
            w2: store.value(weight_ids[1]).clone(),
            b2: store.value(bias_ids[1]).clone(),
        }),
    };
    Ok(TrainedClassical { model, history })
}

impl<S: Scalar> ClassicalModel<S> {
    fn param_pairs(&self) -> Vec<(&'static str, &Tensor<S>)> {
        match self {
            ClassicalModel::Linear(m) => vec![("w", &m.w), ("b", &m.b)],
            ClassicalModel::Mlp(m) => {
                vec![("w1", &m.w1), ("b1", &m.b1), ("w2", &m.w2), ("b2", &m.b2)]
            }
        }
    }

    /// Versioned text checkpoint: a header naming the model kind and feature
    /// dimension, then the tensors. Rendering the loaded model reproduces
    /// the bytes exactly.
    pub fn to_checkpoint_string(&self) -> String {
        let mut store: ParamStore<S> = ParamStore::new();
        for (name, t) in self.param_pairs() {
            store.register_tensor(name, t.clone());
        }
        let meta = vec![
            ("model".to_string(), "classical".to_string()),
            ("kind".to_string(), self.kind().name().to_string()),
            ("input_dim".to_string(), self.input_dim().to_string()),
        ];
        render_checkpoint(&store, &meta)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ClassicalError> {
        std::fs::write(path, self.to_checkpoint_string()).map_err(CheckpointError::Io)?;
        Ok(())
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self, ClassicalError> {
        Self::from_checkpoint(&parse_checkpoint(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ClassicalError> {
        Self::from_checkpoint(&read_checkpoint(path)?)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint<S>) -> Result<Self, ClassicalError> {
        let meta = |key: &str| {
            ckpt.meta_value(key)
                .ok_or_else(|| ClassicalError::BadCheckpoint(format!("missing meta key {key}")))
        };
        let model_tag = meta("model")?;
        if model_tag != "classical" {
            return Err(ClassicalError::BadCheckpoint(format!(
                "expected a classical checkpoint, found model {model_tag:?}"
            )));
        }
        let input_dim: usize = meta("input_dim")?.parse().map_err(|_| {
            ClassicalError::BadCheckpoint("meta input_dim is not a number".to_string())
        })?;
        let tensor = |name: &str| {
            ckpt.param(name)
                .cloned()
                .ok_or_else(|| ClassicalError::BadCheckpoint(format!("missing tensor {name}")))
        };
        let expect_shape = |name: &str, t: &Tensor<S>, shape: &[usize]| {
            if t.shape() != shape {
                return Err(ClassicalError::BadCheckpoint(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            Ok(())
        };

        let kind_name = meta("kind")?;
        let model = match kind_name {
            "ovr-lr" | "svm" => {
                let w = tensor("w")?;
                let b = tensor("b")?;
                expect_shape("w", &w, &[N_CLASSES, input_dim])?;
                expect_shape("b", &b, &[N_CLASSES])?;
                ClassicalModel::Linear(LinearModel {
                    w,
                    b,
                    kind: if kind_name == "ovr-lr" {
                        LinearKind::LogisticOvR
                    } else {
                        LinearKind::HingeSvm
                    },
                })
            }
            "mlp" => {
                let w1 = tensor("w1")?;
                let b1 = tensor("b1")?;
                let w2 = tensor("w2")?;
                let b2 = tensor("b2")?;
                let hidden = b1.numel();
                expect_shape("w1", &w1, &[hidden, input_dim])?;
                expect_shape("w2", &w2, &[N_CLASSES, hidden])?;
                expect_shape("b2", &b2, &[N_CLASSES])?;
                ClassicalModel::Mlp(MlpModel { w1, b1, w2, b2 })
            }
            other => {
                return Err(ClassicalError::BadCheckpoint(format!(
                    "unknown classical kind {other:?}"
                )))
            }
        };
        Ok(model)
    }
}
