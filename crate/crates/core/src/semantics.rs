//! Caption corpus, bag-of-tokens sentence autoencoder and per-frame
//! semantic vectors.
//!
//! A frame's semantic vector is five slots of `D_s + 5` values, one per
//! annotation kept: the sentence code, the four box coordinates and the
//! confidence. Slots are filled in confidence order and zero-padded.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use crate::dense::{self, Matrix};
use crate::featurizer::{self, Annotation, ViewConfig};
use crate::gridscene::SceneSpec;
use crate::seeding;

/// Annotations kept per frame.
pub const SLOTS: usize = 5;
/// Sentence embedding width used throughout.
pub const DEFAULT_SENTENCE_DIM: usize = 64;
/// Hidden width of the encoder and decoder.
pub const HIDDEN: usize = 128;
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SEMNAV01";

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("corpus is empty: no pose in any scene produced an annotation")]
    EmptyCorpus,
    #[error("no scenes given")]
    NoScenes,
    #[error("sentence dimension {0} must be at least 2")]
    BadDimension(usize),
    #[error("autoencoder diverged at epoch {epoch} with lr {lr}")]
    Diverged { epoch: usize, lr: f64 },
    #[error("bad encoder checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Width of a frame semantic vector for sentence codes of width `sentence_dim`.
pub fn frame_width(sentence_dim: usize) -> usize {
    SLOTS * (sentence_dim + 5)
}

/// Orders annotations by confidence (descending), then box area
/// (descending), then input position.
pub fn rank_annotations(annotations: &[Annotation]) -> Vec<&Annotation> {
    let mut ranked: Vec<&Annotation> = annotations.iter().collect();
    ranked.sort_by(|a, b| {
        b.confidence.total_cmp(&a.confidence).then_with(|| b.area().total_cmp(&a.area()))
    });
    ranked
}

/// Sum of the confidences of the (at most five) kept annotations.
pub fn top_confidence_sum(annotations: &[Annotation]) -> f64 {
    rank_annotations(annotations).iter().take(SLOTS).map(|a| a.confidence).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Vec<String>>,
    pub vocabulary: Vec<String>,
}

impl Corpus {
    /// Builds a corpus from explicit sentences (deduplicated, sorted).
    pub fn from_sentences(sentences: impl IntoIterator<Item = Vec<String>>) -> Corpus {
        let unique: BTreeSet<Vec<String>> = sentences.into_iter().collect();
        let vocabulary: BTreeSet<String> = unique.iter().flatten().cloned().collect();
        Corpus { sentences: unique.into_iter().collect(), vocabulary: vocabulary.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Every kept caption over every pose of every scene, deduplicated.
pub fn build_corpus(scenes: &[SceneSpec]) -> Result<Corpus, SemanticsError> {
    build_corpus_with(scenes, &ViewConfig::default())
}

pub fn build_corpus_with(scenes: &[SceneSpec], view: &ViewConfig) -> Result<Corpus, SemanticsError> {
    if scenes.is_empty() {
        return Err(SemanticsError::NoScenes);
    }
    let mut sentences = Vec::new();
    for scene in scenes {
        for pose in scene.valid_poses() {
            let annotations = featurizer::annotate_with(scene, pose, view);
            sentences.extend(
                rank_annotations(&annotations).into_iter().take(SLOTS).map(|a| a.tokens.clone()),
            );
        }
    }
    let corpus = Corpus::from_sentences(sentences);
    if corpus.is_empty() {
        return Err(SemanticsError::EmptyCorpus);
    }
    Ok(corpus)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AutoencoderConfig {
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig { dim: DEFAULT_SENTENCE_DIM, epochs: 200, lr: 0.05, seed: 0 }
    }
}

/// Bag-of-tokens autoencoder:
/// counts → ReLU(128) → tanh(D_s) → ReLU(128) → softmax(vocabulary).
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceEncoder {
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    enc_hidden: Matrix,
    enc_hidden_b: Matrix,
    enc_code: Matrix,
    enc_code_b: Matrix,
    dec_hidden: Matrix,
    dec_hidden_b: Matrix,
    dec_out: Matrix,
    dec_out_b: Matrix,
    /// Mean reconstruction loss after every epoch, starting with the
    /// untrained loss. Not persisted.
    pub loss_history: Vec<f64>,
}

struct Activations {
    h1: Vec<f64>,
    code: Vec<f64>,
    h2: Vec<f64>,
    probs: Vec<f64>,
}

impl SentenceEncoder {
    fn init(vocabulary: Vec<String>, hidden: usize, dim: usize, seed: u64) -> SentenceEncoder {
        let v = vocabulary.len();
        let mut rng = seeding::rng_for("semantics/autoencoder", &[seed, v as u64, dim as u64]);
        let index = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        SentenceEncoder {
            enc_hidden: Matrix::glorot(v, hidden, &mut rng),
            enc_hidden_b: Matrix::zeros(1, hidden),
            enc_code: Matrix::glorot(hidden, dim, &mut rng),
            enc_code_b: Matrix::zeros(1, dim),
            dec_hidden: Matrix::glorot(dim, hidden, &mut rng),
            dec_hidden_b: Matrix::zeros(1, hidden),
            dec_out: Matrix::glorot(hidden, v, &mut rng),
            dec_out_b: Matrix::zeros(1, v),
            vocabulary,
            index,
            loss_history: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.enc_code.cols()
    }

    pub fn hidden(&self) -> usize {
        self.enc_hidden.cols()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// Token counts over the vocabulary; unknown tokens are dropped.
    pub fn counts(&self, tokens: &[String]) -> Vec<f64> {
        let mut c = vec![0.0; self.vocabulary.len()];
        for t in tokens {
            if let Some(&i) = self.index.get(t) {
                c[i] += 1.0;
            }
        }
        c
    }

    fn encode_counts(&self, counts: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut h1 = self.enc_hidden_b.as_slice().to_vec();
        self.enc_hidden.accumulate_into(counts, &mut h1);
        dense::relu_in_place(&mut h1);
        let mut code = self.enc_code_b.as_slice().to_vec();
        self.enc_code.accumulate_into(&h1, &mut code);
        code.iter_mut().for_each(|z| *z = z.tanh());
        (h1, code)
    }

    fn forward(&self, counts: &[f64]) -> Activations {
        let (h1, code) = self.encode_counts(counts);
        let mut h2 = self.dec_hidden_b.as_slice().to_vec();
        self.dec_hidden.accumulate_into(&code, &mut h2);
        dense::relu_in_place(&mut h2);
        let mut logits = self.dec_out_b.as_slice().to_vec();
        self.dec_out.accumulate_into(&h2, &mut logits);
        Activations { h1, code, h2, probs: dense::softmax(&logits) }
    }

    /// Sentence code of a token list.
    pub fn encode(&self, tokens: &[String]) -> Vec<f64> {
        self.encode_counts(&self.counts(tokens)).1
    }

    fn params(&self) -> [&Matrix; 8] {
        [
            &self.enc_hidden,
            &self.enc_hidden_b,
            &self.enc_code,
            &self.enc_code_b,
            &self.dec_hidden,
            &self.dec_hidden_b,
            &self.dec_out,
            &self.dec_out_b,
        ]
    }

    fn params_mut(&mut self) -> [&mut Matrix; 8] {
        [
            &mut self.enc_hidden,
            &mut self.enc_hidden_b,
            &mut self.enc_code,
            &mut self.enc_code_b,
            &mut self.dec_hidden,
            &mut self.dec_hidden_b,
            &mut self.dec_out,
            &mut self.dec_out_b,
        ]
    }

    /// Mean bag-of-tokens negative log-likelihood and its gradient.
    fn loss_and_grads(&self, batch: &[Vec<f64>]) -> (f64, Vec<Matrix>) {
        let mut grads: Vec<Matrix> =
            self.params().iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for counts in batch {
            let act = self.forward(counts);
            let total: f64 = counts.iter().sum();
            loss -= counts
                .iter()
                .zip(&act.probs)
                .filter(|(c, _)| **c > 0.0)
                .map(|(c, p)| c * p.ln())
                .sum::<f64>();
            // d/dlogits of -Σ c·log softmax = total·p - c.
            let dlogits: Vec<f64> =
                act.probs.iter().zip(counts).map(|(p, c)| (total * p - c) / n).collect();
            grads[6].add_outer_rows(0, &act.h2, &dlogits);
            grads[7].add_row(&dlogits);
            let mut dh2 = vec![0.0; act.h2.len()];
            self.dec_out.backprop_rows_into(0, &dlogits, &mut dh2);
            dense::relu_backward(&act.h2, &mut dh2);
            grads[4].add_outer_rows(0, &act.code, &dh2);
            grads[5].add_row(&dh2);
            let mut dcode = vec![0.0; act.code.len()];
            self.dec_hidden.backprop_rows_into(0, &dh2, &mut dcode);
            for (d, z) in dcode.iter_mut().zip(&act.code) {
                *d *= 1.0 - z * z;
            }
            grads[2].add_outer_rows(0, &act.h1, &dcode);
            grads[3].add_row(&dcode);
            let mut dh1 = vec![0.0; act.h1.len()];
            self.enc_code.backprop_rows_into(0, &dcode, &mut dh1);
            dense::relu_backward(&act.h1, &mut dh1);
            grads[0].add_outer_rows(0, counts, &dh1);
            grads[1].add_row(&dh1);
        }
        (loss / n, grads)
    }

    fn stepped(&self, grads: &[Matrix], lr: f64) -> SentenceEncoder {
        let mut next = self.clone();
        for (p, g) in next.params_mut().into_iter().zip(grads) {
            for (w, d) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *w -= lr * d;
            }
        }
        next
    }

    /// Writes the checkpoint: magic, `u32` vocabulary size, hidden width and
    /// code width, then the eight parameter matrices row-major as
    /// little-endian `f64` (encoder hidden W, b, code W, b, decoder hidden
    /// W, b, output W, b). The vocabulary goes in a separate file.
    pub fn write_checkpoint(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        dense::write_u32(w, self.vocabulary.len() as u32)?;
        dense::write_u32(w, self.hidden() as u32)?;
        dense::write_u32(w, self.dim() as u32)?;
        for m in self.params() {
            m.write_le(w)?;
        }
        Ok(())
    }

    pub fn read_checkpoint(
        r: &mut impl Read,
        vocabulary: Vec<String>,
    ) -> Result<SentenceEncoder, SemanticsError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(SemanticsError::BadCheckpoint("wrong magic bytes".into()));
        }
        let v = dense::read_u32(r)? as usize;
        let hidden = dense::read_u32(r)? as usize;
        let dim = dense::read_u32(r)? as usize;
        if v != vocabulary.len() {
            return Err(SemanticsError::BadCheckpoint(format!(
                "checkpoint vocabulary size {v} but vocabulary file has {}",
                vocabulary.len()
            )));
        }
        let mut enc = SentenceEncoder::init(vocabulary, hidden, dim, 0);
        let shapes: Vec<(usize, usize)> = enc.params().iter().map(|m| m.shape()).collect();
        for (m, (rows, cols)) in enc.params_mut().into_iter().zip(shapes) {
            *m = Matrix::read_le(rows, cols, r)?;
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(SemanticsError::BadCheckpoint(format!("{} trailing bytes", rest.len())));
        }
        Ok(enc)
    }
}

pub fn write_vocabulary(vocabulary: &[String], w: &mut impl Write) -> io::Result<()> {
    for t in vocabulary {
        writeln!(w, "{t}")?;
    }
    Ok(())
}

pub fn read_vocabulary(r: impl BufRead) -> io::Result<Vec<String>> {
    r.lines().filter(|l| !matches!(l, Ok(s) if s.is_empty())).collect()
}

/// Trains the autoencoder by full-batch gradient descent. An epoch whose
/// step would raise the loss is rejected and the learning rate halved, so
/// the recorded loss never increases.
pub fn train_autoencoder(
    corpus: &Corpus,
    config: &AutoencoderConfig,
) -> Result<SentenceEncoder, SemanticsError> {
    if config.dim < 2 {
        return Err(SemanticsError::BadDimension(config.dim));
    }
    if corpus.is_empty() {
        return Err(SemanticsError::EmptyCorpus);
    }
    let mut enc = SentenceEncoder::init(corpus.vocabulary.clone(), HIDDEN, config.dim, config.seed);
    let batch: Vec<Vec<f64>> = corpus.sentences.iter().map(|s| enc.counts(s)).collect();
    let (mut loss, mut grads) = enc.loss_and_grads(&batch);
    let mut history = vec![loss];
    let mut lr = config.lr;
    for epoch in 0..config.epochs {
        let candidate = enc.stepped(&grads, lr);
        let (c_loss, c_grads) = candidate.loss_and_grads(&batch);
        if !c_loss.is_finite() {
            return Err(SemanticsError::Diverged { epoch, lr });
        }
        if c_loss <= loss {
            enc = candidate;
            loss = c_loss;
            grads = c_grads;
        } else {
            lr *= 0.5;
        }
        history.push(loss);
    }
    enc.loss_history = history;
    Ok(enc)
}

/// Semantic vector of one frame, `5 · (D_s + 5)` wide.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSemantics(pub Vec<f64>);

impl FrameSemantics {
    pub fn zeros(sentence_dim: usize) -> FrameSemantics {
        FrameSemantics(vec![0.0; frame_width(sentence_dim)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Slot `i` as `[code | box | confidence]`.
    pub fn slot(&self, i: usize) -> &[f64] {
        let w = self.0.len() / SLOTS;
        &self.0[i * w..(i + 1) * w]
    }
}

pub fn frame_semantics(annotations: &[Annotation], encoder: &SentenceEncoder) -> FrameSemantics {
    let d = encoder.dim();
    let mut out = FrameSemantics::zeros(d);
    for (i, a) in rank_annotations(annotations).into_iter().take(SLOTS).enumerate() {
        let slot = &mut out.0[i * (d + 5)..(i + 1) * (d + 5)];
        slot[..d].copy_from_slice(&encoder.encode(&a.tokens));
        slot[d..d + 4].copy_from_slice(&a.bbox);
        slot[d + 4] = a.confidence;
    }
    out
}
