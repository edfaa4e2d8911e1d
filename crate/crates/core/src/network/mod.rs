//! Bidirectional LSTM tagging network.
//!
//! Input layer: embedding row plus a linear map of the capitalization
//! one-hot. Hidden layers: `L` stacked bidirectional LSTM layers; layer
//! `l > 0` consumes the concatenation `[forward h; backward h]` of layer
//! `l − 1`. Output: per-token softmax over `W_f h_fwd + W_b h_bwd + b`.
//! Training minimizes mean token cross-entropy with plain per-sentence SGD.

mod lstm;
mod serialize;
mod train;

use std::collections::BTreeMap;

pub use lstm::{lstm_cell_forward, CellCache, LstmParams, LSTM_BLOCK_NAMES};
pub use serialize::{load_model, parse_model_file, save_model, write_model_file, ModelFile};
pub use train::{encode_sentence, train, EncodedSentence, TrainConfig, Trainer};

use crate::corpus::{CapFeature, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{softmax, Matrix, SeededRng, Vector};
use crate::pretrain::EmbeddingTable;

/// Range of the uniform initializer for every weight.
pub const INIT_RANGE: f64 = 0.1;

/// Size parameters of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub tags: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let ModelDims {
            vocab_size,
            embedding_dim,
            hidden_size,
            layers,
            tags,
        } = *self;
        if vocab_size == 0 || embedding_dim == 0 || hidden_size == 0 || layers == 0 || tags == 0 {
            return Err(Error::invalid(format!(
                "all model sizes must be at least 1: {self:?}"
            )));
        }
        Ok(())
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embedding_dim
        } else {
            2 * self.hidden_size
        }
    }
}

/// A forward and a backward LSTM over the same input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayer {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

/// All trainable parameters of the tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Word lookup table, one row per vocabulary entry.
    pub embedding: Matrix,
    /// `d × 3` map of the capitalization one-hot into input space.
    pub cap_weights: Matrix,
    pub layers: Vec<BiLstmLayer>,
    /// `m × H` output weights over the top forward hidden state.
    pub out_forward: Matrix,
    /// `m × H` output weights over the top backward hidden state.
    pub out_backward: Matrix,
    pub out_bias: Vector,
}

/// Gradient of the loss, shaped like [`ModelParams`]. Only embedding rows
/// of words that occurred in the sentence are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding_rows: BTreeMap<usize, Vector>,
    pub cap_weights: Matrix,
    pub layers: Vec<BiLstmLayer>,
    pub out_forward: Matrix,
    pub out_backward: Matrix,
    pub out_bias: Vector,
}

fn dense_blocks<'a>(
    cap_weights: &'a Matrix,
    layers: &'a [BiLstmLayer],
    out_forward: &'a Matrix,
    out_backward: &'a Matrix,
    out_bias: &'a [f64],
) -> Vec<(String, &'a [f64])> {
    let mut out = vec![("cap_weights".to_string(), cap_weights.data())];
    for (l, layer) in layers.iter().enumerate() {
        for (dir, p) in [("forward", &layer.forward), ("backward", &layer.backward)] {
            for (name, block) in p.blocks() {
                out.push((format!("layer{l}.{dir}.{name}"), block));
            }
        }
    }
    out.push(("output.forward".to_string(), out_forward.data()));
    out.push(("output.backward".to_string(), out_backward.data()));
    out.push(("output.bias".to_string(), out_bias));
    out
}

fn dense_blocks_mut<'a>(
    cap_weights: &'a mut Matrix,
    layers: &'a mut [BiLstmLayer],
    out_forward: &'a mut Matrix,
    out_backward: &'a mut Matrix,
    out_bias: &'a mut [f64],
) -> Vec<&'a mut [f64]> {
    let mut out = vec![cap_weights.data_mut()];
    for layer in layers.iter_mut() {
        for p in [&mut layer.forward, &mut layer.backward] {
            for (_, block) in p.blocks_mut() {
                out.push(block);
            }
        }
    }
    out.push(out_forward.data_mut());
    out.push(out_backward.data_mut());
    out.push(out_bias);
    out
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let layers = (0..dims.layers)
            .map(|l| BiLstmLayer {
                forward: LstmParams::zeros(dims.layer_input(l), dims.hidden_size),
                backward: LstmParams::zeros(dims.layer_input(l), dims.hidden_size),
            })
            .collect();
        Ok(ModelParams {
            embedding: Matrix::zeros(dims.vocab_size, dims.embedding_dim),
            cap_weights: Matrix::zeros(dims.embedding_dim, CapFeature::DIM),
            layers,
            out_forward: Matrix::zeros(dims.tags, dims.hidden_size),
            out_backward: Matrix::zeros(dims.tags, dims.hidden_size),
            out_bias: vec![0.0; dims.tags],
        })
    }

    /// Every parameter uniform in `[-INIT_RANGE, INIT_RANGE)`.
    pub fn random(dims: ModelDims, rng: &mut SeededRng) -> Result<Self> {
        Self::random_in(dims, INIT_RANGE, rng)
    }

    /// Every parameter uniform in `[-range, range)`, drawn in
    /// serialization order (embedding first, output bias last).
    pub fn random_in(dims: ModelDims, range: f64, rng: &mut SeededRng) -> Result<Self> {
        crate::numerics::check_range(-range, range)?;
        let mut m = ModelParams::zeros(dims)?;
        for block in m.all_blocks_mut() {
            for v in block.iter_mut() {
                *v = rng.uniform(-range, range);
            }
        }
        Ok(m)
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            vocab_size: self.embedding.rows(),
            embedding_dim: self.embedding.cols(),
            hidden_size: self.out_forward.cols(),
            layers: self.layers.len(),
            tags: self.out_bias.len(),
        }
    }

    pub fn num_tags(&self) -> usize {
        self.out_bias.len()
    }

    /// Named parameter blocks in canonical order, embedding included.
    pub fn named_blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = vec![("embedding".to_string(), self.embedding.data())];
        out.extend(dense_blocks(
            &self.cap_weights,
            &self.layers,
            &self.out_forward,
            &self.out_backward,
            &self.out_bias,
        ));
        out
    }

    fn dense_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        dense_blocks_mut(
            &mut self.cap_weights,
            &mut self.layers,
            &mut self.out_forward,
            &mut self.out_backward,
            &mut self.out_bias,
        )
    }

    fn all_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let ModelParams {
            embedding,
            cap_weights,
            layers,
            out_forward,
            out_backward,
            out_bias,
        } = self;
        let mut out = vec![embedding.data_mut()];
        out.extend(dense_blocks_mut(
            cap_weights,
            layers,
            out_forward,
            out_backward,
            out_bias,
        ));
        out
    }

    /// Expected `(rows, cols)` of every named block for these dims.
    pub fn block_shapes(dims: ModelDims) -> Vec<(String, usize, usize)> {
        let mut out = vec![
            ("embedding".to_string(), dims.vocab_size, dims.embedding_dim),
            (
                "cap_weights".to_string(),
                dims.embedding_dim,
                CapFeature::DIM,
            ),
        ];
        for l in 0..dims.layers {
            for dir in ["forward", "backward"] {
                for name in LSTM_BLOCK_NAMES {
                    let (r, c) =
                        LstmParams::block_shape(name, dims.layer_input(l), dims.hidden_size);
                    out.push((format!("layer{l}.{dir}.{name}"), r, c));
                }
            }
        }
        out.push(("output.forward".to_string(), dims.tags, dims.hidden_size));
        out.push(("output.backward".to_string(), dims.tags, dims.hidden_size));
        out.push(("output.bias".to_string(), 1, dims.tags));
        out
    }

    /// All parameters concatenated in canonical block order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.named_blocks()
            .into_iter()
            .flat_map(|(_, b)| b.iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.named_blocks().iter().map(|(_, b)| b.len()).sum();
        if flat.len() != total {
            return Err(Error::shape(
                "set_flat",
                format!("model has {total} parameters, got {}", flat.len()),
            ));
        }
        let mut offset = 0;
        for block in self.all_blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// The same network with scan directions exchanged: forward and
    /// backward LSTMs swap at every layer, the halves of upper-layer inputs
    /// swap to match, and the two output matrices swap. Running it on a
    /// reversed sentence yields the original output rows in reverse.
    pub fn mirrored(&self) -> ModelParams {
        let mut m = self.clone();
        let hidden = self.dims().hidden_size;
        for (l, layer) in m.layers.iter_mut().enumerate() {
            std::mem::swap(&mut layer.forward, &mut layer.backward);
            if l > 0 {
                for p in [&mut layer.forward, &mut layer.backward] {
                    for w in p.input_matrices_mut() {
                        for r in 0..w.rows() {
                            let (a, b) = w.row_mut(r).split_at_mut(hidden);
                            a.swap_with_slice(b);
                        }
                    }
                }
            }
        }
        std::mem::swap(&mut m.out_forward, &mut m.out_backward);
        m
    }

    /// Applies `θ ← θ − lr·g`. Embedding rows absent from `grads` are not
    /// touched.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) {
        debug_assert_eq!(grads.cap_weights.shape(), self.cap_weights.shape());
        for (&row, g) in &grads.embedding_rows {
            for (w, gv) in self.embedding.row_mut(row).iter_mut().zip(g) {
                *w -= learning_rate * gv;
            }
        }
        for (block, g) in self
            .dense_blocks_mut()
            .into_iter()
            .zip(grads.dense_blocks())
        {
            debug_assert_eq!(block.len(), g.len());
            for (w, gv) in block.iter_mut().zip(g) {
                *w -= learning_rate * gv;
            }
        }
    }

    /// Overwrites embedding rows from `table` and re-draws every other row
    /// uniformly in `[-INIT_RANGE, INIT_RANGE)`.
    ///
    /// A table word matches the vocabulary entry equal to it, or failing
    /// that the entry equal to its normalized form. Exact matches win.
    /// Returns the number of rows taken from the table.
    pub fn load_embeddings(
        &mut self,
        table: &EmbeddingTable,
        vocab: &Vocabulary,
        rng: &mut SeededRng,
    ) -> Result<usize> {
        let dim = self.embedding.cols();
        if table.dim() != dim {
            return Err(Error::shape(
                "load_embeddings",
                format!(
                    "embedding file has dimension {}, model expects {dim}",
                    table.dim()
                ),
            ));
        }
        if vocab.len() != self.embedding.rows() {
            return Err(Error::shape(
                "load_embeddings",
                format!(
                    "vocabulary has {} entries, embedding table has {} rows",
                    vocab.len(),
                    self.embedding.rows()
                ),
            ));
        }
        let mut source: Vec<Option<&[f64]>> = vec![None; vocab.len()];
        for (word, vec) in table.iter() {
            if let Some(i) = vocab.get(word) {
                source[i] = Some(vec);
            }
        }
        for (word, vec) in table.iter() {
            if vocab.get(word).is_some() {
                continue;
            }
            if let Ok(norm) = crate::corpus::normalize_token(word) {
                if let Some(i) = vocab.get(&norm) {
                    source[i].get_or_insert(vec);
                }
            }
        }
        let mut matched = 0;
        for (i, src) in source.into_iter().enumerate() {
            let row = self.embedding.row_mut(i);
            match src {
                Some(v) => {
                    row.copy_from_slice(v);
                    matched += 1;
                }
                None => {
                    for w in row.iter_mut() {
                        *w = rng.uniform(-INIT_RANGE, INIT_RANGE);
                    }
                }
            }
        }
        Ok(matched)
    }
}

impl Gradients {
    pub fn zeros_like(model: &ModelParams) -> Self {
        let mut layers = model.layers.clone();
        for layer in &mut layers {
            for p in [&mut layer.forward, &mut layer.backward] {
                for (_, block) in p.blocks_mut() {
                    block.fill(0.0);
                }
            }
        }
        let (m, h) = model.out_forward.shape();
        Gradients {
            embedding_rows: BTreeMap::new(),
            cap_weights: Matrix::zeros(model.cap_weights.rows(), model.cap_weights.cols()),
            layers,
            out_forward: Matrix::zeros(m, h),
            out_backward: Matrix::zeros(m, h),
            out_bias: vec![0.0; m],
        }
    }

    fn dense_blocks(&self) -> Vec<&[f64]> {
        dense_blocks(
            &self.cap_weights,
            &self.layers,
            &self.out_forward,
            &self.out_backward,
            &self.out_bias,
        )
        .into_iter()
        .map(|(_, b)| b)
        .collect()
    }

    /// Dense flattening aligned with [`ModelParams::to_flat`].
    pub fn to_flat(&self, model: &ModelParams) -> Vec<f64> {
        let (rows, dim) = model.embedding.shape();
        let mut out = vec![0.0; rows * dim];
        for (&r, g) in &self.embedding_rows {
            out[r * dim..(r + 1) * dim].copy_from_slice(g);
        }
        for b in self.dense_blocks() {
            out.extend_from_slice(b);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.embedding_rows.values().flatten().all(|&v| v == 0.0)
            && self.dense_blocks().into_iter().flatten().all(|&v| v == 0.0)
    }
}

/// Per-token tag distributions, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(Matrix);

impl ProbMatrix {
    /// Validates rows: entries in `[0, 1]`, each row summing to 1 within 1e-9.
    pub fn new(m: Matrix) -> Result<Self> {
        for r in 0..m.rows() {
            let row = m.row(r);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "row {r} is not a probability distribution"
                )));
            }
        }
        Ok(ProbMatrix(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ProbMatrix::from_rows", "ragged rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        ProbMatrix::new(Matrix::from_vec(rows.len(), cols, data)?)
    }

    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn num_tags(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.0.row(t)
    }

    pub fn get(&self, t: usize, tag: usize) -> f64 {
        self.0.get(t, tag)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Activations from [`forward`], consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    dims: ModelDims,
    words: Vec<usize>,
    caps: Vec<CapFeature>,
    /// Per layer, per position: the layer's input vector.
    layer_inputs: Vec<Vec<Vector>>,
    /// Per layer: (forward caches, backward caches), indexed by position.
    steps: Vec<(Vec<CellCache>, Vec<CellCache>)>,
    probs: ProbMatrix,
}

impl ForwardCache {
    pub fn probs(&self) -> &ProbMatrix {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Input-layer vector: embedding row plus `W2 · cap`.
pub fn input_vector(model: &ModelParams, word_index: usize, cap: CapFeature) -> Result<Vector> {
    if word_index >= model.embedding.rows() {
        return Err(Error::invalid(format!(
            "word index {word_index} out of range for vocabulary of {}",
            model.embedding.rows()
        )));
    }
    let mut v = model.embedding.row(word_index).to_vec();
    let col = cap.index();
    for (k, x) in v.iter_mut().enumerate() {
        *x += model.cap_weights.get(k, col);
    }
    Ok(v)
}

/// Full forward pass over one sentence.
pub fn forward(
    model: &ModelParams,
    word_indices: &[usize],
    caps: &[CapFeature],
) -> Result<(ProbMatrix, ForwardCache)> {
    if word_indices.is_empty() {
        return Err(Error::invalid(
            "cannot run the network on an empty sentence",
        ));
    }
    if word_indices.len() != caps.len() {
        return Err(Error::shape(
            "forward",
            format!(
                "{} words but {} capitalization features",
                word_indices.len(),
                caps.len()
            ),
        ));
    }
    let dims = model.dims();
    let hidden = dims.hidden_size;
    let mut inputs: Vec<Vector> = word_indices
        .iter()
        .zip(caps)
        .map(|(&w, &c)| input_vector(model, w, c))
        .collect::<Result<_>>()?;

    let mut layer_inputs = Vec::with_capacity(model.layers.len());
    let mut steps = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let fwd = lstm::run_direction(&layer.forward, &inputs, false);
        let bwd = lstm::run_direction(&layer.backward, &inputs, true);
        let next: Vec<Vector> = fwd
            .iter()
            .zip(&bwd)
            .map(|(f, b)| {
                let mut v = Vec::with_capacity(2 * hidden);
                v.extend_from_slice(&f.h);
                v.extend_from_slice(&b.h);
                v
            })
            .collect();
        layer_inputs.push(std::mem::replace(&mut inputs, next));
        steps.push((fwd, bwd));
    }

    let m = dims.tags;
    let n = word_indices.len();
    let mut probs = Matrix::zeros(n, m);
    let (top_f, top_b) = steps.last().expect("at least one layer");
    for t in 0..n {
        let mut y = model.out_bias.clone();
        model.out_forward.matvec_acc(&top_f[t].h, &mut y);
        model.out_backward.matvec_acc(&top_b[t].h, &mut y);
        probs.row_mut(t).copy_from_slice(&softmax(&y));
    }
    let probs = ProbMatrix(probs);
    let cache = ForwardCache {
        dims,
        words: word_indices.to_vec(),
        caps: caps.to_vec(),
        layer_inputs,
        steps,
        probs: probs.clone(),
    };
    Ok((probs, cache))
}

/// Tag distributions only.
pub fn predict(
    model: &ModelParams,
    word_indices: &[usize],
    caps: &[CapFeature],
) -> Result<ProbMatrix> {
    forward(model, word_indices, caps).map(|(p, _)| p)
}

/// Mean token cross-entropy `−(1/n) Σ ln p_t[gold_t]`.
pub fn loss(probs: &ProbMatrix, gold: &[usize]) -> Result<f64> {
    if gold.len() != probs.len() {
        return Err(Error::shape(
            "loss",
            format!("{} gold tags for {} tokens", gold.len(), probs.len()),
        ));
    }
    if gold.is_empty() {
        return Err(Error::invalid("loss of an empty sentence"));
    }
    let mut total = 0.0;
    for (t, &g) in gold.iter().enumerate() {
        if g >= probs.num_tags() {
            return Err(Error::invalid(format!(
                "gold tag {g} out of range for {} tags",
                probs.num_tags()
            )));
        }
        total -= probs.get(t, g).ln();
    }
    Ok(total / gold.len() as f64)
}

/// Exact gradient of [`loss`] by backpropagation through time.
pub fn backward(model: &ModelParams, cache: &ForwardCache, gold: &[usize]) -> Result<Gradients> {
    if cache.dims != model.dims() {
        return Err(Error::invalid(format!(
            "forward cache was computed for {:?}, model is {:?}",
            cache.dims,
            model.dims()
        )));
    }
    let n = cache.len();
    if gold.len() != n {
        return Err(Error::shape(
            "backward",
            format!("{} gold tags for {n} tokens", gold.len()),
        ));
    }
    let dims = cache.dims;
    if let Some(&g) = gold.iter().find(|&&g| g >= dims.tags) {
        return Err(Error::invalid(format!(
            "gold tag {g} out of range for {} tags",
            dims.tags
        )));
    }
    let hidden = dims.hidden_size;
    let mut grads = Gradients::zeros_like(model);

    let (top_f, top_b) = cache.steps.last().expect("at least one layer");
    let mut dh_fwd: Vec<Vector> = vec![vec![0.0; hidden]; n];
    let mut dh_bwd: Vec<Vector> = vec![vec![0.0; hidden]; n];
    let scale = 1.0 / n as f64;
    for t in 0..n {
        let mut dy = cache.probs.row(t).to_vec();
        dy[gold[t]] -= 1.0;
        for v in &mut dy {
            *v *= scale;
        }
        grads.out_forward.outer_acc(&dy, &top_f[t].h);
        grads.out_backward.outer_acc(&dy, &top_b[t].h);
        for (b, d) in grads.out_bias.iter_mut().zip(&dy) {
            *b += d;
        }
        model.out_forward.matvec_t_acc(&dy, &mut dh_fwd[t]);
        model.out_backward.matvec_t_acc(&dy, &mut dh_bwd[t]);
    }

    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let inputs = &cache.layer_inputs[l];
        let (fwd_steps, bwd_steps) = &cache.steps[l];
        let mut dx: Vec<Vector> = vec![vec![0.0; dims.layer_input(l)]; n];
        let g = &mut grads.layers[l];
        lstm::backprop_direction(
            &layer.forward,
            inputs,
            fwd_steps,
            &dh_fwd,
            false,
            &mut g.forward,
            &mut dx,
        );
        lstm::backprop_direction(
            &layer.backward,
            inputs,
            bwd_steps,
            &dh_bwd,
            true,
            &mut g.backward,
            &mut dx,
        );
        if l > 0 {
            for ((f, b), d) in dh_fwd.iter_mut().zip(dh_bwd.iter_mut()).zip(&dx) {
                f.copy_from_slice(&d[..hidden]);
                b.copy_from_slice(&d[hidden..]);
            }
        } else {
            for ((&word, cap), dx_t) in cache.words.iter().zip(&cache.caps).zip(&dx) {
                let row = grads
                    .embedding_rows
                    .entry(word)
                    .or_insert_with(|| vec![0.0; dims.embedding_dim]);
                for (r, d) in row.iter_mut().zip(dx_t) {
                    *r += d;
                }
                let col = cap.index();
                for (k, d) in dx_t.iter().enumerate() {
                    let cur = grads.cap_weights.get(k, col);
                    grads.cap_weights.set(k, col, cur + d);
                }
            }
        }
    }
    Ok(grads)
}
