use crate::error::{Error, Result};
use crate::numerics::{sigmoid_scalar, Matrix, SeededRng, Vector};

/// Number of parameter blocks in one LSTM direction.
pub const LSTM_BLOCKS: usize = 15;

/// Block names in storage and serialization order.
pub const LSTM_BLOCK_NAMES: [&str; LSTM_BLOCKS] = [
    "wx_input",
    "wx_forget",
    "wx_cell",
    "wx_output",
    "wh_input",
    "wh_forget",
    "wh_cell",
    "wh_output",
    "peep_input",
    "peep_forget",
    "peep_output",
    "bias_input",
    "bias_forget",
    "bias_cell",
    "bias_output",
];

/// One LSTM direction with diagonal peephole connections:
///
/// ```text
/// i = σ(Wx_i x + Wh_i h' + p_i ⊙ c' + b_i)
/// f = σ(Wx_f x + Wh_f h' + p_f ⊙ c' + b_f)
/// c = f ⊙ c' + i ⊙ tanh(Wx_c x + Wh_c h' + b_c)
/// o = σ(Wx_o x + Wh_o h' + p_o ⊙ c + b_o)
/// h = o ⊙ tanh(c)
/// ```
///
/// where `h'`, `c'` are the previous step's state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub wx_input: Matrix,
    pub wx_forget: Matrix,
    pub wx_cell: Matrix,
    pub wx_output: Matrix,
    pub wh_input: Matrix,
    pub wh_forget: Matrix,
    pub wh_cell: Matrix,
    pub wh_output: Matrix,
    pub peep_input: Vector,
    pub peep_forget: Vector,
    pub peep_output: Vector,
    pub bias_input: Vector,
    pub bias_forget: Vector,
    pub bias_cell: Vector,
    pub bias_output: Vector,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let wx = || Matrix::zeros(hidden, input);
        let wh = || Matrix::zeros(hidden, hidden);
        let v = || vec![0.0; hidden];
        LstmParams {
            wx_input: wx(),
            wx_forget: wx(),
            wx_cell: wx(),
            wx_output: wx(),
            wh_input: wh(),
            wh_forget: wh(),
            wh_cell: wh(),
            wh_output: wh(),
            peep_input: v(),
            peep_forget: v(),
            peep_output: v(),
            bias_input: v(),
            bias_forget: v(),
            bias_cell: v(),
            bias_output: v(),
        }
    }

    /// Every block uniform in `[-range, range)`, drawn in block order.
    pub fn random(input: usize, hidden: usize, range: f64, rng: &mut SeededRng) -> Self {
        let mut p = LstmParams::zeros(input, hidden);
        for (_, block) in p.blocks_mut() {
            for v in block.iter_mut() {
                *v = rng.uniform(-range, range);
            }
        }
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.bias_input.len()
    }

    pub fn input_size(&self) -> usize {
        self.wx_input.cols()
    }

    pub fn block_shape(name: &str, input: usize, hidden: usize) -> (usize, usize) {
        if name.starts_with("wx_") {
            (hidden, input)
        } else if name.starts_with("wh_") {
            (hidden, hidden)
        } else {
            (1, hidden)
        }
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); LSTM_BLOCKS] {
        let n = LSTM_BLOCK_NAMES;
        [
            (n[0], self.wx_input.data()),
            (n[1], self.wx_forget.data()),
            (n[2], self.wx_cell.data()),
            (n[3], self.wx_output.data()),
            (n[4], self.wh_input.data()),
            (n[5], self.wh_forget.data()),
            (n[6], self.wh_cell.data()),
            (n[7], self.wh_output.data()),
            (n[8], &self.peep_input),
            (n[9], &self.peep_forget),
            (n[10], &self.peep_output),
            (n[11], &self.bias_input),
            (n[12], &self.bias_forget),
            (n[13], &self.bias_cell),
            (n[14], &self.bias_output),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); LSTM_BLOCKS] {
        let n = LSTM_BLOCK_NAMES;
        [
            (n[0], self.wx_input.data_mut()),
            (n[1], self.wx_forget.data_mut()),
            (n[2], self.wx_cell.data_mut()),
            (n[3], self.wx_output.data_mut()),
            (n[4], self.wh_input.data_mut()),
            (n[5], self.wh_forget.data_mut()),
            (n[6], self.wh_cell.data_mut()),
            (n[7], self.wh_output.data_mut()),
            (n[8], &mut self.peep_input),
            (n[9], &mut self.peep_forget),
            (n[10], &mut self.peep_output),
            (n[11], &mut self.bias_input),
            (n[12], &mut self.bias_forget),
            (n[13], &mut self.bias_cell),
            (n[14], &mut self.bias_output),
        ]
    }

    pub(crate) fn input_matrices_mut(&mut self) -> [&mut Matrix; 4] {
        [
            &mut self.wx_input,
            &mut self.wx_forget,
            &mut self.wx_cell,
            &mut self.wx_output,
        ]
    }
}

/// Activations retained from one forward step.
#[derive(Debug, Clone)]
pub struct CellCache {
    pub h_prev: Vector,
    pub c_prev: Vector,
    pub input_gate: Vector,
    pub forget_gate: Vector,
    pub candidate: Vector,
    pub output_gate: Vector,
    pub c: Vector,
    pub tanh_c: Vector,
    pub h: Vector,
}

pub(crate) fn cell_forward(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> CellCache {
    let hidden = p.hidden_size();
    let pre = |wx: &Matrix, wh: &Matrix, b: &[f64]| {
        let mut a = b.to_vec();
        wx.matvec_acc(x, &mut a);
        wh.matvec_acc(h_prev, &mut a);
        a
    };

    let mut input_gate = pre(&p.wx_input, &p.wh_input, &p.bias_input);
    let mut forget_gate = pre(&p.wx_forget, &p.wh_forget, &p.bias_forget);
    let mut candidate = pre(&p.wx_cell, &p.wh_cell, &p.bias_cell);
    let mut c = vec![0.0; hidden];
    for k in 0..hidden {
        input_gate[k] = sigmoid_scalar(input_gate[k] + p.peep_input[k] * c_prev[k]);
        forget_gate[k] = sigmoid_scalar(forget_gate[k] + p.peep_forget[k] * c_prev[k]);
        candidate[k] = candidate[k].tanh();
        c[k] = forget_gate[k] * c_prev[k] + input_gate[k] * candidate[k];
    }
    let mut output_gate = pre(&p.wx_output, &p.wh_output, &p.bias_output);
    let mut tanh_c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for k in 0..hidden {
        output_gate[k] = sigmoid_scalar(output_gate[k] + p.peep_output[k] * c[k]);
        tanh_c[k] = c[k].tanh();
        h[k] = output_gate[k] * tanh_c[k];
    }
    CellCache {
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        input_gate,
        forget_gate,
        candidate,
        output_gate,
        c,
        tanh_c,
        h,
    }
}

/// One LSTM step. Returns the new hidden state, the new cell state and the
/// activations needed to backpropagate through the step.
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> Result<(Vector, Vector, CellCache)> {
    let hidden = p.hidden_size();
    if x.len() != p.input_size() || h_prev.len() != hidden || c_prev.len() != hidden {
        return Err(Error::shape(
            "lstm_cell_forward",
            format!(
                "cell expects input {} and hidden {hidden}, got x {}, h {}, c {}",
                p.input_size(),
                x.len(),
                h_prev.len(),
                c_prev.len()
            ),
        ));
    }
    let cache = cell_forward(p, x, h_prev, c_prev);
    Ok((cache.h.clone(), cache.c.clone(), cache))
}

/// Backpropagates one step. `dh` is the total gradient arriving at this
/// step's hidden output, `dc` the gradient arriving at its cell state from
/// the next step. Accumulates parameter gradients into `g` and the input
/// gradient into `dx`; returns gradients for `(h_prev, c_prev)`.
pub(crate) fn cell_backward(
    p: &LstmParams,
    cache: &CellCache,
    x: &[f64],
    dh: &[f64],
    dc_next: &[f64],
    g: &mut LstmParams,
    dx: &mut [f64],
) -> (Vector, Vector) {
    let hidden = p.hidden_size();
    let mut da_input = vec![0.0; hidden];
    let mut da_forget = vec![0.0; hidden];
    let mut da_cell = vec![0.0; hidden];
    let mut da_output = vec![0.0; hidden];
    let mut dc_prev = vec![0.0; hidden];

    for k in 0..hidden {
        let o = cache.output_gate[k];
        let i = cache.input_gate[k];
        let f = cache.forget_gate[k];
        let cand = cache.candidate[k];
        let tc = cache.tanh_c[k];

        da_output[k] = dh[k] * tc * o * (1.0 - o);
        let dc = dh[k] * o * (1.0 - tc * tc) + dc_next[k] + da_output[k] * p.peep_output[k];
        da_input[k] = dc * cand * i * (1.0 - i);
        da_cell[k] = dc * i * (1.0 - cand * cand);
        da_forget[k] = dc * cache.c_prev[k] * f * (1.0 - f);
        dc_prev[k] = dc * f + da_input[k] * p.peep_input[k] + da_forget[k] * p.peep_forget[k];

        g.peep_input[k] += da_input[k] * cache.c_prev[k];
        g.peep_forget[k] += da_forget[k] * cache.c_prev[k];
        g.peep_output[k] += da_output[k] * cache.c[k];
        g.bias_input[k] += da_input[k];
        g.bias_forget[k] += da_forget[k];
        g.bias_cell[k] += da_cell[k];
        g.bias_output[k] += da_output[k];
    }

    g.wx_input.outer_acc(&da_input, x);
    g.wx_forget.outer_acc(&da_forget, x);
    g.wx_cell.outer_acc(&da_cell, x);
    g.wx_output.outer_acc(&da_output, x);
    g.wh_input.outer_acc(&da_input, &cache.h_prev);
    g.wh_forget.outer_acc(&da_forget, &cache.h_prev);
    g.wh_cell.outer_acc(&da_cell, &cache.h_prev);
    g.wh_output.outer_acc(&da_output, &cache.h_prev);

    p.wx_input.matvec_t_acc(&da_input, dx);
    p.wx_forget.matvec_t_acc(&da_forget, dx);
    p.wx_cell.matvec_t_acc(&da_cell, dx);
    p.wx_output.matvec_t_acc(&da_output, dx);

    let mut dh_prev = vec![0.0; hidden];
    p.wh_input.matvec_t_acc(&da_input, &mut dh_prev);
    p.wh_forget.matvec_t_acc(&da_forget, &mut dh_prev);
    p.wh_cell.matvec_t_acc(&da_cell, &mut dh_prev);
    p.wh_output.matvec_t_acc(&da_output, &mut dh_prev);

    (dh_prev, dc_prev)
}

/// Runs one direction over the whole sequence. The returned caches are
/// indexed by sequence position regardless of scan direction.
pub(crate) fn run_direction(p: &LstmParams, inputs: &[Vector], reverse: bool) -> Vec<CellCache> {
    let hidden = p.hidden_size();
    let n = inputs.len();
    let mut caches: Vec<Option<CellCache>> = vec![None; n];
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for step in 0..n {
        let t = if reverse { n - 1 - step } else { step };
        let cache = cell_forward(p, &inputs[t], &h, &c);
        h.clone_from(&cache.h);
        c.clone_from(&cache.c);
        caches[t] = Some(cache);
    }
    caches.into_iter().map(Option::unwrap).collect()
}

/// BPTT over one direction. `dh_out[t]` is the loss gradient w.r.t. this
/// direction's hidden output at position `t`; input gradients are added
/// into `dx[t]`.
pub(crate) fn backprop_direction(
    p: &LstmParams,
    inputs: &[Vector],
    caches: &[CellCache],
    dh_out: &[Vector],
    reverse: bool,
    g: &mut LstmParams,
    dx: &mut [Vector],
) {
    let hidden = p.hidden_size();
    let n = inputs.len();
    let mut dh_rec = vec![0.0; hidden];
    let mut dc_rec = vec![0.0; hidden];
    for step in (0..n).rev() {
        let t = if reverse { n - 1 - step } else { step };
        let dh: Vector = dh_out[t].iter().zip(&dh_rec).map(|(a, b)| a + b).collect();
        let (dh_prev, dc_prev) =
            cell_backward(p, &caches[t], &inputs[t], &dh, &dc_rec, g, &mut dx[t]);
        dh_rec = dh_prev;
        dc_rec = dc_prev;
    }
}
