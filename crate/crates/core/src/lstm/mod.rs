//! Single-layer LSTM with a sigmoid output layer, trained on summed
//! per-character mean squared error.
//!
//! ```text
//! i = σ(W_xi x + W_hi h + b_i)      c' = f ⊙ c + i ⊙ g
//! f = σ(W_xf x + W_hf h + b_f)      h' = o ⊙ tanh(c')
//! g = tanh(W_xg x + W_hg h + b_g)   y  = σ(W_y h' + b_y)
//! o = σ(W_xo x + W_ho h + b_o)
//! ```
//!
//! All trainable values live in one flat row-major buffer. The four gate
//! matrices of each kind are stored back to back in the order i, f, g, o, so
//! the input and recurrent weights each also read as a single `4H × ·` matrix.

mod checkpoint;
mod optimizer;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoding::{encode_input, encode_target};
use crate::error::{Error, Result};
use crate::languages::Sample;

pub use optimizer::{Optimizer, OptimizerKind};

/// Named parameter tensors, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tensor {
    WXi,
    WXf,
    WXg,
    WXo,
    WHi,
    WHf,
    WHg,
    WHo,
    Bi,
    Bf,
    Bg,
    Bo,
    WY,
    BY,
}

impl Tensor {
    pub const ALL: [Tensor; 14] = [
        Tensor::WXi,
        Tensor::WXf,
        Tensor::WXg,
        Tensor::WXo,
        Tensor::WHi,
        Tensor::WHf,
        Tensor::WHg,
        Tensor::WHo,
        Tensor::Bi,
        Tensor::Bf,
        Tensor::Bg,
        Tensor::Bo,
        Tensor::WY,
        Tensor::BY,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::WXi => "w_xi",
            Tensor::WXf => "w_xf",
            Tensor::WXg => "w_xg",
            Tensor::WXo => "w_xo",
            Tensor::WHi => "w_hi",
            Tensor::WHf => "w_hf",
            Tensor::WHg => "w_hg",
            Tensor::WHo => "w_ho",
            Tensor::Bi => "b_i",
            Tensor::Bf => "b_f",
            Tensor::Bg => "b_g",
            Tensor::Bo => "b_o",
            Tensor::WY => "w_y",
            Tensor::BY => "b_y",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, Tensor::WHi | Tensor::WHf | Tensor::WHg | Tensor::WHo)
    }
}

/// Dimensions shared by parameters and gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    input_dim: usize,
    hidden: usize,
}

impl Shape {
    fn output_dim(self) -> usize {
        self.input_dim + 1
    }

    fn dims(self, t: Tensor) -> (usize, usize) {
        let (d, h, m) = (self.input_dim, self.hidden, self.output_dim());
        match t {
            Tensor::WXi | Tensor::WXf | Tensor::WXg | Tensor::WXo => (h, d),
            Tensor::WHi | Tensor::WHf | Tensor::WHg | Tensor::WHo => (h, h),
            Tensor::Bi | Tensor::Bf | Tensor::Bg | Tensor::Bo => (h, 1),
            Tensor::WY => (m, h),
            Tensor::BY => (m, 1),
        }
    }

    fn offset(self, t: Tensor) -> usize {
        Tensor::ALL
            .iter()
            .take_while(|&&u| u != t)
            .map(|&u| {
                let (r, c) = self.dims(u);
                r * c
            })
            .sum()
    }

    fn wx(self) -> usize {
        0
    }
    fn wh(self) -> usize {
        4 * self.hidden * self.input_dim
    }
    fn b(self) -> usize {
        self.wh() + 4 * self.hidden * self.hidden
    }
    fn wy(self) -> usize {
        self.b() + 4 * self.hidden
    }
    fn by(self) -> usize {
        self.wy() + self.output_dim() * self.hidden
    }
    fn len(self) -> usize {
        self.by() + self.output_dim()
    }
}

/// Every trainable weight and bias of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParameters {
    shape: Shape,
    values: Vec<f64>,
}

/// Same layout as [`LstmParameters`]; one partial derivative per scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    shape: Shape,
    values: Vec<f64>,
}

/// Hidden and cell vectors. The initial state is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Outputs, per-step states and loss of one forward pass.
#[derive(Debug, Clone)]
pub struct SequenceRun {
    pub outputs: Vec<Vec<f64>>,
    pub states: Vec<LstmState>,
    pub loss: f64,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmParameters {
    /// All-zero parameters.
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let shape = Shape { input_dim, hidden };
        LstmParameters {
            shape,
            values: vec![0.0; shape.len()],
        }
    }

    /// Every scalar drawn i.i.d. from `U[-1/√H, 1/√H]`.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        assert!(input_dim >= 2, "input dimension must be at least 2");
        assert!(hidden >= 1, "need at least one hidden unit");
        let mut p = LstmParameters::zeros(input_dim, hidden);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut p.values {
            *v = rng.random_range(-bound..=bound);
        }
        p
    }

    /// Like [`init`](Self::init) with `base_seed`, then the four recurrent
    /// matrices redrawn from `recurrent_seed`.
    pub fn init_recurrent_reseeded(
        input_dim: usize,
        hidden: usize,
        base_seed: u64,
        recurrent_seed: u64,
    ) -> Self {
        let mut p = LstmParameters::init(input_dim, hidden, base_seed);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(recurrent_seed);
        let (start, end) = (p.shape.wh(), p.shape.b());
        for v in &mut p.values[start..end] {
            *v = rng.random_range(-bound..=bound);
        }
        p
    }

    pub(crate) fn from_values(input_dim: usize, hidden: usize, values: Vec<f64>) -> Self {
        let shape = Shape { input_dim, hidden };
        assert_eq!(values.len(), shape.len());
        LstmParameters { shape, values }
    }

    pub fn input_dim(&self) -> usize {
        self.shape.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.shape.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.shape.output_dim()
    }

    /// `(rows, cols)` of a named tensor; biases are column vectors.
    pub fn dims(&self, t: Tensor) -> (usize, usize) {
        self.shape.dims(t)
    }

    pub fn tensor(&self, t: Tensor) -> &[f64] {
        let (r, c) = self.shape.dims(t);
        let o = self.shape.offset(t);
        &self.values[o..o + r * c]
    }

    pub fn tensor_mut(&mut self, t: Tensor) -> &mut [f64] {
        let (r, c) = self.shape.dims(t);
        let o = self.shape.offset(t);
        &mut self.values[o..o + r * c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// FNV-1a over the bit patterns of all values and the dimensions.
    pub fn checksum(&self) -> u64 {
        const PRIME: u64 = 0x100_0000_01b3;
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let dims = [self.shape.input_dim as u64, self.shape.hidden as u64];
        for word in dims
            .into_iter()
            .chain(self.values.iter().map(|v| v.to_bits()))
        {
            for byte in word.to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(PRIME);
            }
        }
        hash
    }

    /// One time step: returns the new state and the output activations.
    pub fn step(&self, state: &LstmState, x: &[f64]) -> (LstmState, Vec<f64>) {
        let hsz = self.hidden();
        assert_eq!(x.len(), self.input_dim());
        assert_eq!(state.h.len(), hsz);
        let mut buf = vec![0.0; self.stride()];
        self.forward_step(x, &state.h, &state.c, &mut buf);
        let next = LstmState {
            h: buf[6 * hsz..7 * hsz].to_vec(),
            c: buf[4 * hsz..5 * hsz].to_vec(),
        };
        (next, buf[7 * hsz..].to_vec())
    }

    /// Runs `sample` from the zero state, recording every output and state.
    pub fn run_sequence(&self, sample: &Sample) -> SequenceRun {
        let hsz = self.hidden();
        let (xs, ts) = self.encode(sample);
        let mut tape = Tape::default();
        let loss = self.forward_tape(&xs, &ts, sample.len(), &mut tape);
        let stride = self.stride();
        let mut outputs = Vec::with_capacity(sample.len());
        let mut states = Vec::with_capacity(sample.len());
        for row in tape.rows.chunks_exact(stride) {
            outputs.push(row[7 * hsz..].to_vec());
            states.push(LstmState {
                h: row[6 * hsz..7 * hsz].to_vec(),
                c: row[4 * hsz..5 * hsz].to_vec(),
            });
        }
        SequenceRun {
            outputs,
            states,
            loss,
        }
    }

    /// Loss only, without keeping per-step records.
    pub fn loss(&self, sample: &Sample) -> f64 {
        let (xs, ts) = self.encode(sample);
        let (d, m, hsz) = (self.input_dim(), self.output_dim(), self.hidden());
        let mut h = vec![0.0; hsz];
        let mut c = vec![0.0; hsz];
        let mut buf = vec![0.0; self.stride()];
        let mut loss = 0.0;
        for t in 0..sample.len() {
            self.forward_step(&xs[t * d..(t + 1) * d], &h, &c, &mut buf);
            h.copy_from_slice(&buf[6 * hsz..7 * hsz]);
            c.copy_from_slice(&buf[4 * hsz..5 * hsz]);
            loss += char_loss(&buf[7 * hsz..], &ts[t * m..(t + 1) * m]);
        }
        loss
    }

    /// Exact gradient of [`run_sequence`](Self::run_sequence)'s loss by
    /// backpropagation through time.
    pub fn backward(&self, sample: &Sample) -> (Gradients, f64) {
        let mut grads = Gradients::zeros_like(self);
        let mut ws = Workspace::default();
        let loss = self.backward_into(sample, &mut ws, &mut grads);
        (grads, loss)
    }

    /// [`backward`](Self::backward) reusing caller-owned buffers. `grads` is
    /// overwritten.
    pub fn backward_into(&self, sample: &Sample, ws: &mut Workspace, grads: &mut Gradients) -> f64 {
        assert_eq!(grads.shape, self.shape);
        grads.values.fill(0.0);
        let s = self.shape;
        let (d, m, hsz) = (s.input_dim, s.output_dim(), s.hidden);
        let steps = sample.len();
        self.encode_into(sample, &mut ws.xs, &mut ws.ts);
        let loss = self.forward_tape(&ws.xs, &ws.ts, steps, &mut ws.tape);

        let stride = self.stride();
        let w = &self.values;
        let g = &mut grads.values;
        ws.dh.clear();
        ws.dh.resize(hsz, 0.0);
        ws.dc.clear();
        ws.dc.resize(hsz, 0.0);
        ws.dz.clear();
        ws.dz.resize(4 * hsz, 0.0);
        let zeros = vec![0.0; hsz];
        let scale = 2.0 / m as f64;

        for t in (0..steps).rev() {
            let row = &ws.tape.rows[t * stride..(t + 1) * stride];
            let (gates, rest) = row.split_at(4 * hsz);
            let tanh_c = &rest[hsz..2 * hsz];
            let h_t = &rest[2 * hsz..3 * hsz];
            let y = &rest[3 * hsz..];
            let (h_prev, c_prev) = if t == 0 {
                (&zeros[..], &zeros[..])
            } else {
                let prev = &ws.tape.rows[(t - 1) * stride..t * stride];
                (&prev[6 * hsz..7 * hsz], &prev[4 * hsz..5 * hsz])
            };
            let target = &ws.ts[t * m..(t + 1) * m];
            let x = &ws.xs[t * d..(t + 1) * d];

            // Output layer.
            for j in 0..m {
                let dzy = scale * (y[j] - target[j]) * y[j] * (1.0 - y[j]);
                g[s.by() + j] += dzy;
                let wy_row = s.wy() + j * hsz;
                for r in 0..hsz {
                    g[wy_row + r] += dzy * h_t[r];
                    ws.dh[r] += w[wy_row + r] * dzy;
                }
            }

            // Cell.
            for r in 0..hsz {
                let (ig, fg, gg, og) = (
                    gates[r],
                    gates[hsz + r],
                    gates[2 * hsz + r],
                    gates[3 * hsz + r],
                );
                let dh = ws.dh[r];
                let d_o = dh * tanh_c[r];
                let dc = ws.dc[r] + dh * og * (1.0 - tanh_c[r] * tanh_c[r]);
                ws.dz[r] = dc * gg * ig * (1.0 - ig);
                ws.dz[hsz + r] = dc * c_prev[r] * fg * (1.0 - fg);
                ws.dz[2 * hsz + r] = dc * ig * (1.0 - gg * gg);
                ws.dz[3 * hsz + r] = d_o * og * (1.0 - og);
                ws.dc[r] = dc * fg;
            }

            // Pre-activations into weights and the previous hidden state.
            ws.dh.fill(0.0);
            for k in 0..4 * hsz {
                let dz = ws.dz[k];
                g[s.b() + k] += dz;
                let wx_row = s.wx() + k * d;
                for j in 0..d {
                    g[wx_row + j] += dz * x[j];
                }
                let wh_row = s.wh() + k * hsz;
                for j in 0..hsz {
                    g[wh_row + j] += dz * h_prev[j];
                    ws.dh[j] += w[wh_row + j] * dz;
                }
            }
        }
        loss
    }

    /// Central differences `(L(p + εe) − L(p − εe)) / 2ε` for every scalar.
    pub fn finite_difference_grad(&self, sample: &Sample, epsilon: f64) -> Result<Gradients> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        let mut probe = self.clone();
        let mut grads = Gradients::zeros_like(self);
        for i in 0..self.values.len() {
            let orig = self.values[i];
            probe.values[i] = orig + epsilon;
            let plus = probe.loss(sample);
            probe.values[i] = orig - epsilon;
            let minus = probe.loss(sample);
            probe.values[i] = orig;
            grads.values[i] = (plus - minus) / (2.0 * epsilon);
        }
        Ok(grads)
    }

    /// Decodes each step at the threshold and compares with the target,
    /// stopping at the first mismatch.
    pub(crate) fn matches_targets(&self, sample: &Sample) -> bool {
        let lang = sample.language;
        let (d, hsz) = (self.input_dim(), self.hidden());
        assert_eq!(d, lang.input_dim(), "model input width does not fit {lang}");
        let mut h = vec![0.0; hsz];
        let mut c = vec![0.0; hsz];
        let mut buf = vec![0.0; self.stride()];
        let mut x = vec![0.0; d];
        for (sym, target) in sample.input.iter().zip(&sample.targets) {
            x.fill(0.0);
            x[crate::encoding::input_index(lang, *sym).expect("generated input")] = 1.0;
            self.forward_step(&x, &h, &c, &mut buf);
            if crate::encoding::decode_prediction(lang, &buf[7 * hsz..]) != *target {
                return false;
            }
            h.copy_from_slice(&buf[6 * hsz..7 * hsz]);
            c.copy_from_slice(&buf[4 * hsz..5 * hsz]);
        }
        true
    }

    /// Per-step record width: gates (4H), c, tanh c, h, y.
    fn stride(&self) -> usize {
        7 * self.hidden() + self.output_dim()
    }

    fn encode(&self, sample: &Sample) -> (Vec<f64>, Vec<f64>) {
        let (mut xs, mut ts) = (Vec::new(), Vec::new());
        self.encode_into(sample, &mut xs, &mut ts);
        (xs, ts)
    }

    fn encode_into(&self, sample: &Sample, xs: &mut Vec<f64>, ts: &mut Vec<f64>) {
        let lang = sample.language;
        assert_eq!(
            self.input_dim(),
            lang.input_dim(),
            "model input width does not fit {lang}"
        );
        xs.clear();
        ts.clear();
        for (&s, &set) in sample.input.iter().zip(&sample.targets) {
            xs.extend(encode_input(lang, s).expect("sample input outside vocabulary"));
            ts.extend(encode_target(lang, set).expect("sample target outside vocabulary"));
        }
    }

    fn forward_tape(&self, xs: &[f64], ts: &[f64], steps: usize, tape: &mut Tape) -> f64 {
        let (d, m, hsz) = (self.input_dim(), self.output_dim(), self.hidden());
        let stride = self.stride();
        tape.rows.clear();
        tape.rows.resize(steps * stride, 0.0);
        let zeros = vec![0.0; hsz];
        let mut loss = 0.0;
        for t in 0..steps {
            let (done, rest) = tape.rows.split_at_mut(t * stride);
            let row = &mut rest[..stride];
            let (h_prev, c_prev) = if t == 0 {
                (&zeros[..], &zeros[..])
            } else {
                let prev = &done[(t - 1) * stride..];
                (&prev[6 * hsz..7 * hsz], &prev[4 * hsz..5 * hsz])
            };
            self.forward_step(&xs[t * d..(t + 1) * d], h_prev, c_prev, row);
            loss += char_loss(&row[7 * hsz..], &ts[t * m..(t + 1) * m]);
        }
        loss
    }

    /// Writes gates, c', tanh c', h', y into `out` (length `stride`).
    fn forward_step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64], out: &mut [f64]) {
        let s = self.shape;
        let (d, m, hsz) = (s.input_dim, s.output_dim(), s.hidden);
        let w = &self.values;
        for k in 0..4 * hsz {
            let mut z = w[s.b() + k];
            let wx_row = &w[s.wx() + k * d..s.wx() + (k + 1) * d];
            for (wj, xj) in wx_row.iter().zip(x) {
                z += wj * xj;
            }
            let wh_row = &w[s.wh() + k * hsz..s.wh() + (k + 1) * hsz];
            for (wj, hj) in wh_row.iter().zip(h_prev) {
                z += wj * hj;
            }
            out[k] = if k / hsz == 2 { z.tanh() } else { sigmoid(z) };
        }
        for r in 0..hsz {
            let c = out[hsz + r] * c_prev[r] + out[r] * out[2 * hsz + r];
            let tc = c.tanh();
            out[4 * hsz + r] = c;
            out[5 * hsz + r] = tc;
            out[6 * hsz + r] = out[3 * hsz + r] * tc;
        }
        for j in 0..m {
            let row = &w[s.wy() + j * hsz..s.wy() + (j + 1) * hsz];
            let mut z = w[s.by() + j];
            for (wr, hr) in row.iter().zip(&out[6 * hsz..7 * hsz]) {
                z += wr * hr;
            }
            out[7 * hsz + j] = sigmoid(z);
        }
    }
}

/// Mean over output dimensions of the squared error at one character.
#[inline]
fn char_loss(y: &[f64], target: &[f64]) -> f64 {
    let sum: f64 = y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
    sum / y.len() as f64
}

impl Gradients {
    pub fn zeros_like(p: &LstmParameters) -> Self {
        Gradients {
            shape: p.shape,
            values: vec![0.0; p.values.len()],
        }
    }

    pub fn tensor(&self, t: Tensor) -> &[f64] {
        let (r, c) = self.shape.dims(t);
        let o = self.shape.offset(t);
        &self.values[o..o + r * c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Largest entrywise `|a − b| / max(|a|, |b|, floor)`.
    pub fn max_relative_error(&self, other: &Gradients, floor: f64) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Default, Clone)]
struct Tape {
    rows: Vec<f64>,
}

/// Scratch buffers for repeated [`LstmParameters::backward_into`] calls.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    tape: Tape,
    xs: Vec<f64>,
    ts: Vec<f64>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    dz: Vec<f64>,
}
