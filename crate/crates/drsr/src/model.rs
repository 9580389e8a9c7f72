//! The recurrent hazard model and the survival chain rule.
//!
//! A single-layer LSTM reads the displayed document features top to bottom;
//! a scalar head squashed through a logistic turns each hidden state into the
//! conditional click probability h_i at that position. The chain rule then
//! yields the observe probability S(i) = Π_{τ<i}(1−h_τ), the unobserve
//! probability W(i) = 1−S(i), and the click probability p_i = h_i·S(i).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::FeatureVector;

/// Hazards are clamped to this interval before any logarithm so censored
/// losses stay finite.
pub const HAZARD_FLOOR: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Named parameter blocks in flattening/checkpoint order.
pub const BLOCK_NAMES: [&str; 10] = [
    "w_input", "w_forget", "w_output", "w_cell", "b_input", "b_forget", "b_output", "b_cell",
    "w_head", "b_head",
];

/// All model parameters in one flat buffer with named block views.
///
/// Gate weight blocks are H×(F+H) row-major; gate biases are length H; the
/// hazard head is a length-H weight vector plus a scalar bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub data: Vec<f64>,
}

impl Params {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let len = Self::total_len(input_dim, hidden_dim);
        Params { input_dim, hidden_dim, data: vec![0.0; len] }
    }

    pub fn total_len(f: usize, h: usize) -> usize {
        4 * h * (f + h) + 4 * h + h + 1
    }

    /// (rows, cols) of the named block.
    pub fn block_shape(&self, idx: usize) -> (usize, usize) {
        let (f, h) = (self.input_dim, self.hidden_dim);
        match idx {
            0..=3 => (h, f + h),
            4..=7 => (h, 1),
            8 => (1, h),
            9 => (1, 1),
            _ => panic!("no block {idx}"),
        }
    }

    fn block_offset(&self, idx: usize) -> usize {
        let mut off = 0;
        for i in 0..idx {
            let (r, c) = self.block_shape(i);
            off += r * c;
        }
        off
    }

    pub fn block(&self, idx: usize) -> &[f64] {
        let (r, c) = self.block_shape(idx);
        let off = self.block_offset(idx);
        &self.data[off..off + r * c]
    }

    pub fn block_mut(&mut self, idx: usize) -> &mut [f64] {
        let (r, c) = self.block_shape(idx);
        let off = self.block_offset(idx);
        &mut self.data[off..off + r * c]
    }

    pub fn gate_weights(&self, gate: usize) -> &[f64] {
        self.block(gate)
    }

    pub fn gate_bias(&self, gate: usize) -> &[f64] {
        self.block(4 + gate)
    }

    pub fn head_weights(&self) -> &[f64] {
        self.block(8)
    }

    pub fn head_bias(&self) -> f64 {
        self.block(9)[0]
    }
}

/// The recurrent hazard ranker f_θ.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardModel {
    pub params: Params,
}

impl HazardModel {
    pub fn input_dim(&self) -> usize {
        self.params.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.params.hidden_dim
    }
}

/// Per-position distributions produced by a forward pass.
///
/// `s` and `w` have length n+1 (entries S(1)..S(n+1)); `h` and `p` have
/// length n. Hidden states are retained for gradient computation.
#[derive(Debug, Clone)]
pub struct HazardSequence {
    pub h: Vec<f64>,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    pub hidden: Vec<Vec<f64>>,
}

impl HazardSequence {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Fresh model with uniform init in ±1/√(F+H), forget bias 1, head bias 0.
pub fn init_model(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<HazardModel, ModelError> {
    if input_dim == 0 || hidden_dim == 0 {
        return Err(ModelError::Dimension(format!(
            "dimensions must be >= 1, got F={input_dim}, H={hidden_dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / ((input_dim + hidden_dim) as f64).sqrt();
    let mut params = Params::zeros(input_dim, hidden_dim);
    for v in params.data.iter_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    for v in params.block_mut(5) {
        *v = 1.0; // forget gate bias
    }
    params.block_mut(9)[0] = 0.0;
    Ok(HazardModel { params })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-step intermediates cached for backpropagation through time.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub input: Vec<f64>,     // [x_t ; b_{t-1}], length F+H
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub gate_g: Vec<f64>,
    pub cell: Vec<f64>,      // c_t
    pub cell_tanh: Vec<f64>, // tanh(c_t)
    pub hidden: Vec<f64>,    // b_t
    pub hazard: f64,         // clamped h_t
    pub saturated: bool,     // clamp was binding at this step
}

pub(crate) struct ForwardCache {
    pub steps: Vec<StepCache>,
}

pub(crate) fn forward_cached(
    m: &HazardModel,
    xs: &[FeatureVector],
) -> Result<(HazardSequence, ForwardCache), ModelError> {
    let f = m.input_dim();
    let h_dim = m.hidden_dim();
    if xs.is_empty() {
        return Err(ModelError::Dimension("empty input sequence".into()));
    }
    for x in xs {
        if x.dim() != f {
            return Err(ModelError::Dimension(format!(
                "feature dimension {} does not match model input dimension {f}",
                x.dim()
            )));
        }
    }

    let d = f + h_dim;
    let mut b_prev = vec![0.0; h_dim];
    let mut c_prev = vec![0.0; h_dim];
    let mut steps = Vec::with_capacity(xs.len());
    let mut hazards = Vec::with_capacity(xs.len());

    for x in xs {
        let mut input = Vec::with_capacity(d);
        input.extend_from_slice(x.values());
        input.extend_from_slice(&b_prev);

        let mut gates = [
            vec![0.0; h_dim],
            vec![0.0; h_dim],
            vec![0.0; h_dim],
            vec![0.0; h_dim],
        ];
        for (g, out) in gates.iter_mut().enumerate() {
            let w = m.params.gate_weights(g);
            let bias = m.params.gate_bias(g);
            for r in 0..h_dim {
                let row = &w[r * d..(r + 1) * d];
                let mut acc = bias[r];
                for (wv, iv) in row.iter().zip(&input) {
                    acc += wv * iv;
                }
                out[r] = if g == 3 { acc.tanh() } else { sigmoid(acc) };
            }
        }
        let [gate_i, gate_f, gate_o, gate_g] = gates;

        let mut cell = vec![0.0; h_dim];
        let mut cell_tanh = vec![0.0; h_dim];
        let mut hidden = vec![0.0; h_dim];
        for r in 0..h_dim {
            cell[r] = gate_f[r] * c_prev[r] + gate_i[r] * gate_g[r];
            cell_tanh[r] = cell[r].tanh();
            hidden[r] = gate_o[r] * cell_tanh[r];
        }

        let mut u = m.params.head_bias();
        for (wv, bv) in m.params.head_weights().iter().zip(&hidden) {
            u += wv * bv;
        }
        let raw = sigmoid(u);
        let hazard = raw.clamp(HAZARD_FLOOR, 1.0 - HAZARD_FLOOR);

        hazards.push(hazard);
        b_prev = hidden.clone();
        c_prev = cell.clone();
        steps.push(StepCache {
            input,
            gate_i,
            gate_f,
            gate_o,
            gate_g,
            cell,
            cell_tanh,
            hidden,
            hazard,
            saturated: raw != hazard,
        });
    }

    let (s, w, p) = chain_rule(&hazards);
    let seq = HazardSequence {
        h: hazards,
        s,
        w,
        p,
        hidden: steps.iter().map(|st| st.hidden.clone()).collect(),
    };
    Ok((seq, ForwardCache { steps }))
}

/// Run the recurrence over a displayed feature sequence.
pub fn forward(m: &HazardModel, xs: &[FeatureVector]) -> Result<HazardSequence, ModelError> {
    forward_cached(m, xs).map(|(seq, _)| seq)
}

// Running product Π(1−h_τ); exact cancellation in the p_i = S(i)−S(i+1)
// identity matters more than underflow on the short lists ranking uses.
fn chain_rule(h: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = h.len();
    let mut s = Vec::with_capacity(n + 1);
    let mut p = Vec::with_capacity(n);
    let mut surv = 1.0f64;
    s.push(1.0);
    for &hi in h {
        p.push(hi * surv);
        surv *= 1.0 - hi;
        s.push(surv);
    }
    let w = s.iter().map(|&si| 1.0 - si).collect();
    (s, w, p)
}

/// Chain-rule distributions for a given hazard sequence (model-free).
pub fn survival_curves(h: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), ModelError> {
    for &hi in h {
        if !(0.0..=1.0).contains(&hi) {
            return Err(ModelError::Domain(format!("hazard {hi} outside [0,1]")));
        }
    }
    Ok(chain_rule(h))
}

/// Debiased relevance estimates P(r_i=1) = p_i/S(i) = h_i, in displayed order.
pub fn score_relevance(m: &HazardModel, xs: &[FeatureVector]) -> Result<Vec<f64>, ModelError> {
    forward(m, xs).map(|seq| seq.h)
}

/// Positions (1-based) sorted by descending score; ties keep display order.
pub fn rerank(scores: &[f64]) -> Result<Vec<usize>, ModelError> {
    for &v in scores {
        if !v.is_finite() {
            return Err(ModelError::Domain(format!("non-finite score {v}")));
        }
    }
    let mut idx: Vec<usize> = (1..=scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b - 1].partial_cmp(&scores[a - 1]).unwrap());
    Ok(idx)
}
