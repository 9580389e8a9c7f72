//! Mini-batch training of the hazard model.
//!
//! Gradients are computed analytically: each loss has a closed-form
//! derivative with respect to the hazard sequence, which is then pushed
//! through the recurrence by reverse-mode accumulation. A central
//! finite-difference oracle over the flattened parameter vector checks every
//! loss kind.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{build_document_sets, truncate_multiclick, FeatureVector, RawSession, SessionLog};
use crate::loss::{
    self, LossConfig, LossMode, PairInstance, PairKind, R1Form,
};
use crate::model::{
    forward_cached, init_model, ForwardCache, HazardModel, HazardSequence, ModelError, Params,
    HAZARD_FLOOR,
};

/// Per-parameter gradient accumulator, shape-congruent with the model.
pub type GradientBuffer = Params;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] loss::LossError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error("numeric error at position {position}: {msg}")]
    Numeric { position: usize, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Training objective: the survival losses, or the raw-click cross-entropy
/// baseline that shares the architecture but ignores censoring.
#[derive(Debug, Clone)]
pub enum Objective {
    Survival(LossConfig),
    ClickBce,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Optional global-norm gradient clip.
    pub grad_clip: Option<f64>,
    pub hidden_dim: usize,
    pub objective: Objective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            grad_clip: Some(5.0),
            hidden_dim: 32,
            objective: Objective::Survival(LossConfig::default()),
        }
    }
}

/// A single differentiable loss term over one feature sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossTarget {
    PointZ { z: usize },
    Click { l: usize },
    NonClick { l: usize },
    L2 { l: usize, clicked: bool },
    PairO0 { a: usize, b: usize },
    PairR1 { a: usize, b: usize, form: R1Form },
    PairR2 { a: usize, b: usize },
    ClickBce { l: usize, z: Option<usize> },
}

/// Evaluate a target's loss on an already-computed hazard sequence.
pub fn target_loss(hs: &HazardSequence, target: &LossTarget) -> Result<f64, TrainError> {
    let v = match *target {
        LossTarget::PointZ { z } => loss::loss_point_z(hs, z)?,
        LossTarget::Click { l } => loss::loss_click(hs, l)?,
        LossTarget::NonClick { l } => loss::loss_nonclick(hs, l)?,
        LossTarget::L2 { l, clicked } => loss::loss_l2(hs, l, clicked)?,
        LossTarget::PairO0 { a, b } => loss::loss_pair_o0(hs, a, b)?,
        LossTarget::PairR1 { a, b, form } => loss::loss_pair_r1(hs, a, b, form)?,
        LossTarget::PairR2 { a, b } => loss::loss_pair_r2(hs, a, b)?,
        LossTarget::ClickBce { l, z } => {
            let mut acc = 0.0;
            for t in 1..=l {
                let h = hs.h[t - 1];
                if z == Some(t) {
                    acc -= h.max(HAZARD_FLOOR).ln();
                } else {
                    acc -= (1.0 - h).max(HAZARD_FLOOR).ln();
                }
            }
            acc
        }
    };
    Ok(v)
}

// d loss / d h_i, closed form per target.
fn grad_wrt_hazards(hs: &HazardSequence, target: &LossTarget) -> Result<Vec<f64>, TrainError> {
    target_loss(hs, target)?; // reuse range validation
    let n = hs.len();
    let mut g = vec![0.0; n];
    match *target {
        LossTarget::PointZ { z } => {
            g[z - 1] = -1.0 / hs.h[z - 1];
            for t in 0..z - 1 {
                g[t] = 1.0 / (1.0 - hs.h[t]);
            }
        }
        LossTarget::NonClick { l } => {
            for t in 0..l - 1 {
                g[t] = 1.0 / (1.0 - hs.h[t]);
            }
        }
        LossTarget::Click { l } => {
            let s = hs.s[l - 1];
            let w = hs.w[l - 1];
            if w > HAZARD_FLOOR {
                for t in 0..l - 1 {
                    g[t] = -s / (w * (1.0 - hs.h[t]));
                }
            } // else the loss sits at its clamp ceiling: zero gradient
        }
        LossTarget::L2 { l, clicked } => {
            let inner = if clicked {
                LossTarget::Click { l }
            } else {
                LossTarget::NonClick { l }
            };
            return grad_wrt_hazards(hs, &inner);
        }
        LossTarget::PairO0 { a, b } => {
            g[b - 1] = -1.0 / hs.h[b - 1];
            for t in a - 1..b - 1 {
                g[t] = 1.0 / (1.0 - hs.h[t]);
            }
        }
        LossTarget::PairR1 { a, b, form } => {
            let mut logp = hs.h[b - 1].max(HAZARD_FLOOR).ln();
            for t in a - 1..b - 1 {
                logp += (1.0 - hs.h[t]).max(HAZARD_FLOOR).ln();
            }
            match form {
                R1Form::Unbounded => {
                    g[b - 1] = 1.0 / hs.h[b - 1];
                    for t in a - 1..b - 1 {
                        g[t] = -1.0 / (1.0 - hs.h[t]);
                    }
                }
                R1Form::Bounded => {
                    let p = logp.exp();
                    if 1.0 - p > HAZARD_FLOOR {
                        let factor = p / (1.0 - p);
                        g[b - 1] = factor / hs.h[b - 1];
                        for t in a - 1..b - 1 {
                            g[t] = -factor / (1.0 - hs.h[t]);
                        }
                    }
                }
            }
        }
        LossTarget::PairR2 { a, b } => {
            for t in a - 1..b - 1 {
                g[t] = 1.0 / (1.0 - hs.h[t]);
            }
        }
        LossTarget::ClickBce { l, z } => {
            for t in 0..l {
                if z == Some(t + 1) {
                    g[t] = -1.0 / hs.h[t];
                } else {
                    g[t] = 1.0 / (1.0 - hs.h[t]);
                }
            }
        }
    }
    Ok(g)
}

// Reverse-mode accumulation through the recurrence given d loss / d h_i.
fn backprop_through_time(
    m: &HazardModel,
    cache: &ForwardCache,
    dh: &[f64],
    grads: &mut GradientBuffer,
) -> Result<(), TrainError> {
    let f = m.input_dim();
    let h_dim = m.hidden_dim();
    let d = f + h_dim;
    let n = cache.steps.len();

    let mut carry_db = vec![0.0; h_dim];
    let mut carry_dc = vec![0.0; h_dim];

    for t in (0..n).rev() {
        let step = &cache.steps[t];
        // Hazard head: h = sigmoid(w·b + c), clamped.
        let du = if step.saturated {
            0.0
        } else {
            dh[t] * step.hazard * (1.0 - step.hazard)
        };
        if !du.is_finite() {
            return Err(TrainError::Numeric {
                position: t + 1,
                msg: "non-finite head gradient".into(),
            });
        }
        {
            let head_w = grads.block_mut(8);
            for r in 0..h_dim {
                head_w[r] += du * step.hidden[r];
            }
            grads.block_mut(9)[0] += du;
        }
        let head_weights = m.params.head_weights();
        let db: Vec<f64> = (0..h_dim)
            .map(|r| carry_db[r] + du * head_weights[r])
            .collect();

        let mut dcell = vec![0.0; h_dim];
        let mut d_out = vec![0.0; h_dim];
        for r in 0..h_dim {
            d_out[r] = db[r] * step.cell_tanh[r];
            dcell[r] = carry_dc[r] + db[r] * step.gate_o[r] * (1.0 - step.cell_tanh[r].powi(2));
        }
        let c_prev: &[f64] = if t > 0 { &cache.steps[t - 1].cell } else { &[] };
        let mut d_pre = [
            vec![0.0; h_dim], // input gate
            vec![0.0; h_dim], // forget gate
            vec![0.0; h_dim], // output gate
            vec![0.0; h_dim], // candidate
        ];
        for r in 0..h_dim {
            let (i_g, f_g, o_g, g_g) = (
                step.gate_i[r],
                step.gate_f[r],
                step.gate_o[r],
                step.gate_g[r],
            );
            let cp = if t > 0 { c_prev[r] } else { 0.0 };
            d_pre[0][r] = dcell[r] * g_g * i_g * (1.0 - i_g);
            d_pre[1][r] = dcell[r] * cp * f_g * (1.0 - f_g);
            d_pre[2][r] = d_out[r] * o_g * (1.0 - o_g);
            d_pre[3][r] = dcell[r] * i_g * (1.0 - g_g * g_g);
        }

        let mut d_input = vec![0.0; d];
        for (gate, dp) in d_pre.iter().enumerate() {
            let w = m.params.gate_weights(gate);
            {
                let gw = grads.block_mut(gate);
                for r in 0..h_dim {
                    let row = &mut gw[r * d..(r + 1) * d];
                    let dpr = dp[r];
                    for (slot, iv) in row.iter_mut().zip(&step.input) {
                        *slot += dpr * iv;
                    }
                }
            }
            {
                let gb = grads.block_mut(4 + gate);
                for r in 0..h_dim {
                    gb[r] += dp[r];
                }
            }
            for r in 0..h_dim {
                let row = &w[r * d..(r + 1) * d];
                let dpr = dp[r];
                for (di, wv) in d_input.iter_mut().zip(row) {
                    *di += dpr * wv;
                }
            }
        }

        for r in 0..h_dim {
            carry_db[r] = d_input[f + r];
            carry_dc[r] = dcell[r] * step.gate_f[r];
        }
    }
    Ok(())
}

/// Loss value and analytic parameter gradient for one target.
pub fn backward(
    m: &HazardModel,
    xs: &[FeatureVector],
    target: &LossTarget,
) -> Result<(f64, GradientBuffer), TrainError> {
    let (hs, cache) = forward_cached(m, xs)?;
    let value = target_loss(&hs, target)?;
    let dh = grad_wrt_hazards(&hs, target)?;
    let mut grads = Params::zeros(m.input_dim(), m.hidden_dim());
    backprop_through_time(m, &cache, &dh, &mut grads)?;
    Ok((value, grads))
}

/// Central-difference gradient oracle over the flattened parameter vector.
pub fn finite_diff_gradient(
    m: &HazardModel,
    xs: &[FeatureVector],
    target: &LossTarget,
    step: f64,
) -> Result<GradientBuffer, TrainError> {
    assert!(step > 0.0);
    let mut probe = m.clone();
    let mut grads = Params::zeros(m.input_dim(), m.hidden_dim());
    for k in 0..probe.params.data.len() {
        let orig = probe.params.data[k];
        probe.params.data[k] = orig + step;
        let (hs, _) = forward_cached(&probe, xs)?;
        let plus = target_loss(&hs, target)?;
        probe.params.data[k] = orig - step;
        let (hs, _) = forward_cached(&probe, xs)?;
        let minus = target_loss(&hs, target)?;
        probe.params.data[k] = orig;
        grads.data[k] = (plus - minus) / (2.0 * step);
    }
    Ok(grads)
}

/// Adam moment buffers (unused for plain SGD).
#[derive(Debug, Clone)]
pub struct OptState {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub step: u64,
}

impl OptState {
    pub fn new(n: usize) -> Self {
        OptState { m1: vec![0.0; n], m2: vec![0.0; n], step: 0 }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Apply one optimizer update in place.
pub fn optimizer_step(
    model: &mut HazardModel,
    grads: &GradientBuffer,
    state: &mut OptState,
    cfg: &TrainConfig,
) -> Result<(), TrainError> {
    let mut scale = 1.0;
    let norm_sq: f64 = grads.data.iter().map(|g| g * g).sum();
    if !norm_sq.is_finite() {
        return Err(TrainError::Numeric { position: 0, msg: "non-finite gradient".into() });
    }
    if let Some(clip) = cfg.grad_clip {
        let norm = norm_sq.sqrt();
        if norm > clip {
            scale = clip / norm;
        }
    }
    match cfg.optimizer {
        OptimizerKind::Sgd => {
            for (p, g) in model.params.data.iter_mut().zip(&grads.data) {
                *p -= cfg.learning_rate * scale * g;
            }
        }
        OptimizerKind::Adam => {
            state.step += 1;
            let t = state.step as i32;
            let bc1 = 1.0 - ADAM_BETA1.powi(t);
            let bc2 = 1.0 - ADAM_BETA2.powi(t);
            for k in 0..model.params.data.len() {
                let g = grads.data[k] * scale;
                state.m1[k] = ADAM_BETA1 * state.m1[k] + (1.0 - ADAM_BETA1) * g;
                state.m2[k] = ADAM_BETA2 * state.m2[k] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = state.m1[k] / bc1;
                let v_hat = state.m2[k] / bc2;
                model.params.data[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
    Ok(())
}

fn pair_target(p: &PairInstance, cfg: &LossConfig) -> LossTarget {
    match p.kind {
        PairKind::O0 => LossTarget::PairO0 { a: p.a, b: p.b },
        PairKind::R1 => LossTarget::PairR1 { a: p.a, b: p.b, form: cfg.r1_form },
        PairKind::R2 => LossTarget::PairR2 { a: p.a, b: p.b },
    }
}

/// Train a fresh model over a click log of raw browsing records.
///
/// Survival modes first truncate multi-click records into single-click
/// sessions and learn from the censored segments. The click-only baseline
/// instead takes each record verbatim: per-position cross entropy on the
/// full displayed list, with no notion of browse length or censoring.
///
/// Returns the final model and the per-epoch mean objective. Fully
/// deterministic given the config seed: shuffling, pair sampling, and
/// gradient reduction all follow a fixed order.
pub fn train(log: &[RawSession], cfg: &TrainConfig) -> Result<(HazardModel, Vec<f64>), TrainError> {
    if log.is_empty() {
        return Err(TrainError::Config("empty click log".into()));
    }
    match &cfg.objective {
        Objective::Survival(_) => {
            let mut sessions = Vec::new();
            for raw in log {
                sessions.extend(truncate_multiclick(raw)?);
            }
            train_sessions(&sessions, cfg)
        }
        Objective::ClickBce => train_impressions(log, cfg),
    }
}

/// Train on already-truncated single-click sessions.
///
/// This is the survival-mode workhorse behind [`train`]; with the click-only
/// objective each session's own positions are the cross-entropy targets,
/// which some unit oracles rely on.
pub fn train_sessions(
    sessions: &[SessionLog],
    cfg: &TrainConfig,
) -> Result<(HazardModel, Vec<f64>), TrainError> {
    if sessions.is_empty() {
        return Err(TrainError::Config("empty click log".into()));
    }
    let input_dim = sessions[0].features[0].dim();
    match &cfg.objective {
        Objective::Survival(lc) => match lc.mode {
            LossMode::Point => {
                if !sessions.iter().any(|s| s.clicked()) {
                    return Err(TrainError::Config(
                        "point-wise mode requires at least one click session".into(),
                    ));
                }
            }
            LossMode::Pair => {
                let any_pair = sessions.iter().any(|s| {
                    let sets = build_document_sets(s, lc.kappa);
                    let o0 = !sets.positive.is_empty()
                        && sets.negative.iter().any(|&i| i < sets.positive[0]);
                    let r2 = sets
                        .negative
                        .iter()
                        .any(|&i| sets.untrusted.iter().any(|&k| i < k));
                    o0 || r2
                });
                if !any_pair {
                    return Err(TrainError::Config(
                        "pair-wise mode requires at least one valid pair".into(),
                    ));
                }
            }
        },
        Objective::ClickBce => {}
    }

    let mut model = init_model(input_dim, cfg.hidden_dim, cfg.seed)?;
    let mut state = OptState::new(model.params.data.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..sessions.len()).collect();

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SessionLog> = chunk.iter().map(|&i| &sessions[i]).collect();
            let (loss_value, grads) = batch_backward(&model, &batch, cfg, &mut rng)?;
            optimizer_step(&mut model, &grads, &mut state, cfg)?;
            epoch_loss += loss_value;
            batches += 1;
        }
        history.push(epoch_loss / batches as f64);
    }
    Ok((model, history))
}

// Click-only baseline over raw records: every displayed position is a
// labeled example, so the learned score absorbs whatever position bias the
// click model imposed.
fn train_impressions(
    log: &[RawSession],
    cfg: &TrainConfig,
) -> Result<(HazardModel, Vec<f64>), TrainError> {
    let input_dim = log[0].features[0].dim();
    let mut model = init_model(input_dim, cfg.hidden_dim, cfg.seed)?;
    let mut state = OptState::new(model.params.data.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..log.len()).collect();

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&RawSession> = chunk.iter().map(|&i| &log[i]).collect();
            let (loss_value, grads) = batch_backward_bce(&model, &batch)?;
            optimizer_step(&mut model, &grads, &mut state, cfg)?;
            epoch_loss += loss_value;
            batches += 1;
        }
        history.push(epoch_loss / batches as f64);
    }
    Ok((model, history))
}

// One raw-record batch: mean over records of the summed per-position binary
// cross entropy against the click indicators.
fn batch_backward_bce(
    model: &HazardModel,
    batch: &[&RawSession],
) -> Result<(f64, GradientBuffer), TrainError> {
    let mut grads = Params::zeros(model.input_dim(), model.hidden_dim());
    let weight = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for s in batch {
        let (hs, cache) = forward_cached(model, &s.features)?;
        let mut dh = vec![0.0; hs.len()];
        for t in 0..hs.len() {
            let h = hs.h[t];
            if s.clicks.binary_search(&(t + 1)).is_ok() {
                total -= weight * h.max(HAZARD_FLOOR).ln();
                dh[t] = -weight / h;
            } else {
                total -= weight * (1.0 - h).max(HAZARD_FLOOR).ln();
                dh[t] = weight / (1.0 - h);
            }
        }
        backprop_through_time(model, &cache, &dh, &mut grads)?;
    }
    Ok((total, grads))
}

// One batch: weighted per-family means, single bptt per forward pass.
fn batch_backward<R: Rng>(
    model: &HazardModel,
    batch: &[&SessionLog],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(f64, GradientBuffer), TrainError> {
    let mut grads = Params::zeros(model.input_dim(), model.hidden_dim());

    match &cfg.objective {
        Objective::ClickBce => {
            let weight = 1.0 / batch.len() as f64;
            let mut total = 0.0;
            for s in batch {
                let (hs, cache) = forward_cached(model, &s.features)?;
                let target = LossTarget::ClickBce { l: s.l, z: s.z };
                total += target_loss(&hs, &target)? * weight;
                let mut dh = grad_wrt_hazards(&hs, &target)?;
                for v in dh.iter_mut() {
                    *v *= weight;
                }
                backprop_through_time(model, &cache, &dh, &mut grads)?;
            }
            Ok((total, grads))
        }
        Objective::Survival(lc) => {
            // Pair instances are sampled first so family counts are known
            // before any gradient is taken.
            let mut pairs: Vec<PairInstance> = Vec::new();
            if lc.mode == LossMode::Pair {
                for s in batch {
                    let sets = build_document_sets(s, lc.kappa);
                    pairs.extend(loss::sample_pairs(&sets, s, lc, rng));
                }
            }
            let n_l2 = batch.len();
            let n_point = batch.iter().filter(|s| s.clicked()).count();
            let mut kind_counts = [0usize; 3];
            for p in &pairs {
                kind_counts[match p.kind {
                    PairKind::O0 => 0,
                    PairKind::R1 => 1,
                    PairKind::R2 => 2,
                }] += 1;
            }

            let l2_weight = (1.0 - lc.alpha) / n_l2 as f64;
            let mut l1_value = 0.0;
            let mut l2_value = 0.0;

            for s in batch {
                let (hs, cache) = forward_cached(model, &s.features)?;
                let mut dh = vec![0.0; hs.len()];
                let l2_target = LossTarget::L2 { l: s.l, clicked: s.clicked() };
                l2_value += target_loss(&hs, &l2_target)? / n_l2 as f64;
                for (slot, v) in dh.iter_mut().zip(grad_wrt_hazards(&hs, &l2_target)?) {
                    *slot += l2_weight * v;
                }
                if lc.mode == LossMode::Point && s.clicked() {
                    let t = LossTarget::PointZ { z: s.z.unwrap() };
                    l1_value += target_loss(&hs, &t)? / n_point as f64;
                    let w = lc.alpha / n_point as f64;
                    for (slot, v) in dh.iter_mut().zip(grad_wrt_hazards(&hs, &t)?) {
                        *slot += w * v;
                    }
                }
                backprop_through_time(model, &cache, &dh, &mut grads)?;
            }

            for p in &pairs {
                let slot = match p.kind {
                    PairKind::O0 => 0,
                    PairKind::R1 => 1,
                    PairKind::R2 => 2,
                };
                let count = kind_counts[slot] as f64;
                let (hs, cache) = forward_cached(model, &p.permuted_features)?;
                let target = pair_target(p, lc);
                l1_value += target_loss(&hs, &target)? / count;
                let w = lc.alpha / count;
                let mut dh = grad_wrt_hazards(&hs, &target)?;
                for v in dh.iter_mut() {
                    *v *= w;
                }
                backprop_through_time(model, &cache, &dh, &mut grads)?;
            }

            Ok((lc.alpha * l1_value + (1.0 - lc.alpha) * l2_value, grads))
        }
    }
}
