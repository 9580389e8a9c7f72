//! Synthetic biased click logs from labeled queries.
//!
//! An initial linear ranker orders each query's documents; a user model (PBM
//! or CCM) then draws observations and clicks over that order. Tracking
//! overshoot past the user's true stopping depth populates the untrusted
//! tail, and non-click browses become censored sessions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{truncate_multiclick, DataError, FeatureVector, LabeledQuery, RawSession, SessionLog};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClickModel {
    Pbm,
    Ccm,
}

/// Click-simulation parameters.
///
/// `tau` scales position bias under PBM (`P(o_i) = rho_i^tau`); the gammas
/// are CCM continuation probabilities; `epsilon` is click noise in the
/// relevance-probability map; `overshoot` is the maximum number of extra
/// tracked positions past the true stopping depth.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: ClickModel,
    pub tau: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub epsilon: f64,
    pub y_max: u32,
    pub overshoot: usize,
    pub max_list_len: usize,
    /// Optional per-position observation propensities (position 1 first);
    /// positions beyond the table fall back to 1/i.
    pub rho: Option<Vec<f64>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            model: ClickModel::Ccm,
            tau: 1.0,
            gamma1: 0.5,
            gamma2: 0.10,
            gamma3: 0.04,
            epsilon: 0.1,
            y_max: 4,
            overshoot: 2,
            max_list_len: 10,
            rho: None,
        }
    }
}

impl SimConfig {
    /// Named CCM continuation presets.
    pub fn ccm_preset(name: &str) -> Result<(f64, f64), SimError> {
        match name {
            "navigational" => Ok((0.10, 0.04)),
            "informational" => Ok((0.40, 0.27)),
            other => Err(SimError::Domain(format!("unknown CCM preset `{other}`"))),
        }
    }

    pub fn rho_at(&self, pos: usize) -> f64 {
        match &self.rho {
            Some(table) if pos <= table.len() => table[pos - 1],
            _ => 1.0 / pos as f64,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.tau < 0.0 {
            return Err(SimError::Domain("tau must be >= 0".into()));
        }
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("epsilon", self.epsilon),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::Domain(format!("{name} {v} outside [0,1]")));
            }
        }
        if self.epsilon >= 1.0 {
            return Err(SimError::Domain("epsilon must be < 1".into()));
        }
        Ok(())
    }
}

/// Linear scorer used to build the displayed order.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialRanker {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl InitialRanker {
    pub fn score(&self, x: &FeatureVector) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .zip(x.values())
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }
}

/// Pairwise perceptron on (higher-label, lower-label) document pairs.
pub fn train_initial_ranker(
    sample: &[LabeledQuery],
    epochs: usize,
    seed: u64,
) -> Result<InitialRanker, SimError> {
    let dim = sample
        .first()
        .and_then(|q| q.docs.first())
        .map(|d| d.features.dim())
        .ok_or_else(|| SimError::DegenerateSample("empty ranker sample".into()))?;

    let mut pairs: Vec<(usize, usize, usize)> = Vec::new(); // (query, hi, lo)
    for (qi, q) in sample.iter().enumerate() {
        for i in 0..q.docs.len() {
            for j in 0..q.docs.len() {
                if q.docs[i].label > q.docs[j].label {
                    pairs.push((qi, i, j));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(SimError::DegenerateSample(
            "no document pair with differing labels in the ranker sample".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0.0; dim];
    for _ in 0..epochs {
        pairs.shuffle(&mut rng);
        for &(qi, hi, lo) in &pairs {
            let xh = sample[qi].docs[hi].features.values();
            let xl = sample[qi].docs[lo].features.values();
            let margin: f64 = weights
                .iter()
                .zip(xh.iter().zip(xl))
                .map(|(w, (a, b))| w * (a - b))
                .sum();
            if margin <= 0.0 {
                for (w, (a, b)) in weights.iter_mut().zip(xh.iter().zip(xl)) {
                    *w += a - b;
                }
            }
        }
    }
    Ok(InitialRanker { weights, bias: 0.0 })
}

/// Displayed order for a query: 1-based doc indices by descending score,
/// ties keeping original order, truncated to `max_list_len`.
pub fn rank_initial(ranker: &InitialRanker, query: &LabeledQuery, max_list_len: usize) -> Vec<usize> {
    let scores: Vec<f64> = query.docs.iter().map(|d| ranker.score(&d.features)).collect();
    let mut idx: Vec<usize> = (1..=query.docs.len()).collect();
    idx.sort_by(|&a, &b| scores[b - 1].partial_cmp(&scores[a - 1]).unwrap());
    idx.truncate(max_list_len);
    idx
}

/// ε + (1−ε)·(2^y − 1)/(2^{y_max} − 1).
pub fn relevance_probability(y: u32, cfg: &SimConfig) -> Result<f64, SimError> {
    if y > cfg.y_max {
        return Err(SimError::Domain(format!(
            "grade {y} above y_max {}",
            cfg.y_max
        )));
    }
    let num = 2f64.powi(y as i32) - 1.0;
    let den = 2f64.powi(cfg.y_max as i32) - 1.0;
    Ok(cfg.epsilon + (1.0 - cfg.epsilon) * num / den)
}

/// Raw per-list outcome before truncation into single-click sessions.
#[derive(Debug, Clone)]
pub struct RawOutcome {
    /// Clicked positions, 1-based, ascending.
    pub clicks: Vec<usize>,
    /// Per-position true observation indicators.
    pub observed: Vec<bool>,
    /// Last truly observed position (0 when nothing was observed).
    pub depth: usize,
    /// Tracked browse length including overshoot, clipped to the list.
    pub l: usize,
}

fn tracked_length<R: Rng>(depth: usize, n: usize, cfg: &SimConfig, rng: &mut R) -> usize {
    let extra = if cfg.overshoot > 0 {
        rng.gen_range(0..=cfg.overshoot)
    } else {
        0
    };
    (depth + extra).clamp(1, n)
}

/// One PBM draw: each position observed independently with rho_i^tau.
pub fn draw_pbm<R: Rng>(rel_probs: &[f64], cfg: &SimConfig, rng: &mut R) -> RawOutcome {
    let n = rel_probs.len();
    let mut clicks = Vec::new();
    let mut observed = vec![false; n];
    let mut depth = 0usize;
    for i in 1..=n {
        let p_obs = cfg.rho_at(i).powf(cfg.tau).clamp(0.0, 1.0);
        if rng.gen_bool(p_obs) {
            observed[i - 1] = true;
            depth = i;
            if rng.gen_bool(rel_probs[i - 1]) {
                clicks.push(i);
            }
        }
    }
    let l = tracked_length(depth, n, cfg, rng);
    RawOutcome { clicks, observed, depth, l }
}

/// One CCM draw: sequential browsing with continuation probabilities.
pub fn draw_ccm<R: Rng>(rel_probs: &[f64], cfg: &SimConfig, rng: &mut R) -> RawOutcome {
    let n = rel_probs.len();
    let mut clicks = Vec::new();
    let mut observed = vec![false; n];
    let mut depth = 0usize;
    let mut i = 1usize;
    while i <= n {
        observed[i - 1] = true;
        depth = i;
        let rel = rel_probs[i - 1];
        let clicked = rng.gen_bool(rel);
        if clicked {
            clicks.push(i);
        }
        let cont = if clicked {
            cfg.gamma2 * (1.0 - rel) + cfg.gamma3 * rel
        } else {
            cfg.gamma1
        };
        if !rng.gen_bool(cont) {
            break;
        }
        i += 1;
    }
    let l = tracked_length(depth, n, cfg, rng);
    RawOutcome { clicks, observed, depth, l }
}

pub fn draw_outcome<R: Rng>(rel_probs: &[f64], cfg: &SimConfig, rng: &mut R) -> RawOutcome {
    match cfg.model {
        ClickModel::Pbm => draw_pbm(rel_probs, cfg, rng),
        ClickModel::Ccm => draw_ccm(rel_probs, cfg, rng),
    }
}

/// Closed-form per-position click probabilities for either model.
pub fn analytic_click_rate(rel_probs: &[f64], cfg: &SimConfig) -> Vec<f64> {
    match cfg.model {
        ClickModel::Pbm => rel_probs
            .iter()
            .enumerate()
            .map(|(i, &r)| cfg.rho_at(i + 1).powf(cfg.tau) * r)
            .collect(),
        ClickModel::Ccm => {
            let mut rates = Vec::with_capacity(rel_probs.len());
            let mut q = 1.0f64; // P(position i observed)
            for &r in rel_probs {
                rates.push(q * r);
                q *= (1.0 - r) * cfg.gamma1 + r * (cfg.gamma2 * (1.0 - r) + cfg.gamma3 * r);
            }
            rates
        }
    }
}

/// Simulate one browse of a displayed list, returning the raw multi-click
/// record, its truncation into single-click sessions, and the draw itself.
pub fn simulate_session<R: Rng>(
    query: &LabeledQuery,
    order: &[usize],
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<(RawSession, Vec<SessionLog>, RawOutcome), SimError> {
    let rel_probs: Vec<f64> = order
        .iter()
        .map(|&doc| relevance_probability(query.docs[doc - 1].label, cfg))
        .collect::<Result<_, _>>()?;
    let outcome = draw_outcome(&rel_probs, cfg, rng);
    let raw = RawSession {
        qid: query.qid,
        order: order.to_vec(),
        features: order
            .iter()
            .map(|&doc| query.docs[doc - 1].features.clone())
            .collect(),
        clicks: outcome.clicks.clone(),
        l: outcome.l,
    };
    let segments = truncate_multiclick(&raw)?;
    Ok((raw, segments, outcome))
}

/// Independent RNG stream per (seed, qid) so parallel schedules cannot
/// change the output.
pub fn query_rng(seed: u64, qid: u64) -> ChaCha8Rng {
    let mut s = seed ^ 0x6a09_e667_f3bc_c908;
    s = s.wrapping_mul(0x100_0000_01b3).wrapping_add(qid);
    s ^= s >> 33;
    s = s.wrapping_mul(0xff51_afd7_ed55_8ccd);
    s ^= s >> 33;
    ChaCha8Rng::seed_from_u64(s)
}
