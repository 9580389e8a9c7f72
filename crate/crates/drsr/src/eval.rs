//! Ranking-quality metrics: NDCG@k, MAP, and the average-position curve.

use thiserror::Error;

use crate::data::LabeledQuery;
use crate::model::{self, HazardModel, ModelError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Macro-averaged metrics for one run.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub map: f64,
    /// (k, ndcg@k) in ascending k.
    pub ndcg_at: Vec<(usize, f64)>,
    pub n_queries: usize,
}

/// Mean re-ranked position per original position.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionCurve(pub Vec<f64>);

impl PositionCurve {
    /// Sum of absolute differences to another curve of the same length.
    pub fn l1_distance(&self, other: &PositionCurve) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

fn dcg(labels: &[u32], k: usize) -> f64 {
    let mut acc = 0.0;
    for (i, &y) in labels.iter().take(k).enumerate() {
        acc += (2f64.powi(y as i32) - 1.0) / ((i + 2) as f64).log2();
    }
    acc
}

/// NDCG@k with gain 2^y − 1 and log2(i+1) discount.
///
/// All-zero-label lists score 1.0 (the ideal DCG is zero, so any order is
/// ideal).
pub fn ndcg_at_k(ranked_labels: &[u32], k: usize) -> f64 {
    let mut ideal = ranked_labels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg == 0.0 {
        return 1.0;
    }
    dcg(ranked_labels, k) / idcg
}

/// Average precision over a binary relevance sequence.
///
/// Queries without any relevant document score 1.0 (degenerate convention;
/// they are counted in the macro average).
pub fn average_precision(ranked_rels: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (i, &rel) in ranked_rels.iter().enumerate() {
        if rel {
            hits += 1;
            acc += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        1.0
    } else {
        acc / hits as f64
    }
}

/// Mean re-ranked position of the document at each original position.
///
/// Each input pair is (initial order, re-ranked permutation of positions);
/// the permutation lists original positions in their new display order.
pub fn position_curve(sessions: &[(usize, Vec<usize>)]) -> Result<PositionCurve, EvalError> {
    if sessions.is_empty() {
        return Err(EvalError::Domain("no sessions for position curve".into()));
    }
    let n = sessions[0].0;
    let mut sums = vec![0.0f64; n];
    let mut counts = vec![0usize; n];
    for (len, perm) in sessions {
        if perm.len() != *len {
            return Err(EvalError::Domain(format!(
                "re-ranked permutation length {} differs from list length {len}",
                perm.len()
            )));
        }
        for (new_rank, &orig_pos) in perm.iter().enumerate() {
            if orig_pos == 0 || orig_pos > *len {
                return Err(EvalError::Domain(format!("position {orig_pos} out of range")));
            }
            if orig_pos <= n {
                sums[orig_pos - 1] += (new_rank + 1) as f64;
                counts[orig_pos - 1] += 1;
            }
        }
    }
    let curve = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(PositionCurve(curve))
}

/// Score, re-rank, and macro-average metrics over test queries.
///
/// Each query comes with its displayed order from the initial ranker; the
/// model scores that order, the list is re-ranked by score, NDCG uses the
/// graded labels and AP the binarization y >= 1.
pub fn evaluate_run(
    model: &HazardModel,
    test: &[(LabeledQuery, Vec<usize>)],
    ks: &[usize],
) -> Result<MetricReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::Domain("empty test set".into()));
    }
    let mut map_sum = 0.0;
    let mut ndcg_sums = vec![0.0f64; ks.len()];
    for (query, order) in test {
        let labels = ranked_labels_for(model, query, order)?;
        let rels: Vec<bool> = labels.iter().map(|&y| y >= 1).collect();
        map_sum += average_precision(&rels);
        for (slot, &k) in ks.iter().enumerate() {
            ndcg_sums[slot] += ndcg_at_k(&labels, k);
        }
    }
    let n = test.len() as f64;
    Ok(MetricReport {
        map: map_sum / n,
        ndcg_at: ks
            .iter()
            .zip(&ndcg_sums)
            .map(|(&k, &s)| (k, s / n))
            .collect(),
        n_queries: test.len(),
    })
}

/// Labels of a query's displayed list after re-ranking by model score.
pub fn ranked_labels_for(
    model: &HazardModel,
    query: &LabeledQuery,
    order: &[usize],
) -> Result<Vec<u32>, EvalError> {
    let xs: Vec<_> = order
        .iter()
        .map(|&doc| query.docs[doc - 1].features.clone())
        .collect();
    let scores = model::score_relevance(model, &xs)?;
    let perm = model::rerank(&scores)?;
    Ok(perm
        .iter()
        .map(|&pos| query.docs[order[pos - 1] - 1].label)
        .collect())
}
