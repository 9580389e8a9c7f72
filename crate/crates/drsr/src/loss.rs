//! Survival losses over hazard sequences.
//!
//! Point-wise: the click-position likelihood −log p_z together with the
//! click-status cross entropy over W(l) (which splits exactly into a click
//! and a non-click part). Pair-wise: three conditional losses built from
//! permuted document sequences, pairing trusted positives, trusted negatives,
//! and untrusted tail positions.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::data::{DocumentSets, FeatureVector, SessionLog};
use crate::model::{HazardSequence, HAZARD_FLOOR};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Loss family selector for the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    Point,
    Pair,
}

/// Shape of the reversed-pair loss.
///
/// `Unbounded` keeps the raw positive log-likelihood log P, which has no
/// lower bound in isolation; `Bounded` uses −log(1−P) instead, sharing the
/// gradient direction while staying bounded. `Unbounded` is the default: its
/// non-saturating gradient trains markedly faster at small learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum R1Form {
    #[default]
    Unbounded,
    Bounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub mode: LossMode,
    /// Mixing weight between the L1 family and the click-status family.
    pub alpha: f64,
    /// Pairs sampled per kind per session.
    pub pairs_per_session: usize,
    pub r1_form: R1Form,
    /// Untrusted tail fraction for censored sessions.
    pub kappa: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            mode: LossMode::Point,
            alpha: 0.5,
            pairs_per_session: 4,
            r1_form: R1Form::default(),
            kappa: 0.3,
        }
    }
}

/// Kind of permuted-pair instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    /// Original order: trusted negative before the click.
    O0,
    /// Click swapped forward over a trusted negative.
    R1,
    /// Untrusted position swapped forward over a trusted negative.
    R2,
}

/// One permuted-pair training instance.
///
/// `a < b` are 1-based anchor positions in the session; `permuted_features`
/// is the session's feature sequence after the kind's exchange operation
/// (identity for `O0`, swap of positions a and b for `R1`/`R2`).
#[derive(Debug, Clone)]
pub struct PairInstance {
    pub kind: PairKind,
    pub base: SessionLog,
    pub a: usize,
    pub b: usize,
    pub permuted_features: Vec<FeatureVector>,
}

fn ln_floor(x: f64) -> f64 {
    x.max(HAZARD_FLOOR).ln()
}

fn check_range(pos: usize, n: usize, what: &str) -> Result<(), LossError> {
    if pos == 0 || pos > n {
        return Err(LossError::Domain(format!(
            "{what} {pos} outside 1..={n}"
        )));
    }
    Ok(())
}

/// −log p_z over the clicked sessions (click-position likelihood).
pub fn loss_point_z(hs: &HazardSequence, z: usize) -> Result<f64, LossError> {
    check_range(z, hs.len(), "click position")?;
    let mut acc = -ln_floor(hs.h[z - 1]);
    for &h in &hs.h[..z - 1] {
        acc -= ln_floor(1.0 - h);
    }
    Ok(acc)
}

/// −log W(l): push the unobserve mass before the browse horizon up on click
/// sessions.
///
/// `l` may be `n + 1`: W(n+1) covers a click anywhere in the list, which is
/// what a session whose click sits exactly at the horizon needs.
pub fn loss_click(hs: &HazardSequence, l: usize) -> Result<f64, LossError> {
    check_range(l, hs.len() + 1, "browse length")?;
    Ok(-ln_floor(hs.w[l - 1]))
}

/// −log S(l): censored sessions claim the click lies beyond the horizon.
pub fn loss_nonclick(hs: &HazardSequence, l: usize) -> Result<f64, LossError> {
    check_range(l, hs.len() + 1, "browse length")?;
    let mut acc = 0.0;
    for &h in &hs.h[..l - 1] {
        acc -= ln_floor(1.0 - h);
    }
    Ok(acc)
}

/// Click-status cross entropy: −[ω·log W(l) + (1−ω)·log(1−W(l))].
///
/// Identical to [`loss_click`] when clicked and [`loss_nonclick`] otherwise.
pub fn loss_l2(hs: &HazardSequence, l: usize, clicked: bool) -> Result<f64, LossError> {
    if clicked {
        loss_click(hs, l)
    } else {
        loss_nonclick(hs, l)
    }
}

/// −log P(z=j | z≥i) on the original order: the click at j conditioned on
/// having browsed to i.
pub fn loss_pair_o0(hs: &HazardSequence, i: usize, j: usize) -> Result<f64, LossError> {
    check_range(j, hs.len(), "pair position")?;
    if i >= j {
        return Err(LossError::Domain(format!("pair anchors must satisfy i < j, got ({i}, {j})")));
    }
    check_range(i, hs.len(), "pair position")?;
    let mut acc = -ln_floor(hs.h[j - 1]);
    for &h in &hs.h[i - 1..j - 1] {
        acc -= ln_floor(1.0 - h);
    }
    Ok(acc)
}

fn log_cond_click(hs: &HazardSequence, a: usize, b: usize) -> f64 {
    // log P(z=b | z>=a) on the given (already permuted) sequence.
    let mut acc = ln_floor(hs.h[b - 1]);
    for &h in &hs.h[a - 1..b - 1] {
        acc += ln_floor(1.0 - h);
    }
    acc
}

/// Reversed-pair loss on the swapped sequence: the click now sits at `a`, a
/// trusted negative at `b`; the conditional click probability at `b` is
/// driven down.
pub fn loss_pair_r1(
    hs: &HazardSequence,
    a: usize,
    b: usize,
    form: R1Form,
) -> Result<f64, LossError> {
    check_range(b, hs.len(), "pair position")?;
    if a >= b {
        return Err(LossError::Domain(format!("pair anchors must satisfy a < b, got ({a}, {b})")));
    }
    check_range(a, hs.len(), "pair position")?;
    let logp = log_cond_click(hs, a, b);
    match form {
        R1Form::Unbounded => Ok(logp),
        R1Form::Bounded => Ok(-ln_floor(1.0 - logp.exp())),
    }
}

/// −log[S(b)/S(a)] on the swapped sequence: keep the untrusted document (now
/// at `a`) browsable past `b`.
pub fn loss_pair_r2(hs: &HazardSequence, a: usize, b: usize) -> Result<f64, LossError> {
    check_range(b, hs.len(), "pair position")?;
    if a >= b {
        return Err(LossError::Domain(format!("pair anchors must satisfy a < b, got ({a}, {b})")));
    }
    check_range(a, hs.len(), "pair position")?;
    let mut acc = 0.0;
    for &h in &hs.h[a - 1..b - 1] {
        acc -= ln_floor(1.0 - h);
    }
    Ok(acc)
}

fn swap_features(features: &[FeatureVector], a: usize, b: usize) -> Vec<FeatureVector> {
    let mut out = features.to_vec();
    out.swap(a - 1, b - 1);
    out
}

/// Sample permuted-pair instances from a session's document sets.
///
/// O0 and R1 pairs combine a trusted negative before the click with the
/// click itself; R2 pairs combine a trusted negative with a later untrusted
/// position. Up to `pairs_per_session` of each kind, drawn uniformly without
/// replacement; empty source sets yield no pairs of that kind.
pub fn sample_pairs<R: Rng>(
    sets: &DocumentSets,
    session: &SessionLog,
    cfg: &LossConfig,
    rng: &mut R,
) -> Vec<PairInstance> {
    let mut out = Vec::new();

    let mut o0_candidates: Vec<(usize, usize)> = Vec::new();
    if let Some(&j) = sets.positive.first() {
        for &i in &sets.negative {
            if i < j {
                o0_candidates.push((i, j));
            }
        }
    }
    let mut r2_candidates: Vec<(usize, usize)> = Vec::new();
    for &i in &sets.negative {
        for &k in &sets.untrusted {
            if i < k {
                r2_candidates.push((i, k));
            }
        }
    }

    let draw = |cands: &mut Vec<(usize, usize)>, rng: &mut R| -> Vec<(usize, usize)> {
        cands.partial_shuffle(rng, cfg.pairs_per_session)
            .0
            .to_vec()
    };

    for (a, b) in draw(&mut o0_candidates.clone(), rng) {
        out.push(PairInstance {
            kind: PairKind::O0,
            base: session.clone(),
            a,
            b,
            permuted_features: session.features.clone(),
        });
    }
    for (a, b) in draw(&mut o0_candidates, rng) {
        out.push(PairInstance {
            kind: PairKind::R1,
            base: session.clone(),
            a,
            b,
            permuted_features: swap_features(&session.features, a, b),
        });
    }
    for (a, b) in draw(&mut r2_candidates, rng) {
        out.push(PairInstance {
            kind: PairKind::R2,
            base: session.clone(),
            a,
            b,
            permuted_features: swap_features(&session.features, a, b),
        });
    }
    out
}

/// Per-family means of a batch's losses, before mixing.
#[derive(Debug, Clone, Default)]
pub struct BatchLosses {
    pub l1: f64,
    pub l2: f64,
}

/// Items entering the combined objective: whole sessions plus, in pair mode,
/// their sampled pair instances.
pub enum BatchItem {
    Session { hs: HazardSequence, z: Option<usize>, l: usize },
    Pair { hs: HazardSequence, kind: PairKind, a: usize, b: usize },
}

/// α·L1 + (1−α)·L2 over an evaluated batch.
///
/// Each loss family is averaged over its own members before mixing, so α
/// trades off families rather than sample counts. In point mode L1 collects
/// click-position losses from clicked sessions; in pair mode it is the sum
/// of the three per-kind means over the batch's pair items. L2 is the mean
/// click-status cross entropy over all sessions.
pub fn combined_objective(batch: &[BatchItem], cfg: &LossConfig) -> Result<f64, LossError> {
    let parts = combined_parts(batch, cfg)?;
    Ok(cfg.alpha * parts.l1 + (1.0 - cfg.alpha) * parts.l2)
}

/// The two mixed families, exposed separately for reporting.
pub fn combined_parts(batch: &[BatchItem], cfg: &LossConfig) -> Result<BatchLosses, LossError> {
    if batch.is_empty() {
        return Err(LossError::Domain("empty batch".into()));
    }
    let mut l2_sum = 0.0;
    let mut l2_n = 0usize;
    let mut point_sum = 0.0;
    let mut point_n = 0usize;
    let mut pair_sum = [0.0f64; 3];
    let mut pair_n = [0usize; 3];

    for item in batch {
        match item {
            BatchItem::Session { hs, z, l } => {
                l2_sum += loss_l2(hs, *l, z.is_some())?;
                l2_n += 1;
                if cfg.mode == LossMode::Point {
                    if let Some(z) = z {
                        point_sum += loss_point_z(hs, *z)?;
                        point_n += 1;
                    }
                }
            }
            BatchItem::Pair { hs, kind, a, b } => {
                let (slot, v) = match kind {
                    PairKind::O0 => (0, loss_pair_o0(hs, *a, *b)?),
                    PairKind::R1 => (1, loss_pair_r1(hs, *a, *b, cfg.r1_form)?),
                    PairKind::R2 => (2, loss_pair_r2(hs, *a, *b)?),
                };
                pair_sum[slot] += v;
                pair_n[slot] += 1;
            }
        }
    }

    let l1 = match cfg.mode {
        LossMode::Point => {
            if point_n > 0 {
                point_sum / point_n as f64
            } else {
                0.0
            }
        }
        LossMode::Pair => {
            let mut acc = 0.0;
            for k in 0..3 {
                if pair_n[k] > 0 {
                    acc += pair_sum[k] / pair_n[k] as f64;
                }
            }
            acc
        }
    };
    let l2 = if l2_n > 0 { l2_sum / l2_n as f64 } else { 0.0 };
    Ok(BatchLosses { l1, l2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_document_sets;
    use crate::model::survival_curves;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(h: &[f64]) -> HazardSequence {
        let (s, w, p) = survival_curves(h).unwrap();
        HazardSequence { h: h.to_vec(), s, w, p, hidden: Vec::new() }
    }

    fn rand_h(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(0.05..0.95)).collect()
    }

    #[test]
    fn point_z_hand_values() {
        let hs = seq(&[0.5, 0.5]);
        let v = loss_point_z(&hs, 2).unwrap();
        assert!((v - 1.3862943611198906).abs() < 1e-12);
        assert!(loss_point_z(&seq(&[1.0]), 1).unwrap().abs() < 1e-6);
        assert!(loss_point_z(&hs, 3).is_err());
        assert!(loss_point_z(&hs, 0).is_err());
    }

    #[test]
    fn point_z_equals_neg_log_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let h = rand_h(&mut rng, 6);
            let hs = seq(&h);
            for z in 1..=6 {
                let direct = loss_point_z(&hs, z).unwrap();
                assert!((direct - (-hs.p[z - 1].ln())).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn click_loss_values() {
        let hs = seq(&[0.5, 0.5]);
        assert!((loss_click(&hs, 2).unwrap() - 0.6931471805599453).abs() < 1e-12);
        // W(1)=0: the clamp keeps the loss finite at its ceiling.
        let ceiling = loss_click(&hs, 1).unwrap();
        assert!(ceiling.is_finite() && (ceiling - (-(HAZARD_FLOOR.ln()))).abs() < 1e-9);
        // Larger h_1 explains the click better.
        assert!(loss_click(&seq(&[0.9, 0.5]), 2).unwrap() < loss_click(&seq(&[0.5, 0.5]), 2).unwrap());
    }

    #[test]
    fn nonclick_loss_values() {
        let hs = seq(&[0.5, 0.5]);
        assert!((loss_nonclick(&hs, 2).unwrap() - 0.6931471805599453).abs() < 1e-12);
        assert_eq!(loss_nonclick(&hs, 1).unwrap(), 0.0);
        assert!(loss_nonclick(&seq(&[1e-9, 1e-9]), 2).unwrap() < 1e-6);
    }

    #[test]
    fn l2_equals_split_losses() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.gen_range(1..10);
            let h = rand_h(&mut rng, n);
            let hs = seq(&h);
            let l = rng.gen_range(1..=n);
            assert!((loss_l2(&hs, l, true).unwrap() - loss_click(&hs, l).unwrap()).abs() < 1e-12);
            assert!(
                (loss_l2(&hs, l, false).unwrap() - loss_nonclick(&hs, l).unwrap()).abs() < 1e-12
            );
        }
    }

    #[test]
    fn pair_o0_values() {
        let hs = seq(&[0.5, 0.5]);
        assert!((loss_pair_o0(&hs, 1, 2).unwrap() - 1.3862943611198906).abs() < 1e-12);
        // Conditioning on position 1 is conditioning on certainty.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let h = rand_h(&mut rng, 5);
            let hs = seq(&h);
            for j in 2..=5 {
                assert_eq!(
                    loss_pair_o0(&hs, 1, j).unwrap(),
                    loss_point_z(&hs, j).unwrap()
                );
                // Identity against the survival curves.
                let direct = -(hs.p[j - 1] / hs.s[0]).ln();
                assert!((loss_pair_o0(&hs, 1, j).unwrap() - direct).abs() < 1e-12);
            }
            let via_curves = -(hs.p[3] / hs.s[1]).ln();
            assert!((loss_pair_o0(&hs, 2, 4).unwrap() - via_curves).abs() < 1e-12);
        }
        assert!(loss_pair_o0(&hs, 2, 2).is_err());
    }

    #[test]
    fn pair_r1_forms() {
        // Force P(z=b | z>=a) = 0.5 with h = [_, 0.5] and a=b-1... use
        // h=[0.9, 0.5]: P(z=2|z>=2) = h_2 = 0.5.
        let hs = seq(&[0.9, 0.5]);
        let raw = loss_pair_r1(&hs, 1, 2, R1Form::Unbounded).unwrap();
        let bounded = loss_pair_r1(&hs, 1, 2, R1Form::Bounded).unwrap();
        // P(z=2|z>=1) = 0.1*0.5 = 0.05 here; use a direct construction instead.
        let p = (0.1f64 * 0.5).ln();
        assert!((raw - p).abs() < 1e-12);
        assert!((bounded - (-(1.0f64 - 0.05).ln())).abs() < 1e-12);

        // Both forms decrease as P decreases.
        let hi = seq(&[0.5, 0.5]);
        let lo = seq(&[0.1, 0.1]);
        for form in [R1Form::Unbounded, R1Form::Bounded] {
            assert!(
                loss_pair_r1(&lo, 1, 2, form).unwrap() < loss_pair_r1(&hi, 1, 2, form).unwrap()
            );
        }
        // P at the clamp floor: bounded form ~ 0.
        let tiny = seq(&[1e-7, 1e-7]);
        assert!(loss_pair_r1(&tiny, 1, 2, R1Form::Bounded).unwrap() < 1e-6);
        assert!(loss_pair_r1(&hs, 2, 2, R1Form::Bounded).is_err());
    }

    #[test]
    fn pair_r2_values() {
        let hs = seq(&[0.5, 0.5, 0.5]);
        assert!((loss_pair_r2(&hs, 1, 3).unwrap() - 1.3862943611198906).abs() < 1e-12);
        assert_eq!(loss_pair_r2(&seq(&[0.0, 0.5]), 1, 2).unwrap(), 0.0);
        // a=1 reduces to -ln S(b).
        assert!((loss_pair_r2(&hs, 1, 3).unwrap() - (-hs.s[2].ln())).abs() < 1e-12);
        assert!(loss_pair_r2(&hs, 3, 3).is_err());
    }

    #[test]
    fn losses_finite_on_clamped_sequences() {
        let extremes = seq(&[HAZARD_FLOOR, 1.0 - HAZARD_FLOOR, HAZARD_FLOOR]);
        for z in 1..=3 {
            assert!(loss_point_z(&extremes, z).unwrap().is_finite());
            assert!(loss_click(&extremes, z).unwrap().is_finite());
            assert!(loss_nonclick(&extremes, z).unwrap().is_finite());
        }
        assert!(loss_pair_o0(&extremes, 1, 3).unwrap().is_finite());
        assert!(loss_pair_r1(&extremes, 1, 3, R1Form::Unbounded).unwrap().is_finite());
        assert!(loss_pair_r1(&extremes, 1, 3, R1Form::Bounded).unwrap().is_finite());
        assert!(loss_pair_r2(&extremes, 1, 3).unwrap().is_finite());
    }

    fn session(z: Option<usize>, l: usize) -> SessionLog {
        SessionLog {
            qid: 1,
            order: (1..=l).collect(),
            features: (0..l).map(|i| FeatureVector(vec![i as f64])).collect(),
            z,
            l,
        }
    }

    #[test]
    fn sample_pairs_enumerates_candidates() {
        let s = session(Some(3), 5);
        let sets = build_document_sets(&s, 0.3);
        let cfg = LossConfig { pairs_per_session: 100, ..LossConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs = sample_pairs(&sets, &s, &cfg, &mut rng);
        let mut o0: Vec<(usize, usize)> = pairs
            .iter()
            .filter(|p| p.kind == PairKind::O0)
            .map(|p| (p.a, p.b))
            .collect();
        o0.sort_unstable();
        assert_eq!(o0, vec![(1, 3), (2, 3)]);
        let mut r2: Vec<(usize, usize)> = pairs
            .iter()
            .filter(|p| p.kind == PairKind::R2)
            .map(|p| (p.a, p.b))
            .collect();
        r2.sort_unstable();
        assert_eq!(r2, vec![(1, 4), (1, 5), (2, 4), (2, 5)]);
    }

    #[test]
    fn sample_pairs_censored_has_no_click_pairs() {
        let s = session(None, 5);
        let sets = build_document_sets(&s, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs = sample_pairs(&sets, &s, &LossConfig::default(), &mut rng);
        assert!(pairs.iter().all(|p| p.kind == PairKind::R2));
    }

    #[test]
    fn r1_swap_semantics() {
        let s = session(Some(3), 5);
        let sets = build_document_sets(&s, 0.3);
        let cfg = LossConfig { pairs_per_session: 100, ..LossConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pairs = sample_pairs(&sets, &s, &cfg, &mut rng);
        let r1 = pairs
            .iter()
            .find(|p| p.kind == PairKind::R1 && p.a == 1 && p.b == 3)
            .unwrap();
        assert_eq!(r1.permuted_features[0], s.features[2]);
        assert_eq!(r1.permuted_features[2], s.features[0]);
        assert_eq!(r1.permuted_features[1], s.features[1]);
    }

    #[test]
    fn sample_pairs_is_deterministic_and_valid() {
        let s = session(Some(4), 8);
        let sets = build_document_sets(&s, 0.3);
        let cfg = LossConfig::default();
        let a = sample_pairs(&sets, &s, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_pairs(&sets, &s, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.kind, x.a, x.b), (y.kind, y.a, y.b));
            assert!(1 <= x.a && x.a < x.b && x.b <= s.l);
            if x.kind == PairKind::O0 {
                assert_eq!(x.permuted_features, s.features);
            }
        }
    }

    #[test]
    fn combined_objective_modes() {
        let hs = seq(&[0.5, 0.5]);
        let batch = vec![BatchItem::Session { hs: hs.clone(), z: Some(2), l: 2 }];
        let point = |alpha| LossConfig { alpha, ..LossConfig::default() };
        // alpha=1: the L1 family alone; alpha=0: mean l2, here -ln W(2).
        assert!((combined_objective(&batch, &point(1.0)).unwrap() - 1.3862943611198906).abs() < 1e-12);
        assert!((combined_objective(&batch, &point(0.0)).unwrap() - 0.6931471805599453).abs() < 1e-12);
        let mixed = combined_objective(&batch, &point(0.5)).unwrap();
        assert!((mixed - 1.0397207708399179).abs() < 1e-12);
        assert!(combined_objective(&[], &point(0.5)).is_err());
    }
}
