//! Core ranking data types: labeled queries, browsing sessions, and the
//! positive/negative/untrusted document partition.
//!
//! Datasets arrive in the LETOR/SVMLight text format (`<label> qid:<id>
//! <fid>:<val> ...`). Sessions with several clicks are truncated into
//! single-click segments so every record carries at most one event, which is
//! what the survival losses expect.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: non-contiguous qid {qid}")]
    NonContiguousQid { line: usize, qid: u64 },
    #[error("invalid session: {0}")]
    InvalidSession(String),
}

/// Dense per-document feature vector of fixed dimension across a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// One document of a labeled query: features plus an integer relevance grade.
#[derive(Debug, Clone)]
pub struct LabeledDoc {
    pub features: FeatureVector,
    pub label: u32,
}

/// A query with its candidate documents and relevance grades.
#[derive(Debug, Clone)]
pub struct LabeledQuery {
    pub qid: u64,
    pub docs: Vec<LabeledDoc>,
}

/// One user browsing record over a displayed list.
///
/// `order` holds 1-based document indices into the owning query's `docs`, in
/// display order. `z` is the 1-based click position within this session, or
/// `None` when the session is censored (no click before the user left).
/// `l` is the tracked browse length; invariantly `z <= l <= order.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub qid: u64,
    pub order: Vec<usize>,
    pub features: Vec<FeatureVector>,
    pub z: Option<usize>,
    pub l: usize,
}

impl SessionLog {
    /// Click indicator ω: 1 iff the session has a click.
    pub fn clicked(&self) -> bool {
        self.z.is_some()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.l == 0 || self.l > self.order.len() {
            return Err(DataError::InvalidSession(format!(
                "browse length {} out of range for list of {}",
                self.l,
                self.order.len()
            )));
        }
        if self.features.len() != self.order.len() {
            return Err(DataError::InvalidSession(
                "feature sequence length differs from order length".into(),
            ));
        }
        if let Some(z) = self.z {
            if z == 0 || z > self.l {
                return Err(DataError::InvalidSession(format!(
                    "click position {z} outside tracked range 1..={}",
                    self.l
                )));
            }
        }
        Ok(())
    }
}

/// A multi-click browsing record before truncation into single-click segments.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSession {
    pub qid: u64,
    pub order: Vec<usize>,
    pub features: Vec<FeatureVector>,
    /// Click positions, 1-based, sorted ascending.
    pub clicks: Vec<usize>,
    pub l: usize,
}

/// Partition of a session's tracked positions into feedback sets.
///
/// Positions are 1-based. `positive` holds the clicked position (at most
/// one), `negative` the observed-and-unclicked positions the log can be
/// trusted on, `untrusted` the tail the tracking log claims was observed but
/// may not have been.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentSets {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    pub untrusted: Vec<usize>,
}

/// Parse LETOR/SVMLight text into queries grouped by qid.
///
/// Lines look like `2 qid:17 1:0.5 3:1.0 # comment`. Feature ids are 1-based
/// and strictly increasing within a line; absent ids fill with 0.0. Queries
/// must be contiguous: once a qid's block ends, seeing it again is an error.
pub fn parse_svmlight(text: &str) -> Result<Vec<LabeledQuery>, DataError> {
    let mut queries: Vec<LabeledQuery> = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_fid = 0usize;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue; // blank or comment-only line
        };
        let label: u32 = label_tok.parse().map_err(|_| DataError::Parse {
            line: line_no,
            msg: format!("non-integer label `{label_tok}`"),
        })?;
        let qid_tok = tokens.next().ok_or_else(|| DataError::Parse {
            line: line_no,
            msg: "missing qid field".into(),
        })?;
        let qid: u64 = qid_tok
            .strip_prefix("qid:")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DataError::Parse {
                line: line_no,
                msg: format!("malformed qid field `{qid_tok}`"),
            })?;

        let mut feats: Vec<(usize, f64)> = Vec::new();
        let mut last_fid = 0usize;
        for tok in tokens {
            let (fid_s, val_s) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: line_no,
                msg: format!("malformed feature `{tok}`"),
            })?;
            let fid: usize = fid_s.parse().map_err(|_| DataError::Parse {
                line: line_no,
                msg: format!("malformed feature id `{fid_s}`"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| DataError::Parse {
                line: line_no,
                msg: format!("malformed feature value `{val_s}`"),
            })?;
            if fid == 0 || fid <= last_fid {
                return Err(DataError::Parse {
                    line: line_no,
                    msg: format!("feature ids must be strictly increasing, got {fid}"),
                });
            }
            if !val.is_finite() {
                return Err(DataError::Parse {
                    line: line_no,
                    msg: format!("non-finite feature value {val}"),
                });
            }
            last_fid = fid;
            max_fid = max_fid.max(fid);
            feats.push((fid, val));
        }

        let start_new = match queries.last() {
            Some(q) => q.qid != qid,
            None => true,
        };
        if start_new {
            if !seen.insert(qid) {
                return Err(DataError::NonContiguousQid { line: line_no, qid });
            }
            queries.push(LabeledQuery { qid, docs: Vec::new() });
        }
        queries.last_mut().unwrap().docs.push(LabeledDoc {
            features: FeatureVector(Vec::new()),
            label,
        });
        sparse.push(feats);
    }

    // Densify once the global feature dimension is known.
    let mut flat = sparse.into_iter();
    for q in &mut queries {
        for doc in &mut q.docs {
            let mut dense = vec![0.0; max_fid];
            for (fid, val) in flat.next().unwrap() {
                dense[fid - 1] = val;
            }
            doc.features = FeatureVector(dense);
        }
    }
    Ok(queries)
}

/// Inverse of [`parse_svmlight`] (zero-valued features are dropped).
pub fn serialize_svmlight(queries: &[LabeledQuery]) -> String {
    let mut out = String::new();
    for q in queries {
        for doc in &q.docs {
            let _ = write!(out, "{} qid:{}", doc.label, q.qid);
            for (i, &v) in doc.features.0.iter().enumerate() {
                if v != 0.0 {
                    let _ = write!(out, " {}:{}", i + 1, v);
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Split a multi-click raw session into single-click segments.
///
/// For clicks z_1 < ... < z_m the k-th segment covers original positions
/// (z_{k-1}, z_k] with the click at its last position; a trailing censored
/// segment covers (z_m, l] when the user browsed past the last click.
pub fn truncate_multiclick(raw: &RawSession) -> Result<Vec<SessionLog>, DataError> {
    if raw.l == 0 || raw.l > raw.order.len() {
        return Err(DataError::InvalidSession(format!(
            "browse length {} out of range for list of {}",
            raw.l,
            raw.order.len()
        )));
    }
    let mut prev = 0usize;
    for &z in &raw.clicks {
        if z <= prev {
            return Err(DataError::InvalidSession(
                "click positions must be sorted ascending and distinct".into(),
            ));
        }
        if z > raw.l {
            return Err(DataError::InvalidSession(format!(
                "click position {z} beyond browse length {}",
                raw.l
            )));
        }
        prev = z;
    }

    let mut out = Vec::new();
    let mut start = 0usize; // 0-based start of the next segment
    for &z in &raw.clicks {
        let len = z - start;
        out.push(SessionLog {
            qid: raw.qid,
            order: raw.order[start..z].to_vec(),
            features: raw.features[start..z].to_vec(),
            z: Some(len),
            l: len,
        });
        start = z;
    }
    if raw.l > start {
        out.push(SessionLog {
            qid: raw.qid,
            order: raw.order[start..raw.l].to_vec(),
            features: raw.features[start..raw.l].to_vec(),
            z: None,
            l: raw.l - start,
        });
    }
    Ok(out)
}

/// Partition a session's tracked positions into D+, D−, D*.
///
/// Click sessions: the click is positive, everything before it negative,
/// everything after it (tracked but past the event) untrusted. Censored
/// sessions: the last `kappa` fraction of tracked positions is untrusted,
/// the rest negative.
pub fn build_document_sets(s: &SessionLog, kappa: f64) -> DocumentSets {
    assert!((0.0..1.0).contains(&kappa), "kappa must be in [0,1)");
    match s.z {
        Some(z) => DocumentSets {
            positive: vec![z],
            negative: (1..z).collect(),
            untrusted: (z + 1..=s.l).collect(),
        },
        None => {
            let cut = ((1.0 - kappa) * s.l as f64).ceil() as usize;
            DocumentSets {
                positive: Vec::new(),
                negative: (1..=cut).collect(),
                untrusted: (cut + 1..=s.l).collect(),
            }
        }
    }
}

/// Deterministic train/validation/test assignment for a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Hash a qid to a split so the partition is stable across runs.
pub fn split_of(qid: u64, train_frac: f64, valid_frac: f64) -> Split {
    let u = splitmix64(qid) as f64 / (u64::MAX as f64 + 1.0);
    if u < train_frac {
        Split::Train
    } else if u < train_frac + valid_frac {
        Split::Valid
    } else {
        Split::Test
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(vals: &[f64]) -> FeatureVector {
        FeatureVector(vals.to_vec())
    }

    fn raw(clicks: &[usize], l: usize, n: usize) -> RawSession {
        RawSession {
            qid: 7,
            order: (1..=n).collect(),
            features: (0..n).map(|i| fv(&[i as f64])).collect(),
            clicks: clicks.to_vec(),
            l,
        }
    }

    #[test]
    fn parses_single_line() {
        let qs = parse_svmlight("2 qid:1 1:0.5 3:1.0").unwrap();
        assert_eq!(qs.len(), 1);
        assert_eq!(qs[0].qid, 1);
        assert_eq!(qs[0].docs.len(), 1);
        assert_eq!(qs[0].docs[0].label, 2);
        assert_eq!(qs[0].docs[0].features.values(), &[0.5, 0.0, 1.0]);
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(parse_svmlight("").unwrap().is_empty());
        assert!(parse_svmlight("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn rejects_non_contiguous_qid() {
        let text = "1 qid:1 1:1\n1 qid:2 1:1\n0 qid:1 1:2\n";
        match parse_svmlight(text) {
            Err(DataError::NonContiguousQid { line: 3, qid: 1 }) => {}
            other => panic!("expected non-contiguous qid error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            parse_svmlight("x qid:1 1:1"),
            Err(DataError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_svmlight("1 qid:1 2:1 1:1"),
            Err(DataError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_svmlight("1 1:1"),
            Err(DataError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn svmlight_round_trip() {
        let text = "2 qid:1 1:0.5 3:1\n0 qid:1 2:-1.25\n4 qid:9 1:3\n";
        let qs = parse_svmlight(text).unwrap();
        let qs2 = parse_svmlight(&serialize_svmlight(&qs)).unwrap();
        assert_eq!(qs.len(), qs2.len());
        for (a, b) in qs.iter().zip(&qs2) {
            assert_eq!(a.qid, b.qid);
            for (da, db) in a.docs.iter().zip(&b.docs) {
                assert_eq!(da.label, db.label);
                assert_eq!(da.features, db.features);
            }
        }
    }

    #[test]
    fn truncates_two_clicks_with_tail() {
        let out = truncate_multiclick(&raw(&[2, 5], 8, 10)).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].order, vec![1, 2]);
        assert_eq!((out[0].z, out[0].l), (Some(2), 2));
        assert_eq!(out[1].order, vec![3, 4, 5]);
        assert_eq!((out[1].z, out[1].l), (Some(3), 3));
        assert_eq!(out[2].order, vec![6, 7, 8]);
        assert_eq!((out[2].z, out[2].l), (None, 3));
        for s in &out {
            s.validate().unwrap();
        }
    }

    #[test]
    fn truncates_no_click_and_single() {
        let out = truncate_multiclick(&raw(&[], 4, 4)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].z, out[0].l), (None, 4));

        let out = truncate_multiclick(&raw(&[1], 1, 1)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].z, out[0].l), (Some(1), 1));
    }

    #[test]
    fn truncate_rejects_click_past_l() {
        assert!(truncate_multiclick(&raw(&[5], 3, 6)).is_err());
    }

    #[test]
    fn truncation_covers_all_positions() {
        // Segments concatenated reproduce the original order prefix 1..=l.
        for clicks in [vec![], vec![1], vec![3], vec![1, 2, 6], vec![2, 5]] {
            let r = raw(&clicks, 7, 9);
            let out = truncate_multiclick(&r).unwrap();
            let covered: Vec<usize> = out.iter().flat_map(|s| s.order.clone()).collect();
            assert_eq!(covered, (1..=7).collect::<Vec<_>>());
            for s in &out {
                assert!(s.z.iter().all(|&z| z == s.l)); // click at segment end
            }
        }
    }

    #[test]
    fn document_sets_click_session() {
        let s = SessionLog {
            qid: 1,
            order: (1..=5).collect(),
            features: (0..5).map(|i| fv(&[i as f64])).collect(),
            z: Some(3),
            l: 5,
        };
        let sets = build_document_sets(&s, 0.3);
        assert_eq!(sets.positive, vec![3]);
        assert_eq!(sets.negative, vec![1, 2]);
        assert_eq!(sets.untrusted, vec![4, 5]);
    }

    #[test]
    fn document_sets_censored_session() {
        let s = SessionLog {
            qid: 1,
            order: (1..=10).collect(),
            features: (0..10).map(|i| fv(&[i as f64])).collect(),
            z: None,
            l: 10,
        };
        let sets = build_document_sets(&s, 0.3);
        assert_eq!(sets.negative, (1..=7).collect::<Vec<_>>());
        assert_eq!(sets.untrusted, vec![8, 9, 10]);
        assert!(sets.positive.is_empty());
    }

    #[test]
    fn document_sets_degenerate_click() {
        let s = SessionLog {
            qid: 1,
            order: vec![1],
            features: vec![fv(&[0.0])],
            z: Some(1),
            l: 1,
        };
        let sets = build_document_sets(&s, 0.3);
        assert_eq!(sets.positive, vec![1]);
        assert!(sets.negative.is_empty());
        assert!(sets.untrusted.is_empty());
    }

    #[test]
    fn document_sets_disjoint_and_bounded() {
        for (z, l) in [(Some(1), 4), (Some(4), 4), (None, 1), (None, 6)] {
            let s = SessionLog {
                qid: 1,
                order: (1..=l).collect(),
                features: (0..l).map(|i| fv(&[i as f64])).collect(),
                z,
                l,
            };
            let sets = build_document_sets(&s, 0.3);
            let mut all: Vec<usize> = sets
                .positive
                .iter()
                .chain(&sets.negative)
                .chain(&sets.untrusted)
                .copied()
                .collect();
            let n = all.len();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), n, "sets overlap");
            assert!(all.iter().all(|&p| (1..=l).contains(&p)));
            if let Some(z) = z {
                assert!(sets.negative.iter().all(|&p| p < z));
            }
        }
    }

    #[test]
    fn split_is_stable() {
        for qid in 0..100 {
            assert_eq!(split_of(qid, 0.7, 0.1), split_of(qid, 0.7, 0.1));
        }
        // All three splits non-empty over a modest qid range.
        let mut counts = [0usize; 3];
        for qid in 0..1000 {
            match split_of(qid, 0.7, 0.1) {
                Split::Train => counts[0] += 1,
                Split::Valid => counts[1] += 1,
                Split::Test => counts[2] += 1,
            }
        }
        assert!(counts.iter().all(|&c| c > 0));
        assert!(counts[0] > counts[1] && counts[0] > counts[2]);
    }
}
