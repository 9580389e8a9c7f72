//! Batch experiment orchestration: the commands behind the `drsr` binary.
//!
//! Every command is a pure function of (config, seed) plus the files it
//! reads, and all output files are written atomically, so reruns with the
//! same inputs produce byte-identical artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::checkpoint::{self, CheckpointError};
use crate::config::ExperimentConfig;
use crate::data::{self, truncate_multiclick, DataError, LabeledQuery, RawSession, Split};
use crate::eval::{self, EvalError, MetricReport, PositionCurve};
use crate::loss::{LossConfig, LossMode, R1Form};
use crate::model::{self, HazardModel, ModelError};
use crate::sim::{self, InitialRanker, SimError};
use crate::synth::{self, SynthConfig};
use crate::train::{self, LossTarget, Objective, TrainConfig, TrainError};

/// Seed for the built-in synthetic dataset. Fixed on purpose: the dataset is
/// part of the experiment definition, while `--seed` varies simulation and
/// training.
const SYNTH_SEED: u64 = 2026;

/// Salt mixed into the run seed for initial-ranker sampling so the ranker
/// stream is independent of the click-draw streams.
const RANKER_SALT: u64 = 0x5261_6e6b;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("configuration error: {0}")]
    Config(String),
}

/// The three trainable methods the experiments compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pointwise,
    Pairwise,
    ClickOnly,
}

pub const ALL_METHODS: [Method; 3] = [Method::Pointwise, Method::Pairwise, Method::ClickOnly];

impl Method {
    /// Stable label used in file names and CSV columns; matches `--mode`.
    pub fn label(self) -> &'static str {
        match self {
            Method::Pointwise => "point",
            Method::Pairwise => "pair",
            Method::ClickOnly => "click-only",
        }
    }

    pub fn from_mode(mode: &str) -> Result<Method, RunnerError> {
        match mode {
            "point" => Ok(Method::Pointwise),
            "pair" => Ok(Method::Pairwise),
            "click-only" => Ok(Method::ClickOnly),
            other => Err(RunnerError::Config(format!(
                "unknown mode `{other}` (expected point, pair or click-only)"
            ))),
        }
    }

    fn objective(self, base: &LossConfig) -> Objective {
        match self {
            Method::Pointwise => Objective::Survival(LossConfig {
                mode: LossMode::Point,
                ..base.clone()
            }),
            Method::Pairwise => Objective::Survival(LossConfig {
                mode: LossMode::Pair,
                ..base.clone()
            }),
            Method::ClickOnly => Objective::ClickBce,
        }
    }
}

/// Method implied by the configured training objective.
pub fn default_method(cfg: &ExperimentConfig) -> Method {
    match &cfg.train.objective {
        Objective::Survival(lc) => match lc.mode {
            LossMode::Point => Method::Pointwise,
            LossMode::Pair => Method::Pairwise,
        },
        Objective::ClickBce => Method::ClickOnly,
    }
}

fn base_loss(cfg: &TrainConfig) -> LossConfig {
    match &cfg.objective {
        Objective::Survival(lc) => lc.clone(),
        Objective::ClickBce => LossConfig::default(),
    }
}

/// Load the labeled dataset named by the config, or generate the built-in
/// synthetic one when no path is set.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Vec<LabeledQuery>, RunnerError> {
    if cfg.data_path.is_empty() {
        let sc = SynthConfig {
            n_queries: cfg.synth_queries,
            docs_per_query: cfg.synth_docs,
            feature_dim: cfg.synth_dim,
            y_max: cfg.sim.y_max,
            ..SynthConfig::default()
        };
        Ok(synth::generate(&sc, SYNTH_SEED))
    } else {
        let text = fs::read_to_string(&cfg.data_path)?;
        Ok(data::parse_svmlight(&text)?)
    }
}

/// Hash-split the dataset into (train, valid, test) query lists.
pub fn split_dataset(
    queries: &[LabeledQuery],
    cfg: &ExperimentConfig,
) -> (Vec<LabeledQuery>, Vec<LabeledQuery>, Vec<LabeledQuery>) {
    let mut parts = (Vec::new(), Vec::new(), Vec::new());
    for q in queries {
        match data::split_of(q.qid, cfg.train_frac, cfg.valid_frac) {
            Split::Train => parts.0.push(q.clone()),
            Split::Valid => parts.1.push(q.clone()),
            Split::Test => parts.2.push(q.clone()),
        }
    }
    parts
}

/// Train the weak initial ranker on a small sample of the training queries.
pub fn fit_initial_ranker(
    train_queries: &[LabeledQuery],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<InitialRanker, RunnerError> {
    if train_queries.is_empty() {
        return Err(RunnerError::Config("no training queries to sample".into()));
    }
    let want = ((cfg.ranker_sample_frac * train_queries.len() as f64).round() as usize)
        .clamp(1, train_queries.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ RANKER_SALT);
    let mut picks: Vec<usize> = index_sample(&mut rng, train_queries.len(), want).into_vec();
    picks.sort_unstable();
    let sample: Vec<LabeledQuery> = picks.iter().map(|&i| train_queries[i].clone()).collect();
    Ok(sim::train_initial_ranker(&sample, cfg.ranker_epochs, seed)?)
}

/// Summary statistics printed after simulation.
#[derive(Debug, Clone)]
pub struct SimulationSummary {
    /// Number of raw browsing outcomes drawn (before multi-click truncation).
    pub outcomes: usize,
    /// Truncated single-click/censored session records.
    pub sessions: usize,
    /// Fraction of session records without a click.
    pub censored_frac: f64,
    /// Empirical click rate per display position over raw outcomes.
    pub click_rate: Vec<f64>,
    /// Empirical true-observation rate per display position.
    pub observe_rate: Vec<f64>,
}

/// Draw click sessions for every training query under the configured click
/// model. Each query gets its own RNG stream keyed by (seed, qid), so the
/// log does not depend on query iteration order.
pub fn simulate_clicks(
    cfg: &ExperimentConfig,
    train_queries: &[LabeledQuery],
    ranker: &InitialRanker,
    seed: u64,
) -> Result<(Vec<RawSession>, SimulationSummary), RunnerError> {
    cfg.sim.validate()?;
    let n = cfg.sim.max_list_len;
    let mut raws = Vec::new();
    let mut clicks = vec![0usize; n];
    let mut observed = vec![0usize; n];
    let mut shown = vec![0usize; n];
    let mut outcomes = 0usize;
    let mut segments = 0usize;
    let mut censored = 0usize;
    for q in train_queries {
        let order = sim::rank_initial(ranker, q, cfg.sim.max_list_len);
        let mut rng = sim::query_rng(seed, q.qid);
        for _ in 0..cfg.sessions_per_query {
            let (raw, segs, outcome) = sim::simulate_session(q, &order, &cfg.sim, &mut rng)?;
            outcomes += 1;
            for pos in 0..order.len() {
                shown[pos] += 1;
                if outcome.observed[pos] {
                    observed[pos] += 1;
                }
            }
            for &c in &outcome.clicks {
                clicks[c - 1] += 1;
            }
            segments += segs.len();
            censored += segs.iter().filter(|s| !s.clicked()).count();
            raws.push(raw);
        }
    }
    let rate = |num: &[usize]| -> Vec<f64> {
        num.iter()
            .zip(&shown)
            .map(|(&c, &s)| if s > 0 { c as f64 / s as f64 } else { 0.0 })
            .collect()
    };
    let summary = SimulationSummary {
        outcomes,
        sessions: segments,
        censored_frac: if segments == 0 {
            0.0
        } else {
            censored as f64 / segments as f64
        },
        click_rate: rate(&clicks),
        observe_rate: rate(&observed),
    };
    Ok((raws, summary))
}

/// Serialize a click log, one raw browsing record per line:
/// `qid=<id>\torder=<i1,i2,...>\tz=<c1,c2,... or ->\tl=<len>`.
pub fn click_log_to_string(log: &[RawSession]) -> String {
    let mut out = String::new();
    for s in log {
        let order: Vec<String> = s.order.iter().map(|i| i.to_string()).collect();
        let z = if s.clicks.is_empty() {
            "-".to_string()
        } else {
            let cs: Vec<String> = s.clicks.iter().map(|c| c.to_string()).collect();
            cs.join(",")
        };
        out.push_str(&format!(
            "qid={}\torder={}\tz={}\tl={}\n",
            s.qid,
            order.join(","),
            z,
            s.l
        ));
    }
    out
}

/// Parse a click log and re-attach feature vectors from the dataset.
pub fn parse_click_log(
    text: &str,
    queries: &[LabeledQuery],
) -> Result<Vec<RawSession>, RunnerError> {
    let by_qid: std::collections::HashMap<u64, &LabeledQuery> =
        queries.iter().map(|q| (q.qid, q)).collect();
    let mut log = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut qid = None;
        let mut order: Option<Vec<usize>> = None;
        let mut clicks: Option<Vec<usize>> = None;
        let mut l = None;
        for field in line.split('\t') {
            let (key, value) = field.split_once('=').ok_or_else(|| {
                RunnerError::Config(format!("click log line {}: bad field `{field}`", lineno + 1))
            })?;
            let bad = |e: &dyn std::fmt::Display| {
                RunnerError::Config(format!("click log line {}: {e}", lineno + 1))
            };
            match key {
                "qid" => qid = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
                "order" => {
                    order = Some(
                        value
                            .split(',')
                            .map(|v| v.parse::<usize>())
                            .collect::<Result<_, _>>()
                            .map_err(|e| bad(&e))?,
                    )
                }
                "z" => {
                    clicks = Some(if value == "-" {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|v| v.parse::<usize>())
                            .collect::<Result<_, _>>()
                            .map_err(|e| bad(&e))?
                    })
                }
                "l" => l = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                other => return Err(bad(&format!("unknown field `{other}`"))),
            }
        }
        let (qid, order, clicks, l) = match (qid, order, clicks, l) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => {
                return Err(RunnerError::Config(format!(
                    "click log line {}: missing field",
                    lineno + 1
                )))
            }
        };
        let query = by_qid.get(&qid).ok_or_else(|| {
            RunnerError::Config(format!("click log references unknown qid {qid}"))
        })?;
        let features = order
            .iter()
            .map(|&doc| {
                query
                    .docs
                    .get(doc.wrapping_sub(1))
                    .map(|d| d.features.clone())
                    .ok_or_else(|| {
                        RunnerError::Config(format!("qid {qid}: document index {doc} out of range"))
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let raw = RawSession { qid, order, features, clicks, l };
        // Truncation doubles as validation: sortedness, bounds, and the
        // click-beyond-browse case all surface here.
        truncate_multiclick(&raw)?;
        log.push(raw);
    }
    Ok(log)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), RunnerError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn click_log_path(out_dir: &Path) -> PathBuf {
    out_dir.join("clicks.log")
}

pub fn checkpoint_path(out_dir: &Path, method: Method) -> PathBuf {
    out_dir.join(format!("{}.ckpt", method.label()))
}

/// Simulate clicks for the training split and write `clicks.log`, printing
/// per-position click/observation rates and the censoring fraction.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<SimulationSummary, RunnerError> {
    let queries = load_dataset(cfg)?;
    let (train_qs, _, _) = split_dataset(&queries, cfg);
    let ranker = fit_initial_ranker(&train_qs, cfg, seed)?;
    let (sessions, summary) = simulate_clicks(cfg, &train_qs, &ranker, seed)?;
    fs::create_dir_all(out_dir)?;
    write_atomic(&click_log_path(out_dir), &click_log_to_string(&sessions))?;
    println!(
        "simulated {} outcomes -> {} sessions, censored fraction {:.4}",
        summary.outcomes, summary.sessions, summary.censored_frac
    );
    println!("position\tclick_rate\tobserve_rate");
    for (i, (c, o)) in summary.click_rate.iter().zip(&summary.observe_rate).enumerate() {
        println!("{}\t{:.4}\t{:.4}", i + 1, c, o);
    }
    Ok(summary)
}

/// Train one method on `clicks.log` and write its checkpoint plus an
/// `epoch,mean_loss` history file.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    seed: u64,
    method: Method,
    out_dir: &Path,
) -> Result<(HazardModel, Vec<f64>), RunnerError> {
    if method == Method::ClickOnly && base_loss(&cfg.train) != LossConfig::default() {
        return Err(RunnerError::Config(
            "mode click-only does not accept loss options (alpha, pairs, r1 form, kappa)".into(),
        ));
    }
    let queries = load_dataset(cfg)?;
    let text = fs::read_to_string(click_log_path(out_dir))?;
    let sessions = parse_click_log(&text, &queries)?;
    let tc = TrainConfig {
        seed,
        objective: method.objective(&base_loss(&cfg.train)),
        ..cfg.train.clone()
    };
    let (model, history) = train::train(&sessions, &tc)?;
    checkpoint::save(&model, &checkpoint_path(out_dir, method))?;
    let mut csv = String::from("epoch,mean_loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", epoch + 1, loss));
    }
    write_atomic(
        &out_dir.join(format!("{}_history.csv", method.label())),
        &csv,
    )?;
    Ok((model, history))
}

/// Displayed order for each test query under the initial ranker.
pub fn test_orders(
    cfg: &ExperimentConfig,
    test_qs: &[LabeledQuery],
    ranker: &InitialRanker,
) -> Vec<(LabeledQuery, Vec<usize>)> {
    test_qs
        .iter()
        .map(|q| (q.clone(), sim::rank_initial(ranker, q, cfg.sim.max_list_len)))
        .collect()
}

const EVAL_KS: [usize; 3] = [1, 3, 5];

fn metric_rows(run: &str, report: &MetricReport) -> String {
    let mut csv = String::new();
    csv.push_str(&format!("{run},map,,{}\n", report.map));
    for (k, v) in &report.ndcg_at {
        csv.push_str(&format!("{run},ndcg,{k},{v}\n"));
    }
    csv
}

/// Evaluate a method's checkpoint on the test split and write
/// `run,metric,k,value` rows (one MAP row, one NDCG row per cutoff).
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    seed: u64,
    method: Method,
    out_dir: &Path,
) -> Result<MetricReport, RunnerError> {
    let queries = load_dataset(cfg)?;
    let (train_qs, _, test_qs) = split_dataset(&queries, cfg);
    let ranker = fit_initial_ranker(&train_qs, cfg, seed)?;
    let model = checkpoint::load(&checkpoint_path(out_dir, method))?;
    let dim = queries
        .first()
        .and_then(|q| q.docs.first())
        .map(|d| d.features.dim())
        .unwrap_or(0);
    if model.input_dim() != dim {
        return Err(RunnerError::Config(format!(
            "checkpoint expects {}-dim features but the dataset has {dim}",
            model.input_dim()
        )));
    }
    let test = test_orders(cfg, &test_qs, &ranker);
    let report = eval::evaluate_run(&model, &test, &EVAL_KS)?;
    let mut csv = String::from("run,metric,k,value\n");
    csv.push_str(&metric_rows(&cfg.run_label, &report));
    write_atomic(&out_dir.join(format!("{}_metrics.csv", method.label())), &csv)?;
    Ok(report)
}

/// One full (simulate, train, eval) pass in memory; the unit of work for
/// sweeps and the acceptance experiments.
pub fn run_pipeline(
    cfg: &ExperimentConfig,
    queries: &[LabeledQuery],
    seed: u64,
    method: Method,
) -> Result<MetricReport, RunnerError> {
    let (train_qs, _, test_qs) = split_dataset(queries, cfg);
    let ranker = fit_initial_ranker(&train_qs, cfg, seed)?;
    let (sessions, _) = simulate_clicks(cfg, &train_qs, &ranker, seed)?;
    let tc = TrainConfig {
        seed,
        objective: method.objective(&base_loss(&cfg.train)),
        ..cfg.train.clone()
    };
    let (model, _) = train::train(&sessions, &tc)?;
    let test = test_orders(cfg, &test_qs, &ranker);
    Ok(eval::evaluate_run(&model, &test, &EVAL_KS)?)
}

fn take_fraction(queries: &[LabeledQuery], frac: f64) -> Vec<LabeledQuery> {
    let n = ((frac * queries.len() as f64).ceil() as usize).clamp(1, queries.len());
    queries[..n].to_vec()
}

/// Run the configured sweep grid and write a long-form CSV with one row per
/// (grid value, method, seed, metric). No aggregation happens here.
pub fn cmd_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf, RunnerError> {
    let grid: Vec<f64> = match cfg.sweep_variable.as_str() {
        "tau" => cfg.tau_grid.clone(),
        "gamma1" => cfg.gamma1_grid.clone(),
        "data_frac" => cfg.data_fracs.clone(),
        other => return Err(RunnerError::Config(format!("unknown sweep variable `{other}`"))),
    };
    if grid.is_empty() || cfg.seeds.is_empty() {
        return Err(RunnerError::Config("sweep grid and seed list must be non-empty".into()));
    }
    let queries = load_dataset(cfg)?;

    let run_point = |value: f64| -> Result<String, RunnerError> {
        let mut point_cfg = cfg.clone();
        let mut point_queries = queries.clone();
        match cfg.sweep_variable.as_str() {
            "tau" => point_cfg.sim.tau = value,
            "gamma1" => point_cfg.sim.gamma1 = value,
            "data_frac" => {
                // Shrink only the training split; test queries stay fixed.
                let (train_qs, valid_qs, test_qs) = split_dataset(&queries, cfg);
                point_queries = take_fraction(&train_qs, value);
                point_queries.extend(valid_qs);
                point_queries.extend(test_qs);
            }
            _ => unreachable!(),
        }
        point_cfg.sim.validate()?;
        let mut rows = String::new();
        for &seed in &cfg.seeds {
            for method in ALL_METHODS {
                let report = run_pipeline(&point_cfg, &point_queries, seed, method)?;
                let run = format!("{value},{},{seed}", method.label());
                rows.push_str(&metric_rows(&run, &report));
            }
        }
        Ok(rows)
    };

    // Grid points are independent; run them on their own threads and splice
    // the results back in grid order so the CSV stays deterministic.
    let results: Vec<Result<String, RunnerError>> = std::thread::scope(|scope| {
        let run_point = &run_point;
        let handles: Vec<_> = grid.iter().map(|&v| scope.spawn(move || run_point(v))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep job panicked")).collect()
    });

    let mut csv = String::from("sweep_value,method,seed,metric,k,value\n");
    for rows in results {
        csv.push_str(&rows?);
    }
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("sweep.csv");
    write_atomic(&path, &csv)?;
    Ok(path)
}

/// Average-position curves for every trained checkpoint in `out_dir`, plus
/// the relevance-label ground-truth series, with a companion summary of L1
/// distances to that ground truth.
pub fn cmd_curve(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<(String, PositionCurve, f64)>, RunnerError> {
    let queries = load_dataset(cfg)?;
    let (train_qs, _, test_qs) = split_dataset(&queries, cfg);
    let ranker = fit_initial_ranker(&train_qs, cfg, seed)?;
    let test = test_orders(cfg, &test_qs, &ranker);

    // Ground truth: re-rank each displayed list by its true labels.
    let label_perms: Vec<(usize, Vec<usize>)> = test
        .iter()
        .map(|(q, order)| {
            let scores: Vec<f64> = order
                .iter()
                .map(|&doc| q.docs[doc - 1].label as f64)
                .collect();
            Ok((order.len(), model::rerank(&scores)?))
        })
        .collect::<Result<_, RunnerError>>()?;
    let label_curve = eval::position_curve(&label_perms)?;

    let mut series: Vec<(String, PositionCurve)> = Vec::new();
    for method in ALL_METHODS {
        let path = checkpoint_path(out_dir, method);
        if !path.exists() {
            continue;
        }
        let m = checkpoint::load(&path)?;
        let perms: Vec<(usize, Vec<usize>)> = test
            .iter()
            .map(|(q, order)| {
                let xs: Vec<_> = order
                    .iter()
                    .map(|&doc| q.docs[doc - 1].features.clone())
                    .collect();
                let scores = model::score_relevance(&m, &xs)?;
                Ok((order.len(), model::rerank(&scores)?))
            })
            .collect::<Result<_, RunnerError>>()?;
        series.push((method.label().to_string(), eval::position_curve(&perms)?));
    }
    if series.is_empty() {
        return Err(RunnerError::Config(format!(
            "no checkpoint found under {} (run `train` first)",
            out_dir.display()
        )));
    }

    let mut curve_csv = String::from("position,mean_reranked_position,series\n");
    let mut summary_csv = String::from("series,l1_to_labels\n");
    let mut out = Vec::new();
    let mut all = series;
    all.push(("labels".to_string(), label_curve.clone()));
    for (name, curve) in all {
        for (i, v) in curve.0.iter().enumerate() {
            curve_csv.push_str(&format!("{},{},{}\n", i + 1, v, name));
        }
        let dist = curve.l1_distance(&label_curve);
        summary_csv.push_str(&format!("{name},{dist}\n"));
        out.push((name, curve, dist));
    }
    write_atomic(&out_dir.join("curve.csv"), &curve_csv)?;
    write_atomic(&out_dir.join("curve_summary.csv"), &summary_csv)?;
    Ok(out)
}

/// Maximum relative error threshold for the gradient check.
pub const GRADCHECK_TOL: f64 = 1e-4;

/// Finite-difference audit of every loss kind's analytic gradient.
#[derive(Debug, Clone)]
pub struct GradcheckReport {
    /// (loss kind, max relative error over all draws).
    pub rows: Vec<(String, f64)>,
}

impl GradcheckReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|(_, e)| *e < GRADCHECK_TOL)
    }
}

/// Compare analytic and central finite-difference gradients for all 8 loss
/// kinds over `draws` random (model, sequence) instances each.
pub fn cmd_gradcheck(seed: u64, draws: usize) -> Result<GradcheckReport, RunnerError> {
    use rand::Rng;
    let (f, h, n) = (3usize, 4usize, 5usize);
    let kinds: Vec<(&str, Box<dyn Fn(usize, Option<usize>) -> LossTarget>)> = vec![
        ("point_z", Box::new(|l, _| LossTarget::PointZ { z: l })),
        ("click", Box::new(|l, _| LossTarget::Click { l })),
        ("nonclick", Box::new(|l, _| LossTarget::NonClick { l })),
        ("l2", Box::new(|l, _| LossTarget::L2 { l, clicked: l % 2 == 0 })),
        ("pair_o0", Box::new(|l, a| LossTarget::PairO0 { a: a.unwrap(), b: l })),
        (
            "pair_r1",
            Box::new(|l, a| LossTarget::PairR1 {
                a: a.unwrap(),
                b: l,
                form: R1Form::Bounded,
            }),
        ),
        ("pair_r2", Box::new(|l, a| LossTarget::PairR2 { a: a.unwrap(), b: l })),
        ("click_bce", Box::new(|l, _| LossTarget::ClickBce {
            l,
            z: if l % 2 == 0 { Some(l) } else { None },
        })),
    ];
    let mut rows = Vec::new();
    for (name, make) in kinds {
        let mut worst = 0.0f64;
        for draw in 0..draws {
            let draw_seed = seed
                .wrapping_add(draw as u64)
                .wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let m = model::init_model(f, h, draw_seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(draw_seed ^ 0xfeed);
            let xs: Vec<_> = (0..n)
                .map(|_| {
                    crate::data::FeatureVector((0..f).map(|_| rng.gen_range(-1.0..1.0)).collect())
                })
                .collect();
            let l = rng.gen_range(2..=n);
            let a = Some(rng.gen_range(1..l));
            let target = make(l, a);
            let (_, analytic) = train::backward(&m, &xs, &target)?;
            let fd = train::finite_diff_gradient(&m, &xs, &target, 1e-5)?;
            for (ga, gf) in analytic.data.iter().zip(&fd.data) {
                let denom = gf.abs().max(1e-6);
                worst = worst.max((ga - gf).abs() / denom);
            }
        }
        rows.push((name.to_string(), worst));
    }
    Ok(GradcheckReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ClickModel, SimConfig};

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.synth_queries = 60;
        cfg.synth_docs = 6;
        cfg.synth_dim = 8;
        cfg.sim = SimConfig {
            model: ClickModel::Ccm,
            max_list_len: 6,
            ..SimConfig::default()
        };
        cfg.sessions_per_query = 3;
        cfg.ranker_sample_frac = 0.1;
        cfg.train.epochs = 2;
        cfg.train.hidden_dim = 6;
        cfg
    }

    #[test]
    fn click_log_round_trips() {
        let cfg = tiny_config();
        let queries = load_dataset(&cfg).unwrap();
        let (train_qs, _, _) = split_dataset(&queries, &cfg);
        let ranker = fit_initial_ranker(&train_qs, &cfg, 7).unwrap();
        let (sessions, _) = simulate_clicks(&cfg, &train_qs, &ranker, 7).unwrap();
        assert!(!sessions.is_empty());
        let text = click_log_to_string(&sessions);
        let parsed = parse_click_log(&text, &queries).unwrap();
        assert_eq!(parsed, sessions);
    }

    #[test]
    fn simulate_train_eval_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        let summary = cmd_simulate(&cfg, 11, dir.path()).unwrap();
        assert!(summary.sessions > 0);
        let (_, history) = cmd_train(&cfg, 11, Method::Pointwise, dir.path()).unwrap();
        assert_eq!(history.len(), cfg.train.epochs);
        let report = cmd_eval(&cfg, 11, Method::Pointwise, dir.path()).unwrap();
        assert_eq!(report.ndcg_at.len(), 3);
        let again = cmd_eval(&cfg, 11, Method::Pointwise, dir.path()).unwrap();
        assert_eq!(report.map, again.map);
    }

    #[test]
    fn simulate_is_byte_deterministic() {
        let cfg = tiny_config();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, 5, d1.path()).unwrap();
        cmd_simulate(&cfg, 5, d2.path()).unwrap();
        let a = fs::read(d1.path().join("clicks.log")).unwrap();
        let b = fs::read(d2.path().join("clicks.log")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn click_only_rejects_loss_options() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        if let Objective::Survival(lc) = &mut cfg.train.objective {
            lc.alpha = 0.9;
        }
        let err = cmd_train(&cfg, 1, Method::ClickOnly, dir.path()).unwrap_err();
        assert!(matches!(err, RunnerError::Config(_)));
    }

    #[test]
    fn missing_click_log_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_train(&tiny_config(), 1, Method::Pointwise, dir.path()).unwrap_err();
        assert!(matches!(err, RunnerError::Io(_)));
    }

    #[test]
    fn sweep_emits_full_grid() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        cfg.sim.model = ClickModel::Pbm;
        cfg.sweep_variable = "tau".into();
        cfg.tau_grid = vec![0.0, 1.0];
        cfg.seeds = vec![1];
        let path = cmd_sweep(&cfg, dir.path()).unwrap();
        let text = fs::read_to_string(path).unwrap();
        // header + |grid| * |seeds| * |methods| * 4 metric rows
        assert_eq!(text.lines().count(), 1 + 2 * 1 * 3 * 4);
    }

    #[test]
    fn curve_includes_label_series_and_distances() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        cmd_simulate(&cfg, 3, dir.path()).unwrap();
        cmd_train(&cfg, 3, Method::ClickOnly, dir.path()).unwrap();
        let series = cmd_curve(&cfg, 3, dir.path()).unwrap();
        let labels = series.iter().find(|(n, _, _)| n == "labels").unwrap();
        assert_eq!(labels.2, 0.0);
        assert!(series.iter().any(|(n, _, _)| n == "click-only"));
        assert!(dir.path().join("curve_summary.csv").exists());
    }

    #[test]
    fn curve_without_checkpoints_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_curve(&tiny_config(), 1, dir.path()).unwrap_err();
        assert!(matches!(err, RunnerError::Config(_)));
    }

    #[test]
    fn gradcheck_reports_eight_passing_kinds() {
        let report = cmd_gradcheck(41, 3).unwrap();
        assert_eq!(report.rows.len(), 8);
        assert!(report.pass(), "{:?}", report.rows);
    }
}
