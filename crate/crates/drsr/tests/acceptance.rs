//! End-to-end acceptance gate. Each test prints one `criterion N ... PASS`
//! line (run with `--nocapture` to see them) and fails loudly otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use drsr::config::ExperimentConfig;
use drsr::data::LabeledQuery;
use drsr::eval::{average_precision, ndcg_at_k};
use drsr::loss::{loss_click, loss_l2, loss_nonclick};
use drsr::model::{survival_curves, HazardSequence};
use drsr::runner::{
    self, cmd_curve, cmd_gradcheck, cmd_simulate, cmd_train, load_dataset, run_pipeline, Method,
    GRADCHECK_TOL,
};
use drsr::sim::{self, draw_outcome, relevance_probability, ClickModel, SimConfig};

fn verdict(criterion: usize, name: &str, ok: bool) {
    println!(
        "criterion {criterion} ({name}): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} ({name}) failed");
}

fn random_hazards(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(1e-6..1.0 - 1e-6)).collect()
}

fn sequence_from_hazards(h: Vec<f64>) -> HazardSequence {
    let (s, w, p) = survival_curves(&h).unwrap();
    let n = h.len();
    HazardSequence {
        h,
        s,
        w,
        p,
        hidden: vec![Vec::new(); n],
    }
}

#[test]
fn criterion_1_probability_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut ok = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=50);
        let h = random_hazards(&mut rng, n);
        let (s, _w, p) = survival_curves(&h).unwrap();
        let total: f64 = p.iter().sum::<f64>() + s[n];
        ok &= (total - 1.0).abs() < 1e-9;
        for i in 0..n {
            ok &= (p[i] - (s[i] - s[i + 1])).abs() < 1e-9;
            ok &= (h[i] * s[i] - p[i]).abs() < 1e-12;
        }
    }
    verdict(1, "probability normalization", ok);
}

#[test]
fn criterion_2_split_loss_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut ok = true;
    for _ in 0..100 {
        let n = rng.gen_range(1..=10);
        let hs = sequence_from_hazards(random_hazards(&mut rng, n));
        let l = rng.gen_range(1..=n);
        let clicked = rng.gen_bool(0.5);
        let split = if clicked {
            loss_click(&hs, l).unwrap()
        } else {
            loss_nonclick(&hs, l).unwrap()
        };
        let combined = loss_l2(&hs, l, clicked).unwrap();
        ok &= (split - combined).abs() < 1e-12;
    }
    verdict(2, "split-loss identity", ok);
}

#[test]
fn criterion_3_gradient_correctness() {
    let report = cmd_gradcheck(303, 20).unwrap();
    let mut ok = report.rows.len() == 8;
    for (kind, err) in &report.rows {
        println!("  {kind}: max rel error {err:.3e}");
        ok &= *err < GRADCHECK_TOL;
    }
    verdict(3, "gradient correctness", ok);
}

#[test]
fn criterion_4_simulator_fidelity() {
    const N: usize = 100_000;
    let labels = [4u32, 3, 0, 2, 1, 0, 4, 1, 2, 0];
    let mut configs: Vec<SimConfig> = Vec::new();
    for tau in [0.0, 1.0, 2.0] {
        configs.push(SimConfig {
            model: ClickModel::Pbm,
            tau,
            ..SimConfig::default()
        });
    }
    for preset in ["navigational", "informational"] {
        let (g2, g3) = SimConfig::ccm_preset(preset).unwrap();
        configs.push(SimConfig {
            model: ClickModel::Ccm,
            gamma2: g2,
            gamma3: g3,
            ..SimConfig::default()
        });
    }
    let mut ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for cfg in &configs {
        let rel: Vec<f64> = labels
            .iter()
            .map(|&y| relevance_probability(y, cfg).unwrap())
            .collect();
        let expected = sim::analytic_click_rate(&rel, cfg);
        let mut counts = vec![0usize; rel.len()];
        for _ in 0..N {
            for c in draw_outcome(&rel, cfg, &mut rng).clicks {
                counts[c - 1] += 1;
            }
        }
        for (i, &e) in expected.iter().enumerate() {
            let emp = counts[i] as f64 / N as f64;
            let sd = (e * (1.0 - e) / N as f64).sqrt();
            ok &= (emp - e).abs() <= 3.0 * sd + 1e-12;
        }
    }
    verdict(4, "simulator fidelity", ok);
}

/// The shared full-scale experiment: default config is 1,000 synthetic
/// queries, 10 docs each, 20-dim features, CCM clicks.
fn full_config() -> (ExperimentConfig, Vec<LabeledQuery>) {
    let cfg = ExperimentConfig::default();
    let queries = load_dataset(&cfg).unwrap();
    (cfg, queries)
}

fn mean_metric(
    cfg: &ExperimentConfig,
    queries: &[LabeledQuery],
    seeds: &[u64],
    method: Method,
    metric: fn(&drsr::eval::MetricReport) -> f64,
) -> f64 {
    let sum: f64 = seeds
        .iter()
        .map(|&s| metric(&run_pipeline(cfg, queries, s, method).unwrap()))
        .sum();
    sum / seeds.len() as f64
}

fn ndcg5(r: &drsr::eval::MetricReport) -> f64 {
    r.ndcg_at.iter().find(|(k, _)| *k == 5).unwrap().1
}

fn map(r: &drsr::eval::MetricReport) -> f64 {
    r.map
}

#[test]
fn criterion_5_debiasing_gap() {
    let (cfg, queries) = full_config();
    let seeds = [1u64, 2, 3];
    let point = mean_metric(&cfg, &queries, &seeds, Method::Pointwise, ndcg5);
    let pair = mean_metric(&cfg, &queries, &seeds, Method::Pairwise, ndcg5);
    let click = mean_metric(&cfg, &queries, &seeds, Method::ClickOnly, ndcg5);
    println!("  NDCG@5: point {point:.4}, pair {pair:.4}, click-only {click:.4}");
    verdict(
        5,
        "debiasing gap",
        point - click >= 0.02 && pair - click >= 0.02,
    );
}

#[test]
fn criterion_6_bias_degree_robustness() {
    let (mut cfg, queries) = full_config();
    cfg.sim.model = ClickModel::Pbm;
    let seeds = [1u64, 2, 3];
    let mut click_map = Vec::new();
    let mut gap = Vec::new();
    for tau in [0.0, 2.0] {
        cfg.sim.tau = tau;
        let point = mean_metric(&cfg, &queries, &seeds, Method::Pointwise, map);
        let click = mean_metric(&cfg, &queries, &seeds, Method::ClickOnly, map);
        println!("  tau={tau}: point MAP {point:.4}, click-only MAP {click:.4}");
        click_map.push(click);
        gap.push(point - click);
    }
    verdict(
        6,
        "bias-degree robustness",
        click_map[1] < click_map[0] && gap[1] > gap[0],
    );
}

#[test]
fn criterion_7_position_curve() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = full_config();
    let seed = 1;
    cmd_simulate(&cfg, seed, dir.path()).unwrap();
    cmd_train(&cfg, seed, Method::Pointwise, dir.path()).unwrap();
    cmd_train(&cfg, seed, Method::ClickOnly, dir.path()).unwrap();
    let series = cmd_curve(&cfg, seed, dir.path()).unwrap();
    let dist = |name: &str| {
        series
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, d)| *d)
            .unwrap()
    };
    let (debiased, click) = (dist("point"), dist("click-only"));
    println!("  L1 to labels: point {debiased:.4}, click-only {click:.4}");
    verdict(7, "position-curve analysis", debiased < click);
}

// Independent brute-force metric implementations for criterion 8. Same
// elementary operations in the same order as any direct transcription of the
// definitions, so agreement must be bitwise.
fn brute_dcg(labels: &[u32], k: usize) -> f64 {
    let mut total = 0.0;
    for pos in 1..=labels.len().min(k) {
        let gain = 2f64.powi(labels[pos - 1] as i32) - 1.0;
        total += gain / ((pos + 1) as f64).log2();
    }
    total
}

fn brute_ndcg(labels: &[u32], k: usize) -> f64 {
    let mut best = labels.to_vec();
    best.sort_unstable();
    best.reverse();
    let ideal = brute_dcg(&best, k);
    if ideal == 0.0 {
        1.0
    } else {
        brute_dcg(labels, k) / ideal
    }
}

fn brute_ap(rels: &[bool]) -> f64 {
    let relevant = rels.iter().filter(|&&r| r).count();
    if relevant == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=rels.len() {
        if rels[k - 1] {
            let hits_at_k = rels[..k].iter().filter(|&&r| r).count();
            total += hits_at_k as f64 / k as f64;
        }
    }
    total / relevant as f64
}

#[test]
fn criterion_8_metric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut ok = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
        let k = rng.gen_range(1..=n);
        ok &= ndcg_at_k(&labels, k).to_bits() == brute_ndcg(&labels, k).to_bits();
        let rels: Vec<bool> = labels.iter().map(|&y| y >= 1).collect();
        ok &= average_precision(&rels).to_bits() == brute_ap(&rels).to_bits();
    }
    ok &= (ndcg_at_k(&[0, 4, 1], 3) - 0.63746).abs() < 1e-5;
    ok &= (average_precision(&[false, true, true]) - 0.58333).abs() < 1e-5;
    verdict(8, "metric oracle equivalence", ok);
}

#[test]
fn criterion_9_determinism() {
    let mut cfg = ExperimentConfig::default();
    cfg.synth_queries = 150;
    cfg.train.epochs = 5;
    let read = |dir: &std::path::Path, name: &str| std::fs::read(dir.join(name)).unwrap();

    let mut ok = true;
    let mut dirs = Vec::new();
    let mut models = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, 42, dir.path()).unwrap();
        let (model, _) = cmd_train(&cfg, 42, Method::Pointwise, dir.path()).unwrap();
        models.push(model);
        dirs.push(dir);
    }
    for name in ["clicks.log", "point.ckpt", "point_history.csv"] {
        ok &= read(dirs[0].path(), name) == read(dirs[1].path(), name);
    }

    // Checkpoint round trip: reloaded model evaluates identically.
    let queries = load_dataset(&cfg).unwrap();
    let (train_qs, _, test_qs) = runner::split_dataset(&queries, &cfg);
    let ranker = runner::fit_initial_ranker(&train_qs, &cfg, 42).unwrap();
    let test = runner::test_orders(&cfg, &test_qs, &ranker);
    let reloaded =
        drsr::checkpoint::load(&dirs[0].path().join("point.ckpt")).unwrap();
    let a = drsr::eval::evaluate_run(&models[0], &test, &[1, 3, 5]).unwrap();
    let b = drsr::eval::evaluate_run(&reloaded, &test, &[1, 3, 5]).unwrap();
    ok &= a.map.to_bits() == b.map.to_bits();
    for ((_, x), (_, y)) in a.ndcg_at.iter().zip(&b.ndcg_at) {
        ok &= x.to_bits() == y.to_bits();
    }
    verdict(9, "determinism", ok);
}
