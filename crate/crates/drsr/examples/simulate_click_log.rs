//! Generate a biased click log and inspect its shape.
//!
//! Builds a small synthetic dataset, fits the weak initial ranker on a 1%
//! sample, simulates cascade-model sessions over the displayed lists, and
//! prints per-position click rates next to the analytic rates implied by the
//! click model, plus a few raw log lines.
//!
//! Run:
//! `cargo run --release --example simulate_click_log`

use drsr::config::ExperimentConfig;
use drsr::runner::{self, click_log_to_string};
use drsr::sim;

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.synth_queries = 200;
    cfg.sessions_per_query = 10;

    let queries = runner::load_dataset(&cfg).unwrap();
    let (train_qs, _, _) = runner::split_dataset(&queries, &cfg);
    let ranker = runner::fit_initial_ranker(&train_qs, &cfg, 7).unwrap();

    let (log, summary) = runner::simulate_clicks(&cfg, &train_qs, &ranker, 7).unwrap();
    println!(
        "{} raw sessions over {} queries; {:.1}% of truncated segments censored",
        log.len(),
        train_qs.len(),
        100.0 * summary.censored_frac
    );

    // Empirical click frequency per displayed position.
    let mut clicks = vec![0usize; cfg.sim.max_list_len];
    for s in &log {
        for &z in &s.clicks {
            clicks[z - 1] += 1;
        }
    }
    // Analytic rates for one representative query's relevance profile.
    let probs: Vec<f64> = train_qs[0]
        .docs
        .iter()
        .map(|d| sim::relevance_probability(d.label, &cfg.sim).unwrap())
        .collect();
    let analytic = sim::analytic_click_rate(&probs, &cfg.sim);

    println!("pos  empirical  analytic(query 1)");
    for (i, (&c, &a)) in clicks.iter().zip(&analytic).enumerate() {
        println!("{:>3}  {:>9.4}  {:>8.4}", i + 1, c as f64 / log.len() as f64, a);
    }

    println!("\nfirst three log lines:");
    for line in click_log_to_string(&log).lines().take(3) {
        println!("  {line}");
    }
}
