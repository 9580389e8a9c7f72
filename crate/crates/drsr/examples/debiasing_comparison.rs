//! Debiased survival training versus a naive click baseline.
//!
//! Runs the full pipeline (simulate -> train -> evaluate) for the point-wise
//! and pair-wise survival objectives and for the click-only BCE baseline on
//! one seed, then prints NDCG@k and MAP side by side. The survival objectives
//! treat non-clicked tails as censored observations; the baseline fits raw
//! click/skip outcomes and inherits the position bias of the displayed
//! order, which is why it trails on relevance metrics.
//!
//! Uses a reduced dataset so it finishes in about a minute; the shipped
//! defaults (see `ExperimentConfig`) are what the test suite measures.
//!
//! Run:
//! `cargo run --release --example debiasing_comparison`

use drsr::config::ExperimentConfig;
use drsr::runner::{self, Method};

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.synth_queries = 400;
    cfg.sessions_per_query = 10;
    cfg.train.epochs = 15;

    let queries = runner::load_dataset(&cfg).unwrap();
    let seed = 1;

    println!("method      NDCG@1  NDCG@3  NDCG@5     MAP");
    for method in [Method::Pointwise, Method::Pairwise, Method::ClickOnly] {
        let report = runner::run_pipeline(&cfg, &queries, seed, method).unwrap();
        let at = |k: usize| report.ndcg_at.iter().find(|(kk, _)| *kk == k).unwrap().1;
        println!(
            "{:<10}  {:.4}  {:.4}  {:.4}  {:.4}",
            method.label(),
            at(1),
            at(3),
            at(5),
            report.map
        );
    }
}
