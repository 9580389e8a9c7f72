//! Average-position analysis of re-ranked lists.
//!
//! Trains the point-wise survival model and the click-only baseline, then
//! asks: for a document displayed at position i, where does each model place
//! it after re-ranking, on average? The ground-truth series re-ranks by the
//! hidden relevance labels. A debiased model's curve should sit closer to
//! the label curve than the click baseline's, especially at middle
//! positions where position bias starves documents of clicks.
//!
//! Run:
//! `cargo run --release --example position_curve`

use drsr::config::ExperimentConfig;
use drsr::runner::{self, Method};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.synth_queries = 400;
    cfg.sessions_per_query = 10;
    cfg.train.epochs = 15;
    let seed = 1;

    runner::cmd_simulate(&cfg, seed, dir.path()).unwrap();
    runner::cmd_train(&cfg, seed, Method::Pointwise, dir.path()).unwrap();
    runner::cmd_train(&cfg, seed, Method::ClickOnly, dir.path()).unwrap();

    let series = runner::cmd_curve(&cfg, seed, dir.path()).unwrap();
    println!("series        mean re-ranked position per original position        L1 to labels");
    for (name, curve, l1) in &series {
        let row: Vec<String> = curve.0.iter().map(|v| format!("{v:.2}")).collect();
        println!("{name:<12}  [{}]  {l1:.3}", row.join(", "));
    }
}
