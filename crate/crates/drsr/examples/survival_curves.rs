//! Survival quantities for one ranked list.
//!
//! Runs the recurrent hazard model forward over a displayed list and prints
//! the per-position hazard h, survival S, browse-stop CDF W, and stop
//! probability p, then verifies the normalization identity
//! sum(p) + S(n+1) = 1.
//!
//! Run:
//! `cargo run --release --example survival_curves`

use drsr::data::FeatureVector;
use drsr::model::{forward, init_model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let (input_dim, hidden_dim, n) = (8, 16, 10);
    let model = init_model(input_dim, hidden_dim, 11).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<FeatureVector> = (0..n)
        .map(|_| FeatureVector((0..input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();

    let seq = forward(&model, &xs).unwrap();
    println!("pos        h        S        W        p");
    for i in 0..n {
        println!(
            "{:>3}  {:.5}  {:.5}  {:.5}  {:.5}",
            i + 1,
            seq.h[i],
            seq.s[i],
            seq.w[i],
            seq.p[i]
        );
    }
    println!("      (S and W also defined at n+1: S={:.5}, W={:.5})", seq.s[n], seq.w[n]);

    let total: f64 = seq.p.iter().sum::<f64>() + seq.s[n];
    println!("sum(p) + S(n+1) = {total:.12}");
    assert!((total - 1.0).abs() < 1e-9);
}
