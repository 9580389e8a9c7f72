//! Finite-difference validation of every loss gradient.
//!
//! Draws random models and sessions, backpropagates each loss kind through
//! the recurrent hazard model, and compares against central finite
//! differences. Prints the max relative error per loss kind.
//!
//! Run:
//! `cargo run --release --example gradient_check`

use drsr::runner;

fn main() {
    let report = runner::cmd_gradcheck(42, 20).unwrap();
    println!("loss kind   max relative error");
    for (kind, err) in &report.rows {
        println!("{kind:<10}  {err:.3e}");
    }
    println!("overall: {}", if report.pass() { "PASS" } else { "FAIL" });
    assert!(report.pass());
}
