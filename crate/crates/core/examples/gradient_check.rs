// Finite-difference verification of every loss, as run by `hecvl gradcheck`.
//
// cargo run --example gradient_check

use hecvl::cli::{gradcheck, quadratic_self_test, GRADCHECK_TOLERANCE};

pub fn run_example() -> hecvl::Result<()> {
    println!("quadratic self-test: {:.2e}", quadratic_self_test()?);
    for seed in 0..3 {
        for line in gradcheck(seed, false)? {
            println!(
                "seed {seed} {:<6} max relative error {:.2e}",
                line.loss, line.max_rel_error
            );
            assert!(line.max_rel_error < GRADCHECK_TOLERANCE);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
