// AdamW minimizing an ill-conditioned quadratic.
//
// cargo run --example adamw

use hecvl::numerics::Matrix;
use hecvl::trainer::{adamw_step, AdamW, OptimizerState};

pub fn run_example() -> hecvl::Result<()> {
    let scales = [100.0, 1.0, 0.01];
    let mut x = Matrix::row_vector(&[1.0, -2.0, 3.0]);
    let hp = AdamW {
        lr: 0.05,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
        weight_decay: 0.0,
    };
    let mut state = OptimizerState::new([&x]);
    let f = |x: &Matrix| -> f64 { x.data().iter().zip(scales).map(|(v, s)| 0.5 * s * v * v).sum() };
    println!("step 0: f = {:.6}", f(&x));
    for step in 1..=600 {
        let g = Matrix::row_vector(&x.data().iter().zip(scales).map(|(v, s)| s * v).collect::<Vec<_>>());
        adamw_step(&mut [&mut x], &[&g], &mut state, &hp)?;
        if step % 150 == 0 {
            println!("step {step}: f = {:.6}  x = {:?}", f(&x), x.data());
        }
    }
    assert!(f(&x) < 1e-3);
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
