// Reverse-mode differentiation of a small softmax-regression loss,
// verified against central finite differences.
//
// cargo run --example autodiff

use hecvl::numerics::{finite_diff_check, Matrix, Tape};

fn loss_on(tape: &mut Tape, w: hecvl::numerics::Var, x: &Matrix) -> hecvl::Result<hecvl::numerics::Var> {
    let x = tape.constant(x.clone());
    let logits = tape.matmul(x, w)?;
    let probs = tape.softmax_rows(logits, 0.5)?;
    let target = tape.pick_per_row(probs, vec![0, 2])?;
    let logp = tape.log(target)?;
    let total = tape.sum(logp);
    Ok(tape.scale(total, -0.5))
}

pub fn run_example() -> hecvl::Result<()> {
    let x = Matrix::from_rows(&[[0.2, -1.0], [0.7, 0.4]])?;
    let w = Matrix::from_rows(&[[0.1, 0.3, -0.2], [-0.5, 0.25, 0.6]])?;

    let mut tape = Tape::new();
    let wv = tape.param(w.clone());
    let loss = loss_on(&mut tape, wv, &x)?;
    let value = tape.value(loss).get(0, 0);
    let grads = tape.backward(loss)?;
    let analytic = grads.get(wv).expect("w is trainable").clone();
    println!("loss = {value:.6}");
    println!("dL/dw = {:?}", analytic.data());

    let mut params = vec![w];
    let report = finite_diff_check(
        |p| {
            let mut t = Tape::new();
            let v = t.param(p[0].clone());
            let l = loss_on(&mut t, v, &x)?;
            Ok(t.value(l).get(0, 0))
        },
        &mut params,
        &[analytic],
        1e-6,
        0,
    )?;
    println!(
        "finite differences: max relative error {:.2e} over {} coordinates",
        report.max_rel_error, report.coords_checked
    );
    assert!(report.max_rel_error < 1e-6);
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
