// Accuracy, macro F1 and the confusion matrix for a toy prediction set.
//
// cargo run --example metrics

use hecvl::zeroshot::{compute_metrics, render_table, TableRow};

pub fn run_example() -> hecvl::Result<()> {
    let truth = [0, 0, 0, 1, 1, 2, 2, 2, 2];
    let predicted = [0, 0, 1, 1, 1, 2, 0, 2, 2];
    let r = compute_metrics(&predicted, &truth, &[0, 1, 2])?;
    println!("accuracy {:.4}, macro F1 {:.4}", r.accuracy, r.macro_f1);
    for c in &r.per_class {
        println!(
            "class {}: precision {:.3} recall {:.3} f1 {:.3} (support {})",
            c.label, c.precision, c.recall, c.f1, c.support
        );
    }
    println!("confusion (rows = truth): {:?}", r.confusion);
    print!(
        "{}",
        render_table(&[TableRow {
            model: "toy".into(),
            dataset: "none".into(),
            accuracy: r.accuracy,
            f1: r.macro_f1,
        }])
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
