//! Fit the toy least-squares model with momentum SGD and compare against the
//! closed-form solution.
//!
//! ```bash
//! cargo run --example train_toy
//! ```

use percept::optim::{
    train_toy, write_loss_history, EpochRecord, LeastSquaresModel, OptimizerConfig, ParamVector,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Exactly fittable data: y = 2x + 1.
    let data: Vec<(f64, f64)> = (0..40)
        .map(|i| {
            let x = -1.0 + 2.0 * (i as f64) / 39.0;
            (x, 2.0 * x + 1.0)
        })
        .collect();

    let config = OptimizerConfig::new(0.05, 0.5, 4)?;
    let mut params = ParamVector::new(vec![0.0, 0.0]);
    let history = train_toy(&LeastSquaresModel, &data, &mut params, &config, 25, 7)?;

    for (i, loss) in history.iter().enumerate() {
        if i % 5 == 0 || i + 1 == history.len() {
            println!("epoch {:>2}: loss {loss:.3e}", i + 1);
        }
    }

    let (w, b) = LeastSquaresModel::closed_form(&data);
    println!(
        "trained ({:.6}, {:.6}) vs closed form ({:.6}, {:.6})",
        params.weights()[0],
        params.weights()[1],
        w,
        b
    );

    let rows: Vec<EpochRecord> = history
        .iter()
        .enumerate()
        .map(|(i, &loss)| EpochRecord {
            epoch: i + 1,
            box_loss: loss,
            object_loss: 0.0,
            class_loss: 0.0,
            precision: 0.0,
            recall: 0.0,
        })
        .collect();
    let path = std::env::temp_dir().join("percept_toy_history.csv");
    write_loss_history(std::fs::File::create(&path)?, &rows)?;
    println!("loss history written to {}", path.display());
    Ok(())
}
