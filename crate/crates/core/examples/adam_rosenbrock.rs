//! ADAM on the Rosenbrock function.

use ecfm::optimize::{adam_minimize, AdamConfig};

fn main() -> ecfm::Result<()> {
    let config = AdamConfig {
        learning_rate: 2e-2,
        epochs: 5000,
        ..AdamConfig::default()
    };
    let r = adam_minimize(
        |x| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((f, g))
        },
        &[-1.2, 1.0],
        &config,
    )?;
    println!("x = {:.5?} after {} epochs, f = {:.3e}", r.x, r.iterations, r.final_objective());
    Ok(())
}
