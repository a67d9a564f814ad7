//! Forward sensitivities of both Burgers objectives against central
//! differences.

use ecfm::experiments::burgers::{BurgersSetup, Formulation};
use ecfm::experiments::{ExperimentConfig, ExperimentKind};

fn main() -> ecfm::Result<()> {
    let s = BurgersSetup::new(&ExperimentConfig::defaults(ExperimentKind::BurgersInv))?;
    let data = s.generate_data()?;
    let e = [1.3, 0.7];
    for form in [Formulation::Standard, Formulation::Ecfm] {
        let (z, g) = s.objective_and_gradient(&data, e, form)?;
        let h = 1e-4;
        let fd: Vec<f64> = (0..2)
            .map(|k| {
                let (mut p, mut m) = (e, e);
                p[k] += h;
                m[k] -= h;
                (s.objective(&data, p, form).unwrap() - s.objective(&data, m, form).unwrap()) / (2.0 * h)
            })
            .collect();
        println!("{form:?}: z = {z:.4e}  grad ({:.6e}, {:.6e})  fd ({:.6e}, {:.6e})", g[0], g[1], fd[0], fd[1]);
    }
    Ok(())
}
