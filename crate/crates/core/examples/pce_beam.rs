//! Stochastic Galerkin expansion of the random beam: moments against
//! sampling, and the buckling load across the stiffness defect.

use ecfm::experiments::beam::BeamSetup;
use ecfm::experiments::{ExperimentConfig, ExperimentKind};
use ecfm::pce::{critical_load, moments, solve_pointwise};
use ecfm::stats::Stream;
use nalgebra::DVector;

fn main() -> ecfm::Result<()> {
    let s = BeamSetup::new(&ExperimentConfig::defaults(ExperimentKind::BeamEcfm))?;
    println!("H0 = {:.4}", s.ops.h0);
    for w in [0.0, 0.5, 1.0] {
        println!("critical load at omega {w}: {:.4}", critical_load(&s.ops, w)?);
    }

    let (mu, var) = moments(&s.truth, &s.ops.measurement, &s.gram)?;
    let mut rng = Stream::new(1);
    let n = 20_000;
    let zero = DVector::zeros(s.points.len());
    let mut sum = DVector::zeros(mu.len());
    for _ in 0..n {
        sum += &s.ops.measurement * solve_pointwise(&s.ops, rng.uniform(), s.eps_truth, &zero)?;
    }
    let sampled = sum / n as f64;
    println!("{:>6} {:>10} {:>10} {:>10}", "x", "mean", "pointwise", "std");
    for i in 0..mu.len() {
        println!("{:>6.3} {:>10.5} {:>10.5} {:>10.5}", s.points[i], mu[i], sampled[i], var[i].sqrt());
    }
    Ok(())
}
