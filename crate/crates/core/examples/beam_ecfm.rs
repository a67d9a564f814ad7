//! Penalized likelihood recovery of the beam load from replicated
//! measurements.

use ecfm::experiments::beam::{run_beam_with, BeamSetup};
use ecfm::experiments::{ExperimentConfig, ExperimentKind};

fn main() -> ecfm::Result<()> {
    let config = ExperimentConfig::defaults(ExperimentKind::BeamEcfm);
    let setup = BeamSetup::new(&config)?;
    for seed in 0..5 {
        let (data, omegas) = setup.generate_data(seed, config.discretization.replicates)?;
        let r = run_beam_with(&config, &setup, &data, &omegas)?.report;
        println!(
            "seed {seed}: eps = {:.4}  expected error {:.3e}  |lambda| {:.1e}  ({} iterations)",
            r.recovered_params[0],
            r.metric("expected_error").unwrap_or(f64::NAN),
            r.metric("lambda_norm").unwrap_or(f64::NAN),
            r.iterations
        );
    }
    Ok(())
}
