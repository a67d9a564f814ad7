//! Fisher-KPP with a misspecified source: both programs on the same noisy
//! data, for a few seeds.

use ecfm::experiments::kpp::{run_kpp_with, KppSetup};
use ecfm::experiments::{ExperimentConfig, ExperimentKind};

fn main() -> ecfm::Result<()> {
    let inv = ExperimentConfig::defaults(ExperimentKind::KppInv);
    let ecfm = ExperimentConfig::defaults(ExperimentKind::KppEcfm);
    let setup = KppSetup::new(&ecfm)?;
    println!("{:>4} {:>10} {:>10} {:>10} {:>10}", "seed", "inv", "ecfm", "src", "src+forces");
    for seed in 0..3 {
        let data = setup.measure(ecfm.noise.sigma, seed);
        let a = run_kpp_with(&inv, &setup, &data)?.report;
        let b = run_kpp_with(&ecfm, &setup, &data)?.report;
        let m = |r: &ecfm::experiments::ExperimentReport, k: &str| r.metric(k).unwrap_or(f64::NAN);
        println!(
            "{seed:>4} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e}",
            m(&a, "field_error"),
            m(&b, "field_error"),
            m(&b, "source_error"),
            m(&b, "source_plus_forces_error")
        );
    }
    Ok(())
}
