//! Both Burgers objectives on a coarse parameter grid; prints the minimum
//! cell of each.

use ecfm::experiments::{scan_loss_surface, ExperimentConfig, ExperimentKind, ScanAxis};

fn main() -> ecfm::Result<()> {
    let e1 = ScanAxis { lo: 1.5, hi: 2.0, count: 11 };
    let e2 = ScanAxis { lo: 0.75, hi: 1.25, count: 11 };
    for kind in [ExperimentKind::BurgersInv, ExperimentKind::BurgersEcfm] {
        let (table, failed) = scan_loss_surface(&ExperimentConfig::defaults(kind), e1, e2)?;
        let best = table
            .rows
            .iter()
            .min_by(|a, b| a[2].total_cmp(&b[2]))
            .expect("non-empty grid");
        println!(
            "{}: min {:.3e} at ({:.3}, {:.3}), {} failed points",
            kind.name(),
            best[2],
            best[0],
            best[1],
            failed.len()
        );
    }
    Ok(())
}
