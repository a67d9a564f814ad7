//! Assembles the Burgers operators and inspects their structure.

use ecfm::basis::BasisFamily;
use ecfm::experiments::burgers::source;
use ecfm::operators::assemble_burgers;
use ecfm::solvers::TimeGrid;

fn main() -> ecfm::Result<()> {
    let grid = TimeGrid::new(2.0, 100)?;
    let points = [0.2, 0.4, 0.6, 0.8];
    let ops = assemble_burgers(
        &BasisFamily::Sine1D { count: 12 },
        &BasisFamily::Hat1D { half_width: 0.2 },
        &points,
        source,
        &grid,
    )?;
    let off = |m: &nalgebra::DMatrix<f64>| {
        let mut d = m.clone();
        d.fill_diagonal(0.0);
        d.amax()
    };
    println!("mass diagonal {:.4?}", &ops.mass.diagonal().as_slice()[..4]);
    println!("stiffness diagonal {:.4?}", &ops.stiffness.diagonal().as_slice()[..4]);
    println!("largest off-diagonal entries: mass {:.1e}, stiffness {:.1e}", off(&ops.mass), off(&ops.stiffness));
    println!("constraint {}x{}, measurement {}x{}", ops.constraint.nrows(), ops.constraint.ncols(), ops.measurement.nrows(), ops.measurement.ncols());
    println!("source columns (time nodes) {}", ops.source.ncols());
    Ok(())
}
