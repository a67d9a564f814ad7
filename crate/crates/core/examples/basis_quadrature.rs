//! Basis families and Gauss–Legendre quadrature on the unit interval.

use ecfm::basis::quadrature::{composite_gauss, gauss_legendre};
use ecfm::basis::{eval_basis, eval_basis_dxx, eval_constraint_shape, BasisFamily};

fn main() -> ecfm::Result<()> {
    let sine = BasisFamily::Sine1D { count: 50 };
    let rule = gauss_legendre(110, 1)?;
    for (i, j) in [(1, 1), (3, 7), (50, 50)] {
        let g = rule.integrate(|x| eval_basis(&sine, i, x).unwrap() * eval_basis(&sine, j, x).unwrap());
        println!("<f_{i}, f_{j}> = {g:.3e}");
    }

    let beam = BasisFamily::ClampedBeamSine { count: 6 };
    for x in [0.0, 0.5, 1.0] {
        println!(
            "beam mode 2 at {x}: value {:+.4}  curvature {:+.4}",
            eval_basis(&beam, 2, &[x])?,
            eval_basis_dxx(&beam, 2, &[x])?
        );
    }

    let hat = BasisFamily::Hat1D { half_width: 0.2 };
    let (xs, ws) = composite_gauss(&[0.0, 0.2, 0.4, 0.6, 1.0], 4);
    let area: f64 = xs
        .iter()
        .zip(&ws)
        .map(|(x, w)| w * eval_constraint_shape(&hat, &[0.4], &[*x]).unwrap())
        .sum();
    println!("hat area {area:.12} (panels split at the kinks)");

    let legendre = BasisFamily::ShiftedLegendre { count: 4 };
    let rule = gauss_legendre(6, 1)?;
    let norms: Vec<f64> = (1..=4)
        .map(|k| rule.integrate(|w| eval_basis(&legendre, k, w).unwrap().powi(2)))
        .collect();
    println!("shifted Legendre norms {norms:.4?}");
    Ok(())
}
