//! Basis families, constraint-force shapes and quadrature.
//!
//! Indices are 1-based throughout, matching the usual `f_1 … f_N` labelling.

pub mod quadrature;

pub use quadrature::{composite_gauss, gauss_legendre, gauss_legendre_interval, panel_breaks, QuadratureRule};

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking that a coordinate lies in `[0, 1]`.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFamily {
    /// `sin(iπx)` on `[0, 1]`.
    Sine1D { count: usize },
    /// `sin(aπx) sin(bπy)` with `i - 1 = (a - 1)·per_axis + (b - 1)`.
    TensorSine2D { per_axis: usize },
    /// `sin((2i - 1)πx / 2)`: clamped at 0, free at 1.
    ClampedBeamSine { count: usize },
    /// Unnormalized Legendre polynomials shifted to `[0, 1]`, `P_0 = 1`, `P_1 = 2ω - 1`.
    ShiftedLegendre { count: usize },
    /// Finite-element hat of half-width `h`.
    Hat1D { half_width: f64 },
    /// `(ω/π) exp(-ω‖x - c‖²)` in two dimensions.
    GaussianRbf { width: f64 },
}

impl BasisFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BasisFamily::Sine1D { .. } => "Sine1D",
            BasisFamily::TensorSine2D { .. } => "TensorSine2D",
            BasisFamily::ClampedBeamSine { .. } => "ClampedBeamSine",
            BasisFamily::ShiftedLegendre { .. } => "ShiftedLegendre",
            BasisFamily::Hat1D { .. } => "Hat1D",
            BasisFamily::GaussianRbf { .. } => "GaussianRBF",
        }
    }

    /// Number of members; zero for the constraint-shape families.
    pub fn count(&self) -> usize {
        match *self {
            BasisFamily::Sine1D { count }
            | BasisFamily::ClampedBeamSine { count }
            | BasisFamily::ShiftedLegendre { count } => count,
            BasisFamily::TensorSine2D { per_axis } => per_axis * per_axis,
            BasisFamily::Hat1D { .. } | BasisFamily::GaussianRbf { .. } => 0,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            BasisFamily::TensorSine2D { .. } | BasisFamily::GaussianRbf { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_constraint_shape(&self) -> bool {
        matches!(self, BasisFamily::Hat1D { .. } | BasisFamily::GaussianRbf { .. })
    }

    fn check(&self, index: usize, x: &[f64]) -> Result<()> {
        if self.is_constraint_shape() {
            return Err(Error::InvalidArgument(format!(
                "{} is a constraint shape, use eval_constraint_shape",
                self.name()
            )));
        }
        let count = self.count();
        if index == 0 || index > count {
            return Err(Error::IndexOutOfRange { index, count });
        }
        if x.len() != self.dimension()
            || x.iter().any(|c| !c.is_finite() || *c < -DOMAIN_SLACK || *c > 1.0 + DOMAIN_SLACK)
        {
            return Err(Error::OutsideDomain {
                family: self.name(),
                coord: x.to_vec(),
            });
        }
        Ok(())
    }
}

/// Mode pair `(a, b)` of a tensor-sine index.
pub fn tensor_modes(per_axis: usize, index: usize) -> (usize, usize) {
    let k = index - 1;
    (k / per_axis + 1, k % per_axis + 1)
}

/// `d^n/dx^n sin(a x)`.
fn sine_derivative(a: f64, x: f64, n: usize) -> f64 {
    a.powi(n as i32) * (a * x + n as f64 * FRAC_PI_2).sin()
}

/// `P_n(t)`, `P_n'(t)`, `P_n''(t)` of the standard Legendre polynomial on `[-1, 1]`.
fn legendre_derivatives(n: usize, t: f64) -> [f64; 3] {
    // Derivatives obey the same style of recurrence:
    //   P_{k+1}^{(m)} = ((2k+1)(t P_k^{(m)} + m P_k^{(m-1)}) - k P_{k-1}^{(m)}) / (k+1)
    let mut prev = [0.0; 3];
    let mut cur = [1.0, 0.0, 0.0];
    for k in 0..n {
        let kf = k as f64;
        let mut next = [0.0; 3];
        for m in 0..3 {
            let lower = if m == 0 { 0.0 } else { cur[m - 1] };
            next[m] = ((2.0 * kf + 1.0) * (t * cur[m] + m as f64 * lower) - kf * prev[m]) / (kf + 1.0);
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// `∂^order f_index / ∂x_axis^order`, for `order ≤ 3` (any order for sine families).
pub fn eval_basis_partial(family: &BasisFamily, index: usize, x: &[f64], axis: usize, order: usize) -> Result<f64> {
    family.check(index, x)?;
    if axis >= family.dimension() {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} for a {}-dimensional family",
            family.dimension()
        )));
    }
    Ok(match *family {
        BasisFamily::Sine1D { .. } => sine_derivative(index as f64 * PI, x[0], order),
        BasisFamily::ClampedBeamSine { .. } => sine_derivative((2 * index - 1) as f64 * FRAC_PI_2, x[0], order),
        BasisFamily::TensorSine2D { per_axis } => {
            let (a, b) = tensor_modes(per_axis, index);
            let (da, db) = if axis == 0 { (order, 0) } else { (0, order) };
            sine_derivative(a as f64 * PI, x[0], da) * sine_derivative(b as f64 * PI, x[1], db)
        }
        BasisFamily::ShiftedLegendre { .. } => {
            if order > 2 {
                return Err(Error::InvalidArgument("Legendre derivatives above second order".into()));
            }
            let d = legendre_derivatives(index - 1, 2.0 * x[0] - 1.0);
            d[order] * 2f64.powi(order as i32)
        }
        BasisFamily::Hat1D { .. } | BasisFamily::GaussianRbf { .. } => unreachable!("rejected by check"),
    })
}

/// `f_index(x)`.
pub fn eval_basis(family: &BasisFamily, index: usize, x: &[f64]) -> Result<f64> {
    eval_basis_partial(family, index, x, 0, 0)
}

/// First derivative along the first coordinate.
pub fn eval_basis_dx(family: &BasisFamily, index: usize, x: &[f64]) -> Result<f64> {
    eval_basis_partial(family, index, x, 0, 1)
}

/// Second derivative along the first coordinate.
pub fn eval_basis_dxx(family: &BasisFamily, index: usize, x: &[f64]) -> Result<f64> {
    eval_basis_partial(family, index, x, 0, 2)
}

/// Value of a constraint-force shape centred at `center`.
pub fn eval_constraint_shape(family: &BasisFamily, center: &[f64], x: &[f64]) -> Result<f64> {
    if center.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "center has {} coordinates, point has {}",
            center.len(),
            x.len()
        )));
    }
    match *family {
        BasisFamily::Hat1D { half_width } => {
            if x.len() != 1 {
                return Err(Error::OutsideDomain {
                    family: family.name(),
                    coord: x.to_vec(),
                });
            }
            Ok((1.0 - (x[0] - center[0]).abs() / half_width).max(0.0))
        }
        BasisFamily::GaussianRbf { width } => {
            let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(width / PI * (-width * r2).exp())
        }
        _ => Err(Error::NotAConstraintFamily(family.name())),
    }
}

/// Slope of a hat shape; zero outside the support and at the apex.
pub fn hat_slope(half_width: f64, center: f64, x: f64) -> f64 {
    let d = x - center;
    if d.abs() >= half_width || d == 0.0 {
        0.0
    } else {
        -d.signum() / half_width
    }
}
