use crate::error::{Error, Result};

/// Tensor-product Gauss–Legendre rule on `[0, 1]` or `[0, 1]²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Flattened coordinates, `dimension` numbers per point.
    points: Vec<f64>,
    weights: Vec<f64>,
    dimension: usize,
}

impl QuadratureRule {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.dimension..(q + 1) * self.dimension]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks_exact(self.dimension)
            .zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, found by Newton iteration
/// on `P_n` from the Tricomi initial guesses.
pub fn gauss_legendre_reference(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, t);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = -t;
        nodes[n - 1 - i] = t;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(t), P_n'(t))` on `[-1, 1]`.
fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre_interval(order: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre_reference(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        t.iter().map(|ti| mid + half * ti).collect(),
        w.iter().map(|wi| half * wi).collect(),
    )
}

/// Composite Gauss rule: `order` points on each panel between consecutive
/// break points. Break points must be increasing.
pub fn composite_gauss(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(order * breaks.len());
    let mut weights = Vec::with_capacity(order * breaks.len());
    for win in breaks.windows(2) {
        if win[1] <= win[0] {
            continue;
        }
        let (x, w) = gauss_legendre_interval(order, win[0], win[1]);
        nodes.extend(x);
        weights.extend(w);
    }
    (nodes, weights)
}

/// Uniform panels on `[0, 1]` with extra break points spliced in.
pub fn panel_breaks(panels: usize, extra: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=panels).map(|i| i as f64 / panels as f64).collect();
    b.extend(extra.iter().copied().filter(|x| *x > 0.0 && *x < 1.0));
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    b
}

/// Gauss–Legendre rule on the unit interval or unit square.
pub fn gauss_legendre(order: usize, dimension: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be at least 1".into()));
    }
    let (x, w) = gauss_legendre_interval(order, 0.0, 1.0);
    match dimension {
        1 => Ok(QuadratureRule {
            points: x,
            weights: w,
            dimension: 1,
        }),
        2 => {
            let mut points = Vec::with_capacity(2 * order * order);
            let mut weights = Vec::with_capacity(order * order);
            for (xi, wi) in x.iter().zip(&w) {
                for (yj, wj) in x.iter().zip(&w) {
                    points.push(*xi);
                    points.push(*yj);
                    weights.push(wi * wj);
                }
            }
            Ok(QuadratureRule {
                points,
                weights,
                dimension: 2,
            })
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn single_point_rule_integrates_constant() {
        let rule = gauss_legendre(1, 1).unwrap();
        assert_relative_eq!(rule.integrate(|_| 1.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_point_rule_is_exact_for_cubics() {
        let rule = gauss_legendre(2, 1).unwrap();
        assert_relative_eq!(rule.integrate(|x| x[0] * x[0]), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(rule.integrate(|x| x[0].powi(3)), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn five_point_rule_integrates_sine_squared() {
        // ∫₀¹ sin²(πx) dx = 1/2; five points leave a 1.5e-5 error, ten reach round-off
        let f = |x: &[f64]| (PI * x[0]).sin().powi(2);
        let five = gauss_legendre(5, 1).unwrap().integrate(f);
        assert!((five - 0.5).abs() < 2e-5, "{five}");
        let ten = gauss_legendre(10, 1).unwrap().integrate(f);
        assert!((ten - 0.5).abs() < 1e-10, "{ten}");
    }

    #[test]
    fn weights_sum_to_domain_measure() {
        for order in [1, 3, 8, 40, 200] {
            for dim in [1, 2] {
                let rule = gauss_legendre(order, dim).unwrap();
                let s: f64 = rule.weights().iter().sum();
                assert_relative_eq!(s, 1.0, epsilon = 1e-13);
                assert!(rule.weights().iter().all(|w| *w > 0.0));
            }
        }
    }

    #[test]
    fn polynomial_exactness_up_to_two_n_minus_one() {
        for order in 1..=20usize {
            let rule = gauss_legendre(order, 1).unwrap();
            for deg in 0..(2 * order) {
                let exact = 1.0 / (deg as f64 + 1.0);
                let v = rule.integrate(|x| x[0].powi(deg as i32));
                assert!(((v - exact) / exact).abs() < 1e-12, "order {order} degree {deg}: {v}");
            }
        }
    }

    #[test]
    fn tensor_rule_is_exact_for_bivariate_polynomials() {
        let rule = gauss_legendre(3, 2).unwrap();
        let v = rule.integrate(|p| p[0].powi(5) * p[1].powi(4));
        assert_relative_eq!(v, 1.0 / 30.0, epsilon = 1e-14);
    }

    #[test]
    fn unsupported_dimension_is_rejected() {
        assert!(matches!(gauss_legendre(3, 3), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn composite_rule_respects_breaks() {
        let breaks = panel_breaks(4, &[0.3]);
        assert_eq!(breaks, vec![0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
        let (x, w) = composite_gauss(&breaks, 4);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * (x - 0.3).abs()).sum();
        // |x - 0.3| has its kink on a panel edge, so the rule is exact
        assert_relative_eq!(v, 0.5 * 0.09 + 0.5 * 0.49, epsilon = 1e-15);
    }
}
