//! Composite Gauss-Legendre quadrature on rectangles. Used by the validation
//! suites as the independent route against the closed-form criteria.

use crate::kernel::Domain;

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Per-dimension node/weight grid: `panels` composite intervals per
/// dimension, `order` Gauss points each.
fn axis_rule(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gn, gw) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (&t, &w) in gn.iter().zip(&gw) {
            xs.push(mid + 0.5 * h * t);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// ∫ f over a 1-d interval.
pub fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (xs, ws) = axis_rule(a, b, panels, order);
    xs.iter().zip(&ws).map(|(&x, &w)| w * f(x)).sum()
}

/// Tensor-grid integral of `f` over a rectangular domain.
pub fn integrate_tensor(
    domain: &Domain,
    f: impl Fn(&[f64]) -> f64,
    panels: usize,
    order: usize,
) -> f64 {
    let d = domain.dim();
    let rules: Vec<_> =
        domain.bounds().iter().map(|&(a, b)| axis_rule(a, b, panels, order)).collect();
    let counts: Vec<usize> = rules.iter().map(|(xs, _)| xs.len()).collect();
    let total: usize = counts.iter().product();
    let mut point = vec![0.0; d];
    let mut sum = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for k in 0..d {
            let idx = rem % counts[k];
            rem /= counts[k];
            point[k] = rules[k].0[idx];
            w *= rules[k].1[idx];
        }
        sum += w * f(&point);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // Order-n rule is exact through degree 2n-1.
        let (xs, ws) = gauss_legendre(5);
        let integral: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * x.powi(8)).sum();
        assert_relative_eq!(integral, 2.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn one_dim_gaussian_mass() {
        let v = integrate_1d(|x| (-x * x).exp(), -8.0, 8.0, 8, 24);
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn tensor_product_separates() {
        let domain = Domain::new(vec![(0.0, 1.0), (-1.0, 2.0)]).unwrap();
        let v = integrate_tensor(&domain, |p| p[0].exp() * p[1], 4, 16);
        let expect = (1.0_f64.exp() - 1.0) * (2.0 * 2.0 - 1.0) / 2.0;
        assert_relative_eq!(v, expect, epsilon = 1e-12);
    }
}
