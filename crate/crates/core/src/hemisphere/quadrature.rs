//! Product Gauss rules on spheres and on the closed upper hemisphere.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes `(x, t)` on the unit upper hemisphere `S^n_+` with positive weights.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub n: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly (to rounding for even `n`, to
    /// spectral accuracy for odd `n`).
    pub exactness_degree: usize,
}

/// `int_{-1}^{1} (1 - v^2)^alpha dv` for `alpha` a non-negative multiple of 1/2.
fn symmetric_jacobi_mass(alpha: f64) -> f64 {
    let twice = (2.0 * alpha).round() as i64;
    let (mut value, mut a) = if twice % 2 == 0 { (2.0, 0.0) } else { (std::f64::consts::FRAC_PI_2, 0.5) };
    while a < alpha - 1e-12 {
        a += 1.0;
        value *= 2.0 * a / (2.0 * a + 1.0);
    }
    value
}

/// Gauss-Jacobi nodes and weights on `[-1, 1]` for the weight
/// `(1 - v)^alpha (1 + v)^beta`, by the Golub-Welsch eigenvalue method.
/// Only `beta = 0` or `alpha = beta` (half-integers) are needed and supported.
pub fn gauss_jacobi(count: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(count > 0);
    let mass = if beta == 0.0 {
        2f64.powf(alpha + 1.0) / (alpha + 1.0)
    } else {
        assert!((alpha - beta).abs() < 1e-15, "unsupported Jacobi weight");
        symmetric_jacobi_mass(alpha)
    };
    let ab = alpha + beta;
    let mut jm = DMatrix::zeros(count, count);
    for k in 0..count {
        let kf = k as f64;
        jm[(k, k)] = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < count {
            let m = kf + 1.0;
            let s = 2.0 * m + ab;
            let off = (4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0))).sqrt();
            jm[(k, k + 1)] = off;
            jm[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..count)
        .map(|i| (eig.eigenvalues[i], mass * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Area of the unit sphere `S^m`.
pub fn sphere_area(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * std::f64::consts::PI,
        _ => sphere_area(m - 2) * 2.0 * std::f64::consts::PI / (m as f64 - 1.0),
    }
}

/// Area of the closed upper hemisphere `S^n_+`.
pub fn hemisphere_area(n: usize) -> f64 {
    0.5 * sphere_area(n)
}

/// Rule on `S^m` (points in `R^{m+1}`) exact for polynomials of degree `degree`,
/// invariant under every coordinate reflection.
pub fn sphere_rule(m: usize, degree: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if m == 1 {
        let mut count = degree + 1;
        if count % 2 == 1 {
            count += 1;
        }
        let w = 2.0 * std::f64::consts::PI / count as f64;
        let nodes = (0..count)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect();
        return (nodes, vec![w; count]);
    }
    assert!(m >= 2);
    let alpha = (m as f64 - 2.0) / 2.0;
    let (heights, hw) = gauss_jacobi((degree + 1).div_ceil(2), alpha, alpha);
    let (sub_nodes, sub_weights) = sphere_rule(m - 1, degree);
    let mut nodes = Vec::with_capacity(heights.len() * sub_nodes.len());
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (v, wv) in heights.iter().zip(&hw) {
        let s = (1.0 - v * v).max(0.0).sqrt();
        for (y, wy) in sub_nodes.iter().zip(&sub_weights) {
            let mut p: Vec<f64> = y.iter().map(|c| c * s).collect();
            p.push(*v);
            nodes.push(p);
            weights.push(wv * wy);
        }
    }
    (nodes, weights)
}

/// Extra nodes used for odd `n`, where the polar weight is not polynomial.
const ODD_EXTRA_NODES: usize = 10;

/// Product rule on `S^n_+`: a Gauss-Jacobi rule in the height `t` times a
/// sphere rule on the equatorial `S^{n-1}`.
pub fn hemisphere_rule(n: usize, degree: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::Configuration(format!("hemisphere rule needs n >= 2, got {n}")));
    }
    let a = (n as f64 - 2.0) / 2.0;
    let count = if n % 2 == 0 {
        (degree + (n - 2) / 2 + 1).div_ceil(2)
    } else {
        (degree + 1).div_ceil(2) + ODD_EXTRA_NODES
    };
    let (v, w) = gauss_jacobi(count, a, 0.0);
    let scale = 2f64.powf(-a - 1.0);
    let (eq_nodes, eq_weights) = sphere_rule(n - 1, degree);
    let mut nodes = Vec::with_capacity(count * eq_nodes.len());
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (vk, wk) in v.iter().zip(&w) {
        let u = 0.5 * (vk + 1.0);
        let wu = wk * scale * (1.0 + u).powf(a);
        let s = (1.0 - u * u).max(0.0).sqrt();
        for (y, wy) in eq_nodes.iter().zip(&eq_weights) {
            let mut p: Vec<f64> = y.iter().map(|c| c * s).collect();
            p.push(u);
            nodes.push(p);
            weights.push(wu * wy);
        }
    }
    Ok(QuadratureRule { n, nodes, weights, exactness_degree: degree })
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum in node order.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn legendre_nodes() {
        let (x, w) = gauss_jacobi(2, 0.0, 0.0);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_moments() {
        // int (1-v)^{1/2} v^2 dv over [-1,1] against a fine midpoint sum in u = sqrt(1-v)
        let (x, w) = gauss_jacobi(6, 0.5, 0.0);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m = 200_000;
        let s = 2f64.sqrt();
        let h = s / m as f64;
        let mut exact = 0.0;
        for i in 0..m {
            let u = (i as f64 + 0.5) * h;
            let v = 1.0 - u * u;
            exact += 2.0 * u * u * v * v * h;
        }
        assert!((q - exact).abs() < 1e-9, "{q} {exact}");
        let (_, w) = gauss_jacobi(5, 1.5, 1.5);
        assert!((w.iter().sum::<f64>() - 3.0 * PI / 8.0).abs() < 1e-14);
    }

    #[test]
    fn areas() {
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-14);
        for n in 2..=5 {
            let rule = hemisphere_rule(n, 12).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert!((total - hemisphere_area(n)).abs() < 1e-12, "n={n}: {total}");
            for p in &rule.nodes {
                let norm: f64 = p.iter().map(|v| v * v).sum();
                assert!((norm - 1.0).abs() < 1e-14);
                assert!(*p.last().unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn hemisphere_moments() {
        let rule = hemisphere_rule(2, 24).unwrap();
        assert!((rule.integrate(|p| p[0] * p[0]) - 2.0 * PI / 3.0).abs() < 1e-12);
        assert!((rule.integrate(|p| p[2] * p[0] * p[0]) - PI / 4.0).abs() < 1e-12);
        assert!(rule.integrate(|p| p[0]).abs() < 1e-14);
        assert!(rule.integrate(|p| p[0] * p[1]).abs() < 1e-14);
        // int t^7 over S^2_+ = 2 pi / 8
        assert!((rule.integrate(|p| p[2].powi(7)) - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_rule_exactness() {
        // int x^4 over S^2 = 4 pi / 5
        let (nodes, w) = sphere_rule(2, 8);
        let v: f64 = nodes.iter().zip(&w).map(|(p, w)| w * p[0].powi(4)).sum();
        assert!((v - 4.0 * PI / 5.0).abs() < 1e-13);
    }
}
