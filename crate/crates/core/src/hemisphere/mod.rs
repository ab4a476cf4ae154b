//! Analysis on the closed upper hemisphere `S^n_+`: quadrature, the basis of
//! harmonics even in `t` (which satisfy the Neumann condition on the equator),
//! the Laplace-Beltrami operator, the Jacobi kernel spanned by `x^1..x^n`, and
//! the inverse of `L = -(Delta + n)` on its orthogonal complement.

pub mod basis;
pub mod quadrature;

use std::fmt;
use std::sync::Arc;

pub use quadrature::{hemisphere_area, hemisphere_rule, QuadratureRule};

use crate::error::{Error, Result};
use crate::series::MultiSeries;

/// Default maximal harmonic degree.
pub const DEFAULT_L_MAX: usize = 8;
/// Default polynomial exactness of the quadrature.
pub const DEFAULT_EXACTNESS: usize = 24;
/// Largest kernel component `solve_l` accepts.
pub const SOLVABILITY_TOLERANCE: f64 = 1e-10;

/// Basis, quadrature and node tables for one `(n, l_max, exactness)`.
pub struct Hemisphere {
    n: usize,
    l_max: usize,
    quadrature: QuadratureRule,
    functions: Vec<MultiSeries<f64>>,
    degrees: Vec<usize>,
    kernel_ids: Vec<usize>,
    kernel_scale: Vec<f64>,
    /// `values[b * nodes + q]` is basis function `b` at node `q`.
    values: Vec<f64>,
}

impl fmt::Debug for Hemisphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hemisphere")
            .field("n", &self.n)
            .field("l_max", &self.l_max)
            .field("basis", &self.functions.len())
            .field("nodes", &self.quadrature.len())
            .finish()
    }
}

/// Result of a discrete least-squares fit of node values.
#[derive(Clone, Debug)]
pub struct Projection {
    pub function: SurfaceFunction,
    /// Largest pointwise gap between the values and the fitted function.
    pub residual: f64,
}

impl Hemisphere {
    pub fn build(n: usize, l_max: usize, exactness: usize) -> Result<Arc<Self>> {
        if n < 2 {
            return Err(Error::Configuration(format!("hemisphere dimension must be >= 2, got {n}")));
        }
        if l_max < 2 {
            return Err(Error::Configuration(format!("l_max must be >= 2, got {l_max}")));
        }
        if exactness < 2 * l_max + 4 {
            return Err(Error::Configuration(format!(
                "quadrature exactness {exactness} is below 2 * l_max + 4 = {}",
                2 * l_max + 4
            )));
        }
        let quadrature = hemisphere_rule(n, exactness)?;
        let nq = quadrature.len();
        let w = &quadrature.weights;
        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum() };

        let mut functions = Vec::new();
        let mut degrees = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut kernel_ids = Vec::new();
        let mut kernel_scale = Vec::new();
        for k in 0..=l_max {
            let start = functions.len();
            for alpha in basis::degree_exponents(n, k) {
                let mut poly = basis::even_harmonic(&alpha, l_max)?;
                let mut vals: Vec<f64> = quadrature.nodes.iter().map(|p| poly.eval_f64(p)).collect();
                for _pass in 0..2 {
                    for b in start..functions.len() {
                        let e = &values[b * nq..(b + 1) * nq];
                        let c = dot(&vals, e);
                        for (v, ev) in vals.iter_mut().zip(e) {
                            *v -= c * ev;
                        }
                        poly.axpy(&-c, &functions[b])?;
                    }
                }
                let norm = dot(&vals, &vals).sqrt();
                if !(norm > 1e-8) {
                    return Err(Error::Numerical(format!(
                        "harmonic basis degenerate at degree {k} (norm {norm:e})"
                    )));
                }
                let inv = 1.0 / norm;
                vals.iter_mut().for_each(|v| *v *= inv);
                let poly = poly.scale(&inv);
                if k == 1 {
                    kernel_ids.push(functions.len());
                    let mut e = vec![0u8; n + 1];
                    e[kernel_ids.len() - 1] = 1;
                    kernel_scale.push(poly.coeff(&e));
                }
                values.extend_from_slice(&vals);
                functions.push(poly);
                degrees.push(k);
            }
        }
        Ok(Arc::new(Hemisphere { n, l_max, quadrature, functions, degrees, kernel_ids, kernel_scale, values }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn size(&self) -> usize {
        self.functions.len()
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quadrature
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.quadrature.nodes
    }

    pub fn node_count(&self) -> usize {
        self.quadrature.len()
    }

    pub fn degree(&self, b: usize) -> usize {
        self.degrees[b]
    }

    pub fn function(&self, b: usize) -> &MultiSeries<f64> {
        &self.functions[b]
    }

    /// Sphere eigenvalue `k (k + n - 1)` of member `b`.
    pub fn eigenvalue(&self, b: usize) -> f64 {
        let k = self.degrees[b] as f64;
        k * (k + self.n as f64 - 1.0)
    }

    pub fn kernel_ids(&self) -> &[usize] {
        &self.kernel_ids
    }

    pub fn basis_values(&self, b: usize) -> &[f64] {
        let nq = self.node_count();
        &self.values[b * nq..(b + 1) * nq]
    }

    /// `<x^1, x^1>` under the quadrature inner product.
    pub fn kernel_gram(&self) -> f64 {
        1.0 / (self.kernel_scale[0] * self.kernel_scale[0])
    }

    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        self.quadrature.integrate_values(values)
    }

    pub fn integrate_fn(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.quadrature.integrate(f)
    }

    /// Weighted least-squares fit of node values, which for an orthonormal basis
    /// is the quadrature inner product with every member.
    pub fn project_values(self: &Arc<Self>, values: &[f64]) -> Result<Projection> {
        let nq = self.node_count();
        if values.len() != nq {
            return Err(Error::Shape(format!("{} values for {nq} nodes", values.len())));
        }
        if let Some(q) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value at node {q}")));
        }
        let weighted: Vec<f64> = values.iter().zip(&self.quadrature.weights).map(|(v, w)| v * w).collect();
        let coeffs: Vec<f64> = (0..self.size())
            .map(|b| self.basis_values(b).iter().zip(&weighted).map(|(e, v)| e * v).sum())
            .collect();
        let function = SurfaceFunction { space: self.clone(), coeffs };
        let recon = function.node_values();
        let residual = recon.iter().zip(values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(Projection { function, residual })
    }

    /// Fit of a polynomial in `(x, t)` restricted to the hemisphere.
    pub fn project_polynomial(self: &Arc<Self>, p: &MultiSeries<f64>) -> Result<Projection> {
        let vals: Vec<f64> = self.nodes().iter().map(|q| p.eval_f64(q)).collect();
        self.project_values(&vals)
    }

    /// `<f, x^i> / <x^i, x^i>` from node values.
    pub fn project_k_values(&self, values: &[f64]) -> Vec<f64> {
        let gram = self.kernel_gram();
        (0..self.n)
            .map(|i| {
                self.quadrature
                    .nodes
                    .iter()
                    .zip(&self.quadrature.weights)
                    .zip(values)
                    .map(|((p, w), v)| w * v * p[i])
                    .sum::<f64>()
                    / gram
            })
            .collect()
    }

    pub fn zero(self: &Arc<Self>) -> SurfaceFunction {
        SurfaceFunction { space: self.clone(), coeffs: vec![0.0; self.size()] }
    }

    pub fn from_coeffs(self: &Arc<Self>, coeffs: Vec<f64>) -> Result<SurfaceFunction> {
        if coeffs.len() != self.size() {
            return Err(Error::Shape(format!("{} coefficients for a basis of {}", coeffs.len(), self.size())));
        }
        Ok(SurfaceFunction { space: self.clone(), coeffs })
    }

    /// Basis member `b` as a function.
    pub fn member(self: &Arc<Self>, b: usize) -> SurfaceFunction {
        let mut f = self.zero();
        f.coeffs[b] = 1.0;
        f
    }

    /// The restriction of the coordinate `x^i` (not normalized).
    pub fn kernel_member(self: &Arc<Self>, i: usize) -> SurfaceFunction {
        let mut f = self.zero();
        f.coeffs[self.kernel_ids[i]] = 1.0 / self.kernel_scale[i];
        f
    }

    pub fn constant(self: &Arc<Self>, c: f64) -> SurfaceFunction {
        let mut f = self.zero();
        f.coeffs[0] = c / self.functions[0].coeff_slot(0);
        f
    }
}

/// A function on `S^n_+` given by coefficients in the even harmonic basis.
#[derive(Clone)]
pub struct SurfaceFunction {
    space: Arc<Hemisphere>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for SurfaceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceFunction").field("coeffs", &self.coeffs).finish()
    }
}

impl PartialEq for SurfaceFunction {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.space, &other.space) && self.coeffs == other.coeffs
    }
}

impl SurfaceFunction {
    pub fn space(&self) -> &Arc<Hemisphere> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) {
            Ok(())
        } else {
            Err(Error::Shape("surface functions live in different bases".into()))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        SurfaceFunction {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        SurfaceFunction { space: self.space.clone(), coeffs: self.coeffs.iter().map(|c| c * k).collect() }
    }

    /// Quadrature `L^2` norm, equal to the coefficient norm.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Values at the quadrature nodes.
    pub fn node_values(&self) -> Vec<f64> {
        let nq = self.space.node_count();
        let mut out = vec![0.0; nq];
        for (b, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.space.basis_values(b)) {
                *o += c * v;
            }
        }
        out
    }

    /// Largest absolute value over the quadrature nodes.
    pub fn sup_norm(&self) -> f64 {
        self.node_values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at an arbitrary point of `R^{n+1}` (the harmonic polynomial).
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.space.functions)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, f)| c * f.eval_f64(point))
            .sum()
    }

    /// Homogeneous polynomial parts `p_0, ..., p_{l_max}`.
    pub fn degree_parts(&self) -> Result<Vec<MultiSeries<f64>>> {
        let d = self.space.n + 1;
        let mut parts = vec![MultiSeries::zero(d, self.space.l_max); self.space.l_max + 1];
        for (b, c) in self.coeffs.iter().enumerate() {
            if *c != 0.0 {
                parts[self.space.degrees[b]].axpy(c, &self.space.functions[b])?;
            }
        }
        Ok(parts)
    }

    pub fn integrate(&self) -> f64 {
        self.space.integrate_values(&self.node_values())
    }

    /// Coordinates in the kernel basis: `project_k(x^i) = e_i`.
    pub fn project_k(&self) -> Vec<f64> {
        self.space
            .kernel_ids
            .iter()
            .zip(&self.space.kernel_scale)
            .map(|(&id, s)| self.coeffs[id] * s)
            .collect()
    }

    /// Orthogonal projection onto the complement of the kernel.
    pub fn project_kperp(&self) -> Self {
        let mut out = self.clone();
        for &id in &self.space.kernel_ids {
            out.coeffs[id] = 0.0;
        }
        out
    }

    /// `sum_i project_k(f)_i x^i`.
    pub fn kernel_part(&self) -> Self {
        let mut out = self.space.zero();
        for &id in &self.space.kernel_ids {
            out.coeffs[id] = self.coeffs[id];
        }
        out
    }

    pub fn laplace_beltrami(&self) -> Self {
        let mut out = self.clone();
        for (b, c) in out.coeffs.iter_mut().enumerate() {
            *c *= -self.space.eigenvalue(b);
        }
        out
    }

    /// `L f = -(Delta + n) f`.
    pub fn apply_l(&self) -> Self {
        let n = self.space.n as f64;
        let mut out = self.clone();
        for (b, c) in out.coeffs.iter_mut().enumerate() {
            *c *= self.space.eigenvalue(b) - n;
        }
        out
    }

    /// The unique `phi` orthogonal to the kernel with `L phi = f`.
    pub fn solve_l(&self) -> Result<Self> {
        self.solve_l_with_tolerance(SOLVABILITY_TOLERANCE)
    }

    pub fn solve_l_with_tolerance(&self, tolerance: f64) -> Result<Self> {
        let kernel = self.project_k();
        if kernel.iter().any(|v| !(v.abs() <= tolerance)) {
            return Err(Error::Solvability { kernel, tolerance });
        }
        Ok(self.solve_l_on_kperp())
    }

    /// `L^{-1}` applied to the kernel-free part, without the solvability check.
    pub fn solve_l_on_kperp(&self) -> Self {
        let n = self.space.n as f64;
        let mut out = self.clone();
        for (b, c) in out.coeffs.iter_mut().enumerate() {
            let lambda = self.space.eigenvalue(b) - n;
            *c = if self.space.degrees[b] == 1 { 0.0 } else { *c / lambda };
        }
        out
    }
}
