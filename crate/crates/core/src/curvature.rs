//! Mean curvature of radial graphs over the unit upper hemisphere in the
//! rescaled metric, its second-order expansion in `r`, and derivatives in the
//! graph direction.
//!
//! The graph of `s phi` is the level set `F = 1/2` of
//! `F = rho - s phibar - s^2 phibar^2 / 2`, where `rho = |X|^2 / 2` and `phibar`
//! is the degree-zero homogeneous extension of `phi`. Its mean curvature with
//! respect to the outward normal is `div(grad F / |grad F|)`.

use nalgebra::DMatrix;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hemisphere::{Hemisphere, SurfaceFunction};
use crate::metric::{laplacian_from_sample, BoundaryJet, FieldJet, MetricField};
use crate::series::MultiSeries;
use std::sync::Arc;

/// Largest admissible `|s phi|` at a node.
pub const GRAPH_BOUND: f64 = 0.5;
/// Steps in the graph direction for difference quotients.
pub const GRAPH_STEPS: [f64; 2] = [1e-4, 5e-5];
/// Steps in `r` for difference quotients.
pub const RADIUS_STEPS: [f64; 2] = [1e-3, 5e-4];

/// Node values of a field on `S^n_+` together with their basis projection.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub values: Vec<f64>,
    pub function: SurfaceFunction,
    /// Largest gap between `values` and the projection at the nodes.
    pub residual: f64,
    pub r: f64,
    pub s: f64,
}

impl CurvatureField {
    pub fn from_values(space: &Arc<Hemisphere>, values: Vec<f64>, r: f64, s: f64) -> Result<Self> {
        let p = space.project_values(&values)?;
        Ok(CurvatureField { values, function: p.function, residual: p.residual, r, s })
    }

    /// `max |values - c|`.
    pub fn deviation_from(&self, c: f64) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max((v - c).abs()))
    }
}

/// The degree-zero homogeneous extension `phibar(X) = phi(X / |X|)` with
/// analytic first and second partials.
#[derive(Clone, Debug)]
pub struct HomogeneousExtension {
    d: usize,
    p: MultiSeries<f64>,
    e: MultiSeries<f64>,
    k2: MultiSeries<f64>,
    grad_p: Vec<MultiSeries<f64>>,
    grad_e: Vec<MultiSeries<f64>>,
    hess_p: Vec<MultiSeries<f64>>,
}

pub fn extend_homogeneous(phi: &SurfaceFunction) -> Result<HomogeneousExtension> {
    let parts = phi.degree_parts()?;
    let d = phi.space().n() + 1;
    let bound = phi.space().l_max();
    let mut p = MultiSeries::zero(d, bound);
    let mut e = MultiSeries::zero(d, bound);
    let mut k2 = MultiSeries::zero(d, bound);
    for (k, part) in parts.iter().enumerate() {
        let kf = k as f64;
        p.axpy(&1.0, part)?;
        e.axpy(&kf, part)?;
        k2.axpy(&(kf * (kf + 2.0)), part)?;
    }
    let grad_p = (0..d).map(|a| p.derive(a)).collect::<Result<Vec<_>>>()?;
    let grad_e = (0..d).map(|a| e.derive(a)).collect::<Result<Vec<_>>>()?;
    let mut hess_p = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            hess_p.push(grad_p[a].derive(b)?);
        }
    }
    Ok(HomogeneousExtension { d, p, e, k2, grad_p, grad_e, hess_p })
}

impl HomogeneousExtension {
    /// Value, gradient and Hessian at `point != 0`.
    pub fn jet(&self, point: &[f64]) -> Result<FieldJet> {
        if point.len() != self.d {
            return Err(Error::Shape(format!("point of length {} in dimension {}", point.len(), self.d)));
        }
        let lambda = point.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(lambda > 1e-300) || !lambda.is_finite() {
            return Err(Error::Domain(format!("homogeneous extension undefined at {point:?}")));
        }
        let w: Vec<f64> = point.iter().map(|v| v / lambda).collect();
        let mut j = self.unit_jet(&w);
        j.grad.iter_mut().for_each(|g| *g /= lambda);
        j.hess /= lambda * lambda;
        Ok(j)
    }

    /// Jet at a unit vector `w`: with `P = sum p_k`, `E = sum k p_k` and
    /// `K = sum k (k + 2) p_k`,
    /// `grad = grad P - E w` and
    /// `hess = Hess P - (grad E w^T + w grad E^T) - E I + K w w^T`.
    fn unit_jet(&self, w: &[f64]) -> FieldJet {
        let d = self.d;
        let e = self.e.eval_f64(w);
        let k2 = self.k2.eval_f64(w);
        let ge: Vec<f64> = self.grad_e.iter().map(|s| s.eval_f64(w)).collect();
        let grad = (0..d).map(|a| self.grad_p[a].eval_f64(w) - e * w[a]).collect();
        let mut hess = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let mut v = self.hess_p[a * d + b].eval_f64(w) - ge[a] * w[b] - w[a] * ge[b] + k2 * w[a] * w[b];
                if a == b {
                    v -= e;
                }
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        FieldJet { value: self.p.eval_f64(w), grad, hess }
    }
}

/// Mean curvature of the graph of `s phi` in the metric of `jet` rescaled by `r`.
pub fn mean_curvature(jet: &BoundaryJet<f64>, r: f64, phi: &SurfaceFunction, s: f64) -> Result<CurvatureField> {
    let field = MetricField::new(jet, r)?;
    mean_curvature_in(&field, phi, s)
}

pub fn mean_curvature_in(field: &MetricField, phi: &SurfaceFunction, s: f64) -> Result<CurvatureField> {
    let values = mean_curvature_values(field, phi, s)?;
    CurvatureField::from_values(phi.space(), values, field.r(), s)
}

/// Node values of the mean curvature, without projection.
pub fn mean_curvature_values(field: &MetricField, phi: &SurfaceFunction, s: f64) -> Result<Vec<f64>> {
    let space = phi.space();
    if field.n() != space.n() {
        return Err(Error::Shape(format!("metric of dimension {} on S^{}_+", field.n(), space.n())));
    }
    if !s.is_finite() {
        return Err(Error::Domain(format!("non-finite graph scale {s}")));
    }
    let ext = extend_homogeneous(phi)?;
    let phi_nodes = phi.node_values();
    #[cfg(feature = "parallel")]
    let pairs = space.nodes().par_iter().zip(phi_nodes.par_iter());
    #[cfg(not(feature = "parallel"))]
    let pairs = space.nodes().iter().zip(phi_nodes.iter());
    pairs.map(|(w, &f)| node_curvature(field, &ext, w, f, s)).collect()
}

fn node_curvature(field: &MetricField, ext: &HomogeneousExtension, w: &[f64], phi: f64, s: f64) -> Result<f64> {
    let sp = s * phi;
    if !(sp.abs() <= GRAPH_BOUND) {
        return Err(Error::Domain(format!(
            "graph height {sp} at {w:?} exceeds the embedding bound {GRAPH_BOUND}"
        )));
    }
    let d = w.len();
    let x: Vec<f64> = w.iter().map(|v| (1.0 + sp) * v).collect();
    let sample = field.sample(&x)?;
    let rho = FieldJet::rho(&x);
    let pb = ext.jet(&x)?;
    let pb2 = pb.square();

    let lap = laplacian_from_sample(&sample, &rho)
        - s * laplacian_from_sample(&sample, &pb)
        - 0.5 * s * s * laplacian_from_sample(&sample, &pb2);

    let k = s * (1.0 + s * pb.value);
    let fa: Vec<f64> = (0..d).map(|a| x[a] - k * pb.grad[a]).collect();
    let mut fab = DMatrix::<f64>::identity(d, d);
    for a in 0..d {
        for b in 0..d {
            fab[(a, b)] -= k * pb.hess[(a, b)] + s * s * pb.grad[a] * pb.grad[b];
        }
    }
    let g = &sample.ginv;
    let mut psi2 = 0.0;
    let mut gf = vec![0.0; d];
    for a in 0..d {
        for b in 0..d {
            gf[a] += g[(a, b)] * fa[b];
        }
        psi2 += gf[a] * fa[a];
    }
    if !(psi2 > 0.0) {
        return Err(Error::Geometry(format!("degenerate graph normal at {w:?} (|grad F|^2 = {psi2:e})")));
    }
    let psi = psi2.sqrt();
    let mut correction = 0.0;
    for c in 0..d {
        let mut dq = 0.0;
        for a in 0..d {
            for b in 0..d {
                dq += sample.dginv[c][(a, b)] * fa[a] * fa[b];
            }
            dq += 2.0 * gf[a] * fab[(a, c)];
        }
        correction += gf[c] * dq / (2.0 * psi);
    }
    let h = lap / psi - correction / psi2;
    if !h.is_finite() {
        return Err(Error::Numerical(format!("non-finite mean curvature at {w:?}")));
    }
    Ok(h)
}

/// Which coefficients to use in the second-order expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionVariant {
    /// Coefficients that agree with direct evaluation to `O(r^3)`.
    Consistent,
    /// `(3n + 2)/2` for `t^2 (h_ij x_i x_j)^2` and `+1/3` for the boundary
    /// curvature term.
    Legacy,
}

/// `n + r H_1 + r^2 H_2` at the nodes, where `H_1 = h_ii t - (n + 3) h_ij t x_i x_j`.
pub fn h_expansion_r2(jet: &BoundaryJet<f64>, r: f64, space: &Arc<Hemisphere>) -> Result<CurvatureField> {
    h_expansion_r2_variant(jet, r, space, ExpansionVariant::Consistent)
}

pub fn h_expansion_r2_variant(
    jet: &BoundaryJet<f64>,
    r: f64,
    space: &Arc<Hemisphere>,
    variant: ExpansionVariant,
) -> Result<CurvatureField> {
    jet.validate()?;
    let n = jet.n;
    if n != space.n() {
        return Err(Error::Shape(format!("jet of dimension {n} on S^{}_+", space.n())));
    }
    let e = SecondOrderExpansion::new(jet, variant);
    let values = space.nodes().iter().map(|p| e.eval(r, p)).collect();
    CurvatureField::from_values(space, values, r, 0.0)
}

/// Coefficients of `n + r H_1 + r^2 H_2` for one jet, evaluable at any `(x, t)`.
#[derive(Clone, Debug)]
pub struct SecondOrderExpansion {
    n: usize,
    h: DMatrix<f64>,
    h1: Vec<f64>,
    trace: f64,
    h_sq: f64,
    quartic: f64,
    quad_t2: DMatrix<f64>,
    quad_rb: DMatrix<f64>,
    lin: Vec<f64>,
}

impl SecondOrderExpansion {
    pub fn new(jet: &BoundaryJet<f64>, variant: ExpansionVariant) -> Self {
        let n = jet.n;
        let nf = n as f64;
        let quartic = match variant {
            ExpansionVariant::Consistent => (3.0 * nf + 2.0) / 2.0 + 8.0,
            ExpansionVariant::Legacy => (3.0 * nf + 2.0) / 2.0,
        };
        let rb_sign = if variant == ExpansionVariant::Consistent { -1.0 } else { 1.0 };
        let h = DMatrix::from_fn(n, n, |i, j| *jet.h.at(&[i, j]));
        let hh = &h * &h;
        let trace = h.trace();
        let mut quad_t2 = DMatrix::zeros(n, n);
        let mut quad_rb = DMatrix::zeros(n, n);
        let mut lin = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                quad_t2[(i, j)] =
                    -(nf + 4.0) / 2.0 * jet.rtt.at(&[i, j]) - (3.0 * nf + 20.0) / 2.0 * hh[(i, j)] - h[(i, j)] * trace;
                quad_rb[(i, j)] = rb_sign / 3.0 * (0..n).map(|k| jet.rb.at(&[k, i, k, j])).sum::<f64>();
            }
            lin[i] = 2.0 * (0..n).map(|j| jet.h1.at(&[j, i, j])).sum::<f64>();
        }
        SecondOrderExpansion {
            n,
            h_sq: h.iter().map(|v| v * v).sum(),
            h,
            h1: jet.h1.data().to_vec(),
            trace,
            quartic,
            quad_t2,
            quad_rb,
            lin,
        }
    }

    pub fn eval(&self, r: f64, p: &[f64]) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let (x, t) = (&p[..n], p[n]);
        let mut hxx = 0.0;
        let mut qt2 = 0.0;
        let mut qrb = 0.0;
        let mut cubic = 0.0;
        for i in 0..n {
            for j in 0..n {
                let xx = x[i] * x[j];
                hxx += self.h[(i, j)] * xx;
                qt2 += self.quad_t2[(i, j)] * xx;
                qrb += self.quad_rb[(i, j)] * xx;
                for k in 0..n {
                    cubic += self.h1[(i * n + j) * n + k] * xx * x[k];
                }
            }
        }
        let first = self.trace * t - (nf + 3.0) * hxx * t;
        let lin_x: f64 = self.lin.iter().zip(x).map(|(a, b)| a * b).sum();
        let second = self.quartic * t * t * hxx * hxx - (nf + 4.0) * t * cubic + t * t * qt2 + qrb + lin_x * t
            + 2.0 * self.h_sq * t * t;
        nf + r * first + r * r * second
    }
}

fn richardson(coarse: &[f64], fine: &[f64]) -> Vec<f64> {
    coarse.iter().zip(fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(q) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what}: non-finite difference quotient at node {q}")));
    }
    Ok(())
}

/// Node values of `d/dr H(r, 0)` at `r = 0` by central differences across
/// `r = 0` with Richardson extrapolation.
pub fn h_r(jet: &BoundaryJet<f64>, space: &Arc<Hemisphere>) -> Result<CurvatureField> {
    let zero = space.zero();
    let quotient = |dr: f64| -> Result<Vec<f64>> {
        let plus = mean_curvature_values(&MetricField::new_signed(jet, dr)?, &zero, 0.0)?;
        let minus = mean_curvature_values(&MetricField::new_signed(jet, -dr)?, &zero, 0.0)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * dr)).collect())
    };
    let values = richardson(&quotient(RADIUS_STEPS[0])?, &quotient(RADIUS_STEPS[1])?);
    check_finite(&values, "H_r")?;
    CurvatureField::from_values(space, values, 0.0, 0.0)
}

/// `d/de H(r, phi0 + e psi)` at `e = 0`.
pub fn h_phi_linearized(
    jet: &BoundaryJet<f64>,
    r: f64,
    phi0: &SurfaceFunction,
    psi: &SurfaceFunction,
) -> Result<CurvatureField> {
    let field = MetricField::new(jet, r)?;
    let quotient = |e: f64| -> Result<Vec<f64>> {
        let plus = mean_curvature_values(&field, &phi0.add(&psi.scale(e))?, 1.0)?;
        let minus = mean_curvature_values(&field, &phi0.sub(&psi.scale(e))?, 1.0)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * e)).collect())
    };
    let values = richardson(&quotient(GRAPH_STEPS[0])?, &quotient(GRAPH_STEPS[1])?);
    check_finite(&values, "H_phi")?;
    CurvatureField::from_values(psi.space(), values, r, 0.0)
}

/// `d^2/(dr ds) H(r, s psi)` at `r = s = 0`.
pub fn h_phi_r_mixed(jet: &BoundaryJet<f64>, psi: &SurfaceFunction) -> Result<CurvatureField> {
    let quotient = |dr: f64, e: f64| -> Result<Vec<f64>> {
        let plus = MetricField::new_signed(jet, dr)?;
        let minus = MetricField::new_signed(jet, -dr)?;
        let pp = mean_curvature_values(&plus, psi, e)?;
        let pm = mean_curvature_values(&plus, psi, -e)?;
        let mp = mean_curvature_values(&minus, psi, e)?;
        let mm = mean_curvature_values(&minus, psi, -e)?;
        Ok((0..pp.len()).map(|q| (pp[q] - pm[q] - mp[q] + mm[q]) / (4.0 * dr * e)).collect())
    };
    let values = richardson(
        &quotient(RADIUS_STEPS[0], GRAPH_STEPS[0])?,
        &quotient(RADIUS_STEPS[1], GRAPH_STEPS[1])?,
    );
    check_finite(&values, "H_phi_r")?;
    CurvatureField::from_values(psi.space(), values, 0.0, 0.0)
}

/// A legacy closed form of the mixed derivative, with the factor
/// `d_t phibar (h_ii + t h_ij x^i x^j)`. Diagnostic only.
pub fn h_phi_r_legacy(jet: &BoundaryJet<f64>, psi: &SurfaceFunction) -> Result<CurvatureField> {
    let space = psi.space();
    let n = space.n();
    if jet.n != n {
        return Err(Error::Shape(format!("jet of dimension {} on S^{n}_+", jet.n)));
    }
    let ext = extend_homogeneous(psi)?;
    let lap = psi.laplace_beltrami().node_values();
    let vals = psi.node_values();
    let h = |i: usize, j: usize| *jet.h.at(&[i, j]);
    let trace: f64 = (0..n).map(|i| h(i, i)).sum();
    let values = space
        .nodes()
        .iter()
        .enumerate()
        .map(|(q, p)| -> Result<f64> {
            let fj = ext.jet(p)?;
            let t = p[n];
            let mut first = 0.0;
            let mut second = 0.0;
            let mut hxx = 0.0;
            for i in 0..n {
                for j in 0..n {
                    first += fj.grad[i] * h(i, j) * p[j];
                    second += fj.hess[(i, j)] * h(i, j);
                    hxx += h(i, j) * p[i] * p[j];
                }
            }
            Ok(2.0 * first * (t * t * t + t * t + n as f64 * t) - 2.0 * second * t
                + fj.grad[n] * (trace + t * hxx)
                + (lap[q] + 3.0 * vals[q]) * hxx * t
                - vals[q] * hxx * t * t)
        })
        .collect::<Result<Vec<_>>>()?;
    CurvatureField::from_values(space, values, 0.0, 0.0)
}

/// `2n psi^2 - (n - 2) |grad phibar|^2` at `r = 0`, the second variation
/// without its `4 psi Delta psi` term.
pub fn h_phi_phi(psi: &SurfaceFunction) -> Result<CurvatureField> {
    second_variation(psi, false)
}

/// The second variation at `r = 0` including the term `4 psi Delta psi`:
/// `2n psi^2 + 4 psi Delta psi - (n - 2) |grad phibar|^2`.
pub fn h_phi_phi_full(psi: &SurfaceFunction) -> Result<CurvatureField> {
    second_variation(psi, true)
}

fn second_variation(psi: &SurfaceFunction, full: bool) -> Result<CurvatureField> {
    let space = psi.space();
    let nf = space.n() as f64;
    let ext = extend_homogeneous(psi)?;
    let vals = psi.node_values();
    let lap = if full { psi.laplace_beltrami().node_values() } else { vec![0.0; vals.len()] };
    let values = space
        .nodes()
        .iter()
        .enumerate()
        .map(|(q, p)| -> Result<f64> {
            let g2: f64 = ext.jet(p)?.grad.iter().map(|g| g * g).sum();
            Ok(2.0 * nf * vals[q] * vals[q] + 4.0 * vals[q] * lap[q] - (nf - 2.0) * g2)
        })
        .collect::<Result<Vec<_>>>()?;
    CurvatureField::from_values(space, values, 0.0, 0.0)
}

/// `d^2/ds^2 H(0, s psi)` at `s = 0` by central differences.
pub fn h_phi_phi_fd(jet: &BoundaryJet<f64>, psi: &SurfaceFunction) -> Result<CurvatureField> {
    let field = MetricField::new(jet, 0.0)?;
    let centre = mean_curvature_values(&field, psi, 0.0)?;
    let quotient = |e: f64| -> Result<Vec<f64>> {
        let plus = mean_curvature_values(&field, psi, e)?;
        let minus = mean_curvature_values(&field, psi, -e)?;
        Ok((0..plus.len()).map(|q| (plus[q] - 2.0 * centre[q] + minus[q]) / (e * e)).collect())
    };
    let steps = [1e-3, 5e-4];
    let values = richardson(&quotient(steps[0])?, &quotient(steps[1])?);
    check_finite(&values, "H_phiphi")?;
    CurvatureField::from_values(psi.space(), values, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::random_jet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize) -> Arc<Hemisphere> {
        Hemisphere::build(n, 6, 16).unwrap()
    }

    #[test]
    fn round_spheres() {
        let s = space(2);
        let jet = BoundaryJet::zero(2);
        for r in [0.0, 0.1] {
            let h = mean_curvature(&jet, r, &s.zero(), 0.0).unwrap();
            assert!(h.deviation_from(2.0) < 1e-13);
            let h = mean_curvature(&jet, r, &s.constant(0.3), 1.0).unwrap();
            assert!(h.deviation_from(2.0 / 1.3) < 1e-12);
        }
        let s3 = space(3);
        let h = mean_curvature(&BoundaryJet::zero(3), 0.2, &s3.constant(-0.2), 1.0).unwrap();
        assert!(h.deviation_from(3.0 / 0.8) < 1e-12);
    }

    #[test]
    fn translated_sphere_is_round() {
        // |X - c e_1| = 1 is the graph of 1 + phi with
        // phi = c x_1 + sqrt(1 - c^2 (1 - x_1^2)) - 1, a non-polynomial function;
        // check the curvature only to the projection accuracy
        let s = Hemisphere::build(2, 8, 24).unwrap();
        let c = 0.05;
        let vals: Vec<f64> =
            s.nodes().iter().map(|p| c * p[0] + (1.0 - c * c * (1.0 - p[0] * p[0])).sqrt() - 1.0).collect();
        let fit = s.project_values(&vals).unwrap();
        assert!(fit.residual < 1e-12);
        let h = mean_curvature(&BoundaryJet::zero(2), 0.0, &fit.function, 1.0).unwrap();
        assert!(h.deviation_from(2.0) < 1e-9, "{}", h.deviation_from(2.0));
    }

    #[test]
    fn extension_is_homogeneous() {
        let s = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<f64> = (0..s.size()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let f = s.from_coeffs(coeffs).unwrap();
        let ext = extend_homogeneous(&f).unwrap();
        for p in [[0.3, -0.4, 0.7], [1.2, 0.1, 0.05], [0.0, 0.0, 1.5]] {
            let j = ext.jet(&p).unwrap();
            let radial: f64 = j.grad.iter().zip(&p).map(|(a, b)| a * b).sum();
            assert!(radial.abs() < 1e-12);
            // Euler for the gradient (degree -1): Hess X = -grad
            for a in 0..3 {
                let v: f64 = (0..3).map(|b| j.hess[(a, b)] * p[b]).sum::<f64>() + j.grad[a];
                assert!(v.abs() < 1e-11);
            }
            // finite differences
            let e = 1e-6;
            for a in 0..3 {
                let mut up = p;
                let mut dn = p;
                up[a] += e;
                dn[a] -= e;
                let fd = (ext.jet(&up).unwrap().value - ext.jet(&dn).unwrap().value) / (2.0 * e);
                assert!((fd - j.grad[a]).abs() < 1e-7);
            }
        }
        let x1 = ext_of(&s.kernel_member(0), &[2.0, 0.0, 0.0]);
        assert!((x1.value - 1.0).abs() < 1e-14);
        assert!(x1.grad.iter().all(|g| g.abs() < 1e-14));
        assert!(matches!(ext.jet(&[0.0, 0.0, 0.0]), Err(Error::Domain(_))));
    }

    fn ext_of(f: &SurfaceFunction, p: &[f64]) -> FieldJet {
        extend_homogeneous(f).unwrap().jet(p).unwrap()
    }

    #[test]
    fn square_laplacian_matches_product_rule() {
        let s = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let jet = random_jet::<f64, _>(&mut rng, 2, 4);
        let field = MetricField::new(&jet, 0.15).unwrap();
        let f = s.member(4).add(&s.member(9)).unwrap();
        let ext = extend_homogeneous(&f).unwrap();
        let p = [0.2, 0.5, 0.6];
        let sample = field.sample(&p).unwrap();
        let j = ext.jet(&p).unwrap();
        let direct = laplacian_from_sample(&sample, &j.square());
        let mut grad2 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                grad2 += sample.ginv[(a, b)] * j.grad[a] * j.grad[b];
            }
        }
        let expanded = 2.0 * j.value * laplacian_from_sample(&sample, &j) + 2.0 * grad2;
        assert!((direct - expanded).abs() < 1e-12);
    }

    #[test]
    fn expansion_at_the_pole() {
        let s = space(2);
        let jet = BoundaryJet::umbilic(2, 1.0);
        // (x, t) = (0, 1): n + r h_ii + 2 r^2 |h|^2
        let e = SecondOrderExpansion::new(&jet, ExpansionVariant::Consistent);
        assert!((e.eval(0.1, &[0.0, 0.0, 1.0]) - 2.24).abs() < 1e-15);
        let legacy = SecondOrderExpansion::new(&jet, ExpansionVariant::Legacy);
        assert!((legacy.eval(0.1, &[0.0, 0.0, 1.0]) - 2.24).abs() < 1e-15);
        assert_eq!(h_expansion_r2(&jet, 0.0, &s).unwrap().deviation_from(2.0), 0.0);
        assert!(h_expansion_r2(&BoundaryJet::zero(2), 0.2, &s).unwrap().deviation_from(2.0) == 0.0);
    }

    #[test]
    fn first_order_term_matches_difference_quotient() {
        let s = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let jet = random_jet::<f64, _>(&mut rng, 2, 4);
        let fd = h_r(&jet, &s).unwrap();
        let one = h_expansion_r2(&jet, 1.0, &s).unwrap();
        let zero_r2 = h_expansion_r2(&jet, -1.0, &s).unwrap();
        for q in 0..fd.values.len() {
            let first = (one.values[q] - zero_r2.values[q]) / 2.0;
            assert!((fd.values[q] - first).abs() < 1e-8, "{} {}", fd.values[q], first);
        }
    }

    #[test]
    fn linearization_at_zero() {
        let s = space(2);
        let jet = BoundaryJet::umbilic(2, 0.5);
        for b in [0, 1, 3, 7] {
            let psi = s.member(b);
            let fd = h_phi_linearized(&jet, 0.0, &s.zero(), &psi).unwrap();
            let exact = psi.apply_l().node_values();
            for (a, e) in fd.values.iter().zip(&exact) {
                assert!((a - e).abs() < 1e-7, "{b}: {a} {e}");
            }
        }
    }

    #[test]
    fn second_variation_matches_difference_quotient() {
        let s = space(2);
        let jet = BoundaryJet::zero(2);
        let psi = s.member(3).add(&s.member(6).scale(0.5)).unwrap();
        let fd = h_phi_phi_fd(&jet, &psi).unwrap();
        let full = h_phi_phi_full(&psi).unwrap();
        for (a, e) in fd.values.iter().zip(&full.values) {
            assert!((a - e).abs() < 1e-5, "{a} {e}");
        }
        let c = s.constant(0.7);
        let truncated = h_phi_phi(&c).unwrap();
        assert!(truncated.deviation_from(4.0 * 0.49) < 1e-12);
    }

    #[test]
    fn mixed_derivative_vanishes_for_flat_boundary() {
        let s = space(2);
        let psi = s.member(4);
        let m = h_phi_r_mixed(&BoundaryJet::zero(2), &psi).unwrap();
        assert!(m.deviation_from(0.0) < 1e-8);
        let p = h_phi_r_legacy(&BoundaryJet::zero(2), &psi).unwrap();
        assert_eq!(p.deviation_from(0.0), 0.0);
    }

    #[test]
    fn oversized_graph_is_rejected() {
        let s = space(2);
        let r = mean_curvature(&BoundaryJet::zero(2), 0.1, &s.constant(0.9), 1.0);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
