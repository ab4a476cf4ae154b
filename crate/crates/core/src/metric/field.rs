//! Pointwise evaluation of the rescaled metric on the half ball `B_2^+` and the
//! Laplace-Beltrami operator it defines.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metric::inverse::inverse_metric_series;
use crate::metric::jet::BoundaryJet;
use crate::series::MultiSeries;

/// Radius of the half ball on which rescaled quantities are evaluated.
pub const HALF_BALL_RADIUS: f64 = 2.0;

/// Inverse metric data at one point: `ginv[a][b]`, its partials `dginv[c][a][b]`,
/// and `log_sqrt_det[c] = d_c log sqrt(det g)`.
#[derive(Clone, Debug)]
pub struct MetricSample {
    pub ginv: DMatrix<f64>,
    pub dginv: Vec<DMatrix<f64>>,
    pub log_sqrt_det: Vec<f64>,
}

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

impl FieldJet {
    /// `rho = |X|^2 / 2`.
    pub fn rho(point: &[f64]) -> Self {
        let d = point.len();
        FieldJet {
            value: 0.5 * point.iter().map(|v| v * v).sum::<f64>(),
            grad: point.to_vec(),
            hess: DMatrix::identity(d, d),
        }
    }

    /// Pointwise square `f^2`.
    pub fn square(&self) -> Self {
        let g = nalgebra::DVector::from_column_slice(&self.grad);
        FieldJet {
            value: self.value * self.value,
            grad: self.grad.iter().map(|v| 2.0 * self.value * v).collect(),
            hess: &self.hess * (2.0 * self.value) + (&g * g.transpose()) * 2.0,
        }
    }
}

/// The inverse metric `g^{ab}(r X)` of one jet, ready for pointwise evaluation.
///
/// The normal row and column are trivial, so only the boundary block and its
/// partials are stored. Negative `r` is accepted through
/// [`MetricField::new_signed`] for difference quotients across `r = 0`.
#[derive(Clone, Debug)]
pub struct MetricField {
    n: usize,
    r: f64,
    block: Vec<MultiSeries<f64>>,
    partials: Vec<Vec<MultiSeries<f64>>>,
    trivial: bool,
}

impl MetricField {
    pub fn new(jet: &BoundaryJet<f64>, r: f64) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("rescaling radius must be >= 0, got {r}")));
        }
        Self::new_signed(jet, r)
    }

    pub fn new_signed(jet: &BoundaryJet<f64>, r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::Domain(format!("non-finite rescaling radius {r}")));
        }
        let n = jet.n;
        let full = inverse_metric_series(jet)?;
        let mut block = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                block.push(full.get(i, j).dilate_unchecked(&r));
            }
        }
        let trivial = r == 0.0 || full.is_identity();
        let partials = (0..=n)
            .map(|c| block.iter().map(|e| e.derive(c)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricField { n, r, block, partials, trivial })
    }

    /// The Euclidean metric in `n + 1` dimensions.
    pub fn euclidean(n: usize) -> Self {
        Self::new_signed(&BoundaryJet::zero(n), 0.0).expect("zero jet is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn is_euclidean(&self) -> bool {
        self.trivial
    }

    pub fn check_domain(point: &[f64]) -> Result<()> {
        let norm = point.iter().map(|v| v * v).sum::<f64>().sqrt();
        let t = *point.last().unwrap_or(&0.0);
        if !(norm < HALF_BALL_RADIUS) || t < -1e-12 || !norm.is_finite() {
            return Err(Error::Domain(format!("point {point:?} lies outside the half ball B_2^+")));
        }
        Ok(())
    }

    /// Inverse metric and derivative data at `point` (length `n + 1`).
    pub fn sample(&self, point: &[f64]) -> Result<MetricSample> {
        let d = self.n + 1;
        if point.len() != d {
            return Err(Error::Shape(format!("point of length {} in dimension {d}", point.len())));
        }
        Self::check_domain(point)?;
        if self.trivial {
            return Ok(MetricSample {
                ginv: DMatrix::identity(d, d),
                dginv: vec![DMatrix::zeros(d, d); d],
                log_sqrt_det: vec![0.0; d],
            });
        }
        let n = self.n;
        let mut ginv = DMatrix::identity(d, d);
        for i in 0..n {
            for j in 0..n {
                ginv[(i, j)] = self.block[i * n + j].eval_f64(point);
            }
        }
        let dginv: Vec<DMatrix<f64>> = self
            .partials
            .iter()
            .map(|p| {
                let mut m = DMatrix::zeros(d, d);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = p[i * n + j].eval_f64(point);
                    }
                }
                m
            })
            .collect();
        let inv = ginv
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Geometry(format!("inverse metric singular at {point:?}")))?;
        // det g = 1 / det g^{-1}, so d log sqrt(det g) = -tr(g d g^{-1}) / 2
        let log_sqrt_det = dginv.iter().map(|dg| -0.5 * (&inv * dg).trace()).collect();
        Ok(MetricSample { ginv, dginv, log_sqrt_det })
    }

    /// Laplace-Beltrami operator of the rescaled metric applied to a field at `point`.
    pub fn laplacian(&self, point: &[f64], f: &FieldJet) -> Result<f64> {
        let s = self.sample(point)?;
        Ok(laplacian_from_sample(&s, f))
    }
}

/// `g^{ab} f_ab + (d_a g^{ab} + g^{ab} d_a log sqrt(det g)) f_b`.
pub fn laplacian_from_sample(s: &MetricSample, f: &FieldJet) -> f64 {
    let d = f.grad.len();
    let mut acc = 0.0;
    for a in 0..d {
        for b in 0..d {
            acc += s.ginv[(a, b)] * f.hess[(a, b)];
            acc += (s.dginv[a][(a, b)] + s.ginv[(a, b)] * s.log_sqrt_det[a]) * f.grad[b];
        }
    }
    acc
}

/// Laplacian of `f` for the metric of `jet` rescaled by `r`, at `point`.
pub fn ambient_laplacian(jet: &BoundaryJet<f64>, r: f64, point: &[f64], f: &FieldJet) -> Result<f64> {
    MetricField::new(jet, r)?.laplacian(point, f)
}
