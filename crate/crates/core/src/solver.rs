//! Leaves of the foliation: the graph function on the complement of the
//! Jacobi kernel by a quasi-Newton iteration, the boundary offset `tau` by
//! Newton iteration on the kernel projection, continuation in `r`, and
//! verification of the resulting family.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{extend_homogeneous, h_r, mean_curvature_in, CurvatureField};
use crate::error::{Error, Result};
use crate::hemisphere::{Hemisphere, SurfaceFunction};
use crate::metric::model::{relative_min_eigenvalue, SINGULAR_THRESHOLD};
use crate::metric::{BoundaryJet, MetricField, MetricModel};

/// Largest admissible leaf radius.
pub const R_MAX: f64 = 0.25;
/// Largest `|tau|` treated as exactly zero by the slope fit.
pub const ZERO_TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverSettings {
    pub tol_perp: f64,
    pub tol_k: f64,
    pub max_iters: usize,
    /// Tolerance of the inner solve when the kernel projection is evaluated.
    pub inner_tol_perp: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol_perp: 1e-8, tol_k: 1e-7, max_iters: 40, inner_tol_perp: 1e-11 }
    }
}

/// Result of the solve on the complement of the kernel at fixed `(r, tau)`.
#[derive(Clone, Debug)]
pub struct KperpSolution {
    pub phi: SurfaceFunction,
    /// Sup norm of `P_perp(H - n)` (of the linearized residual at `r = 0`).
    pub kperp_residual: f64,
    /// `P~(H - n)`.
    pub kernel: Vec<f64>,
    pub iterations: usize,
    pub curvature: Option<CurvatureField>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafSolution {
    pub r: f64,
    pub tau: Vec<f64>,
    #[serde(skip)]
    pub phi: SurfaceFunction,
    pub kperp_residual: f64,
    /// `|P~(H - n)|`.
    pub kernel_residual: f64,
    /// `|P~(H - n)| / r^2` at the returned `tau`.
    pub reduced_residual: f64,
    pub newton_iters: usize,
    pub kperp_iters: usize,
    pub converged: bool,
}

/// How `tau` is chosen along the grid.
#[derive(Clone, Debug, PartialEq)]
pub enum TauMode {
    Solve,
    Pinned(Vec<f64>),
}

#[derive(Clone, Debug, Serialize)]
pub struct FoliationResult {
    pub leaves: Vec<LeafSolution>,
    /// Present when a leaf failed; the leaves before it are kept.
    pub failure: Option<String>,
    pub failure_kind: Option<&'static str>,
    pub diagnostics: Option<VerificationReport>,
}

impl FoliationResult {
    pub fn all_converged(&self) -> bool {
        self.failure.is_none() && self.leaves.iter().all(|l| l.converged)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Least-squares slope of `log |tau|` against `log r`; absent when `tau`
    /// vanishes identically along the grid.
    pub tau_slope_fit: Option<f64>,
    pub tau_max: f64,
    pub tau_identically_zero: bool,
    /// Minimum of `det(d_x1 Y, ..., d_xn Y, d_r Y)` over the samples.
    pub det_min: f64,
    /// Minimum of the same determinant divided by its Euclidean value `r^n / t`.
    pub det_min_normalized: f64,
    /// Largest angle in radians between the conormal and `-T` on the equator.
    pub free_boundary_max_angle: f64,
    pub samples: usize,
}

/// `P~(t x^1) . e_1`, the constant in the leading term `-c_n grad h` of the
/// reduced map.
pub fn moment_constant(space: &Hemisphere) -> f64 {
    let n = space.n();
    let vals: Vec<f64> = space.nodes().iter().map(|p| p[n] * p[0]).collect();
    space.project_k_values(&vals)[0]
}

/// Volume of the unit ball in `R^k`.
pub fn ball_volume(k: usize) -> f64 {
    crate::hemisphere::quadrature::sphere_area(k - 1) / k as f64
}

/// The closed form `2 w_n / ((n + 2) w_{n+1})` with `w_k` the unit-ball volume.
pub fn moment_constant_closed_form(n: usize) -> f64 {
    2.0 * ball_volume(n) / ((n as f64 + 2.0) * ball_volume(n + 1))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solver state for one model and one discretization.
#[derive(Clone, Debug)]
pub struct Solver {
    model: MetricModel,
    space: Arc<Hemisphere>,
    settings: SolverSettings,
    c_n: f64,
}

impl Solver {
    pub fn new(model: MetricModel, space: Arc<Hemisphere>, settings: SolverSettings) -> Result<Self> {
        if model.n() != space.n() {
            return Err(Error::Configuration(format!(
                "model dimension {} does not match the hemisphere S^{}_+",
                model.n(),
                space.n()
            )));
        }
        if !(settings.tol_perp > 0.0 && settings.tol_k > 0.0 && settings.inner_tol_perp > 0.0) {
            return Err(Error::Configuration("solver tolerances must be positive".into()));
        }
        let c_n = moment_constant(&space);
        Ok(Solver { model, space, settings, c_n })
    }

    pub fn model(&self) -> &MetricModel {
        &self.model
    }

    pub fn space(&self) -> &Arc<Hemisphere> {
        &self.space
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    fn check_radius(r: f64) -> Result<()> {
        if !(r >= 0.0 && r <= R_MAX) {
            return Err(Error::Domain(format!("leaf radius {r} outside [0, {R_MAX}]")));
        }
        Ok(())
    }

    /// `phi_0 = L^{-1} P_perp(-H_r(0, tau, 0))`.
    pub fn phi0(&self, tau: &[f64]) -> Result<SurfaceFunction> {
        let jet = self.model.jet_at(tau)?;
        self.phi0_for(&jet)
    }

    fn phi0_for(&self, jet: &BoundaryJet<f64>) -> Result<SurfaceFunction> {
        let hr = h_r(jet, &self.space)?;
        Ok(hr.function.project_kperp().scale(-1.0).solve_l_on_kperp())
    }

    pub fn solve_kperp(&self, r: f64, tau: &[f64], phi_init: Option<&SurfaceFunction>) -> Result<KperpSolution> {
        self.solve_kperp_to(r, tau, phi_init, self.settings.tol_perp)
    }

    fn solve_kperp_to(
        &self,
        r: f64,
        tau: &[f64],
        phi_init: Option<&SurfaceFunction>,
        tol: f64,
    ) -> Result<KperpSolution> {
        Self::check_radius(r)?;
        let jet = self.model.jet_at(tau)?;
        let n = self.space.n() as f64;
        if r == 0.0 {
            let hr = h_r(&jet, &self.space)?;
            let phi = hr.function.project_kperp().scale(-1.0).solve_l_on_kperp();
            let linear = phi.apply_l().add(&hr.function)?.project_kperp();
            return Ok(KperpSolution {
                phi,
                kperp_residual: linear.sup_norm(),
                kernel: vec![0.0; self.space.n()],
                iterations: 1,
                curvature: None,
            });
        }
        let mut phi = match phi_init {
            Some(p) => {
                if !Arc::ptr_eq(p.space(), &self.space) {
                    return Err(Error::Shape("initial graph function lives in another basis".into()));
                }
                p.project_kperp()
            }
            None => self.phi0_for(&jet)?,
        };
        let field = MetricField::new(&jet, r)?;
        let mut iterations = 0;
        loop {
            let h = mean_curvature_in(&field, &phi, r)?;
            let excess = h.function.sub(&self.space.constant(n))?;
            let perp = excess.project_kperp();
            let residual = perp.sup_norm();
            if residual <= tol {
                return Ok(KperpSolution {
                    phi,
                    kperp_residual: residual,
                    kernel: excess.project_k(),
                    iterations,
                    curvature: Some(h),
                });
            }
            if iterations >= self.settings.max_iters || !residual.is_finite() {
                return Err(Error::Continuation {
                    message: format!(
                        "graph solve at r = {r}, tau = {tau:?} did not converge; try a smaller radius step"
                    ),
                    residual,
                    iterations,
                });
            }
            phi = phi.sub(&perp.solve_l_on_kperp().scale(1.0 / r))?;
            iterations += 1;
        }
    }

    /// `F(r, tau) = P~(H(r, tau, r phi) - n) / r^2`, and `-c_n grad h(tau)` at `r = 0`.
    pub fn reduced_map(&self, r: f64, tau: &[f64]) -> Result<Vec<f64>> {
        Ok(self.reduced_map_warm(r, tau, None)?.0)
    }

    pub fn reduced_map_warm(
        &self,
        r: f64,
        tau: &[f64],
        phi_init: Option<&SurfaceFunction>,
    ) -> Result<(Vec<f64>, KperpSolution)> {
        let tol = self.settings.tol_perp.min(self.settings.inner_tol_perp);
        let sol = self.solve_kperp_to(r, tau, phi_init, tol)?;
        if r == 0.0 {
            let jet = self.model.jet_at(tau)?;
            let n = jet.n;
            let f = (0..n).map(|i| -self.c_n * (0..n).map(|j| jet.h1.at(&[j, j, i])).sum::<f64>()).collect();
            return Ok((f, sol));
        }
        let f = sol.kernel.iter().map(|v| v / (r * r)).collect();
        Ok((f, sol))
    }

    fn checked_jacobian(&self, tau: &[f64]) -> Result<DMatrix<f64>> {
        let hess = self.model.hmean_hess(tau)?;
        let rel = relative_min_eigenvalue(&hess);
        if !(rel > SINGULAR_THRESHOLD) {
            return Err(Error::Nondegeneracy(format!(
                "boundary mean curvature Hessian at tau = {tau:?} is singular (relative smallest eigenvalue {rel:e}, \
                 condition number {:e})",
                1.0 / rel
            )));
        }
        Ok(hess * (-self.c_n))
    }

    /// Newton iteration on the reduced map starting at `tau_init`.
    pub fn solve_tau(&self, r: f64, tau_init: &[f64]) -> Result<LeafSolution> {
        self.solve_tau_warm(r, tau_init, None)
    }

    pub fn solve_tau_warm(
        &self,
        r: f64,
        tau_init: &[f64],
        phi_init: Option<&SurfaceFunction>,
    ) -> Result<LeafSolution> {
        if tau_init.len() != self.space.n() {
            return Err(Error::Shape(format!("tau of length {} for n = {}", tau_init.len(), self.space.n())));
        }
        self.checked_jacobian(tau_init)?;
        let mut tau = tau_init.to_vec();
        let mut warm = phi_init.cloned();
        let mut newton_iters = 0;
        loop {
            let (f, sol) = self.reduced_map_warm(r, &tau, warm.as_ref())?;
            let fnorm = norm(&f);
            if fnorm <= self.settings.tol_k {
                return Ok(self.leaf(r, tau, sol, fnorm, newton_iters));
            }
            if newton_iters >= self.settings.max_iters || !fnorm.is_finite() {
                return Err(Error::Continuation {
                    message: format!("offset Newton iteration at r = {r} did not converge"),
                    residual: fnorm,
                    iterations: newton_iters,
                });
            }
            let jac = self.checked_jacobian(&tau)?;
            let step = jac
                .lu()
                .solve(&DVector::from_vec(f))
                .ok_or_else(|| Error::Nondegeneracy("offset Jacobian is not invertible".into()))?;
            for (t, s) in tau.iter_mut().zip(step.iter()) {
                *t -= s;
            }
            warm = Some(sol.phi);
            newton_iters += 1;
        }
    }

    /// Leaf at a fixed offset; only the solve on the complement of the kernel
    /// has to converge.
    pub fn solve_leaf_pinned(&self, r: f64, tau: &[f64], phi_init: Option<&SurfaceFunction>) -> Result<LeafSolution> {
        let sol = self.solve_kperp(r, tau, phi_init)?;
        let reduced = if r > 0.0 { norm(&sol.kernel) / (r * r) } else { 0.0 };
        let mut leaf = self.leaf(r, tau.to_vec(), sol, reduced, 0);
        leaf.converged = leaf.kperp_residual <= self.settings.tol_perp;
        Ok(leaf)
    }

    fn leaf(&self, r: f64, tau: Vec<f64>, sol: KperpSolution, reduced: f64, newton_iters: usize) -> LeafSolution {
        let kernel_residual = norm(&sol.kernel);
        let converged = sol.kperp_residual <= self.settings.tol_perp && kernel_residual <= self.settings.tol_k;
        LeafSolution {
            r,
            tau,
            phi: sol.phi,
            kperp_residual: sol.kperp_residual,
            kernel_residual,
            reduced_residual: reduced,
            newton_iters,
            kperp_iters: sol.iterations,
            converged,
        }
    }

    /// Continuation over an increasing grid of radii, warm-starting every leaf
    /// from the previous one. A failing leaf stops the run; the leaves before it
    /// are returned with the failure recorded.
    pub fn build_foliation(&self, grid: &[f64], mode: &TauMode, sample_density: usize) -> Result<FoliationResult> {
        if grid.is_empty() {
            return Err(Error::Configuration("empty radius grid".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Configuration("radius grid must be strictly increasing".into()));
        }
        for &r in grid {
            if !(r > 0.0 && r <= R_MAX) {
                return Err(Error::Configuration(format!("grid radius {r} outside (0, {R_MAX}]")));
            }
        }
        let n = self.space.n();
        if let TauMode::Pinned(t) = mode {
            if t.len() != n {
                return Err(Error::Configuration(format!("pinned tau of length {} for n = {n}", t.len())));
            }
        } else {
            self.checked_jacobian(&vec![0.0; n])?;
        }
        let mut leaves: Vec<LeafSolution> = Vec::with_capacity(grid.len());
        let mut failure = None;
        for &r in grid {
            let prev = leaves.last();
            let warm = prev.map(|l| &l.phi);
            let outcome = match mode {
                TauMode::Pinned(t) => self.solve_leaf_pinned(r, t, warm),
                TauMode::Solve => {
                    let start = prev.map(|l| l.tau.clone()).unwrap_or_else(|| vec![0.0; n]);
                    self.solve_tau_warm(r, &start, warm)
                }
            };
            match outcome {
                Ok(leaf) if leaf.converged => leaves.push(leaf),
                Ok(leaf) => {
                    failure = Some((
                        "continuation",
                        format!(
                            "leaf at r = {r} stopped with residuals {:e} / {:e}",
                            leaf.kperp_residual, leaf.kernel_residual
                        ),
                    ));
                    leaves.push(leaf);
                    break;
                }
                Err(e) => {
                    failure = Some((e.kind(), e.to_string()));
                    break;
                }
            }
        }
        let diagnostics = if leaves.len() >= 3 && failure.is_none() {
            Some(verify_leaves(&self.model, &self.space, &leaves, sample_density)?)
        } else {
            None
        };
        Ok(FoliationResult {
            leaves,
            failure_kind: failure.as_ref().map(|f| f.0),
            failure: failure.map(|f| f.1),
            diagnostics,
        })
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Diagnostics of a computed family: transversality determinant, free-boundary
/// angle and decay of `tau`.
pub fn verify_foliation(
    model: &MetricModel,
    space: &Arc<Hemisphere>,
    result: &FoliationResult,
    sample_density: usize,
) -> Result<VerificationReport> {
    verify_leaves(model, space, &result.leaves, sample_density)
}

/// Largest `|x|` of a determinant sample.
pub const SAMPLE_CAP: f64 = 0.95;

/// Points of the closed ball `|x| <= SAMPLE_CAP` on a tensor grid.
pub fn sample_points(n: usize, density: usize) -> Vec<Vec<f64>> {
    let m = density.max(2);
    let coord = |k: usize| -SAMPLE_CAP + 2.0 * SAMPLE_CAP * k as f64 / (m - 1) as f64;
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut flat| {
            (0..n)
                .map(|_| {
                    let c = coord(flat % m);
                    flat /= m;
                    c
                })
                .collect::<Vec<f64>>()
        })
        .filter(|x| norm(x) <= SAMPLE_CAP + 1e-12)
        .collect()
}

/// `Y(x) = tau + r (1 + r phi(x, t(x))) (x, t(x))` with `t(x) = sqrt(1 - |x|^2)`.
pub fn chart_point(leaf: &LeafSolution, x: &[f64]) -> Vec<f64> {
    let t = (1.0 - x.iter().map(|v| v * v).sum::<f64>()).max(0.0).sqrt();
    let mut p = x.to_vec();
    p.push(t);
    let scale = leaf.r * (1.0 + leaf.r * leaf.phi.eval(&p));
    let mut y: Vec<f64> = p.iter().map(|v| v * scale).collect();
    for (yi, ti) in y.iter_mut().zip(&leaf.tau) {
        *yi += ti;
    }
    y
}

/// Weights of the three-point derivative at `at` through the nodes `xs`.
fn three_point_weights(xs: [f64; 3], at: f64) -> [f64; 3] {
    let [a, b, c] = xs;
    [
        ((at - b) + (at - c)) / ((a - b) * (a - c)),
        ((at - a) + (at - c)) / ((b - a) * (b - c)),
        ((at - a) + (at - b)) / ((c - a) * (c - b)),
    ]
}

fn verify_leaves(
    model: &MetricModel,
    space: &Arc<Hemisphere>,
    leaves: &[LeafSolution],
    sample_density: usize,
) -> Result<VerificationReport> {
    if leaves.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "verification needs at least 3 leaves, got {}",
            leaves.len()
        )));
    }
    let n = space.n();
    let samples = sample_points(n, sample_density);
    let hx = 1e-6;
    #[cfg(feature = "parallel")]
    let indices = (0..leaves.len()).into_par_iter();
    #[cfg(not(feature = "parallel"))]
    let indices = 0..leaves.len();
    let per_leaf: Vec<Result<(f64, f64)>> = indices
        .map(|li| {
            let lo = li.saturating_sub(1).min(leaves.len() - 3);
            let trio = [&leaves[lo], &leaves[lo + 1], &leaves[lo + 2]];
            let leaf = &leaves[li];
            let w = three_point_weights([trio[0].r, trio[1].r, trio[2].r], leaf.r);
            let mut det_min = f64::INFINITY;
            let mut norm_min = f64::INFINITY;
            for x in &samples {
                let mut m = DMatrix::zeros(n + 1, n + 1);
                for i in 0..n {
                    let mut up = x.clone();
                    let mut dn = x.clone();
                    up[i] += hx;
                    dn[i] -= hx;
                    let (a, b) = (chart_point(leaf, &up), chart_point(leaf, &dn));
                    for k in 0..=n {
                        m[(k, i)] = (a[k] - b[k]) / (2.0 * hx);
                    }
                }
                let pts: Vec<Vec<f64>> = trio.iter().map(|l| chart_point(l, x)).collect();
                for k in 0..=n {
                    m[(k, n)] = (0..3).map(|j| w[j] * pts[j][k]).sum();
                }
                let det = m.determinant();
                let t = (1.0 - x.iter().map(|v| v * v).sum::<f64>()).sqrt();
                det_min = det_min.min(det);
                norm_min = norm_min.min(det * t / leaf.r.powi(n as i32));
            }
            Ok((det_min, norm_min))
        })
        .collect();
    let mut det_min = f64::INFINITY;
    let mut det_min_normalized = f64::INFINITY;
    for r in per_leaf {
        let (d, nm) = r?;
        det_min = det_min.min(d);
        det_min_normalized = det_min_normalized.min(nm);
    }

    let mut angle = 0.0f64;
    for leaf in leaves {
        let jet = model.jet_at(&leaf.tau)?;
        angle = angle.max(free_boundary_angle(&jet, leaf.r, &leaf.phi, sample_density.max(8) * 4)?);
    }

    let radii: Vec<f64> = leaves.iter().map(|l| l.r).collect();
    let taus: Vec<f64> = leaves.iter().map(|l| norm(&l.tau)).collect();
    let tau_max = taus.iter().fold(0.0f64, |m, v| m.max(*v));
    let tau_identically_zero = tau_max <= ZERO_TAU;
    let tau_slope_fit = if tau_identically_zero { None } else { loglog_slope(&radii, &taus) };
    Ok(VerificationReport {
        tau_slope_fit,
        tau_max,
        tau_identically_zero,
        det_min,
        det_min_normalized,
        free_boundary_max_angle: angle,
        samples: samples.len() * leaves.len(),
    })
}

/// Largest angle between the leaf's outward conormal along the equator and
/// `-T`, over `count` equator points in each coordinate plane. The leaf meets
/// `t = 0` along its boundary; the angle is `asin(|g(N, T)|)` with `N` the unit
/// normal, computed as `|F_t| / |grad F|` for the level-set function of the graph.
pub fn free_boundary_angle(jet: &BoundaryJet<f64>, r: f64, phi: &SurfaceFunction, count: usize) -> Result<f64> {
    let n = jet.n;
    let field = MetricField::new(jet, r)?;
    let ext = extend_homogeneous(phi)?;
    let mut points = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            for k in 0..count {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / count as f64;
                let mut p = vec![0.0; n + 1];
                p[a] = th.cos();
                p[b] = th.sin();
                points.push(p);
            }
        }
    }
    let mut worst = 0.0f64;
    for w in points {
        let f = phi.eval(&w);
        let x: Vec<f64> = w.iter().map(|v| (1.0 + r * f) * v).collect();
        let sample = field.sample(&x)?;
        let pb = ext.jet(&x)?;
        let k = r * (1.0 + r * pb.value);
        let fa: Vec<f64> = (0..=n).map(|c| x[c] - k * pb.grad[c]).collect();
        let mut psi2 = 0.0;
        for a in 0..=n {
            for b in 0..=n {
                psi2 += sample.ginv[(a, b)] * fa[a] * fa[b];
            }
        }
        let normal_t: f64 = (0..=n).map(|b| sample.ginv[(n, b)] * fa[b]).sum();
        let s = (normal_t.abs() / psi2.sqrt()).min(1.0);
        worst = worst.max(s.asin());
    }
    Ok(worst)
}
