//! Oracle suite run by `cmcfoliate selftest`.

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cli::commands::{moment_report, Check};
use crate::cli::config::RunConfig;
use crate::curvature::{extend_homogeneous, h_phi_linearized, h_phi_phi_full, h_phi_phi_fd, mean_curvature};
use crate::error::{Error, Result};
use crate::hemisphere::{Hemisphere, SurfaceFunction};
use crate::metric::inverse::ExpansionCoefficients;
use crate::metric::{inverse_metric_series_with, random_jet, BoundaryJet};
use crate::series::MultiSeries;

/// Parses `NAME=p/q` into a coefficient override.
pub fn parse_corruption(spec: &str) -> Result<(String, i64, i64)> {
    let bad = || Error::Configuration(format!("corruption must read NAME=p/q, got {spec:?}"));
    let (name, frac) = spec.rsplit_once('=').ok_or_else(bad)?;
    let (p, q) = frac.split_once('/').unwrap_or((frac, "1"));
    let p = p.trim().parse().map_err(|_| bad())?;
    let q = q.trim().parse().map_err(|_| bad())?;
    Ok((name.trim().to_string(), p, q))
}

fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(p.into(), d.into())
}

fn random_series(rng: &mut ChaCha8Rng, vars: usize, degree: usize) -> MultiSeries<BigRational> {
    let mut s = MultiSeries::zero(vars, degree);
    let layout = s.layout().clone();
    for slot in 0..layout.len() {
        if rng.gen_bool(0.6) {
            *s.coeff_slot_mut(slot) = q(rng.gen_range(-6..=6), rng.gen_range(1..=5));
        }
    }
    s
}

fn ring_axioms(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut failures = 0;
    let trials = 20;
    for _ in 0..trials {
        let vars = rng.gen_range(2..=4);
        let (a, b, c) = (random_series(rng, vars, 4), random_series(rng, vars, 4), random_series(rng, vars, 4));
        let one = MultiSeries::one(vars, 4);
        let assoc = a.mul(&b)?.mul(&c)? == a.mul(&b.mul(&c)?)?;
        let comm = a.mul(&b)? == b.mul(&a)?;
        let dist = a.mul(&b.add(&c)?)? == a.mul(&b)?.add(&a.mul(&c)?)?;
        let unit = a.mul(&one)? == a;
        let r = q(rng.gen_range(1..=7), rng.gen_range(1..=7));
        let dilate = a.mul(&b)?.dilate(&r)? == a.dilate(&r)?.mul(&b.dilate(&r)?)?;
        if !(assoc && comm && dist && unit && dilate) {
            failures += 1;
        }
    }
    Ok(Check::new(
        "series ring axioms",
        failures == 0,
        format!("{failures} of {trials} rational triples violate an axiom or dilation homomorphism"),
    ))
}

/// Boundary of a flat ball of radius `1 / kappa`.
fn round_ball_jet(n: usize, kappa: &BigRational) -> BoundaryJet<BigRational> {
    let mut jet = BoundaryJet::umbilic(n, kappa.clone());
    let k = kappa.clone() * kappa.clone();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                jet.rb.set(&[i, j, i, j], k.clone());
                jet.rb.set(&[i, j, j, i], -k.clone());
            }
        }
    }
    jet
}

/// `(1 - kappa t)^2` times the constant curvature normal-coordinate metric
/// through degree 4.
fn round_ball_metric(n: usize, kappa: &BigRational, i: usize, j: usize) -> Result<MultiSeries<BigRational>> {
    let d = n + 1;
    let var = |v: usize| MultiSeries::<BigRational>::variable(d, 4, v);
    let mut r2 = MultiSeries::zero(d, 4);
    for v in 0..n {
        r2 = r2.add(&var(v)?.mul(&var(v)?)?)?;
    }
    let delta = if i == j { MultiSeries::one(d, 4) } else { MultiSeries::zero(d, 4) };
    let p = r2.mul(&delta)?.sub(&var(i)?.mul(&var(j)?)?)?;
    let k = kappa.clone() * kappa.clone();
    let boundary = delta.sub(&p.scale(&(k.clone() * q(1, 3))))?.add(&r2.mul(&p)?.scale(&(k.clone() * k * q(2, 45))))?;
    let one_minus = MultiSeries::one(d, 4).sub(&var(n)?.scale(kappa))?;
    one_minus.mul(&one_minus)?.mul(&boundary)
}

/// Exact inversion on random rational jets, plus the umbilic boundary whose
/// inverse metric and metric are known in closed form, plus a round ball.
fn inversion(rng: &mut ChaCha8Rng, coeffs: &ExpansionCoefficients) -> Result<Check> {
    let mut inexact = 0;
    let trials = 10;
    for k in 0..trials {
        let n = 2 + k % 2;
        let jet = random_jet::<BigRational, _>(rng, n, 2);
        let m = inverse_metric_series_with(&jet, coeffs)?;
        let g = m.invert()?;
        if !(m.mul(&g)?.is_identity() && m.is_symmetric()) {
            inexact += 1;
        }
    }
    let kappa = q(2, 5);
    let mut umbilic_bad = 0;
    for n in 2..=3 {
        let jet = BoundaryJet::umbilic(n, kappa.clone());
        let m = inverse_metric_series_with(&jet, coeffs)?;
        let g = m.invert()?;
        let d = n + 1;
        for i in 0..n {
            let mut expect_inv = MultiSeries::zero(d, 4);
            let mut expect_g = MultiSeries::zero(d, 4);
            let mut pow = BigRational::one();
            for deg in 0..=4u8 {
                let mut e = vec![0u8; d];
                e[n] = deg;
                expect_inv.add_term(&e, q(deg as i64 + 1, 1) * pow.clone())?;
                pow = pow * kappa.clone();
            }
            let mut e = vec![0u8; d];
            expect_g.add_term(&e, BigRational::one())?;
            e[n] = 1;
            expect_g.add_term(&e, q(-2, 1) * kappa.clone())?;
            e[n] = 2;
            expect_g.add_term(&e, kappa.clone() * kappa.clone())?;
            if *m.get(i, i) != expect_inv || *g.get(i, i) != expect_g {
                umbilic_bad += 1;
            }
            for j in 0..n {
                if i != j && !m.get(i, j).is_zero_series() {
                    umbilic_bad += 1;
                }
            }
        }
    }
    let mut ball_bad = 0;
    for n in 2..=3 {
        let m = inverse_metric_series_with(&round_ball_jet(n, &kappa), coeffs)?;
        let g = m.invert()?;
        for i in 0..n {
            for j in 0..n {
                if *g.get(i, j) != round_ball_metric(n, &kappa, i, j)? {
                    ball_bad += 1;
                }
            }
        }
    }
    Ok(Check::new(
        "inverse metric exact inversion",
        inexact == 0 && umbilic_bad == 0 && ball_bad == 0,
        format!(
            "{inexact} of {trials} random jets not inverted exactly; {umbilic_bad} umbilic and {ball_bad} round ball entries off the closed form"
        ),
    ))
}

fn orthonormality(space: &Arc<Hemisphere>) -> Check {
    let mut worst = 0.0f64;
    for a in 0..space.size() {
        for b in a..space.size() {
            let ip: f64 =
                space.basis_values(a).iter().zip(space.basis_values(b)).map(|(x, y)| x * y).zip(&space.quadrature().weights).map(|(v, w)| v * w).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((ip - target).abs());
        }
    }
    Check::new("basis orthonormality", worst <= 1e-10, format!("max Gram deviation {worst:e}"))
}

/// Trace of the ambient Hessian of the degree-0 extension against
/// `-k (k + n - 1)` times the value, and the Neumann condition at the equator.
fn eigen_relations(space: &Arc<Hemisphere>) -> Result<Check> {
    let n = space.n();
    let mut worst = 0.0f64;
    let mut neumann = 0.0f64;
    for b in 0..space.size() {
        let f = space.member(b);
        let ext = extend_homogeneous(&f)?;
        let k = space.degree(b) as f64;
        let lambda = -k * (k + n as f64 - 1.0);
        for (q, p) in space.nodes().iter().enumerate() {
            let j = ext.jet(p)?;
            let trace: f64 = (0..=n).map(|a| j.hess[(a, a)]).sum();
            worst = worst.max((trace - lambda * space.basis_values(b)[q]).abs());
        }
        let mut eq = vec![0.0; n + 1];
        eq[0] = 1.0;
        neumann = neumann.max(ext.jet(&eq)?.grad[n].abs());
    }
    Ok(Check::new(
        "eigen-relations",
        worst <= 1e-9 && neumann <= 1e-12,
        format!("max |Delta Y - lambda Y| {worst:e}; max equatorial normal derivative {neumann:e}"),
    ))
}

fn moments(config: &RunConfig) -> Result<Check> {
    let m = moment_report(config.n, config.l_max, config.quadrature_exactness)?;
    let n = config.n;
    let area = crate::hemisphere::quadrature::hemisphere_area(n);
    let second = area / (n as f64 + 1.0);
    let mut worst = (m.area - area).abs();
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { second } else { 0.0 };
            worst = worst.max((m.second_moments[i][j] - expect).abs());
        }
    }
    let kernel_zero = m.p_t.iter().fold(m.p_t_xx_max, |a, v| a.max(v.abs()));
    let c_gap = (m.c_n - m.c_n_closed_form).abs();
    Ok(Check::new(
        "moment tables",
        worst <= 1e-12 && kernel_zero <= 1e-12 && c_gap <= 1e-10 && m.c_n_stability <= 1e-10,
        format!(
            "moment error {worst:e}; P~(t), P~(t x x) up to {kernel_zero:e}; c_n {} vs closed form gap {c_gap:e}",
            m.c_n
        ),
    ))
}

fn random_function(space: &Arc<Hemisphere>, rng: &mut ChaCha8Rng, max_degree: usize) -> SurfaceFunction {
    let coeffs =
        (0..space.size()).map(|b| if space.degree(b) <= max_degree { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
    space.from_coeffs(coeffs).expect("sized to the basis")
}

/// Finite-difference derivatives of the mean curvature against their closed forms.
fn derivatives(space: &Arc<Hemisphere>, rng: &mut ChaCha8Rng) -> Result<Check> {
    let n = space.n();
    let zero_jet = BoundaryJet::<f64>::zero(n);
    let mut lin = 0.0f64;
    for k in 0..4 {
        let psi = if k < n { space.kernel_member(k) } else { random_function(space, rng, 4) };
        let fd = h_phi_linearized(&zero_jet, 0.0, &space.zero(), &psi)?;
        let exact = psi.apply_l().node_values();
        let scale = exact.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let err = fd.values.iter().zip(&exact).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale;
        lin = lin.max(err);
    }
    let psi = random_function(space, rng, 3).scale(0.3);
    let fd = h_phi_phi_fd(&zero_jet, &psi)?;
    let full = h_phi_phi_full(&psi)?;
    let scale = full.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let second = fd.values.iter().zip(&full.values).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale;
    Ok(Check::new(
        "FD vs analytic derivatives",
        lin <= 1e-5 && second <= 1e-4,
        format!("linearization rel. error {lin:e}; second variation rel. error {second:e}"),
    ))
}

fn round_sphere(space: &Arc<Hemisphere>) -> Result<Check> {
    let n = space.n();
    let jet = BoundaryJet::<f64>::zero(n);
    let mut worst = 0.0f64;
    for (c, r) in [(0.0, 0.0), (0.2, 0.1), (-0.3, 0.2)] {
        let h = mean_curvature(&jet, r, &space.constant(c), 1.0)?;
        worst = worst.max(h.deviation_from(n as f64 / (1.0 + c)));
    }
    Ok(Check::new("round sphere exactness", worst <= 1e-10, format!("max |H - n/(1+c)| {worst:e}")))
}

fn l_inverse(space: &Arc<Hemisphere>, rng: &mut ChaCha8Rng) -> Result<Check> {
    let f = random_function(space, rng, space.l_max()).project_kperp();
    let u = f.solve_l()?;
    let err = u.apply_l().sub(&f)?.max_coeff();
    let kernel = u.project_k().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(Check::new(
        "Jacobi operator inverse",
        err <= 1e-10 && kernel <= 1e-12,
        format!("|L L^-1 f - f| {err:e}; kernel part of the solution {kernel:e}"),
    ))
}

/// Runs every oracle; `corrupt` overrides one expansion coefficient.
pub fn run_selftest(config: &RunConfig, corrupt: Option<&(String, i64, i64)>) -> Result<Vec<Check>> {
    config.validate()?;
    let mut coeffs = ExpansionCoefficients::default();
    if let Some((name, p, d)) = corrupt {
        coeffs.set(name, *p, *d)?;
    }
    let space = Hemisphere::build(config.n, config.l_max, config.quadrature_exactness)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let guard = |name: &str, r: Result<Check>| r.unwrap_or_else(|e| Check::new(name, false, e.to_string()));
    Ok(vec![
        guard("series ring axioms", ring_axioms(&mut rng)),
        guard("inverse metric exact inversion", inversion(&mut rng, &coeffs)),
        orthonormality(&space),
        guard("eigen-relations", eigen_relations(&space)),
        guard("moment tables", moments(config)),
        guard("FD vs analytic derivatives", derivatives(&space, &mut rng)),
        guard("round sphere exactness", round_sphere(&space)),
        guard("Jacobi operator inverse", l_inverse(&space, &mut rng)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig { l_max: 4, quadrature_exactness: 14, ..RunConfig::default() }
    }

    #[test]
    fn default_suite_passes() {
        let checks = run_selftest(&small(), None).unwrap();
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(checks.len(), 8);
    }

    #[test]
    fn corrupted_coefficient_is_caught() {
        for spec in ["hhh : t3=5/1", "rb : xx=1/2", "rb.rb : xxxx=1/14", "rb.h.h outer : t2xx=1/1"] {
            let corrupt = parse_corruption(spec).unwrap();
            let checks = run_selftest(&small(), Some(&corrupt)).unwrap();
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            assert_eq!(failed, vec!["inverse metric exact inversion"], "{spec}");
        }
    }

    #[test]
    fn corruption_syntax() {
        assert_eq!(parse_corruption("h : t=3/1").unwrap(), ("h : t".to_string(), 3, 1));
        assert_eq!(parse_corruption("h : t=3").unwrap(), ("h : t".to_string(), 3, 1));
        assert!(parse_corruption("h : t").is_err());
        assert!(run_selftest(&small(), Some(&("nope".into(), 1, 1))).is_err());
    }

    #[test]
    fn low_exactness_rejected_before_running() {
        let cfg = RunConfig { l_max: 8, quadrature_exactness: 12, ..RunConfig::default() };
        assert!(matches!(run_selftest(&cfg, None), Err(Error::Configuration(_))));
    }
}
