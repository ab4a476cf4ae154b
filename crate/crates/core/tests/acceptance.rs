//! Acceptance run: one line per criterion, non-zero exit if any fails.
//! Informational lines are prefixed with `info`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cmc_foliate::curvature::{
    h_expansion_r2, h_expansion_r2_variant, h_phi_linearized, h_phi_phi, h_phi_phi_full, h_phi_r_mixed,
    h_phi_r_legacy, mean_curvature, ExpansionVariant,
};
use cmc_foliate::hemisphere::{Hemisphere, SurfaceFunction};
use cmc_foliate::metric::{inverse_metric_series, random_jet, BoundaryJet, MetricModel};
use cmc_foliate::series::MultiSeries;
use cmc_foliate::solver::{
    loglog_slope, moment_constant, moment_constant_closed_form, ball_volume, Solver, SolverSettings, TauMode,
};
use cmc_foliate::Error;

struct Outcome {
    passed: bool,
    summary: String,
    info: Vec<String>,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome { passed, summary, info: Vec::new() }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut failures = 0;
    let count = 100;
    for k in 0..count {
        let n = 2 + k % 2;
        let jet = random_jet::<BigRational, _>(&mut rng, n, 3);
        let m = inverse_metric_series(&jet).expect("valid random jet");
        let g = m.invert().expect("identity constant term");
        if !(m.mul(&g).unwrap().is_identity() && g.mul(&m).unwrap().is_identity()) {
            failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs < 60.0,
        format!("{count} rational jets, {failures} with a non-zero coefficient in M G - I, {secs:.1} s"),
    )
}

fn criterion_2(space: &Arc<Hemisphere>) -> Outcome {
    let n = space.n();
    let jet = BoundaryJet::<f64>::zero(n);
    let mut h_dev = 0.0f64;
    let mut phi_max = 0.0f64;
    let mut residual = 0.0f64;
    let solver =
        Solver::new(MetricModel::euclidean(n).unwrap(), space.clone(), SolverSettings::default()).unwrap();
    for r in [0.0, 0.05, 0.1, 0.2] {
        let h = mean_curvature(&jet, r, &space.zero(), 0.0).unwrap();
        h_dev = h_dev.max(h.deviation_from(n as f64));
        let sol = solver.solve_kperp(r, &vec![0.0; n], None).unwrap();
        phi_max = phi_max.max(sol.phi.max_coeff());
        residual = residual.max(sol.kperp_residual);
    }
    outcome(
        h_dev <= 1e-10 && phi_max == 0.0 && residual <= 1e-10,
        format!("max |H - n| {h_dev:e}, max |phi| coefficient {phi_max:e}, residual {residual:e}"),
    )
}

fn criterion_3(space: &Arc<Hemisphere>) -> Outcome {
    let radii = [0.2, 0.1, 0.05, 0.025];
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = f64::INFINITY;
    let mut worst_legacy = f64::INFINITY;
    let mut best_legacy = f64::NEG_INFINITY;
    for _ in 0..10 {
        let jet = random_jet::<f64, _>(&mut rng, space.n(), 4);
        let mut errs = Vec::new();
        let mut legacy = Vec::new();
        for &r in &radii {
            let h = mean_curvature(&jet, r, &space.zero(), 0.0).unwrap();
            let e = h_expansion_r2(&jet, r, space).unwrap();
            let l = h_expansion_r2_variant(&jet, r, space, ExpansionVariant::Legacy).unwrap();
            errs.push(sup_diff(&h.values, &e.values));
            legacy.push(sup_diff(&h.values, &l.values));
        }
        let s = loglog_slope(&radii, &errs).unwrap_or(f64::NAN);
        let sl = loglog_slope(&radii, &legacy).unwrap_or(f64::NAN);
        worst = worst.min(s);
        worst_legacy = worst_legacy.min(sl);
        best_legacy = best_legacy.max(sl);
    }
    let mut o = outcome(worst >= 2.7, format!("10 random jets, smallest log-log slope {worst:.3}"));
    o.info.push(format!(
        "legacy expansion (quartic coefficient (3n+2)/2, curvature sign +1/3): slopes {worst_legacy:.3} to {best_legacy:.3}"
    ));
    o
}

fn random_function(space: &Arc<Hemisphere>, rng: &mut ChaCha8Rng, max_degree: usize) -> SurfaceFunction {
    let coeffs = (0..space.size())
        .map(|b| if space.degree(b) <= max_degree { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    space.from_coeffs(coeffs).unwrap()
}

fn criterion_4(space: &Arc<Hemisphere>) -> Outcome {
    let n = space.n();
    let jet = BoundaryJet::<f64>::zero(n);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut rel = 0.0f64;
    let mut kernel_abs = 0.0f64;
    let mut count = 0;
    for i in 0..n {
        let psi = space.kernel_member(i);
        let fd = h_phi_linearized(&jet, 0.0, &space.zero(), &psi).unwrap();
        kernel_abs = kernel_abs.max(sup(&fd.values));
        count += 1;
    }
    while count < 20 {
        let psi = random_function(space, &mut rng, 2 + count % (space.l_max() - 1));
        let fd = h_phi_linearized(&jet, 0.0, &space.zero(), &psi).unwrap();
        let exact = psi.apply_l().node_values();
        rel = rel.max(sup_diff(&fd.values, &exact) / sup(&exact));
        count += 1;
    }
    outcome(
        rel <= 1e-5 && kernel_abs <= 1e-7,
        format!("{count} directions, max relative error {rel:e}, kernel members map to {kernel_abs:e}"),
    )
}

fn criterion_5() -> Outcome {
    let n = 2;
    let low = Hemisphere::build(n, 8, 24).unwrap();
    let high = Hemisphere::build(n, 8, 40).unwrap();
    let second = low.integrate_fn(|p| p[0] * p[0]);
    let second_err = (second - 2.0 * PI / 3.0).abs();
    let kvals = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
        low.project_k_values(&low.nodes().iter().map(|p| f(p)).collect::<Vec<_>>())
    };
    let mut kernel = sup(&kvals(&|p| p[n]));
    for i in 0..n {
        for j in 0..n {
            kernel = kernel.max(sup(&kvals(&|p| p[i] * p[j] * p[n])));
        }
    }
    let c_low = moment_constant(&low);
    let c_high = moment_constant(&high);
    let stability = (c_low - c_high).abs();
    let unscaled = ball_volume(n) / (ball_volume(n + 1) * (n as f64 + 2.0));
    let mut o = outcome(
        second_err <= 1e-12 && kernel <= 1e-12 && stability <= 1e-10,
        format!(
            "int x1^2 error {second_err:e}, kernel projections up to {kernel:e}, c_2 = {c_low} stable to {stability:e}"
        ),
    );
    o.info.push(format!(
        "c_2 against w_n/((n+2) w_(n+1)) = {unscaled}: deviation {:e}, ratio {}; closed form 2 w_n/((n+2) w_(n+1)) = {}",
        c_low - unscaled,
        c_low / unscaled,
        moment_constant_closed_form(n)
    ));
    o
}

fn criterion_6(space: &Arc<Hemisphere>) -> Outcome {
    let n = space.n();
    let d = n + 1;
    // h_ii t - (n + 3) h_ij x^i x^j t with h = I
    let mut rhs = MultiSeries::<f64>::zero(d, 3);
    rhs.add_term(&[0, 0, 1], n as f64).unwrap();
    rhs.add_term(&[2, 0, 1], -(n as f64 + 3.0)).unwrap();
    rhs.add_term(&[0, 2, 1], -(n as f64 + 3.0)).unwrap();
    let fit = space.project_polynomial(&rhs).unwrap();
    let f = fit.function;
    let phi = f.solve_l().unwrap();
    let operator = phi.apply_l().sub(&f).unwrap().sup_norm();
    let neumann = {
        let mut eq = vec![0.0; d];
        eq[0] = 1.0;
        let up = eq.iter().enumerate().map(|(a, v)| if a == n { 1e-5 } else { *v }).collect::<Vec<_>>();
        let mut dn = up.clone();
        dn[n] = -1e-5;
        (phi.eval(&up) - phi.eval(&dn)).abs() / 2e-5
    };
    let jet = BoundaryJet::umbilic(n, 1.0);
    let mixed = sup(&h_phi_r_mixed(&jet, &phi).unwrap().function.project_k());
    let second = sup(&h_phi_phi(&phi).unwrap().function.project_k());
    let second_full = sup(&h_phi_phi_full(&phi).unwrap().function.project_k());
    let mut o = outcome(
        operator <= 1e-10 && mixed <= 1e-6 && second <= 1e-6,
        format!(
            "Galerkin operator residual {operator:e}, normal derivative at the equator {neumann:e}, P~ of the mixed derivative {mixed:e}, P~ of the second variation {second:e}"
        ),
    );
    let truncation: Vec<String> = [8usize, 12, 16]
        .iter()
        .map(|&l| {
            let s = Hemisphere::build(n, l, 2 * l + 8).unwrap();
            format!("L={l}: {:.2e}", s.project_polynomial(&rhs).unwrap().residual)
        })
        .collect();
    o.info.push(format!(
        "the right-hand side is not a finite sum of even harmonics; pointwise truncation error of f {}",
        truncation.join(", ")
    ));
    // the closed form phi = h_ij x^i x^j t / 2
    let mut closed = MultiSeries::<f64>::zero(d, 3);
    closed.add_term(&[2, 0, 1], 0.5).unwrap();
    closed.add_term(&[0, 2, 1], 0.5).unwrap();
    let closed_fn = space.project_polynomial(&closed).unwrap().function;
    let gap = closed_fn.apply_l().sub(&f).unwrap().sup_norm();
    let mut eq = vec![0.0; d];
    eq[0] = 1.0;
    let dt = {
        let mut up = eq.clone();
        up[n] = 1e-5;
        let mut dn = eq.clone();
        dn[n] = -1e-5;
        (closed.eval_f64(&up) - closed.eval_f64(&dn)) / 2e-5
    };
    o.info.push(format!(
        "closed form h_ij x^i x^j t / 2: |L phi - f| = {gap:.4}, normal derivative at x = e_1 is {dt:.3}; spectral solution kept"
    ));
    o.info.push(format!(
        "P~ of the second variation with the 4 psi Laplacian(psi) term: {second_full:e}; P~ of the closed-form mixed derivative: {:e}",
        sup(&h_phi_r_legacy(&jet, &phi).unwrap().function.project_k())
    ));
    o
}

fn geometric_grid() -> Vec<f64> {
    (0..8).map(|k| if k == 7 { 0.2 } else { 0.02 * 10f64.powf(k as f64 / 7.0) }).collect()
}

fn criterion_7(space: &Arc<Hemisphere>) -> Outcome {
    let start = Instant::now();
    let model = MetricModel::bump(2, 1.0, DMatrix::identity(2, 2)).unwrap();
    let solver = Solver::new(model, space.clone(), SolverSettings::default()).unwrap();
    let result = solver.build_foliation(&geometric_grid(), &TauMode::Solve, 9).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let residuals_ok = result.leaves.len() == 8
        && result.failure.is_none()
        && result.leaves.iter().all(|l| l.converged && l.kperp_residual <= 1e-7 && l.kernel_residual <= 1e-7);
    let worst = result.leaves.iter().fold(0.0f64, |m, l| m.max(l.kperp_residual).max(l.kernel_residual));
    let Some(diag) = result.diagnostics.clone() else {
        return outcome(false, format!("no diagnostics: {:?}", result.failure));
    };
    let (slope_ok, slope_text) = match diag.tau_slope_fit {
        Some(s) => (s >= 1.8, format!("tau slope {s:.3}")),
        None if diag.tau_identically_zero => {
            (true, format!("tau vanishes identically (max |tau| {:e}, slope undefined)", diag.tau_max))
        }
        None => (false, "tau slope unavailable".to_string()),
    };
    let mut o = outcome(
        residuals_ok && slope_ok && diag.det_min > 0.0 && diag.free_boundary_max_angle <= 1e-4 && secs < 300.0,
        format!(
            "{} leaves, worst residual {worst:e}, {slope_text}, det_min {:e} (normalized {:.3}), max angle {:e}, {secs:.1} s",
            result.leaves.len(),
            diag.det_min,
            diag.det_min_normalized,
            diag.free_boundary_max_angle
        ),
    );
    let (slope, max_tau) = table_model_slope(space);
    o.info.push(format!(
        "jet table with h = I/2 and a cubic third derivative (tau not forced to zero): tau slope {slope:.3}, max |tau| {max_tau:e}"
    ));
    o
}

/// A table model without the reflection symmetry that pins `tau` to zero.
fn table_model_slope(space: &Arc<Hemisphere>) -> (f64, f64) {
    use cmc_foliate::metric::{JetRecord, JetTable, TableEntry};
    let n = 2;
    let mut h = vec![0.0; 4];
    h[0] = 0.5;
    h[3] = 0.5;
    let mut h2 = vec![0.0; 16];
    let mut h3 = vec![0.0; 32];
    let c = |k: usize, l: usize, m: usize| match k + l + m {
        0 => 1.0,
        2 => 0.5,
        _ => 0.0,
    };
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                h2[((i * n + i) * n + k) * n + l] = if k == l { 0.5 } else { 0.0 };
                for m in 0..n {
                    h3[(((i * n + i) * n + k) * n + l) * n + m] = c(k, l, m) / 2.0;
                }
            }
        }
    }
    let table = JetTable {
        n,
        radius: 0.25,
        entries: vec![TableEntry {
            tau: vec![0.0, 0.0],
            jet: JetRecord { h: Some(h), h2: Some(h2), h3: Some(h3), ..Default::default() },
            hmean: None,
            hmean_grad: None,
        }],
    };
    let model = MetricModel::table(&table).unwrap();
    let solver = Solver::new(model, space.clone(), SolverSettings::default()).unwrap();
    let result = solver.build_foliation(&geometric_grid(), &TauMode::Solve, 5).unwrap();
    let diag = result.diagnostics.expect("all leaves converge");
    (diag.tau_slope_fit.unwrap_or(f64::NAN), diag.tau_max)
}

fn criterion_8(space: &Arc<Hemisphere>) -> Outcome {
    let euclid = Solver::new(MetricModel::euclidean(2).unwrap(), space.clone(), SolverSettings::default()).unwrap();
    let flat = matches!(euclid.solve_tau(0.1, &[0.0, 0.0]), Err(Error::Nondegeneracy(_)));
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0]));
    let bump = Solver::new(MetricModel::bump(2, 1.0, q).unwrap(), space.clone(), SolverSettings::default()).unwrap();
    let degenerate = matches!(bump.solve_tau(0.1, &[0.0, 0.0]), Err(Error::Nondegeneracy(_)));
    outcome(
        flat && degenerate,
        format!("euclidean rejected: {flat}, bump with Q = diag(1, 0) rejected: {degenerate}"),
    )
}

fn main() {
    let space = Hemisphere::build(2, 8, 24).unwrap();
    let runs: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("inverse-metric exactness", Box::new(criterion_1)),
        ("euclidean exactness", Box::new(|| criterion_2(&space))),
        ("expansion order", Box::new(|| criterion_3(&space))),
        ("linearization", Box::new(|| criterion_4(&space))),
        ("moments", Box::new(criterion_5)),
        ("neumann solve and kernel projections", Box::new(|| criterion_6(&space))),
        ("end-to-end foliation", Box::new(|| criterion_7(&space))),
        ("nondegeneracy guard", Box::new(|| criterion_8(&space))),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in runs.iter().enumerate() {
        let o = run();
        println!("criterion {} {name}: {} ({})", k + 1, if o.passed { "PASS" } else { "FAIL" }, o.summary);
        for line in o.info {
            println!("  info: {line}");
        }
        if !o.passed {
            failed.push(k + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 8 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
