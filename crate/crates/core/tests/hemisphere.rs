use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cmc_foliate::hemisphere::Hemisphere;
use cmc_foliate::series::MultiSeries;
use cmc_foliate::Error;

/// Laplacian on the unit sphere of `f` at `p`, from central differences of the
/// degree-0 extension `f(X / |X|)` in the ambient space.
fn fd_sphere_laplacian(f: &dyn Fn(&[f64]) -> f64, p: &[f64]) -> f64 {
    let h = 1e-4;
    let ext = |x: &[f64]| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        f(&x.iter().map(|v| v / r).collect::<Vec<_>>())
    };
    let centre = ext(p);
    (0..p.len())
        .map(|a| {
            let mut up = p.to_vec();
            let mut dn = p.to_vec();
            up[a] += h;
            dn[a] -= h;
            (ext(&up) - 2.0 * centre + ext(&dn)) / (h * h)
        })
        .sum()
}

#[test]
fn cubic_harmonic_has_eigenvalue_minus_twelve() {
    let s = Hemisphere::build(2, 6, 16).unwrap();
    let b = (0..s.size()).find(|&b| s.degree(b) == 3).unwrap();
    assert_eq!(s.eigenvalue(b), 12.0);
    // x^3 - 3 x t^2 restricted to the sphere
    let p = |x: &[f64]| x[0].powi(3) - 3.0 * x[0] * x[2] * x[2];
    for node in s.nodes().iter().step_by(17) {
        let lap = fd_sphere_laplacian(&p, node);
        assert!((lap + 12.0 * p(node)).abs() < 1e-5, "{lap} vs {}", -12.0 * p(node));
    }
    let f = s.project_values(&s.nodes().iter().map(|q| p(q)).collect::<Vec<_>>()).unwrap();
    assert!(f.residual < 1e-13);
    let lap = f.function.laplace_beltrami();
    assert!(lap.add(&f.function.scale(12.0)).unwrap().max_coeff() < 1e-12);
}

#[test]
fn spectral_laplacian_matches_finite_differences() {
    let s = Hemisphere::build(2, 5, 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let coeffs = (0..s.size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = s.from_coeffs(coeffs).unwrap();
    let lap = f.laplace_beltrami();
    for node in s.nodes().iter().step_by(23) {
        let fd = fd_sphere_laplacian(&|x: &[f64]| f.eval(x), node);
        assert!((fd - lap.eval(node)).abs() < 1e-4 * (1.0 + fd.abs()));
    }
}

#[test]
fn hemisphere_quadrature_moments() {
    let s = Hemisphere::build(3, 6, 16).unwrap();
    // area of S^3_+ is pi^2, each second moment a quarter of it
    assert!((s.integrate_fn(|_| 1.0) - PI * PI).abs() < 1e-10);
    assert!((s.integrate_fn(|p| p[1] * p[1]) - PI * PI / 4.0).abs() < 1e-10);
    assert!(s.integrate_fn(|p| p[0] * p[1] * p[3]).abs() < 1e-12);
}

#[test]
fn jacobi_operator_inverse_identity() {
    for n in 2..=3 {
        let s = Hemisphere::build(n, 6, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let f = s.from_coeffs((0..s.size()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let f = f.project_kperp();
        let u = f.solve_l().unwrap();
        assert!(u.apply_l().sub(&f).unwrap().max_coeff() < 1e-12);
        assert!(u.project_k().iter().all(|v| *v == 0.0));
        let kernel = s.kernel_member(n - 1).scale(0.1);
        assert!(matches!(kernel.solve_l(), Err(Error::Solvability { .. })));
        assert!(kernel.apply_l().max_coeff() < 1e-14);
    }
}

#[test]
fn kernel_decomposition() {
    let s = Hemisphere::build(2, 8, 24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = s.from_coeffs((0..s.size()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let k = f.kernel_part();
    let perp = f.project_kperp();
    assert!(k.add(&perp).unwrap().sub(&f).unwrap().max_coeff() < 1e-15);
    let kv = k.node_values();
    let pv = perp.node_values();
    let cross: Vec<f64> = kv.iter().zip(&pv).map(|(a, b)| a * b).collect();
    assert!(s.integrate_values(&cross).abs() < 1e-13);
    // P~ returns the coordinates in the basis x^1, ..., x^n
    let coords = f.project_k();
    let rebuilt = (0..2).fold(s.zero(), |acc, i| acc.add(&s.kernel_member(i).scale(coords[i])).unwrap());
    assert!(rebuilt.sub(&k).unwrap().max_coeff() < 1e-14);
}

#[test]
fn neumann_problem_with_quadratic_right_hand_side() {
    let s = Hemisphere::build(2, 8, 24).unwrap();
    // f = 2 t - 5 |x|^2 t: even in x, so orthogonal to the kernel
    let mut rhs = MultiSeries::<f64>::zero(3, 3);
    rhs.add_term(&[0, 0, 1], 2.0).unwrap();
    rhs.add_term(&[2, 0, 1], -5.0).unwrap();
    rhs.add_term(&[0, 2, 1], -5.0).unwrap();
    let f = s.project_polynomial(&rhs).unwrap().function;
    assert!(f.project_k().iter().all(|v| v.abs() < 1e-14));
    let phi = f.solve_l().unwrap();
    assert!(phi.apply_l().sub(&f).unwrap().sup_norm() < 1e-10);
    for th in [0.3f64, 2.0, 4.4] {
        let up = [th.cos(), th.sin(), 1e-6];
        let dn = [th.cos(), th.sin(), -1e-6];
        assert!(((phi.eval(&up) - phi.eval(&dn)) / 2e-6).abs() < 1e-8);
    }
    // |x|^2 t / 2 has normal derivative 1/2 on the equator and misses f
    let mut closed = MultiSeries::<f64>::zero(3, 3);
    closed.add_term(&[2, 0, 1], 0.5).unwrap();
    closed.add_term(&[0, 2, 1], 0.5).unwrap();
    let c = s.project_polynomial(&closed).unwrap().function;
    assert!(c.apply_l().sub(&f).unwrap().sup_norm() > 1.0);
}

#[test]
fn configuration_guards() {
    assert!(matches!(Hemisphere::build(1, 4, 12), Err(Error::Configuration(_))));
    assert!(matches!(Hemisphere::build(2, 1, 12), Err(Error::Configuration(_))));
    assert!(matches!(Hemisphere::build(2, 8, 19), Err(Error::Configuration(_))));
}
