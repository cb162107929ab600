//! Invariant suite behind the `check` command. Every check is randomized from one seed
//! and reports a one-line detail.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_b, Coefficients, Discretization};
use crate::benchmarks::benchmark_inclusion;
use crate::control::{multiplier, projected_gradient, reduced_objective, PgOptions};
use crate::driver::exact_errors;
use crate::estimator::assemble_indicator;
use crate::geometry::Vec3;
use crate::linsolve::{SolverOptions, SpdSolver};
use crate::marking::doerfler_mark;
use crate::mesh::{build_cube_mesh, build_lshape_mesh, TetMesh};
use crate::problem::{affine_vector, constant_vector, zero_scalar, zero_vector, ExactSolution, Lifting, Material, ProblemSpec};
use crate::quadrature::{tet_rule, tri_rule, QuadraturePolicy};
use crate::spaces::{edge_field_means, eval_edge_field, project_admissible, project_p_h, DofMap, EdgeField, P0Field};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn(&mut ChaCha8Rng) -> Result<String, String>;

const CHECKS: [(&str, CheckFn); 8] = [
    ("mesh_refinement", mesh_refinement),
    ("operator_b", operator_b),
    ("p_h_projection", p_h_projection),
    ("doerfler_minimality", doerfler_minimality),
    ("projected_gradient", pg_kkt),
    ("gradient_fd", gradient_fd),
    ("zero_estimator", zero_estimator),
    ("quadrature_exactness", quadrature_exactness),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs every check; a panicking check counts as failed.
pub fn run_checks(seed: u64) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, &(name, f))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let start = Instant::now();
            let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| f(&mut rng)))
                .unwrap_or_else(|_| Err("panicked".into()));
            let (passed, detail) = match r {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn sorted_tets(m: &TetMesh<f64>) -> HashSet<[usize; 4]> {
    m.tets()
        .iter()
        .map(|t| {
            let mut s = *t;
            s.sort_unstable();
            s
        })
        .collect()
}

fn mesh_refinement(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let cases = 200;
    let mut max_tets = 0;
    for case in 0..cases {
        let mut m = match case % 3 {
            0 => build_cube_mesh(1),
            1 => build_lshape_mesh(1),
            _ => build_cube_mesh(2),
        }
        .map_err(err)?;
        let ratio0 = m.max_radius_ratio();
        let (vol, area) = (m.volume(), m.boundary_area());
        for _ in 0..rng.gen_range(1..=3) {
            let k = rng.gen_range(1..=(m.n_tets() / 3).max(1));
            let marked: Vec<usize> = (0..k).map(|_| rng.gen_range(0..m.n_tets())).collect();
            let r = m.refine(&marked).map_err(err)?;
            r.check_conformity().map_err(|e| format!("case {case}: {e}"))?;
            let fine = sorted_tets(&r);
            for &t in &marked {
                let mut s = m.tets()[t];
                s.sort_unstable();
                ensure(!fine.contains(&s), || format!("case {case}: marked element {t} survived"))?;
            }
            ensure((r.volume() - vol).abs() < 1e-11 && (r.boundary_area() - area).abs() < 1e-11, || {
                format!("case {case}: volume or boundary area changed")
            })?;
            ensure(r.max_radius_ratio() <= 10.0 * ratio0, || format!("case {case}: shape regularity lost"))?;
            m = r;
        }
        max_tets = max_tets.max(m.n_tets());
    }
    Ok(format!("{cases} random marking sequences conforming, largest mesh {max_tets} tets"))
}

/// σ = 1, μ⁻¹ = 1 on the inclusion mesh with exact state `a×x + b`, `u* = p* = 0`.
pub fn affine_problem(a: Vec3<f64>, b: Vec3<f64>, n: usize) -> ProblemSpec<f64> {
    let mut p = benchmark_inclusion::<f64>(n).expect("valid resolution");
    p.name = "affine".into();
    p.materials = vec![Material { mu_inv: 1.0, sigma: 1.0 }; 2];
    let y = affine_vector(a, b);
    p.f = y.clone();
    p.div_f = zero_scalar();
    p.u_d = zero_vector();
    p.y_d = constant_vector(a * 2.0);
    p.lifting = Lifting::Field(Arc::new(move |x| a.cross(x) + b));
    p.exact = Some(ExactSolution {
        y,
        curl_y: constant_vector(a * 2.0),
        p: zero_vector(),
        curl_p: zero_vector(),
        u: zero_vector(),
    });
    p.quadrature = QuadraturePolicy::new(4).expect("supported degree");
    p
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3<f64> {
    Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r))
}

fn operator_b(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let m = build_lshape_mesh::<f64>(2).map_err(err)?;
    let d = DofMap::new(&m);
    let coeffs = Coefficients::constant(m.n_tets(), rng.gen_range(0.1..2.0), rng.gen_range(0.1..10.0));
    let k = assemble_b(&m, &d, &coeffs).map_err(err)?;
    let scale = k.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let defect = k.symmetry_defect();
    ensure(defect <= 1e-14 * scale, || format!("symmetry defect {defect:e}"))?;
    for _ in 0..50 {
        let x: Vec<f64> = (0..k.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q = crate::sparse::dot(&x, &k.mul_vec(&x));
        ensure(q > 0.0, || format!("x^T B x = {q:e}"))?;
    }
    SpdSolver::new(k, SolverOptions::default().cholesky()).map_err(|e| format!("factorization: {e}"))?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let p = affine_problem(random_vec(rng, 1.0), random_vec(rng, 1.0), 2);
        let disc = Discretization::new(p.initial_mesh().map_err(err)?, &p, SolverOptions::with_tol(1e-13)).map_err(err)?;
        let sol = projected_gradient(&disc, &P0Field::zeros(disc.n_tets()), &PgOptions::default(), None).map_err(err)?;
        let e = exact_errors(&disc, &p, &sol).map_err(err)?;
        worst = worst.max(e.y).max(e.p).max(e.u);
    }
    ensure(worst <= 1e-9, || format!("a×x+b reproduced only to {worst:e}"))?;
    Ok(format!("symmetry defect {defect:.1e}, 50 positive quadratic forms, a×x+b reproduced to {worst:.1e}"))
}

fn l2_norm_edge(v: &EdgeField<f64>, m: &TetMesh<f64>, d: &DofMap) -> f64 {
    let rule = tet_rule::<f64>(2).expect("degree 2");
    let mut s = 0.0;
    for t in 0..m.n_tets() {
        let vol6 = 6.0 * m.geometry(t).volume;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            s += w * vol6 * eval_edge_field(v, m, d, t, l).norm_sq();
        }
    }
    s.sqrt()
}

fn p_h_projection(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let m = build_lshape_mesh::<f64>(2).map_err(err)?.refine(&[0, 5, 17]).map_err(err)?;
    let d = DofMap::new(&m);
    let policy = QuadraturePolicy::new(2).map_err(err)?;
    let mut worst_idem = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for _ in 0..20 {
        let vals: Vec<f64> = (0..d.n_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = EdgeField::from_edge_values(&d, &vals);
        let ph = edge_field_means(&v, &m, &d);
        let again = project_p_h(|_, t| ph.values[t], &m, &policy);
        worst_idem = worst_idem.max(again.sub(&ph).norm(&m) / ph.norm(&m));
        worst_ratio = worst_ratio.max(ph.norm(&m) / l2_norm_edge(&v, &m, &d));
    }
    ensure(worst_idem <= 1e-13, || format!("P_h not idempotent: {worst_idem:e}"))?;
    ensure(worst_ratio <= 1.0 + 1e-12, || format!("P_h not a contraction: ratio {worst_ratio}"))?;
    Ok(format!("idempotence defect {worst_idem:.1e}, largest norm ratio {worst_ratio:.4}"))
}

fn brute_force_min(eta2: &[f64], theta: f64) -> usize {
    let total: f64 = eta2.iter().sum();
    let n = eta2.len();
    (1u32..(1 << n))
        .filter(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| eta2[i]).sum::<f64>() >= theta * total)
        .map(|mask| mask.count_ones() as usize)
        .min()
        .unwrap_or(n)
}

fn doerfler_minimality(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let cases = 200;
    for case in 0..cases {
        let n = rng.gen_range(1..=12);
        let eta2: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..5.0) }).collect();
        let theta = rng.gen_range(0.01..0.99);
        let m = doerfler_mark(&eta2, theta).map_err(err)?;
        if eta2.iter().all(|&v| v == 0.0) {
            ensure(m.is_empty(), || format!("case {case}: zero indicators marked"))?;
            continue;
        }
        let best = brute_force_min(&eta2, theta);
        ensure(m.len() == best, || format!("case {case}: marked {} elements, minimum is {best}", m.len()))?;
    }
    Ok(format!("{cases} random vectors of length ≤ 12 match the exhaustive minimum"))
}

/// Inclusion data with a rotated target and a sign-changing `u^d`, so that the
/// constraint is active on part of the domain.
pub fn mixed_problem(n: usize) -> ProblemSpec<f64> {
    let mut p = benchmark_inclusion::<f64>(n).expect("valid resolution");
    p.y_d = constant_vector(Vec3::new(0.5, -1.0, 2.0));
    p.u_d = affine_vector(Vec3::new(1.0, 0.5, -0.3), Vec3::new(0.2, -0.4, 0.1));
    p
}

fn pg_kkt(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let p = mixed_problem(2);
    let d = Discretization::new(p.initial_mesh().map_err(err)?, &p, SolverOptions::with_tol(1e-13)).map_err(err)?;
    let u0 = P0Field { values: (0..d.n_tets()).map(|_| random_vec(rng, 2.0).max_zero()).collect() };
    let opts = PgOptions { tol: 1e-9, ..PgOptions::default() };
    let s = projected_gradient(&d, &u0, &opts, None).map_err(err)?;
    ensure(s.converged, || format!("not converged after {} iterations", s.outer_iterations))?;
    ensure(s.residual <= 1e-8, || format!("fixed-point residual {:e}", s.residual))?;
    for w in s.history.windows(2) {
        ensure(w[1] <= w[0] + 1e-12 * w[0].abs(), || format!("objective increased {} -> {}", w[0], w[1]))?;
    }
    ensure(s.u.values.iter().all(|v| v.min_component() >= 0.0), || "infeasible control".into())?;
    let lam_min = s.lambda.values.iter().map(|v| v.min_component()).fold(f64::INFINITY, f64::min);
    ensure(lam_min >= -1e-7, || format!("multiplier has negative component {lam_min:e}"))?;
    Ok(format!("{} iterations, residual {:.1e}, monotone objective", s.outer_iterations, s.residual))
}

fn gradient_fd(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let p = mixed_problem(2);
    let d = Discretization::new(p.initial_mesh().map_err(err)?, &p, SolverOptions::with_tol(1e-13)).map_err(err)?;
    let u = P0Field { values: (0..d.n_tets()).map(|_| random_vec(rng, 0.5) + Vec3::splat(1.0)).collect() };
    let y = d.solve_state(&u, None).map_err(err)?;
    let pa = d.solve_adjoint(&y, None).map_err(err)?;
    let lambda = multiplier(&d, &u, &pa);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let dir = P0Field { values: (0..d.n_tets()).map(|_| random_vec(rng, 1.0)).collect() };
        let eps = 1e-5;
        let jp = reduced_objective(&d, &u.add_scaled(eps, &dir)).map_err(err)?;
        let jm = reduced_objective(&d, &u.add_scaled(-eps, &dir)).map_err(err)?;
        let fd = (jp - jm) / (2.0 * eps);
        let an = lambda.dot(&dir, &d.mesh);
        worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
    }
    ensure(worst <= 1e-4, || format!("relative gradient mismatch {worst:e}"))?;
    Ok(format!("relative gradient mismatch {worst:.1e} over 5 directions"))
}

fn zero_estimator(rng: &mut ChaCha8Rng) -> Result<String, String> {
    // f = σ(a×x+b), y^d = 2a and u^d ≤ 0 make every residual vanish
    let a = random_vec(rng, 1.0);
    let b = random_vec(rng, 1.0);
    let sigma = rng.gen_range(0.5..5.0);
    let mu_inv = rng.gen_range(0.5..5.0);
    let mut p = affine_problem(a, b, 2);
    p.materials = vec![Material { mu_inv, sigma }; 2];
    let g = affine_vector(a, b);
    p.f = Arc::new(move |x, l| g(x, l) * sigma);
    p.u_d = constant_vector(Vec3::new(-1.0, -2.0, 0.0));
    let d = Discretization::new(p.initial_mesh().map_err(err)?, &p, SolverOptions::with_tol(1e-13)).map_err(err)?;
    let s = projected_gradient(&d, &project_admissible(&d.ud_h), &PgOptions::default(), None).map_err(err)?;
    let r = assemble_indicator(&d, &p, &s, false).map_err(err)?;
    let eta = r.eta2.iter().sum::<f64>().sqrt();
    ensure(eta <= 1e-10, || format!("estimator {eta:e} on an exactly representable solution"))?;
    Ok(format!("estimator {eta:.1e}"))
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn quadrature_exactness(_: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for deg in 1..=5u32 {
        let tet = tet_rule::<f64>(deg as usize).map_err(err)?;
        let tri = tri_rule::<f64>(deg as usize).map_err(err)?;
        for a in 0..=deg {
            for b in 0..=deg - a {
                // ∫ x^a y^b over the unit triangle = a! b! / (a+b+2)!
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let q: f64 = tri.points.iter().zip(&tri.weights).map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32)).sum();
                worst = worst.max(((q - exact) / exact).abs());
                count += 1;
                for c in 0..=deg - a - b {
                    let exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
                    let q: f64 = tet
                        .points
                        .iter()
                        .zip(&tet.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32) * p[3].powi(c as i32))
                        .sum();
                    worst = worst.max(((q - exact) / exact).abs());
                    count += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-13, || format!("relative quadrature error {worst:e}"))?;
    Ok(format!("{count} monomials up to degree 5 integrated to {worst:.1e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let out = run_checks(0x5eed);
        assert_eq!(out.len(), check_names().len());
        for o in &out {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
        let total: f64 = out.iter().map(|o| o.seconds).sum();
        assert!(total < 60.0, "suite took {total} s");
    }
}
