//! Projected gradient solver for the discrete optimality system.
//!
//! With `λ = P_h p + α (u − u_h^d)` the iteration is
//! `u ← max{0, u − s λ}`, where `s` minimizes `J_h(u − s λ)` without the projection.

use crate::assembly::Discretization;
use crate::error::{input, Result};
use crate::scalar::Real;
use crate::spaces::{edge_field_means, project_admissible, EdgeField, P0Field};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgOptions {
    /// Stop when `‖u − max{0, −P_h p/α + u_h^d}‖ ≤ tol (1 + ‖u‖)`.
    pub tol: f64,
    pub max_outer: usize,
    pub max_backtrack: usize,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_outer: 1000, max_backtrack: 30 }
    }
}

#[derive(Clone, Debug)]
pub struct KktSolution<T> {
    pub y: EdgeField<T>,
    pub p: EdgeField<T>,
    pub u: P0Field<T>,
    pub lambda: P0Field<T>,
    pub objective: T,
    pub residual: T,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial guess.
    pub history: Vec<T>,
}

pub fn add_scaled<T: Real>(a: &EdgeField<T>, s: T, b: &EdgeField<T>) -> EdgeField<T> {
    EdgeField {
        free: a.free.iter().zip(&b.free).map(|(&x, &y)| x + y * s).collect(),
        boundary: a.boundary.iter().zip(&b.boundary).map(|(&x, &y)| x + y * s).collect(),
    }
}

/// `λ = P_h p + α (u − u_h^d)`, the gradient of the reduced objective.
pub fn multiplier<T: Real>(disc: &Discretization<T>, u: &P0Field<T>, p: &EdgeField<T>) -> P0Field<T> {
    let ph = edge_field_means(p, &disc.mesh, &disc.dofs);
    ph.add_scaled(disc.alpha, &u.sub(&disc.ud_h))
}

/// `max{0, −P_h p / α + u_h^d}`.
pub fn control_from_adjoint<T: Real>(disc: &Discretization<T>, p: &EdgeField<T>) -> P0Field<T> {
    let ph = edge_field_means(p, &disc.mesh, &disc.dofs);
    project_admissible(&disc.ud_h.add_scaled(-T::one() / disc.alpha, &ph))
}

pub fn fixed_point_residual<T: Real>(disc: &Discretization<T>, u: &P0Field<T>, p: &EdgeField<T>) -> T {
    u.sub(&control_from_adjoint(disc, p)).norm(&disc.mesh)
}

/// Reduced objective `J_h(u) = J(y(u), u)`.
pub fn reduced_objective<T: Real>(disc: &Discretization<T>, u: &P0Field<T>) -> Result<T> {
    let y = disc.solve_state(u, None)?;
    Ok(disc.objective(u, &y))
}

/// Runs projected gradient from the feasible `u0`. `warm` optionally provides guesses
/// for the state and adjoint solves.
pub fn projected_gradient<T: Real>(
    disc: &Discretization<T>,
    u0: &P0Field<T>,
    opts: &PgOptions,
    warm: Option<(&EdgeField<T>, &EdgeField<T>)>,
) -> Result<KktSolution<T>> {
    crate::spaces::check_len(u0, disc.n_tets())?;
    if u0.values.iter().any(|v| !(v.min_component() >= T::zero())) {
        return Err(input("initial control must be admissible (componentwise nonnegative)"));
    }
    let mesh = &disc.mesh;
    let tol = T::lit(opts.tol);
    let mut u = u0.clone();
    let mut y = disc.solve_state(&u, warm.map(|w| w.0))?;
    let mut p_guess = warm.map(|w| w.1.clone());
    let mut j = disc.objective(&u, &y);
    let mut history = vec![j];
    let mut outer = 0;
    loop {
        let p = disc.solve_adjoint(&y, p_guess.as_ref())?;
        let lambda = multiplier(disc, &u, &p);
        let residual = fixed_point_residual(disc, &u, &p);
        let unorm = u.norm(mesh);
        let converged = residual <= tol * (T::one() + unorm);
        if converged || outer >= opts.max_outer {
            return Ok(KktSolution { y, p, u, lambda, objective: j, residual, outer_iterations: outer, converged, history });
        }
        let d = lambda.scale(-T::one());
        let yt = disc.solve_response(&d)?;
        let num = disc.alpha * disc.ud_h.sub(&u).dot(&d, mesh) + disc.tracking_inner(&y, &yt);
        let den = disc.curl_inner(&yt, &yt) + disc.alpha * d.dot(&d, mesh);
        if !(den > T::zero()) {
            // zero gradient but residual above tolerance cannot happen for α > 0
            return Ok(KktSolution { y, p, u, lambda, objective: j, residual, outer_iterations: outer, converged, history });
        }
        let mut s = num / den;
        let mut accepted = None;
        for _ in 0..=opts.max_backtrack {
            let trial = u.add_scaled(s, &d);
            let u_new = project_admissible(&trial);
            // the increment of J is evaluated from its expansion, free of cancellation
            let (dy, dj) = if u_new == trial {
                (None, s * (s * den * T::lit(0.5) - num))
            } else {
                let du = u_new.sub(&u);
                let dy = disc.solve_response(&du)?;
                let dj = disc.curl_inner(&dy, &dy) * T::lit(0.5) - disc.tracking_inner(&y, &dy)
                    + disc.alpha * (u.sub(&disc.ud_h).dot(&du, mesh) + du.dot(&du, mesh) * T::lit(0.5));
                (Some(dy), dj)
            };
            if dj <= T::zero() {
                let y_new = match dy {
                    None => add_scaled(&y, s, &yt),
                    Some(dy) => add_scaled(&y, T::one(), &dy),
                };
                let j_new = disc.objective(&u_new, &y_new);
                accepted = Some((u_new, y_new, j_new));
                break;
            }
            s *= T::lit(0.5);
        }
        outer += 1;
        p_guess = Some(p);
        match accepted {
            Some((un, yn, jn)) => {
                u = un;
                y = yn;
                j = jn;
                history.push(j);
            }
            None => {
                // no descent within round-off; report the current iterate
                let p = disc.solve_adjoint(&y, p_guess.as_ref())?;
                let lambda = multiplier(disc, &u, &p);
                let residual = fixed_point_residual(disc, &u, &p);
                let converged = residual <= tol * (T::one() + u.norm(mesh));
                return Ok(KktSolution { y, p, u, lambda, objective: j, residual, outer_iterations: outer, converged, history });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{benchmark_inclusion, benchmark_lshape};
    use crate::geometry::Vec3;
    use crate::linsolve::SolverOptions;
    use crate::problem::{affine_vector, constant_vector, ProblemSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc_for(p: &ProblemSpec<f64>) -> Discretization<f64> {
        let m = p.initial_mesh().unwrap();
        Discretization::new(m, p, SolverOptions::with_tol(1e-12)).unwrap()
    }

    fn start(d: &Discretization<f64>) -> P0Field<f64> {
        project_admissible(&d.ud_h)
    }

    /// A control problem with a nontrivial active set: y^d is the curl of a rotation
    /// and u^d has mixed signs.
    fn mixed_problem() -> ProblemSpec<f64> {
        let mut p = benchmark_inclusion::<f64>(2).unwrap();
        p.y_d = constant_vector(Vec3::new(0.5, -1.0, 2.0));
        p.u_d = affine_vector(Vec3::new(1.0, 0.5, -0.3), Vec3::new(0.2, -0.4, 0.1));
        p
    }

    #[test]
    fn lshape_control_vanishes_in_the_limit_structure() {
        let p = benchmark_lshape::<f64>(1).unwrap();
        let d = disc_for(&p);
        let sol = projected_gradient(&d, &start(&d), &PgOptions::default(), None).unwrap();
        assert!(sol.converged);
        assert!(sol.u.values.iter().all(|v| v.min_component() >= 0.0));
    }

    #[test]
    fn inclusion_converges_quickly() {
        let p = benchmark_inclusion::<f64>(2).unwrap();
        let d = disc_for(&p);
        let sol = projected_gradient(&d, &start(&d), &PgOptions::default(), None).unwrap();
        assert!(sol.converged, "residual {}", sol.residual);
        assert!(sol.outer_iterations <= 200);
        let u_norm = sol.u.norm(&d.mesh);
        assert!(sol.residual <= 1e-8 * (1.0 + u_norm));
    }

    #[test]
    fn descent_feasibility_and_variational_inequality() {
        let p = mixed_problem();
        let d = disc_for(&p);
        let sol = projected_gradient(&d, &start(&d), &PgOptions::default(), None).unwrap();
        assert!(sol.converged, "residual {}", sol.residual);
        for w in sol.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        assert!(sol.u.values.iter().all(|v| v.min_component() >= 0.0));
        assert!(sol.lambda.values.iter().all(|v| v.min_component() >= -1e-7));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let v = P0Field {
                values: (0..d.n_tets())
                    .map(|_| Vec3::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)))
                    .collect(),
            };
            let diff = v.sub(&sol.u);
            assert!(sol.lambda.dot(&diff, &d.mesh) >= -1e-8 * diff.norm(&d.mesh));
        }
        // some components are active and some are not
        let active = sol.u.values.iter().flat_map(|v| v.to_array()).filter(|&c| c == 0.0).count();
        assert!(active > 0 && active < 3 * d.n_tets());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = mixed_problem();
        let d = disc_for(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u = P0Field {
            values: (0..d.n_tets())
                .map(|_| Vec3::new(rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5)))
                .collect(),
        };
        let y = d.solve_state(&u, None).unwrap();
        let pa = d.solve_adjoint(&y, None).unwrap();
        let lambda = multiplier(&d, &u, &pa);
        for _ in 0..5 {
            let delta = P0Field {
                values: (0..d.n_tets())
                    .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect(),
            };
            let eps = 1e-5;
            let jp = reduced_objective(&d, &u.add_scaled(eps, &delta)).unwrap();
            let jm = reduced_objective(&d, &u.add_scaled(-eps, &delta)).unwrap();
            let fd = (jp - jm) / (2.0 * eps);
            let an = lambda.dot(&delta, &d.mesh);
            assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-3), "fd {fd} analytic {an}");
        }
    }
}
