//! Sparse assembly of `B(u, v) = (μ^{-1} curl u, curl v) + (σ u, v)`, load vectors and the
//! boundary lifting, bundled into a [`Discretization`] of one problem on one mesh.

use crate::error::{input, Error, Result};
use crate::geometry::{TetGeometry, Vec3, TET_EDGES};
use crate::linsolve::{SolveReport, SolverOptions, SpdSolver};
use crate::mesh::TetMesh;
use crate::problem::{Lifting, ProblemSpec};
use crate::quadrature::QuadraturePolicy;
use crate::scalar::Real;
use crate::spaces::{edge_interpolate, gradient_interpolate, project_p_h, DofMap, EdgeDof, EdgeField, P0Field, WhitneyBasis};
use crate::sparse::CsrMatrix;

/// Per-element constant coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients<T> {
    pub mu_inv: Vec<T>,
    pub sigma: Vec<T>,
}

impl<T: Real> Coefficients<T> {
    pub fn constant(n: usize, mu_inv: T, sigma: T) -> Self {
        Self { mu_inv: vec![mu_inv; n], sigma: vec![sigma; n] }
    }

    pub fn from_problem(mesh: &TetMesh<T>, problem: &ProblemSpec<T>) -> Result<Self> {
        let mut c = Self { mu_inv: Vec::with_capacity(mesh.n_tets()), sigma: Vec::with_capacity(mesh.n_tets()) };
        for &l in mesh.subdomain() {
            let m = problem.material(l)?;
            c.mu_inv.push(m.mu_inv);
            c.sigma.push(m.sigma);
        }
        Ok(c)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.mu_inv.len() != n || self.sigma.len() != n {
            return Err(input("coefficient arrays do not match the mesh"));
        }
        for (t, (&m, &s)) in self.mu_inv.iter().zip(&self.sigma).enumerate() {
            if !(m > T::zero()) || !(s > T::zero()) {
                return Err(input(format!("element {t}: coefficients must be positive (mu_inv = {m}, sigma = {s})")));
            }
        }
        Ok(())
    }
}

/// `∫_T φ_i · φ_j` for the unsigned Whitney basis, from `∫ λ_a λ_b = |T| (1 + δ_ab) / 20`.
pub fn element_mass<T: Real>(geo: &TetGeometry<T>) -> [[T; 6]; 6] {
    let g = &geo.grad_lambda;
    let m = |a: usize, b: usize| geo.volume * if a == b { T::lit(0.1) } else { T::lit(0.05) };
    let gg = |a: usize, b: usize| g[a].dot(g[b]);
    let mut out = [[T::zero(); 6]; 6];
    for (i, &(a, b)) in TET_EDGES.iter().enumerate() {
        for (j, &(c, d)) in TET_EDGES.iter().enumerate() {
            out[i][j] = m(a, c) * gg(b, d) - m(a, d) * gg(b, c) - m(b, c) * gg(a, d) + m(b, d) * gg(a, c);
        }
    }
    out
}

/// Signed element matrix of `B` in the local edge order.
pub fn element_matrix<T: Real>(geo: &TetGeometry<T>, signs: [i8; 6], mu_inv: T, sigma: T) -> [[T; 6]; 6] {
    let basis = WhitneyBasis::new(geo);
    let mass = element_mass(geo);
    let mut k = [[T::zero(); 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            let v = mu_inv * geo.volume * basis.curls[i].dot(basis.curls[j]) + sigma * mass[i][j];
            k[i][j] = if signs[i] == signs[j] { v } else { -v };
        }
    }
    k
}

/// Free-free and free-boundary blocks of `B`.
pub fn assemble_b_blocks<T: Real>(
    mesh: &TetMesh<T>,
    dofs: &DofMap,
    coeffs: &Coefficients<T>,
) -> Result<(CsrMatrix<T>, CsrMatrix<T>)> {
    coeffs.validate(mesh.n_tets())?;
    let mut ff = Vec::with_capacity(36 * mesh.n_tets());
    let mut fb = Vec::new();
    for t in 0..mesh.n_tets() {
        let k = element_matrix(mesh.geometry(t), dofs.signs(t), coeffs.mu_inv[t], coeffs.sigma[t]);
        let e = mesh.tet_edges()[t];
        for i in 0..6 {
            let EdgeDof::Free(r) = dofs.edge_dof(e[i]) else { continue };
            for j in 0..6 {
                match dofs.edge_dof(e[j]) {
                    EdgeDof::Free(c) => ff.push((r, c, k[i][j])),
                    EdgeDof::Boundary(c) => fb.push((r, c, k[i][j])),
                }
            }
        }
    }
    Ok((
        CsrMatrix::from_triplets(dofs.n_free(), dofs.n_free(), &ff)?,
        CsrMatrix::from_triplets(dofs.n_free(), dofs.n_boundary(), &fb)?,
    ))
}

/// `B` restricted to the free degrees of freedom.
pub fn assemble_b<T: Real>(mesh: &TetMesh<T>, dofs: &DofMap, coeffs: &Coefficients<T>) -> Result<CsrMatrix<T>> {
    Ok(assemble_b_blocks(mesh, dofs, coeffs)?.0)
}

/// `B(v, v)` for a full field, boundary part included.
pub fn energy<T: Real>(field: &EdgeField<T>, mesh: &TetMesh<T>, dofs: &DofMap, coeffs: &Coefficients<T>) -> T {
    (0..mesh.n_tets())
        .map(|t| {
            let c = field.local(mesh, dofs, t);
            let k = element_matrix(mesh.geometry(t), [1; 6], coeffs.mu_inv[t], coeffs.sigma[t]);
            let mut s = T::zero();
            for i in 0..6 {
                for j in 0..6 {
                    s += c[i] * k[i][j] * c[j];
                }
            }
            s
        })
        .sum()
}

/// `(f + u, φ_i)` per free degree of freedom, minus `B(lifting, φ_i)` when a lifting
/// (boundary values of an edge field) is given together with the free-boundary block.
#[allow(clippy::too_many_arguments)]
pub fn assemble_state_rhs<T: Real, F: Fn(Vec3<T>, usize) -> Vec3<T>>(
    mesh: &TetMesh<T>,
    dofs: &DofMap,
    f: F,
    u: &P0Field<T>,
    lifting: Option<(&EdgeField<T>, &CsrMatrix<T>)>,
    policy: &QuadraturePolicy<T>,
) -> Result<Vec<T>> {
    crate::spaces::check_len(u, mesh.n_tets())?;
    let mut rhs = vec![T::zero(); dofs.n_free()];
    for t in 0..mesh.n_tets() {
        let geo = mesh.geometry(t);
        let basis = WhitneyBasis::new(geo);
        let q = policy.cell(geo);
        let means = basis.means();
        let mut loc = [T::zero(); 6];
        for ((x, l), &w) in q.points.iter().zip(&q.bary).zip(&q.weights) {
            let fx = f(*x, t);
            let phi = basis.values(l);
            for k in 0..6 {
                loc[k] += w * fx.dot(phi[k]);
            }
        }
        let s = dofs.signs(t);
        let e = mesh.tet_edges()[t];
        for k in 0..6 {
            if let EdgeDof::Free(i) = dofs.edge_dof(e[k]) {
                let v = loc[k] + u.values[t].dot(means[k]) * geo.volume;
                rhs[i] += if s[k] > 0 { v } else { -v };
            }
        }
    }
    if let Some((g, kfb)) = lifting {
        let kg = kfb.mul_vec(&g.boundary);
        for (r, v) in rhs.iter_mut().zip(kg) {
            *r -= v;
        }
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("state load vector is not finite (data evaluated at a singular point?)".into()));
    }
    Ok(rhs)
}

/// `∫_Ω (curl y − y^d) · curl φ_i` per free degree of freedom; `yd_int[t] = ∫_T y^d`.
pub fn adjoint_rhs_from_integrals<T: Real>(
    mesh: &TetMesh<T>,
    dofs: &DofMap,
    y: &EdgeField<T>,
    yd_int: &[Vec3<T>],
) -> Vec<T> {
    let mut rhs = vec![T::zero(); dofs.n_free()];
    for t in 0..mesh.n_tets() {
        let geo = mesh.geometry(t);
        let basis = WhitneyBasis::new(geo);
        let c = basis.curl(&y.local(mesh, dofs, t));
        let w = c * geo.volume - yd_int[t];
        let s = dofs.signs(t);
        let e = mesh.tet_edges()[t];
        for k in 0..6 {
            if let EdgeDof::Free(i) = dofs.edge_dof(e[k]) {
                let v = w.dot(basis.curls[k]);
                rhs[i] += if s[k] > 0 { v } else { -v };
            }
        }
    }
    rhs
}

pub fn assemble_adjoint_rhs<T: Real, Y: Fn(Vec3<T>, usize) -> Vec3<T>>(
    mesh: &TetMesh<T>,
    dofs: &DofMap,
    y: &EdgeField<T>,
    y_d: Y,
    policy: &QuadraturePolicy<T>,
) -> Vec<T> {
    let yd_int: Vec<Vec3<T>> =
        (0..mesh.n_tets()).map(|t| policy.cell(mesh.geometry(t)).integrate_vec(|x| y_d(x, t))).collect();
    adjoint_rhs_from_integrals(mesh, dofs, y, &yd_int)
}

/// Linear solve statistics accumulated over the lifetime of a [`Discretization`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub solves: usize,
    pub iterations: usize,
    pub unconverged: usize,
}

/// One problem discretized on one mesh: matrices, loads, data integrals.
pub struct Discretization<T> {
    pub mesh: TetMesh<T>,
    pub dofs: DofMap,
    pub coeffs: Coefficients<T>,
    pub alpha: T,
    /// `K_ff` with its preconditioner.
    pub system: SpdSolver<T>,
    pub k_fb: CsrMatrix<T>,
    /// Boundary values of the state (zero free part).
    pub lifting: EdgeField<T>,
    /// `(f, φ_i) − B(lifting, φ_i)`.
    pub f_load: Vec<T>,
    /// `∫_T y^d` and `∫_Ω |y^d|^2`.
    pub yd_int: Vec<Vec3<T>>,
    pub yd_sq: T,
    /// `u_h^d = P_h u^d` and `‖u^d − P_h u^d‖^2_{0,T}`.
    pub ud_h: P0Field<T>,
    pub ud_osc2: Vec<T>,
    stats: std::cell::Cell<SolveStats>,
}

impl<T: Real> Discretization<T> {
    pub fn new(mesh: TetMesh<T>, problem: &ProblemSpec<T>, solver: SolverOptions) -> Result<Self> {
        problem.validate()?;
        let dofs = DofMap::new(&mesh);
        let coeffs = Coefficients::from_problem(&mesh, problem)?;
        let (k_ff, k_fb) = assemble_b_blocks(&mesh, &dofs, &coeffs)?;
        let lifting = match &problem.lifting {
            Lifting::Homogeneous => EdgeField::zeros(&dofs),
            Lifting::Field(g) => {
                let mut l = edge_interpolate(|x| g(x), &mesh, &dofs);
                l.free.iter_mut().for_each(|v| *v = T::zero());
                l
            }
            Lifting::Gradient(psi) => {
                let mut l = gradient_interpolate(|x| psi(x), &mesh, &dofs);
                l.free.iter_mut().for_each(|v| *v = T::zero());
                l
            }
        };
        if !lifting.is_finite() {
            return Err(Error::Numerical("boundary lifting is not finite".into()));
        }
        let policy = &problem.quadrature;
        let sub = mesh.subdomain();
        let zero_u = P0Field::zeros(mesh.n_tets());
        let f_load = assemble_state_rhs(&mesh, &dofs, |x, t| (problem.f)(x, sub[t]), &zero_u, Some((&lifting, &k_fb)), policy)?;
        let mut yd_int = Vec::with_capacity(mesh.n_tets());
        let mut yd_sq = T::zero();
        let mut ud_osc2 = Vec::with_capacity(mesh.n_tets());
        let ud_h = project_p_h(|x, t| (problem.u_d)(x, sub[t]), &mesh, policy);
        for t in 0..mesh.n_tets() {
            let q = policy.cell(mesh.geometry(t));
            let l = sub[t];
            yd_int.push(q.integrate_vec(|x| (problem.y_d)(x, l)));
            yd_sq += q.integrate(|x| (problem.y_d)(x, l).norm_sq());
            let m = ud_h.values[t];
            ud_osc2.push(q.integrate(|x| ((problem.u_d)(x, l) - m).norm_sq()));
        }
        Ok(Self {
            mesh,
            dofs,
            coeffs,
            alpha: problem.alpha,
            system: SpdSolver::new(k_ff, solver)?,
            k_fb,
            lifting,
            f_load,
            yd_int,
            yd_sq,
            ud_h,
            ud_osc2,
            stats: std::cell::Cell::new(SolveStats::default()),
        })
    }

    pub fn k_ff(&self) -> &CsrMatrix<T> {
        self.system.matrix()
    }

    pub fn n_tets(&self) -> usize {
        self.mesh.n_tets()
    }

    pub fn stats(&self) -> SolveStats {
        self.stats.get()
    }

    /// `(u, φ_i)` per free degree of freedom.
    pub fn control_load(&self, u: &P0Field<T>) -> Vec<T> {
        let mut rhs = vec![T::zero(); self.dofs.n_free()];
        for t in 0..self.n_tets() {
            let geo = self.mesh.geometry(t);
            let means = WhitneyBasis::new(geo).means();
            let s = self.dofs.signs(t);
            let e = self.mesh.tet_edges()[t];
            for k in 0..6 {
                if let EdgeDof::Free(i) = self.dofs.edge_dof(e[k]) {
                    let v = u.values[t].dot(means[k]) * geo.volume;
                    rhs[i] += if s[k] > 0 { v } else { -v };
                }
            }
        }
        rhs
    }

    /// Solves `K_ff x = rhs`.
    pub fn solve_free(&self, rhs: &[T], x0: Option<&[T]>) -> Result<(Vec<T>, SolveReport)> {
        let (x, rep) = self.system.solve(rhs, x0)?;
        let mut s = self.stats.get();
        s.solves += 1;
        s.iterations += rep.iterations;
        if !rep.converged {
            s.unconverged += 1;
        }
        self.stats.set(s);
        Ok((x, rep))
    }

    /// State for control `u`: `B(y, φ) = (f + u, φ)` with the lifted boundary values.
    pub fn solve_state(&self, u: &P0Field<T>, guess: Option<&EdgeField<T>>) -> Result<EdgeField<T>> {
        crate::spaces::check_len(u, self.n_tets())?;
        let mut rhs = self.control_load(u);
        for (r, &f) in rhs.iter_mut().zip(&self.f_load) {
            *r += f;
        }
        let (x, _) = self.solve_free(&rhs, guess.map(|g| g.free.as_slice()))?;
        Ok(EdgeField { free: x, boundary: self.lifting.boundary.clone() })
    }

    /// Response `ỹ(d)` of the state to a control increment `d` with zero data.
    pub fn solve_response(&self, d: &P0Field<T>) -> Result<EdgeField<T>> {
        let (x, _) = self.solve_free(&self.control_load(d), None)?;
        Ok(EdgeField { free: x, boundary: vec![T::zero(); self.dofs.n_boundary()] })
    }

    /// Adjoint: `B(p, φ) = (curl y − y^d, curl φ)`, homogeneous boundary values.
    pub fn solve_adjoint(&self, y: &EdgeField<T>, guess: Option<&EdgeField<T>>) -> Result<EdgeField<T>> {
        let rhs = adjoint_rhs_from_integrals(&self.mesh, &self.dofs, y, &self.yd_int);
        let (x, _) = self.solve_free(&rhs, guess.map(|g| g.free.as_slice()))?;
        Ok(EdgeField { free: x, boundary: vec![T::zero(); self.dofs.n_boundary()] })
    }

    pub fn curls(&self, y: &EdgeField<T>) -> Vec<Vec3<T>> {
        crate::spaces::curls(y, &self.mesh, &self.dofs)
    }

    /// `(curl a, curl b)_{0,Ω}`.
    pub fn curl_inner(&self, a: &EdgeField<T>, b: &EdgeField<T>) -> T {
        (0..self.n_tets())
            .map(|t| {
                let basis = WhitneyBasis::new(self.mesh.geometry(t));
                let ca = basis.curl(&a.local(&self.mesh, &self.dofs, t));
                let cb = basis.curl(&b.local(&self.mesh, &self.dofs, t));
                ca.dot(cb) * self.mesh.geometry(t).volume
            })
            .sum()
    }

    /// `(y^d − curl y, curl z)_{0,Ω}`.
    pub fn tracking_inner(&self, y: &EdgeField<T>, z: &EdgeField<T>) -> T {
        (0..self.n_tets())
            .map(|t| {
                let geo = self.mesh.geometry(t);
                let basis = WhitneyBasis::new(geo);
                let cy = basis.curl(&y.local(&self.mesh, &self.dofs, t));
                let cz = basis.curl(&z.local(&self.mesh, &self.dofs, t));
                (self.yd_int[t] - cy * geo.volume).dot(cz)
            })
            .sum()
    }

    /// `½‖curl y − y^d‖² + α/2 ‖u − u^d‖²`, exact up to the data quadrature.
    pub fn objective(&self, u: &P0Field<T>, y: &EdgeField<T>) -> T {
        let mut track = self.yd_sq;
        let mut reg = T::zero();
        for t in 0..self.n_tets() {
            let geo = self.mesh.geometry(t);
            let c = WhitneyBasis::new(geo).curl(&y.local(&self.mesh, &self.dofs, t));
            track += c.norm_sq() * geo.volume - T::lit(2.0) * c.dot(self.yd_int[t]);
            reg += (u.values[t] - self.ud_h.values[t]).norm_sq() * geo.volume + self.ud_osc2[t];
        }
        let half = T::lit(0.5);
        half * track.max(T::zero()) + half * self.alpha * reg
    }
}
