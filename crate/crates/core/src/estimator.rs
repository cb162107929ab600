//! Residual indicator `η_h(T)` and the mixed indicator `η̂_h(T)`.
//!
//! For element-wise constant `μ^{-1}` and `σ` the terms `curl μ^{-1} curl y_h` and
//! `div(σ y_h)` vanish on every element for lowest-order edge elements, and so does the
//! adjoint divergence residual `div(σ p_h)`; these are not integrated. Non-constant
//! coefficients would need the full strong-form residuals.

use crate::assembly::Discretization;
use crate::control::KktSolution;
use crate::error::{input, Result};
use crate::geometry::Vec3;
use crate::problem::ProblemSpec;
use crate::quadrature::{tri_rule, TriRule};
use crate::scalar::Real;
use crate::spaces::{edge_interpolate, project_p_h, EdgeField, WhitneyBasis};

/// Squared element residuals of one element.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElementTerms<T> {
    /// `h_T^2 ‖f + u − σ y‖^2`
    pub y1: T,
    /// `h_T^2 ‖div f‖^2`
    pub y2: T,
    /// `h_T^2 ‖curl y^d + σ p‖^2`
    pub p1: T,
    /// `h_T^2 ‖div(σ p)‖^2`, identically zero for constant `σ`.
    pub p2: T,
    /// `‖p − P_h p‖^2`
    pub p3: T,
}

impl<T: Real> ElementTerms<T> {
    pub fn total(&self) -> T {
        self.y1 + self.y2 + self.p1 + self.p2 + self.p3
    }
}

/// Squared face residuals of one interior face.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FaceTerms<T> {
    /// `h_F ‖[n × μ^{-1} curl y]‖^2`
    pub y1: T,
    /// `h_F ‖[n · (f + u − σ y)]‖^2`
    pub y2: T,
    /// `h_F ‖[n × (−μ^{-1} curl p + curl y)]‖^2`
    pub p1: T,
    /// `h_F ‖[n · σ p]‖^2`
    pub p2: T,
}

impl<T: Real> FaceTerms<T> {
    pub fn total(&self) -> T {
        self.y1 + self.y2 + self.p1 + self.p2
    }
}

#[derive(Clone, Debug)]
pub struct IndicatorReport<T> {
    pub element: Vec<ElementTerms<T>>,
    /// `½ Σ_{F ⊂ ∂T ∩ Ω} η_F^2`
    pub face_share: Vec<T>,
    /// Face terms indexed by mesh face (zero on boundary faces).
    pub faces: Vec<FaceTerms<T>>,
    pub osc_ud2: Vec<T>,
    /// `η_h^2(T) = η_T^2 + ½ Σ_F η_F^2`
    pub eta2: Vec<T>,
    /// `η̂_h^2(T) = η_h^2(T) + osc_T^2(u^d)`
    pub eta_hat2: Vec<T>,
    pub total: T,
    pub argmax: usize,
    pub max: T,
    /// Diagnostics, not part of `η̂`.
    pub osc_yd2: Option<Vec<T>>,
    pub osc_f2: Option<Vec<T>>,
}

impl<T: Real> IndicatorReport<T> {
    /// `η̂_h = (Σ_T η̂^2(T))^{1/2}`.
    pub fn eta_hat(&self) -> T {
        self.total.sqrt()
    }

    pub fn eta_hat_max(&self) -> T {
        self.max.sqrt()
    }
}

struct FaceQuad<T> {
    rule: TriRule<T>,
}

impl<T: Real> FaceQuad<T> {
    fn points(&self, v: [Vec3<T>; 3], area: T) -> impl Iterator<Item = (Vec3<T>, T)> + '_ {
        let scale = area * T::lit(2.0);
        self.rule
            .points
            .iter()
            .zip(&self.rule.weights)
            .map(move |(b, &w)| (v[0] * b[0] + v[1] * b[1] + v[2] * b[2], w * scale))
    }
}

/// Evaluation context of one KKT solution on its discretization.
struct Fields<'a, T> {
    disc: &'a Discretization<T>,
    problem: &'a ProblemSpec<T>,
    sol: &'a KktSolution<T>,
    basis: Vec<WhitneyBasis<T>>,
    y_loc: Vec<[T; 6]>,
    p_loc: Vec<[T; 6]>,
}

impl<'a, T: Real> Fields<'a, T> {
    fn new(disc: &'a Discretization<T>, problem: &'a ProblemSpec<T>, sol: &'a KktSolution<T>) -> Self {
        let m = &disc.mesh;
        let n = m.n_tets();
        Self {
            disc,
            problem,
            sol,
            basis: (0..n).map(|t| WhitneyBasis::new(m.geometry(t))).collect(),
            y_loc: (0..n).map(|t| sol.y.local(m, &disc.dofs, t)).collect(),
            p_loc: (0..n).map(|t| sol.p.local(m, &disc.dofs, t)).collect(),
        }
    }

    fn y(&self, t: usize, x: Vec3<T>) -> Vec3<T> {
        let l = self.disc.mesh.geometry(t).barycentric(x);
        self.basis[t].eval(&self.y_loc[t], &l)
    }

    fn p(&self, t: usize, x: Vec3<T>) -> Vec3<T> {
        let l = self.disc.mesh.geometry(t).barycentric(x);
        self.basis[t].eval(&self.p_loc[t], &l)
    }

    fn curl_y(&self, t: usize) -> Vec3<T> {
        self.basis[t].curl(&self.y_loc[t])
    }

    fn curl_p(&self, t: usize) -> Vec3<T> {
        self.basis[t].curl(&self.p_loc[t])
    }

    /// `f + u − σ y` on element `t`.
    fn state_residual(&self, t: usize, x: Vec3<T>) -> Vec3<T> {
        let l = self.disc.mesh.subdomain()[t];
        (self.problem.f)(x, l) + self.sol.u.values[t] - self.y(t, x) * self.disc.coeffs.sigma[t]
    }
}

/// The five element residuals of element `t`.
pub fn element_residuals<T: Real>(
    disc: &Discretization<T>,
    problem: &ProblemSpec<T>,
    sol: &KktSolution<T>,
    t: usize,
) -> ElementTerms<T> {
    let ctx = Fields::new(disc, problem, sol);
    element_terms(&ctx, t)
}

fn element_terms<T: Real>(ctx: &Fields<'_, T>, t: usize) -> ElementTerms<T> {
    let m = &ctx.disc.mesh;
    let geo = m.geometry(t);
    let h2 = geo.diameter().powi(2);
    let l = m.subdomain()[t];
    let sigma = ctx.disc.coeffs.sigma[t];
    let q = ctx.problem.quadrature.cell(geo);
    let p_mean = ctx.basis[t].eval(&ctx.p_loc[t], &[T::lit(0.25); 4]);
    let mut y1 = T::zero();
    let mut y2 = T::zero();
    let mut p1 = T::zero();
    let mut p3 = T::zero();
    for (&x, &w) in q.points.iter().zip(&q.weights) {
        y1 += w * ctx.state_residual(t, x).norm_sq();
        y2 += w * (ctx.problem.div_f)(x, l).powi(2);
        let px = ctx.p(t, x);
        p1 += w * ((ctx.problem.curl_y_d)(x, l) + px * sigma).norm_sq();
        p3 += w * (px - p_mean).norm_sq();
    }
    ElementTerms { y1: h2 * y1, y2: h2 * y2, p1: h2 * p1, p2: T::zero(), p3 }
}

fn face_terms<T: Real>(ctx: &Fields<'_, T>, fq: &FaceQuad<T>, f: usize, h_f: T) -> Result<FaceTerms<T>> {
    let m = &ctx.disc.mesh;
    let faces = m.faces();
    let [Some(a), Some(b)] = faces.tets[f] else {
        return Err(input(format!("face {f} is a boundary face; boundary faces carry no residual")));
    };
    let n = faces.normal[f];
    let area = faces.area[f];
    let c = &ctx.disc.coeffs;
    let jump_t = |va: Vec3<T>, vb: Vec3<T>| n.cross(va - vb).norm_sq() * area * h_f;
    let y1 = jump_t(ctx.curl_y(a) * c.mu_inv[a], ctx.curl_y(b) * c.mu_inv[b]);
    let p1 = jump_t(
        ctx.curl_y(a) - ctx.curl_p(a) * c.mu_inv[a],
        ctx.curl_y(b) - ctx.curl_p(b) * c.mu_inv[b],
    );
    let v = faces.vertices[f].map(|i| m.vertices()[i]);
    let mut y2 = T::zero();
    let mut p2 = T::zero();
    for (x, w) in fq.points(v, area) {
        let jy = (ctx.state_residual(a, x) - ctx.state_residual(b, x)).dot(n);
        let jp = (ctx.p(a, x) * c.sigma[a] - ctx.p(b, x) * c.sigma[b]).dot(n);
        y2 += w * jy * jy;
        p2 += w * jp * jp;
    }
    Ok(FaceTerms { y1, y2: h_f * y2, p1, p2: h_f * p2 })
}

/// The four face residuals of interior face `f`; boundary faces are rejected.
pub fn face_residuals<T: Real>(
    disc: &Discretization<T>,
    problem: &ProblemSpec<T>,
    sol: &KktSolution<T>,
    f: usize,
) -> Result<FaceTerms<T>> {
    let ctx = Fields::new(disc, problem, sol);
    let fq = FaceQuad { rule: tri_rule(problem.quadrature.degree)? };
    let h_f = disc.mesh.face_diameters()[f];
    face_terms(&ctx, &fq, f, h_f)
}

/// `‖u^d − P_h u^d‖_{0,T}` for every element.
pub fn oscillation_ud<T: Real>(disc: &Discretization<T>) -> Vec<T> {
    disc.ud_osc2.iter().map(|v| v.max(T::zero()).sqrt()).collect()
}

/// Per-element `osc_T(y^d)^2` and `osc_T(f)^2` (diagnostics only).
pub fn oscillation_yd_f<T: Real>(disc: &Discretization<T>, problem: &ProblemSpec<T>) -> Result<(Vec<T>, Vec<T>)> {
    let m = &disc.mesh;
    let policy = &problem.quadrature;
    let sub = m.subdomain();
    let ydh: EdgeField<T> = edge_interpolate(|x| (problem.y_d)(x, 1), m, &disc.dofs);
    let fh = project_p_h(|x, t| (problem.f)(x, sub[t]), m, policy);
    let hs = m.tet_diameters();
    let mut osc_yd = Vec::with_capacity(m.n_tets());
    let mut osc_f = Vec::with_capacity(m.n_tets());
    for t in 0..m.n_tets() {
        let geo = m.geometry(t);
        let q = policy.cell(geo);
        let ch = WhitneyBasis::new(geo).curl(&ydh.local(m, &disc.dofs, t));
        let l = sub[t];
        let cy = q.integrate(|x| ((problem.curl_y_d)(x, l) - ch).norm_sq());
        osc_yd.push(hs[t] * hs[t] * cy);
        let ff = q.integrate(|x| ((problem.f)(x, l) - fh.values[t]).norm_sq() + (problem.div_f)(x, l).powi(2));
        osc_f.push(hs[t] * hs[t] * ff);
    }
    // face part of osc(f): each element receives its own faces in full
    let fq = FaceQuad { rule: tri_rule(policy.degree)? };
    let faces = m.faces();
    let hf = m.face_diameters();
    let mut face_part = vec![T::zero(); m.n_tets()];
    for f in 0..faces.len() {
        let [Some(a), Some(b)] = faces.tets[f] else { continue };
        let v = faces.vertices[f].map(|i| m.vertices()[i]);
        let n = faces.normal[f];
        let mut s = T::zero();
        for (x, w) in fq.points(v, faces.area[f]) {
            let j = ((problem.f)(x, sub[a]) - fh.values[a] - (problem.f)(x, sub[b]) + fh.values[b]).dot(n);
            s += w * j * j;
        }
        let v = (hf[f] * s).sqrt();
        face_part[a] += v;
        face_part[b] += v;
    }
    for t in 0..m.n_tets() {
        let r = osc_f[t].sqrt() + face_part[t];
        osc_f[t] = r * r;
    }
    Ok((osc_yd, osc_f))
}

/// Computes every indicator of a KKT solution. `diagnostics` additionally evaluates
/// `osc(y^d)` and `osc(f)`.
pub fn assemble_indicator<T: Real>(
    disc: &Discretization<T>,
    problem: &ProblemSpec<T>,
    sol: &KktSolution<T>,
    diagnostics: bool,
) -> Result<IndicatorReport<T>> {
    let m = &disc.mesh;
    let ctx = Fields::new(disc, problem, sol);
    let element: Vec<ElementTerms<T>> = (0..m.n_tets()).map(|t| element_terms(&ctx, t)).collect();
    let fq = FaceQuad { rule: tri_rule(problem.quadrature.degree)? };
    let hf = m.face_diameters();
    let half = T::lit(0.5);
    let mut faces = vec![FaceTerms::default(); m.faces().len()];
    let mut face_share = vec![T::zero(); m.n_tets()];
    for f in 0..m.faces().len() {
        if let [Some(a), Some(b)] = m.faces().tets[f] {
            let ft = face_terms(&ctx, &fq, f, hf[f])?;
            let s = ft.total() * half;
            face_share[a] += s;
            face_share[b] += s;
            faces[f] = ft;
        }
    }
    let eta2: Vec<T> = element.iter().zip(&face_share).map(|(e, &s)| e.total() + s).collect();
    let osc_ud2 = disc.ud_osc2.iter().map(|v| v.max(T::zero())).collect::<Vec<_>>();
    let eta_hat2: Vec<T> = eta2.iter().zip(&osc_ud2).map(|(&e, &o)| e + o).collect();
    let total = eta_hat2.iter().copied().sum();
    let (mut argmax, mut max) = (0, T::zero());
    for (t, &v) in eta_hat2.iter().enumerate() {
        if v > max {
            max = v;
            argmax = t;
        }
    }
    let (osc_yd2, osc_f2) = if diagnostics {
        let (a, b) = oscillation_yd_f(disc, problem)?;
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(IndicatorReport { element, face_share, faces, osc_ud2, eta2, eta_hat2, total, argmax, max, osc_yd2, osc_f2 })
}
