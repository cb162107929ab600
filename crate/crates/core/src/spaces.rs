//! Lowest-order Nédélec (Whitney) edge elements and piecewise-constant vector fields.

use crate::error::{input, Result};
use crate::geometry::{TetGeometry, Vec3, TET_EDGES};
use crate::mesh::TetMesh;
use crate::quadrature::QuadraturePolicy;
use crate::scalar::Real;

/// Where the coefficient of a global edge lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeDof {
    Free(usize),
    Boundary(usize),
}

/// Numbering of edge degrees of freedom. Edges on the boundary are constrained and
/// eliminated from the linear systems; edge orientation runs from the lower to the
/// higher global vertex index.
#[derive(Clone, Debug)]
pub struct DofMap {
    edge_dof: Vec<EdgeDof>,
    signs: Vec<[i8; 6]>,
    n_free: usize,
    n_boundary: usize,
}

impl DofMap {
    pub fn new<T: Real>(mesh: &TetMesh<T>) -> Self {
        let mut on_boundary = vec![false; mesh.edges().len()];
        for &(t, f) in mesh.boundary_faces() {
            let face = crate::geometry::TET_FACES[f as usize];
            for (k, &(a, b)) in TET_EDGES.iter().enumerate() {
                if face.contains(&a) && face.contains(&b) {
                    on_boundary[mesh.tet_edges()[t][k]] = true;
                }
            }
        }
        let (mut n_free, mut n_boundary) = (0, 0);
        let edge_dof = on_boundary
            .iter()
            .map(|&b| {
                if b {
                    n_boundary += 1;
                    EdgeDof::Boundary(n_boundary - 1)
                } else {
                    n_free += 1;
                    EdgeDof::Free(n_free - 1)
                }
            })
            .collect();
        let signs = mesh
            .tets()
            .iter()
            .map(|t| TET_EDGES.map(|(a, b)| if t[a] < t[b] { 1 } else { -1 }))
            .collect();
        Self { edge_dof, signs, n_free, n_boundary }
    }

    /// Number of unconstrained (interior) edge degrees of freedom.
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    pub fn n_edges(&self) -> usize {
        self.edge_dof.len()
    }

    pub fn edge_dof(&self, edge: usize) -> EdgeDof {
        self.edge_dof[edge]
    }

    /// Orientation of each local edge of element `t` relative to the global edge.
    pub fn signs(&self, t: usize) -> [i8; 6] {
        self.signs[t]
    }
}

/// Coefficients of an edge element field: free part and constrained boundary part.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeField<T> {
    pub free: Vec<T>,
    pub boundary: Vec<T>,
}

impl<T: Real> EdgeField<T> {
    pub fn zeros(dofs: &DofMap) -> Self {
        Self { free: vec![T::zero(); dofs.n_free()], boundary: vec![T::zero(); dofs.n_boundary()] }
    }

    /// Builds a field from one coefficient per global edge.
    pub fn from_edge_values(dofs: &DofMap, values: &[T]) -> Self {
        let mut f = Self::zeros(dofs);
        for (e, &v) in values.iter().enumerate() {
            match dofs.edge_dof(e) {
                EdgeDof::Free(i) => f.free[i] = v,
                EdgeDof::Boundary(j) => f.boundary[j] = v,
            }
        }
        f
    }

    pub fn edge_values(&self, dofs: &DofMap) -> Vec<T> {
        (0..dofs.n_edges()).map(|e| self.edge_value(dofs, e)).collect()
    }

    pub fn edge_value(&self, dofs: &DofMap, edge: usize) -> T {
        match dofs.edge_dof(edge) {
            EdgeDof::Free(i) => self.free[i],
            EdgeDof::Boundary(j) => self.boundary[j],
        }
    }

    /// Signed local coefficients of element `t` in the Whitney basis of `tets()[t]`.
    pub fn local<R: Real>(&self, mesh: &TetMesh<R>, dofs: &DofMap, t: usize) -> [T; 6] {
        let s = dofs.signs(t);
        let e = mesh.tet_edges()[t];
        std::array::from_fn(|k| {
            let v = self.edge_value(dofs, e[k]);
            if s[k] > 0 {
                v
            } else {
                -v
            }
        })
    }

    pub fn is_finite(&self) -> bool {
        self.free.iter().chain(&self.boundary).all(|v| v.is_finite())
    }
}

/// Piecewise-constant vector field, one value per element.
#[derive(Clone, Debug, PartialEq)]
pub struct P0Field<T> {
    pub values: Vec<Vec3<T>>,
}

impl<T: Real> P0Field<T> {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![Vec3::zero(); n] }
    }

    pub fn constant(n: usize, c: Vec3<T>) -> Self {
        Self { values: vec![c; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// L2 inner product on the mesh.
    pub fn dot(&self, other: &Self, mesh: &TetMesh<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .zip(mesh.geometries())
            .map(|((a, b), g)| a.dot(*b) * g.volume)
            .sum()
    }

    pub fn norm(&self, mesh: &TetMesh<T>) -> T {
        self.dot(self, mesh).sqrt()
    }

    pub fn add_scaled(&self, s: T, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + b * s).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(-T::one(), other)
    }

    pub fn scale(&self, s: T) -> Self {
        Self { values: self.values.iter().map(|&a| a * s).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Injection into a refined mesh (`fine.ancestor()` must refer to the mesh of `self`).
    pub fn inject(&self, fine: &TetMesh<T>) -> Self {
        Self { values: fine.ancestor().iter().map(|&a| self.values[a]).collect() }
    }
}

/// Whitney basis of one element, in the local edge order of `TET_EDGES`.
#[derive(Clone, Copy, Debug)]
pub struct WhitneyBasis<T> {
    pub grad_lambda: [Vec3<T>; 4],
    /// Constant curls `2 ∇λ_a × ∇λ_b`.
    pub curls: [Vec3<T>; 6],
}

impl<T: Real> WhitneyBasis<T> {
    pub fn new(geo: &TetGeometry<T>) -> Self {
        let g = geo.grad_lambda;
        let two = T::lit(2.0);
        Self { grad_lambda: g, curls: TET_EDGES.map(|(a, b)| g[a].cross(g[b]) * two) }
    }

    /// Basis values `λ_a ∇λ_b − λ_b ∇λ_a` at barycentric coordinates `l`.
    pub fn values(&self, l: &[T; 4]) -> [Vec3<T>; 6] {
        let g = &self.grad_lambda;
        TET_EDGES.map(|(a, b)| g[b] * l[a] - g[a] * l[b])
    }

    /// Element means `(∇λ_b − ∇λ_a) / 4` (multiply by the volume for the integral).
    pub fn means(&self) -> [Vec3<T>; 6] {
        let q = T::lit(0.25);
        let g = &self.grad_lambda;
        TET_EDGES.map(|(a, b)| (g[b] - g[a]) * q)
    }

    pub fn eval(&self, coeffs: &[T; 6], l: &[T; 4]) -> Vec3<T> {
        self.values(l).iter().zip(coeffs).map(|(&p, &c)| p * c).sum()
    }

    pub fn curl(&self, coeffs: &[T; 6]) -> Vec3<T> {
        self.curls.iter().zip(coeffs).map(|(&p, &c)| p * c).sum()
    }
}

pub fn whitney_basis<T: Real>(geo: &TetGeometry<T>) -> WhitneyBasis<T> {
    WhitneyBasis::new(geo)
}

/// Evaluates an edge field inside element `t` at barycentric coordinates `l`.
pub fn eval_edge_field<T: Real>(field: &EdgeField<T>, mesh: &TetMesh<T>, dofs: &DofMap, t: usize, l: &[T; 4]) -> Vec3<T> {
    WhitneyBasis::new(mesh.geometry(t)).eval(&field.local(mesh, dofs, t), l)
}

pub fn eval_curl<T: Real>(field: &EdgeField<T>, mesh: &TetMesh<T>, dofs: &DofMap, t: usize) -> Vec3<T> {
    WhitneyBasis::new(mesh.geometry(t)).curl(&field.local(mesh, dofs, t))
}

/// Curl of `field` on every element.
pub fn curls<T: Real>(field: &EdgeField<T>, mesh: &TetMesh<T>, dofs: &DofMap) -> Vec<Vec3<T>> {
    (0..mesh.n_tets()).map(|t| eval_curl(field, mesh, dofs, t)).collect()
}

const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Line integral `∫_e g · t ds` along the segment from `a` to `b` (2-point Gauss).
pub fn edge_integral<T: Real, G: Fn(Vec3<T>) -> Vec3<T>>(g: &G, a: Vec3<T>, b: Vec3<T>) -> T {
    let d = b - a;
    let half = T::lit(0.5);
    GAUSS2.iter().map(|&s| g(a + d * T::lit(s)).dot(d) * half).sum()
}

/// Edge interpolant: the degree of freedom of edge `e` is `∫_e g · t ds`.
pub fn edge_interpolate<T: Real, G: Fn(Vec3<T>) -> Vec3<T>>(g: G, mesh: &TetMesh<T>, dofs: &DofMap) -> EdgeField<T> {
    let v = mesh.vertices();
    let values: Vec<T> = mesh.edges().vertices.iter().map(|&[a, b]| edge_integral(&g, v[a], v[b])).collect();
    EdgeField::from_edge_values(dofs, &values)
}

/// Interpolant of a gradient field `∇ψ` from its potential: the edge integrals are
/// endpoint differences of `ψ`. Exact for any `ψ`, including singular gradients.
pub fn gradient_interpolate<T: Real, P: Fn(Vec3<T>) -> T>(psi: P, mesh: &TetMesh<T>, dofs: &DofMap) -> EdgeField<T> {
    let pv: Vec<T> = mesh.vertices().iter().map(|&x| psi(x)).collect();
    let values: Vec<T> = mesh.edges().vertices.iter().map(|&[a, b]| pv[b] - pv[a]).collect();
    EdgeField::from_edge_values(dofs, &values)
}

/// Re-interpolates a field given on the parent mesh onto a refined mesh. Every fine
/// edge lies inside the ancestor element of any fine element containing it, so the
/// coarse field is evaluated there; the result represents the same function.
pub fn transfer_edge_field<T: Real>(
    field: &EdgeField<T>,
    coarse: &TetMesh<T>,
    coarse_dofs: &DofMap,
    fine: &TetMesh<T>,
    fine_dofs: &DofMap,
) -> EdgeField<T> {
    let v = fine.vertices();
    let mut values = vec![T::zero(); fine.edges().len()];
    let mut done = vec![false; values.len()];
    for t in 0..fine.n_tets() {
        let parent = fine.ancestor()[t];
        let basis = WhitneyBasis::new(coarse.geometry(parent));
        let coeffs = field.local(coarse, coarse_dofs, parent);
        let geo = coarse.geometry(parent);
        for &e in &fine.tet_edges()[t] {
            if done[e] {
                continue;
            }
            let [a, b] = fine.edges().vertices[e];
            let g = |x: Vec3<T>| basis.eval(&coeffs, &geo.barycentric(x));
            values[e] = edge_integral(&g, v[a], v[b]);
            done[e] = true;
        }
    }
    EdgeField::from_edge_values(fine_dofs, &values)
}

/// Element means `(1/|T|) ∫_T v` by quadrature. `v` also receives the element index.
pub fn project_p_h<T: Real, V: Fn(Vec3<T>, usize) -> Vec3<T>>(v: V, mesh: &TetMesh<T>, policy: &QuadraturePolicy<T>) -> P0Field<T> {
    P0Field {
        values: mesh
            .geometries()
            .iter()
            .enumerate()
            .map(|(t, g)| policy.cell(g).integrate_vec(|x| v(x, t)) * (T::one() / g.volume))
            .collect(),
    }
}

/// Componentwise `max{0, v}`.
pub fn project_admissible<T: Real>(v: &P0Field<T>) -> P0Field<T> {
    P0Field { values: v.values.iter().map(|x| x.max_zero()).collect() }
}

/// Element means of an edge field (the mean of an affine field is its centroid value).
pub fn edge_field_means<T: Real>(field: &EdgeField<T>, mesh: &TetMesh<T>, dofs: &DofMap) -> P0Field<T> {
    let q = T::lit(0.25);
    P0Field { values: (0..mesh.n_tets()).map(|t| eval_edge_field(field, mesh, dofs, t, &[q; 4])).collect() }
}

pub(crate) fn check_len<T>(field: &P0Field<T>, n: usize) -> Result<()> {
    if field.values.len() != n {
        return Err(input(format!("P0 field has {} values, mesh has {n} elements", field.values.len())));
    }
    Ok(())
}
