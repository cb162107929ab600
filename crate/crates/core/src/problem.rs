//! Problem data: coefficients, source and target fields, boundary lifting, exact solution.

use std::sync::Arc;

use crate::error::{input, Result};
use crate::geometry::{TetGeometry, Vec3};
use crate::mesh::TetMesh;
use crate::quadrature::QuadraturePolicy;
use crate::scalar::Real;

/// Vector field evaluated at a point of an element with the given subdomain label.
pub type VectorFn<T> = Arc<dyn Fn(Vec3<T>, u32) -> Vec3<T> + Send + Sync>;
pub type ScalarFn<T> = Arc<dyn Fn(Vec3<T>, u32) -> T + Send + Sync>;
pub type PotentialFn<T> = Arc<dyn Fn(Vec3<T>) -> T + Send + Sync>;
pub type MeshBuilder<T> = Arc<dyn Fn() -> Result<TetMesh<T>> + Send + Sync>;
pub type Classifier<T> = Arc<dyn Fn(&TetGeometry<T>) -> u32 + Send + Sync>;

/// Coefficients of one subdomain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material<T> {
    pub mu_inv: T,
    pub sigma: T,
}

/// Dirichlet data for the state, imposed through its edge interpolant.
#[derive(Clone)]
pub enum Lifting<T> {
    Homogeneous,
    /// Tangential data `g`, interpolated by edge quadrature.
    Field(Arc<dyn Fn(Vec3<T>) -> Vec3<T> + Send + Sync>),
    /// `g = ∇ψ` given by its potential; edge values are exact endpoint differences.
    Gradient(PotentialFn<T>),
}

#[derive(Clone)]
pub struct ExactSolution<T> {
    pub y: VectorFn<T>,
    pub curl_y: VectorFn<T>,
    pub p: VectorFn<T>,
    pub curl_p: VectorFn<T>,
    pub u: VectorFn<T>,
}

#[derive(Clone)]
pub struct ProblemSpec<T> {
    pub name: String,
    pub alpha: T,
    /// Material of subdomain label `i` is `materials[i - 1]`.
    pub materials: Vec<Material<T>>,
    pub f: VectorFn<T>,
    /// Divergence of `f` inside each subdomain.
    pub div_f: ScalarFn<T>,
    pub u_d: VectorFn<T>,
    pub y_d: VectorFn<T>,
    pub curl_y_d: VectorFn<T>,
    pub lifting: Lifting<T>,
    pub exact: Option<ExactSolution<T>>,
    pub mesh: MeshBuilder<T>,
    /// Subdomain classification re-applied to every refined mesh.
    pub classify: Option<Classifier<T>>,
    pub quadrature: QuadraturePolicy<T>,
}

impl<T: Real> ProblemSpec<T> {
    pub fn material(&self, label: u32) -> Result<Material<T>> {
        let i = label as usize;
        if i == 0 || i > self.materials.len() {
            return Err(input(format!(
                "problem {}: no material for subdomain label {label} ({} defined)",
                self.name,
                self.materials.len()
            )));
        }
        Ok(self.materials[i - 1])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) {
            return Err(input(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.materials.is_empty() {
            return Err(input("at least one material is required"));
        }
        for (i, m) in self.materials.iter().enumerate() {
            if !(m.mu_inv > T::zero()) || !(m.sigma > T::zero()) {
                return Err(input(format!("material {}: coefficients must be positive", i + 1)));
            }
        }
        Ok(())
    }

    pub fn initial_mesh(&self) -> Result<TetMesh<T>> {
        let m = (self.mesh)()?;
        self.apply_classification(m)
    }

    pub fn apply_classification(&self, mesh: TetMesh<T>) -> Result<TetMesh<T>> {
        match &self.classify {
            Some(c) => mesh.relabel(|g| c(g)),
            None => Ok(mesh),
        }
    }

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        self
    }

    /// Multiplies the data `f`, `u^d`, `y^d` and the boundary lifting by `s`; the exact
    /// solution (if present) scales along when the active set does not change.
    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        let scale_vec = |g: VectorFn<T>| -> VectorFn<T> { Arc::new(move |x, l| g(x, l) * s) };
        let (f, df, ud, yd, cyd) = (
            self.f.clone(),
            self.div_f.clone(),
            self.u_d.clone(),
            self.y_d.clone(),
            self.curl_y_d.clone(),
        );
        out.f = scale_vec(f);
        out.div_f = Arc::new(move |x, l| df(x, l) * s);
        out.u_d = scale_vec(ud);
        out.y_d = scale_vec(yd);
        out.curl_y_d = scale_vec(cyd);
        out.lifting = match &self.lifting {
            Lifting::Homogeneous => Lifting::Homogeneous,
            Lifting::Field(g) => {
                let g = g.clone();
                Lifting::Field(Arc::new(move |x| g(x) * s))
            }
            Lifting::Gradient(p) => {
                let p = p.clone();
                Lifting::Gradient(Arc::new(move |x| p(x) * s))
            }
        };
        out.exact = self.exact.as_ref().map(|e| ExactSolution {
            y: scale_vec(e.y.clone()),
            curl_y: scale_vec(e.curl_y.clone()),
            p: scale_vec(e.p.clone()),
            curl_p: scale_vec(e.curl_p.clone()),
            u: scale_vec(e.u.clone()),
        });
        out
    }
}

pub fn zero_vector<T: Real>() -> VectorFn<T> {
    Arc::new(|_, _| Vec3::zero())
}

pub fn zero_scalar<T: Real>() -> ScalarFn<T> {
    Arc::new(|_, _| T::zero())
}

pub fn constant_vector<T: Real>(c: Vec3<T>) -> VectorFn<T> {
    Arc::new(move |_, _| c)
}

/// The field `a × x + b`.
pub fn affine_vector<T: Real>(a: Vec3<T>, b: Vec3<T>) -> VectorFn<T> {
    Arc::new(move |x, _| a.cross(x) + b)
}
