//! Small fixed-size vector algebra and affine tetrahedron geometry.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn normalized(self) -> Self {
        self.scale(T::one() / self.norm())
    }

    /// Componentwise maximum with zero.
    #[inline]
    pub fn max_zero(self) -> Self {
        let z = T::zero();
        Self::new(self.x.max(z), self.y.max(z), self.z.max(z))
    }

    #[inline]
    pub fn min_component(self) -> T {
        self.x.min(self.y).min(self.z)
    }

    #[inline]
    pub fn max_abs(self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> std::iter::Sum for Vec3<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

/// Local edge numbering of a tetrahedron: pairs of local vertex indices.
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Local face `i` is the face opposite local vertex `i`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

pub fn signed_volume<T: Real>(p: &[Vec3<T>; 4]) -> T {
    let a = p[1] - p[0];
    let b = p[2] - p[0];
    let c = p[3] - p[0];
    a.dot(b.cross(c)) / T::lit(6.0)
}

/// Affine geometry of one tetrahedron: vertices, barycentric gradients and volume.
#[derive(Clone, Copy, Debug)]
pub struct TetGeometry<T> {
    pub vertices: [Vec3<T>; 4],
    pub grad_lambda: [Vec3<T>; 4],
    pub volume: T,
}

impl<T: Real> TetGeometry<T> {
    pub fn new(vertices: [Vec3<T>; 4]) -> Result<Self> {
        let a = vertices[1] - vertices[0];
        let b = vertices[2] - vertices[0];
        let c = vertices[3] - vertices[0];
        let det = a.dot(b.cross(c));
        let scale = a.norm() * b.norm() * c.norm();
        if !(det.abs() > T::epsilon() * T::lit(16.0) * scale) {
            return Err(Error::Geometry(format!(
                "degenerate tetrahedron (det = {:e})",
                det.as_f64()
            )));
        }
        let inv = T::one() / det;
        let g1 = b.cross(c).scale(inv);
        let g2 = c.cross(a).scale(inv);
        let g3 = a.cross(b).scale(inv);
        let g0 = -(g1 + g2 + g3);
        Ok(Self {
            vertices,
            grad_lambda: [g0, g1, g2, g3],
            volume: (det / T::lit(6.0)).abs(),
        })
    }

    /// Maps barycentric coordinates to a physical point.
    #[inline]
    pub fn point(&self, bary: &[T; 4]) -> Vec3<T> {
        let v = &self.vertices;
        v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2] + v[3] * bary[3]
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, x: Vec3<T>) -> [T; 4] {
        let d = x - self.vertices[0];
        let l1 = self.grad_lambda[1].dot(d);
        let l2 = self.grad_lambda[2].dot(d);
        let l3 = self.grad_lambda[3].dot(d);
        [T::one() - l1 - l2 - l3, l1, l2, l3]
    }

    pub fn centroid(&self) -> Vec3<T> {
        let q = T::lit(0.25);
        self.point(&[q, q, q, q])
    }

    /// Diameter (longest edge).
    pub fn diameter(&self) -> T {
        TET_EDGES
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(T::zero(), T::max)
    }

    pub fn face_area(&self, face: usize) -> T {
        let [a, b, c] = TET_FACES[face];
        let v = &self.vertices;
        (v[b] - v[a]).cross(v[c] - v[a]).norm() * T::lit(0.5)
    }

    /// Circumradius over inradius, a standard shape-regularity measure (3 for the regular tet).
    pub fn radius_ratio(&self) -> T {
        let v = &self.vertices;
        let area: T = (0..4).map(|f| self.face_area(f)).sum();
        let inradius = T::lit(3.0) * self.volume / area;
        // circumcenter c solves 2 (v_i - v_0) . c = |v_i|^2 - |v_0|^2 in local coordinates
        let a = v[1] - v[0];
        let b = v[2] - v[0];
        let c = v[3] - v[0];
        let det = T::lit(2.0) * a.dot(b.cross(c));
        let num = b.cross(c).scale(a.norm_sq()) + c.cross(a).scale(b.norm_sq()) + a.cross(b).scale(c.norm_sq());
        let circumradius = num.norm() / det.abs();
        circumradius / inradius
    }
}

/// Euclidean distance from `p` to the closed triangle `(a, b, c)`.
pub fn point_triangle_distance<T: Real>(p: Vec3<T>, a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> T {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    let zero = T::zero();
    if d1 <= zero && d2 <= zero {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= zero && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= zero && d1 >= zero && d3 <= zero {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= zero && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= zero && d2 >= zero && d6 <= zero {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= zero && (d4 - d3) >= zero && (d5 - d6) >= zero {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

/// Euclidean distance from `p` to the closed tetrahedron (zero inside).
pub fn point_tet_distance<T: Real>(p: Vec3<T>, geo: &TetGeometry<T>) -> T {
    let bary = geo.barycentric(p);
    let tol = -T::epsilon() * T::lit(64.0);
    if bary.iter().all(|&l| l >= tol) {
        return T::zero();
    }
    let v = &geo.vertices;
    TET_FACES
        .iter()
        .map(|&[a, b, c]| point_triangle_distance(p, v[a], v[b], v[c]))
        .fold(T::infinity(), T::min)
}
