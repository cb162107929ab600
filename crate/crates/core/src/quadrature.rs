//! Symmetric Gauss-type rules on the reference tetrahedron and triangle, plus the
//! per-element integration policy (degree selection and subdivision of cells cut
//! by a data discontinuity).

use std::sync::Arc;

use crate::error::{input, Result};
use crate::geometry::{TetGeometry, Vec3};
use crate::scalar::Real;

/// Quadrature rule in barycentric coordinates. Weights sum to the reference
/// measure (1/6 for the tetrahedron, 1/2 for the triangle).
#[derive(Clone, Debug)]
pub struct QuadRule<T, const N: usize> {
    pub points: Vec<[T; N]>,
    pub weights: Vec<T>,
    pub degree: usize,
}

pub type TetRule<T> = QuadRule<T, 4>;
pub type TriRule<T> = QuadRule<T, 3>;

impl<T: Real, const N: usize> QuadRule<T, N> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Total weight, equal to the reference measure.
    pub fn reference_measure(&self) -> T {
        self.weights.iter().copied().sum()
    }

    fn push_orbit(&mut self, w: f64, pts: impl IntoIterator<Item = [f64; N]>) {
        for p in pts {
            self.points.push(p.map(T::lit));
            self.weights.push(T::lit(w));
        }
    }
}

fn orbit_tet_31(a: f64) -> Vec<[f64; 4]> {
    let b = 1.0 - 3.0 * a;
    (0..4)
        .map(|j| {
            let mut p = [a; 4];
            p[j] = b;
            p
        })
        .collect()
}

fn orbit_tet_22(a: f64) -> Vec<[f64; 4]> {
    let b = 0.5 - a;
    let mut out = Vec::with_capacity(6);
    for i in 0..4 {
        for j in (i + 1)..4 {
            let mut p = [b; 4];
            p[i] = a;
            p[j] = a;
            out.push(p);
        }
    }
    out
}

fn orbit_tri_21(a: f64) -> Vec<[f64; 3]> {
    let b = 1.0 - 2.0 * a;
    vec![[b, a, a], [a, b, a], [a, a, b]]
}

fn orbit_tri_111(a: f64, b: f64) -> Vec<[f64; 3]> {
    let c = 1.0 - a - b;
    vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

/// Tetrahedral rule exact for polynomials up to `degree` (1..=5).
pub fn tet_rule<T: Real>(degree: usize) -> Result<TetRule<T>> {
    let mut r = TetRule { points: Vec::new(), weights: Vec::new(), degree };
    match degree {
        1 => r.push_orbit(1.0 / 6.0, [[0.25; 4]]),
        2 => r.push_orbit(1.0 / 24.0, orbit_tet_31(0.138_196_601_125_010_5)),
        3 => {
            r.push_orbit(0.004_244_637_067_514_176, orbit_tet_31(0.032_950_401_090_902_36));
            r.push_orbit(0.024_948_019_732_768_32, orbit_tet_22(0.089_616_764_761_818_53));
        }
        4 => {
            r.push_orbit(0.018_781_320_953_002_64, orbit_tet_31(0.310_885_919_263_300_6));
            r.push_orbit(0.012_248_840_519_393_66, orbit_tet_31(0.092_735_250_310_891_23));
            r.push_orbit(0.007_091_003_462_846_911, orbit_tet_22(0.045_503_704_125_649_65));
        }
        5 => {
            r.push_orbit(0.026_300_509_435_501_344, [[0.25; 4]]);
            r.push_orbit(0.011_828_171_265_106_344, orbit_tet_31(0.091_480_372_858_549_65));
            r.push_orbit(0.008_501_432_164_237_197, orbit_tet_31(0.325_871_586_643_093_9));
            r.push_orbit(0.009_841_290_585_631_859, orbit_tet_22(0.061_591_992_665_170_55));
        }
        d => return Err(input(format!("unsupported tetrahedral quadrature degree {d} (expected 1..=5)"))),
    }
    Ok(r)
}

/// Triangle rule exact for polynomials up to `degree` (1..=5).
pub fn tri_rule<T: Real>(degree: usize) -> Result<TriRule<T>> {
    let mut r = TriRule { points: Vec::new(), weights: Vec::new(), degree };
    match degree {
        1 => r.push_orbit(0.5, [[1.0 / 3.0; 3]]),
        2 => r.push_orbit(1.0 / 6.0, orbit_tri_21(1.0 / 6.0)),
        3 => r.push_orbit(
            1.0 / 12.0,
            orbit_tri_111(0.659_027_622_374_092_2, 0.231_933_368_553_030_57),
        ),
        4 => {
            r.push_orbit(0.111_690_794_839_005_73, orbit_tri_21(0.445_948_490_915_964_9));
            r.push_orbit(0.054_975_871_827_660_93, orbit_tri_21(0.091_576_213_509_770_74));
        }
        5 => {
            r.push_orbit(0.1125, [[1.0 / 3.0; 3]]);
            r.push_orbit(0.066_197_076_394_253_09, orbit_tri_21(0.470_142_064_105_115_1));
            r.push_orbit(0.062_969_590_272_413_58, orbit_tri_21(0.101_286_507_323_456_34));
        }
        d => return Err(input(format!("unsupported triangle quadrature degree {d} (expected 1..=5)"))),
    }
    Ok(r)
}

/// Quadrature points of one element in physical coordinates, together with
/// barycentric coordinates relative to the element.
#[derive(Clone, Debug, Default)]
pub struct CellQuadrature<T> {
    pub points: Vec<Vec3<T>>,
    pub bary: Vec<[T; 4]>,
    /// Absolute weights; they sum to the element volume.
    pub weights: Vec<T>,
}

impl<T: Real> CellQuadrature<T> {
    pub fn from_rule(geo: &TetGeometry<T>, rule: &TetRule<T>) -> Self {
        let mut q = Self::default();
        q.append(geo, rule, &identity_bary(), T::one());
        q
    }

    fn append(&mut self, geo: &TetGeometry<T>, rule: &TetRule<T>, sub: &[[T; 4]; 4], vol_fraction: T) {
        let scale = T::lit(6.0) * geo.volume * vol_fraction;
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let mut b = [T::zero(); 4];
            for (k, s) in sub.iter().enumerate() {
                for (bj, sj) in b.iter_mut().zip(s.iter()) {
                    *bj += p[k] * *sj;
                }
            }
            self.points.push(geo.point(&b));
            self.bary.push(b);
            self.weights.push(w * scale);
        }
    }

    pub fn integrate<F: Fn(Vec3<T>) -> T>(&self, f: F) -> T {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn integrate_vec<F: Fn(Vec3<T>) -> Vec3<T>>(&self, f: F) -> Vec3<T> {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| f(x) * w).sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn identity_bary<T: Real>() -> [[T; 4]; 4] {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z, z], [z, o, z, z], [z, z, o, z], [z, z, z, o]]
}

/// Regular (red) subdivision of a barycentric sub-simplex into 8 children of equal volume.
fn red_children<T: Real>(s: &[[T; 4]; 4]) -> [[[T; 4]; 4]; 8] {
    let half = T::lit(0.5);
    let mid = |a: usize, b: usize| {
        let mut m = [T::zero(); 4];
        for k in 0..4 {
            m[k] = (s[a][k] + s[b][k]) * half;
        }
        m
    };
    let (v0, v1, v2, v3) = (s[0], s[1], s[2], s[3]);
    let (m01, m02, m03, m12, m13, m23) = (mid(0, 1), mid(0, 2), mid(0, 3), mid(1, 2), mid(1, 3), mid(2, 3));
    [
        [v0, m01, m02, m03],
        [m01, v1, m12, m13],
        [m02, m12, v2, m23],
        [m03, m13, m23, v3],
        [m01, m02, m03, m13],
        [m01, m02, m12, m13],
        [m02, m03, m13, m23],
        [m02, m12, m13, m23],
    ]
}

pub type CellPredicate<T> = Arc<dyn Fn(&TetGeometry<T>) -> bool + Send + Sync>;

/// Chooses the quadrature used on each element.
///
/// Elements flagged by `singular` use `singular_degree`; elements that may straddle a
/// data discontinuity (`straddles`) are integrated by recursive red subdivision, where
/// only sub-cells that still straddle are subdivided further, up to `interface_depth`.
#[derive(Clone)]
pub struct QuadraturePolicy<T> {
    pub degree: usize,
    pub singular_degree: usize,
    pub singular: Option<CellPredicate<T>>,
    pub straddles: Option<CellPredicate<T>>,
    pub interface_depth: usize,
    rules: Vec<TetRule<T>>,
}

impl<T: Real> std::fmt::Debug for QuadraturePolicy<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuadraturePolicy")
            .field("degree", &self.degree)
            .field("singular_degree", &self.singular_degree)
            .field("singular", &self.singular.is_some())
            .field("straddles", &self.straddles.is_some())
            .field("interface_depth", &self.interface_depth)
            .finish()
    }
}

impl<T: Real> QuadraturePolicy<T> {
    pub fn new(degree: usize) -> Result<Self> {
        let rules = (1..=5).map(tet_rule).collect::<Result<Vec<_>>>()?;
        if !(1..=5).contains(&degree) {
            return Err(input(format!("unsupported quadrature degree {degree}")));
        }
        Ok(Self { degree, singular_degree: 5, singular: None, straddles: None, interface_depth: 3, rules })
    }

    pub fn with_singular(mut self, degree: usize, pred: CellPredicate<T>) -> Result<Self> {
        if !(1..=5).contains(&degree) {
            return Err(input(format!("unsupported quadrature degree {degree}")));
        }
        self.singular_degree = degree;
        self.singular = Some(pred);
        Ok(self)
    }

    pub fn with_interface(mut self, depth: usize, pred: CellPredicate<T>) -> Self {
        self.interface_depth = depth;
        self.straddles = Some(pred);
        self
    }

    pub fn with_degree(mut self, degree: usize) -> Result<Self> {
        if !(1..=5).contains(&degree) {
            return Err(input(format!("unsupported quadrature degree {degree}")));
        }
        self.degree = degree;
        Ok(self)
    }

    pub fn rule(&self, degree: usize) -> &TetRule<T> {
        &self.rules[degree.clamp(1, 5) - 1]
    }

    pub fn degree_for(&self, geo: &TetGeometry<T>) -> usize {
        match &self.singular {
            Some(p) if p(geo) => self.singular_degree.max(self.degree),
            _ => self.degree,
        }
    }

    /// Physical quadrature for an element.
    pub fn cell(&self, geo: &TetGeometry<T>) -> CellQuadrature<T> {
        let rule = self.rule(self.degree_for(geo));
        match &self.straddles {
            Some(pred) if self.interface_depth > 0 && pred(geo) => {
                let mut q = CellQuadrature::default();
                self.subdivide(geo, rule, pred, &identity_bary(), T::one(), 0, &mut q);
                q
            }
            _ => CellQuadrature::from_rule(geo, rule),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn subdivide(
        &self,
        geo: &TetGeometry<T>,
        rule: &TetRule<T>,
        pred: &CellPredicate<T>,
        sub: &[[T; 4]; 4],
        frac: T,
        depth: usize,
        out: &mut CellQuadrature<T>,
    ) {
        let eighth = T::lit(0.125);
        for child in red_children(sub).iter() {
            let cf = frac * eighth;
            let deeper = depth + 1 < self.interface_depth && {
                let verts = [geo.point(&child[0]), geo.point(&child[1]), geo.point(&child[2]), geo.point(&child[3])];
                TetGeometry::new(verts).map(|g| pred(&g)).unwrap_or(false)
            };
            if deeper {
                self.subdivide(geo, rule, pred, child, cf, depth + 1, out);
            } else {
                out.append(geo, rule, child, cf);
            }
        }
    }
}
