use std::collections::HashMap;

use super::{BisectionLabel, TetMesh};
use crate::error::{input, Result};
use crate::geometry::Vec3;
use crate::scalar::Real;

const AXIS_PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Kuhn (Freudenthal) triangulation of the kept cells of an `nx × ny × nz` box grid.
///
/// Each cell is split into six elements along monotone vertex paths from its lower to
/// its upper corner; the path order is the bisection sequence with type 3, so the cell
/// diagonal (the longest edge) is bisected first and every uniform bisection sweep
/// stays conforming.
pub fn build_box_mesh<T: Real, F: Fn(Vec3<T>) -> bool>(
    cells: [usize; 3],
    lo: Vec3<T>,
    hi: Vec3<T>,
    keep: F,
) -> Result<TetMesh<T>> {
    if cells.iter().any(|&c| c == 0) {
        return Err(input("box mesh needs at least one cell per axis"));
    }
    let h = [
        (hi.x - lo.x) / T::of_usize(cells[0]),
        (hi.y - lo.y) / T::of_usize(cells[1]),
        (hi.z - lo.z) / T::of_usize(cells[2]),
    ];
    let coord = |i: [usize; 3]| {
        Vec3::new(
            lo.x + h[0] * T::of_usize(i[0]),
            lo.y + h[1] * T::of_usize(i[1]),
            lo.z + h[2] * T::of_usize(i[2]),
        )
    };
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut labels = Vec::new();
    let half = T::lit(0.5);
    for k in 0..cells[2] {
        for j in 0..cells[1] {
            for i in 0..cells[0] {
                let c0 = [i, j, k];
                let center = (coord(c0) + coord([i + 1, j + 1, k + 1])) * half;
                if !keep(center) {
                    continue;
                }
                for perm in AXIS_PERMUTATIONS.iter() {
                    let mut p = c0;
                    let mut order = [0usize; 4];
                    for (step, slot) in order.iter_mut().enumerate() {
                        if step > 0 {
                            p[perm[step - 1]] += 1;
                        }
                        *slot = *index.entry(p).or_insert_with(|| {
                            vertices.push(coord(p));
                            vertices.len() - 1
                        });
                    }
                    labels.push(BisectionLabel { order, tag: 3 });
                }
            }
        }
    }
    if labels.is_empty() {
        return Err(input("no cells kept"));
    }
    let n = labels.len();
    TetMesh::from_labels(vertices, labels, vec![1; n])
}

/// `[-1,1]^3` split into `n^3` cubes of six elements each.
pub fn build_cube_mesh<T: Real>(n: usize) -> Result<TetMesh<T>> {
    if n == 0 {
        return Err(input("n must be at least 1"));
    }
    let one = T::one();
    build_box_mesh([n, n, n], Vec3::splat(-one), Vec3::splat(one), |_| true)
}

/// The L-shaped prism `[-1,1]^3 \ [0,1]x[0,1]x[-1,1]` with the reentrant edge on the
/// z-axis. The cross-section uses `2n × 2n` cells of which the quadrant `x, y > 0` is
/// dropped; the full height is split into `n` layers.
pub fn build_lshape_mesh<T: Real>(n: usize) -> Result<TetMesh<T>> {
    if n == 0 {
        return Err(input("n must be at least 1"));
    }
    let one = T::one();
    let zero = T::zero();
    build_box_mesh([2 * n, 2 * n, n], Vec3::splat(-one), Vec3::splat(one), |c| !(c.x > zero && c.y > zero))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_counts() {
        let m = build_cube_mesh::<f64>(1).unwrap();
        assert_eq!(m.n_tets(), 6);
        assert_eq!(m.n_vertices(), 8);
        m.check_conformity().unwrap();
        let m2 = build_cube_mesh::<f64>(2).unwrap();
        assert_eq!(m2.n_tets(), 48);
        m2.check_conformity().unwrap();
        assert!((m2.volume() - 8.0).abs() < 1e-12);
        assert!((m2.boundary_area() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn interior_faces_have_two_tets() {
        let m = build_cube_mesh::<f64>(1).unwrap();
        let f = m.faces();
        let interior = (0..f.len()).filter(|&i| f.is_interior(i)).count();
        // 6 tets * 4 faces = 24 = 2 * interior + boundary; boundary = 6 squares * 2
        assert_eq!(m.boundary_faces().len(), 12);
        assert_eq!(interior, 6);
    }

    #[test]
    fn lshape_counts_and_domain() {
        let m = build_lshape_mesh::<f64>(1).unwrap();
        assert_eq!(m.n_tets(), 18);
        m.check_conformity().unwrap();
        let one_sided = m.faces().tets.iter().filter(|t| t[1].is_none()).count();
        assert_eq!(m.boundary_faces().len(), one_sided);
        for n in 1..=3 {
            let m = build_lshape_mesh::<f64>(n).unwrap();
            assert!((m.volume() - 6.0).abs() < 1e-12);
            for g in m.geometries() {
                let c = g.centroid();
                assert!(!(c.x > 0.0 && c.y > 0.0));
            }
        }
    }

    #[test]
    fn kuhn_longest_edge_is_refinement_edge() {
        let m = build_cube_mesh::<f64>(1).unwrap();
        for (t, l) in m.labels().iter().enumerate() {
            let (a, b) = l.refinement_edge();
            let d = (m.vertices()[a] - m.vertices()[b]).norm();
            assert!((d - m.geometry(t).diameter()).abs() < 1e-14);
        }
    }
}
