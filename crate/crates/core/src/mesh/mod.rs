//! Conforming tetrahedral meshes with subdomain labels and bisection labels.
//!
//! Every element carries two vertex orderings. `tets()` is positively oriented and is
//! what the finite element code uses. The bisection label keeps the vertex sequence
//! and type used by the newest-vertex (Maubach) bisection: the refinement edge of an
//! element is the pair `(order[0], order[tag])`.

mod bisect;
mod builders;
pub mod io;

use std::collections::HashMap;

pub use builders::{build_box_mesh, build_cube_mesh, build_lshape_mesh};

use crate::error::{input, Error, Result};
use crate::geometry::{signed_volume, TetGeometry, Vec3, TET_EDGES, TET_FACES};
use crate::scalar::Real;

/// Vertex sequence and type driving newest-vertex bisection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BisectionLabel {
    pub order: [usize; 4],
    /// In `1..=3`; the refinement edge joins `order[0]` and `order[tag]`.
    pub tag: u8,
}

impl BisectionLabel {
    pub fn refinement_edge(&self) -> (usize, usize) {
        (self.order[0], self.order[self.tag as usize])
    }
}

/// Unique mesh edges as sorted vertex pairs, with incident elements in CSR layout.
#[derive(Clone, Debug, Default)]
pub struct EdgeTable {
    pub vertices: Vec<[usize; 2]>,
    offsets: Vec<usize>,
    incident: Vec<usize>,
}

impl EdgeTable {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn incident_tets(&self, edge: usize) -> &[usize] {
        &self.incident[self.offsets[edge]..self.offsets[edge + 1]]
    }
}

/// Unique faces. `tets[f][0]` is the lower-indexed incident element; the stored unit
/// normal points from it towards `tets[f][1]` (outward for boundary faces).
#[derive(Clone, Debug, Default)]
pub struct FaceTable<T> {
    pub vertices: Vec<[usize; 3]>,
    pub tets: Vec<[Option<usize>; 2]>,
    /// Local face index inside each incident element.
    pub local: Vec<[u8; 2]>,
    pub normal: Vec<Vec3<T>>,
    pub area: Vec<T>,
}

impl<T> FaceTable<T> {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_interior(&self, face: usize) -> bool {
        self.tets[face][1].is_some()
    }
}

#[derive(Clone, Debug)]
pub struct TetMesh<T> {
    vertices: Vec<Vec3<T>>,
    tets: Vec<[usize; 4]>,
    labels: Vec<BisectionLabel>,
    subdomain: Vec<u32>,
    generation: Vec<u32>,
    ancestor: Vec<usize>,
    geometry: Vec<TetGeometry<T>>,
    edges: EdgeTable,
    faces: FaceTable<T>,
    tet_edges: Vec<[usize; 6]>,
    tet_faces: Vec<[usize; 4]>,
    boundary_faces: Vec<(usize, u8)>,
    interface_faces: Vec<usize>,
}

/// Longest edge first with a lexicographic tie-break on the sorted global vertex pair.
pub fn longest_edge_label<T: Real>(vertices: &[Vec3<T>], tet: [usize; 4]) -> BisectionLabel {
    let rel = T::lit(1e-12);
    let mut best: Option<(T, (usize, usize), (usize, usize))> = None;
    for &(a, b) in TET_EDGES.iter() {
        let (ga, gb) = (tet[a], tet[b]);
        let len = (vertices[ga] - vertices[gb]).norm();
        let key = (ga.min(gb), ga.max(gb));
        best = match best {
            None => Some((len, key, (a, b))),
            Some((bl, bk, be)) => {
                if len > bl * (T::one() + rel) || ((len - bl).abs() <= bl * rel && key < bk) {
                    Some((len, key, (a, b)))
                } else {
                    Some((bl, bk, be))
                }
            }
        };
    }
    let (_, key, _) = best.expect("tetrahedron has edges");
    let mut rest: Vec<usize> = tet.iter().copied().filter(|&g| g != key.0 && g != key.1).collect();
    rest.sort_unstable();
    BisectionLabel { order: [key.0, rest[0], rest[1], key.1], tag: 3 }
}

impl<T: Real> TetMesh<T> {
    /// Builds a mesh from arbitrary elements, initializing bisection labels by the
    /// longest-edge rule.
    pub fn new(vertices: Vec<Vec3<T>>, tets: Vec<[usize; 4]>, subdomain: Vec<u32>) -> Result<Self> {
        for t in &tets {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(input("element references a vertex out of range"));
            }
        }
        let labels = tets.iter().map(|&t| longest_edge_label(&vertices, t)).collect();
        Self::from_labels(vertices, labels, subdomain)
    }

    /// Builds a mesh from bisection labels (vertex sequences with types).
    pub fn from_labels(vertices: Vec<Vec3<T>>, labels: Vec<BisectionLabel>, subdomain: Vec<u32>) -> Result<Self> {
        let n = labels.len();
        let generation = vec![0; n];
        let ancestor = (0..n).collect();
        Self::assemble(vertices, labels, subdomain, generation, ancestor)
    }

    pub(crate) fn assemble(
        vertices: Vec<Vec3<T>>,
        labels: Vec<BisectionLabel>,
        subdomain: Vec<u32>,
        generation: Vec<u32>,
        ancestor: Vec<usize>,
    ) -> Result<Self> {
        let n = labels.len();
        if subdomain.len() != n || generation.len() != n || ancestor.len() != n {
            return Err(input("per-element arrays have inconsistent lengths"));
        }
        let mut tets = Vec::with_capacity(n);
        let mut geometry = Vec::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if !(1..=3).contains(&l.tag) {
                return Err(input(format!("element {i}: bisection type {} not in 1..=3", l.tag)));
            }
            if l.order.iter().any(|&v| v >= vertices.len()) {
                return Err(input(format!("element {i} references a vertex out of range")));
            }
            let mut t = l.order;
            let p = t.map(|v| vertices[v]);
            if signed_volume(&p) < T::zero() {
                t.swap(2, 3);
            }
            let geo = TetGeometry::new(t.map(|v| vertices[v]))
                .map_err(|e| Error::Geometry(format!("element {i}: {e}")))?;
            tets.push(t);
            geometry.push(geo);
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(n * 2);
        let mut edge_vertices = Vec::new();
        let mut tet_edges = Vec::with_capacity(n);
        for t in &tets {
            let mut le = [0usize; 6];
            for (k, &(a, b)) in TET_EDGES.iter().enumerate() {
                let key = (t[a].min(t[b]), t[a].max(t[b]));
                let next = edge_vertices.len();
                let id = *edge_index.entry(key).or_insert(next);
                if id == next {
                    edge_vertices.push([key.0, key.1]);
                }
                le[k] = id;
            }
            tet_edges.push(le);
        }
        let ne = edge_vertices.len();
        let mut offsets = vec![0usize; ne + 1];
        for le in &tet_edges {
            for &e in le {
                offsets[e + 1] += 1;
            }
        }
        for i in 0..ne {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut incident = vec![0usize; offsets[ne]];
        for (t, le) in tet_edges.iter().enumerate() {
            for &e in le {
                incident[fill[e]] = t;
                fill[e] += 1;
            }
        }
        let edges = EdgeTable { vertices: edge_vertices, offsets, incident };

        let mut face_index: HashMap<[usize; 3], usize> = HashMap::with_capacity(n * 3);
        let mut faces = FaceTable::<T>::default();
        let mut tet_faces = Vec::with_capacity(n);
        for (ti, t) in tets.iter().enumerate() {
            let mut lf = [0usize; 4];
            for (f, idx) in TET_FACES.iter().enumerate() {
                let mut key = idx.map(|k| t[k]);
                key.sort_unstable();
                match face_index.get(&key) {
                    Some(&id) => {
                        if faces.tets[id][1].is_some() {
                            return Err(Error::Geometry(format!("face {key:?} shared by more than two elements")));
                        }
                        faces.tets[id][1] = Some(ti);
                        faces.local[id][1] = f as u8;
                        lf[f] = id;
                    }
                    None => {
                        let id = faces.vertices.len();
                        face_index.insert(key, id);
                        let geo = &geometry[ti];
                        let [a, b, c] = *idx;
                        let v = &geo.vertices;
                        let mut nrm = (v[b] - v[a]).cross(v[c] - v[a]);
                        let area = nrm.norm() * T::lit(0.5);
                        if nrm.dot(v[a] - v[f]) < T::zero() {
                            nrm = -nrm;
                        }
                        faces.vertices.push(key);
                        faces.tets.push([Some(ti), None]);
                        faces.local.push([f as u8, 0]);
                        faces.normal.push(nrm.normalized());
                        faces.area.push(area);
                        lf[f] = id;
                    }
                }
            }
            tet_faces.push(lf);
        }
        let mut boundary_faces = Vec::new();
        let mut interface_faces = Vec::new();
        for f in 0..faces.len() {
            match faces.tets[f] {
                [Some(t), None] => boundary_faces.push((t, faces.local[f][0])),
                [Some(a), Some(b)] => {
                    if subdomain[a] != subdomain[b] {
                        interface_faces.push(f);
                    }
                }
                _ => unreachable!(),
            }
        }
        Ok(Self {
            vertices,
            tets,
            labels,
            subdomain,
            generation,
            ancestor,
            geometry,
            edges,
            faces,
            tet_edges,
            tet_faces,
            boundary_faces,
            interface_faces,
        })
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    /// Elements as positively oriented vertex quadruples.
    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn labels(&self) -> &[BisectionLabel] {
        &self.labels
    }

    pub fn subdomain(&self) -> &[u32] {
        &self.subdomain
    }

    pub fn generation(&self) -> &[u32] {
        &self.generation
    }

    /// For each element, the index of the element of the preceding mesh that contains it.
    pub fn ancestor(&self) -> &[usize] {
        &self.ancestor
    }

    pub fn geometry(&self, t: usize) -> &TetGeometry<T> {
        &self.geometry[t]
    }

    pub fn geometries(&self) -> &[TetGeometry<T>] {
        &self.geometry
    }

    pub fn edges(&self) -> &EdgeTable {
        &self.edges
    }

    pub fn faces(&self) -> &FaceTable<T> {
        &self.faces
    }

    pub fn tet_edges(&self) -> &[[usize; 6]] {
        &self.tet_edges
    }

    pub fn tet_faces(&self) -> &[[usize; 4]] {
        &self.tet_faces
    }

    pub fn boundary_faces(&self) -> &[(usize, u8)] {
        &self.boundary_faces
    }

    /// Interior faces whose two elements carry different subdomain labels.
    pub fn interface_faces(&self) -> &[usize] {
        &self.interface_faces
    }

    /// Local index (into `TET_EDGES` of `tets()[t]`) of the refinement edge.
    pub fn refinement_edge(&self, t: usize) -> usize {
        let (a, b) = self.labels[t].refinement_edge();
        let tet = &self.tets[t];
        TET_EDGES
            .iter()
            .position(|&(i, j)| (tet[i] == a && tet[j] == b) || (tet[i] == b && tet[j] == a))
            .expect("refinement edge belongs to the element")
    }

    /// Diameter of every element.
    pub fn tet_diameters(&self) -> Vec<T> {
        self.geometry.iter().map(|g| g.diameter()).collect()
    }

    /// Diameter of every face.
    pub fn face_diameters(&self) -> Vec<T> {
        self.faces
            .vertices
            .iter()
            .map(|f| {
                let p = f.map(|v| self.vertices[v]);
                (p[0] - p[1]).norm().max((p[1] - p[2]).norm()).max((p[0] - p[2]).norm())
            })
            .collect()
    }

    /// Element and face diameters `(h_T, h_F)`.
    pub fn mesh_size(&self) -> (Vec<T>, Vec<T>) {
        (self.tet_diameters(), self.face_diameters())
    }

    pub fn volume(&self) -> T {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn boundary_area(&self) -> T {
        self.boundary_faces
            .iter()
            .map(|&(t, f)| self.faces.area[self.tet_faces[t][f as usize]])
            .sum()
    }

    pub fn max_radius_ratio(&self) -> T {
        self.geometry.iter().map(|g| g.radius_ratio()).fold(T::zero(), T::max)
    }

    /// Reassigns subdomain labels, e.g. by classifying element centroids.
    pub fn relabel<F: Fn(&TetGeometry<T>) -> u32>(&self, classify: F) -> Result<Self> {
        let subdomain = self.geometry.iter().map(classify).collect();
        Self::assemble(
            self.vertices.clone(),
            self.labels.clone(),
            subdomain,
            self.generation.clone(),
            self.ancestor.clone(),
        )
    }

    /// Same mesh with elements reordered: new element `i` is old element `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_tets() {
            return Err(input("permutation length mismatch"));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(input("not a permutation"));
            }
        }
        Self::assemble(
            self.vertices.clone(),
            perm.iter().map(|&p| self.labels[p]).collect(),
            perm.iter().map(|&p| self.subdomain[p]).collect(),
            perm.iter().map(|&p| self.generation[p]).collect(),
            perm.iter().map(|&p| self.ancestor[p]).collect(),
        )
    }

    /// Checks conformity: every face has at most two elements and no vertex sits at the
    /// midpoint of an element edge (the only way bisection can create a hanging node).
    pub fn check_conformity(&self) -> Result<()> {
        let key = |p: Vec3<T>| {
            let q = |x: T| (x.as_f64() * 1e9).round() as i64;
            (q(p.x), q(p.y), q(p.z))
        };
        let mut at: HashMap<(i64, i64, i64), usize> = HashMap::with_capacity(self.vertices.len());
        for (i, &p) in self.vertices.iter().enumerate() {
            at.insert(key(p), i);
        }
        let used: Vec<bool> = {
            let mut u = vec![false; self.vertices.len()];
            for t in &self.tets {
                for &v in t {
                    u[v] = true;
                }
            }
            u
        };
        let half = T::lit(0.5);
        for (e, [a, b]) in self.edges.vertices.iter().enumerate() {
            let m = (self.vertices[*a] + self.vertices[*b]) * half;
            if let Some(&v) = at.get(&key(m)) {
                if used[v] {
                    return Err(Error::Geometry(format!("hanging vertex {v} on edge {e}")));
                }
            }
        }
        for (t, g) in self.geometry.iter().enumerate() {
            if signed_volume(&g.vertices) <= T::zero() {
                return Err(Error::Geometry(format!("element {t} is not positively oriented")));
            }
        }
        let one_sided = self.faces.tets.iter().filter(|t| t[1].is_none()).count();
        if one_sided != self.boundary_faces.len() {
            return Err(Error::Geometry("boundary face bookkeeping is inconsistent".into()));
        }
        Ok(())
    }

    /// Refines the marked elements by newest-vertex bisection and closes the mesh to
    /// conformity. No marked element survives.
    pub fn refine(&self, marked: &[usize]) -> Result<Self> {
        bisect::refine(self, marked)
    }

    /// Bisects every element `sweeps` times. `ancestor()` of the result refers to `self`.
    pub fn refine_uniform(&self, sweeps: usize) -> Result<Self> {
        let mut m = self.clone();
        let mut anc: Vec<usize> = (0..self.n_tets()).collect();
        for _ in 0..sweeps {
            let all: Vec<usize> = (0..m.n_tets()).collect();
            let next = m.refine(&all)?;
            anc = next.ancestor.iter().map(|&a| anc[a]).collect();
            m = next;
        }
        m.ancestor = anc;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_edge_label_picks_diagonal() {
        let v: Vec<Vec3<f64>> = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 1.0),
        ];
        let l = longest_edge_label(&v, [2, 0, 3, 1]);
        assert_eq!(l.refinement_edge(), (0, 3));
        assert_eq!(l.tag, 3);
    }

    #[test]
    fn unit_reference_tet_sizes() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let m = TetMesh::<f64>::new(v, vec![[0, 1, 2, 3]], vec![1]).unwrap();
        let (ht, hf) = m.mesh_size();
        assert!((ht[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.faces().len(), 4);
        assert_eq!(m.boundary_faces().len(), 4);
        // the face x+y+z=1 is equilateral with side sqrt(2)
        assert!(hf.iter().all(|&h| (h - 2f64.sqrt()).abs() < 1e-15));
        // three edges of length sqrt(2); the lexicographically smallest wins
        assert_eq!(m.labels()[0].refinement_edge(), (1, 2));
    }

    #[test]
    fn equilateral_face_diameter() {
        let s3 = 3f64.sqrt();
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, s3 / 2.0, 0.0),
            Vec3::new(0.5, s3 / 6.0, (2.0f64 / 3.0).sqrt()),
        ];
        let m = TetMesh::<f64>::new(v, vec![[0, 1, 2, 3]], vec![1]).unwrap();
        let (_, hf) = m.mesh_size();
        assert!(hf.iter().all(|&h| (h - 1.0).abs() < 1e-14));
    }

    #[test]
    fn stored_normals_are_unit_and_oriented() {
        let m = build_cube_mesh::<f64>(2).unwrap();
        for f in 0..m.faces().len() {
            let n = m.faces().normal[f];
            assert!((n.norm() - 1.0).abs() < 1e-14);
            let [Some(a), b] = m.faces().tets[f] else { panic!() };
            let ca = m.geometry(a).centroid();
            let p = m.vertices()[m.faces().vertices[f][0]];
            assert!(n.dot(p - ca) > 0.0);
            if let Some(b) = b {
                assert!(a < b);
                assert!(n.dot(m.geometry(b).centroid() - p) > 0.0);
            }
        }
    }

    #[test]
    fn out_of_range_vertex_is_rejected() {
        let v = vec![Vec3::<f64>::zero(); 3];
        assert!(TetMesh::new(v, vec![[0, 1, 2, 3]], vec![1]).is_err());
    }
}
