//! Plain-text mesh and field exchange, and VTK legacy export.
//!
//! `TETMESH v1` layout:
//!
//! ```text
//! TETMESH v1
//! <n_vertices>
//! x y z                      (one line per vertex)
//! <n_tets>
//! v0 v1 v2 v3 subdomain e    (one line per tet)
//! ```
//!
//! Indices are zero based. `e` is the local index of the refinement edge in the edge
//! list `(0,1) (0,2) (0,3) (1,2) (1,3) (2,3)` of the written quadruple. Tets are written
//! in bisection order, so `e = type - 1` and a written mesh reads back with identical
//! bisection labels. Blank lines and lines starting with `#` are ignored.

use std::io::Write;

use super::{BisectionLabel, TetMesh};
use crate::error::{Error, Result};
use crate::geometry::{Vec3, TET_EDGES};
use crate::scalar::Real;

pub const MESH_HEADER: &str = "TETMESH v1";
pub const FIELD_HEADER: &str = "TETFIELD v1";

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            self.last = i + 1;
            return Ok((i + 1, t));
        }
        Err(Error::Parse { line: self.last + 1, msg: "unexpected end of input".into() })
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let (line, t) = self.next_line()?;
        t.parse().map_err(|_| Error::Parse { line, msg: format!("expected {what} count, found {t:?}") })
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_real<T: Real>(line: usize, s: &str) -> Result<T> {
    let v: f64 = s.parse().map_err(|_| parse_err(line, format!("invalid number {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite number {s:?}")));
    }
    Ok(T::lit(v))
}

pub fn write_mesh<T: Real, W: Write>(mesh: &TetMesh<T>, mut w: W) -> Result<()> {
    writeln!(w, "{MESH_HEADER}")?;
    writeln!(w, "{}", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    writeln!(w, "{}", mesh.n_tets())?;
    for (l, s) in mesh.labels().iter().zip(mesh.subdomain()) {
        let o = l.order;
        writeln!(w, "{} {} {} {} {} {}", o[0], o[1], o[2], o[3], s, l.tag - 1)?;
    }
    Ok(())
}

pub fn mesh_to_string<T: Real>(mesh: &TetMesh<T>) -> String {
    let mut buf = Vec::new();
    write_mesh(mesh, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_mesh<T: Real>(text: &str) -> Result<TetMesh<T>> {
    let mut lines = Lines::new(text);
    let (line, header) = lines.next_line()?;
    if header != MESH_HEADER {
        return Err(parse_err(line, format!("expected header {MESH_HEADER:?}, found {header:?}")));
    }
    let nv = lines.count("vertex")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, t) = lines.next_line()?;
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(line, format!("vertex needs 3 coordinates, found {}", f.len())));
        }
        vertices.push(Vec3::new(parse_real(line, f[0])?, parse_real(line, f[1])?, parse_real(line, f[2])?));
    }
    let nt = lines.count("tet")?;
    let mut labels = Vec::with_capacity(nt);
    let mut subdomain = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, t) = lines.next_line()?;
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 6 {
            return Err(parse_err(line, format!("tet line needs 6 integers, found {}", f.len())));
        }
        let mut ints = [0usize; 6];
        for (k, s) in f.iter().enumerate() {
            ints[k] = s.parse().map_err(|_| parse_err(line, format!("invalid integer {s:?}")))?;
        }
        let v = [ints[0], ints[1], ints[2], ints[3]];
        if let Some(&bad) = v.iter().find(|&&i| i >= nv) {
            return Err(parse_err(line, format!("vertex index {bad} out of range")));
        }
        let s = u32::try_from(ints[4]).map_err(|_| parse_err(line, "subdomain label too large"))?;
        if s == 0 {
            return Err(parse_err(line, "subdomain labels start at 1"));
        }
        let e = ints[5];
        let label = match e {
            0..=2 => BisectionLabel { order: v, tag: (e + 1) as u8 },
            3..=5 => {
                let (a, b) = TET_EDGES[e];
                let rest: Vec<usize> = (0..4).filter(|&k| k != a && k != b).collect();
                BisectionLabel { order: [v[a], v[rest[0]], v[rest[1]], v[b]], tag: 3 }
            }
            _ => return Err(parse_err(line, format!("refinement edge index {e} not in 0..=5"))),
        };
        labels.push(label);
        subdomain.push(s);
    }
    TetMesh::from_labels(vertices, labels, subdomain)
}

/// Named per-edge coefficients (indexed by `mesh.edges()`, direction lower to higher
/// vertex) and per-element vectors.
#[derive(Clone, Debug, Default)]
pub struct FieldSet<T> {
    pub edge: Vec<(String, Vec<T>)>,
    pub cell: Vec<(String, Vec<Vec3<T>>)>,
}

/// Companion format for fields living on a `TETMESH v1` mesh:
///
/// ```text
/// TETFIELD v1
/// edge <name> <n_edges>
/// a b value          (global vertex pair, lower index first)
/// cell <name> <n_tets>
/// vx vy vz
/// ```
pub fn write_fields<T: Real, W: Write>(mesh: &TetMesh<T>, fields: &FieldSet<T>, mut w: W) -> Result<()> {
    writeln!(w, "{FIELD_HEADER}")?;
    for (name, vals) in &fields.edge {
        check_name(name)?;
        if vals.len() != mesh.edges().len() {
            return Err(Error::Input(format!("edge field {name}: {} values for {} edges", vals.len(), mesh.edges().len())));
        }
        writeln!(w, "edge {name} {}", vals.len())?;
        for ([a, b], v) in mesh.edges().vertices.iter().zip(vals) {
            writeln!(w, "{a} {b} {v}")?;
        }
    }
    for (name, vals) in &fields.cell {
        check_name(name)?;
        if vals.len() != mesh.n_tets() {
            return Err(Error::Input(format!("cell field {name}: {} values for {} tets", vals.len(), mesh.n_tets())));
        }
        writeln!(w, "cell {name} {}", vals.len())?;
        for v in vals {
            writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
        }
    }
    Ok(())
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
        return Err(Error::Input(format!("field name {name:?} must be non-empty without whitespace")));
    }
    Ok(())
}

pub fn read_fields<T: Real>(mesh: &TetMesh<T>, text: &str) -> Result<FieldSet<T>> {
    let mut lines = Lines::new(text);
    let (line, header) = lines.next_line()?;
    if header != FIELD_HEADER {
        return Err(parse_err(line, format!("expected header {FIELD_HEADER:?}, found {header:?}")));
    }
    let edge_id: std::collections::HashMap<[usize; 2], usize> =
        mesh.edges().vertices.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut out = FieldSet::default();
    while let Ok((line, t)) = lines.next_line() {
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(line, "expected section line `edge|cell <name> <count>`"));
        }
        let n: usize = f[2].parse().map_err(|_| parse_err(line, "invalid count"))?;
        match f[0] {
            "edge" => {
                let mut vals = vec![T::zero(); mesh.edges().len()];
                let mut seen = vec![false; vals.len()];
                for _ in 0..n {
                    let (line, t) = lines.next_line()?;
                    let g: Vec<&str> = t.split_whitespace().collect();
                    if g.len() != 3 {
                        return Err(parse_err(line, "edge value line needs `a b value`"));
                    }
                    let a: usize = g[0].parse().map_err(|_| parse_err(line, "invalid vertex index"))?;
                    let b: usize = g[1].parse().map_err(|_| parse_err(line, "invalid vertex index"))?;
                    let mut v: T = parse_real(line, g[2])?;
                    let key = if a < b { [a, b] } else { [b, a] };
                    if a > b {
                        v = -v;
                    }
                    let id = *edge_id.get(&key).ok_or_else(|| parse_err(line, format!("({a},{b}) is not a mesh edge")))?;
                    vals[id] = v;
                    seen[id] = true;
                }
                if seen.iter().any(|&s| !s) {
                    return Err(parse_err(line, format!("edge field {} does not cover every edge", f[1])));
                }
                out.edge.push((f[1].to_string(), vals));
            }
            "cell" => {
                if n != mesh.n_tets() {
                    return Err(parse_err(line, format!("cell field has {n} values, mesh has {} tets", mesh.n_tets())));
                }
                let mut vals = Vec::with_capacity(n);
                for _ in 0..n {
                    let (line, t) = lines.next_line()?;
                    let g: Vec<&str> = t.split_whitespace().collect();
                    if g.len() != 3 {
                        return Err(parse_err(line, "cell value line needs 3 components"));
                    }
                    vals.push(Vec3::new(parse_real(line, g[0])?, parse_real(line, g[1])?, parse_real(line, g[2])?));
                }
                out.cell.push((f[1].to_string(), vals));
            }
            other => return Err(parse_err(line, format!("unknown section {other:?}"))),
        }
    }
    Ok(out)
}

/// Cell data attached to a VTK export.
#[derive(Clone, Copy, Debug)]
pub enum CellData<'a, T> {
    Scalar(&'a str, &'a [T]),
    Vector(&'a str, &'a [Vec3<T>]),
}

/// VTK legacy ASCII unstructured grid (cell type 10). Subdomain labels and bisection
/// generation are always included as integer cell data.
pub fn write_vtk<T: Real, W: Write>(mesh: &TetMesh<T>, data: &[CellData<'_, T>], mut w: W) -> Result<()> {
    let n = mesh.n_tets();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "tetrahedral mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    writeln!(w, "CELLS {} {}", n, 5 * n)?;
    for t in mesh.tets() {
        writeln!(w, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "CELL_TYPES {n}")?;
    for _ in 0..n {
        writeln!(w, "10")?;
    }
    writeln!(w, "CELL_DATA {n}")?;
    writeln!(w, "SCALARS subdomain int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for s in mesh.subdomain() {
        writeln!(w, "{s}")?;
    }
    writeln!(w, "SCALARS generation int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for g in mesh.generation() {
        writeln!(w, "{g}")?;
    }
    for d in data {
        match *d {
            CellData::Scalar(name, vals) => {
                check_name(name)?;
                if vals.len() != n {
                    return Err(Error::Input(format!("cell data {name}: {} values for {n} tets", vals.len())));
                }
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in vals {
                    writeln!(w, "{v:.12e}")?;
                }
            }
            CellData::Vector(name, vals) => {
                check_name(name)?;
                if vals.len() != n {
                    return Err(Error::Input(format!("cell data {name}: {} values for {n} tets", vals.len())));
                }
                writeln!(w, "VECTORS {name} double")?;
                for v in vals {
                    writeln!(w, "{:.12e} {:.12e} {:.12e}", v.x, v.y, v.z)?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cube_mesh, build_lshape_mesh};

    #[test]
    fn mesh_roundtrip_keeps_labels() {
        let m = build_lshape_mesh::<f64>(1).unwrap().refine(&[0, 7]).unwrap();
        let text = mesh_to_string(&m);
        let r: TetMesh<f64> = read_mesh(&text).unwrap();
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.labels(), m.labels());
        assert_eq!(r.subdomain(), m.subdomain());
        // refining the read-back mesh gives the same result
        let a = m.refine(&[3]).unwrap();
        let b = r.refine(&[3]).unwrap();
        assert_eq!(a.tets(), b.tets());
    }

    #[test]
    fn edge_index_beyond_two_is_reordered() {
        let text = "TETMESH v1\n4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n1\n0 1 2 3 1 3\n";
        let m: TetMesh<f64> = read_mesh(text).unwrap();
        assert_eq!(m.labels()[0].refinement_edge(), (1, 2));
    }

    #[test]
    fn malformed_input_reports_line() {
        let text = "TETMESH v1\n4\n0 0 0\n1 0 0\n0 1\n";
        match read_mesh::<f64>(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_mesh::<f64>("MESH\n").is_err());
        let bad = "TETMESH v1\n4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n1\n0 1 2 9 1 0\n";
        assert!(read_mesh::<f64>(bad).is_err());
    }

    #[test]
    fn field_roundtrip() {
        let m = build_cube_mesh::<f64>(1).unwrap();
        let fs = FieldSet {
            edge: vec![("y".into(), (0..m.edges().len()).map(|i| i as f64 * 0.5 - 1.0).collect())],
            cell: vec![("u".into(), (0..m.n_tets()).map(|i| Vec3::new(i as f64, 1.0 / 3.0, -2.0)).collect())],
        };
        let mut buf = Vec::new();
        write_fields(&m, &fs, &mut buf).unwrap();
        let back = read_fields(&m, std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.edge, fs.edge);
        assert_eq!(back.cell, fs.cell);
    }

    #[test]
    fn vtk_has_sections() {
        let m = build_cube_mesh::<f64>(1).unwrap();
        let eta = vec![1.0; 6];
        let mut buf = Vec::new();
        write_vtk(&m, &[CellData::Scalar("eta", &eta)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("CELLS 6 30"));
        assert!(s.contains("SCALARS eta double 1"));
        assert_eq!(s.lines().filter(|l| *l == "10").count(), 6);
    }
}
