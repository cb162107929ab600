//! Newest-vertex bisection in Maubach's formulation with iterative conformity closure.

use std::collections::HashMap;

use super::{BisectionLabel, TetMesh};
use crate::error::{input, Error, Result};
use crate::geometry::TET_EDGES;
use crate::scalar::Real;

#[derive(Clone, Copy)]
struct Work {
    label: BisectionLabel,
    subdomain: u32,
    generation: u32,
    ancestor: usize,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Splits `(x0, x1, x2, x3)` of type `k` at the midpoint `z` of `x0 x_k` into
/// `(x0, .., x_{k-1}, z, x_{k+1}, ..)` and `(x1, .., x_k, z, x_{k+1}, ..)`, both of
/// type `k - 1` (wrapping from 1 to 3).
fn children(label: BisectionLabel, z: usize) -> [BisectionLabel; 2] {
    let k = label.tag as usize;
    let x = label.order;
    let mut first = x;
    first[k] = z;
    let mut second = x;
    second[..k].copy_from_slice(&x[1..=k]);
    second[k] = z;
    let tag = if k == 1 { 3 } else { (k - 1) as u8 };
    [BisectionLabel { order: first, tag }, BisectionLabel { order: second, tag }]
}

pub(super) fn refine<T: Real>(mesh: &TetMesh<T>, marked: &[usize]) -> Result<TetMesh<T>> {
    let n = mesh.n_tets();
    if let Some(&bad) = marked.iter().find(|&&t| t >= n) {
        return Err(input(format!("marked element {bad} out of range (mesh has {n} elements)")));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    let mut vertices = mesh.vertices().to_vec();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elems: Vec<Work> = (0..n)
        .map(|t| Work {
            label: mesh.labels()[t],
            subdomain: mesh.subdomain()[t],
            generation: mesh.generation()[t],
            ancestor: t,
        })
        .collect();
    let mut flag = vec![false; n];
    for &t in marked {
        flag[t] = true;
    }

    let half = T::lit(0.5);
    let max_passes = 64 + 16 * (usize::BITS as usize);
    let mut passes = 0;
    loop {
        if !flag.iter().any(|&f| f) {
            break;
        }
        passes += 1;
        if passes > max_passes {
            return Err(Error::Numerical(format!(
                "bisection closure did not terminate after {max_passes} passes; initial labels are not compatible"
            )));
        }
        let mut next = Vec::with_capacity(elems.len() + flag.iter().filter(|&&f| f).count());
        for (e, &f) in elems.iter().zip(&flag) {
            if !f {
                next.push(*e);
                continue;
            }
            let (a, b) = e.label.refinement_edge();
            let z = *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                vertices.push((vertices[a] + vertices[b]) * half);
                vertices.len() - 1
            });
            for label in children(e.label, z) {
                next.push(Work { label, subdomain: e.subdomain, generation: e.generation + 1, ancestor: e.ancestor });
            }
        }
        elems = next;
        flag = elems
            .iter()
            .map(|e| {
                let o = e.label.order;
                TET_EDGES.iter().any(|&(i, j)| midpoints.contains_key(&edge_key(o[i], o[j])))
            })
            .collect();
    }

    TetMesh::assemble(
        vertices,
        elems.iter().map(|e| e.label).collect(),
        elems.iter().map(|e| e.subdomain).collect(),
        elems.iter().map(|e| e.generation).collect(),
        elems.iter().map(|e| e.ancestor).collect(),
    )
}
