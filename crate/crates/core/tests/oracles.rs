//! Dense linear algebra as an independent reference for the sparse kernels.

use hcurl_ocp::assembly::{assemble_b, element_mass, element_matrix, Coefficients};
use hcurl_ocp::linsolve::{solve, Preconditioner, SolverOptions};
use hcurl_ocp::mesh::build_lshape_mesh;
use hcurl_ocp::spaces::DofMap;
use hcurl_ocp::{Point, TetGeometry};
use nalgebra::{DMatrix, DVector, Matrix6};

fn skewed_tet() -> TetGeometry<f64> {
    TetGeometry::new([
        Point::new(0.1, -0.2, 0.0),
        Point::new(1.2, 0.1, 0.3),
        Point::new(0.3, 0.8, -0.1),
        Point::new(0.2, 0.3, 0.9),
    ])
    .unwrap()
}

fn to_matrix6(k: [[f64; 6]; 6]) -> Matrix6<f64> {
    Matrix6::from_fn(|i, j| k[i][j])
}

#[test]
fn element_curl_curl_kernel_is_three_dimensional() {
    let g = skewed_tet();
    let k = to_matrix6(element_matrix(&g, [1; 6], 1.0, 0.0));
    let mut ev: Vec<f64> = k.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let scale = ev[5];
    assert!(ev[..3].iter().all(|e| e.abs() < 1e-12 * scale), "{ev:?}");
    assert!(ev[3] > 1e-3 * scale);
    let mass = to_matrix6(element_mass(&g));
    let mev = mass.symmetric_eigen().eigenvalues;
    assert!(mev.iter().all(|&e| e > 0.0));
}

#[test]
fn sparse_solvers_match_dense_lu() {
    let m = build_lshape_mesh::<f64>(1).unwrap().refine(&[0, 3, 9]).unwrap();
    let d = DofMap::new(&m);
    let k = assemble_b(&m, &d, &Coefficients::constant(m.n_tets(), 0.5, 2.0)).unwrap();
    let dense = k.to_dense();
    let n = k.nrows();
    let a = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
    let b: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
    let reference = a.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
    assert!(a.cholesky().is_some());
    for pre in [Preconditioner::Jacobi, Preconditioner::Cholesky] {
        let opts = SolverOptions { tol: 1e-13, max_iter: None, preconditioner: pre };
        let (x, rep) = solve(&k, &b, None, &opts).unwrap();
        assert!(rep.converged);
        let err = (DVector::from_vec(x) - &reference).norm() / reference.norm();
        assert!(err < 1e-10, "{pre:?}: {err:e}");
    }
}
