use hcurl_ocp::benchmarks::{benchmark_inclusion, benchmark_lshape};
use hcurl_ocp::control::PgOptions;
use hcurl_ocp::driver::{fraction_near_axis, run_adaptive, run_with, write_csv, AdaptiveConfig, CSV_HEADER};
use hcurl_ocp::linsolve::SolverOptions;
use hcurl_ocp::mesh::io::{mesh_to_string, read_mesh};

#[test]
fn lshape_refines_towards_the_reentrant_edge() {
    let p = benchmark_lshape::<f64>(1).unwrap();
    let cfg = AdaptiveConfig { max_iterations: 10, ..Default::default() };
    let mut last_mesh = None;
    let recs = run_with(&p, &cfg, |s| last_mesh = Some(s.disc.mesh.clone())).unwrap();
    assert_eq!(recs.len(), 11);
    assert!(recs.windows(2).all(|w| w[1].dofs_state > w[0].dofs_state));
    assert!(recs.last().unwrap().err_total < 0.6 * recs[0].err_total);
    assert!(recs.iter().all(|r| r.pg_converged));
    let m = last_mesh.unwrap();
    m.check_conformity().unwrap();
    // the region within 0.25 of the axis holds under 5% of the volume
    let share = std::f64::consts::PI * 0.25 * 0.25 * 0.75 / 3.0;
    let near = fraction_near_axis(&m, 0.25);
    assert!(near > 5.0 * share, "{near}");
}

#[test]
fn single_precision_pipeline_tracks_double() {
    let cfg64 = AdaptiveConfig { max_iterations: 3, ..Default::default() };
    let cfg32 = AdaptiveConfig {
        solver: SolverOptions::with_tol(1e-6),
        pg: PgOptions { tol: 1e-5, ..PgOptions::default() },
        ..cfg64.clone()
    };
    let r64 = run_adaptive(&benchmark_lshape::<f64>(1).unwrap(), &cfg64).unwrap();
    let r32 = run_adaptive(&benchmark_lshape::<f32>(1).unwrap(), &cfg32).unwrap();
    assert_eq!(r64.len(), r32.len());
    for (a, b) in r64.iter().zip(&r32) {
        assert_eq!(a.dofs_state, b.dofs_state);
        assert!((a.err_total - b.err_total).abs() <= 1e-3 * a.err_total, "{} vs {}", a.err_total, b.err_total);
        assert!((a.eta_hat - b.eta_hat).abs() <= 1e-3 * a.eta_hat);
    }
}

#[test]
fn inclusion_levels_write_csv_and_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let p = benchmark_inclusion::<f64>(2).unwrap();
    let cfg = AdaptiveConfig { max_iterations: 2, output_dir: Some(dir.path().to_path_buf()), ..Default::default() };
    let recs = run_adaptive(&p, &cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&recs, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(text.lines().count(), 4);
    for i in 0..3 {
        let vtk = std::fs::read_to_string(dir.path().join(format!("level_{i:03}.vtk"))).unwrap();
        assert!(vtk.contains(&format!("CELLS {} {}", recs[i].n_tets, 5 * recs[i].n_tets)));
    }
}

#[test]
fn refined_mesh_survives_text_roundtrip() {
    let p = benchmark_inclusion::<f64>(2).unwrap();
    let cfg = AdaptiveConfig { max_iterations: 2, ..Default::default() };
    let mut fine = None;
    run_with(&p, &cfg, |s| fine = Some(s.disc.mesh.clone())).unwrap();
    let m = fine.unwrap();
    let back = read_mesh::<f64>(&mesh_to_string(&m)).unwrap();
    assert_eq!(back.tets(), m.tets());
    assert_eq!(back.subdomain(), m.subdomain());
    assert_eq!(back.labels(), m.labels());
    assert_eq!(mesh_to_string(&back), mesh_to_string(&m));
}
