//! The adaptive loop SOLVE → ESTIMATE → MARK → REFINE, uniform comparison runs,
//! exact-error evaluation and convergence-rate fitting.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use crate::assembly::Discretization;
use crate::control::{projected_gradient, KktSolution, PgOptions};
use crate::error::{Error, Result};
use crate::estimator::{assemble_indicator, IndicatorReport};
use crate::geometry::{point_tet_distance, Vec3};
use crate::linsolve::SolverOptions;
use crate::marking::{mark, MarkingStrategy};
use crate::mesh::io::{write_vtk, CellData};
use crate::mesh::TetMesh;
use crate::problem::ProblemSpec;
use crate::scalar::Real;
use crate::spaces::{project_admissible, transfer_edge_field, DofMap, EdgeField, P0Field, WhitneyBasis};

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveConfig {
    pub theta: f64,
    pub strategy: MarkingStrategy,
    /// Fraction for the maximum strategy.
    pub gamma: f64,
    /// Number of refinements; the run has at most `max_iterations + 1` records.
    pub max_iterations: usize,
    /// Upper bound on the state degrees of freedom: a refined mesh exceeding it ends the
    /// run without being solved.
    pub max_dofs: usize,
    /// Stop once `η̂ ≤ eta_tol`.
    pub eta_tol: f64,
    pub solver: SolverOptions,
    pub pg: PgOptions,
    /// Refine every element three times per step (octasection) instead of marking.
    pub uniform: bool,
    /// Per-iteration VTK dumps go here when set.
    pub output_dir: Option<PathBuf>,
    /// Also evaluate `osc(y^d)` and `osc(f)`.
    pub diagnostics: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            strategy: MarkingStrategy::Doerfler,
            gamma: 0.5,
            max_iterations: 30,
            max_dofs: 50_000,
            eta_tol: 0.0,
            solver: SolverOptions::default().cholesky(),
            pg: PgOptions::default(),
            uniform: false,
            output_dir: None,
            diagnostics: false,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.max_dofs == 0 {
            return Err(Error::Config("max_dofs must be positive".into()));
        }
        if !(self.eta_tol >= 0.0) {
            return Err(Error::Config(format!("eta_tol must be nonnegative, got {}", self.eta_tol)));
        }
        if !(self.solver.tol > 0.0) || !(self.pg.tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.pg.max_outer == 0 {
            return Err(Error::Config("pg_max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn uniform(mut self) -> Self {
        self.uniform = true;
        self
    }
}

/// One row of the convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub iter: usize,
    /// Edge degrees of freedom of the state, boundary edges included.
    pub dofs_state: usize,
    /// Three values per element.
    pub dofs_control: usize,
    pub n_tets: usize,
    pub eta_hat: f64,
    pub eta_hat_max: f64,
    /// `NaN` when the problem has no exact solution.
    pub err_y: f64,
    pub err_p: f64,
    pub err_u: f64,
    pub err_total: f64,
    pub effectivity: f64,
    pub objective: f64,
    pub pg_iters: usize,
    pub pg_converged: bool,
    pub pg_residual: f64,
    /// Number of elements marked after this solve (0 on the last record).
    pub marked: usize,
    pub seconds: f64,
}

pub const CSV_HEADER: &str =
    "iter,dofs_state,dofs_control,eta_hat,eta_hat_max,err_y,err_p,err_u,err_total,effectivity,J,pg_iters,seconds";

/// Twelve significant digits.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        format!("{v}")
    }
}

impl ConvergenceRecord {
    pub fn csv_row(&self) -> String {
        let r = format_real;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.dofs_state,
            self.dofs_control,
            r(self.eta_hat),
            r(self.eta_hat_max),
            r(self.err_y),
            r(self.err_p),
            r(self.err_u),
            r(self.err_total),
            r(self.effectivity),
            r(self.objective),
            self.pg_iters,
            r(self.seconds)
        )
    }
}

pub fn write_csv<W: Write>(records: &[ConvergenceRecord], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for rec in records {
        writeln!(w, "{}", rec.csv_row())?;
    }
    Ok(())
}

/// Everything produced at one level, handed to the observer of [`run_with`].
pub struct Step<'a, T> {
    pub iter: usize,
    pub disc: &'a Discretization<T>,
    pub solution: &'a KktSolution<T>,
    pub indicator: &'a IndicatorReport<T>,
    /// Elements selected for refinement (empty on the last level and in uniform mode).
    pub marked: &'a [usize],
    pub record: &'a ConvergenceRecord,
}

/// A run aborted by an error, with the records completed before it.
#[derive(Debug)]
pub struct PartialRun {
    pub records: Vec<ConvergenceRecord>,
    pub error: Error,
}

impl fmt::Display for PartialRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run aborted after {} iterations: {}", self.records.len(), self.error)
    }
}

impl std::error::Error for PartialRun {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactErrors {
    /// `‖y* − y_h‖_{curl}`
    pub y: f64,
    pub p: f64,
    /// `‖u* − u_h‖_0`
    pub u: f64,
}

impl ExactErrors {
    pub fn total(&self) -> f64 {
        self.y + self.p + self.u
    }
}

fn curl_error<T: Real>(
    mesh: &TetMesh<T>,
    dofs: &DofMap,
    field: &EdgeField<T>,
    exact: &dyn Fn(Vec3<T>, u32) -> Vec3<T>,
    exact_curl: &dyn Fn(Vec3<T>, u32) -> Vec3<T>,
    problem: &ProblemSpec<T>,
) -> T {
    let mut acc = T::zero();
    for t in 0..mesh.n_tets() {
        let geo = mesh.geometry(t);
        let l = mesh.subdomain()[t];
        let basis = WhitneyBasis::new(geo);
        let c = field.local(mesh, dofs, t);
        let curl = basis.curl(&c);
        let q = problem.quadrature.cell(geo);
        for i in 0..q.len() {
            let x = q.points[i];
            let v = exact(x, l) - basis.eval(&c, &q.bary[i]);
            let w = exact_curl(x, l) - curl;
            acc += q.weights[i] * (v.norm_sq() + w.norm_sq());
        }
    }
    acc.sqrt()
}

/// Errors of a discrete triplet against the exact solution of `problem`, by the
/// problem's quadrature policy.
pub fn exact_errors<T: Real>(disc: &Discretization<T>, problem: &ProblemSpec<T>, sol: &KktSolution<T>) -> Result<ExactErrors> {
    let ex = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Unsupported(format!("problem '{}' has no exact solution", problem.name)))?;
    let mesh = &disc.mesh;
    let err_y = curl_error(mesh, &disc.dofs, &sol.y, &*ex.y, &*ex.curl_y, problem);
    let err_p = curl_error(mesh, &disc.dofs, &sol.p, &*ex.p, &*ex.curl_p, problem);
    let mut eu = T::zero();
    for t in 0..mesh.n_tets() {
        let l = mesh.subdomain()[t];
        let ut = sol.u.values[t];
        eu += problem.quadrature.cell(mesh.geometry(t)).integrate(|x| ((ex.u)(x, l) - ut).norm_sq());
    }
    let out = ExactErrors { y: err_y.as_f64(), p: err_p.as_f64(), u: eu.sqrt().as_f64() };
    if !(out.y.is_finite() && out.p.is_finite() && out.u.is_finite()) {
        return Err(Error::Numerical(format!("exact error evaluation produced {out:?}")));
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x` over the last `window` points
/// (all points when fewer). `None` with fewer than two usable points.
pub fn slope_fit(x: &[f64], y: &[f64], window: usize) -> Option<f64> {
    let n = x.len().min(y.len());
    let start = n.saturating_sub(window.max(2));
    let pts: Vec<(f64, f64)> = (start..n)
        .filter(|&i| x[i] > 0.0 && y[i] > 0.0 && x[i].is_finite() && y[i].is_finite())
        .map(|i| (x[i].ln(), y[i].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Slope of a chosen column against state DoFs.
pub fn record_slope(records: &[ConvergenceRecord], window: usize, value: impl Fn(&ConvergenceRecord) -> f64) -> Option<f64> {
    let x: Vec<f64> = records.iter().map(|r| r.dofs_state as f64).collect();
    let y: Vec<f64> = records.iter().map(value).collect();
    slope_fit(&x, &y, window)
}

/// Fraction of `elements` whose tet comes within `band` of the ball of radius `radius`
/// around the origin (that is, meets the ball or the shell `radius < |x| ≤ radius + band`).
pub fn fraction_near_ball<T: Real>(mesh: &TetMesh<T>, elements: &[usize], radius: f64, band: f64) -> f64 {
    if elements.is_empty() {
        return 0.0;
    }
    let reach = T::lit(radius + band);
    let hit = elements.iter().filter(|&&t| point_tet_distance(Vec3::zero(), mesh.geometry(t)) <= reach).count();
    hit as f64 / elements.len() as f64
}

/// Fraction of elements whose centroid lies within `dist` of the z-axis.
pub fn fraction_near_axis<T: Real>(mesh: &TetMesh<T>, dist: f64) -> f64 {
    let d = T::lit(dist);
    let hit = mesh
        .geometries()
        .iter()
        .filter(|g| {
            let c = g.centroid();
            (c.x * c.x + c.y * c.y).sqrt() <= d
        })
        .count();
    hit as f64 / mesh.n_tets().max(1) as f64
}

struct Previous<T> {
    mesh: TetMesh<T>,
    dofs: DofMap,
    u: P0Field<T>,
    y: EdgeField<T>,
    p: EdgeField<T>,
}

fn dump_vtk<T: Real>(dir: &std::path::Path, step: &Step<'_, T>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("level_{:03}.vtk", step.iter));
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let eta_hat: Vec<T> = step.indicator.eta_hat2.iter().map(|v| v.sqrt()).collect();
    let mut marked = vec![T::zero(); step.disc.n_tets()];
    for &t in step.marked {
        marked[t] = T::one();
    }
    let data = [
        CellData::Scalar("eta_hat", &eta_hat),
        CellData::Scalar("marked", &marked),
        CellData::Vector("u", &step.solution.u.values),
        CellData::Vector("lambda", &step.solution.lambda.values),
    ];
    write_vtk(&step.disc.mesh, &data, file)
}

/// Runs the loop, calling `observer` once per level. Uniform mode (`config.uniform`)
/// replaces MARK → REFINE by three bisection sweeps of the whole mesh.
pub fn run_with<T: Real, O: FnMut(&Step<'_, T>)>(
    problem: &ProblemSpec<T>,
    config: &AdaptiveConfig,
    mut observer: O,
) -> std::result::Result<Vec<ConvergenceRecord>, PartialRun> {
    let mut records = Vec::new();
    match run_inner(problem, config, &mut records, &mut observer) {
        Ok(()) => Ok(records),
        Err(error) => Err(PartialRun { records, error }),
    }
}

fn run_inner<T: Real, O: FnMut(&Step<'_, T>)>(
    problem: &ProblemSpec<T>,
    config: &AdaptiveConfig,
    records: &mut Vec<ConvergenceRecord>,
    observer: &mut O,
) -> Result<()> {
    config.validate()?;
    problem.validate()?;
    let mut mesh = problem.initial_mesh()?;
    let mut prev: Option<Previous<T>> = None;
    for iter in 0..=config.max_iterations {
        let clock = Instant::now();
        let disc = Discretization::new(mesh, problem, config.solver)?;
        let (u0, guesses) = match &prev {
            None => (project_admissible(&disc.ud_h), None),
            Some(pr) => {
                let y = transfer_edge_field(&pr.y, &pr.mesh, &pr.dofs, &disc.mesh, &disc.dofs);
                let p = transfer_edge_field(&pr.p, &pr.mesh, &pr.dofs, &disc.mesh, &disc.dofs);
                (pr.u.inject(&disc.mesh), Some((y, p)))
            }
        };
        let sol = projected_gradient(&disc, &u0, &config.pg, guesses.as_ref().map(|(y, p)| (y, p)))?;
        let ind = assemble_indicator(&disc, problem, &sol, config.diagnostics)?;
        let errs = match problem.exact {
            Some(_) => Some(exact_errors(&disc, problem, &sol)?),
            None => None,
        };
        let eta_hat = ind.eta_hat().as_f64();
        let dofs_state = disc.dofs.n_edges();
        let last = iter == config.max_iterations || dofs_state >= config.max_dofs || eta_hat <= config.eta_tol;
        let marked: Vec<usize> = if last || config.uniform {
            Vec::new()
        } else {
            let param = match config.strategy {
                MarkingStrategy::Doerfler => config.theta,
                MarkingStrategy::Maximum => config.gamma,
            };
            mark(config.strategy, &ind.eta_hat2, T::lit(param))?
        };
        let nan = f64::NAN;
        let total = errs.map_or(nan, |e| e.total());
        let record = ConvergenceRecord {
            iter,
            dofs_state,
            dofs_control: 3 * disc.n_tets(),
            n_tets: disc.n_tets(),
            eta_hat,
            eta_hat_max: ind.eta_hat_max().as_f64(),
            err_y: errs.map_or(nan, |e| e.y),
            err_p: errs.map_or(nan, |e| e.p),
            err_u: errs.map_or(nan, |e| e.u),
            err_total: total,
            effectivity: if total > 0.0 { eta_hat / total } else { nan },
            objective: sol.objective.as_f64(),
            pg_iters: sol.outer_iterations,
            pg_converged: sol.converged,
            pg_residual: sol.residual.as_f64(),
            marked: if config.uniform && !last { disc.n_tets() } else { marked.len() },
            seconds: clock.elapsed().as_secs_f64(),
        };
        let step = Step { iter, disc: &disc, solution: &sol, indicator: &ind, marked: &marked, record: &record };
        if let Some(dir) = &config.output_dir {
            dump_vtk(dir, &step)?;
        }
        observer(&step);
        records.push(record);
        if last {
            return Ok(());
        }
        let next = if config.uniform {
            disc.mesh.refine_uniform(3)?
        } else if marked.is_empty() {
            // all indicators vanish: nothing left to refine
            return Ok(());
        } else {
            disc.mesh.refine(&marked)?
        };
        if next.edges().len() > config.max_dofs {
            // the next level would exceed the budget
            return Ok(());
        }
        mesh = problem.apply_classification(next)?;
        let Discretization { mesh: old_mesh, dofs, .. } = disc;
        prev = Some(Previous { mesh: old_mesh, dofs, u: sol.u, y: sol.y, p: sol.p });
    }
    Ok(())
}

pub fn run_adaptive<T: Real>(problem: &ProblemSpec<T>, config: &AdaptiveConfig) -> std::result::Result<Vec<ConvergenceRecord>, PartialRun> {
    let mut cfg = config.clone();
    cfg.uniform = false;
    run_with(problem, &cfg, |_| {})
}

pub fn run_uniform<T: Real>(problem: &ProblemSpec<T>, config: &AdaptiveConfig) -> std::result::Result<Vec<ConvergenceRecord>, PartialRun> {
    let mut cfg = config.clone();
    cfg.uniform = true;
    run_with(problem, &cfg, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{benchmark_inclusion, benchmark_lshape, INCLUSION_RADIUS};
    use crate::problem::{affine_vector, ExactSolution, Material};
    use crate::spaces::project_p_h;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = (1..10).map(|k| 10f64.powi(k)).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-1.0 / 3.0)).collect();
        assert!((slope_fit(&x, &y, 6).unwrap() + 1.0 / 3.0).abs() < 1e-12);
        assert!(slope_fit(&x[..1], &y[..1], 6).is_none());
        // the window only sees the tail
        let mut y2 = y.clone();
        y2[0] = 1e9;
        assert!((slope_fit(&x, &y2, 6).unwrap() + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_rows_have_twelve_digits() {
        assert_eq!(format_real(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(format_real(f64::NAN), "NaN");
        assert_eq!(CSV_HEADER.split(',').count(), 13);
    }

    #[test]
    fn zero_iterations_give_one_record() {
        let p = benchmark_lshape::<f64>(1).unwrap();
        let cfg = AdaptiveConfig { max_iterations: 0, ..Default::default() };
        let recs = run_adaptive(&p, &cfg).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].marked, 0);
        assert!(recs[0].err_total.is_finite() && recs[0].eta_hat > 0.0);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let p = benchmark_lshape::<f64>(1).unwrap();
        let cfg = AdaptiveConfig { theta: 1.5, ..Default::default() };
        let err = run_adaptive(&p, &cfg).unwrap_err();
        assert!(err.records.is_empty());
        assert!(matches!(err.error, Error::Config(_)));
    }

    #[test]
    fn dofs_increase_and_uniform_grows_eightfold() {
        let p = benchmark_lshape::<f64>(1).unwrap();
        let cfg = AdaptiveConfig { max_iterations: 4, ..Default::default() };
        let recs = run_adaptive(&p, &cfg).unwrap();
        assert_eq!(recs.len(), 5);
        for w in recs.windows(2) {
            assert!(w[1].dofs_state > w[0].dofs_state);
        }
        let cfg = AdaptiveConfig { max_iterations: 2, ..Default::default() };
        let recs = run_uniform(&p, &cfg).unwrap();
        assert_eq!(recs.len(), 3);
        for w in recs.windows(2) {
            assert_eq!(w[1].n_tets, 8 * w[0].n_tets);
        }
    }

    #[test]
    fn reproduced_state_has_no_error() {
        // y* = a×x + b lies in the discrete space; u* = 0 since p* = 0 and u^d = 0
        let mut p = benchmark_inclusion::<f64>(2).unwrap();
        let a = Vec3::new(0.3, -0.2, 0.5);
        let b = Vec3::new(1.0, 0.0, -1.0);
        p.materials = vec![Material { mu_inv: 1.0, sigma: 1.0 }, Material { mu_inv: 1.0, sigma: 1.0 }];
        let y = affine_vector(a, b);
        p.f = y.clone();
        p.div_f = crate::problem::zero_scalar();
        p.u_d = crate::problem::zero_vector();
        let twice_a = a * 2.0;
        p.y_d = crate::problem::constant_vector(twice_a);
        p.lifting = crate::problem::Lifting::Field(Arc::new(move |x| a.cross(x) + b));
        p.exact = Some(ExactSolution {
            y,
            curl_y: crate::problem::constant_vector(twice_a),
            p: crate::problem::zero_vector(),
            curl_p: crate::problem::zero_vector(),
            u: crate::problem::zero_vector(),
        });
        let d = Discretization::new(p.initial_mesh().unwrap(), &p, SolverOptions::with_tol(1e-13)).unwrap();
        let sol = projected_gradient(&d, &P0Field::zeros(d.n_tets()), &PgOptions::default(), None).unwrap();
        let e = exact_errors(&d, &p, &sol).unwrap();
        assert!(e.y <= 1e-9 && e.p <= 1e-9 && e.u <= 1e-9, "{e:?}");
    }

    #[test]
    fn missing_exact_solution_is_unsupported() {
        let mut p = benchmark_lshape::<f64>(1).unwrap();
        p.exact = None;
        let d = Discretization::new(p.initial_mesh().unwrap(), &p, SolverOptions::default()).unwrap();
        let sol = projected_gradient(&d, &P0Field::zeros(d.n_tets()), &PgOptions::default(), None).unwrap();
        assert!(matches!(exact_errors(&d, &p, &sol), Err(Error::Unsupported(_))));
        let recs = run_adaptive(&p, &AdaptiveConfig { max_iterations: 1, ..Default::default() }).unwrap();
        assert!(recs[0].err_total.is_nan());
    }

    /// `err_u` of `P_h u*` on the coarse cube equals `‖10χ − P_h(10χ)‖`, computed from
    /// Monte-Carlo volume fractions of the ball in each element.
    #[test]
    fn inclusion_control_error_matches_volume_fractions() {
        let p = benchmark_inclusion::<f64>(2).unwrap();
        let d = Discretization::new(p.initial_mesh().unwrap(), &p, SolverOptions::default()).unwrap();
        let u = project_p_h(|x, t| (p.exact.as_ref().unwrap().u)(x, d.mesh.subdomain()[t]), &d.mesh, &p.quadrature);
        let y = d.solve_state(&u, None).unwrap();
        let pa = d.solve_adjoint(&y, None).unwrap();
        let sol = KktSolution {
            lambda: u.clone(),
            y,
            p: pa,
            u,
            objective: 0.0,
            residual: 0.0,
            outer_iterations: 0,
            converged: true,
            history: vec![],
        };
        let e = exact_errors(&d, &p, &sol).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut oracle = 0.0;
        for g in d.mesh.geometries() {
            let samples = 20_000;
            let mut inside = 0;
            for _ in 0..samples {
                // uniform point in the tet via sorted barycentric sampling
                let mut c: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
                c.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let l = [c[0], c[1] - c[0], c[2] - c[1], 1.0 - c[2]];
                if g.point(&l).norm() < INCLUSION_RADIUS {
                    inside += 1;
                }
            }
            let frac = inside as f64 / samples as f64;
            // ∫ |10χ − 10 frac|^2 = 100 |T| frac (1 − frac)
            oracle += 100.0 * g.volume * frac * (1.0 - frac);
        }
        let oracle = oracle.sqrt();
        assert!((e.u - oracle).abs() <= 0.01 * oracle, "err_u {} oracle {oracle}", e.u);
    }

    #[test]
    fn observer_sees_every_level_and_marks_argmax() {
        let p = benchmark_lshape::<f64>(1).unwrap();
        let cfg = AdaptiveConfig { max_iterations: 3, ..Default::default() };
        let mut seen = Vec::new();
        run_with(&p, &cfg, |s| {
            if s.iter < 3 {
                assert!(s.marked.contains(&s.indicator.argmax));
            } else {
                assert!(s.marked.is_empty());
            }
            seen.push(s.iter);
        })
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn nested_injection_keeps_objective() {
        let p = benchmark_lshape::<f64>(1).unwrap();
        let solver = SolverOptions::with_tol(1e-13);
        let d0 = Discretization::new(p.initial_mesh().unwrap(), &p, solver).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = P0Field {
            values: (0..d0.n_tets()).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect(),
        };
        let y = d0.solve_state(&u, None).unwrap();
        let j0 = d0.objective(&u, &y);
        let marked: Vec<usize> = (0..d0.n_tets()).filter(|t| t % 3 == 0).collect();
        let fine = d0.mesh.refine(&marked).unwrap();
        let d1 = Discretization::new(fine, &p, solver).unwrap();
        let y1 = transfer_edge_field(&y, &d0.mesh, &d0.dofs, &d1.mesh, &d1.dofs);
        let j1 = d1.objective(&u.inject(&d1.mesh), &y1);
        assert!((j1 - j0).abs() <= 1e-10 * j0.abs().max(1.0), "{j0} {j1}");
    }

    #[test]
    fn band_fraction() {
        let p = benchmark_inclusion::<f64>(2).unwrap();
        let m = p.initial_mesh().unwrap();
        let all: Vec<usize> = (0..m.n_tets()).collect();
        assert_eq!(fraction_near_ball(&m, &all, 2.0, 0.0), 1.0);
        assert_eq!(fraction_near_ball(&m, &[], 0.6, 0.075), 0.0);
        assert!(fraction_near_axis(&m, 10.0) == 1.0);
    }
}
