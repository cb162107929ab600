//! Flat `key = value` run configuration and custom problem files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::benchmarks::{benchmark_inclusion, benchmark_lshape};
use crate::control::PgOptions;
use crate::driver::AdaptiveConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::linsolve::{Preconditioner, SolverOptions};
use crate::marking::MarkingStrategy;
use crate::mesh::build_box_mesh;
use crate::problem::{affine_vector, constant_vector, zero_scalar, Lifting, Material, ProblemSpec};
use crate::quadrature::QuadraturePolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Adaptive,
    Uniform,
}

pub const CONFIG_KEYS: &[&str] = &[
    "problem",
    "mode",
    "theta",
    "marking",
    "gamma",
    "alpha",
    "max_iterations",
    "max_dofs",
    "eta_tol",
    "initial_resolution",
    "solver_tol",
    "solver_max_iter",
    "preconditioner",
    "pg_tol",
    "pg_max_iter",
    "output_dir",
    "vtk",
    "diagnostics",
    "seed",
    "quadrature_degree",
];

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `lshape`, `inclusion`, or the path of a custom problem file.
    pub problem: String,
    pub mode: Mode,
    pub theta: f64,
    pub marking: MarkingStrategy,
    pub gamma: f64,
    /// Overrides the problem's regularization parameter.
    pub alpha: Option<f64>,
    pub max_iterations: usize,
    pub max_dofs: usize,
    pub eta_tol: f64,
    /// Initial mesh resolution; the problem's default when absent.
    pub initial_resolution: Option<usize>,
    pub solver_tol: f64,
    pub solver_max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    pub pg_tol: f64,
    pub pg_max_iter: usize,
    pub output_dir: PathBuf,
    pub vtk: bool,
    pub diagnostics: bool,
    pub seed: u64,
    /// Overrides the problem's base quadrature degree.
    pub quadrature_degree: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pg = PgOptions::default();
        Self {
            problem: "lshape".into(),
            mode: Mode::Adaptive,
            theta: 0.5,
            marking: MarkingStrategy::Doerfler,
            gamma: 0.5,
            alpha: None,
            max_iterations: 30,
            max_dofs: 50_000,
            eta_tol: 0.0,
            initial_resolution: None,
            solver_tol: 1e-10,
            solver_max_iter: None,
            preconditioner: Preconditioner::Cholesky,
            pg_tol: pg.tol,
            pg_max_iter: pg.max_outer,
            output_dir: PathBuf::from("output"),
            vtk: false,
            diagnostics: false,
            seed: 0x5eed,
            quadrature_degree: None,
        }
    }
}

fn unknown_key(key: &str) -> Error {
    Error::Config(format!("unknown key '{key}'; valid keys are: {}", CONFIG_KEYS.join(", ")))
}

/// Parses a run configuration; absent keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    if let Some(k) = table.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(unknown_key(k));
    }
    let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("alpha must be positive, got {a}")));
            }
        }
        if self.initial_resolution == Some(0) {
            return Err(Error::Config("initial_resolution must be positive".into()));
        }
        if let Some(d) = self.quadrature_degree {
            if !(1..=5).contains(&d) {
                return Err(Error::Config(format!("quadrature_degree must lie in 1..=5, got {d}")));
            }
        }
        if self.problem.trim().is_empty() {
            return Err(Error::Config("problem must not be empty".into()));
        }
        self.adaptive_config().validate()
    }

    pub fn adaptive_config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            theta: self.theta,
            strategy: self.marking,
            gamma: self.gamma,
            max_iterations: self.max_iterations,
            max_dofs: self.max_dofs,
            eta_tol: self.eta_tol,
            solver: SolverOptions { tol: self.solver_tol, max_iter: self.solver_max_iter, preconditioner: self.preconditioner },
            pg: PgOptions { tol: self.pg_tol, max_outer: self.pg_max_iter, ..PgOptions::default() },
            uniform: self.mode == Mode::Uniform,
            output_dir: if self.vtk { Some(self.output_dir.join("vtk")) } else { None },
            diagnostics: self.diagnostics,
        }
    }

    /// Resolves the problem (built-in name or custom file) and applies the overrides.
    pub fn problem_spec(&self) -> Result<ProblemSpec<f64>> {
        let mut p = match self.problem.as_str() {
            "lshape" => benchmark_lshape(self.initial_resolution.unwrap_or(1))?,
            "inclusion" => benchmark_inclusion(self.initial_resolution.unwrap_or(DEFAULT_INCLUSION_RESOLUTION))?,
            path => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("problem '{path}' is neither 'lshape', 'inclusion' nor a readable file: {e}")))?;
                parse_custom_problem(&text, Path::new(path), self.initial_resolution)?
            }
        };
        if let Some(a) = self.alpha {
            p.alpha = a;
        }
        if let Some(d) = self.quadrature_degree {
            p.quadrature = p.quadrature.with_degree(d)?;
        }
        p.validate()?;
        Ok(p)
    }
}

/// Initial cube resolution for the inclusion problem (`n^3` cells of six elements).
pub const DEFAULT_INCLUSION_RESOLUTION: usize = 4;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomProblem {
    pub name: String,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub cells: [usize; 3],
    pub mu_inv: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// `f = f_a × x + f_b`
    pub f_a: [f64; 3],
    pub f_b: [f64; 3],
    /// `u^d = ud_a × x + ud_b`
    pub ud_a: [f64; 3],
    pub ud_b: [f64; 3],
    /// Constant `y^d`.
    pub yd: [f64; 3],
    /// Boundary values `g = g_a × x + g_b`; homogeneous when both are absent.
    pub g_a: Option<[f64; 3]>,
    pub g_b: Option<[f64; 3]>,
    pub quadrature_degree: usize,
}

impl Default for CustomProblem {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            lo: [0.0; 3],
            hi: [1.0; 3],
            cells: [2, 2, 2],
            mu_inv: 1.0,
            sigma: 1.0,
            alpha: 0.1,
            f_a: [0.0; 3],
            f_b: [0.0; 3],
            ud_a: [0.0; 3],
            ud_b: [0.0; 3],
            yd: [0.0; 3],
            g_a: None,
            g_b: None,
            quadrature_degree: 2,
        }
    }
}

pub const CUSTOM_PROBLEM_KEYS: &[&str] = &[
    "name",
    "lo",
    "hi",
    "cells",
    "mu_inv",
    "sigma",
    "alpha",
    "f_a",
    "f_b",
    "ud_a",
    "ud_b",
    "yd",
    "g_a",
    "g_b",
    "quadrature_degree",
];

/// A box domain with one material and affine data. `resolution` scales the cell counts.
pub fn parse_custom_problem(text: &str, origin: &Path, resolution: Option<usize>) -> Result<ProblemSpec<f64>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {}", origin.display(), e.message())))?;
    if let Some(k) = table.keys().find(|k| !CUSTOM_PROBLEM_KEYS.contains(&k.as_str())) {
        return Err(Error::Config(format!(
            "{}: unknown key '{k}'; valid keys are: {}",
            origin.display(),
            CUSTOM_PROBLEM_KEYS.join(", ")
        )));
    }
    let c: CustomProblem =
        table.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{}: {}", origin.display(), e.message())))?;
    if !(c.mu_inv > 0.0 && c.sigma > 0.0 && c.alpha > 0.0) {
        return Err(Error::Config("mu_inv, sigma and alpha must be positive".into()));
    }
    if (0..3).any(|i| !(c.hi[i] > c.lo[i]) || c.cells[i] == 0) {
        return Err(Error::Config("the box needs lo < hi and positive cell counts".into()));
    }
    let v = Vec3::from_f64;
    let lifting = match (c.g_a, c.g_b) {
        (None, None) => Lifting::Homogeneous,
        (a, b) => {
            let g = affine_vector(v(a.unwrap_or([0.0; 3])), v(b.unwrap_or([0.0; 3])));
            Lifting::Field(Arc::new(move |x| g(x, 1)))
        }
    };
    let s = resolution.unwrap_or(1);
    let cells = [c.cells[0] * s, c.cells[1] * s, c.cells[2] * s];
    let (lo, hi) = (v(c.lo), v(c.hi));
    Ok(ProblemSpec {
        name: c.name,
        alpha: c.alpha,
        materials: vec![Material { mu_inv: c.mu_inv, sigma: c.sigma }],
        f: affine_vector(v(c.f_a), v(c.f_b)),
        // an affine field a×x+b is divergence free
        div_f: zero_scalar(),
        u_d: affine_vector(v(c.ud_a), v(c.ud_b)),
        y_d: constant_vector(v(c.yd)),
        curl_y_d: constant_vector(Vec3::zero()),
        lifting,
        exact: None,
        mesh: Arc::new(move || build_box_mesh(cells, lo, hi, |_| true)),
        classify: None,
        quadrature: QuadraturePolicy::new(c.quadrature_degree)?,
    })
}
