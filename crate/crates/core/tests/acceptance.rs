//! Acceptance suite: the two benchmark studies plus the invariant suite, one PASS/FAIL
//! line per criterion. Exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use hcurl_ocp::benchmarks::{benchmark_inclusion, benchmark_lshape, INCLUSION_RADIUS};
use hcurl_ocp::config::DEFAULT_INCLUSION_RESOLUTION;
use hcurl_ocp::driver::{fraction_near_ball, record_slope, run_with, AdaptiveConfig, ConvergenceRecord};
use hcurl_ocp::selfcheck::run_checks;
use hcurl_ocp::Problem;

/// Trailing window for every rate fit.
const WINDOW: usize = 6;
/// Adaptive runs stop before exceeding this many state DoFs.
const ADAPTIVE_DOFS: usize = 50_000;
/// Uniform runs go one sweep past the adaptive budget.
const UNIFORM_DOFS: usize = 100_000;
const LOCALIZATION_ITER: usize = 12;
/// Half of the 0.15 band around the interface sphere.
const BAND_HALF_WIDTH: f64 = 0.075;

struct Study {
    records: Vec<ConvergenceRecord>,
    /// Fraction of marked elements near the inclusion at the localization iteration.
    near_fraction: Option<f64>,
    seconds: f64,
}

fn study(name: &str, problem: &Problem, uniform: bool) -> Study {
    let cfg = AdaptiveConfig {
        max_dofs: if uniform { UNIFORM_DOFS } else { ADAPTIVE_DOFS },
        uniform,
        ..AdaptiveConfig::default()
    };
    let start = Instant::now();
    let mut near_fraction = None;
    let records = run_with(problem, &cfg, |s| {
        if s.iter == LOCALIZATION_ITER && !uniform {
            near_fraction = Some(fraction_near_ball(&s.disc.mesh, s.marked, INCLUSION_RADIUS, BAND_HALF_WIDTH));
        }
    })
    .unwrap_or_else(|e| panic!("{name}: {e}"));
    let seconds = start.elapsed().as_secs_f64();
    println!("{name}: {} levels, final {} state DoFs, {seconds:.1}s", records.len(), records.last().unwrap().dofs_state);
    for r in &records {
        println!(
            "  {:3} {:8} err_y {:.4e} err_p {:.4e} err_u {:.4e} total {:.4e} eta {:.4e} eff {:.3}{}",
            r.iter,
            r.dofs_state,
            r.err_y,
            r.err_p,
            r.err_u,
            r.err_total,
            r.eta_hat,
            r.effectivity,
            if r.pg_converged { "" } else { " (pg limit)" }
        );
    }
    Study { records, near_fraction, seconds }
}

fn slope(s: &Study, f: fn(&ConvergenceRecord) -> f64) -> f64 {
    record_slope(&s.records, WINDOW, f).unwrap_or(f64::NAN)
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

struct Verdicts(Vec<bool>);

impl Verdicts {
    fn report(&mut self, id: usize, ok: bool, what: &str) {
        println!("[{}] criterion {id}: {what}", if ok { "PASS" } else { "FAIL" });
        self.0.push(ok);
    }
}

/// Ratio of the largest to the smallest effectivity from iteration 3 on.
fn effectivity_spread(s: &Study) -> f64 {
    let e: Vec<f64> = s.records.iter().filter(|r| r.iter >= 3).map(|r| r.effectivity).collect();
    let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = e.iter().copied().fold(f64::INFINITY, f64::min);
    if e.is_empty() || !(min > 0.0) {
        f64::INFINITY
    } else {
        max / min
    }
}

fn main() -> ExitCode {
    let mut v = Verdicts(Vec::new());

    let t = Instant::now();
    let checks = run_checks(0x5eed);
    let check_secs = t.elapsed().as_secs_f64();

    let lshape = benchmark_lshape::<f64>(1).unwrap();
    let inclusion = benchmark_inclusion::<f64>(DEFAULT_INCLUSION_RESOLUTION).unwrap();
    let l_amr = study("lshape adaptive", &lshape, false);
    let l_uni = study("lshape uniform", &lshape, true);
    let i_amr = study("inclusion adaptive", &inclusion, false);
    let i_uni = study("inclusion uniform", &inclusion, true);

    let total = |r: &ConvergenceRecord| r.err_total;
    let ey = |r: &ConvergenceRecord| r.err_y;
    let ep = |r: &ConvergenceRecord| r.err_p;
    let eu = |r: &ConvergenceRecord| r.err_u;

    let max_dofs = l_amr.records.iter().map(|r| r.dofs_state).max().unwrap();
    let s1 = slope(&l_amr, total);
    v.report(
        1,
        within(s1, -0.45, -0.25) && max_dofs <= ADAPTIVE_DOFS && l_amr.records.len() >= WINDOW,
        &format!("lshape adaptive total-error slope {s1:.4} over the last {WINDOW} levels in [-0.45, -0.25], {max_dofs} DoFs"),
    );

    let s2 = slope(&l_uni, total);
    v.report(
        2,
        within(s2, -0.25, -0.08) && s2 > s1,
        &format!("lshape uniform total-error slope {s2:.4} in [-0.25, -0.08] and shallower than adaptive {s1:.4}"),
    );

    let (s3u, s3p) = (slope(&l_amr, eu), slope(&l_amr, ep));
    v.report(
        3,
        within(s3u, -0.85, -0.45) && within(s3p, -0.85, -0.45),
        &format!("lshape adaptive slopes err_u {s3u:.4}, err_p {s3p:.4} in [-0.85, -0.45]"),
    );

    let (s4u, s4y, s4t) = (slope(&i_amr, eu), slope(&i_amr, ey), slope(&i_uni, total));
    v.report(
        4,
        within(s4u, -0.45, -0.25) && within(s4y, -0.45, -0.25) && within(s4t, -0.3, -0.1),
        &format!(
            "inclusion adaptive slopes err_u {s4u:.4}, err_y {s4y:.4} in [-0.45, -0.25]; uniform total {s4t:.4} in [-0.3, -0.1] \
             (adaptive total {:.4})",
            slope(&i_amr, total)
        ),
    );

    let frac = i_amr.near_fraction;
    v.report(
        5,
        frac.is_some_and(|f| f >= 0.6),
        &format!(
            "share of marked elements within {BAND_HALF_WIDTH} of the inclusion at iteration {LOCALIZATION_ITER}: {}",
            frac.map_or("not reached".to_string(), |f| format!("{f:.3} (≥ 0.6)"))
        ),
    );

    // iterations count adaptive steps; the uniform spreads are printed for reference
    let spreads: Vec<f64> = [&l_amr, &i_amr].iter().map(|s| effectivity_spread(s)).collect();
    let uniform_spread = |s: &Study| {
        let e: Vec<f64> = s.records.iter().map(|r| r.effectivity).collect();
        e.iter().copied().fold(f64::NEG_INFINITY, f64::max) / e.iter().copied().fold(f64::INFINITY, f64::min)
    };
    v.report(
        6,
        spreads.iter().all(|&s| s < 10.0),
        &format!(
            "adaptive effectivity max/min from iteration 3: lshape {:.3}, inclusion {:.3} (< 10); uniform over all levels {:.3}, {:.3}",
            spreads[0],
            spreads[1],
            uniform_spread(&l_uni),
            uniform_spread(&i_uni)
        ),
    );

    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    v.report(
        7,
        failed.is_empty() && check_secs < 60.0,
        &format!("{} of {} invariant checks passed in {check_secs:.2}s (< 60 s){}", checks.len() - failed.len(), checks.len(), {
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", failed.join(", "))
            }
        }),
    );

    let growth = |s: &Study| -> (bool, Vec<f64>) {
        let mut exact = true;
        let mut ratios = Vec::new();
        for w in s.records.windows(2) {
            exact &= w[1].n_tets == 8 * w[0].n_tets && w[1].dofs_control == 8 * w[0].dofs_control;
            ratios.push(w[1].dofs_state as f64 / w[0].dofs_state as f64);
        }
        // edge counts approach eight times from below as the boundary share shrinks
        let ok = exact
            && !ratios.is_empty()
            && ratios.iter().all(|&r| r > 5.0 && r <= 8.0)
            && ratios.windows(2).all(|w| w[1] >= w[0])
            && *ratios.last().unwrap() >= 7.0;
        (ok, ratios)
    };
    let (g_l, r_l) = growth(&l_uni);
    let (g_i, r_i) = growth(&i_uni);
    let fmt = |r: &[f64]| r.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ");
    v.report(
        8,
        g_l && g_i,
        &format!("uniform sweeps multiply elements by 8; state DoF ratios lshape [{}], inclusion [{}]", fmt(&r_l), fmt(&r_i)),
    );

    let secs = l_amr.seconds + l_uni.seconds + i_amr.seconds + i_uni.seconds;
    let passed = v.0.iter().filter(|&&b| b).count();
    println!("acceptance: {passed} of {} criteria passed ({secs:.0}s of benchmark runs)", v.0.len());
    if passed == v.0.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
