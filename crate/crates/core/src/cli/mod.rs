//! Run orchestration behind the `chemotaxis` binary.
//!
//! Every runner writes its artifacts under the configured output directory
//! and returns an [`Outcome`] whose `passed` flag decides the exit status.
//! Failed checks never abort the remaining ones.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{fmt_real, RunConfig, SweepConfig, CANONICAL};

use crate::error::{Error, Result};
use crate::estimates::{
    check_dissipation_bounds, check_lemma37_bounds, check_positivity, check_single_run, check_w_lp,
    probe_uniform_integrability, uniform_integrability_delta, w_lp_sup, EpsilonSummary, EstimateRecord, EstimateReport,
};
use crate::grid::{Field, Grid};
use crate::identities::{
    calibrate, certify_mass_superinequality, check_lemma35, fit_order, sample_test_functions, weight_threshold,
    CertificateReport, LevelResult, Relation, TestFunction, TestWeights, WeakFormCertifier, ABSOLUTE_FLOOR,
};
use crate::model::{m1_bound, regularize_initial, InitialFields};
use crate::solver::{simulate_with, SimulationOptions, SolverConfig, Trajectory};

/// Smallest acceptable empirical convergence order.
pub const MIN_ORDER: f64 = 0.9;
/// Differences below this are roundoff; orders fitted on them are saturated.
pub const SOLUTION_FLOOR: f64 = 1e-12;
/// Tolerance of the regularization solve.
const REGULARIZE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Worker pool capped by `CHEMO_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("CHEMO_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                return Err(Error::config(
                    "CHEMO_THREADS",
                    format!("expected a positive integer, got `{s}`"),
                ))
            }
        },
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("CHEMO_THREADS", e.to_string()))
}

/// Sampled initial data on `grid`, regularized at `eps` when configured.
pub fn initial_fields(cfg: &RunConfig, grid: Grid, eps: f64) -> Result<InitialFields> {
    let base = InitialFields::new(
        cfg.init.u.sample(grid)?,
        cfg.init.v.sample(grid)?,
        cfg.init.w.sample(grid)?,
    )?;
    if cfg.init.regularize {
        regularize_initial(&base, eps, REGULARIZE_TOL)
    } else {
        Ok(base)
    }
}

/// Output times plus a uniform cadence for post-hoc quadrature.
pub fn snapshot_times(cfg: &RunConfig) -> Vec<f64> {
    let mut times = cfg.output_times.clone();
    let q = cfg.quadrature_every;
    let mut k = 1usize;
    loop {
        let t = k as f64 * q;
        if t >= cfg.t_end * (1.0 - 1e-9) {
            break;
        }
        if times.iter().all(|s| (s - t).abs() > 1e-9 * cfg.t_end.max(1.0)) {
            times.push(t);
        }
        k += 1;
    }
    times
}

fn is_output_time(cfg: &RunConfig, t: f64) -> bool {
    t == 0.0 || t == cfg.t_end || cfg.output_times.contains(&t)
}

/// `simulate`: one run with diagnostics, field dumps and the single-run
/// estimates.
pub fn run_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let init = initial_fields(cfg, cfg.grid, cfg.params.eps())?;
    let (u0, v0) = (init.u0_l1(), init.v0_l1());
    let opts = SimulationOptions {
        output_times: snapshot_times(cfg),
        record_spacetime: cfg.probe,
    };
    let traj = simulate_with(init.into_state(), &cfg.params, &cfg.solver, cfg.t_end, &opts, &mut [])?;
    let dir = &cfg.out_dir;
    let mut out = Outcome::default();
    out.files.push(output::write_manifest(dir, "simulate", cfg)?);
    out.files.push(output::write_diagnostics(dir, &traj)?);
    for s in traj.snapshots.iter().filter(|s| is_output_time(cfg, s.time)) {
        out.files.push(output::write_fields(dir, s)?);
    }

    let mut report = EstimateReport::default();
    if cfg.estimates {
        report.extend(check_single_run(&traj, u0, v0)?);
        report.extend(check_positivity(&traj, &cfg.weights));
        if let Some(p) = cfg.w_lp_p {
            report.push(EstimateRecord::reference(
                "w_lp_sup",
                &format!("p={p}"),
                w_lp_sup(&traj, p)?,
            ));
        }
    }
    if cfg.probe {
        report.extend(probe_report(&traj, u0, cfg)?);
    }
    out.files.push(output::write_estimates(dir, &report)?);
    out.passed = report.all_pass();
    out.messages.push(format!(
        "{} steps to t = {}, {} estimate rows, {} failing",
        traj.steps,
        cfg.t_end,
        report.records.len(),
        report.failures().count()
    ));
    Ok(out)
}

/// Uniform-integrability probes at every configured η.
pub fn probe_report(traj: &Trajectory, u0_l1: f64, cfg: &RunConfig) -> Result<EstimateReport> {
    let theta = cfg.params.theta();
    let m1 = m1_bound(u0_l1, theta, cfg.grid.measure())?;
    let samples = traj
        .spacetime
        .as_ref()
        .ok_or_else(|| Error::arg("trajectory", "space-time samples were not recorded"))?;
    let mut report = EstimateReport::default();
    for &eta in &cfg.probe_eta {
        let delta = uniform_integrability_delta(eta, cfg.t_end, theta, m1, u0_l1)?;
        report.extend(probe_uniform_integrability(
            samples,
            theta,
            traj.accumulators.u_theta,
            eta,
            delta,
            cfg.probe_trials,
            cfg.seed,
        )?);
    }
    Ok(report)
}

/// `∫₀ᵀ ‖a - b‖_{L¹}` for u, v, w by the trapezoid rule over shared snapshots.
pub fn spacetime_l1_gap(a: &Trajectory, b: &Trajectory) -> Result<[f64; 3]> {
    if a.times() != b.times() {
        return Err(Error::arg("trajectories", "snapshot times differ"));
    }
    let vol = a.grid().cell_volume();
    let dist = |x: &Field, y: &Field| {
        x.values()
            .iter()
            .zip(y.values())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
            * vol
    };
    let mut total = [0.0; 3];
    let mut prev: Option<(f64, [f64; 3])> = None;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let d = [dist(&sa.u, &sb.u), dist(&sa.v, &sb.v), dist(&sa.w, &sb.w)];
        if let Some((t, p)) = prev {
            for q in 0..3 {
                total[q] += 0.5 * (sa.time - t) * (p[q] + d[q]);
            }
        }
        prev = Some((sa.time, d));
    }
    Ok(total)
}

pub struct SweepLevel {
    pub eps: f64,
    pub traj: Trajectory,
    pub summary: EpsilonSummary,
}

/// Every level of an ε sweep with the consecutive gaps and the checks.
/// A failed level leaves its neighbouring gaps empty and skips the checks.
pub struct SweepRun {
    pub eps: Vec<f64>,
    pub levels: Vec<Result<SweepLevel>>,
    /// Gap `j` is between levels `j` and `j + 1`.
    pub gaps: Vec<Option<[f64; 3]>>,
    pub report: EstimateReport,
}

impl SweepRun {
    pub fn complete(&self) -> bool {
        self.levels.iter().all(|l| l.is_ok())
    }

    pub fn passed(&self) -> bool {
        self.complete() && self.report.all_pass()
    }
}

/// The ε ladder on a shared grid with the regularized family.
pub fn sweep_levels(sweep: &SweepConfig) -> Result<SweepRun> {
    let cfg = &sweep.template;
    let pool = thread_pool()?;
    let times = snapshot_times(cfg);
    let weights = cfg.weights.first().copied();
    let levels: Vec<Result<SweepLevel>> = pool.install(|| {
        sweep
            .eps
            .par_iter()
            .map(|&eps| {
                let params = cfg.params.with_eps(eps)?;
                let init = initial_fields(cfg, cfg.grid, eps)?;
                let opts = SimulationOptions {
                    output_times: times.clone(),
                    record_spacetime: false,
                };
                let traj = simulate_with(init.into_state(), &params, &cfg.solver, cfg.t_end, &opts, &mut [])?;
                let summary = EpsilonSummary::of(&traj, cfg.w_lp_p, weights.as_ref())?;
                Ok(SweepLevel { eps, traj, summary })
            })
            .collect()
    });

    let mut gaps: Vec<Option<[f64; 3]>> = Vec::with_capacity(levels.len());
    for j in 0..levels.len() {
        gaps.push(match (levels.get(j), levels.get(j + 1)) {
            (Some(Ok(a)), Some(Ok(b))) => Some(spacetime_l1_gap(&a.traj, &b.traj)?),
            _ => None,
        });
    }

    let mut report = EstimateReport::default();
    if levels.iter().all(|l| l.is_ok()) {
        let summaries: Vec<EpsilonSummary> = levels.iter().flatten().map(|l| l.summary.clone()).collect();
        let found: Vec<[f64; 3]> = gaps.iter().flatten().copied().collect();
        report.extend(gap_report(&sweep.eps, &found));
        report.extend(check_dissipation_bounds(&summaries)?);
        if cfg.w_lp_p.is_some() {
            report.extend(check_w_lp(&summaries)?);
        }
        if let Some(wt) = weights {
            report.extend(check_lemma37_bounds(&summaries, wt.p(), wt.k())?);
        }
    }
    Ok(SweepRun {
        eps: sweep.eps.clone(),
        levels,
        gaps,
        report,
    })
}

/// `sweep`: [`sweep_levels`] with `sweep.csv` and `estimates.csv`.
pub fn run_sweep(sweep: &SweepConfig) -> Result<Outcome> {
    let run = sweep_levels(sweep)?;
    let cfg = &sweep.template;
    let mut out = Outcome::default();
    let dir = &cfg.out_dir;
    out.files.push(output::write_manifest(dir, "sweep", cfg)?);
    for (eps, l) in run.eps.iter().zip(&run.levels) {
        if let Err(e) = l {
            out.messages.push(format!("eps = {eps} failed: {e}"));
        }
    }

    let (mut w, path) = output::writer(dir, "sweep.csv")?;
    w.write_record([
        "eps",
        "gap_u",
        "gap_v",
        "gap_w",
        "grad_w_sq",
        "grad_log_v_sq",
        "v_grad_w_sq",
        "w_lp_sup",
        "weighted_grad_root_z",
        "weighted_grad_w",
    ])?;
    for (l, gap) in run.levels.iter().zip(&run.gaps) {
        let Ok(l) = l else { continue };
        let a = &l.summary.accumulators;
        let mut row = vec![fmt_real(l.eps)];
        row.extend((0..3).map(|q| gap.map(|g| fmt_real(g[q])).unwrap_or_default()));
        row.extend([a.grad_w_sq, a.grad_log_v_sq, a.v_grad_w_sq].map(fmt_real));
        row.push(l.summary.w_lp.map(|(_, x)| fmt_real(x)).unwrap_or_default());
        row.push(l.summary.weighted.map(|g| fmt_real(g.grad_root_z)).unwrap_or_default());
        row.push(
            l.summary
                .weighted
                .map(|g| fmt_real(g.weighted_grad_w))
                .unwrap_or_default(),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    out.files.push(path);
    out.files.push(output::write_estimates(dir, &run.report)?);
    out.passed = run.passed();
    out.messages.push(format!(
        "{} of {} levels finished, {} failing checks",
        run.levels.iter().filter(|l| l.is_ok()).count(),
        run.levels.len(),
        run.report.failures().count()
    ));
    Ok(out)
}

/// Consecutive gaps must not increase, and the last must be under a tenth of
/// the first.
pub fn gap_report(eps: &[f64], gaps: &[[f64; 3]]) -> EstimateReport {
    let mut report = EstimateReport::default();
    for (q, name) in ["u", "v", "w"].iter().enumerate() {
        for j in 1..gaps.len() {
            let case = format!("eps={}->{}", eps[j], eps[j + 1]);
            report.push(EstimateRecord::bounded(
                &format!("gap_{name}_nonincreasing"),
                &case,
                gaps[j][q],
                gaps[j - 1][q],
                0.0,
            ));
        }
        if let (Some(first), Some(last)) = (gaps.first(), gaps.last()) {
            let ratio = if first[q] > 0.0 { last[q] / first[q] } else { 0.0 };
            let mut r = EstimateRecord::bounded(&format!("gap_{name}_final_ratio"), "", ratio, 0.1, 0.0);
            r.pass = ratio < 0.1;
            report.push(r);
        }
    }
    report
}

/// Grids and solver settings from coarsest to the configured (finest) level:
/// each refinement halves h and quarters the step cap.
pub fn ladder(cfg: &RunConfig, levels: usize) -> Result<Vec<(Grid, SolverConfig)>> {
    if levels < 2 {
        return Err(Error::config("levels", format!("need at least 2, got {levels}")));
    }
    let factor = 1usize << (levels - 1);
    let mut out = Vec::with_capacity(levels);
    for i in 0..levels {
        let coarsen = 1usize << (levels - 1 - i);
        if cfg.grid.cells().iter().any(|c| c % factor != 0) {
            return Err(Error::config(
                "grid.cells",
                format!(
                    "{:?} is not divisible by {factor} for {levels} levels",
                    cfg.grid.cells()
                ),
            ));
        }
        let cells: Vec<usize> = cfg.grid.cells().iter().map(|c| c / coarsen).collect();
        let grid = Grid::new(&cells, cfg.grid.lengths())?;
        let solver = SolverConfig {
            max_dt: cfg.solver.max_dt * (coarsen * coarsen) as f64,
            ..cfg.solver
        };
        out.push((grid, solver));
    }
    Ok(out)
}

pub struct LadderRun {
    pub traj: Trajectory,
    pub level: LevelResult,
}

/// Runs every rung of [`ladder`] with the weak-form certifier attached, using
/// bumps sampled on the coarsest grid.
pub fn run_ladder(cfg: &RunConfig, levels: usize, output_times: &[f64]) -> Result<(Vec<TestFunction>, Vec<LadderRun>)> {
    let rungs = ladder(cfg, levels)?;
    let bumps = sample_test_functions(&rungs[0].0, cfg.t_end, cfg.test_functions, cfg.seed)?;
    let pool = thread_pool()?;
    let runs: Vec<Result<LadderRun>> = pool.install(|| {
        rungs
            .par_iter()
            .map(|(grid, solver)| {
                let init = initial_fields(cfg, *grid, cfg.params.eps())?;
                let mut cert = WeakFormCertifier::new(bumps.clone(), cfg.weights.clone());
                let opts = SimulationOptions {
                    output_times: output_times.to_vec(),
                    record_spacetime: false,
                };
                let traj = simulate_with(
                    init.into_state(),
                    &cfg.params,
                    solver,
                    cfg.t_end,
                    &opts,
                    &mut [&mut cert],
                )?;
                let mut values = cert.values();
                values.extend(certify_mass_superinequality(&traj));
                let level = LevelResult {
                    h: grid.max_spacing(),
                    dt: traj.max_step,
                    values,
                };
                Ok(LadderRun { traj, level })
            })
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((bumps, runs))
}

/// Calibrated certificate report over `cfg.levels` rungs.
pub fn certify_levels(cfg: &RunConfig) -> Result<(Vec<TestFunction>, Vec<LevelResult>, CertificateReport)> {
    let (bumps, runs) = run_ladder(cfg, cfg.levels, &[])?;
    let levels: Vec<LevelResult> = runs.into_iter().map(|r| r.level).collect();
    let (report, _) = calibrate(&levels, MIN_ORDER)?;
    Ok((bumps, levels, report))
}

/// `certify`: weak-form certificates on the configured run, with tolerances
/// calibrated on coarser levels of the same ladder.
pub fn run_certify(cfg: &RunConfig) -> Result<Outcome> {
    let (bumps, levels, report) = certify_levels(cfg)?;
    let dir = &cfg.out_dir;
    let mut out = Outcome::default();
    out.files.push(output::write_manifest(dir, "certify", cfg)?);
    out.files
        .push(output::write_certificates(dir, "certificates.csv", &report)?);
    out.passed = report.all_pass();
    out.messages.push(format!(
        "{} test functions, {} levels, {} certificate rows, {} failing",
        bumps.len(),
        levels.len(),
        report.records.len(),
        report.failures().count()
    ));
    Ok(out)
}

/// The `(p, k)` lattice of the identity suite.
pub fn identity_lattice() -> Vec<TestWeights> {
    let mut out = Vec::new();
    for p in [0.5, 1.0, 2.0, 4.0] {
        for m in [1.1, 2.0, 10.0] {
            out.push(TestWeights::new(p, weight_threshold(p) * m).expect("above threshold"));
        }
    }
    out
}

pub const IDENTITY_TOL: f64 = 1e-10;

/// `verify-identities`: the coefficient identities over `weights`, written to
/// `identities.csv` when `out` is given.
pub fn run_verify_identities(
    weights: &[TestWeights],
    samples: usize,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<Outcome> {
    let mut report = CertificateReport::default();
    for w in weights {
        report.extend(check_lemma35(w, samples, IDENTITY_TOL, seed)?);
    }
    let mut out = Outcome {
        passed: report.all_pass(),
        ..Default::default()
    };
    if let Some(dir) = out_dir {
        out.files
            .push(output::write_certificates(dir, "identities.csv", &report)?);
    }
    out.messages.push(format!(
        "{} weight pairs x {samples} points, {} failing",
        weights.len(),
        report.failures().count()
    ));
    Ok(out)
}

/// `refine`: the ladder ending at the configured level, with snapshot L¹
/// differences between neighbours and certificate defects per level.
pub fn run_refine(cfg: &RunConfig, levels: usize) -> Result<Outcome> {
    let (_, runs) = run_ladder(cfg, levels, &cfg.output_times)?;
    let dir = &cfg.out_dir;
    let mut out = Outcome::default();
    out.files.push(output::write_manifest(dir, "refine", cfg)?);
    let (mut w, path) = output::writer(dir, "refine.csv")?;
    w.write_record(["level", "cells", "h", "dt", "quantity", "value", "note"])?;

    let mut passed = true;
    let mut diffs = vec![[0.0f64; 3]; runs.len() - 1];
    for (i, pair) in runs.windows(2).enumerate() {
        let (coarse, fine) = (&pair[0].traj, &pair[1].traj);
        for (sc, sf) in coarse.snapshots.iter().zip(&fine.snapshots) {
            if sc.time != sf.time {
                return Err(Error::arg("refine", "levels produced different snapshot times"));
            }
            let g = sc.grid();
            for (q, (c, f)) in [(&sc.u, &sf.u), (&sc.v, &sf.v), (&sc.w, &sf.w)].into_iter().enumerate() {
                let r = f.restrict_to(g)?;
                let d: f64 = c
                    .values()
                    .iter()
                    .zip(r.values())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    * g.cell_volume();
                diffs[i][q] = diffs[i][q].max(d);
            }
        }
    }
    let cells = |r: &LadderRun| {
        r.traj
            .grid()
            .cells()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("x")
    };
    // (name, checked) in first-seen order; reference rows are not checked
    let mut names: Vec<(String, bool)> = Vec::new();
    for v in runs.last().map(|r| r.level.values.as_slice()).unwrap_or_default() {
        if !names.iter().any(|(n, _)| *n == v.name) {
            names.push((v.name.clone(), v.relation != Relation::Info));
        }
    }
    let defect = |r: &LadderRun, name: &str| {
        r.level
            .values
            .iter()
            .filter(|v| v.name == name)
            .map(|v| v.defect())
            .fold(0.0, f64::max)
    };
    for (i, r) in runs.iter().enumerate() {
        let head = [i.to_string(), cells(r), fmt_real(r.level.h), fmt_real(r.level.dt)];
        if i + 1 < runs.len() {
            for (q, f) in ["u", "v", "w"].iter().enumerate() {
                let mut row = head.to_vec();
                row.extend([
                    format!("l1_diff_{f}"),
                    fmt_real(diffs[i][q]),
                    "sup over snapshots vs next level".into(),
                ]);
                w.write_record(&row)?;
            }
        }
        for (name, _) in &names {
            let mut row = head.to_vec();
            row.extend([format!("defect_{name}"), fmt_real(defect(r, name)), String::new()]);
            w.write_record(&row)?;
        }
    }
    let hs: Vec<f64> = runs.iter().map(|r| r.level.h).collect();
    let fit_row =
        |w: &mut csv::Writer<std::fs::File>, q: String, hs: &[f64], errs: &[f64], floor: f64, checked: bool| {
            let fit = fit_order(hs, errs, floor);
            let ok = fit.meets(MIN_ORDER);
            let note = format!(
                "{}{}",
                if fit.saturated {
                    "saturated"
                } else if ok {
                    "meets"
                } else {
                    "below"
                },
                if checked { "" } else { "; reference" }
            );
            w.write_record([
                "fit".into(),
                String::new(),
                String::new(),
                String::new(),
                q,
                fmt_real(fit.slope),
                note,
            ])
            .map(|_| ok || !checked)
        };
    for (q, f) in ["u", "v", "w"].iter().enumerate() {
        let errs: Vec<f64> = diffs.iter().map(|d| d[q]).collect();
        passed &= fit_row(
            &mut w,
            format!("order_{f}"),
            &hs[..hs.len() - 1],
            &errs,
            SOLUTION_FLOOR,
            true,
        )?;
    }
    for (name, checked) in &names {
        let errs: Vec<f64> = runs.iter().map(|r| defect(r, name)).collect();
        passed &= fit_row(&mut w, format!("order_{name}"), &hs, &errs, ABSOLUTE_FLOOR, *checked)?;
    }
    w.flush()?;
    out.files.push(path);
    out.passed = passed;
    out.messages.push(format!(
        "{} levels, orders {}",
        runs.len(),
        if passed { "met" } else { "not met" }
    ));
    Ok(out)
}
