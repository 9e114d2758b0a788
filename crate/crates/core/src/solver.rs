//! IMEX time stepping for the regularized system.
//!
//! One step does, in order: upwind chemotactic transport of u and v with the
//! face gradient of the current w, explicit kinetics evaluated on the
//! transported values, then a backward-Euler diffusion solve per species.
//! The linear decay of w is split trapezoidally into the same solve:
//!
//! ```text
//! ((1 + dt/2) I - dt Δ_h) w' = (1 - dt/2) w + dt · source(u*, v*)
//! ```
//!
//! so the w mass changes by `dt · (∫source - (∫w + ∫w')/2)`.

use crate::error::{Error, Result};
use crate::grid::pow_nonneg;
use crate::grid::{gradient, interior_faces, Field, Grid};
use crate::linsolve::Helmholtz;
use crate::model::{reaction_u_raw, reaction_v_raw, sign_split, source_w_raw, ModelParams, State};

/// Values in `[-CLAMP_FLOOR, 0)` are roundoff and reset to zero.
pub const CLAMP_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub cfl_safety: f64,
    pub max_dt: f64,
    pub linear_solver_tol: f64,
    pub linear_solver_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl_safety: 0.5,
            max_dt: 1e-3,
            linear_solver_tol: 1e-12,
            linear_solver_max_iter: 10_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::arg(
                "cfl_safety",
                format!("must lie in (0, 1], got {}", self.cfl_safety),
            ));
        }
        if !(self.max_dt > 0.0 && self.max_dt.is_finite()) {
            return Err(Error::arg("max_dt", "must be positive"));
        }
        if !(self.linear_solver_tol > 0.0) {
            return Err(Error::arg("linear_solver_tol", "must be positive"));
        }
        if self.linear_solver_max_iter == 0 {
            return Err(Error::arg("linear_solver_max_iter", "must be positive"));
        }
        Ok(())
    }
}

/// Reaction Lipschitz bound `1 + θ max(u)^{θ-1} + max(u) + 2 max(v)`.
pub fn reaction_lipschitz(state: &State, theta: f64) -> f64 {
    let mu = state.u.max().max(0.0);
    let mv = state.v.max().max(0.0);
    1.0 + theta * pow_nonneg(mu, theta - 1.0) + mu + 2.0 * mv
}

pub fn stable_dt(state: &State, params: &ModelParams, cfg: &SolverConfig) -> Result<f64> {
    cfg.validate()?;
    let g = state.grid();
    if g.is_empty() {
        return Err(Error::InvalidGrid("empty state".into()));
    }
    let drift = gradient(&state.w).max_abs();
    let transport = if drift > 0.0 {
        g.min_spacing() / (2.0 * g.dim() as f64 * drift)
    } else {
        f64::INFINITY
    };
    let reaction = 1.0 / reaction_lipschitz(state, params.theta());
    Ok(cfg.cfl_safety * transport.min(reaction).min(cfg.max_dt))
}

/// Integrals of the kinetics over one step, evaluated on the transported
/// values the kinetics actually saw, already multiplied by `dt`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepSums {
    pub reaction_u: f64,
    pub reaction_u_abs: f64,
    pub reaction_u_plus: f64,
    pub reaction_v: f64,
    pub reaction_v_abs: f64,
    pub reaction_v_plus: f64,
    pub u_theta: f64,
    pub v_sq: f64,
    pub source: f64,
    /// ∫∫|source - (u + v)|, the distance to the unregularized production.
    pub source_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub index: usize,
    pub dt: f64,
    pub sums: StepSums,
    pub iterations: [usize; 3],
    /// Smallest value seen before clamping.
    pub min_raw: f64,
    /// Pointwise maximum of the positive part of the u kinetics.
    pub reaction_u_plus_max: f64,
    /// Transported u and v that the kinetics were evaluated on.
    pub u_star: Vec<f64>,
    pub v_star: Vec<f64>,
}

fn upwind_transport(g: &Grid, c: &[f64], w: &[f64], dt: f64) -> Vec<f64> {
    let mut out = c.to_vec();
    for (a, lo, hi) in interior_faces(g) {
        let h = g.spacing()[a];
        let vel = (w[hi] - w[lo]) / h;
        let flux = if vel > 0.0 { c[lo] * vel } else { c[hi] * vel };
        let delta = dt / h * flux;
        out[lo] -= delta;
        out[hi] += delta;
    }
    out
}

fn clamp(field: &'static str, values: &mut [f64], step: usize, min_raw: &mut f64) -> Result<()> {
    for (index, x) in values.iter_mut().enumerate() {
        if *x < *min_raw {
            *min_raw = *x;
        }
        if *x < 0.0 {
            if *x < -CLAMP_FLOOR {
                return Err(Error::Positivity {
                    field,
                    value: *x,
                    index,
                    step,
                });
            }
            *x = 0.0;
        }
    }
    Ok(())
}

/// One IMEX step, returning the kinetic integrals alongside the new state.
pub fn step_with_info(
    state: &State,
    params: &ModelParams,
    cfg: &SolverConfig,
    dt: f64,
    index: usize,
) -> Result<(State, StepInfo)> {
    cfg.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::arg("dt", format!("must be positive, got {dt}")));
    }
    let g = *state.grid();
    let vol = g.cell_volume();
    let (theta, eps) = (params.theta(), params.eps());
    let w = state.w.values();
    let mut min_raw = f64::INFINITY;

    let mut u_star = upwind_transport(&g, state.u.values(), w, dt);
    let mut v_star = upwind_transport(&g, state.v.values(), w, dt);
    clamp("u", &mut u_star, index, &mut min_raw)?;
    clamp("v", &mut v_star, index, &mut min_raw)?;

    let n = g.len();
    let mut u_rhs = vec![0.0; n];
    let mut v_rhs = vec![0.0; n];
    let mut w_rhs = vec![0.0; n];
    let mut s = StepSums::default();
    let mut reaction_u_plus_max = 0.0f64;
    for i in 0..n {
        let (uu, vv) = (u_star[i], v_star[i]);
        let fu = reaction_u_raw(uu, vv, theta);
        let fv = reaction_v_raw(uu, vv);
        let src = source_w_raw(uu, vv, eps);
        u_rhs[i] = uu + dt * fu;
        v_rhs[i] = vv + dt * fv;
        w_rhs[i] = (1.0 - 0.5 * dt) * w[i] + dt * src;
        s.reaction_u += fu;
        s.reaction_u_abs += fu.abs();
        let fu_plus = sign_split(fu).0;
        reaction_u_plus_max = reaction_u_plus_max.max(fu_plus);
        s.reaction_u_plus += fu_plus;
        s.reaction_v += fv;
        s.reaction_v_abs += fv.abs();
        s.reaction_v_plus += sign_split(fv).0;
        s.u_theta += pow_nonneg(uu, theta);
        s.v_sq += vv * vv;
        s.source += src;
        s.source_gap += (uu + vv - src).abs();
    }
    let scale = dt * vol;
    for x in [
        &mut s.reaction_u,
        &mut s.reaction_u_abs,
        &mut s.reaction_u_plus,
        &mut s.reaction_v,
        &mut s.reaction_v_abs,
        &mut s.reaction_v_plus,
        &mut s.u_theta,
        &mut s.v_sq,
        &mut s.source,
        &mut s.source_gap,
    ] {
        *x *= scale;
    }
    clamp("u", &mut u_rhs, index, &mut min_raw)?;
    clamp("v", &mut v_rhs, index, &mut min_raw)?;
    clamp("w", &mut w_rhs, index, &mut min_raw)?;

    let (tol, iters) = (cfg.linear_solver_tol, cfg.linear_solver_max_iter);
    let species = Helmholtz::new(&g, 1.0, dt);
    let (mut u_new, iu) = species.solve(&u_rhs, tol, iters)?;
    let (mut v_new, iv) = species.solve(&v_rhs, tol, iters)?;
    let (mut w_new, iw) = Helmholtz::new(&g, 1.0 + 0.5 * dt, dt).solve(&w_rhs, tol, iters)?;
    clamp("u", &mut u_new, index, &mut min_raw)?;
    clamp("v", &mut v_new, index, &mut min_raw)?;
    clamp("w", &mut w_new, index, &mut min_raw)?;

    let next = State {
        u: Field::new(g, u_new)?,
        v: Field::new(g, v_new)?,
        w: Field::new(g, w_new)?,
        time: state.time + dt,
    };
    let info = StepInfo {
        index,
        dt,
        sums: s,
        iterations: [iu, iv, iw],
        min_raw,
        reaction_u_plus_max,
        u_star,
        v_star,
    };
    Ok((next, info))
}

pub fn step(state: &State, params: &ModelParams, cfg: &SolverConfig, dt: f64) -> Result<State> {
    step_with_info(state, params, cfg, dt, 0).map(|(s, _)| s)
}

/// Running space-time integrals. The kinetic ones use the transported values
/// of each step; the gradient ones use the state at the start of each step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulators {
    pub u_theta: f64,
    pub v_sq: f64,
    pub grad_w_sq: f64,
    pub grad_log_v_sq: f64,
    pub v_grad_w_sq: f64,
    pub reaction_u_abs: f64,
    pub reaction_v_abs: f64,
    pub reaction_u_plus: f64,
    pub reaction_v_plus: f64,
    pub reaction_u: f64,
    pub reaction_v: f64,
    pub source: f64,
    pub source_gap: f64,
}

impl Accumulators {
    pub const NAMES: [&'static str; 13] = [
        "u_theta",
        "v_sq",
        "grad_w_sq",
        "grad_log_v_sq",
        "v_grad_w_sq",
        "reaction_u_abs",
        "reaction_v_abs",
        "reaction_u_plus",
        "reaction_v_plus",
        "reaction_u",
        "reaction_v",
        "source",
        "source_gap",
    ];

    pub fn values(&self) -> [f64; 13] {
        [
            self.u_theta,
            self.v_sq,
            self.grad_w_sq,
            self.grad_log_v_sq,
            self.v_grad_w_sq,
            self.reaction_u_abs,
            self.reaction_v_abs,
            self.reaction_u_plus,
            self.reaction_v_plus,
            self.reaction_u,
            self.reaction_v,
            self.source,
            self.source_gap,
        ]
    }

    fn add_step(&mut self, state: &State, s: &StepSums, dt: f64) {
        let d = dissipation_integrands(state);
        self.grad_w_sq += dt * d[0];
        self.grad_log_v_sq += dt * d[1];
        self.v_grad_w_sq += dt * d[2];
        self.u_theta += s.u_theta;
        self.v_sq += s.v_sq;
        self.reaction_u_abs += s.reaction_u_abs;
        self.reaction_v_abs += s.reaction_v_abs;
        self.reaction_u_plus += s.reaction_u_plus;
        self.reaction_v_plus += s.reaction_v_plus;
        self.reaction_u += s.reaction_u;
        self.reaction_v += s.reaction_v;
        self.source += s.source;
        self.source_gap += s.source_gap;
    }
}

/// `[∫|∇w|², ∫|∇ln(1+v)|², ∫ v²/(1+v)² |∇w|²]` by face quadrature.
pub fn dissipation_integrands(state: &State) -> [f64; 3] {
    let g = state.grid();
    let (v, w) = (state.v.values(), state.w.values());
    let mut out = [0.0; 3];
    for (a, lo, hi) in interior_faces(g) {
        let h = g.spacing()[a];
        let dw = (w[hi] - w[lo]) / h;
        let dl = (v[hi].ln_1p() - v[lo].ln_1p()) / h;
        let ratio = 0.5 * (v[hi] / (1.0 + v[hi]) + v[lo] / (1.0 + v[lo]));
        out[0] += dw * dw;
        out[1] += dl * dl;
        out[2] += ratio * ratio * dw * dw;
    }
    let vol = g.cell_volume();
    out.map(|x| x * vol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub dt: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub mass_w: f64,
    pub u_theta_norm: f64,
    pub v_sq_norm: f64,
    pub grad_w_sq: f64,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Diagnostics {
    pub const HEADER: [&'static str; 14] = [
        "t",
        "dt",
        "mass_u",
        "mass_v",
        "mass_w",
        "u_theta",
        "v_l2_sq",
        "grad_w_l2_sq",
        "min_u",
        "min_v",
        "min_w",
        "max_u",
        "max_v",
        "max_w",
    ];

    pub fn of(state: &State, theta: f64, dt: f64) -> Self {
        let vol = state.grid().cell_volume();
        let fields = [&state.u, &state.v, &state.w];
        Diagnostics {
            t: state.time,
            dt,
            mass_u: state.u.sum_integral(),
            mass_v: state.v.sum_integral(),
            mass_w: state.w.sum_integral(),
            u_theta_norm: state.u.values().iter().map(|&x| pow_nonneg(x, theta)).sum::<f64>() * vol,
            v_sq_norm: state.v.values().iter().map(|x| x * x).sum::<f64>() * vol,
            grad_w_sq: dissipation_integrands(state)[0],
            min: fields.map(|f| f.min()),
            max: fields.map(|f| f.max()),
        }
    }

    pub fn row(&self) -> [f64; 14] {
        [
            self.t,
            self.dt,
            self.mass_u,
            self.mass_v,
            self.mass_w,
            self.u_theta_norm,
            self.v_sq_norm,
            self.grad_w_sq,
            self.min[0],
            self.min[1],
            self.min[2],
            self.max[0],
            self.max[1],
            self.max[2],
        ]
    }
}

/// Transported u values per step, kept for space-time subset probes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSamples {
    pub cell_volume: f64,
    pub cells: usize,
    /// Step length of each recorded slab.
    pub dts: Vec<f64>,
    /// Slab-major, `cells` values per slab.
    pub values: Vec<f32>,
}

impl SpaceTimeSamples {
    pub fn slab(&self, k: usize) -> &[f32] {
        &self.values[k * self.cells..(k + 1) * self.cells]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    pub t_end: f64,
    /// States at the requested output times, always including 0 and `t_end`.
    pub snapshots: Vec<State>,
    /// Accumulator values at each snapshot time.
    pub snapshot_accumulators: Vec<Accumulators>,
    pub accumulators: Accumulators,
    /// One row for the initial state and one per step.
    pub diagnostics: Vec<Diagnostics>,
    /// Smallest value met before clamping over the whole run.
    pub min_raw: f64,
    /// Pointwise maximum of the positive part of the u kinetics over the run.
    pub reaction_u_plus_max: f64,
    pub steps: usize,
    pub max_step: f64,
    pub spacetime: Option<SpaceTimeSamples>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn initial(&self) -> &State {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &State {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }

    pub fn grid(&self) -> &Grid {
        self.initial().grid()
    }
}

/// Sees every consecutive pair of states during a run.
pub trait StepObserver {
    fn start(&mut self, _initial: &State, _params: &ModelParams) -> Result<()> {
        Ok(())
    }

    fn observe(&mut self, before: &State, after: &State, info: &StepInfo) -> Result<()>;
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationOptions {
    pub output_times: Vec<f64>,
    pub record_spacetime: bool,
}

pub fn simulate(
    initial: State,
    params: &ModelParams,
    cfg: &SolverConfig,
    t_end: f64,
    output_times: &[f64],
) -> Result<Trajectory> {
    let opts = SimulationOptions {
        output_times: output_times.to_vec(),
        record_spacetime: false,
    };
    simulate_with(initial, params, cfg, t_end, &opts, &mut [])
}

fn output_schedule(t_end: f64, requested: &[f64]) -> Result<Vec<f64>> {
    let mut times = vec![0.0, t_end];
    for &t in requested {
        if !(t.is_finite() && (0.0..=t_end).contains(&t)) {
            return Err(Error::arg("output_times", format!("{t} outside [0, {t_end}]")));
        }
        times.push(t);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

fn check_accumulators(acc: &Accumulators, t: f64) -> Result<()> {
    for (name, v) in Accumulators::NAMES.iter().zip(acc.values()) {
        if !v.is_finite() {
            return Err(Error::NonFiniteAccumulator {
                name,
                time: t,
                dump: format!("{acc:?}"),
            });
        }
    }
    Ok(())
}

pub fn simulate_with(
    initial: State,
    params: &ModelParams,
    cfg: &SolverConfig,
    t_end: f64,
    opts: &SimulationOptions,
    observers: &mut [&mut dyn StepObserver],
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::arg("t_end", format!("must be >= 0, got {t_end}")));
    }
    let initial = State::new(initial.u, initial.v, initial.w, 0.0)?;
    let schedule = output_schedule(t_end, &opts.output_times)?;
    for o in observers.iter_mut() {
        o.start(&initial, params)?;
    }
    let g = *initial.grid();
    let mut acc = Accumulators::default();
    let mut traj = Trajectory {
        params: *params,
        t_end,
        snapshots: vec![initial.clone()],
        snapshot_accumulators: vec![acc],
        accumulators: acc,
        diagnostics: vec![Diagnostics::of(&initial, params.theta(), 0.0)],
        min_raw: initial.u.min().min(initial.v.min()).min(initial.w.min()),
        reaction_u_plus_max: 0.0,
        steps: 0,
        max_step: 0.0,
        spacetime: opts.record_spacetime.then(|| SpaceTimeSamples {
            cell_volume: g.cell_volume(),
            cells: g.len(),
            dts: Vec::new(),
            values: Vec::new(),
        }),
    };
    let mut state = initial;
    let mut next_out = 1;
    while next_out < schedule.len() {
        let target = schedule[next_out];
        let stable = stable_dt(&state, params, cfg)?;
        let remaining = target - state.time;
        // Absorb a remainder within roundoff of one step instead of leaving a sliver.
        let landed = remaining <= stable * (1.0 + 1e-6);
        let dt = if landed { remaining } else { stable };
        let (mut next, info) = step_with_info(&state, params, cfg, dt, traj.steps)?;
        if landed {
            next.time = target;
        }
        acc.add_step(&state, &info.sums, dt);
        check_accumulators(&acc, next.time)?;
        for o in observers.iter_mut() {
            o.observe(&state, &next, &info)?;
        }
        if let Some(st) = traj.spacetime.as_mut() {
            st.dts.push(dt);
            st.values.extend(info.u_star.iter().map(|&x| x as f32));
        }
        traj.min_raw = traj.min_raw.min(info.min_raw);
        traj.reaction_u_plus_max = traj.reaction_u_plus_max.max(info.reaction_u_plus_max);
        traj.steps += 1;
        traj.max_step = traj.max_step.max(dt);
        traj.diagnostics.push(Diagnostics::of(&next, params.theta(), dt));
        state = next;
        if landed {
            traj.snapshots.push(state.clone());
            traj.snapshot_accumulators.push(acc);
            next_out += 1;
        }
    }
    traj.accumulators = acc;
    Ok(traj)
}
