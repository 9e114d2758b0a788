//! A-priori bounds checked on computed trajectories.
//!
//! Closed-form bounds are compared directly. Bounds with implicit constants
//! are checked as stability across a decreasing ε ladder: the quantity may not
//! grow by more than a fixed band as ε shrinks.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{interior_faces, lp_norm, pow_nonneg};
use crate::identities::{z_value, TestWeights};
use crate::model::{admissible_w_p, m1_bound, m2_bound, ModelParams, State};
use crate::solver::{Accumulators, SpaceTimeSamples, Trajectory, CLAMP_FLOOR};

/// Relative tolerance for closed-form bounds.
pub const RELATIVE_TOL: f64 = 1e-3;
/// Allowed growth of an ε-uniform quantity between ladder levels.
pub const UNIFORMITY_BAND: f64 = 0.05;
/// Tolerance of the `|f| = 2f⁺ - f` reconstruction, relative to `max(1, ∫∫|f|)`.
pub const SIGN_SPLIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub name: String,
    pub case: String,
    pub value: f64,
    /// Closed-form or band bound; `None` for reference rows.
    pub bound: Option<f64>,
    /// `bound - value`, or 0 without a bound.
    pub slack: f64,
    pub tol: f64,
    pub pass: bool,
    pub note: String,
}

impl EstimateRecord {
    pub fn bounded(name: &str, case: &str, value: f64, bound: f64, tol: f64) -> Self {
        let slack = bound - value;
        EstimateRecord {
            name: name.to_string(),
            case: case.to_string(),
            value,
            bound: Some(bound),
            slack,
            tol,
            pass: slack >= -tol,
            note: String::new(),
        }
    }

    /// `value >= bound`; the slack is `value - bound`.
    pub fn lower_bounded(name: &str, case: &str, value: f64, bound: f64, tol: f64) -> Self {
        let mut r = Self::bounded(name, case, value, bound, tol);
        r.slack = value - bound;
        r.pass = r.slack >= -tol;
        r
    }

    pub fn reference(name: &str, case: &str, value: f64) -> Self {
        EstimateRecord {
            name: name.to_string(),
            case: case.to_string(),
            value,
            bound: None,
            slack: 0.0,
            tol: 0.0,
            pass: value.is_finite(),
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    fn failing(mut self) -> Self {
        self.pass = false;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateReport {
    pub records: Vec<EstimateRecord>,
}

impl EstimateReport {
    pub const HEADER: [&'static str; 8] = ["name", "case", "value", "bound", "slack", "tol", "pass", "note"];

    pub fn push(&mut self, r: EstimateRecord) {
        self.records.push(r);
    }

    pub fn extend(&mut self, other: EstimateReport) {
        self.records.extend(other.records);
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &EstimateRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a EstimateRecord> + 'a {
        self.records.iter().filter(move |r| r.name == name)
    }
}

fn relative(name: &str, value: f64, bound: f64) -> EstimateRecord {
    EstimateRecord::bounded(name, "", value, bound, RELATIVE_TOL * bound.abs())
}

/// Largest `∫u` and `∫v` over every step against `m1` and `m2`.
pub fn check_mass_bounds(
    traj: &Trajectory,
    params: &ModelParams,
    u0_l1: f64,
    v0_l1: f64,
    omega: f64,
) -> Result<EstimateReport> {
    let m1 = m1_bound(u0_l1, params.theta(), omega)?;
    let m2 = m2_bound(v0_l1, omega)?;
    let sup_u = traj.diagnostics.iter().map(|d| d.mass_u).fold(0.0, f64::max);
    let sup_v = traj.diagnostics.iter().map(|d| d.mass_v).fold(0.0, f64::max);
    Ok(EstimateReport {
        records: vec![relative("mass_u", sup_u, m1), relative("mass_v", sup_v, m2)],
    })
}

/// `∫∫u^θ <= m1 T + 1 + ‖u₀‖₁` and `∫∫v² <= m2 T + 1 + ‖v₀‖₁`.
pub fn check_spacetime_bounds(
    traj: &Trajectory,
    params: &ModelParams,
    u0_l1: f64,
    v0_l1: f64,
    omega: f64,
) -> Result<EstimateReport> {
    let m1 = m1_bound(u0_l1, params.theta(), omega)?;
    let m2 = m2_bound(v0_l1, omega)?;
    let t = traj.t_end;
    let acc = &traj.accumulators;
    Ok(EstimateReport {
        records: vec![
            relative("spacetime_u_theta", acc.u_theta, m1 * t + 1.0 + u0_l1),
            relative("spacetime_v_sq", acc.v_sq, m2 * t + 1.0 + v0_l1),
        ],
    })
}

/// `∫∫|f| <= 2|Ω|T + 1 + ‖u₀‖₁` for both kinetics, plus the reconstruction
/// `∫∫|f| = 2∫∫f⁺ - ∫∫f` from the accumulated sign split.
pub fn check_reaction_l1(traj: &Trajectory, u0_l1: f64, v0_l1: f64, omega: f64) -> Result<EstimateReport> {
    for (name, x) in [("u0_l1", u0_l1), ("v0_l1", v0_l1)] {
        if !(x >= 0.0) {
            return Err(Error::Negative { name, value: x });
        }
    }
    if !(omega > 0.0) {
        return Err(Error::arg("omega", "must be positive"));
    }
    let t = traj.t_end;
    let a = &traj.accumulators;
    let mut report = EstimateReport::default();
    report.push(relative(
        "reaction_l1_u",
        a.reaction_u_abs,
        2.0 * omega * t + 1.0 + u0_l1,
    ));
    report.push(relative(
        "reaction_l1_v",
        a.reaction_v_abs,
        2.0 * omega * t + 1.0 + v0_l1,
    ));
    for (name, abs, plus, f) in [
        ("sign_split_u", a.reaction_u_abs, a.reaction_u_plus, a.reaction_u),
        ("sign_split_v", a.reaction_v_abs, a.reaction_v_plus, a.reaction_v),
    ] {
        let gap = (abs - (2.0 * plus - f)).abs();
        report.push(EstimateRecord::bounded(
            name,
            "",
            gap,
            0.0,
            SIGN_SPLIT_TOL * abs.max(1.0),
        ));
    }
    // positive only where u^{θ-1} + v <= 1, which caps it at 1; checked rather than assumed
    report.push(EstimateRecord::bounded(
        "reaction_u_plus_sup",
        "",
        traj.reaction_u_plus_max,
        1.0,
        0.0,
    ));
    Ok(report)
}

/// `sup_t ‖w(t)‖_{L^p}` over snapshots, for `1 <= p <=` the admissible exponent.
pub fn w_lp_sup(traj: &Trajectory, p: f64) -> Result<f64> {
    let n = traj.grid().dim() as u32;
    let p_max = admissible_w_p(traj.params.theta(), n)?;
    if !(p >= 1.0 && p <= p_max) {
        return Err(Error::arg("p", format!("need 1 <= p <= {p_max}, got {p}")));
    }
    traj.snapshots
        .iter()
        .try_fold(0.0f64, |m, s| Ok(m.max(lp_norm(&s.w, p)?)))
}

/// Time integrals behind the weighted gradient bound, reconstructed from
/// snapshots by the trapezoid rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedGradients {
    pub weights: TestWeights,
    /// `∫∫|∇((u+1)^{-p/2} e^{-kw/2})|²`
    pub grad_root_z: f64,
    /// `∫∫(u+1)^{-p} e^{-kw} |∇w|²`
    pub weighted_grad_w: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Largest snapshot spacing used by the time quadrature.
    pub quadrature_step: f64,
}

fn weighted_integrands(state: &State, weights: &TestWeights) -> ([f64; 2], f64, f64) {
    let g = state.grid();
    let (p, k) = (weights.p(), weights.k());
    let (u, w) = (state.u.values(), state.w.values());
    let z: Vec<f64> = u.iter().zip(w).map(|(&a, &b)| z_value(a, b, p, k)).collect();
    let root: Vec<f64> = z.iter().map(|x| x.sqrt()).collect();
    let mut out = [0.0; 2];
    for (a, lo, hi) in interior_faces(g) {
        let h = g.spacing()[a];
        let dr = (root[hi] - root[lo]) / h;
        let dw = (w[hi] - w[lo]) / h;
        out[0] += dr * dr;
        out[1] += 0.5 * (z[lo] + z[hi]) * dw * dw;
    }
    let vol = g.cell_volume();
    let (lo, hi) = z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    (out.map(|x| x * vol), lo, hi)
}

impl WeightedGradients {
    pub fn of(traj: &Trajectory, weights: &TestWeights) -> Self {
        let mut acc = [0.0; 2];
        let mut step = 0.0f64;
        let (first, mut z_min, mut z_max) = weighted_integrands(traj.initial(), weights);
        let mut prev = (traj.initial().time, first);
        for s in &traj.snapshots[1..] {
            let (cur, lo, hi) = weighted_integrands(s, weights);
            let dt = s.time - prev.0;
            step = step.max(dt);
            for j in 0..2 {
                acc[j] += 0.5 * dt * (prev.1[j] + cur[j]);
            }
            z_min = z_min.min(lo);
            z_max = z_max.max(hi);
            prev = (s.time, cur);
        }
        WeightedGradients {
            weights: *weights,
            grad_root_z: acc[0],
            weighted_grad_w: acc[1],
            z_min,
            z_max,
            quadrature_step: step,
        }
    }
}

/// What the ε-ladder checks need from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSummary {
    pub eps: f64,
    pub t_end: f64,
    pub accumulators: Accumulators,
    /// `(p, sup_t ‖w‖_p)` when requested.
    pub w_lp: Option<(f64, f64)>,
    pub weighted: Option<WeightedGradients>,
}

impl EpsilonSummary {
    pub fn of(traj: &Trajectory, w_p: Option<f64>, weights: Option<&TestWeights>) -> Result<Self> {
        let w_lp = match w_p {
            Some(p) => Some((p, w_lp_sup(traj, p)?)),
            None => None,
        };
        Ok(EpsilonSummary {
            eps: traj.params.eps(),
            t_end: traj.t_end,
            accumulators: traj.accumulators,
            w_lp,
            weighted: weights.map(|w| WeightedGradients::of(traj, w)),
        })
    }
}

/// Sorted by decreasing ε; rejects fewer than two levels, repeated ε or
/// differing horizons.
fn ladder(family: &[EpsilonSummary]) -> Result<Vec<&EpsilonSummary>> {
    if family.len() < 2 {
        return Err(Error::arg(
            "family",
            format!("need at least two ε levels, got {}", family.len()),
        ));
    }
    let mut sorted: Vec<&EpsilonSummary> = family.iter().collect();
    sorted.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    for pair in sorted.windows(2) {
        if !(pair[1].eps < pair[0].eps) {
            return Err(Error::arg("family", format!("ε = {} appears twice", pair[0].eps)));
        }
        if pair[1].t_end != pair[0].t_end {
            return Err(Error::arg("family", "levels differ in T"));
        }
    }
    Ok(sorted)
}

/// Each level may exceed the running maximum of the coarser-ε levels by at
/// most the band.
fn running_max_band(report: &mut EstimateReport, name: &str, levels: &[(f64, f64)]) {
    let mut running = f64::NEG_INFINITY;
    for (n, &(eps, value)) in levels.iter().enumerate() {
        let case = format!("eps={eps}");
        if n == 0 {
            report.push(EstimateRecord::reference(name, &case, value));
        } else {
            let bound = (1.0 + UNIFORMITY_BAND) * running;
            let mut r = EstimateRecord::bounded(name, &case, value, bound, 0.0);
            if !value.is_finite() {
                r = r.failing();
            }
            report.push(r.with_note(format!("ratio to running max {:.6}", value / running)));
        }
        running = running.max(value);
    }
}

/// `∫∫|∇w|²`, `∫∫|∇ln(1+v)|²` and `∫∫(v/(1+v))²|∇w|²`, each over `(1+T)`,
/// may not grow by more than the band as ε decreases.
pub fn check_dissipation_bounds(family: &[EpsilonSummary]) -> Result<EstimateReport> {
    let sorted = ladder(family)?;
    let mut report = EstimateReport::default();
    let pick: [(&str, fn(&Accumulators) -> f64); 3] = [
        ("dissipation_grad_w", |a| a.grad_w_sq),
        ("dissipation_grad_log_v", |a| a.grad_log_v_sq),
        ("dissipation_v_grad_w", |a| a.v_grad_w_sq),
    ];
    for (name, f) in pick {
        let levels: Vec<(f64, f64)> = sorted
            .iter()
            .map(|s| (s.eps, f(&s.accumulators) / (1.0 + s.t_end)))
            .collect();
        running_max_band(&mut report, name, &levels);
    }
    Ok(report)
}

/// `sup_t ‖w‖_p` across the ladder must stay within the band of its smallest
/// value.
pub fn check_w_lp(family: &[EpsilonSummary]) -> Result<EstimateReport> {
    let sorted = ladder(family)?;
    let mut levels = Vec::with_capacity(sorted.len());
    let mut exponent = None;
    for s in &sorted {
        let (p, value) = s
            .w_lp
            .ok_or_else(|| Error::arg("family", format!("no w L^p value at ε = {}", s.eps)))?;
        if exponent.is_some_and(|q| q != p) {
            return Err(Error::arg("family", "levels use different L^p exponents"));
        }
        exponent = Some(p);
        levels.push((s.eps, value));
    }
    let floor = levels.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
    let p = exponent.expect("at least two levels");
    let mut report = EstimateReport::default();
    for (eps, value) in levels {
        report.push(
            EstimateRecord::bounded(
                "w_lp_sup",
                &format!("eps={eps}"),
                value,
                (1.0 + UNIFORMITY_BAND) * floor,
                0.0,
            )
            .with_note(format!("p={p}")),
        );
    }
    Ok(report)
}

/// Admissibility of `(p, k)`, positivity of the coercivity constant, ε-band
/// stability of both weighted integrals, and `z ∈ (0, 1]` at every snapshot.
pub fn check_lemma37_bounds(family: &[EpsilonSummary], p: f64, k: f64) -> Result<EstimateReport> {
    let weights = TestWeights::new(p, k)?;
    let sorted = ladder(family)?;
    let mut report = EstimateReport::default();
    let c = weights.constant();
    let mut r = EstimateRecord::bounded("weighted_gradient_constant", &format!("p={p} k={k}"), 0.0, c, 0.0);
    r.pass = c > 0.0;
    report.push(r);
    let mut data = Vec::with_capacity(sorted.len());
    for s in &sorted {
        let wg = s.weighted.filter(|wg| wg.weights == weights).ok_or_else(|| {
            Error::arg(
                "family",
                format!("no weighted integrals for p={p}, k={k} at ε = {}", s.eps),
            )
        })?;
        data.push((s.eps, s.t_end, wg));
    }
    let root: Vec<(f64, f64)> = data.iter().map(|(e, t, wg)| (*e, wg.grad_root_z / (1.0 + t))).collect();
    running_max_band(&mut report, "weighted_grad_root_z", &root);
    let grad: Vec<(f64, f64)> = data
        .iter()
        .map(|(e, t, wg)| (*e, wg.weighted_grad_w / (1.0 + t)))
        .collect();
    running_max_band(&mut report, "weighted_grad_w", &grad);
    for (eps, _, wg) in &data {
        let case = format!("eps={eps}");
        let mut lo =
            EstimateRecord::reference("z_min", &case, wg.z_min).with_note(format!("time step {}", wg.quadrature_step));
        lo.pass = wg.z_min > 0.0;
        report.push(lo);
        report.push(EstimateRecord::bounded("z_max", &case, wg.z_max, 1.0, 0.0));
    }
    Ok(report)
}

/// `δ = (η^θ / (m1 T + 1 + ‖u₀‖₁))^{1/(θ-1)}`.
pub fn uniform_integrability_delta(eta: f64, t_end: f64, theta: f64, m1: f64, u0_l1: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::arg("eta", format!("must be positive, got {eta}")));
    }
    if !(theta > 1.0 && theta.is_finite()) {
        return Err(Error::arg("theta", format!("must be > 1, got {theta}")));
    }
    for (name, x) in [("t_end", t_end), ("m1", m1), ("u0_l1", u0_l1)] {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Negative { name, value: x });
        }
    }
    let denom = m1 * t_end + 1.0 + u0_l1;
    Ok((eta.powf(theta) / denom).powf(1.0 / (theta - 1.0)))
}

/// Subset integrals of the recorded space-time samples for sets of measure
/// below `delta`: `trials` random sets (a random time window times a random
/// cell subset) and the superlevel set of largest admissible measure, which
/// maximizes the integral among unions of whole samples. Also records the
/// Hölder bound `(∫∫u^θ)^{1/θ} δ^{(θ-1)/θ}` from `u_theta_integral`.
pub fn probe_uniform_integrability(
    samples: &SpaceTimeSamples,
    theta: f64,
    u_theta_integral: f64,
    eta: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<EstimateReport> {
    if !(eta > 0.0) || !(delta > 0.0) {
        return Err(Error::arg("eta", "eta and delta must be positive"));
    }
    if !(theta > 1.0) {
        return Err(Error::arg("theta", format!("must be > 1, got {theta}")));
    }
    let case = format!("eta={eta} delta={delta}");
    let mut report = EstimateReport::default();
    let vol = samples.cell_volume;
    let slabs = samples.dts.len();
    let cells = samples.cells;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    for _ in 0..trials {
        if slabs == 0 || cells == 0 {
            break;
        }
        let target = rng.random_range(0.0..1.0) * delta;
        let start = rng.random_range(0..slabs);
        let len = rng.random_range(1..=slabs - start);
        let mut window: f64 = samples.dts[start..start + len].iter().sum();
        let mut end = start + len;
        while end > start + 1 && window * vol > target {
            end -= 1;
            window -= samples.dts[end];
        }
        let max_cells = ((target / (window * vol)).ceil() as usize).saturating_sub(1).min(cells);
        if max_cells == 0 {
            continue;
        }
        let count = rng.random_range(1..=max_cells);
        let picked = index::sample(&mut rng, cells, count);
        let mut integral = 0.0;
        for k in start..end {
            let slab = samples.slab(k);
            let s: f64 = picked.iter().map(|c| slab[c] as f64).sum();
            integral += samples.dts[k] * vol * s;
        }
        debug_assert!(count as f64 * window * vol < delta);
        worst = worst.max(integral);
        if !(integral < eta) {
            violations += 1;
        }
    }
    let mut r = EstimateRecord::bounded("ui_random_subsets", &case, worst, eta, 0.0)
        .with_note(format!("{trials} trials, seed {seed}, {violations} violations"));
    r.pass = violations == 0;
    report.push(r);

    let (greedy, measure) = superlevel_integral(samples, delta);
    let mut r = EstimateRecord::bounded("ui_superlevel_subset", &case, greedy, eta, 0.0)
        .with_note(format!("measure {measure:e}"));
    r.pass = greedy < eta && measure < delta;
    report.push(r);

    let holder = pow_nonneg(u_theta_integral, 1.0 / theta) * delta.powf((theta - 1.0) / theta);
    let mut r = EstimateRecord::bounded("ui_holder_bound", &case, holder, eta, 0.0);
    r.pass = holder < eta;
    report.push(r);
    Ok(report)
}

/// Integral and measure of `{u > τ}` for the smallest level τ whose superlevel
/// set has measure below `delta`.
fn superlevel_integral(samples: &SpaceTimeSamples, delta: f64) -> (f64, f64) {
    let vol = samples.cell_volume;
    let level = |tau: f32| {
        let mut integral = 0.0;
        let mut measure = 0.0;
        for (k, dt) in samples.dts.iter().enumerate() {
            let (mut s, mut n) = (0.0f64, 0usize);
            for &x in samples.slab(k) {
                if x > tau {
                    s += x as f64;
                    n += 1;
                }
            }
            integral += dt * vol * s;
            measure += dt * vol * n as f64;
        }
        (integral, measure)
    };
    let top = samples.values.iter().copied().fold(0.0f32, f32::max);
    let (mut lo, mut hi) = (0.0f32, top);
    let zero = level(0.0);
    if zero.1 < delta {
        return zero;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if level(mid).1 < delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    level(hi)
}

/// Everything closed-form for one run: mass, space-time and reaction bounds.
pub fn check_single_run(traj: &Trajectory, u0_l1: f64, v0_l1: f64) -> Result<EstimateReport> {
    let omega = traj.grid().measure();
    let mut report = check_mass_bounds(traj, &traj.params, u0_l1, v0_l1, omega)?;
    report.extend(check_spacetime_bounds(traj, &traj.params, u0_l1, v0_l1, omega)?);
    report.extend(check_reaction_l1(traj, u0_l1, v0_l1, omega)?);
    Ok(report)
}

/// Every-step bounds on `z = (u+1)^{-p} e^{-kw}` from the per-step extrema of
/// u and w: z is decreasing in both, so it lies in `[z(max), z(min)]`.
pub fn z_range_from_diagnostics(traj: &Trajectory, weights: &TestWeights) -> (f64, f64) {
    let (p, k) = (weights.p(), weights.k());
    traj.diagnostics
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (
                lo.min(z_value(d.max[0], d.max[2], p, k)),
                hi.max(z_value(d.min[0], d.min[2], p, k)),
            )
        })
}

/// Nonnegativity of every field at every step, the clamp floor, and the
/// every-step range of z for each weight pair.
pub fn check_positivity(traj: &Trajectory, weights: &[TestWeights]) -> EstimateReport {
    let mut report = EstimateReport::default();
    for (n, name) in ["min_u", "min_v", "min_w"].iter().enumerate() {
        let m = traj.diagnostics.iter().map(|d| d.min[n]).fold(f64::INFINITY, f64::min);
        report.push(EstimateRecord::lower_bounded(name, "", m, 0.0, 0.0));
    }
    report.push(EstimateRecord::lower_bounded(
        "min_before_clamp",
        "",
        traj.min_raw,
        -CLAMP_FLOOR,
        0.0,
    ));
    for w in weights {
        let case = format!("p={} k={}", w.p(), w.k());
        let (lo, hi) = z_range_from_diagnostics(traj, w);
        let mut r = EstimateRecord::lower_bounded("z_min", &case, lo, 0.0, 0.0);
        r.pass = lo > 0.0;
        report.push(r);
        report.push(EstimateRecord::bounded("z_max", &case, hi, 1.0, 0.0));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, Grid};
    use crate::solver::{simulate, simulate_with, SimulationOptions, SolverConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn constant_run(u: f64, v: f64, w: f64, theta: f64, eps: f64, t: f64) -> Trajectory {
        let g = Grid::rect(8, 8, 1.0, 1.0).unwrap();
        let s = State::new(Field::constant(g, u), Field::constant(g, v), Field::constant(g, w), 0.0).unwrap();
        let p = ModelParams::new(theta, eps, 2).unwrap();
        let cfg = SolverConfig {
            max_dt: 0.01,
            cfl_safety: 1.0,
            ..Default::default()
        };
        let times: Vec<f64> = (1..20).map(|i| i as f64 * t / 20.0).collect();
        simulate(s, &p, &cfg, t, &times).unwrap()
    }

    #[test]
    fn zero_data_passes_everything() {
        let traj = constant_run(0.0, 0.0, 0.0, 2.0, 0.25, 1.0);
        let rep = check_single_run(&traj, 0.0, 0.0).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        assert_eq!(rep.named("mass_u").next().unwrap().value, 0.0);
        assert_eq!(rep.named("spacetime_u_theta").next().unwrap().value, 0.0);
        assert_eq!(rep.named("reaction_l1_u").next().unwrap().value, 0.0);
    }

    #[test]
    fn constant_half_config() {
        let traj = constant_run(0.5, 0.5, 0.0, 2.0, 0.0, 2.0);
        let rep = check_single_run(&traj, 0.5, 0.5).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        let m = rep.named("mass_u").next().unwrap();
        assert_relative_eq!(m.value, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.bound.unwrap(), 1.5, epsilon = 1e-15);
        let st = rep.named("spacetime_u_theta").next().unwrap();
        assert_relative_eq!(st.value, 0.5, epsilon = 1e-9);
        assert_relative_eq!(st.bound.unwrap(), 4.5, epsilon = 1e-15);
    }

    #[test]
    fn large_initial_mass_decays_below_bound() {
        let traj = constant_run(5.0, 0.0, 0.0, 2.0, 0.25, 0.5);
        let rep = check_mass_bounds(&traj, &traj.params, 5.0, 0.0, 1.0).unwrap();
        let m = rep.named("mass_u").next().unwrap();
        assert_relative_eq!(m.bound.unwrap(), 6.0);
        assert!(m.pass);
        assert!(traj.last().u.sum_integral() < 5.0);
    }

    #[test]
    fn logistic_equilibrium_has_zero_reaction() {
        let traj = constant_run(1.0, 0.0, 0.0, 2.0, 0.25, 1.0);
        let rep = check_reaction_l1(&traj, 1.0, 0.0, 1.0).unwrap();
        assert!(rep.all_pass());
        assert!(rep.named("reaction_l1_u").next().unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn delta_examples() {
        assert_relative_eq!(uniform_integrability_delta(1.0, 1.0, 2.0, 2.0, 1.0).unwrap(), 0.25);
        let d = uniform_integrability_delta(0.5, 1.0, 1.5, 3.0, 0.5).unwrap();
        assert_relative_eq!(d, (0.5f64.powf(1.5) / 4.5).powi(2), max_relative = 1e-14);
        assert!((d - 0.006173).abs() < 1e-6);
        assert!(uniform_integrability_delta(0.0, 1.0, 2.0, 1.0, 0.0).is_err());
        assert!(uniform_integrability_delta(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn delta_is_monotone_in_eta(a in 1e-3f64..2.0, b in 1e-3f64..2.0, theta in 1.1f64..4.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let dl = uniform_integrability_delta(lo, 2.0, theta, 1.5, 0.8).unwrap();
            let dh = uniform_integrability_delta(hi, 2.0, theta, 1.5, 0.8).unwrap();
            prop_assert!(dl <= dh);
        }

        #[test]
        fn zero_data_bounds_are_monotone(t in 0.0f64..5.0, extra in 0.0f64..3.0, u0 in 0.0f64..3.0) {
            let traj = constant_run(0.0, 0.0, 0.0, 2.0, 0.25, 0.1);
            for (tt, m) in [(t, u0), (t + extra, u0 + extra)] {
                let mut tr = traj.clone();
                tr.t_end = tt;
                prop_assert!(check_single_run(&tr, m, m).unwrap().all_pass());
            }
        }
    }

    fn summary(eps: f64, grad: f64) -> EpsilonSummary {
        EpsilonSummary {
            eps,
            t_end: 1.0,
            accumulators: Accumulators {
                grad_w_sq: grad,
                ..Default::default()
            },
            w_lp: Some((2.0, 1.0 + grad)),
            weighted: None,
        }
    }

    #[test]
    fn dissipation_band() {
        let ok = [summary(0.5, 1.0), summary(0.25, 1.04), summary(0.125, 0.9)];
        assert!(check_dissipation_bounds(&ok).unwrap().all_pass());
        let bad = [summary(0.5, 1.0), summary(0.25, 1.2)];
        assert!(!check_dissipation_bounds(&bad).unwrap().all_pass());
        assert!(check_dissipation_bounds(&ok[..1]).is_err());
        assert!(check_dissipation_bounds(&[summary(0.5, 1.0), summary(0.5, 1.0)]).is_err());
        let zero = [summary(0.5, 0.0), summary(0.25, 0.0)];
        assert!(check_dissipation_bounds(&zero).unwrap().all_pass());
    }

    #[test]
    fn w_lp_band() {
        let ok = [summary(0.5, 0.0), summary(0.25, 0.04)];
        assert!(check_w_lp(&ok).unwrap().all_pass());
        let bad = [summary(0.5, 0.0), summary(0.25, 0.1)];
        assert!(!check_w_lp(&bad).unwrap().all_pass());
    }

    #[test]
    fn constant_config_w_lp_follows_ode() {
        // w → 1/(1+ε) from w₀ = 0.1 with u = v = 1/2 (steady kinetics for v only
        // when u = 0, so take u = 0, v = 1)
        let traj = constant_run(0.0, 1.0, 0.1, 2.0, 0.5, 1.0);
        let sup = w_lp_sup(&traj, 2.0).unwrap();
        let exact = (0.1 * (-1.0f64).exp() + (1.0 - (-1.0f64).exp()) / 1.5).max(0.1);
        assert!((sup - exact).abs() < 1e-4, "{sup} {exact}");
        assert!(w_lp_sup(&traj, 0.5).is_err());
    }

    #[test]
    fn lemma37_admissibility() {
        assert_relative_eq!(TestWeights::new(1.0, 2.0).unwrap().constant(), 1.5);
        let fam = [summary(0.5, 0.0), summary(0.25, 0.0)];
        assert!(matches!(
            check_lemma37_bounds(&fam, 1.0, 1.0),
            Err(Error::WeightsBelowThreshold { threshold, .. }) if threshold == 1.0
        ));
        assert!(check_lemma37_bounds(&fam, 1.0, 2.0).is_err());
    }

    #[test]
    fn lemma37_zero_data() {
        let w = TestWeights::new(1.0, 2.0).unwrap();
        let fam: Vec<EpsilonSummary> = [0.5, 0.25]
            .iter()
            .map(|&e| EpsilonSummary::of(&constant_run(0.0, 0.0, 0.0, 2.0, e, 1.0), None, Some(&w)).unwrap())
            .collect();
        let rep = check_lemma37_bounds(&fam, 1.0, 2.0).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        for r in rep.named("weighted_grad_w") {
            assert_eq!(r.value, 0.0);
        }
        assert_eq!(rep.named("z_max").next().unwrap().value, 1.0);
    }

    #[test]
    fn probes_on_recorded_run() {
        let g = Grid::rect(10, 10, 1.0, 1.0).unwrap();
        let u = Field::from_fn(g, |x| {
            2.0 * (-((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) * 20.0).exp()
        })
        .unwrap();
        let s = State::new(u, Field::constant(g, 0.2), Field::constant(g, 0.1), 0.0).unwrap();
        let p = ModelParams::new(2.0, 0.25, 2).unwrap();
        let opts = SimulationOptions {
            record_spacetime: true,
            ..Default::default()
        };
        let traj = simulate_with(s, &p, &SolverConfig::default(), 0.5, &opts, &mut []).unwrap();
        let st = traj.spacetime.as_ref().unwrap();
        let u0 = traj.initial().u.sum_integral();
        let m1 = m1_bound(u0, 2.0, 1.0).unwrap();
        let delta = uniform_integrability_delta(0.25, 0.5, 2.0, m1, u0).unwrap();
        let rep = probe_uniform_integrability(st, 2.0, traj.accumulators.u_theta, 0.25, delta, 50, 3).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        let again = probe_uniform_integrability(st, 2.0, traj.accumulators.u_theta, 0.25, delta, 50, 3).unwrap();
        assert_eq!(rep, again);
        // the superlevel set dominates every random set
        let r = rep.named("ui_random_subsets").next().unwrap().value;
        let s = rep.named("ui_superlevel_subset").next().unwrap().value;
        assert!(s >= r);
    }

    #[test]
    fn probe_of_zero_field() {
        let st = SpaceTimeSamples {
            cell_volume: 0.01,
            cells: 100,
            dts: vec![0.1; 5],
            values: vec![0.0; 500],
        };
        let rep = probe_uniform_integrability(&st, 2.0, 0.0, 0.5, 0.01, 20, 1).unwrap();
        assert!(rep.all_pass());
        assert!(rep.records.iter().all(|r| r.value == 0.0));
    }

    #[test]
    fn z_range_is_in_unit_interval() {
        let traj = constant_run(0.5, 0.5, 0.3, 2.0, 0.25, 0.5);
        let (lo, hi) = z_range_from_diagnostics(&traj, &TestWeights::new(1.0, 2.0).unwrap());
        assert!(lo > 0.0 && hi <= 1.0);
        let rep = check_positivity(&traj, &[TestWeights::new(1.0, 2.0).unwrap()]);
        assert!(rep.all_pass(), "{rep:?}");
    }
}
