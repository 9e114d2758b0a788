//! Flat `key = value` run configuration.
//!
//! Lines are `dotted.key = value`; `#` starts a comment. Every key has a
//! default taken from the canonical configuration, and unknown keys are
//! rejected. [`RunConfig::to_text`] writes every key explicitly, so parsing
//! its output reproduces the configuration exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::identities::TestWeights;
use crate::model::{admissible_w_p, theta_threshold, Bump, InitSpec, ModelParams};
use crate::solver::SolverConfig;

/// The configuration shipped with the crate.
pub const CANONICAL: &str = include_str!("../../configs/canonical.cfg");

/// Per-field initial data before regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub preset: String,
    pub u: InitSpec,
    pub v: InitSpec,
    pub w: InitSpec,
    /// Apply the ε clip-and-smooth family to the sampled data.
    pub regularize: bool,
}

pub const PRESETS: [&str; 3] = ["canonical", "constant-half", "zero"];

fn preset(name: &str) -> Option<[InitSpec; 3]> {
    let g = |mass, center, sigma| InitSpec::Gaussian { mass, center, sigma };
    match name {
        "canonical" => Some([
            g(0.5, [0.35, 0.4], 0.1),
            g(0.3, [0.65, 0.6], 0.1),
            InitSpec::Constant(0.1),
        ]),
        "constant-half" => Some([
            InitSpec::Constant(0.5),
            InitSpec::Constant(0.5),
            InitSpec::Constant(0.0),
        ]),
        "zero" => Some([
            InitSpec::Constant(0.0),
            InitSpec::Constant(0.0),
            InitSpec::Constant(0.0),
        ]),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub params: ModelParams,
    pub solver: SolverConfig,
    pub t_end: f64,
    /// Times at which fields are written, besides 0 and `t_end`.
    pub output_times: Vec<f64>,
    /// Snapshot spacing for quantities reconstructed after the run.
    pub quadrature_every: f64,
    pub init: InitConfig,
    pub estimates: bool,
    pub certificates: bool,
    /// Exponent of the `sup_t ‖w‖_p` check, if enabled.
    pub w_lp_p: Option<f64>,
    pub probe: bool,
    pub probe_eta: Vec<f64>,
    pub probe_trials: usize,
    pub weights: Vec<TestWeights>,
    pub test_functions: usize,
    pub levels: usize,
    pub seed: u64,
    pub sweep_eps: Vec<f64>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub template: RunConfig,
    /// Strictly decreasing, all in `(0, 1)`.
    pub eps: Vec<f64>,
}

impl SweepConfig {
    pub fn new(template: RunConfig) -> Result<Self> {
        let eps = template.sweep_eps.clone();
        validate_ladder(&eps)?;
        Ok(SweepConfig { template, eps })
    }
}

fn validate_ladder(eps: &[f64]) -> Result<()> {
    if eps.len() < 2 {
        return Err(Error::config("sweep.eps", "need at least two levels"));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::config("sweep.eps", format!("{e} is not in (0, 1)")));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::config("sweep.eps", "must be strictly decreasing"));
    }
    Ok(())
}

/// Shortest representation that parses back to the same value.
pub fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_real(x)).collect::<Vec<_>>().join(",")
}

fn fmt_center(c: &[f64; 2], dim: usize) -> String {
    join(&c[..dim])
}

fn fmt_bump(b: &Bump, dim: usize) -> String {
    format!(
        "mass={} center={} sigma={}",
        fmt_real(b.mass),
        fmt_center(&b.center, dim),
        fmt_real(b.sigma)
    )
}

/// `constant 0.1`, `gaussian mass=.. center=x[,y] sigma=..`,
/// `two-bump <gaussian args> ; <gaussian args>`, `random seed=.. lo=.. hi=..`.
pub fn format_init(spec: &InitSpec, dim: usize) -> String {
    match spec {
        InitSpec::Constant(c) => format!("constant {}", fmt_real(*c)),
        InitSpec::Gaussian { mass, center, sigma } => format!(
            "gaussian {}",
            fmt_bump(
                &Bump {
                    mass: *mass,
                    center: *center,
                    sigma: *sigma
                },
                dim
            )
        ),
        InitSpec::TwoBump { first, second } => {
            format!("two-bump {} ; {}", fmt_bump(first, dim), fmt_bump(second, dim))
        }
        InitSpec::Random { seed, lo, hi } => format!("random seed={seed} lo={} hi={}", fmt_real(*lo), fmt_real(*hi)),
    }
}

fn parse_real(key: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (
                a.trim().parse().map_err(|_| bad(key, s))?,
                b.trim().parse().map_err(|_| bad(key, s))?,
            );
            a / b
        }
        None => s.parse().map_err(|_| bad(key, s))?,
    };
    if !v.is_finite() {
        return Err(bad(key, s));
    }
    Ok(v)
}

fn bad(key: &str, s: &str) -> Error {
    Error::config(key, format!("cannot parse `{s}`"))
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_real(key, x)).collect()
}

fn parse_kv<'a>(key: &str, tokens: &[&'a str]) -> Result<BTreeMap<&'a str, &'a str>> {
    let mut out = BTreeMap::new();
    for t in tokens {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| Error::config(key, format!("expected name=value, got `{t}`")))?;
        if out.insert(k, v).is_some() {
            return Err(Error::config(key, format!("`{k}` given twice")));
        }
    }
    Ok(out)
}

fn take<'a>(key: &str, kv: &mut BTreeMap<&str, &'a str>, name: &str) -> Result<&'a str> {
    kv.remove(name)
        .ok_or_else(|| Error::config(key, format!("missing `{name}`")))
}

fn finish(key: &str, kv: BTreeMap<&str, &str>) -> Result<()> {
    match kv.keys().next() {
        Some(k) => Err(Error::config(key, format!("unknown argument `{k}`"))),
        None => Ok(()),
    }
}

fn parse_bump(key: &str, tokens: &[&str], dim: usize) -> Result<Bump> {
    let mut kv = parse_kv(key, tokens)?;
    let mass = parse_real(key, take(key, &mut kv, "mass")?)?;
    let c = parse_list(key, take(key, &mut kv, "center")?)?;
    let sigma = parse_real(key, take(key, &mut kv, "sigma")?)?;
    finish(key, kv)?;
    if c.len() != dim {
        return Err(Error::config(
            key,
            format!("center needs {dim} coordinates, got {}", c.len()),
        ));
    }
    let mut center = [0.0; 2];
    center[..dim].copy_from_slice(&c);
    Ok(Bump { mass, center, sigma })
}

pub fn parse_init(key: &str, s: &str, dim: usize) -> Result<InitSpec> {
    let tokens: Vec<&str> = s.split_whitespace().collect();
    let (kind, rest) = tokens
        .split_first()
        .ok_or_else(|| Error::config(key, "empty initial-data expression"))?;
    match *kind {
        "constant" => match rest {
            [c] => Ok(InitSpec::Constant(parse_real(key, c)?)),
            _ => Err(Error::config(key, "constant takes one value")),
        },
        "gaussian" => {
            let b = parse_bump(key, rest, dim)?;
            Ok(InitSpec::Gaussian {
                mass: b.mass,
                center: b.center,
                sigma: b.sigma,
            })
        }
        "two-bump" => {
            let mut parts = rest.split(|t| *t == ";");
            let (a, b) = (parts.next().unwrap_or(&[]), parts.next());
            match (b, parts.next()) {
                (Some(b), None) => Ok(InitSpec::TwoBump {
                    first: parse_bump(key, a, dim)?,
                    second: parse_bump(key, b, dim)?,
                }),
                _ => Err(Error::config(
                    key,
                    "two-bump takes two gaussian argument lists separated by ` ; `",
                )),
            }
        }
        "random" => {
            let mut kv = parse_kv(key, rest)?;
            let seed = take(key, &mut kv, "seed")?;
            let seed = seed.parse().map_err(|_| bad(key, seed))?;
            let lo = parse_real(key, take(key, &mut kv, "lo")?)?;
            let hi = parse_real(key, take(key, &mut kv, "hi")?)?;
            finish(key, kv)?;
            Ok(InitSpec::Random { seed, lo, hi })
        }
        other => Err(Error::config(key, format!("unknown initial-data kind `{other}`"))),
    }
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(bad(key, s)),
    }
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.parse().map_err(|_| bad(key, s))
}

/// `key = value` lines into a map, rejecting duplicates.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", n + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::config(k, "given twice"));
        }
    }
    Ok(out)
}

struct Table(BTreeMap<String, String>);

impl Table {
    fn get(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn real(&mut self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |s| parse_real(key, &s))
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize> {
        self.get(key).map_or(Ok(default), |s| parse_usize(key, &s))
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool> {
        self.get(key).map_or(Ok(default), |s| parse_bool(key, &s))
    }
}

impl RunConfig {
    pub fn canonical() -> Self {
        Self::parse(CANONICAL).expect("shipped configuration parses")
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Table(parse_pairs(text)?);

        let cells: Vec<usize> = match t.get("grid.cells") {
            Some(s) => s
                .split(',')
                .map(|x| parse_usize("grid.cells", x.trim()))
                .collect::<Result<_>>()?,
            None => vec![64, 64],
        };
        let lengths = match t.get("grid.lengths") {
            Some(s) => parse_list("grid.lengths", &s)?,
            None => vec![1.0; cells.len()],
        };
        let grid = Grid::new(&cells, &lengths).map_err(|e| Error::config("grid.cells", e.to_string()))?;
        let dim = grid.dim();
        if let Some(d) = t.get("grid.dim") {
            if parse_usize("grid.dim", &d)? != dim {
                return Err(Error::config(
                    "grid.dim",
                    format!("{d} disagrees with {} entries in grid.cells", dim),
                ));
            }
        }

        let theta = t.real("model.theta", 2.0)?;
        let eps = t.real("model.eps", 0.25)?;
        let dim_n = t.count("model.dim_n", dim)?;
        if !(theta > 1.0) {
            return Err(Error::config("model.theta", format!("must be > 1, got {theta}")));
        }
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::config("model.eps", format!("must lie in [0, 1), got {eps}")));
        }
        let params =
            ModelParams::new(theta, eps, dim_n as u32).map_err(|e| Error::config("model.dim_n", e.to_string()))?;

        let d = SolverConfig::default();
        let solver = SolverConfig {
            cfl_safety: t.real("solver.cfl_safety", d.cfl_safety)?,
            max_dt: t.real("solver.max_dt", d.max_dt)?,
            linear_solver_tol: t.real("solver.linear_solver_tol", d.linear_solver_tol)?,
            linear_solver_max_iter: t.count("solver.linear_solver_max_iter", d.linear_solver_max_iter)?,
        };
        solver.validate().map_err(|e| match e {
            Error::InvalidArgument { name, reason } => Error::config(format!("solver.{name}"), reason),
            other => other,
        })?;

        let t_end = t.real("run.t_end", 2.0)?;
        if !(t_end >= 0.0) {
            return Err(Error::config("run.t_end", format!("must be >= 0, got {t_end}")));
        }
        let output_times = parse_list("run.output_times", &t.get("run.output_times").unwrap_or_default())?;
        if let Some(x) = output_times.iter().find(|x| !(0.0..=t_end).contains(*x)) {
            return Err(Error::config("run.output_times", format!("{x} outside [0, {t_end}]")));
        }
        let quadrature_every = t.real("run.quadrature_every", 0.02)?;
        if !(quadrature_every > 0.0) {
            return Err(Error::config("run.quadrature_every", "must be positive"));
        }
        let seed = match t.get("run.seed") {
            Some(s) => s.parse().map_err(|_| bad("run.seed", &s))?,
            None => 42,
        };

        let preset_name = t.get("init.preset").unwrap_or_else(|| "canonical".into());
        let [mut u, mut v, mut w] = preset(&preset_name).ok_or_else(|| {
            Error::config(
                "init.preset",
                format!("unknown preset `{preset_name}`, known: {}", PRESETS.join(", ")),
            )
        })?;
        for (key, slot) in [("init.u", &mut u), ("init.v", &mut v), ("init.w", &mut w)] {
            if let Some(s) = t.get(key) {
                *slot = parse_init(key, &s, dim)?;
            }
        }
        let init = InitConfig {
            preset: preset_name,
            u,
            v,
            w,
            regularize: t.flag("init.regularize", true)?,
        };

        let estimates = t.flag("checks.estimates", true)?;
        let certificates = t.flag("checks.certificates", true)?;
        let w_lp_p = match t.get("checks.w_lp_p").as_deref() {
            None => Some(2.0),
            Some("none") => None,
            Some(s) => Some(parse_real("checks.w_lp_p", s)?),
        };
        if let Some(p) = w_lp_p {
            let threshold = theta_threshold(dim_n as u32)?;
            if !(theta > threshold) {
                return Err(Error::config(
                    "model.theta",
                    format!("w L^p check needs theta > {threshold} for N = {dim_n}, got {theta}"),
                ));
            }
            let p_max = admissible_w_p(theta, dim_n as u32)?;
            if !(p >= 1.0 && p <= p_max) {
                return Err(Error::config(
                    "checks.w_lp_p",
                    format!("need 1 <= p <= {p_max}, got {p}"),
                ));
            }
        }
        let probe = t.flag("checks.probe", true)?;
        let probe_eta = match t.get("probe.eta") {
            Some(s) => parse_list("probe.eta", &s)?,
            None => vec![0.25, 1.0],
        };
        if probe_eta.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::config("probe.eta", "values must be positive"));
        }
        let probe_trials = t.count("probe.trials", 200)?;

        let weights = match t.get("certify.weights") {
            Some(s) => parse_weights(&s)?,
            None => vec![TestWeights::new(1.0, 2.0)?],
        };
        let test_functions = t.count("certify.test_functions", 20)?;
        if test_functions == 0 {
            return Err(Error::config("certify.test_functions", "must be at least 1"));
        }
        let levels = t.count("refine.levels", 3)?;
        if levels < 2 {
            return Err(Error::config("refine.levels", format!("need at least 2, got {levels}")));
        }
        let sweep_eps = match t.get("sweep.eps") {
            Some(s) => parse_list("sweep.eps", &s)?,
            None => (1..=7).map(|j| 0.5f64.powi(j)).collect(),
        };
        validate_ladder(&sweep_eps)?;
        let out_dir = PathBuf::from(t.get("output.dir").unwrap_or_else(|| "out".into()));

        if let Some(k) = t.0.keys().next() {
            return Err(Error::config(k.clone(), "unknown key"));
        }
        Ok(RunConfig {
            grid,
            params,
            solver,
            t_end,
            output_times,
            quadrature_every,
            init,
            estimates,
            certificates,
            w_lp_p,
            probe,
            probe_eta,
            probe_trials,
            weights,
            test_functions,
            levels,
            seed,
            sweep_eps,
            out_dir,
        })
    }

    /// Every key, in a fixed order.
    pub fn to_text(&self) -> String {
        let dim = self.grid.dim();
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line(
            "grid.cells",
            self.grid
                .cells()
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        line("grid.lengths", join(self.grid.lengths()));
        line("model.theta", fmt_real(self.params.theta()));
        line("model.eps", fmt_real(self.params.eps()));
        line("model.dim_n", self.params.dim_n().to_string());
        line("solver.cfl_safety", fmt_real(self.solver.cfl_safety));
        line("solver.max_dt", fmt_real(self.solver.max_dt));
        line("solver.linear_solver_tol", fmt_real(self.solver.linear_solver_tol));
        line(
            "solver.linear_solver_max_iter",
            self.solver.linear_solver_max_iter.to_string(),
        );
        line("run.t_end", fmt_real(self.t_end));
        line("run.output_times", join(&self.output_times));
        line("run.quadrature_every", fmt_real(self.quadrature_every));
        line("run.seed", self.seed.to_string());
        line("init.preset", self.init.preset.clone());
        line("init.u", format_init(&self.init.u, dim));
        line("init.v", format_init(&self.init.v, dim));
        line("init.w", format_init(&self.init.w, dim));
        line("init.regularize", self.init.regularize.to_string());
        line("checks.estimates", self.estimates.to_string());
        line("checks.certificates", self.certificates.to_string());
        line("checks.w_lp_p", self.w_lp_p.map_or("none".into(), fmt_real));
        line("checks.probe", self.probe.to_string());
        line("probe.eta", join(&self.probe_eta));
        line("probe.trials", self.probe_trials.to_string());
        line(
            "certify.weights",
            self.weights
                .iter()
                .map(|w| format!("{}:{}", fmt_real(w.p()), fmt_real(w.k())))
                .collect::<Vec<_>>()
                .join(","),
        );
        line("certify.test_functions", self.test_functions.to_string());
        line("refine.levels", self.levels.to_string());
        line("sweep.eps", join(&self.sweep_eps));
        line("output.dir", self.out_dir.display().to_string());
        s
    }
}

/// `p:k` pairs separated by commas.
pub fn parse_weights(s: &str) -> Result<Vec<TestWeights>> {
    let key = "certify.weights";
    let out: Vec<TestWeights> = s
        .split(',')
        .map(|pair| {
            let (p, k) = pair
                .split_once(':')
                .ok_or_else(|| Error::config(key, format!("expected p:k, got `{pair}`")))?;
            let (p, k) = (parse_real(key, p)?, parse_real(key, k)?);
            TestWeights::new(p, k).map_err(|e| Error::config(key, e.to_string()))
        })
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::config(key, "need at least one pair"));
    }
    Ok(out)
}
