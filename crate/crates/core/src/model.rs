//! The regularized two-species system under unit parameters:
//!
//! ```text
//! u_t = Δu - ∇·(u∇w) + u(1 - u^{θ-1} - v)
//! v_t = Δv - ∇·(v∇w) + v(1 - v - u)
//! w_t = Δw - w + (u + v) / (1 + ε(u + v))
//! ```
//!
//! with homogeneous Neumann conditions, plus the closed-form constants that
//! bound its solutions independently of ε.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{integrate, lp_norm, pow_nonneg, Field, Grid};
use crate::linsolve::Helmholtz;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    theta: f64,
    eps: f64,
    dim_n: u32,
}

impl ModelParams {
    /// `theta > 1`, `0 <= eps < 1`, `dim_n >= 1`. `eps = 0` is the limit system.
    pub fn new(theta: f64, eps: f64, dim_n: u32) -> Result<Self> {
        if !(theta.is_finite() && theta > 1.0) {
            return Err(Error::arg("theta", format!("must be > 1, got {theta}")));
        }
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::arg("eps", format!("must lie in [0, 1), got {eps}")));
        }
        if dim_n < 1 {
            return Err(Error::arg("dim_n", "must be >= 1"));
        }
        Ok(ModelParams { theta, eps, dim_n })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim_n(&self) -> u32 {
        self.dim_n
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.theta, eps, self.dim_n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub w: Field,
    pub time: f64,
}

impl State {
    /// Checks shared grid and cellwise nonnegativity.
    pub fn new(u: Field, v: Field, w: Field, time: f64) -> Result<Self> {
        if u.grid() != v.grid() || u.grid() != w.grid() {
            return Err(Error::InvalidGrid("u, v, w live on different grids".into()));
        }
        for (name, f) in [("u", &u), ("v", &v), ("w", &w)] {
            if let Some((index, &value)) = f.values().iter().enumerate().find(|(_, x)| **x < 0.0) {
                return Err(Error::Positivity {
                    field: name,
                    value,
                    index,
                    step: 0,
                });
            }
        }
        Ok(State { u, v, w, time })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }
}

// Pointwise kinetics. The checked variants validate their inputs; the solver
// uses the `_raw` forms on states that are already known to be nonnegative.

#[inline]
pub(crate) fn reaction_u_raw(u: f64, v: f64, theta: f64) -> f64 {
    u * (1.0 - pow_nonneg(u, theta - 1.0) - v)
}

#[inline]
pub(crate) fn reaction_v_raw(u: f64, v: f64) -> f64 {
    v * (1.0 - v - u)
}

#[inline]
pub(crate) fn source_w_raw(u: f64, v: f64, eps: f64) -> f64 {
    let s = u + v;
    s / (1.0 + eps * s)
}

fn nonneg(name: &'static str, x: f64) -> Result<()> {
    if x < 0.0 || x.is_nan() {
        Err(Error::Negative { name, value: x })
    } else {
        Ok(())
    }
}

/// u(1 - u^{θ-1} - v)
pub fn reaction_u(u: f64, v: f64, theta: f64) -> Result<f64> {
    nonneg("u", u)?;
    nonneg("v", v)?;
    if !(theta > 1.0) {
        return Err(Error::arg("theta", format!("must be > 1, got {theta}")));
    }
    Ok(reaction_u_raw(u, v, theta))
}

/// v(1 - v - u)
pub fn reaction_v(u: f64, v: f64) -> Result<f64> {
    nonneg("u", u)?;
    nonneg("v", v)?;
    Ok(reaction_v_raw(u, v))
}

/// (u + v)/(1 + ε(u + v))
pub fn source_w(u: f64, v: f64, eps: f64) -> Result<f64> {
    nonneg("u", u)?;
    nonneg("v", v)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::arg("eps", format!("must lie in [0, 1), got {eps}")));
    }
    Ok(source_w_raw(u, v, eps))
}

/// `(max{f, 0}, max{-f, 0})`
#[inline]
pub fn sign_split(f: f64) -> (f64, f64) {
    (f.max(0.0), (-f).max(0.0))
}

/// (2N - 2)/N: the competition exponent must exceed this for the w bound.
pub fn theta_threshold(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::arg("N", "dimension must be >= 1"));
    }
    let n = n as f64;
    Ok((2.0 * n - 2.0) / n)
}

fn critical_ratio(theta: f64, n: u32) -> f64 {
    n as f64 * (2.0 - theta) / (2.0 * (theta - 1.0))
}

/// Integrability exponent of w₀: max{2, N(2-θ)/(2(θ-1))}.
pub fn r_exponent(theta: f64, n: u32) -> Result<f64> {
    if !(theta > 1.0) {
        return Err(Error::arg("theta", format!("must be > 1, got {theta}")));
    }
    Ok(critical_ratio(theta, n).max(2.0))
}

/// Upper end of the p-range on which ‖w(t)‖_{L^p} stays bounded uniformly in ε.
pub fn admissible_w_p(theta: f64, n: u32) -> Result<f64> {
    let threshold = theta_threshold(n)?;
    if !(theta > threshold) {
        return Err(Error::BelowThetaThreshold {
            theta,
            threshold,
            dim: n,
        });
    }
    let floor = if n <= 3 { 2.0 } else { 1.0 };
    Ok(critical_ratio(theta, n).max(floor))
}

/// (θ-1)(2/θ)^{θ/(θ-1)}, the maximum of 2s - s^θ over s >= 0.
pub fn young_constant(theta: f64) -> f64 {
    (theta - 1.0) * (2.0 / theta).powf(theta / (theta - 1.0))
}

/// Mass bound for u: max{1 + ‖u₀‖₁, (θ-1)(2/θ)^{θ/(θ-1)}|Ω|}.
pub fn m1_bound(u0_l1: f64, theta: f64, omega_measure: f64) -> Result<f64> {
    nonneg("u0_l1", u0_l1)?;
    if !(theta > 1.0) {
        return Err(Error::arg("theta", format!("must be > 1, got {theta}")));
    }
    if !(omega_measure > 0.0) {
        return Err(Error::arg("omega_measure", "must be positive"));
    }
    Ok((1.0 + u0_l1).max(young_constant(theta) * omega_measure))
}

/// Mass bound for v: max{1 + ‖v₀‖₁, |Ω|}.
pub fn m2_bound(v0_l1: f64, omega_measure: f64) -> Result<f64> {
    nonneg("v0_l1", v0_l1)?;
    if !(omega_measure > 0.0) {
        return Err(Error::arg("omega_measure", "must be positive"));
    }
    Ok((1.0 + v0_l1).max(omega_measure))
}

/// Initial data (u₀, v₀, w₀) before regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialFields {
    pub u0: Field,
    pub v0: Field,
    pub w0: Field,
}

impl InitialFields {
    pub fn new(u0: Field, v0: Field, w0: Field) -> Result<Self> {
        // reuse the state checks
        let s = State::new(u0, v0, w0, 0.0)?;
        Ok(InitialFields {
            u0: s.u,
            v0: s.v,
            w0: s.w,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u0.grid()
    }

    pub fn u0_l1(&self) -> f64 {
        self.u0.sum_integral()
    }

    pub fn v0_l1(&self) -> f64 {
        self.v0.sum_integral()
    }

    pub fn w0_lr(&self, r: f64) -> Result<f64> {
        lp_norm(&self.w0, r)
    }

    pub fn into_state(self) -> State {
        State {
            u: self.u0,
            v: self.v0,
            w: self.w0,
            time: 0.0,
        }
    }
}

/// Clip at 1/ε, then one backward-Euler heat step of pseudo-time ε.
///
/// The heat step conserves mass, maps nonnegative data to nonnegative data and
/// contracts every L^p norm, so the regularized data never exceeds the base
/// norms. At ε = 0 the base is returned unchanged.
pub fn regularize_initial(base: &InitialFields, eps: f64, tol: f64) -> Result<InitialFields> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::arg("eps", format!("must lie in [0, 1), got {eps}")));
    }
    let fields = [&base.u0, &base.v0, &base.w0].map(|f| -> Result<Field> {
        if let Some(&value) = f.values().iter().find(|x| **x < 0.0) {
            return Err(Error::Negative { name: "base", value });
        }
        if eps == 0.0 {
            return Ok(f.clone());
        }
        let cap = 1.0 / eps;
        let clipped: Vec<f64> = f.values().iter().map(|&x| x.min(cap)).collect();
        let grid = *f.grid();
        let (smoothed, _) = Helmholtz::new(&grid, 1.0, eps).solve(&clipped, tol, 100_000)?;
        // The exact heat step is nonnegative; drop solver roundoff below zero.
        let smoothed = smoothed.into_iter().map(|x| x.max(0.0)).collect();
        Field::new(grid, smoothed)
    });
    let [u0, v0, w0] = fields;
    InitialFields::new(u0?, v0?, w0?)
}

/// A named recipe for one initial field.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Constant(f64),
    /// Gaussian scaled so its midpoint-rule integral equals `mass`.
    Gaussian {
        mass: f64,
        center: [f64; 2],
        sigma: f64,
    },
    TwoBump {
        first: Bump,
        second: Bump,
    },
    /// Independent uniform values in `[lo, hi]` per cell.
    Random {
        seed: u64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub mass: f64,
    pub center: [f64; 2],
    pub sigma: f64,
}

fn gaussian_field(grid: Grid, b: &Bump) -> Result<Field> {
    if !(b.sigma > 0.0) || !(b.mass >= 0.0) {
        return Err(Error::arg("gaussian", "sigma must be positive and mass nonnegative"));
    }
    let dim = grid.dim();
    let shape = Field::from_fn(grid, |x| {
        let r2: f64 = (0..dim).map(|a| (x[a] - b.center[a]).powi(2)).sum();
        (-r2 / (2.0 * b.sigma * b.sigma)).exp()
    })?;
    let total = integrate(&shape)?;
    if total <= 0.0 {
        return Err(Error::arg("gaussian", "bump has no mass on the grid"));
    }
    Ok(shape.map(|x| x * b.mass / total))
}

impl InitSpec {
    pub fn sample(&self, grid: Grid) -> Result<Field> {
        match self {
            InitSpec::Constant(c) => {
                nonneg("constant", *c)?;
                Ok(Field::constant(grid, *c))
            }
            InitSpec::Gaussian { mass, center, sigma } => gaussian_field(
                grid,
                &Bump {
                    mass: *mass,
                    center: *center,
                    sigma: *sigma,
                },
            ),
            InitSpec::TwoBump { first, second } => {
                let a = gaussian_field(grid, first)?;
                let b = gaussian_field(grid, second)?;
                let sum = a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect();
                Field::new(grid, sum)
            }
            InitSpec::Random { seed, lo, hi } => {
                if !(*lo >= 0.0 && hi >= lo) {
                    return Err(Error::arg("random", format!("need 0 <= lo <= hi, got [{lo}, {hi}]")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let vals = (0..grid.len())
                    .map(|_| if hi > lo { rng.random_range(*lo..=*hi) } else { *lo })
                    .collect();
                Field::new(grid, vals)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(2.0, 0.25, 2).is_ok());
        assert!(ModelParams::new(0.9, 0.25, 2).is_err());
        assert!(ModelParams::new(1.0, 0.25, 2).is_err());
        assert!(ModelParams::new(2.0, 1.0, 2).is_err());
        assert!(ModelParams::new(2.0, -0.1, 2).is_err());
        assert!(ModelParams::new(2.0, 0.0, 2).is_ok());
    }

    #[test]
    fn reaction_u_examples() {
        assert_eq!(reaction_u(0.0, 3.0, 1.5).unwrap(), 0.0);
        assert_eq!(reaction_u(1.0, 0.0, 2.0).unwrap(), 0.0);
        // direct evaluation: 0.5(1 - sqrt(0.5) - 0.25)
        let expected = 0.5 * (1.0 - 0.5f64.sqrt() - 0.25);
        assert!(close(reaction_u(0.5, 0.25, 1.5).unwrap(), expected, 1e-15));
        assert!(close(expected, 0.02145, 1e-5));
        assert!(reaction_u(-0.1, 0.0, 2.0).is_err());
        assert!(reaction_u(0.1, -1.0, 2.0).is_err());
        assert!(reaction_u(0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn reaction_v_examples() {
        assert_eq!(reaction_v(0.7, 0.0).unwrap(), 0.0);
        assert_eq!(reaction_v(0.5, 0.5).unwrap(), 0.0);
        assert!(close(reaction_v(0.2, 0.3).unwrap(), 0.15, 1e-15));
        assert!(reaction_v(0.2, -0.3).is_err());
    }

    #[test]
    fn source_w_examples() {
        assert_eq!(source_w(0.0, 0.0, 0.3).unwrap(), 0.0);
        assert_eq!(source_w(1.25, 0.5, 0.0).unwrap(), 1.75);
        assert!(close(source_w(1.0, 2.0, 0.5).unwrap(), 1.2, 1e-15));
        assert!(source_w(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn sign_split_examples() {
        assert_eq!(sign_split(0.0), (0.0, 0.0));
        assert_eq!(sign_split(-2.0), (0.0, 2.0));
        let f = reaction_u(0.5, 0.0, 2.0).unwrap();
        assert_eq!(sign_split(f), (0.25, 0.0));
    }

    #[test]
    fn exponent_formulas() {
        assert_eq!(theta_threshold(2).unwrap(), 1.0);
        assert!(close(theta_threshold(3).unwrap(), 4.0 / 3.0, 1e-15));
        assert_eq!(theta_threshold(4).unwrap(), 1.5);
        assert!(theta_threshold(0).is_err());

        assert_eq!(r_exponent(2.0, 3).unwrap(), 2.0);
        assert_eq!(r_exponent(2.0, 7).unwrap(), 2.0);
        assert!(close(r_exponent(1.2, 3).unwrap(), 6.0, 1e-12));
        assert!(close(r_exponent(1.5, 4).unwrap(), 2.0, 1e-15));
        assert!(r_exponent(1.0, 2).is_err());

        assert_eq!(admissible_w_p(2.0, 2).unwrap(), 2.0);
        assert_eq!(admissible_w_p(2.0, 4).unwrap(), 1.0);
        assert_eq!(admissible_w_p(1.5, 3).unwrap(), 2.0);
        assert!(matches!(admissible_w_p(1.5, 4), Err(Error::BelowThetaThreshold { .. })));
        assert!(admissible_w_p(1.0, 2).is_err());
    }

    #[test]
    fn mass_bound_examples() {
        assert!(close(m1_bound(0.5, 2.0, 1.0).unwrap(), 1.5, 1e-15));
        assert!(close(m1_bound(0.0, 2.0, 2.0).unwrap(), 2.0, 1e-15));
        // (θ-1)(2/θ)^{θ/(θ-1)} at θ = 1.5 is 0.5·(4/3)^3
        let c = 0.5 * (4.0f64 / 3.0).powi(3);
        assert!(close(m1_bound(0.0, 1.5, 1.0).unwrap(), c, 1e-14));
        assert!(close(c, 1.1852, 1e-4));
        assert!(m1_bound(-1.0, 2.0, 1.0).is_err());
        assert!(m1_bound(0.0, 2.0, 0.0).is_err());

        assert_eq!(m2_bound(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(m2_bound(3.0, 1.0).unwrap(), 4.0);
        assert_eq!(m2_bound(0.0, 5.0).unwrap(), 5.0);
    }

    #[test]
    fn young_constant_is_max_of_2s_minus_power() {
        for theta in [1.2, 1.6, 2.0, 2.5, 4.0] {
            let brute = (0..200_000)
                .map(|i| i as f64 * 1e-4)
                .map(|s| 2.0 * s - s.powf(theta))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(close(young_constant(theta), brute, 1e-6), "{theta}");
        }
    }

    #[test]
    fn regularization_examples() {
        let g = Grid::line(40, 1.0).unwrap();
        let smooth = Field::from_fn(g, |x| 1.0 + 0.3 * (std::f64::consts::PI * x[0]).cos()).unwrap();
        let base = InitialFields::new(smooth.clone(), smooth.clone(), smooth.clone()).unwrap();
        // ε = 0 returns the base exactly
        assert_eq!(regularize_initial(&base, 0.0, 1e-12).unwrap(), base);
        // small ε: close to the base
        let r = regularize_initial(&base, 1e-6, 1e-14).unwrap();
        let diff: f64 =
            r.u0.values()
                .iter()
                .zip(smooth.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        assert!(diff < 1e-4);

        // constant below the cap is preserved
        let c = Field::constant(g, 0.7);
        let base = InitialFields::new(c.clone(), c.clone(), c.clone()).unwrap();
        let r = regularize_initial(&base, 0.5, 1e-13).unwrap();
        assert!(r.u0.values().iter().all(|&x| close(x, 0.7, 1e-12)));

        // spike of height 10 with ε = 0.5: clipped at 2, then smoothed
        let mut spike = vec![0.0; 40];
        spike[20] = 10.0;
        let spike = Field::new(g, spike).unwrap();
        let base = InitialFields::new(spike.clone(), spike.clone(), spike.clone()).unwrap();
        let r = regularize_initial(&base, 0.5, 1e-14).unwrap();
        let l1 = integrate(&r.u0).unwrap();
        // the heat step conserves the clipped mass 2·h
        assert!(close(l1, 2.0 / 40.0, 1e-12));
        assert!(l1 <= integrate(&spike).unwrap());
        assert!(r.u0.max() <= 2.0);
        assert!(r.u0.min() >= 0.0);
    }

    #[test]
    fn regularization_rejects_negative_base() {
        let g = Grid::line(4, 1.0).unwrap();
        let good = Field::zeros(g);
        let base = InitialFields {
            u0: Field::new(g, vec![0.0, -1.0, 0.0, 0.0]).unwrap(),
            v0: good.clone(),
            w0: good,
        };
        assert!(regularize_initial(&base, 0.5, 1e-12).is_err());
    }

    #[test]
    fn gaussian_has_requested_mass() {
        let g = Grid::rect(32, 32, 1.0, 1.0).unwrap();
        let f = InitSpec::Gaussian {
            mass: 0.5,
            center: [0.3, 0.4],
            sigma: 0.1,
        }
        .sample(g)
        .unwrap();
        assert!(close(integrate(&f).unwrap(), 0.5, 1e-14));
        let r1 = InitSpec::Random {
            seed: 3,
            lo: 0.0,
            hi: 1.0,
        }
        .sample(g)
        .unwrap();
        let r2 = InitSpec::Random {
            seed: 3,
            lo: 0.0,
            hi: 1.0,
        }
        .sample(g)
        .unwrap();
        assert_eq!(r1, r2);
    }

    proptest! {
        #[test]
        fn reaction_u_below_logistic(u in 0.0f64..20.0, v in 0.0f64..20.0, theta in 1.01f64..4.0) {
            let f = reaction_u(u, v, theta).unwrap();
            prop_assert!(f <= u - pow_nonneg(u, theta) + 1e-12 * (1.0 + u.powf(theta)));
        }

        #[test]
        fn source_is_bounded_and_monotone(u in 0.0f64..50.0, v in 0.0f64..50.0, extra in 0.0f64..5.0, eps in 0.001f64..0.999) {
            let s = source_w(u, v, eps).unwrap();
            prop_assert!(s >= 0.0);
            prop_assert!(s <= (u + v).min(1.0 / eps) * (1.0 + 1e-15));
            prop_assert!(source_w(u + extra, v, eps).unwrap() >= s);
        }

        #[test]
        fn sign_split_reconstructs(f in -1e6f64..1e6) {
            let (p, m) = sign_split(f);
            prop_assert_eq!(p - m, f);
            prop_assert_eq!(p + m, f.abs());
            prop_assert_eq!(p * m, 0.0);
            prop_assert!(p >= 0.0 && m >= 0.0);
        }

        #[test]
        fn positive_part_bounded_when_u_at_most_one(u in 0.0f64..1.0, v in 0.0f64..3.0, theta in 1.01f64..4.0) {
            let (p, _) = sign_split(reaction_u(u, v, theta).unwrap());
            prop_assert!(p <= 1.0);
        }

        #[test]
        fn mass_bounds_monotone(a in 0.0f64..10.0, da in 0.0f64..1.0, theta in 1.05f64..4.0, om in 0.1f64..5.0, dom in 0.0f64..1.0) {
            let base = m1_bound(a, theta, om).unwrap();
            prop_assert!(m1_bound(a + da, theta, om).unwrap() >= base);
            prop_assert!(m1_bound(a, theta, om + dom).unwrap() >= base);
            let base2 = m2_bound(a, om).unwrap();
            prop_assert!(m2_bound(a + da, om).unwrap() >= base2);
            prop_assert!(m2_bound(a, om + dom).unwrap() >= base2);
        }

        #[test]
        fn exponent_relations(theta in 1.01f64..4.0, n in 1u32..8) {
            let r = r_exponent(theta, n).unwrap();
            prop_assert!(r >= 2.0);
            if let Ok(p) = admissible_w_p(theta, n) {
                if n == 2 || n == 3 {
                    prop_assert!(p <= r);
                }
            }
        }
    }
}
