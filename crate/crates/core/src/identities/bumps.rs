use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `amplitude · B(|x - c|/ρ) · B((t - τ)/σ)` with `B(y) = exp(1/(y² - 1))`
/// on `|y| < 1`, zero elsewhere. Derivatives are exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub dim: usize,
    pub center: [f64; 2],
    pub radius: f64,
    pub t_center: f64,
    pub t_radius: f64,
    pub amplitude: f64,
}

/// `(B(y), B'(y)/y)` for squared argument `r2 = |y|²`.
#[inline]
fn bump(r2: f64) -> (f64, f64) {
    if r2 >= 1.0 {
        return (0.0, 0.0);
    }
    let d = r2 - 1.0;
    let b = (1.0 / d).exp();
    // d/dy exp(1/(y²-1)) = -2y/(y²-1)² · B
    (b, -2.0 * b / (d * d))
}

impl TestFunction {
    #[inline]
    fn space(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let mut y = [0.0; 2];
        let mut r2 = 0.0;
        for a in 0..self.dim {
            y[a] = (x[a] - self.center[a]) / self.radius;
            r2 += y[a] * y[a];
        }
        let (b, slope) = bump(r2);
        (b, [slope * y[0] / self.radius, slope * y[1] / self.radius])
    }

    #[inline]
    fn time(&self, t: f64) -> (f64, f64) {
        let y = (t - self.t_center) / self.t_radius;
        let (b, slope) = bump(y * y);
        (b, slope * y / self.t_radius)
    }

    pub fn value(&self, x: [f64; 2], t: f64) -> f64 {
        self.amplitude * self.space(x).0 * self.time(t).0
    }

    pub fn grad(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let (_, g) = self.space(x);
        let bt = self.amplitude * self.time(t).0;
        [g[0] * bt, g[1] * bt]
    }

    pub fn time_derivative(&self, x: [f64; 2], t: f64) -> f64 {
        self.amplitude * self.space(x).0 * self.time(t).1
    }

    /// Temporal factor alone, `amplitude · B((t - τ)/σ)`, and its derivative.
    pub(crate) fn temporal(&self, t: f64) -> (f64, f64) {
        let (b, d) = self.time(t);
        (self.amplitude * b, self.amplitude * d)
    }

    /// Spatial factor `B(|x - c|/ρ)` and its gradient.
    pub(crate) fn spatial(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        self.space(x)
    }

    pub fn active_at(&self, t: f64) -> bool {
        (t - self.t_center).abs() < self.t_radius
    }

    /// Cell index ranges per axis whose closure can meet the support.
    pub(crate) fn cell_box(&self, g: &Grid) -> [(usize, usize); 2] {
        let mut out = [(0, 1); 2];
        for a in 0..g.dim() {
            let h = g.spacing()[a];
            let n = g.cells()[a];
            let lo = ((self.center[a] - self.radius) / h).floor() - 1.0;
            let hi = ((self.center[a] + self.radius) / h).ceil() + 1.0;
            out[a] = (lo.max(0.0) as usize, (hi.max(0.0) as usize).min(n));
        }
        out
    }

    /// Smallest distance from the spatial support to the boundary.
    pub fn wall_distance(&self, g: &Grid) -> f64 {
        (0..g.dim())
            .map(|a| (self.center[a] - self.radius).min(g.lengths()[a] - self.center[a] - self.radius))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Seeded family of nonnegative bumps with supports at distance at least the
/// largest spacing from the walls, radii in `[2h, diam/4]` (capped so the
/// support fits) and temporal supports ending before `t_end`. Every fourth
/// bump, starting with the first, is active at `t = 0`.
pub fn sample_test_functions(grid: &Grid, t_end: f64, count: usize, seed: u64) -> Result<Vec<TestFunction>> {
    if count == 0 {
        return Err(Error::arg("count", "must be at least 1"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::arg("t_end", "must be positive"));
    }
    if grid.cells().iter().any(|&n| n < 5) {
        return Err(Error::InvalidGrid(format!(
            "test functions need at least 5 cells per axis, got {:?}",
            grid.cells()
        )));
    }
    let h = grid.max_spacing();
    let fit = grid.lengths().iter().fold(f64::INFINITY, |m, &l| m.min(0.5 * l - h));
    let r_lo = 2.0 * h;
    let r_hi = (grid.diameter() / 4.0).min(fit);
    if !(r_hi >= r_lo) {
        return Err(Error::InvalidGrid(
            "domain too small for interior test functions".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let radius = if r_hi > r_lo {
            rng.random_range(r_lo..=r_hi)
        } else {
            r_lo
        };
        let mut center = [0.0; 2];
        for a in 0..grid.dim() {
            let lo = radius + h;
            let hi = grid.lengths()[a] - radius - h;
            center[a] = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                0.5 * grid.lengths()[a]
            };
        }
        let t_radius = rng.random_range(0.1 * t_end..=t_end / 3.0);
        let t_center = if n % 4 == 0 {
            rng.random_range(-0.5 * t_radius..=0.5 * t_radius)
        } else {
            rng.random_range(t_radius..=0.999 * t_end - t_radius)
        };
        let amplitude = rng.random_range(0.5..=1.5);
        out.push(TestFunction {
            dim: grid.dim(),
            center,
            radius,
            t_center,
            t_radius,
            amplitude,
        });
    }
    Ok(out)
}
