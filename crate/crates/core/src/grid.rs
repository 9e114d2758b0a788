//! Cell-centered rectangular meshes in one or two dimensions.
//!
//! Boundaries are homogeneous Neumann: every difference operator reads a
//! mirrored ghost cell across the wall, so the face flux through the boundary
//! is exactly zero. Quadrature is the midpoint rule over cells.

use crate::error::{Error, Result};

/// `x^a` for `x >= 0`, evaluated as `exp(a ln x)` with `0^a := 0`.
#[inline]
pub fn pow_nonneg(x: f64, a: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (a * x.ln()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    cells: [usize; 2],
    lengths: [f64; 2],
    spacing: [f64; 2],
}

impl Grid {
    pub fn new(cells: &[usize], lengths: &[f64]) -> Result<Self> {
        let dim = cells.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=2")));
        }
        if lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} lengths given for a {dim}-dimensional grid",
                lengths.len()
            )));
        }
        let mut c = [1usize; 2];
        let mut l = [1.0f64; 2];
        let mut h = [1.0f64; 2];
        for a in 0..dim {
            if cells[a] == 0 {
                return Err(Error::InvalidGrid(format!("axis {a} has no cells")));
            }
            if !(lengths[a].is_finite() && lengths[a] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} length {} is not positive",
                    lengths[a]
                )));
            }
            c[a] = cells[a];
            l[a] = lengths[a];
            h[a] = lengths[a] / cells[a] as f64;
        }
        Ok(Grid {
            dim,
            cells: c,
            lengths: l,
            spacing: h,
        })
    }

    pub fn line(cells: usize, length: f64) -> Result<Self> {
        Self::new(&[cells], &[length])
    }

    pub fn rect(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(&[nx, ny], &[lx, ly])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(0.0, f64::max)
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// |Ω|
    pub fn measure(&self) -> f64 {
        self.lengths().iter().product()
    }

    pub fn diameter(&self) -> f64 {
        self.lengths().iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.cells[0] * j
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells[0], idx / self.cells[0])
    }

    /// Cell center; the second component is 0 on a 1D grid.
    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.coords(idx);
        let x = (i as f64 + 0.5) * self.spacing[0];
        let y = if self.dim == 2 {
            (j as f64 + 0.5) * self.spacing[1]
        } else {
            0.0
        };
        [x, y]
    }

    #[inline]
    fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.cells[0]
        }
    }

    /// Position of the cell along `axis`.
    #[inline]
    fn axis_pos(&self, idx: usize, axis: usize) -> usize {
        let (i, j) = self.coords(idx);
        if axis == 0 {
            i
        } else {
            j
        }
    }

    /// Neighbor index across the `+` face along `axis`, `None` at the wall.
    #[inline]
    pub fn upper(&self, idx: usize, axis: usize) -> Option<usize> {
        (self.axis_pos(idx, axis) + 1 < self.cells[axis]).then(|| idx + self.stride(axis))
    }

    /// Neighbor index across the `-` face along `axis`, `None` at the wall.
    #[inline]
    pub fn lower(&self, idx: usize, axis: usize) -> Option<usize> {
        (self.axis_pos(idx, axis) > 0).then(|| idx - self.stride(axis))
    }

    /// Same domain with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        let cells: Vec<usize> = self.cells().iter().map(|c| c * factor).collect();
        Grid::new(&cells, self.lengths())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldSize {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Field { grid, values })
    }

    /// Caller guarantees the length; finiteness is not checked.
    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Σ f_i · cell volume, without the finiteness check.
    #[inline]
    pub fn sum_integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Average over blocks of `factor^dim` fine cells onto `coarse`.
    pub fn restrict_to(&self, coarse: &Grid) -> Result<Field> {
        let fine = &self.grid;
        if coarse.dim() != fine.dim() || coarse.lengths() != fine.lengths() {
            return Err(Error::InvalidGrid("restriction between different domains".into()));
        }
        let factor = fine.cells()[0] / coarse.cells()[0];
        if factor == 0 || fine.cells().iter().zip(coarse.cells()).any(|(f, c)| *f != c * factor) {
            return Err(Error::InvalidGrid(format!(
                "fine grid {:?} is not an integer refinement of {:?}",
                fine.cells(),
                coarse.cells()
            )));
        }
        let fy = if fine.dim() == 2 { factor } else { 1 };
        let weight = 1.0 / (factor * fy) as f64;
        let mut out = vec![0.0; coarse.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let (ci, cj) = coarse.coords(idx);
            let mut s = 0.0;
            for dj in 0..fy {
                for di in 0..factor {
                    s += self.values[fine.index(ci * factor + di, cj * fy + dj)];
                }
            }
            *o = s * weight;
        }
        Ok(Field::from_vec_unchecked(*coarse, out))
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Midpoint quadrature ∫_Ω f.
pub fn integrate(f: &Field) -> Result<f64> {
    check_finite(&f.values)?;
    Ok(f.sum_integral())
}

/// ‖f‖_{L^p(Ω)} for real `p >= 1`.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::arg("p", format!("L^p exponent must be >= 1, got {p}")));
    }
    check_finite(&f.values)?;
    let s: f64 = f.values.iter().map(|x| pow_nonneg(x.abs(), p)).sum();
    Ok(pow_nonneg(s * f.grid.cell_volume(), 1.0 / p))
}

/// Face-normal differences, one field per axis.
///
/// `axes[a][i]` is the difference quotient across the `+` face of cell `i`
/// along axis `a`; it is zero on wall faces (mirrored ghost) and on axes with a
/// single cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGradient {
    pub axes: Vec<Field>,
}

impl FaceGradient {
    /// max over all faces of |∂f/∂n|.
    pub fn max_abs(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|f| f.values.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn gradient(f: &Field) -> FaceGradient {
    let g = f.grid;
    let axes = (0..g.dim())
        .map(|a| {
            let h = g.spacing[a];
            let vals = (0..g.len())
                .map(|i| match g.upper(i, a) {
                    Some(j) => (f.values[j] - f.values[i]) / h,
                    None => 0.0,
                })
                .collect();
            Field::from_vec_unchecked(g, vals)
        })
        .collect();
    FaceGradient { axes }
}

/// Cell-centered central differences with mirrored ghosts, one field per axis.
pub fn cell_gradient(f: &Field) -> Vec<Field> {
    let g = f.grid;
    (0..g.dim())
        .map(|a| {
            let h2 = 2.0 * g.spacing[a];
            let vals = (0..g.len())
                .map(|i| {
                    let hi = g.upper(i, a).map_or(f.values[i], |j| f.values[j]);
                    let lo = g.lower(i, a).map_or(f.values[i], |j| f.values[j]);
                    (hi - lo) / h2
                })
                .collect();
            Field::from_vec_unchecked(g, vals)
        })
        .collect()
}

/// Five-point (three-point in 1D) Laplacian with Neumann ghosts.
pub fn laplacian(f: &Field) -> Field {
    let mut out = vec![0.0; f.grid.len()];
    laplacian_into(&f.grid, &f.values, &mut out);
    Field::from_vec_unchecked(f.grid, out)
}

/// Every interior face as `(axis, lower cell, upper cell)`, axis-major.
pub(crate) fn interior_faces(g: &Grid) -> impl Iterator<Item = (usize, usize, usize)> {
    let [nx, ny] = g.cells;
    let xs = (0..ny).flat_map(move |j| (0..nx.saturating_sub(1)).map(move |i| (0, i + nx * j, i + 1 + nx * j)));
    let ys_rows = if g.dim == 2 { ny.saturating_sub(1) } else { 0 };
    let ys = (0..ys_rows * nx).map(move |k| (1, k, k + nx));
    xs.chain(ys)
}

/// Center of the `+` face of cell `idx` along `axis`.
#[inline]
pub(crate) fn face_center(g: &Grid, idx: usize, axis: usize) -> [f64; 2] {
    let mut c = g.center(idx);
    c[axis] += 0.5 * g.spacing[axis];
    c
}

pub(crate) fn laplacian_into(g: &Grid, x: &[f64], out: &mut [f64]) {
    let [nx, ny] = g.cells;
    let ix = if nx > 1 {
        1.0 / (g.spacing[0] * g.spacing[0])
    } else {
        0.0
    };
    let iy = if g.dim == 2 && ny > 1 {
        1.0 / (g.spacing[1] * g.spacing[1])
    } else {
        0.0
    };
    for j in 0..ny {
        let row = &x[j * nx..(j + 1) * nx];
        // mirrored ghost rows at the walls
        let down = if j > 0 { &x[(j - 1) * nx..j * nx] } else { row };
        let up = if j + 1 < ny {
            &x[(j + 1) * nx..(j + 2) * nx]
        } else {
            row
        };
        let o = &mut out[j * nx..(j + 1) * nx];
        if nx == 1 {
            o[0] = (down[0] - 2.0 * row[0] + up[0]) * iy;
            continue;
        }
        o[0] = (row[1] - row[0]) * ix + (down[0] - 2.0 * row[0] + up[0]) * iy;
        for i in 1..nx - 1 {
            let c = row[i];
            o[i] = (row[i - 1] - 2.0 * c + row[i + 1]) * ix + (down[i] - 2.0 * c + up[i]) * iy;
        }
        let e = nx - 1;
        o[e] = (row[e - 1] - row[e]) * ix + (down[e] - 2.0 * row[e] + up[e]) * iy;
    }
}
