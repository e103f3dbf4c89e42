//! Uniform tensor grids on axis-aligned boxes `(0, L_0) x ... x (0, L_{n-1})`.
//!
//! Interior nodes sit at `(i_a + 1) h_a` with `h_a = L_a / (m_a + 1)` and are
//! flattened with axis 0 varying fastest. Each boundary face entry is the
//! boundary node adjacent to exactly one interior node; box corners and edges
//! are never touched by the `2n + 1` point stencil and are not stored.
//!
//! Faces are enumerated axis-major, the low face (`x_a = 0`) before the high
//! face (`x_a = L_a`), and within one face in the flat order of the adjacent
//! interior nodes.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Minimum nodes per axis; the second-order one-sided trace needs two
/// interior neighbours behind every face.
pub const MIN_RES: usize = 3;

pub type Point = [f64; MAX_DIM];

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    /// Boundary node position (unused trailing coordinates are zero).
    pub position: Point,
    /// Adjacent interior node.
    pub interior: usize,
    /// Next interior node along the inward normal.
    pub interior2: usize,
    pub axis: usize,
    /// `-1.0` on the low face, `+1.0` on the high face.
    pub outward: f64,
    /// Quadrature weight: product of the spacings along the other axes.
    pub measure: f64,
}

impl BoundaryFace {
    pub fn normal(&self) -> Point {
        let mut n = [0.0; MAX_DIM];
        n[self.axis] = self.outward;
        n
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    extent: Vec<f64>,
    res: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
    faces: Vec<BoundaryFace>,
}

impl Grid {
    pub fn new(dim: usize, extent: &[f64], res: &[usize]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if extent.len() != dim || res.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} extents and resolutions, got {} and {}",
                extent.len(),
                res.len()
            )));
        }
        if let Some(l) = extent.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGrid(format!("extent {l} is not positive")));
        }
        if let Some(m) = res.iter().find(|m| **m < MIN_RES) {
            return Err(Error::InvalidGrid(format!(
                "resolution {m} below the minimum of {MIN_RES} interior nodes"
            )));
        }

        let spacing: Vec<f64> = extent
            .iter()
            .zip(res)
            .map(|(l, m)| l / (*m as f64 + 1.0))
            .collect();
        let mut strides = Vec::with_capacity(dim);
        let mut len = 1usize;
        for m in res {
            strides.push(len);
            len *= m;
        }

        let mut grid = Grid {
            dim,
            extent: extent.to_vec(),
            res: res.to_vec(),
            spacing,
            strides,
            len,
            faces: Vec::new(),
        };
        grid.faces = grid.enumerate_faces();
        Ok(grid)
    }

    fn enumerate_faces(&self) -> Vec<BoundaryFace> {
        let mut faces = Vec::new();
        for axis in 0..self.dim {
            let measure: f64 = (0..self.dim)
                .filter(|b| *b != axis)
                .map(|b| self.spacing[b])
                .product();
            for (side, outward) in [(0usize, -1.0), (1usize, 1.0)] {
                let layer = if side == 0 { 0 } else { self.res[axis] - 1 };
                let inner = if side == 0 { 1 } else { self.res[axis] - 2 };
                for idx in 0..self.len {
                    let mi = self.multi_index(idx);
                    if mi[axis] != layer {
                        continue;
                    }
                    let mut position = self.position(idx);
                    position[axis] = if side == 0 { 0.0 } else { self.extent[axis] };
                    let mut mi2 = mi;
                    mi2[axis] = inner;
                    faces.push(BoundaryFace {
                        position,
                        interior: idx,
                        interior2: self.flat_index(&mi2[..self.dim]),
                        axis,
                        outward,
                        measure,
                    });
                }
            }
        }
        faces
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// `h^n`, the interior quadrature weight.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    /// Half-bandwidth of the stencil matrix in flat ordering.
    pub fn bandwidth(&self) -> usize {
        self.strides[self.dim - 1]
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut mi = [0; MAX_DIM];
        for a in 0..self.dim {
            mi[a] = idx % self.res[a];
            idx /= self.res[a];
        }
        mi
    }

    pub fn position(&self, idx: usize) -> Point {
        let mi = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = (mi[a] as f64 + 1.0) * self.spacing[a];
        }
        x
    }

    /// Interior neighbour of `idx` one step along `axis` (`dir = ±1`), or
    /// `None` when that step lands on the boundary.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i32) -> Option<usize> {
        let i = (idx / self.strides[axis]) % self.res[axis];
        if dir < 0 {
            (i > 0).then(|| idx - self.strides[axis])
        } else {
            (i + 1 < self.res[axis]).then(|| idx + self.strides[axis])
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.res == other.res && self.extent == other.extent
    }
}

pub(crate) fn check_same(a: &Grid, b: &Grid) -> Result<()> {
    if std::ptr::eq(a, b) || a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Complex samples on the interior nodes, optionally with boundary values.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
    boundary: Option<Vec<Complex64>>,
}

impl GridField {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(GridField {
            grid,
            values,
            boundary: None,
        })
    }

    pub fn with_boundary(
        grid: Arc<Grid>,
        values: Vec<Complex64>,
        boundary: Vec<Complex64>,
    ) -> Result<Self> {
        if boundary.len() != grid.num_faces() {
            return Err(Error::LengthMismatch {
                expected: grid.num_faces(),
                got: boundary.len(),
            });
        }
        let mut field = GridField::new(grid, values)?;
        field.boundary = Some(boundary);
        Ok(field)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        GridField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            boundary: None,
        }
    }

    pub fn from_real(grid: Arc<Grid>, values: &[f64]) -> Result<Self> {
        GridField::new(grid, values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
    }

    /// Samples `f` at every interior node and every boundary node.
    pub fn sample(grid: Arc<Grid>, f: impl Fn(&Point) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        let boundary = grid.faces().iter().map(|face| f(&face.position)).collect();
        GridField {
            grid,
            values,
            boundary: Some(boundary),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn boundary(&self) -> Option<&[Complex64]> {
        self.boundary.as_deref()
    }

    pub fn boundary_value(&self, face: usize) -> Complex64 {
        self.boundary
            .as_ref()
            .map_or(Complex64::new(0.0, 0.0), |b| b[face])
    }

    pub fn boundary_function(&self) -> BoundaryFunction {
        let values = match &self.boundary {
            Some(b) => b.clone(),
            None => vec![Complex64::new(0.0, 0.0); self.grid.num_faces()],
        };
        BoundaryFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }
}

/// Complex samples on the boundary faces.
#[derive(Debug, Clone)]
pub struct BoundaryFunction {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl BoundaryFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.num_faces() {
            return Err(Error::LengthMismatch {
                expected: grid.num_faces(),
                got: values.len(),
            });
        }
        Ok(BoundaryFunction { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.num_faces();
        BoundaryFunction {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn sample(grid: Arc<Grid>, f: impl Fn(&Point) -> Complex64) -> Self {
        let values = grid.faces().iter().map(|face| f(&face.position)).collect();
        BoundaryFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.faces())
            .map(|(v, f)| v.norm_sqr() * f.measure)
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &BoundaryFunction) -> Result<BoundaryFunction> {
        check_same(&self.grid, &other.grid)?;
        Ok(BoundaryFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// `sum u conj(v) h^n` over interior nodes.
pub fn inner_omega(u: &GridField, v: &GridField) -> Result<Complex64> {
    check_same(&u.grid, &v.grid)?;
    let s: Complex64 = u
        .values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| a * b.conj())
        .sum();
    Ok(s * u.grid.cell_volume())
}

/// `sum g conj(h) |face|` over boundary faces.
pub fn inner_gamma(g: &BoundaryFunction, h: &BoundaryFunction) -> Result<Complex64> {
    check_same(&g.grid, &h.grid)?;
    Ok(gamma_pairing(&g.grid, &g.values, &h.values))
}

pub(crate) fn gamma_pairing(grid: &Grid, g: &[Complex64], h: &[Complex64]) -> Complex64 {
    g.iter()
        .zip(h)
        .zip(grid.faces())
        .map(|((a, b), f)| a * b.conj() * f.measure)
        .sum()
}

pub fn lp_gamma_norm(g: &BoundaryFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("L^p norm needs p >= 1, got {p}")));
    }
    let s: f64 = g
        .values
        .iter()
        .zip(g.grid.faces())
        .map(|(v, f)| v.norm().powf(p) * f.measure)
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Five/seven point Laplacian `Δ_h u` on interior nodes; missing boundary
/// values count as zero.
pub fn apply_laplacian(u: &GridField) -> Vec<Complex64> {
    let grid = &u.grid;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..grid.dim() {
            let w = 1.0 / (grid.spacing[a] * grid.spacing[a]);
            acc -= u.values[idx] * (2.0 * w);
            if let Some(j) = grid.neighbor(idx, a, -1) {
                acc += u.values[j] * w;
            }
            if let Some(j) = grid.neighbor(idx, a, 1) {
                acc += u.values[j] * w;
            }
        }
        *o = acc;
    }
    if let Some(b) = &u.boundary {
        for (face, value) in grid.faces().iter().zip(b) {
            let h = grid.spacing[face.axis];
            out[face.interior] += value / (h * h);
        }
    }
    out
}
