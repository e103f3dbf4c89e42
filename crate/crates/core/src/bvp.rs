//! Dirichlet problems `(-Δ_h + q - z) u = 0` in the interior, `u = f` on the
//! boundary, at complex `z`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::linalg::BandedLu;
use crate::mesh::{apply_laplacian, check_same, BoundaryFunction, Grid, GridField};
use crate::schrodinger::{assemble_operator, PotentialField};
use crate::spectra::{boundary_trace, TraceScheme};

/// Minimum distance between `z` and a known eigenvalue.
pub const SPECTRUM_GUARD: f64 = 1e-8;

/// Factorization of `A_q - z` with zero Dirichlet values, reusable across
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct ShiftedOperator {
    grid: Arc<Grid>,
    potential: Vec<f64>,
    z: Complex64,
    lu: BandedLu<Complex64>,
}

impl ShiftedOperator {
    /// Factors `A_q - z`. When `spectrum` is supplied, `z` must keep
    /// [`SPECTRUM_GUARD`] distance from every listed eigenvalue.
    pub fn new(q: &PotentialField, z: Complex64, spectrum: Option<&[f64]>) -> Result<Self> {
        if let Some(spec) = spectrum {
            if let Some(nearest) = spec
                .iter()
                .cloned()
                .min_by(|a, b| (z - a).norm().total_cmp(&(z - b).norm()))
            {
                let distance = (z - nearest).norm();
                if distance < SPECTRUM_GUARD {
                    return Err(Error::NearSpectrum {
                        z,
                        nearest,
                        distance,
                    });
                }
            }
        }
        let op = assemble_operator(q);
        let lu = BandedLu::factor_shifted(op.matrix(), -z, q.grid().bandwidth())
            .map_err(|pivot| Error::Singular { pivot, z })?;
        Ok(ShiftedOperator {
            grid: q.grid().clone(),
            potential: q.values().to_vec(),
            z,
            lu,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    /// `(A_q - z)^{-1} rhs` with zero boundary values.
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        self.lu.solve(rhs)
    }

    /// `(-Δ_h + q - z) u` on interior nodes, boundary values of `u` included.
    pub fn residual(&self, u: &GridField) -> Vec<Complex64> {
        let lap = apply_laplacian(u);
        lap.iter()
            .zip(u.values())
            .zip(&self.potential)
            .map(|((l, v), q)| -l + v * (q - self.z))
            .collect()
    }

    /// Solves the Dirichlet problem with datum `f`.
    ///
    /// With an extension `f_ext` of `f` into the interior, the correction
    /// `v = u - f_ext` is solved from `(A_q - z) v = -(-Δ_h + q - z) f_ext`.
    /// Without one, the boundary values are moved to the right-hand side.
    pub fn solve_dirichlet(&self, f: &BoundaryFunction, f_ext: Option<&[Complex64]>) -> Result<BvpSolution> {
        check_same(&self.grid, f.grid())?;
        let (u_values, v) = match f_ext {
            Some(ext) => {
                let ext_field =
                    GridField::with_boundary(self.grid.clone(), ext.to_vec(), f.values().to_vec())?;
                let rhs: Vec<Complex64> = self.residual(&ext_field).iter().map(|r| -r).collect();
                let v = self.solve(&rhs);
                let u: Vec<Complex64> = ext.iter().zip(&v).map(|(a, b)| a + b).collect();
                (u, Some(GridField::new(self.grid.clone(), v)?))
            }
            None => (self.solve(&self.lift(f)), None),
        };
        let u = GridField::with_boundary(self.grid.clone(), u_values, f.values().to_vec())?;
        let res = self.residual(&u);
        let residual = res.iter().map(|r| r.norm_sqr()).sum::<f64>().sqrt();
        Ok(BvpSolution {
            z: self.z,
            datum: f.clone(),
            u,
            v,
            residual,
        })
    }

    /// Interior right-hand side carrying the boundary values of the stencil.
    pub fn lift(&self, f: &BoundaryFunction) -> Vec<Complex64> {
        let mut rhs = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (face, value) in self.grid.faces().iter().zip(f.values()) {
            let h = self.grid.spacing()[face.axis];
            rhs[face.interior] += value / (h * h);
        }
        rhs
    }
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub z: Complex64,
    pub datum: BoundaryFunction,
    /// Solution with boundary values equal to the datum.
    pub u: GridField,
    /// `u - f_ext` when an interior extension was supplied.
    pub v: Option<GridField>,
    /// Euclidean norm of the interior residual.
    pub residual: f64,
}

pub fn solve_dirichlet(
    q: &PotentialField,
    z: Complex64,
    f: &BoundaryFunction,
    f_ext: Option<&[Complex64]>,
) -> Result<BvpSolution> {
    ShiftedOperator::new(q, z, None)?.solve_dirichlet(f, f_ext)
}

/// Outward normal derivative of the solution, using its boundary values.
pub fn normal_derivative(sol: &BvpSolution, scheme: TraceScheme) -> BoundaryFunction {
    boundary_trace(&sol.u, scheme)
}

/// One row of a resolvent-correction decay table.
#[derive(Debug, Clone, Copy)]
pub struct DecayRow {
    pub tau: f64,
    /// `|(A_q - z)^{-1} (q f)|` at `z = (tau + i)^2`.
    pub correction_norm: f64,
    /// `|u - f_ext|` from the full Dirichlet solve (includes the grid's
    /// dispersion error on the probe).
    pub full_norm: f64,
}

#[derive(Debug, Clone)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Log-log slope of `correction_norm` against `tau`.
    pub slope: f64,
    pub full_slope: f64,
}

/// Measures `|v|` for the probe family `extension(tau)` (interior and
/// boundary samples of a free exponential solution at energy `(tau + i)^2`).
pub fn shift_solution_norm_decay(
    q: &PotentialField,
    taus: &[f64],
    extension: impl Fn(f64) -> Result<GridField>,
) -> Result<DecayTable> {
    if taus.len() < 2 || !taus.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument(
            "decay table needs at least two ascending tau values".into(),
        ));
    }
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let z = Complex64::new(tau, 1.0).powi(2);
        let ext = extension(tau)?;
        check_same(q.grid(), ext.grid())?;
        let shifted = ShiftedOperator::new(q, z, None)?;
        let qf: Vec<Complex64> = ext
            .values()
            .iter()
            .zip(q.values())
            .map(|(f, qi)| -f * qi)
            .collect();
        let v = GridField::new(q.grid().clone(), shifted.solve(&qf))?;
        let sol = shifted.solve_dirichlet(&ext.boundary_function(), Some(ext.values()))?;
        rows.push(DecayRow {
            tau,
            correction_norm: v.norm(),
            full_norm: sol.v.expect("extension supplied").norm(),
        });
    }
    let t: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.correction_norm).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.full_norm).collect();
    Ok(DecayTable {
        slope: loglog_slope(&t, &c),
        full_slope: loglog_slope(&t, &f),
        rows,
    })
}
