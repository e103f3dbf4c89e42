//! Fourier samples of `q₁ - q₂` from probe functionals and truncated Fourier
//! synthesis back onto the grid.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bvp::ShiftedOperator;
use crate::container::{Decoder, Encoder, RecordType};
use crate::error::{Error, FormatError, Result};
use crate::isozaki::{check_tau, make_probe, s_direct_factored, s_series_diff, EtaRule, Route};
use crate::mesh::{check_same, Grid, GridField};
use crate::schrodinger::PotentialField;
use crate::spectra::{SpectralDataset, TraceScheme};

/// Frequencies `ξ = (2π/L_a) j_a`, `j ∈ {-M..M}^n`, with `|ξ| ≤ ξ_max`,
/// listed with `j_0` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<Vec<f64>>,
    negation: Vec<usize>,
}

impl FrequencyGrid {
    pub fn new(grid: &Grid, m: usize, xi_max: f64) -> Result<Self> {
        if !(xi_max >= 0.0) {
            return Err(Error::InvalidArgument(format!("xi_max {xi_max} must be non-negative")));
        }
        let dim = grid.dim();
        let side = 2 * m + 1;
        let count = side.pow(dim as u32);
        let points = (0..count)
            .filter_map(|mut code| {
                let xi: Vec<f64> = (0..dim)
                    .map(|a| {
                        let j = (code % side) as f64 - m as f64;
                        code /= side;
                        2.0 * PI * j / grid.extent()[a]
                    })
                    .collect();
                let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                (norm <= xi_max * (1.0 + 1e-12)).then_some(xi)
            })
            .collect();
        FrequencyGrid::from_points(points)
    }

    /// Explicit frequency list; must contain `0` and be closed under negation.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.len());
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidArgument("frequency list is empty or ragged".into()));
        }
        let key = |p: &[f64]| -> Vec<u64> { p.iter().map(|v| (v + 0.0).to_bits()).collect() };
        let lookup: HashMap<Vec<u64>, usize> =
            points.iter().enumerate().map(|(i, p)| (key(p), i)).collect();
        let negation = points
            .iter()
            .map(|p| {
                let neg: Vec<f64> = p.iter().map(|v| -v).collect();
                lookup.get(&key(&neg)).copied()
            })
            .collect::<Option<Vec<usize>>>()
            .ok_or_else(|| Error::InvalidArgument("frequency grid is not closed under negation".into()))?;
        if !points.iter().any(|p| p.iter().all(|v| *v == 0.0)) {
            return Err(Error::InvalidArgument("frequency grid must contain zero".into()));
        }
        Ok(FrequencyGrid { points, negation })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Index of `-ξ_i`.
    pub fn negation(&self, i: usize) -> usize {
        self.negation[i]
    }

    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// `Σ (q₁ - q₂)(x) e^{-iξ·x} h^n` over interior nodes.
pub fn oracle_fourier(q1: &PotentialField, q2: &PotentialField, xi: &[f64]) -> Result<Complex64> {
    let diff = q1.difference(q2)?;
    oracle_of_samples(q1.grid(), &diff, xi)
}

pub fn oracle_of_samples(grid: &Grid, values: &[f64], xi: &[f64]) -> Result<Complex64> {
    if xi.len() != grid.dim() || values.len() != grid.len() {
        return Err(Error::InvalidArgument("frequency or sample length does not match the grid".into()));
    }
    let s: Complex64 = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| {
            let x = grid.position(i);
            let phase: f64 = xi.iter().enumerate().map(|(a, k)| k * x[a]).sum();
            Complex64::from_polar(*v, -phase)
        })
        .sum();
    Ok(s * grid.cell_volume())
}

/// Inputs for the Fourier samples.
#[derive(Debug, Clone, Copy)]
pub enum SampleSource<'a> {
    /// Dirichlet solves with both potentials.
    Direct {
        q1: &'a PotentialField,
        q2: &'a PotentialField,
    },
    /// Boundary spectral data only, truncated at `k` pairs.
    Series {
        ds1: &'a SpectralDataset,
        ds2: &'a SpectralDataset,
        k: usize,
    },
}

impl SampleSource<'_> {
    fn grid(&self) -> &Arc<Grid> {
        match self {
            SampleSource::Direct { q1, .. } => q1.grid(),
            SampleSource::Series { ds1, .. } => ds1.grid(),
        }
    }

    fn route(&self) -> Route {
        match self {
            SampleSource::Direct { .. } => Route::Direct,
            SampleSource::Series { .. } => Route::Series,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub scheme: TraceScheme,
    pub eta: EtaRule,
    pub force: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            scheme: TraceScheme::Flux1,
            eta: EtaRule::Deterministic,
            force: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FourierSamples {
    /// Raw `S₁ - S₂` per frequency.
    pub raw: Vec<Complex64>,
    /// `(s(ξ) + conj(s(-ξ))) / 2`.
    pub symmetrized: Vec<Complex64>,
    /// `max_ξ |s(ξ) - conj(s(-ξ))| / 2` before symmetrization.
    pub asymmetry: f64,
}

pub fn fourier_sample(
    source: SampleSource,
    fgrid: &FrequencyGrid,
    tau: f64,
    opts: &SampleOptions,
) -> Result<FourierSamples> {
    let grid = source.grid().clone();
    if fgrid.dim() != grid.dim() {
        return Err(Error::InvalidArgument("frequency grid dimension differs from the grid".into()));
    }
    let need = fgrid.max_norm().max(1.0);
    if tau < need {
        return Err(Error::InvalidArgument(format!(
            "tau = {tau} must be at least max(1, xi_max) = {need}"
        )));
    }
    check_tau(tau, &grid, opts.force)?;
    let factors = match source {
        SampleSource::Direct { q1, q2 } => {
            check_same(q1.grid(), q2.grid())?;
            let z = Complex64::new(tau, 1.0).powi(2);
            Some((ShiftedOperator::new(q1, z, None)?, ShiftedOperator::new(q2, z, None)?))
        }
        SampleSource::Series { .. } => None,
    };
    let raw = fgrid
        .points()
        .par_iter()
        .map(|xi| {
            let probe = make_probe(xi, tau, &opts.eta, &grid)?;
            match (&source, &factors) {
                (SampleSource::Direct { .. }, Some((a, b))) => Ok(s_direct_factored(a, &probe, opts.scheme)?.s
                    - s_direct_factored(b, &probe, opts.scheme)?.s),
                (SampleSource::Series { ds1, ds2, k }, _) => Ok(s_series_diff(ds1, ds2, &probe, *k)?.0.s),
                _ => unreachable!("direct sources always carry factorizations"),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(symmetrize(fgrid, raw))
}

pub fn symmetrize(fgrid: &FrequencyGrid, raw: Vec<Complex64>) -> FourierSamples {
    let mut asymmetry = 0.0f64;
    let symmetrized = (0..raw.len())
        .map(|i| {
            let partner = raw[fgrid.negation(i)].conj();
            asymmetry = asymmetry.max(0.5 * (raw[i] - partner).norm());
            0.5 * (raw[i] + partner)
        })
        .collect();
    FourierSamples {
        raw,
        symmetrized,
        asymmetry,
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub values: Vec<f64>,
    /// Largest imaginary part dropped from the synthesized field.
    pub imag_residue: f64,
}

/// `(1/|Ω|) Σ_ξ q̂(ξ) e^{iξ·x}` on the interior nodes.
pub fn invert_fourier(samples: &[Complex64], fgrid: &FrequencyGrid, grid: &Grid) -> Result<Synthesis> {
    if samples.len() != fgrid.len() {
        return Err(Error::LengthMismatch {
            expected: fgrid.len(),
            got: samples.len(),
        });
    }
    if fgrid.dim() != grid.dim() {
        return Err(Error::InvalidArgument("frequency grid dimension differs from the grid".into()));
    }
    let inv_vol = 1.0 / grid.volume();
    let complex: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.position(i);
            let s: Complex64 = fgrid
                .points()
                .iter()
                .zip(samples)
                .filter(|(_, s)| **s != Complex64::new(0.0, 0.0))
                .map(|(xi, s)| {
                    let phase: f64 = xi.iter().enumerate().map(|(a, k)| k * x[a]).sum();
                    s * Complex64::from_polar(1.0, phase)
                })
                .sum();
            s * inv_vol
        })
        .collect();
    Ok(Synthesis {
        imag_residue: complex.iter().map(|v| v.im.abs()).fold(0.0, f64::max),
        values: complex.iter().map(|v| v.re).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `|field - truth| / |truth|`, or the absolute error when the truth is
    /// zero.
    pub rel_l2: Option<f64>,
    pub max_err: Option<f64>,
    /// Largest imaginary part of the field.
    pub asymmetry: f64,
}

pub fn error_metrics(field: &GridField, truth: Option<&GridField>) -> Result<Metrics> {
    let asymmetry = field.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let Some(truth) = truth else {
        return Ok(Metrics {
            rel_l2: None,
            max_err: None,
            asymmetry,
        });
    };
    check_same(field.grid(), truth.grid())?;
    let diff: Vec<Complex64> = field.values().iter().zip(truth.values()).map(|(a, b)| a - b).collect();
    let max_err = diff.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = GridField::new(field.grid().clone(), diff)?.norm();
    let t = truth.norm();
    Ok(Metrics {
        rel_l2: Some(if t > 0.0 { err / t } else { err }),
        max_err: Some(max_err),
        asymmetry,
    })
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub grid: Arc<Grid>,
    pub fgrid: FrequencyGrid,
    /// Symmetrized samples fed to the synthesis.
    pub samples: Vec<Complex64>,
    pub sample_asymmetry: f64,
    pub tau: f64,
    pub route: Route,
    /// Real estimate of `q₁ - q₂` on the interior nodes.
    pub field: Vec<f64>,
    pub imag_residue: f64,
    pub metrics: Metrics,
}

pub fn reconstruct(
    source: SampleSource,
    fgrid: &FrequencyGrid,
    tau: f64,
    opts: &SampleOptions,
    truth: Option<&[f64]>,
) -> Result<ReconstructionResult> {
    let grid = source.grid().clone();
    let samples = fourier_sample(source, fgrid, tau, opts)?;
    let synth = invert_fourier(&samples.symmetrized, fgrid, &grid)?;
    let field = GridField::from_real(grid.clone(), &synth.values)?;
    let truth_field = truth.map(|t| GridField::from_real(grid.clone(), t)).transpose()?;
    let mut metrics = error_metrics(&field, truth_field.as_ref())?;
    metrics.asymmetry = samples.asymmetry;
    Ok(ReconstructionResult {
        grid,
        fgrid: fgrid.clone(),
        samples: samples.symmetrized,
        sample_asymmetry: samples.asymmetry,
        tau,
        route: source.route(),
        field: synth.values,
        imag_residue: synth.imag_residue,
        metrics,
    })
}

impl ReconstructionResult {
    /// Rows `xi_0,..,xi_{n-1},re_qhat,im_qhat`.
    pub fn samples_csv(&self) -> String {
        let dim = self.fgrid.dim();
        let mut out: String = (0..dim).map(|a| format!("xi_{a},")).collect();
        out.push_str("re_qhat,im_qhat\n");
        for (xi, s) in self.fgrid.points().iter().zip(&self.samples) {
            for v in xi {
                write!(out, "{v},").expect("writing to a string");
            }
            writeln!(out, "{},{}", s.re, s.im).expect("writing to a string");
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(RecordType::Reconstruction);
        crate::spectra::io::encode_grid(&mut enc, &self.grid);
        enc.f64(self.tau);
        enc.u8(match self.route {
            Route::Direct => 0,
            Route::Series => 1,
        });
        enc.u32(self.fgrid.len() as u32);
        for (xi, s) in self.fgrid.points().iter().zip(&self.samples) {
            for v in xi {
                enc.f64(*v);
            }
            enc.c64(*s);
        }
        for v in &self.field {
            enc.f64(*v);
        }
        enc.f64(self.sample_asymmetry);
        enc.f64(self.imag_residue);
        enc.f64(self.metrics.rel_l2.unwrap_or(f64::NAN));
        enc.f64(self.metrics.max_err.unwrap_or(f64::NAN));
        enc.f64(self.metrics.asymmetry);
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::open(bytes, RecordType::Reconstruction)?;
        let grid = crate::spectra::io::decode_grid(&mut dec)?;
        let tau = dec.f64()?;
        let route = match dec.u8()? {
            0 => Route::Direct,
            1 => Route::Series,
            tag => return Err(FormatError::UnknownTag { what: "route", tag }.into()),
        };
        let count = dec.u32()? as usize;
        let mut points = Vec::with_capacity(count);
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            points.push((0..grid.dim()).map(|_| dec.f64()).collect::<std::result::Result<Vec<_>, _>>()?);
            samples.push(dec.c64()?);
        }
        let field = (0..grid.len()).map(|_| dec.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
        let sample_asymmetry = dec.f64()?;
        let imag_residue = dec.f64()?;
        let opt = |v: f64| (!v.is_nan()).then_some(v);
        let rel_l2 = opt(dec.f64()?);
        let max_err = opt(dec.f64()?);
        let asymmetry = dec.f64()?;
        dec.finish()?;
        let fgrid = FrequencyGrid::from_points(points)
            .map_err(|e| FormatError::GridMetadata(e.to_string()))?;
        Ok(ReconstructionResult {
            grid,
            fgrid,
            samples,
            sample_asymmetry,
            tau,
            route,
            field,
            imag_residue,
            metrics: Metrics {
                rel_l2,
                max_err,
                asymmetry,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ReconstructionResult::decode(&std::fs::read(path)?)
    }
}
