use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mesh::BoundaryFunction;

use super::{Provenance, SpectralDataset};

/// Ways to move a dataset away from the exact boundary spectral data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbMode {
    /// `lambda_k + eps / k`: differences tend to zero.
    EigenShiftDecaying,
    /// `lambda_k + eps` for every `k`.
    EigenShiftConstant,
    /// `psi_k + eps (sqrt(6)/pi) / k * n_k` with unit-norm noise `n_k`; the
    /// trace differences have total `l^2` norm `eps`.
    TraceNoiseL2,
    /// `psi_k + eps * n_k`: trace differences do not decay.
    TraceNoiseConstant,
    /// Zeroes the traces of the first `round(magnitude)` pairs.
    DropLeadingJ,
}

impl PerturbMode {
    pub const ALL: [PerturbMode; 5] = [
        PerturbMode::EigenShiftDecaying,
        PerturbMode::EigenShiftConstant,
        PerturbMode::TraceNoiseL2,
        PerturbMode::TraceNoiseConstant,
        PerturbMode::DropLeadingJ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbMode::EigenShiftDecaying => "eigen_shift_decaying",
            PerturbMode::EigenShiftConstant => "eigen_shift_constant",
            PerturbMode::TraceNoiseL2 => "trace_noise_l2",
            PerturbMode::TraceNoiseConstant => "trace_noise_constant",
            PerturbMode::DropLeadingJ => "drop_leading_j",
        }
    }

    /// Whether the perturbed data still has vanishing eigenvalue differences
    /// and square-summable trace differences.
    pub fn keeps_asymptotics(self) -> bool {
        matches!(
            self,
            PerturbMode::EigenShiftDecaying | PerturbMode::TraceNoiseL2 | PerturbMode::DropLeadingJ
        )
    }
}

impl FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PerturbMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown perturbation mode {s:?}")))
    }
}

fn unit_noise(template: &BoundaryFunction, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut n: Vec<Complex64> = template
        .values()
        .iter()
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let norm = BoundaryFunction::new(template.grid().clone(), n.clone())
        .expect("face-sized")
        .norm();
    n.iter_mut().for_each(|v| *v /= norm);
    n
}

pub fn perturb_dataset(ds: &SpectralDataset, mode: PerturbMode, magnitude: f64, seed: u64) -> Result<SpectralDataset> {
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "perturbation magnitude {magnitude} must be finite and non-negative"
        )));
    }
    let mut eigenvalues = ds.eigenvalues().to_vec();
    let mut traces = ds.traces().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        PerturbMode::EigenShiftDecaying => {
            for (k, l) in eigenvalues.iter_mut().enumerate() {
                *l += magnitude / (k + 1) as f64;
            }
        }
        PerturbMode::EigenShiftConstant => eigenvalues.iter_mut().for_each(|l| *l += magnitude),
        PerturbMode::TraceNoiseL2 | PerturbMode::TraceNoiseConstant => {
            for (k, t) in traces.iter_mut().enumerate() {
                let noise = unit_noise(t, &mut rng);
                let scale = match mode {
                    PerturbMode::TraceNoiseL2 => magnitude * 6f64.sqrt() / PI / (k + 1) as f64,
                    _ => magnitude,
                };
                for (v, n) in t.values_mut().iter_mut().zip(noise) {
                    *v += n * scale;
                }
            }
        }
        PerturbMode::DropLeadingJ => {
            let j = magnitude.round() as usize;
            if j > ds.len() {
                return Err(Error::InvalidArgument(format!(
                    "cannot drop {j} traces from a dataset of {} pairs",
                    ds.len()
                )));
            }
            for t in &mut traces[..j] {
                t.values_mut().iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            }
        }
    }
    SpectralDataset::new(ds.grid().clone(), eigenvalues, traces, ds.scheme(), Provenance::Perturbed)
}
