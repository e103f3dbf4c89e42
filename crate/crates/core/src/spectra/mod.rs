//! Eigenpairs, boundary traces, and boundary spectral datasets.

pub(crate) mod io;
mod perturb;

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::median;
use crate::linalg::{dense_symmetric, shift_invert_lowest, KrylovOptions, RawEigen};
use crate::mesh::{gamma_pairing, BoundaryFunction, Grid, GridField};
use crate::schrodinger::{assemble_operator, DiscreteOperator, PotentialField};

pub use io::{decode_dataset, encode_dataset, load_dataset, save_dataset};
pub use perturb::{perturb_dataset, PerturbMode};

/// Normal-derivative discretization on boundary faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceScheme {
    /// `(u_b - u_in) / h`; partners the discrete Green identity exactly.
    #[default]
    Flux1,
    /// `(3 u_b - 4 u_in + u_in2) / (2h)`; second-order accurate.
    OneSided2,
}

impl TraceScheme {
    pub fn tag(self) -> u8 {
        match self {
            TraceScheme::Flux1 => 0,
            TraceScheme::OneSided2 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(TraceScheme::Flux1),
            1 => Some(TraceScheme::OneSided2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Computed,
    Perturbed,
    Loaded,
}

impl Provenance {
    pub fn tag(self) -> u8 {
        match self {
            Provenance::Computed => 0,
            Provenance::Perturbed => 1,
            Provenance::Loaded => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Provenance::Computed),
            1 => Some(Provenance::Perturbed),
            2 => Some(Provenance::Loaded),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Residual tolerance relative to `1 + |lambda|`.
    pub tol: f64,
    /// Operators with at most this many unknowns use the dense solver.
    pub dense_threshold: usize,
    pub krylov: KrylovOptions,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-9,
            dense_threshold: 4096,
            krylov: KrylovOptions::default(),
        }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        EigenOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Lowest eigenpairs of a discrete operator. Eigenvectors are real and
/// orthonormal under the discrete `L^2(Omega)` product.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    grid: Arc<Grid>,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl Eigensystem {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k]
    }

    pub fn field(&self, k: usize) -> GridField {
        GridField::from_real(self.grid.clone(), &self.vectors[k]).expect("grid-sized vector")
    }

    /// `<u, phi_k>`.
    pub fn coefficient(&self, u: &[Complex64], k: usize) -> Complex64 {
        let s: Complex64 = u.iter().zip(&self.vectors[k]).map(|(a, b)| a * b).sum();
        s * self.grid.cell_volume()
    }

    /// Flux traces of every eigenvector.
    pub fn traces(&self, scheme: TraceScheme) -> Vec<BoundaryFunction> {
        (0..self.len())
            .map(|k| boundary_trace(&self.field(k), scheme))
            .collect()
    }
}

/// Relative gap below which neighbouring eigenvalues form one cluster.
const CLUSTER_GAP: f64 = 1e-11;

pub fn compute_eigenpairs(op: &DiscreteOperator, k: usize, opts: &EigenOptions) -> Result<Eigensystem> {
    let n = op.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs from an operator with {n} unknowns"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let a = op.matrix();
    let mut raw = if n <= opts.dense_threshold {
        dense_symmetric(a).map_err(|reason| Error::NotConverged { index: 0, reason })?
    } else {
        // A few extra pairs so a cluster straddling index k is seen whole.
        let want = (k + 8).min(n);
        shift_invert_lowest(a, want, opts.tol, &opts.krylov).map_err(|f| Error::NotConverged {
            index: f.index,
            reason: f.reason,
        })?
    };
    // Convergence is judged on the solver's own basis; the canonical basis of
    // a cluster differs from exact eigenvectors by at most the cluster spread.
    for (idx, (lambda, x)) in raw.values.iter().zip(&raw.vectors).take(k).enumerate() {
        let ax = a.mul_real(x);
        let res = ax
            .iter()
            .zip(x)
            .map(|(p, q)| (p - lambda * q).powi(2))
            .sum::<f64>()
            .sqrt();
        if !(res <= opts.tol * (1.0 + lambda.abs())) {
            return Err(Error::NotConverged {
                index: idx,
                reason: format!("residual {res:.3e} exceeds tolerance at lambda {lambda:.6e}"),
            });
        }
    }
    canonicalize(&mut raw);
    raw.values.truncate(k);
    raw.vectors.truncate(k);

    let scale = 1.0 / op.grid().cell_volume().sqrt();
    let vectors = raw
        .vectors
        .into_iter()
        .map(|x| x.into_iter().map(|v| v * scale).collect())
        .collect();
    Ok(Eigensystem {
        grid: op.grid().clone(),
        values: raw.values,
        vectors,
    })
}

/// Makes the basis reproducible: inside each degenerate cluster the vectors
/// are rebuilt by Gram-Schmidt on the cluster projector's columns in index
/// order, then every vector gets a positive first significant component.
fn canonicalize(raw: &mut RawEigen) {
    let m = raw.values.len();
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m
            && raw.values[end] - raw.values[end - 1] < CLUSTER_GAP * (1.0 + raw.values[end].abs())
        {
            end += 1;
        }
        if end - start > 1 {
            let basis = cluster_basis(&raw.vectors[start..end]);
            for (slot, v) in raw.vectors[start..end].iter_mut().zip(basis) {
                *slot = v;
            }
        }
        start = end;
    }
    for x in raw.vectors.iter_mut() {
        let peak = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if let Some(first) = x.iter().find(|v| v.abs() > 1e-8 * peak) {
            if *first < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }
}

fn cluster_basis(cluster: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = cluster.len();
    let n = cluster[0].len();
    let threshold = 1e-4 * (d as f64 / n as f64).sqrt();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..n {
        if out.len() == d {
            break;
        }
        // P e_i = sum_j x_j x_j[i]
        let mut w = vec![0.0; n];
        for x in cluster {
            let c = x[i];
            w.iter_mut().zip(x).for_each(|(wi, xi)| *wi += c * xi);
        }
        for _ in 0..2 {
            for v in &out {
                let c: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let nrm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm > threshold {
            w.iter_mut().for_each(|v| *v /= nrm);
            out.push(w);
        }
    }
    if out.len() < d {
        // Cannot happen for an orthonormal cluster; keep the solver basis.
        return cluster.to_vec();
    }
    out
}

/// Outward normal-derivative trace of `u` using its boundary values (zero
/// where absent).
pub fn boundary_trace(u: &GridField, scheme: TraceScheme) -> BoundaryFunction {
    let grid = u.grid();
    let vals = u.values();
    let values = grid
        .faces()
        .iter()
        .enumerate()
        .map(|(i, face)| {
            let h = grid.spacing()[face.axis];
            let b = u.boundary_value(i);
            match scheme {
                TraceScheme::Flux1 => (b - vals[face.interior]) / h,
                TraceScheme::OneSided2 => {
                    (b * 3.0 - vals[face.interior] * 4.0 + vals[face.interior2]) / (2.0 * h)
                }
            }
        })
        .collect();
    BoundaryFunction::new(grid.clone(), values).expect("one value per face")
}

/// Ordered eigenvalues with the boundary traces of their eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDataset {
    grid: Arc<Grid>,
    eigenvalues: Vec<f64>,
    traces: Vec<BoundaryFunction>,
    scheme: TraceScheme,
    pub provenance: Provenance,
}

impl SpectralDataset {
    pub fn new(
        grid: Arc<Grid>,
        eigenvalues: Vec<f64>,
        traces: Vec<BoundaryFunction>,
        scheme: TraceScheme,
        provenance: Provenance,
    ) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidArgument("a dataset needs at least one pair".into()));
        }
        if eigenvalues.len() != traces.len() {
            return Err(Error::LengthMismatch {
                expected: eigenvalues.len(),
                got: traces.len(),
            });
        }
        for t in &traces {
            crate::mesh::check_same(&grid, t.grid())?;
        }
        Ok(SpectralDataset {
            grid,
            eigenvalues,
            traces,
            scheme,
            provenance,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn traces(&self) -> &[BoundaryFunction] {
        &self.traces
    }

    pub fn trace(&self, k: usize) -> &BoundaryFunction {
        &self.traces[k]
    }

    pub fn scheme(&self) -> TraceScheme {
        self.scheme
    }

    /// True when all `K` pairs of the grid operator are present.
    pub fn is_complete(&self) -> bool {
        self.len() == self.grid.len()
    }

    /// `<g, psi_k>_Gamma` for every `k < count`.
    pub fn pairings(&self, g: &[Complex64], count: usize) -> Vec<Complex64> {
        self.traces[..count]
            .iter()
            .map(|t| gamma_pairing(&self.grid, g, t.values()))
            .collect()
    }

    /// `C = max_k |psi_k| / (1 + |lambda_k|)`.
    pub fn trace_bound_constant(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }

    fn ratios(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.traces)
            .map(|(l, t)| t.norm() / (1.0 + l.abs()))
            .collect()
    }

    /// Same pairs on the same grid: identical eigenvalues and traces.
    pub fn same_data(&self, other: &SpectralDataset) -> bool {
        self.grid.same_shape(&other.grid)
            && self.scheme == other.scheme
            && self.eigenvalues.len() == other.eigenvalues.len()
            && self
                .eigenvalues
                .iter()
                .zip(&other.eigenvalues)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.traces.iter().zip(&other.traces).all(|(a, b)| {
                a.values().iter().zip(b.values()).all(|(x, y)| {
                    x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()
                })
            })
    }
}

pub fn build_dataset(q: &PotentialField, k: usize, scheme: TraceScheme, opts: &EigenOptions) -> Result<SpectralDataset> {
    let op = assemble_operator(q);
    let eig = compute_eigenpairs(&op, k, opts)?;
    let traces = eig.traces(scheme);
    SpectralDataset::new(op.grid().clone(), eig.values, traces, scheme, Provenance::Computed)
}

#[derive(Debug, Clone)]
pub struct TraceBoundReport {
    /// `|psi_k| / (1 + |lambda_k|)` in eigenvalue order.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub median: f64,
    /// Median over the highest-index tenth of the pairs.
    pub top_decile_median: f64,
    /// Set when the top-decile median exceeds three times the median.
    pub flagged: bool,
}

pub fn verify_trace_bound(ds: &SpectralDataset) -> Result<TraceBoundReport> {
    if ds.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "trace bound check needs at least 10 pairs, got {}",
            ds.len()
        )));
    }
    let ratios = ds.ratios();
    let decile = ds.len().div_ceil(10);
    let med = median(&ratios);
    let top = median(&ratios[ratios.len() - decile..]);
    Ok(TraceBoundReport {
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        median: med,
        top_decile_median: top,
        flagged: top > 3.0 * med,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{inner_gamma, inner_omega};
    use crate::schrodinger::{sample_potential, PotentialKind, PotentialSpec};
    use std::f64::consts::PI;

    fn grid(dim: usize, m: usize) -> Arc<Grid> {
        Arc::new(Grid::new(dim, &vec![1.0; dim], &vec![m; dim]).unwrap())
    }

    fn bump(g: &Arc<Grid>) -> PotentialField {
        let c = vec![0.4; g.dim()];
        sample_potential(
            &PotentialSpec::new(PotentialKind::GaussianBump {
                amplitude: 4.0,
                center: c,
                width: 0.15,
            }),
            g,
        )
        .unwrap()
    }

    #[test]
    fn closed_form_interval_spectrum() {
        let g = grid(1, 3);
        let op = assemble_operator(&PotentialField::zero(g));
        let e = compute_eigenpairs(&op, 3, &EigenOptions::default()).unwrap();
        for (k, l) in e.values().iter().enumerate() {
            let exact = 64.0 * (((k + 1) as f64) * PI / 8.0).sin().powi(2);
            assert!((l - exact).abs() < 1e-12, "{l} vs {exact}");
        }
        assert!((e.values()[1] - 32.0).abs() < 1e-12);
    }

    #[test]
    fn interval_first_trace_matches_closed_form() {
        let m = 7;
        let g = grid(1, m);
        let h = g.spacing()[0];
        let e = compute_eigenpairs(&assemble_operator(&PotentialField::zero(g.clone())), 1, &EigenOptions::default()).unwrap();
        // Normalized sine sample: sqrt(2) sin(pi x) has unit discrete norm.
        let phi1 = 2f64.sqrt() * (PI * h).sin();
        let psi = boundary_trace(&e.field(0), TraceScheme::Flux1);
        assert!((psi.values()[0].re + phi1 / h).abs() < 1e-10);
        assert!((psi.values()[1].re + phi1 / h).abs() < 1e-10);
        let ip = inner_gamma(&psi, &psi).unwrap().re;
        assert!((ip - 2.0 * (phi1 / h).powi(2)).abs() < 1e-8);
    }

    #[test]
    fn square_degeneracy_and_orthonormality() {
        let g = grid(2, 10);
        let e = compute_eigenpairs(&assemble_operator(&PotentialField::zero(g)), 4, &EigenOptions::default()).unwrap();
        let v = e.values();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert!((v[1] - v[2]).abs() < 1e-9);
        for i in 0..4 {
            for j in 0..4 {
                let ip = inner_omega(&e.field(i), &e.field(j)).unwrap().re;
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn canonical_basis_is_solver_independent() {
        let g = grid(2, 12);
        let op = assemble_operator(&PotentialField::zero(g));
        let dense = compute_eigenpairs(&op, 6, &EigenOptions::default()).unwrap();
        let krylov_opts = EigenOptions {
            dense_threshold: 0,
            ..EigenOptions::with_tol(1e-10)
        };
        let krylov = compute_eigenpairs(&op, 6, &krylov_opts).unwrap();
        for k in 0..6 {
            let d = dense
                .vector(k)
                .iter()
                .zip(krylov.vector(k))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(d < 1e-6, "pair {k}: {d}");
        }
    }

    #[test]
    fn sign_rule_holds() {
        let g = grid(2, 6);
        let e = compute_eigenpairs(&assemble_operator(&bump(&g)), 36, &EigenOptions::default()).unwrap();
        for k in 0..e.len() {
            let x = e.vector(k);
            let peak = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(*x.iter().find(|v| v.abs() > 1e-8 * peak).unwrap() > 0.0);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let g = grid(1, 4);
        let op = assemble_operator(&PotentialField::zero(g));
        assert!(compute_eigenpairs(&op, 0, &EigenOptions::default()).is_err());
        assert!(compute_eigenpairs(&op, 5, &EigenOptions::default()).is_err());
        assert!(compute_eigenpairs(&op, 2, &EigenOptions::with_tol(0.0)).is_err());
    }

    #[test]
    fn onesided_trace_is_exact_for_linear_fields() {
        let g = grid(2, 5);
        let u = GridField::sample(g, |x| Complex64::new(x[0], 0.0));
        let psi = boundary_trace(&u, TraceScheme::OneSided2);
        for (face, v) in u.grid().faces().iter().zip(psi.values()) {
            let expect = if face.axis == 0 { face.outward } else { 0.0 };
            assert!((v.re - expect).abs() < 1e-12);
        }
        let zero = boundary_trace(&GridField::zeros(u.grid().clone()), TraceScheme::OneSided2);
        assert!(zero.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn distinct_eigenpairs_are_orthogonal() {
        let g = grid(2, 7);
        let e = compute_eigenpairs(&assemble_operator(&bump(&g)), 10, &EigenOptions::default()).unwrap();
        for j in 0..10 {
            for k in 0..10 {
                let ip = inner_omega(&e.field(j), &e.field(k)).unwrap();
                assert!(((e.values()[j] - e.values()[k]) * ip).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn shift_covariance() {
        let g = grid(2, 6);
        let q = bump(&g);
        let a = build_dataset(&q, 8, TraceScheme::Flux1, &EigenOptions::default()).unwrap();
        let b = build_dataset(&q.shifted(5.0), 8, TraceScheme::Flux1, &EigenOptions::default()).unwrap();
        for k in 0..8 {
            assert!((b.eigenvalues()[k] - a.eigenvalues()[k] - 5.0).abs() < 1e-9);
            let d = a.trace(k).sub(b.trace(k)).unwrap().norm();
            assert!(d < 1e-7 * a.trace(k).norm(), "{k}: {d}");
        }
    }

    #[test]
    fn full_basis_parseval() {
        let g = grid(2, 6);
        let e = compute_eigenpairs(&assemble_operator(&bump(&g)), 36, &EigenOptions::default()).unwrap();
        let u: Vec<Complex64> = (0..36).map(|i| Complex64::new((i as f64).sin(), (0.3 * i as f64).cos())).collect();
        let total: f64 = (0..36).map(|k| e.coefficient(&u, k).norm_sqr()).sum();
        let norm2 = GridField::new(g, u).unwrap().norm().powi(2);
        assert!((total - norm2).abs() < 1e-10 * norm2);
    }

    #[test]
    fn identical_inputs_give_identical_datasets() {
        let g = grid(2, 6);
        let a = build_dataset(&bump(&g), 12, TraceScheme::Flux1, &EigenOptions::default()).unwrap();
        let b = build_dataset(&bump(&g), 12, TraceScheme::Flux1, &EigenOptions::default()).unwrap();
        assert!(a.same_data(&b));
        assert!(build_dataset(&bump(&g), 37, TraceScheme::Flux1, &EigenOptions::default()).is_err());
    }

    #[test]
    fn trace_bound_report() {
        let g = grid(1, 400);
        let ds = build_dataset(&PotentialField::zero(g), 40, TraceScheme::Flux1, &EigenOptions::default()).unwrap();
        let rep = verify_trace_bound(&ds).unwrap();
        assert!(!rep.flagged);
        assert!((rep.max_ratio - ds.trace_bound_constant()).abs() == 0.0);

        let inflated: Vec<BoundaryFunction> = ds
            .traces()
            .iter()
            .zip(ds.eigenvalues())
            .map(|(t, l)| {
                BoundaryFunction::new(t.grid().clone(), t.values().iter().map(|v| v * l * l).collect()).unwrap()
            })
            .collect();
        let bad = SpectralDataset::new(ds.grid().clone(), ds.eigenvalues().to_vec(), inflated, ds.scheme(), Provenance::Perturbed).unwrap();
        assert!(verify_trace_bound(&bad).unwrap().flagged);
    }
}
