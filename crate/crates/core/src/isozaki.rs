//! Complex exponential probes and the boundary functional
//! `S(tau) = <∂ν u⁺, f⁻>_Γ`, computed either by solving the Dirichlet
//! problem or from boundary spectral data alone.
//!
//! For frequency `ξ`, unit `η ⟂ ξ` and `τ ≥ max(1, |ξ|)` the probes are
//! `f±(x) = exp(i (τ ± i) η±·x)` with `η± = β η ∓ ξ/(2τ)` and
//! `β = sqrt(1 - |ξ|²/(4τ²))`. They solve `(-Δ - λ±) f± = 0` for
//! `λ± = (τ ± i)²`, and `f⁺ conj(f⁻) = exp(-iξ·x + ξ·x/τ)`, so the
//! difference of `S` between two potentials tends to `∫ (q₁ - q₂) e^{-iξ·x}`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bvp::{ShiftedOperator, SPECTRUM_GUARD};
use crate::error::{Error, Result};
use crate::mesh::{check_same, gamma_pairing, BoundaryFunction, Grid, GridField};
use crate::reconstruct::oracle_fourier;
use crate::schrodinger::PotentialField;
use crate::spectra::{boundary_trace, SpectralDataset, TraceScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EtaRule {
    /// Standard basis vector with the smallest `|ξ_a|`, made orthogonal to
    /// `ξ` and normalized; `e_0` when `ξ = 0`.
    Deterministic,
    Explicit(Vec<f64>),
}

/// Largest resolved probe parameter: a quarter of the grid's Nyquist
/// wavenumber `π / h`.
pub fn tau_ceiling(grid: &Grid) -> f64 {
    PI / (4.0 * grid.max_spacing())
}

/// Rejects `tau` above [`tau_ceiling`] unless `force` is set.
pub fn check_tau(tau: f64, grid: &Grid, force: bool) -> Result<()> {
    let ceiling = tau_ceiling(grid);
    if tau > ceiling {
        if !force {
            return Err(Error::TauCeiling { tau, ceiling });
        }
        log::warn!("tau = {tau} exceeds the resolution ceiling {ceiling}; continuing as forced");
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Probe {
    grid: Arc<Grid>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub tau: f64,
    pub beta: f64,
    pub eta_plus: Vec<f64>,
    pub eta_minus: Vec<f64>,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    /// Interior and boundary samples of `f⁺`.
    pub f_plus: GridField,
    pub f_minus: GridField,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn deterministic_eta(xi: &[f64]) -> Vec<f64> {
    let n = xi.len();
    let xn2 = dot(xi, xi);
    if xn2 == 0.0 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        return e;
    }
    let a = (0..n)
        .min_by(|i, j| xi[*i].abs().total_cmp(&xi[*j].abs()))
        .expect("n >= 2");
    let mut e: Vec<f64> = (0..n).map(|b| -xi[a] * xi[b] / xn2).collect();
    e[a] += 1.0;
    let nrm = dot(&e, &e).sqrt();
    e.iter_mut().for_each(|v| *v /= nrm);
    e
}

pub fn make_probe(xi: &[f64], tau: f64, rule: &EtaRule, grid: &Arc<Grid>) -> Result<Probe> {
    let n = grid.dim();
    if n < 2 {
        return Err(Error::InvalidArgument("probes need dimension at least 2".into()));
    }
    if xi.len() != n {
        return Err(Error::InvalidArgument(format!(
            "frequency has {} components on a {n}-dimensional grid",
            xi.len()
        )));
    }
    let xi_norm = dot(xi, xi).sqrt();
    if !(tau >= 1.0 && tau >= xi_norm) {
        return Err(Error::InvalidArgument(format!(
            "tau = {tau} must be at least max(1, |xi|) = {}",
            xi_norm.max(1.0)
        )));
    }
    let eta = match rule {
        EtaRule::Deterministic => deterministic_eta(xi),
        EtaRule::Explicit(eta) => {
            if eta.len() != n
                || (dot(eta, eta).sqrt() - 1.0).abs() > 1e-10
                || dot(eta, xi).abs() > 1e-10 * (1.0 + xi_norm)
            {
                return Err(Error::InvalidArgument(format!(
                    "eta {eta:?} must be a unit vector orthogonal to xi"
                )));
            }
            eta.clone()
        }
    };
    let beta = (1.0 - xi_norm * xi_norm / (4.0 * tau * tau)).sqrt();
    let eta_pm = |s: f64| -> Vec<f64> {
        eta.iter()
            .zip(xi)
            .map(|(e, x)| beta * e - s * x / (2.0 * tau))
            .collect()
    };
    let eta_plus = eta_pm(1.0);
    let eta_minus = eta_pm(-1.0);
    let k_plus = Complex64::new(tau, 1.0);
    let k_minus = Complex64::new(tau, -1.0);
    let sample = |k: Complex64, dir: &[f64]| {
        GridField::sample(grid.clone(), |x| {
            let phase: f64 = dir.iter().enumerate().map(|(a, d)| d * x[a]).sum();
            (Complex64::i() * k * phase).exp()
        })
    };
    Ok(Probe {
        grid: grid.clone(),
        f_plus: sample(k_plus, &eta_plus),
        f_minus: sample(k_minus, &eta_minus),
        xi: xi.to_vec(),
        eta,
        tau,
        beta,
        eta_plus,
        eta_minus,
        lambda_plus: k_plus * k_plus,
        lambda_minus: k_minus * k_minus,
    })
}

impl Probe {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn lambda(&self, sign: Sign) -> Complex64 {
        match sign {
            Sign::Plus => self.lambda_plus,
            Sign::Minus => self.lambda_minus,
        }
    }

    pub fn field(&self, sign: Sign) -> &GridField {
        match sign {
            Sign::Plus => &self.f_plus,
            Sign::Minus => &self.f_minus,
        }
    }

    pub fn boundary(&self, sign: Sign) -> BoundaryFunction {
        self.field(sign).boundary_function()
    }

    /// Largest deviation of `|η±|` from one and of `ξ·η` from zero.
    pub fn invariant_error(&self) -> f64 {
        let unit = |v: &[f64]| (dot(v, v).sqrt() - 1.0).abs();
        unit(&self.eta_plus)
            .max(unit(&self.eta_minus))
            .max(unit(&self.eta))
            .max(dot(&self.xi, &self.eta).abs())
    }

    /// `max_x |f⁺ conj(f⁻) - e^{-iξ·x}|` over interior nodes.
    pub fn limit_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| {
                let x = self.grid.position(i);
                let phase: f64 = self.xi.iter().enumerate().map(|(a, v)| v * x[a]).sum();
                let target = Complex64::from_polar(1.0, -phase);
                (self.f_plus.values()[i] * self.f_minus.values()[i].conj() - target).norm()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Direct,
    Series,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Direct => "direct",
            Route::Series => "series",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IsozakiValue {
    pub s: Complex64,
    pub route: Route,
    /// Solver residual norm (direct) or number of series terms.
    pub diagnostic: f64,
}

/// `S = <∂ν u⁺, f⁻>_Γ` for a factorization of `A_q - λ⁺`.
pub fn s_direct_factored(shifted: &ShiftedOperator, probe: &Probe, scheme: TraceScheme) -> Result<IsozakiValue> {
    check_same(shifted.grid(), probe.grid())?;
    if (shifted.z() - probe.lambda_plus).norm() > 1e-12 * probe.lambda_plus.norm() {
        return Err(Error::InvalidArgument(format!(
            "factorization at z = {} does not match lambda+ = {}",
            shifted.z(),
            probe.lambda_plus
        )));
    }
    let sol = shifted.solve_dirichlet(&probe.boundary(Sign::Plus), Some(probe.f_plus.values()))?;
    let trace = boundary_trace(&sol.u, scheme);
    let f_minus = probe.f_minus.boundary().expect("probe boundary samples");
    Ok(IsozakiValue {
        s: gamma_pairing(probe.grid(), trace.values(), f_minus),
        route: Route::Direct,
        diagnostic: sol.residual,
    })
}

pub fn s_direct(q: &PotentialField, probe: &Probe, scheme: TraceScheme) -> Result<IsozakiValue> {
    check_same(q.grid(), probe.grid())?;
    let shifted = ShiftedOperator::new(q, probe.lambda_plus, None)?;
    s_direct_factored(&shifted, probe, scheme)
}

fn guard(z: Complex64, eigenvalues: &[f64]) -> Result<()> {
    for l in eigenvalues {
        let distance = (z - l).norm();
        if distance < SPECTRUM_GUARD {
            return Err(Error::NearSpectrum {
                z,
                nearest: *l,
                distance,
            });
        }
    }
    Ok(())
}

/// `(μ - λ) Σ_{k<K} <f, ψ_k> / ((λ - λ_k)(μ - λ_k)) ψ_k`, the normal
/// derivative of `u_λ - u_μ` expanded in boundary spectral data.
pub fn representation_series(
    ds: &SpectralDataset,
    lambda: Complex64,
    mu: Complex64,
    f: &BoundaryFunction,
    k: usize,
) -> Result<BoundaryFunction> {
    check_same(ds.grid(), f.grid())?;
    if k > ds.len() {
        return Err(Error::InvalidArgument(format!(
            "truncation {k} exceeds the {} pairs available",
            ds.len()
        )));
    }
    guard(lambda, &ds.eigenvalues()[..k])?;
    guard(mu, &ds.eigenvalues()[..k])?;
    let coeffs = ds.pairings(f.values(), k);
    let mut out = vec![Complex64::new(0.0, 0.0); ds.grid().num_faces()];
    for (idx, c) in coeffs.iter().enumerate() {
        let lk = ds.eigenvalues()[idx];
        let w = (mu - lambda) * c / ((lambda - lk) * (mu - lk));
        for (o, p) in out.iter_mut().zip(ds.trace(idx).values()) {
            *o += w * p;
        }
    }
    BoundaryFunction::new(ds.grid().clone(), out)
}

/// One index of the decomposition `S₁ - S₂ = Σ_k (A_k + B_k + C_k)`.
#[derive(Debug, Clone, Copy)]
pub struct TermRecord {
    pub k: usize,
    /// `<f⁺, ψ₁ - ψ₂> conj(<f⁻, ψ₁>) / (λ⁺ - λ₁)`.
    pub a: Complex64,
    /// `<f⁺, ψ₂> conj(<f⁻, ψ₁ - ψ₂>) / (λ⁺ - λ₂)`.
    pub b: Complex64,
    /// `(λ₁ - λ₂) <f⁺, ψ₂> conj(<f⁻, ψ₁>) / ((λ⁺ - λ₁)(λ⁺ - λ₂))`.
    pub c: Complex64,
}

impl TermRecord {
    pub fn total(&self) -> Complex64 {
        self.a + self.b + self.c
    }
}

#[derive(Debug, Clone)]
pub struct SeriesTerms {
    pub records: Vec<TermRecord>,
    /// Prefix sums of `A + B + C` in ascending `k`.
    pub partial_sums: Vec<Complex64>,
}

impl SeriesTerms {
    fn from_records(records: Vec<TermRecord>) -> Self {
        let mut acc = Complex64::new(0.0, 0.0);
        let partial_sums = records
            .iter()
            .map(|r| {
                acc += r.total();
                acc
            })
            .collect();
        SeriesTerms {
            records,
            partial_sums,
        }
    }

    pub fn truncation(&self) -> usize {
        self.records.len()
    }

    /// Largest disagreement between stored and recomputed prefix sums.
    pub fn prefix_defect(&self) -> f64 {
        SeriesTerms::from_records(self.records.clone())
            .partial_sums
            .iter()
            .zip(&self.partial_sums)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn check_pair(ds1: &SpectralDataset, ds2: &SpectralDataset, k: usize) -> Result<()> {
    check_same(ds1.grid(), ds2.grid())?;
    if ds1.scheme() != ds2.scheme() {
        return Err(Error::InvalidArgument("datasets use different trace schemes".into()));
    }
    let avail = ds1.len().min(ds2.len());
    if k == 0 || k > avail {
        return Err(Error::InvalidArgument(format!(
            "truncation {k} outside 1..={avail}"
        )));
    }
    Ok(())
}

/// `S₁ - S₂` from two boundary spectral datasets alone, truncated at `k`
/// pairs.
pub fn s_series_diff(
    ds1: &SpectralDataset,
    ds2: &SpectralDataset,
    probe: &Probe,
    k: usize,
) -> Result<(IsozakiValue, SeriesTerms)> {
    check_pair(ds1, ds2, k)?;
    check_same(ds1.grid(), probe.grid())?;
    let grid = ds1.grid();
    let fp = probe.f_plus.boundary().expect("probe boundary samples");
    let fm = probe.f_minus.boundary().expect("probe boundary samples");
    let lp = probe.lambda_plus;
    let records: Vec<TermRecord> = (0..k)
        .into_par_iter()
        .map(|idx| {
            let (p1, p2) = (ds1.trace(idx).values(), ds2.trace(idx).values());
            let a1 = gamma_pairing(grid, fp, p1);
            let a2 = gamma_pairing(grid, fp, p2);
            let b1 = gamma_pairing(grid, fm, p1);
            let b2 = gamma_pairing(grid, fm, p2);
            let (l1, l2) = (ds1.eigenvalues()[idx], ds2.eigenvalues()[idx]);
            let (d1, d2) = (lp - l1, lp - l2);
            TermRecord {
                k: idx + 1,
                a: (a1 - a2) * b1.conj() / d1,
                b: a2 * (b1 - b2).conj() / d2,
                c: (l1 - l2) * a2 * b1.conj() / (d1 * d2),
            }
        })
        .collect();
    let terms = SeriesTerms::from_records(records);
    let s = *terms.partial_sums.last().expect("k >= 1");
    Ok((
        IsozakiValue {
            s,
            route: Route::Series,
            diagnostic: k as f64,
        },
        terms,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct ParsevalReport {
    /// `Σ_k |<f±, ψ_k> / (λ± - λ_k)|²`.
    pub spectral_sum: f64,
    /// `|u±|²` over the interior.
    pub solution_norm2: f64,
    pub gap: f64,
}

pub fn parseval_check(ds: &SpectralDataset, q: &PotentialField, probe: &Probe, sign: Sign) -> Result<ParsevalReport> {
    check_same(ds.grid(), q.grid())?;
    check_same(ds.grid(), probe.grid())?;
    let z = probe.lambda(sign);
    let f = probe.field(sign);
    let coeffs = ds.pairings(f.boundary().expect("probe boundary samples"), ds.len());
    let spectral_sum: f64 = coeffs
        .iter()
        .zip(ds.eigenvalues())
        .map(|(c, l)| (c / (z - l)).norm_sqr())
        .sum();
    let shifted = ShiftedOperator::new(q, z, None)?;
    let sol = shifted.solve_dirichlet(&f.boundary_function(), Some(f.values()))?;
    let solution_norm2 = sol.u.norm().powi(2);
    Ok(ParsevalReport {
        spectral_sum,
        solution_norm2,
        gap: (spectral_sum - solution_norm2).abs() / solution_norm2.max(f64::MIN_POSITIVE),
    })
}

/// `v = -(A_q - λ⁺)^{-1} (q f⁺)`, the correction that turns the free probe
/// into the solution for potential `q`.
pub fn resolvent_correction(shifted: &ShiftedOperator, q: &PotentialField, probe: &Probe) -> Vec<Complex64> {
    let rhs: Vec<Complex64> = probe
        .f_plus
        .values()
        .iter()
        .zip(q.values())
        .map(|(f, qi)| -f * qi)
        .collect();
    shifted.solve(&rhs)
}

/// `Σ q v conj(f⁻) h^n` for a correction `v`.
pub fn residual_integral(q: &PotentialField, v: &[Complex64], probe: &Probe) -> Complex64 {
    let s: Complex64 = v
        .iter()
        .zip(q.values())
        .zip(probe.f_minus.values())
        .map(|((vi, qi), fm)| vi * fm.conj() * *qi)
        .sum();
    s * q.grid().cell_volume()
}

/// Where the values of a sweep come from.
#[derive(Debug, Clone, Copy)]
pub enum SweepSource<'a> {
    Direct,
    Series {
        ds1: &'a SpectralDataset,
        ds2: &'a SpectralDataset,
        k: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub scheme: TraceScheme,
    pub eta: EtaRule,
    /// Allow `tau` above the resolution ceiling.
    pub force: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            scheme: TraceScheme::Flux1,
            eta: EtaRule::Deterministic,
            force: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub s: Complex64,
    pub oracle: Complex64,
    pub abs_err: f64,
    /// `|Σ (q₁ v₁ - q₂ v₂) conj(f⁻) h^n|`.
    pub residual_diag: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub xi: Vec<f64>,
    pub route: Route,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub const HEADER: &'static str = "tau,re_s,im_s,re_oracle,im_oracle,abs_err,residual_diag";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.tau, r.s.re, r.s.im, r.oracle.re, r.oracle.im, r.abs_err, r.residual_diag
            )
            .expect("writing to a string");
        }
        out
    }
}

/// `S₁ - S₂` against the quadrature of `(q₁ - q₂) e^{-iξ·x}` over a list of
/// probe parameters.
pub fn tau_sweep_diff(
    q1: &PotentialField,
    q2: &PotentialField,
    source: SweepSource,
    xi: &[f64],
    taus: &[f64],
    opts: &SweepOptions,
) -> Result<ConvergenceTable> {
    check_same(q1.grid(), q2.grid())?;
    if taus.is_empty() || !taus.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("tau list must be non-empty and ascending".into()));
    }
    let grid = q1.grid();
    for &tau in taus {
        check_tau(tau, grid, opts.force)?;
    }
    let oracle = oracle_fourier(q1, q2, xi)?;
    let rows = taus
        .iter()
        .map(|&tau| {
            let probe = make_probe(xi, tau, &opts.eta, grid)?;
            let op1 = ShiftedOperator::new(q1, probe.lambda_plus, None)?;
            let op2 = ShiftedOperator::new(q2, probe.lambda_plus, None)?;
            let s = match source {
                SweepSource::Direct => {
                    s_direct_factored(&op1, &probe, opts.scheme)?.s
                        - s_direct_factored(&op2, &probe, opts.scheme)?.s
                }
                SweepSource::Series { ds1, ds2, k } => s_series_diff(ds1, ds2, &probe, k)?.0.s,
            };
            let v1 = resolvent_correction(&op1, q1, &probe);
            let v2 = resolvent_correction(&op2, q2, &probe);
            let diag = residual_integral(q1, &v1, &probe) - residual_integral(q2, &v2, &probe);
            Ok(ConvergenceRow {
                tau,
                s,
                oracle,
                abs_err: (s - oracle).norm(),
                residual_diag: diag.norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable {
        xi: xi.to_vec(),
        route: match source {
            SweepSource::Direct => Route::Direct,
            SweepSource::Series { .. } => Route::Series,
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schrodinger::{sample_potential, PotentialKind, PotentialSpec};
    use crate::spectra::{build_dataset, perturb_dataset, EigenOptions, PerturbMode};

    fn grid(m: usize) -> Arc<Grid> {
        Arc::new(Grid::new(2, &[1.0, 1.0], &[m, m]).unwrap())
    }

    fn bump(g: &Arc<Grid>) -> PotentialField {
        sample_potential(
            &PotentialSpec::new(PotentialKind::GaussianBump {
                amplitude: 5.0,
                center: vec![0.5, 0.5],
                width: 0.1,
            }),
            g,
        )
        .unwrap()
    }

    #[test]
    fn probe_invariants() {
        let g = grid(8);
        let p = make_probe(&[2.0 * PI, 0.0], 10.0, &EtaRule::Deterministic, &g).unwrap();
        assert!((p.beta - (1.0 - PI * PI / 100.0).sqrt()).abs() < 1e-15);
        assert!(p.invariant_error() < 1e-12);
        assert_eq!(p.eta, vec![0.0, 1.0]);
        assert_eq!(p.lambda_plus, Complex64::new(99.0, 20.0));
        assert_eq!(p.lambda_minus, Complex64::new(99.0, -20.0));
        for i in 0..g.len() {
            let x = g.position(i);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!(p.f_plus.values()[i].norm() <= r.exp() * (1.0 + 1e-12));
            assert!(p.f_minus.values()[i].norm() <= r.exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_frequency_product_is_one() {
        let g = grid(6);
        let p = make_probe(&[0.0, 0.0], 3.0, &EtaRule::Deterministic, &g).unwrap();
        assert_eq!(p.eta_plus, p.eta_minus);
        for (a, b) in p.f_plus.values().iter().zip(p.f_minus.values()) {
            assert!((a * b.conj() - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn probe_product_approaches_plane_wave() {
        let g = grid(20);
        let defects: Vec<f64> = [16.0, 32.0, 64.0, 128.0]
            .iter()
            .map(|t| make_probe(&[2.0 * PI, 2.0 * PI], *t, &EtaRule::Deterministic, &g).unwrap().limit_defect())
            .collect();
        assert!(defects.windows(2).all(|w| w[1] < w[0]), "{defects:?}");
    }

    #[test]
    fn probe_preconditions() {
        let g1 = Arc::new(Grid::new(1, &[1.0], &[5]).unwrap());
        assert!(make_probe(&[0.0], 2.0, &EtaRule::Deterministic, &g1).is_err());
        let g = grid(5);
        assert!(make_probe(&[2.0 * PI, 0.0], 4.0, &EtaRule::Deterministic, &g).is_err());
        assert!(make_probe(&[0.0, 0.0], 0.5, &EtaRule::Deterministic, &g).is_err());
        assert!(make_probe(&[1.0, 0.0], 2.0, &EtaRule::Explicit(vec![0.6, 0.8]), &g).is_err());
        assert!(make_probe(&[1.0, 0.0], 2.0, &EtaRule::Explicit(vec![0.0, -1.0]), &g).is_ok());
    }

    #[test]
    fn free_probe_solves_itself_up_to_dispersion() {
        let g = grid(40);
        let q = PotentialField::zero(g.clone());
        let p = make_probe(&[0.0, 0.0], 4.0, &EtaRule::Deterministic, &g).unwrap();
        let shifted = ShiftedOperator::new(&q, p.lambda_plus, None).unwrap();
        let sol = shifted
            .solve_dirichlet(&p.boundary(Sign::Plus), Some(p.f_plus.values()))
            .unwrap();
        let v = sol.v.unwrap().norm();
        assert!(v < 1e-2 * p.f_plus.norm(), "{v}");
    }

    #[test]
    fn identical_potentials_give_zero_difference() {
        let g = grid(10);
        let q = bump(&g);
        let p = make_probe(&[2.0 * PI, 0.0], 8.0, &EtaRule::Deterministic, &g).unwrap();
        let a = s_direct(&q, &p, TraceScheme::Flux1).unwrap().s;
        let b = s_direct(&q.clone(), &p, TraceScheme::Flux1).unwrap().s;
        assert_eq!(a - b, Complex64::new(0.0, 0.0));

        let ds = build_dataset(&q, 20, TraceScheme::Flux1, &EigenOptions::default()).unwrap();
        let (v, terms) = s_series_diff(&ds, &ds, &p, 20).unwrap();
        assert_eq!(v.s, Complex64::new(0.0, 0.0));
        assert!(terms.records.iter().all(|r| r.total() == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn eigenvalue_shift_only_feeds_the_c_terms() {
        let g = grid(8);
        let ds = build_dataset(&bump(&g), 30, TraceScheme::Flux1, &EigenOptions::default()).unwrap();
        let eps = 0.25;
        let shifted = perturb_dataset(&ds, PerturbMode::EigenShiftConstant, eps, 0).unwrap();
        let p = make_probe(&[2.0 * PI, 0.0], 8.0, &EtaRule::Deterministic, &g).unwrap();
        let (v, terms) = s_series_diff(&ds, &shifted, &p, 30).unwrap();
        let mut c_sum = Complex64::new(0.0, 0.0);
        for r in &terms.records {
            assert_eq!(r.a, Complex64::new(0.0, 0.0));
            assert_eq!(r.b, Complex64::new(0.0, 0.0));
            let idx = r.k - 1;
            let d1 = p.lambda_plus - ds.eigenvalues()[idx];
            let d2 = p.lambda_plus - shifted.eigenvalues()[idx];
            let a = gamma_pairing(&g, p.f_plus.boundary().unwrap(), ds.trace(idx).values());
            let b = gamma_pairing(&g, p.f_minus.boundary().unwrap(), ds.trace(idx).values());
            let expect = -eps * a * b.conj() / (d1 * d2);
            assert!((r.c - expect).norm() <= 1e-12 * expect.norm().max(1e-300));
            c_sum += r.c;
        }
        assert!((v.s - c_sum).norm() <= 1e-12 * c_sum.norm());
        assert_eq!(terms.prefix_defect(), 0.0);
    }

    #[test]
    fn probe_energy_stays_two_tau_away_from_real_axis() {
        for tau in [1.0, 3.5, 40.0] {
            let z = Complex64::new(tau, 1.0).powi(2);
            assert_eq!(z.im, 2.0 * tau);
            for l in [-1e3, 0.0, tau * tau - 1.0, 1e6] {
                assert!((z - l).norm() >= 2.0 * tau);
            }
        }
    }

    #[test]
    fn representation_series_vanishes_for_equal_parameters() {
        let g = grid(6);
        let ds = build_dataset(&bump(&g), 36, TraceScheme::Flux1, &EigenOptions::default()).unwrap();
        let f = BoundaryFunction::sample(g, |x| Complex64::new(x[0] + 1.0, x[1]));
        let z = Complex64::new(3.0, 2.0);
        let r = representation_series(&ds, z, z, &f, 36).unwrap();
        assert!(r.values().iter().all(|v| v.norm() == 0.0));
        let on = Complex64::new(ds.eigenvalues()[3], 0.0);
        assert!(matches!(representation_series(&ds, on, z, &f, 36), Err(Error::NearSpectrum { .. })));
        assert!(representation_series(&ds, z, z, &f, 37).is_err());
    }

    #[test]
    fn ceiling_blocks_unresolved_probes() {
        let g = grid(24);
        let ceiling = tau_ceiling(&g);
        assert!((ceiling - 25.0 * PI / 4.0).abs() < 1e-12);
        assert!(check_tau(ceiling, &g, false).is_ok());
        assert!(matches!(check_tau(ceiling * 1.01, &g, false), Err(Error::TauCeiling { .. })));
        assert!(check_tau(ceiling * 1.01, &g, true).is_ok());
    }

    #[test]
    fn sweep_of_identical_potentials_is_zero() {
        let g = grid(10);
        let q = bump(&g);
        let t = tau_sweep_diff(&q, &q, SweepSource::Direct, &[2.0 * PI, 0.0], &[7.0, 8.0], &SweepOptions::default()).unwrap();
        for r in &t.rows {
            assert_eq!(r.s, Complex64::new(0.0, 0.0));
            assert_eq!(r.oracle, Complex64::new(0.0, 0.0));
            assert_eq!(r.residual_diag, 0.0);
        }
        let csv = t.to_csv();
        assert!(csv.starts_with(ConvergenceTable::HEADER));
        assert_eq!(csv.lines().count(), 3);
    }
}
