//! Potentials, the discrete operator `A_q = -Δ_h + q` with Dirichlet rows,
//! and its sesquilinear form.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{check_same, Grid, GridField, Point};

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Constant {
        value: f64,
    },
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `amplitude * prod_a cos(2 pi modes_a x_a / L_a + phases_a)`.
    CosineSeparable {
        amplitude: f64,
        modes: Vec<f64>,
        phases: Vec<f64>,
    },
    /// `amplitude * |x - center|^(-exponent)`, singular at an off-grid point.
    InversePower {
        amplitude: f64,
        center: Vec<f64>,
        exponent: f64,
    },
    GridSamples {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// Declared admissibility constant `c`: the class requires `q >= -c`.
    pub lower_bound_c: f64,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind) -> Self {
        PotentialSpec {
            kind,
            lower_bound_c: 0.0,
        }
    }

    pub fn zero() -> Self {
        PotentialSpec::new(PotentialKind::Constant { value: 0.0 })
    }

    pub fn with_lower_bound(mut self, c: f64) -> Self {
        self.lower_bound_c = c;
        self
    }
}

/// Integrability exponent of the admissible class, `max(2, 3n/5)`.
pub fn class_exponent(dim: usize) -> f64 {
    f64::max(2.0, 3.0 * dim as f64 / 5.0)
}

#[derive(Debug, Clone)]
pub struct PotentialField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    /// `max(0, -min q)`.
    pub recorded_c: f64,
    pub declared_c: f64,
    /// Discrete `L^{max(2,3n/5)}` norm.
    pub lp_norm: f64,
    /// Admissibility violations noticed at sampling time.
    pub warnings: Vec<String>,
}

impl PotentialField {
    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>, declared_c: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Inadmissible(format!("non-finite sample {v}")));
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let recorded_c = f64::max(0.0, -min);
        let p = class_exponent(grid.dim());
        let lp_norm = (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * grid.cell_volume())
            .powf(1.0 / p);
        let mut warnings = Vec::new();
        if recorded_c > declared_c {
            let msg = format!(
                "potential dips to {min:.6e}, below the declared lower bound -{declared_c}"
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(PotentialField {
            grid,
            values,
            recorded_c,
            declared_c,
            lp_norm,
            warnings,
        })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        PotentialField::from_values(grid, vec![0.0; n], 0.0).expect("zero potential")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same potential plus a constant.
    pub fn shifted(&self, s: f64) -> Self {
        let values = self.values.iter().map(|v| v + s).collect();
        PotentialField::from_values(self.grid.clone(), values, self.declared_c + s.min(0.0).abs())
            .expect("shift keeps samples finite")
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let values = self.values.iter().map(|v| v * factor).collect();
        PotentialField::from_values(self.grid.clone(), values, self.declared_c * factor.abs())
            .expect("scaling keeps samples finite")
    }

    pub fn difference(&self, other: &PotentialField) -> Result<Vec<f64>> {
        check_same(&self.grid, &other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }
}

fn dist2(x: &Point, c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(a, ca)| (x[a] - ca).powi(2)).sum()
}

fn check_len(what: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "{what} has {} components on a {dim}-dimensional grid",
            v.len()
        )));
    }
    Ok(())
}

pub fn sample_potential(spec: &PotentialSpec, grid: &Arc<Grid>) -> Result<PotentialField> {
    let dim = grid.dim();
    if !(spec.lower_bound_c >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lower bound constant {} must be non-negative",
            spec.lower_bound_c
        )));
    }
    let at = |f: &dyn Fn(&Point) -> f64| (0..grid.len()).map(|i| f(&grid.position(i))).collect();
    let values: Vec<f64> = match &spec.kind {
        PotentialKind::Constant { value } => vec![*value; grid.len()],
        PotentialKind::GaussianBump {
            amplitude,
            center,
            width,
        } => {
            check_len("center", center, dim)?;
            if !(*width > 0.0) {
                return Err(Error::InvalidArgument(format!("width {width} must be positive")));
            }
            at(&|x| amplitude * (-dist2(x, center) / (2.0 * width * width)).exp())
        }
        PotentialKind::CosineSeparable {
            amplitude,
            modes,
            phases,
        } => {
            check_len("modes", modes, dim)?;
            check_len("phases", phases, dim)?;
            let ext = grid.extent();
            at(&|x| {
                amplitude
                    * (0..dim)
                        .map(|a| (2.0 * PI * modes[a] * x[a] / ext[a] + phases[a]).cos())
                        .product::<f64>()
            })
        }
        PotentialKind::InversePower {
            amplitude,
            center,
            exponent,
        } => {
            check_len("center", center, dim)?;
            let n = dim as f64;
            if !(*exponent > 0.0 && exponent * class_exponent(dim) < n) {
                return Err(Error::Inadmissible(format!(
                    "exponent {exponent} needs 0 < alpha * {} < {n}",
                    class_exponent(dim)
                )));
            }
            let tiny = 1e-9 * grid.max_spacing();
            if (0..grid.len()).any(|i| dist2(&grid.position(i), center).sqrt() < tiny) {
                return Err(Error::Inadmissible(format!(
                    "singular center {center:?} coincides with a grid node"
                )));
            }
            at(&|x| amplitude * dist2(x, center).powf(-0.5 * exponent))
        }
        PotentialKind::GridSamples { values } => {
            if values.len() != grid.len() {
                return Err(Error::LengthMismatch {
                    expected: grid.len(),
                    got: values.len(),
                });
            }
            values.clone()
        }
    };
    PotentialField::from_values(grid.clone(), values, spec.lower_bound_c)
}

/// `-Δ_h + diag(q)` on interior nodes with Dirichlet rows.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Arc<Grid>,
    matrix: CsrMatrix,
    potential: Vec<f64>,
}

pub fn assemble_operator(q: &PotentialField) -> DiscreteOperator {
    let grid = q.grid().clone();
    let inv_h2: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
    let diag0: f64 = 2.0 * inv_h2.iter().sum::<f64>();
    let rows = (0..grid.len())
        .map(|idx| {
            let mut row = Vec::with_capacity(2 * grid.dim() + 1);
            row.push((idx, diag0 + q.values()[idx]));
            for (a, w) in inv_h2.iter().enumerate() {
                for dir in [-1, 1] {
                    if let Some(j) = grid.neighbor(idx, a, dir) {
                        row.push((j, -w));
                    }
                }
            }
            row
        })
        .collect();
    DiscreteOperator {
        grid,
        matrix: CsrMatrix::from_rows(rows),
        potential: q.values().to_vec(),
    }
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn len(&self) -> usize {
        self.matrix.n()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.n() == 0
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.matrix.mul_complex(u)
    }

    /// Strict upper bound on the spectrum of the `q = 0` part.
    pub fn laplacian_bound(&self) -> f64 {
        self.grid.spacing().iter().map(|h| 4.0 / (h * h)).sum()
    }
}

fn is_dirichlet(u: &GridField) -> bool {
    u.boundary().is_none_or(|b| b.iter().all(|v| *v == Complex64::new(0.0, 0.0)))
}

/// Forward-difference gradients, including the edges to the boundary.
fn for_each_edge(u: &GridField, v: &GridField, mut f: impl FnMut(Complex64, Complex64, f64)) {
    let grid = u.grid();
    let (uv, vv) = (u.values(), v.values());
    let zero = Complex64::new(0.0, 0.0);
    for idx in 0..grid.len() {
        for a in 0..grid.dim() {
            let h = grid.spacing()[a];
            let (un, vn) = grid
                .neighbor(idx, a, 1)
                .map_or((zero, zero), |j| (uv[j], vv[j]));
            f((un - uv[idx]) / h, (vn - vv[idx]) / h, 1.0);
            if grid.neighbor(idx, a, -1).is_none() {
                f(uv[idx] / h, vv[idx] / h, 1.0);
            }
        }
    }
}

/// `sum grad_h u . conj(grad_h v) h^n + sum q u conj(v) h^n` for fields that
/// vanish on the boundary.
pub fn quadratic_form(q: &PotentialField, u: &GridField, v: &GridField) -> Result<Complex64> {
    check_same(q.grid(), u.grid())?;
    check_same(u.grid(), v.grid())?;
    if !is_dirichlet(u) || !is_dirichlet(v) {
        return Err(Error::InvalidArgument(
            "form arguments must vanish on the boundary".into(),
        ));
    }
    let mut energy = Complex64::new(0.0, 0.0);
    for_each_edge(u, v, |du, dv, _| energy += du * dv.conj());
    let pot: Complex64 = q
        .values()
        .iter()
        .zip(u.values().iter().zip(v.values()))
        .map(|(qi, (a, b))| a * b.conj() * *qi)
        .sum();
    Ok((energy + pot) * q.grid().cell_volume())
}

fn dirichlet_energy(u: &GridField) -> f64 {
    let mut e = 0.0;
    for_each_edge(u, u, |du, _, _| e += du.norm_sqr());
    e * u.grid().cell_volume()
}

#[derive(Debug, Clone)]
pub struct CoercivityReport {
    /// Per-sample `(a_q(u,u) + c |u|^2) / |u|_{H^1_h}^2`.
    pub kappas: Vec<f64>,
    pub min_kappa: f64,
    pub passed: bool,
}

/// Samples random Dirichlet fields and measures the coercivity constant of
/// the shifted form `a_q + c`.
pub fn check_form_coercivity(q: &PotentialField, samples: usize, seed: u64) -> Result<CoercivityReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = q.grid().clone();
    let mut kappas = Vec::with_capacity(samples);
    for _ in 0..samples {
        let values: Vec<f64> = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let u = GridField::from_real(grid.clone(), &values)?;
        let a = quadratic_form(q, &u, &u)?.re;
        let l2 = u.norm().powi(2);
        let h1 = l2 + dirichlet_energy(&u);
        kappas.push((a + q.recorded_c * l2) / h1);
    }
    let min_kappa = kappas.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CoercivityReport {
        passed: min_kappa > 0.0,
        kappas,
        min_kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::inner_omega;

    fn grid2(m: usize) -> Arc<Grid> {
        Arc::new(Grid::new(2, &[1.0, 1.0], &[m, m]).unwrap())
    }

    #[test]
    fn one_dimensional_stencil() {
        let g = Arc::new(Grid::new(1, &[1.0], &[3]).unwrap());
        let op = assemble_operator(&PotentialField::zero(g));
        let m = op.matrix();
        for i in 0..3 {
            assert_eq!(m.get(i, i), 32.0);
        }
        assert_eq!(m.get(0, 1), -16.0);
        assert_eq!(m.get(1, 2), -16.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.asymmetry(), 0.0);
    }

    #[test]
    fn zero_potential_metadata() {
        let g = grid2(5);
        let q = sample_potential(&PotentialSpec::zero(), &g).unwrap();
        assert!(q.values().iter().all(|v| *v == 0.0));
        assert_eq!(q.recorded_c, 0.0);
        assert_eq!(q.lp_norm, 0.0);
    }

    #[test]
    fn gaussian_peak_sits_at_nearest_node() {
        let g = grid2(64);
        let spec = PotentialSpec::new(PotentialKind::GaussianBump {
            amplitude: 5.0,
            center: vec![0.5, 0.5],
            width: 0.1,
        });
        let q = sample_potential(&spec, &g).unwrap();
        let (imax, vmax) = q
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        let nearest = (0..g.len())
            .min_by(|a, b| dist2(&g.position(*a), &[0.5, 0.5]).total_cmp(&dist2(&g.position(*b), &[0.5, 0.5])))
            .unwrap();
        assert_eq!(dist2(&g.position(imax), &[0.5, 0.5]), dist2(&g.position(nearest), &[0.5, 0.5]));
        assert!((vmax - 5.0).abs() < 0.05);
    }

    #[test]
    fn inverse_power_checks() {
        let g = grid2(9);
        let on_node = PotentialSpec::new(PotentialKind::InversePower {
            amplitude: 1.0,
            center: vec![0.5, 0.5],
            exponent: 0.5,
        });
        assert!(matches!(sample_potential(&on_node, &g), Err(Error::Inadmissible(_))));
        let too_singular = PotentialSpec::new(PotentialKind::InversePower {
            amplitude: 1.0,
            center: vec![0.51, 0.49],
            exponent: 1.0,
        });
        assert!(matches!(sample_potential(&too_singular, &g), Err(Error::Inadmissible(_))));
        let ok = PotentialSpec::new(PotentialKind::InversePower {
            amplitude: 1.0,
            center: vec![0.51, 0.49],
            exponent: 0.8,
        });
        assert!(sample_potential(&ok, &g).unwrap().values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn inverse_power_l2_norm_converges_in_3d() {
        let spec = PotentialSpec::new(PotentialKind::InversePower {
            amplitude: 1.0,
            center: vec![0.5 + 1.0 / 3.0 / 64.0, 0.5 + 1.0 / 7.0 / 64.0, 0.5 - 1.0 / 11.0 / 64.0],
            exponent: 1.0,
        });
        let norms: Vec<f64> = [7usize, 15, 31]
            .iter()
            .map(|m| {
                let g = Arc::new(Grid::new(3, &[1.0; 3], &[*m; 3]).unwrap());
                sample_potential(&spec, &g).unwrap().lp_norm
            })
            .collect();
        for w in norms.windows(2) {
            assert!(w[1] / w[0] < 1.2, "{norms:?}");
        }
    }

    #[test]
    fn declared_bound_violation_is_a_warning() {
        let g = grid2(5);
        let q = sample_potential(
            &PotentialSpec::new(PotentialKind::Constant { value: -2.0 }).with_lower_bound(1.0),
            &g,
        )
        .unwrap();
        assert_eq!(q.recorded_c, 2.0);
        assert_eq!(q.warnings.len(), 1);
    }

    #[test]
    fn form_matches_operator() {
        let g = grid2(7);
        let spec = PotentialSpec::new(PotentialKind::GaussianBump {
            amplitude: 3.0,
            center: vec![0.3, 0.6],
            width: 0.2,
        });
        let q = sample_potential(&spec, &g).unwrap();
        let op = assemble_operator(&q);
        let u = GridField::new(
            g.clone(),
            (0..g.len()).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos())).collect(),
        )
        .unwrap();
        let v = GridField::new(
            g.clone(),
            (0..g.len()).map(|i| Complex64::new((i as f64 * 1.3).cos(), 0.2 * i as f64)).collect(),
        )
        .unwrap();
        let a = quadratic_form(&q, &u, &v).unwrap();
        let au = GridField::new(g, op.apply(u.values())).unwrap();
        let b = inner_omega(&au, &v).unwrap();
        assert!((a - b).norm() <= 1e-12 * (a.norm() + 1.0));
        let a_rev = quadratic_form(&q, &v, &u).unwrap();
        assert!((a - a_rev.conj()).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn form_rejects_boundary_values() {
        let g = grid2(4);
        let q = PotentialField::zero(g.clone());
        let u = GridField::sample(g, |_| Complex64::new(1.0, 0.0));
        assert!(quadratic_form(&q, &u, &u).is_err());
    }

    #[test]
    fn coercivity_of_shifted_negative_constant_matches_free_case() {
        let g = grid2(8);
        let free = check_form_coercivity(&PotentialField::zero(g.clone()), 5, 3).unwrap();
        let neg = sample_potential(&PotentialSpec::new(PotentialKind::Constant { value: -4.0 }).with_lower_bound(4.0), &g).unwrap();
        let shifted = check_form_coercivity(&neg, 5, 3).unwrap();
        for (a, b) in free.kappas.iter().zip(&shifted.kappas) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(free.passed && shifted.passed);
    }
}
