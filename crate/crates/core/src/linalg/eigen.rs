//! Symmetric eigensolvers: dense (faer) and block shift-invert Krylov.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::banded::BandedLu;
use super::sparse::CsrMatrix;

/// Eigenvalues ascending with Euclidean-orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct RawEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Eigendecomposition on the calling thread. faer's default splits the work
/// by the rayon pool size, which changes rounding with the thread count.
fn sequential_evd(a: faer::MatRef<'_, f64>) -> Result<(faer::diag::Diag<f64>, faer::Mat<f64>), faer::linalg::evd::EvdError> {
    use faer::dyn_stack::{MemBuffer, MemStack};
    use faer::linalg::evd;
    let n = a.nrows();
    let mut u = faer::Mat::zeros(n, n);
    let mut s = faer::diag::Diag::zeros(n);
    let scratch = evd::self_adjoint_evd_scratch::<f64>(n, evd::ComputeEigenvectors::Yes, faer::Par::Seq, Default::default());
    evd::self_adjoint_evd(
        a,
        s.as_mut(),
        Some(u.as_mut()),
        faer::Par::Seq,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )?;
    Ok((s, u))
}

pub fn dense_symmetric(a: &CsrMatrix) -> Result<RawEigen, String> {
    let dense = a.to_dense();
    let (s, u) = sequential_evd(dense.as_ref()).map_err(|e| format!("{e:?}"))?;
    let s = s.column_vector();
    let n = a.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|i, j| s[*i].total_cmp(&s[*j]));
    let values = order.iter().map(|i| s[*i]).collect();
    let vectors = order
        .iter()
        .map(|j| (0..n).map(|i| u[(i, *j)]).collect())
        .collect();
    Ok(RawEigen { values, vectors })
}

fn small_symmetric(h: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = h.len();
    let mat = faer::Mat::<f64>::from_fn(m, m, |i, j| h[i][j]);
    let (s, u) = sequential_evd(mat.as_ref()).expect("projected eigenproblem");
    let s = s.column_vector();
    let values = (0..m).map(|i| s[i]).collect();
    let vectors = (0..m).map(|j| (0..m).map(|i| u[(i, j)]).collect()).collect();
    (values, vectors)
}

#[derive(Debug, Clone)]
pub struct KrylovOptions {
    pub block: usize,
    /// Cap on the Krylov basis dimension (clamped to the matrix size); zero
    /// selects `max(6k + 64, 256)`.
    pub max_dim: usize,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            block: 8,
            max_dim: 0,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovFailure {
    pub index: usize,
    pub reason: String,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthogonalizes `w` against `basis` twice; returns `None` when `w` is
/// numerically inside the span.
fn orthonormalize(basis: &[Vec<f64>], mut w: Vec<f64>) -> Option<Vec<f64>> {
    let start = norm(&w);
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, &w);
            axpy(-c, v, &mut w);
        }
    }
    let nrm = norm(&w);
    if nrm <= 1e-10 * start {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= nrm);
    Some(w)
}

/// Lowest `k` eigenpairs of a symmetric banded matrix by block Krylov
/// iteration on `(A - sigma)^{-1}`, with `sigma` below a Gershgorin bound.
///
/// Converged pairs satisfy `|A x - lambda x| <= tol (1 + |lambda|)`.
pub fn shift_invert_lowest(
    a: &CsrMatrix,
    k: usize,
    tol: f64,
    opts: &KrylovOptions,
) -> Result<RawEigen, KrylovFailure> {
    let n = a.n();
    assert!(k >= 1 && k <= n);
    let bw = a.bandwidth();
    let lower_bound = (0..n)
        .map(|i| {
            let mut d = 0.0;
            let mut off = 0.0;
            for (j, v) in a.row(i) {
                if j == i {
                    d = v;
                } else {
                    off += v.abs();
                }
            }
            d - off
        })
        .fold(f64::INFINITY, f64::min);
    // Close below the spectrum so the lowest eigenvalues dominate (A - sigma)^{-1}.
    let sigma = lower_bound - 1e-2 * (1.0 + lower_bound.abs());
    let lu = BandedLu::factor_shifted(a, -sigma, bw).map_err(|p| KrylovFailure {
        index: 0,
        reason: format!("shifted factorization broke down at pivot {p}"),
    })?;

    let block = opts.block.max(1).min(n);
    let max_dim = if opts.max_dim == 0 {
        (6 * k + 64).max(256)
    } else {
        opts.max_dim
    }
    .min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut proj: Vec<Vec<f64>> = Vec::new();

    let mut pending: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut next_check = (k + block).min(max_dim);
    let mut last_failure = KrylovFailure {
        index: 0,
        reason: "Krylov space exhausted before the first Rayleigh-Ritz step".into(),
    };

    loop {
        let mut added = Vec::new();
        for w in pending.drain(..) {
            if basis.len() >= max_dim {
                break;
            }
            if let Some(v) = orthonormalize(&basis, w) {
                let tv = lu.solve(&v);
                // Extend the projected matrix with the new row/column.
                let row: Vec<f64> = images.iter().map(|img| dot(img, &v)).collect();
                for (r, val) in proj.iter_mut().zip(&row) {
                    r.push(*val);
                }
                let mut new_row = row;
                new_row.push(dot(&v, &tv));
                proj.push(new_row);
                basis.push(v);
                images.push(tv.clone());
                added.push(tv);
            }
        }

        let dim = basis.len();
        let exhausted = added.is_empty() || dim >= max_dim;
        if dim >= k && (dim >= next_check || exhausted) {
            match rayleigh_ritz(a, &basis, &proj, k, tol) {
                Ok(eig) => return Ok(eig),
                Err(f) => last_failure = f,
            }
            next_check = dim + (dim / 4).max(block);
        }
        if exhausted {
            if dim == n {
                // Full space: Rayleigh-Ritz is exact, failure is numerical.
                return Err(last_failure);
            }
            if added.is_empty() {
                // Deflated block; restart with fresh random directions.
                pending = (0..block)
                    .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
                    .collect();
                if basis.len() < max_dim {
                    continue;
                }
            }
            return Err(last_failure);
        }
        pending = added;
    }
}

fn rayleigh_ritz(
    a: &CsrMatrix,
    basis: &[Vec<f64>],
    proj: &[Vec<f64>],
    k: usize,
    tol: f64,
) -> Result<RawEigen, KrylovFailure> {
    let dim = basis.len();
    let n = a.n();
    let sym: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| 0.5 * (proj[i][j] + proj[j][i])).collect())
        .collect();
    let (theta, s) = small_symmetric(&sym);
    // Largest theta corresponds to the lowest eigenvalue of A.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|i, j| theta[*j].total_cmp(&theta[*i]));

    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for (rank, &col) in order.iter().take(k).enumerate() {
        let mut y = vec![0.0; n];
        for (v, c) in basis.iter().zip(&s[col]) {
            axpy(*c, v, &mut y);
        }
        let nrm = norm(&y);
        y.iter_mut().for_each(|x| *x /= nrm);
        let ay = a.mul_real(&y);
        let lambda = dot(&y, &ay);
        let res = ay
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - lambda * q).powi(2))
            .sum::<f64>()
            .sqrt();
        if !(res <= tol * (1.0 + lambda.abs())) {
            return Err(KrylovFailure {
                index: rank,
                reason: format!("residual {res:.3e} at lambda {lambda:.6e}"),
            });
        }
        values.push(lambda);
        vectors.push(y);
    }
    Ok(RawEigen { values, vectors })
}
