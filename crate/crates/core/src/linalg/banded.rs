//! Banded LU factorization with partial pivoting.
//!
//! Row `i` of the working array holds columns `i - kl ..= i + kl + ku`; the
//! extra `kl` columns absorb fill from row interchanges, as in LAPACK `gbtrf`.

use num_complex::{Complex64, ComplexFloat};

use super::sparse::CsrMatrix;

pub trait BandScalar:
    ComplexFloat<Real = f64> + std::ops::SubAssign + Send + Sync + std::fmt::Debug + 'static
{
    fn from_real(x: f64) -> Self;
}

impl BandScalar for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
}

impl BandScalar for Complex64 {
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    // U factor, row-major band storage.
    upper: Vec<T>,
    // Multipliers of elimination step k, `kl` per step.
    lower: Vec<T>,
    pivots: Vec<usize>,
}

/// Pivot magnitude below this fraction of the largest entry is treated as a
/// zero pivot.
const PIVOT_FLOOR: f64 = 1e-14;

impl<T: BandScalar> BandedLu<T> {
    /// Factors `A + shift * I` where `A` is a square sparse matrix with
    /// half-bandwidth `bw`. Returns the failing pivot on breakdown.
    pub fn factor_shifted(a: &CsrMatrix, shift: T, bw: usize) -> Result<Self, usize> {
        let n = a.n();
        let (kl, ku) = (bw, bw);
        let width = 2 * kl + ku + 1;
        let mut upper = vec![T::zero(); n * width];
        let mut scale = 0.0f64;
        for i in 0..n {
            for (j, v) in a.row(i) {
                debug_assert!(i.abs_diff(j) <= bw);
                let mut e = T::from_real(v);
                if i == j {
                    e = e + shift;
                }
                scale = scale.max(e.abs());
                upper[i * width + (j + kl - i)] = e;
            }
            if a.row(i).all(|(j, _)| j != i) {
                upper[i * width + kl] = shift;
                scale = scale.max(shift.abs());
            }
        }
        let floor = PIVOT_FLOOR * scale.max(f64::MIN_POSITIVE);

        let mut lower = vec![T::zero(); n * kl.max(1)];
        let mut pivots = vec![0usize; n];
        let at = |r: usize, c: usize| r * width + (c + kl - r);

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = upper[at(k, k)].abs();
            for r in k + 1..=last_row {
                let m = upper[at(r, k)].abs();
                if m > best {
                    best = m;
                    p = r;
                }
            }
            if !(best > floor) {
                return Err(k);
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    upper.swap(at(k, c), at(p, c));
                }
            }
            let pivot = upper[at(k, k)];
            let (head, tail) = upper.split_at_mut((k + 1) * width);
            let prow = &head[at(k, k)..=at(k, last_col)];
            for r in k + 1..=last_row {
                let rbase = (r - k - 1) * width;
                let off = k + kl - r;
                let l = tail[rbase + off] / pivot;
                lower[k * kl + (r - k - 1)] = l;
                tail[rbase + off] = T::zero();
                if l == T::zero() {
                    continue;
                }
                let row = &mut tail[rbase + off + 1..=rbase + off + (last_col - k)];
                for (dst, src) in row.iter_mut().zip(&prow[1..]) {
                    *dst -= l * *src;
                }
            }
        }

        Ok(BandedLu {
            n,
            kl,
            ku,
            width,
            upper,
            lower,
            pivots,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == T::zero() {
                continue;
            }
            let last_row = (k + kl).min(n - 1);
            for r in k + 1..=last_row {
                b[r] -= self.lower[k * kl + (r - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + kl + ku).min(n - 1);
            let base = k * width + kl - k;
            let mut acc = b[k];
            for c in k + 1..=last_col {
                acc -= self.upper[base + c] * b[c];
            }
            b[k] = acc / self.upper[base + k];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, bw: usize, rng: &mut ChaCha8Rng) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                (i.saturating_sub(bw)..(i + bw + 1).min(n))
                    .map(|j| (j, rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn solves_random_nonsymmetric_band_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, bw) in [(1, 0), (7, 2), (40, 5), (33, 32)] {
            let a = random_band(n, bw, &mut rng);
            let shift = Complex64::new(0.3, -0.7);
            let lu = BandedLu::factor_shifted(&a, shift, bw).unwrap();
            let x: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let mut b = a.mul_complex(&x);
            for (bi, xi) in b.iter_mut().zip(&x) {
                *bi += shift * xi;
            }
            let y = lu.solve(&b);
            let err = y.iter().zip(&x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "n={n} bw={bw} err={err}");
        }
    }

    #[test]
    fn zero_leading_entry_needs_a_row_swap() {
        let a = CsrMatrix::from_rows(vec![vec![(0, 0.0), (1, 1.0)], vec![(0, 1.0), (1, 0.0)]]);
        let lu = BandedLu::factor_shifted(&a, 0.0f64, 1).unwrap();
        assert_eq!(lu.solve(&[2.0, 3.0]), vec![3.0, 2.0]);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = CsrMatrix::from_rows(vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 1.0), (1, 1.0)],
        ]);
        assert_eq!(BandedLu::factor_shifted(&a, 0.0f64, 1).unwrap_err(), 1);
    }
}
