//! Dense complex linear algebra for small matrices.
//!
//! Provides the Hermitian eigensolver (cyclic Jacobi) behind spin rotations,
//! Schmidt decompositions, and dense test oracles, plus matrix exponentials of
//! Hermitian generators and the symmetric-tridiagonal bisection used by the
//! Lanczos bound estimator. Dimensions stay small (≤ a few hundred), so an
//! O(n³)-per-sweep Jacobi iteration is simpler and more than fast enough.

use crate::{Error, Result};
use num_complex::Complex64 as C64;
use std::ops::{Index, IndexMut};

/// Dense row-major complex matrix.
#[derive(Clone, Debug)]
pub struct Mat {
    n_rows: usize,
    n_cols: usize,
    data: Vec<C64>,
}

impl Mat {
    /// Zero matrix of the given shape.
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat { n_rows, n_cols, data: vec![C64::new(0.0, 0.0); n_rows * n_cols] }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Mat {
        let mut out = Mat::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.n_cols, rhs.n_rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.n_rows, rhs.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let v = self[(i, k)];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.n_cols {
                    out[(i, j)] += v * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.n_cols, x.len(), "matvec shape mismatch");
        let mut y = vec![C64::new(0.0, 0.0); self.n_rows];
        for i in 0..self.n_rows {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..self.n_cols {
                acc += self[(i, j)] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Sum of the diagonal.
    pub fn trace(&self) -> C64 {
        assert_eq!(self.n_rows, self.n_cols);
        (0..self.n_rows).map(|i| self[(i, i)]).sum()
    }

    /// Element-wise difference `self − rhs`.
    pub fn sub(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.n_rows, self.n_cols), (rhs.n_rows, rhs.n_cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(rhs.data.iter()) {
            *a -= b;
        }
        out
    }

    /// Largest absolute deviation from the conjugate transpose.
    pub fn hermiticity_defect(&self) -> f64 {
        assert_eq!(self.n_rows, self.n_cols);
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for j in i..self.n_cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// Relative off-diagonal tolerance at which the Jacobi sweep stops.
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigendecomposition `A = V diag(w) V†` of a Hermitian matrix by cyclic
/// Jacobi rotations.
///
/// Returns eigenvalues ascending and the unitary `V` with eigenvectors as
/// columns. Each column's largest-magnitude entry is made real and positive,
/// so the decomposition is deterministic. Off-diagonal mass is reduced below
/// `1e-13` relative to the Frobenius norm.
pub fn eigh(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    assert_eq!(a.n_rows, a.n_cols, "eigh needs a square matrix");
    let n = a.n_rows;
    debug_assert!(
        a.hermiticity_defect() <= 1e-10 * (1.0 + a.frobenius_norm()),
        "eigh input is not Hermitian"
    );
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    if n <= 1 {
        let w = if n == 1 { vec![m[(0, 0)].re] } else { vec![] };
        return Ok((w, v));
    }
    let norm = m.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= JACOBI_TOL * norm {
            let mut w: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
            sort_and_normalize(&mut w, &mut v);
            return Ok((w, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                // Phase factor u = apq/|apq| reduces the 2×2 block to the real
                // symmetric case; then the classic smaller-angle rotation.
                let u = apq / r;
                let tau = (m[(p, p)].re - m[(q, q)].re) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Column update A := A·G with G[:,p] = (c, s·ū), G[:,q] = (−s·u, c).
                for i in 0..n {
                    let aip = m[(i, p)];
                    let aiq = m[(i, q)];
                    m[(i, p)] = c * aip + s * u.conj() * aiq;
                    m[(i, q)] = -s * u * aip + c * aiq;
                }
                // Row update A := G†·A with rows (c, s·u) and (−s·ū, c).
                for jj in 0..n {
                    let apj = m[(p, jj)];
                    let aqj = m[(q, jj)];
                    m[(p, jj)] = c * apj + s * u * aqj;
                    m[(q, jj)] = -s * u.conj() * apj + c * aqj;
                }
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip + s * u.conj() * viq;
                    v[(i, q)] = -s * u * vip + c * viq;
                }
            }
        }
    }
    Err(Error::Numerical(format!(
        "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps (dim {n})"
    )))
}

/// Sort eigenpairs ascending and fix each eigenvector's global phase.
fn sort_and_normalize(w: &mut [f64], v: &mut Mat) {
    let n = w.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i].partial_cmp(&w[j]).expect("NaN eigenvalue"));
    let src = v.clone();
    let w_src = w.to_vec();
    for (dst, &s) in order.iter().enumerate() {
        w[dst] = w_src[s];
        // Largest-magnitude entry (first on ties) becomes real positive.
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for i in 0..n {
            let mag = src[(i, s)].norm();
            if mag > best_mag + 1e-15 {
                best_mag = mag;
                best = i;
            }
        }
        let pivot = src[(best, s)];
        let phase = if best_mag > 0.0 { pivot.conj() / best_mag } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            v[(i, dst)] = src[(i, s)] * phase;
        }
    }
}

/// `exp(i·s·A)` for Hermitian `A`, by exact eigendecomposition.
pub fn expm_i_hermitian(a: &Mat, s: f64) -> Result<Mat> {
    let n = a.n_rows();
    let (w, v) = eigh(a)?;
    // V · diag(e^{i s w}) · V†
    let mut scaled = v.clone();
    for (k, &wk) in w.iter().enumerate() {
        let ph = C64::from_polar(1.0, s * wk);
        for i in 0..n {
            scaled[(i, k)] *= ph;
        }
    }
    Ok(scaled.matmul(&v.adjoint()))
}

/// Extreme eigenvalues `(min, max)` of a symmetric tridiagonal matrix with
/// diagonal `diag` and off-diagonal `off` (`off.len() == diag.len() − 1`),
/// found by Sturm-sequence bisection.
pub fn tridiagonal_extremes(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    assert!(n > 0 && off.len() + 1 == n);
    // Gershgorin interval for the tridiagonal matrix.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let rad = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - rad);
        hi = hi.max(diag[i] + rad);
    }
    if n == 1 {
        return (diag[0], diag[0]);
    }
    // Number of eigenvalues strictly below x (count of negative LDLᵀ pivots).
    let count_below = |x: f64| -> usize {
        let mut cnt = 0usize;
        let mut d = diag[0] - x;
        if d < 0.0 {
            cnt += 1;
        }
        for i in 1..n {
            let denom = if d == 0.0 { 1e-300 } else { d };
            d = diag[i] - x - off[i - 1] * off[i - 1] / denom;
            if d < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let bisect = |target: usize| -> f64 {
        // Smallest x in [lo, hi] with count_below(x) ≥ target.
        let (mut a, mut b) = (lo, hi + (hi - lo).abs() * 1e-15 + 1e-300);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if count_below(mid) >= target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (bisect(1), bisect(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Deterministic low-quality generator, good enough for test matrices.
    struct Lcg(u64);
    impl Lcg {
        fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    fn random_hermitian(n: usize, seed: u64) -> Mat {
        let mut rng = Lcg(seed);
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = C64::new(2.0 * rng.next_f64(), 0.0);
            for j in (i + 1)..n {
                let v = C64::new(rng.next_f64(), rng.next_f64());
                a[(i, j)] = v;
                a[(j, i)] = v.conj();
            }
        }
        a
    }

    #[test]
    fn eigh_diagonal_matrix_sorted() {
        let mut a = Mat::zeros(3, 3);
        a[(0, 0)] = C64::new(2.0, 0.0);
        a[(1, 1)] = C64::new(-1.0, 0.0);
        a[(2, 2)] = C64::new(0.5, 0.0);
        let (w, v) = eigh(&a).unwrap();
        assert_abs_diff_eq!(w[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(w[2], 2.0, epsilon = 1e-14);
        // Eigenvectors are permuted unit columns with positive pivots.
        assert_abs_diff_eq!(v[(1, 0)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[(2, 1)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[(0, 2)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigh_known_complex_two_by_two() {
        // [[1, i], [−i, 1]] has eigenvalues 0 and 2.
        let mut a = Mat::zeros(2, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        a[(1, 1)] = C64::new(1.0, 0.0);
        a[(0, 1)] = C64::new(0.0, 1.0);
        a[(1, 0)] = C64::new(0.0, -1.0);
        let (w, v) = eigh(&a).unwrap();
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(w[1], 2.0, epsilon = 1e-13);
        for k in 0..2 {
            let col: Vec<C64> = (0..2).map(|i| v[(i, k)]).collect();
            let av = a.matvec(&col);
            for i in 0..2 {
                assert_abs_diff_eq!((av[i] - w[k] * col[i]).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        let a = random_hermitian(9, 0x5eed);
        let (w, v) = eigh(&a).unwrap();
        // V unitary.
        let vhv = v.adjoint().matmul(&v);
        assert_abs_diff_eq!(vhv.sub(&Mat::identity(9)).frobenius_norm(), 0.0, epsilon = 1e-12);
        // A = V diag(w) V†.
        let mut scaled = v.clone();
        for (k, &wk) in w.iter().enumerate() {
            for i in 0..9 {
                scaled[(i, k)] *= wk;
            }
        }
        let rec = scaled.matmul(&v.adjoint());
        assert_abs_diff_eq!(rec.sub(&a).frobenius_norm(), 0.0, epsilon = 1e-11 * a.frobenius_norm());
        // Trace preserved.
        let tr: f64 = (0..9).map(|i| a[(i, i)].re).sum();
        assert_abs_diff_eq!(w.iter().sum::<f64>(), tr, epsilon = 1e-11);
    }

    #[test]
    fn expm_of_diagonal_gives_phases() {
        let mut a = Mat::zeros(2, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        a[(1, 1)] = C64::new(-1.0, 0.0);
        let phi = 0.37;
        let e = expm_i_hermitian(&a, phi).unwrap();
        assert_abs_diff_eq!((e[(0, 0)] - C64::from_polar(1.0, phi)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((e[(1, 1)] - C64::from_polar(1.0, -phi)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[(0, 1)].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn expm_is_unitary_for_random_generator() {
        let a = random_hermitian(6, 42);
        let u = expm_i_hermitian(&a, 1.3).unwrap();
        let uhu = u.adjoint().matmul(&u);
        assert_abs_diff_eq!(uhu.sub(&Mat::identity(6)).frobenius_norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tridiagonal_extremes_match_dense_solver() {
        let diag = [0.3, -1.2, 2.5, 0.0, 1.1, -0.4];
        let off = [0.7, 0.2, -0.9, 0.5, 1.3];
        let n = diag.len();
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = C64::new(diag[i], 0.0);
            if i + 1 < n {
                a[(i, i + 1)] = C64::new(off[i], 0.0);
                a[(i + 1, i)] = C64::new(off[i], 0.0);
            }
        }
        let (w, _) = eigh(&a).unwrap();
        let (lo, hi) = tridiagonal_extremes(&diag, &off);
        assert_abs_diff_eq!(lo, w[0], epsilon = 1e-10);
        assert_abs_diff_eq!(hi, w[n - 1], epsilon = 1e-10);
    }

    #[test]
    fn tridiagonal_extremes_single_element() {
        assert_eq!(tridiagonal_extremes(&[4.2], &[]), (4.2, 4.2));
    }
}
