//! Product Hilbert-space basis, spin and boson operators, and the Dicke and
//! generalized Dicke-type Hamiltonians as sparse operators.
//!
//! The model is a pseudo-spin of length `j` (2j two-level atoms) coupled to a
//! single bosonic mode:
//!
//! ```text
//! H = −Δ·Jz + λ·(a† + a)·Jx + Ω·a†a
//! ```
//!
//! The product basis is |j,m⟩⊗|n⟩ with m-major, n-minor row-major layout and
//! m ordered descending from +j (so index 0 is |j,j⟩⊗|0⟩). `m` is handled as
//! the doubled integer `2m` throughout to keep half-integer arithmetic exact.

use crate::linalg::Mat;
use crate::{Error, Result};
use num_complex::Complex64 as C64;

const C_ZERO: C64 = C64::new(0.0, 0.0);
const C_ONE: C64 = C64::new(1.0, 0.0);

/// Hard cap on product-space dimension; guards accidental huge allocations.
pub const MAX_DIM: usize = 1 << 20;

/// Pseudo-spin length `j`, stored as the integer `2j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinLength {
    two_j: u32,
}

impl SpinLength {
    /// From the doubled value `2j`.
    pub fn from_two_j(two_j: u32) -> Result<Self> {
        if (two_j as usize) + 1 > MAX_DIM {
            return Err(Error::InvalidSpin(format!("2j = {two_j} is beyond the supported size")));
        }
        Ok(SpinLength { two_j })
    }

    /// From `j` itself; rejects values that are not half-integers.
    pub fn from_j(j: f64) -> Result<Self> {
        if !j.is_finite() || j < 0.0 {
            return Err(Error::InvalidSpin(format!("j = {j} must be a non-negative half-integer")));
        }
        let two_j = (2.0 * j).round();
        if (2.0 * j - two_j).abs() > 1e-9 {
            return Err(Error::InvalidSpin(format!("j = {j} is not a half-integer")));
        }
        Self::from_two_j(two_j as u32)
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    /// Number of magnetic sublevels, `2j + 1`.
    pub fn multiplicity(&self) -> usize {
        self.two_j as usize + 1
    }

    /// Doubled magnetic quantum number at basis position `i` (m descending:
    /// `i = 0` is `m = +j`).
    pub fn m2_at(&self, i: usize) -> i64 {
        debug_assert!(i < self.multiplicity());
        self.two_j as i64 - 2 * i as i64
    }

    /// Basis position of the sublevel with doubled quantum number `m2`.
    pub fn m_index(&self, m2: i64) -> usize {
        let tj = self.two_j as i64;
        debug_assert!(m2.abs() <= tj && (tj - m2) % 2 == 0, "invalid m2 = {m2} for 2j = {tj}");
        ((tj - m2) / 2) as usize
    }

    /// All doubled quantum numbers in basis order (`+2j, +2j−2, …, −2j`).
    pub fn m2_values(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.multiplicity()).map(|i| self.m2_at(i))
    }
}

/// Bijective (m, n) ↔ flat-index mapping over the product space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisIndex {
    spin: SpinLength,
    n_max: usize,
}

impl BasisIndex {
    pub fn new(spin: SpinLength, n_max: usize) -> Result<Self> {
        let dim = spin.multiplicity().checked_mul(n_max + 1).unwrap_or(usize::MAX);
        if dim > MAX_DIM {
            return Err(Error::DimensionOverflow { dim, max: MAX_DIM });
        }
        Ok(BasisIndex { spin, n_max })
    }

    pub fn spin(&self) -> SpinLength {
        self.spin
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.spin.multiplicity() * (self.n_max + 1)
    }

    /// Flat index of |j, m2/2⟩⊗|n⟩.
    pub fn flat(&self, m2: i64, n: usize) -> usize {
        debug_assert!(n <= self.n_max);
        self.spin.m_index(m2) * (self.n_max + 1) + n
    }

    /// Inverse of [`BasisIndex::flat`].
    pub fn unflat(&self, idx: usize) -> (i64, usize) {
        debug_assert!(idx < self.dim());
        let per_m = self.n_max + 1;
        (self.spin.m2_at(idx / per_m), idx % per_m)
    }
}

/// Sparse complex matrix in sorted coordinate form.
///
/// Entries are deduplicated and ordered by (row, col) at assembly, so equal
/// operators have identical entry lists. A real-valued copy of the values is
/// kept when every entry is real, which roughly halves the work in the
/// propagation kernels (the Dicke Hamiltonian is real in the product basis).
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    rows: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<C64>,
    vals_re: Option<Vec<f64>>,
}

impl SparseOperator {
    /// Assemble from (row, col, value) triplets: sorts, sums duplicates, and
    /// drops exact zeros.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(u32, u32, C64)>) -> Self {
        assert!(dim <= MAX_DIM, "operator dimension {dim} exceeds the configured maximum");
        for &(r, c, _) in &triplets {
            assert!((r as usize) < dim && (c as usize) < dim, "triplet index out of range");
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut rows = Vec::with_capacity(triplets.len());
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if let (Some(&pr), Some(&pc)) = (rows.last(), cols.last()) {
                if pr == r && pc == c {
                    *vals.last_mut().expect("vals tracks rows") += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        // Remove entries that cancelled exactly (e.g. λ = 0 couplings).
        let mut k = 0;
        for i in 0..vals.len() {
            if vals[i] != C_ZERO {
                rows[k] = rows[i];
                cols[k] = cols[i];
                vals[k] = vals[i];
                k += 1;
            }
        }
        rows.truncate(k);
        cols.truncate(k);
        vals.truncate(k);
        let vals_re = if vals.iter().all(|v| v.im == 0.0) {
            Some(vals.iter().map(|v| v.re).collect())
        } else {
            None
        };
        SparseOperator { dim, rows, cols, vals, vals_re }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim as u32).map(|i| (i, i, C_ONE)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries in deterministic (row, col) order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, C64)> + '_ {
        (0..self.vals.len()).map(|k| (self.rows[k], self.cols[k], self.vals[k]))
    }

    /// Kronecker product `self ⊗ rhs` (self-major index layout).
    pub fn kron(&self, rhs: &SparseOperator) -> SparseOperator {
        let dim = self.dim.checked_mul(rhs.dim).expect("kron dimension overflow");
        assert!(dim <= MAX_DIM, "kron dimension {dim} exceeds the configured maximum");
        let db = rhs.dim as u32;
        let mut triplets = Vec::with_capacity(self.nnz() * rhs.nnz());
        for (ra, ca, va) in self.entries() {
            for (rb, cb, vb) in rhs.entries() {
                triplets.push((ra * db + rb, ca * db + cb, va * vb));
            }
        }
        SparseOperator::from_triplets(dim, triplets)
    }

    /// Weighted sum Σ cᵢ·Aᵢ of same-dimension operators.
    pub fn linear_combination(terms: &[(C64, &SparseOperator)]) -> SparseOperator {
        assert!(!terms.is_empty(), "empty linear combination");
        let dim = terms[0].1.dim;
        let mut triplets = Vec::new();
        for &(coeff, op) in terms {
            assert_eq!(op.dim, dim, "linear combination dimension mismatch");
            triplets.extend(op.entries().map(|(r, c, v)| (r, c, coeff * v)));
        }
        SparseOperator::from_triplets(dim, triplets)
    }

    pub fn scale(&self, coeff: C64) -> SparseOperator {
        SparseOperator::linear_combination(&[(coeff, self)])
    }

    pub fn add(&self, rhs: &SparseOperator) -> SparseOperator {
        SparseOperator::linear_combination(&[(C_ONE, self), (C_ONE, rhs)])
    }

    /// Sparse matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &SparseOperator) -> SparseOperator {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        // Row offsets for rhs (its entries are sorted by row already).
        let mut row_start = vec![0usize; rhs.dim + 1];
        for &r in &rhs.rows {
            row_start[r as usize + 1] += 1;
        }
        for i in 0..rhs.dim {
            row_start[i + 1] += row_start[i];
        }
        let mut acc: std::collections::HashMap<(u32, u32), C64> = std::collections::HashMap::new();
        for (ra, ca, va) in self.entries() {
            let (lo, hi) = (row_start[ca as usize], row_start[ca as usize + 1]);
            for k in lo..hi {
                *acc.entry((ra, rhs.cols[k])).or_insert(C_ZERO) += va * rhs.vals[k];
            }
        }
        let triplets = acc.into_iter().map(|((r, c), v)| (r, c, v)).collect();
        SparseOperator::from_triplets(self.dim, triplets)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> SparseOperator {
        let triplets = self.entries().map(|(r, c, v)| (c, r, v.conj())).collect();
        SparseOperator::from_triplets(self.dim, triplets)
    }

    /// Largest entrywise deviation from the conjugate transpose.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        // Both entry lists are sorted by (row, col); merge-walk them.
        let mut worst = 0.0f64;
        let (mut i, mut k) = (0usize, 0usize);
        while i < self.nnz() || k < adj.nnz() {
            let key_a = if i < self.nnz() { (self.rows[i], self.cols[i]) } else { (u32::MAX, u32::MAX) };
            let key_b = if k < adj.nnz() { (adj.rows[k], adj.cols[k]) } else { (u32::MAX, u32::MAX) };
            let d = match key_a.cmp(&key_b) {
                std::cmp::Ordering::Less => {
                    i += 1;
                    self.vals[i - 1].norm()
                }
                std::cmp::Ordering::Greater => {
                    k += 1;
                    adj.vals[k - 1].norm()
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    k += 1;
                    (self.vals[i - 1] - adj.vals[k - 1]).norm()
                }
            };
            worst = worst.max(d);
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Gershgorin bounds `(lo, hi)` for a Hermitian operator: every eigenvalue
    /// lies in some disc |x − A_ii| ≤ Σ_{k≠i} |A_ik|.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut center = vec![0.0f64; self.dim];
        let mut radius = vec![0.0f64; self.dim];
        for (r, c, v) in self.entries() {
            if r == c {
                center[r as usize] = v.re;
            } else {
                radius[r as usize] += v.norm();
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            lo = lo.min(center[i] - radius[i]);
            hi = hi.max(center[i] + radius[i]);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r as usize, c as usize)] += v;
        }
        m
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C_ZERO; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = A·x`, overwriting `y`.
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim, "matvec dimension mismatch");
        assert_eq!(y.len(), self.dim, "matvec output dimension mismatch");
        y.fill(C_ZERO);
        if let Some(vr) = &self.vals_re {
            for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(vr) {
                let xc = x[c as usize];
                let yr = &mut y[r as usize];
                yr.re += v * xc.re;
                yr.im += v * xc.im;
            }
        } else {
            for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
                y[r as usize] += v * x[c as usize];
            }
        }
    }

    /// Three-term recurrence kernel `y = h_coeff·(A·x) + shift_coeff·x − z`,
    /// the inner loop of Chebyshev propagation, fused to avoid extra passes.
    pub fn fused_recurrence(&self, h_coeff: f64, shift_coeff: f64, x: &[C64], z: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(z.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            y[i] = shift_coeff * x[i] - z[i];
        }
        if let Some(vr) = &self.vals_re {
            for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(vr) {
                let xc = x[c as usize];
                let w = h_coeff * v;
                let yr = &mut y[r as usize];
                yr.re += w * xc.re;
                yr.im += w * xc.im;
            }
        } else {
            for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
                y[r as usize] += h_coeff * v * x[c as usize];
            }
        }
    }
}

/// Model parameters of the Dicke Hamiltonian plus basis sizes.
#[derive(Clone, Copy, Debug)]
pub struct ModelParams {
    pub delta: f64,
    pub omega: f64,
    pub lambda: f64,
    pub spin: SpinLength,
    pub n_max: usize,
}

impl ModelParams {
    pub fn new(delta: f64, omega: f64, lambda: f64, spin: SpinLength, n_max: usize) -> Result<Self> {
        if !delta.is_finite() || !omega.is_finite() || !lambda.is_finite() {
            return Err(Error::InvalidParams("delta, omega, lambda must be finite".into()));
        }
        if omega <= 0.0 {
            return Err(Error::InvalidParams(format!("field frequency omega = {omega} must be positive")));
        }
        if lambda < 0.0 {
            return Err(Error::InvalidParams(format!("coupling lambda = {lambda} must be non-negative")));
        }
        // Surface oversized bases here rather than at first operator build.
        BasisIndex::new(spin, n_max)?;
        Ok(ModelParams { delta, omega, lambda, spin, n_max })
    }

    pub fn basis(&self) -> BasisIndex {
        BasisIndex::new(self.spin, self.n_max).expect("validated at construction")
    }
}

/// Parameters of the generalized Dicke-type Hamiltonian
/// `H = ω·Jz + Ω·a†a + g(aJ₊ + a†J₋) + ḡ(a†J₊ + aJ₋)`.
#[derive(Clone, Copy, Debug)]
pub struct GeneralizedParams {
    pub omega_z: f64,
    pub omega: f64,
    pub g: f64,
    pub g_bar: f64,
}

impl GeneralizedParams {
    pub fn new(omega_z: f64, omega: f64, g: f64, g_bar: f64) -> Result<Self> {
        if ![omega_z, omega, g, g_bar].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("generalized parameters must be finite".into()));
        }
        Ok(GeneralizedParams { omega_z, omega, g, g_bar })
    }
}

/// The five standard angular-momentum operators on the (2j+1)-dim spin space.
pub struct SpinOperators {
    pub jx: SparseOperator,
    pub jy: SparseOperator,
    pub jz: SparseOperator,
    pub jplus: SparseOperator,
    pub jminus: SparseOperator,
}

/// Standard matrix elements: Jz|m⟩ = m|m⟩, J±|m⟩ = √(j(j+1)−m(m±1))|m±1⟩.
pub fn build_spin_operators(spin: SpinLength) -> SpinOperators {
    let dim = spin.multiplicity();
    let tj = spin.two_j() as i64;

    let jz = SparseOperator::from_triplets(
        dim,
        (0..dim).map(|i| (i as u32, i as u32, C64::new(spin.m2_at(i) as f64 / 2.0, 0.0))).collect(),
    );

    // J₊ raises m, i.e. moves one step toward basis position 0.
    let mut up = Vec::new();
    for col in 1..dim {
        let m2 = spin.m2_at(col);
        let val = (((tj * (tj + 2) - m2 * (m2 + 2)) as f64) / 4.0).sqrt();
        up.push((col as u32 - 1, col as u32, C64::new(val, 0.0)));
    }
    let jplus = SparseOperator::from_triplets(dim, up);
    let jminus = jplus.adjoint();

    let half = C64::new(0.5, 0.0);
    let jx = SparseOperator::linear_combination(&[(half, &jplus), (half, &jminus)]);
    let jy = SparseOperator::linear_combination(&[
        (C64::new(0.0, -0.5), &jplus),
        (C64::new(0.0, 0.5), &jminus),
    ]);

    SpinOperators { jx, jy, jz, jplus, jminus }
}

/// Ladder and number operators on the (n_max+1)-dim truncated Fock space.
pub struct BosonOperators {
    pub a: SparseOperator,
    pub adag: SparseOperator,
    pub num: SparseOperator,
}

pub fn build_boson_operators(n_max: usize) -> BosonOperators {
    let dim = n_max + 1;
    let lowering = (1..dim)
        .map(|n| (n as u32 - 1, n as u32, C64::new((n as f64).sqrt(), 0.0)))
        .collect();
    let a = SparseOperator::from_triplets(dim, lowering);
    let adag = a.adjoint();
    // Built directly so the diagonal is exactly n (√n·√n rounds).
    let num = SparseOperator::from_triplets(
        dim,
        (1..dim).map(|n| (n as u32, n as u32, C64::new(n as f64, 0.0))).collect(),
    );
    BosonOperators { a, adag, num }
}

/// `H = −Δ·Jz⊗1 + λ·Jx⊗(a†+a) + Ω·1⊗a†a` on the product basis.
pub fn build_dicke_hamiltonian(p: &ModelParams) -> Result<SparseOperator> {
    let basis = BasisIndex::new(p.spin, p.n_max)?;
    let spin = build_spin_operators(basis.spin());
    let field = build_boson_operators(basis.n_max());
    let spin_id = SparseOperator::identity(basis.spin().multiplicity());
    let field_id = SparseOperator::identity(basis.n_max() + 1);

    let x_field = field.adag.add(&field.a);
    let h = SparseOperator::linear_combination(&[
        (C64::new(-p.delta, 0.0), &spin.jz.kron(&field_id)),
        (C64::new(p.lambda, 0.0), &spin.jx.kron(&x_field)),
        (C64::new(p.omega, 0.0), &spin_id.kron(&field.num)),
    ]);
    Ok(h)
}

/// `H = ω·Jz + Ω·a†a + g(aJ₊ + a†J₋) + ḡ(a†J₊ + aJ₋)` on the product basis.
pub fn build_generalized_hamiltonian(
    gp: &GeneralizedParams,
    spin: SpinLength,
    n_max: usize,
) -> Result<SparseOperator> {
    let basis = BasisIndex::new(spin, n_max)?;
    let sp = build_spin_operators(basis.spin());
    let field = build_boson_operators(basis.n_max());
    let spin_id = SparseOperator::identity(basis.spin().multiplicity());
    let field_id = SparseOperator::identity(basis.n_max() + 1);

    let h = SparseOperator::linear_combination(&[
        (C64::new(gp.omega_z, 0.0), &sp.jz.kron(&field_id)),
        (C64::new(gp.omega, 0.0), &spin_id.kron(&field.num)),
        (C64::new(gp.g, 0.0), &sp.jplus.kron(&field.a)),
        (C64::new(gp.g, 0.0), &sp.jminus.kron(&field.adag)),
        (C64::new(gp.g_bar, 0.0), &sp.jplus.kron(&field.adag)),
        (C64::new(gp.g_bar, 0.0), &sp.jminus.kron(&field.a)),
    ]);
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spin(two_j: u32) -> SpinLength {
        SpinLength::from_two_j(two_j).unwrap()
    }

    fn max_entry_diff(a: &SparseOperator, b: &SparseOperator) -> f64 {
        let diff = SparseOperator::linear_combination(&[(C_ONE, a), (C64::new(-1.0, 0.0), b)]);
        diff.entries().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spin_length_validation() {
        assert_eq!(SpinLength::from_j(1.5).unwrap().two_j(), 3);
        assert_eq!(SpinLength::from_j(0.5).unwrap().multiplicity(), 2);
        assert!(SpinLength::from_j(0.3).is_err());
        assert!(SpinLength::from_j(-0.5).is_err());
    }

    #[test]
    fn basis_layout_is_m_major_descending() {
        let basis = BasisIndex::new(spin(3), 2).unwrap();
        assert_eq!(basis.dim(), 12);
        // m = +3/2 block first, n inner.
        assert_eq!(basis.flat(3, 0), 0);
        assert_eq!(basis.flat(3, 2), 2);
        assert_eq!(basis.flat(1, 0), 3);
        assert_eq!(basis.flat(-3, 2), 11);
        for idx in 0..basis.dim() {
            let (m2, n) = basis.unflat(idx);
            assert_eq!(basis.flat(m2, n), idx);
        }
    }

    #[test]
    fn basis_rejects_oversized_dimension() {
        let s = SpinLength::from_two_j(2047).unwrap();
        assert!(matches!(BasisIndex::new(s, 1 << 12), Err(Error::DimensionOverflow { .. })));
    }

    #[test]
    fn jz_defining_representation() {
        // Basis order {|½,+½⟩, |½,−½⟩}.
        let ops = build_spin_operators(spin(1));
        let d = ops.jz.to_dense();
        assert_abs_diff_eq!(d[(0, 0)].re, 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(d[(1, 1)].re, -0.5, epsilon = 0.0);
        let x = ops.jx.to_dense();
        assert_abs_diff_eq!(x[(0, 1)].re, 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(x[(1, 0)].re, 0.5, epsilon = 0.0);
    }

    #[test]
    fn jplus_raising_element_sqrt3() {
        // ⟨3/2,3/2|J₊|3/2,1/2⟩ = √(j(j+1) − m(m+1)) = √3 for j=3/2, m=1/2.
        let s = spin(3);
        let ops = build_spin_operators(s);
        let d = ops.jplus.to_dense();
        let row = s.m_index(3);
        let col = s.m_index(1);
        assert_abs_diff_eq!(d[(row, col)].re, 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn su2_algebra_holds() {
        for two_j in [1u32, 2, 3, 5, 8] {
            let s = spin(two_j);
            let ops = build_spin_operators(s);
            let i_c = C64::new(0.0, 1.0);
            // [Jx, Jy] = i·Jz.
            let comm = SparseOperator::linear_combination(&[
                (C_ONE, &ops.jx.matmul(&ops.jy)),
                (C64::new(-1.0, 0.0), &ops.jy.matmul(&ops.jx)),
            ]);
            assert!(max_entry_diff(&comm, &ops.jz.scale(i_c)) < 1e-13);
            // J² = j(j+1)·1.
            let j2 = SparseOperator::linear_combination(&[
                (C_ONE, &ops.jx.matmul(&ops.jx)),
                (C_ONE, &ops.jy.matmul(&ops.jy)),
                (C_ONE, &ops.jz.matmul(&ops.jz)),
            ]);
            let expect = SparseOperator::identity(s.multiplicity())
                .scale(C64::new(s.j() * (s.j() + 1.0), 0.0));
            assert!(max_entry_diff(&j2, &expect) < 1e-12);
        }
    }

    #[test]
    fn boson_ladder_elements() {
        let ops = build_boson_operators(2);
        let a = ops.a.to_dense();
        assert_abs_diff_eq!(a[(0, 1)].re, 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(a[(1, 2)].re, 2f64.sqrt(), epsilon = 1e-16);
        let n = ops.num.to_dense();
        for k in 0..3 {
            assert_abs_diff_eq!(n[(k, k)].re, k as f64, epsilon = 0.0);
        }
    }

    #[test]
    fn truncated_commutator_identity_except_last_row() {
        let n_max = 7;
        let ops = build_boson_operators(n_max);
        let comm = SparseOperator::linear_combination(&[
            (C_ONE, &ops.a.matmul(&ops.adag)),
            (C64::new(-1.0, 0.0), &ops.adag.matmul(&ops.a)),
        ]);
        let d = comm.to_dense();
        for k in 0..n_max {
            assert_abs_diff_eq!(d[(k, k)].re, 1.0, epsilon = 1e-14);
        }
        // Truncation artifact: the top level sees a·a† = 0.
        assert_abs_diff_eq!(d[(n_max, n_max)].re, -(n_max as f64), epsilon = 1e-12);
    }

    #[test]
    fn dicke_decoupled_limit_is_diagonal_unperturbed() {
        let p = ModelParams::new(0.7, 0.3, 0.0, spin(3), 4).unwrap();
        let h = build_dicke_hamiltonian(&p).unwrap();
        let basis = p.basis();
        assert_eq!(h.nnz(), basis.dim()); // diagonal only, no coupling entries
        let d = h.to_dense();
        for idx in 0..basis.dim() {
            let (m2, n) = basis.unflat(idx);
            let e0 = -(m2 as f64 / 2.0) * p.delta + n as f64 * p.omega;
            assert_abs_diff_eq!(d[(idx, idx)].re, e0, epsilon = 1e-14);
        }
    }

    #[test]
    fn dicke_single_coupling_element_by_hand() {
        // ⟨½,−½; n=1|H|½,+½; n=0⟩ = λ·Jx(−,+)·(a†+a)(1,0) = λ/2.
        let p = ModelParams::new(1.0, 1.0, 1.0, spin(1), 1).unwrap();
        let h = build_dicke_hamiltonian(&p).unwrap();
        let basis = p.basis();
        let d = h.to_dense();
        let row = basis.flat(-1, 1);
        let col = basis.flat(1, 0);
        assert_abs_diff_eq!(d[(row, col)].re, 0.5, epsilon = 1e-15);
        assert!(h.vals_re.is_some(), "Dicke Hamiltonian is real in this basis");
    }

    #[test]
    fn generalized_reduces_to_dicke() {
        let p = ModelParams::new(1.3, 0.4, 0.17, spin(2), 5).unwrap();
        let gp = GeneralizedParams::new(-p.delta, p.omega, p.lambda / 2.0, p.lambda / 2.0).unwrap();
        let h_d = build_dicke_hamiltonian(&p).unwrap();
        let h_g = build_generalized_hamiltonian(&gp, p.spin, p.n_max).unwrap();
        assert!(max_entry_diff(&h_d, &h_g) < 1e-14);
    }

    #[test]
    fn rwa_conserves_excitation_number() {
        let gp = GeneralizedParams::new(0.9, 0.4, 0.2, 0.0).unwrap();
        let s = spin(2);
        let n_max = 5;
        let h = build_generalized_hamiltonian(&gp, s, n_max).unwrap();
        let basis = BasisIndex::new(s, n_max).unwrap();
        // N = Jz + a†a is diagonal; [H, N] = 0 means every H entry connects
        // equal-N states.
        for (r, c, v) in h.entries() {
            let (m2r, nr) = basis.unflat(r as usize);
            let (m2c, nc) = basis.unflat(c as usize);
            let n_row = m2r as f64 / 2.0 + nr as f64;
            let n_col = m2c as f64 / 2.0 + nc as f64;
            assert!((n_row - n_col).abs() < 1e-12 || v.norm() == 0.0);
        }
    }

    #[test]
    fn from_triplets_dedups_and_orders() {
        let op = SparseOperator::from_triplets(
            3,
            vec![
                (2, 0, C64::new(1.0, 0.0)),
                (0, 1, C64::new(0.5, 0.0)),
                (2, 0, C64::new(-1.0, 0.0)), // cancels the first entry
                (0, 1, C64::new(0.25, 0.5)),
            ],
        );
        let entries: Vec<_> = op.entries().collect();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].0, 0);
        assert_eq!(entries[0].1, 1);
        assert_abs_diff_eq!((entries[0].2 - C64::new(0.75, 0.5)).norm(), 0.0, epsilon = 0.0);
        assert!(op.vals_re.is_none());
    }

    #[test]
    fn gershgorin_contains_spectrum() {
        let p = ModelParams::new(0.9, 0.5, 0.3, spin(2), 4).unwrap();
        let h = build_dicke_hamiltonian(&p).unwrap();
        let (w, _) = eigh(&h.to_dense()).unwrap();
        let (lo, hi) = h.gershgorin();
        assert!(lo <= w[0] + 1e-12 && hi >= w[w.len() - 1] - 1e-12);
    }

    #[test]
    fn kron_matches_dense_oracle() {
        let a = SparseOperator::from_triplets(
            2,
            vec![(0, 1, C64::new(1.0, 2.0)), (1, 1, C64::new(-0.5, 0.0))],
        );
        let b = SparseOperator::from_triplets(
            3,
            vec![(0, 0, C64::new(2.0, 0.0)), (2, 1, C64::new(0.0, 1.0))],
        );
        let k = a.kron(&b).to_dense();
        let (da, db) = (a.to_dense(), b.to_dense());
        for ra in 0..2 {
            for ca in 0..2 {
                for rb in 0..3 {
                    for cb in 0..3 {
                        let got = k[(ra * 3 + rb, ca * 3 + cb)];
                        let want = da[(ra, ca)] * db[(rb, cb)];
                        assert_abs_diff_eq!((got - want).norm(), 0.0, epsilon = 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn fused_recurrence_matches_separate_ops() {
        let p = ModelParams::new(1.0, 0.7, 0.2, spin(1), 3).unwrap();
        let h = build_dicke_hamiltonian(&p).unwrap();
        let dim = h.dim();
        let x: Vec<C64> = (0..dim).map(|i| C64::new(i as f64 * 0.1 - 0.3, 0.2 - i as f64 * 0.05)).collect();
        let z: Vec<C64> = (0..dim).map(|i| C64::new((i * i) as f64 * 0.01, -0.1)).collect();
        let mut fused = vec![C_ZERO; dim];
        h.fused_recurrence(1.7, -0.4, &x, &z, &mut fused);
        let hx = h.matvec(&x);
        for i in 0..dim {
            let want = 1.7 * hx[i] + C64::new(-0.4, 0.0) * x[i] - z[i];
            assert_abs_diff_eq!((fused[i] - want).norm(), 0.0, epsilon = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn hamiltonians_are_hermitian(
            delta in -2.0f64..2.0,
            omega in 0.05f64..2.0,
            lambda in 0.0f64..1.0,
            two_j in 1u32..6,
            n_max in 1usize..8,
        ) {
            let p = ModelParams::new(delta, omega, lambda, spin(two_j), n_max).unwrap();
            let h = build_dicke_hamiltonian(&p).unwrap();
            prop_assert!(h.is_hermitian(1e-12));
            let gp = GeneralizedParams::new(-delta, omega, lambda / 2.0, lambda / 3.0).unwrap();
            let hg = build_generalized_hamiltonian(&gp, p.spin, n_max).unwrap();
            prop_assert!(hg.is_hermitian(1e-12));
        }

        #[test]
        fn matvec_matches_dense(
            two_j in 1u32..4,
            n_max in 1usize..6,
            seed in 0u64..1000,
        ) {
            let p = ModelParams::new(0.9, 0.4, 0.3, spin(two_j), n_max).unwrap();
            let h = build_dicke_hamiltonian(&p).unwrap();
            let dim = h.dim();
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let x: Vec<C64> = (0..dim).map(|_| C64::new(next(), next())).collect();
            let sparse = h.matvec(&x);
            let dense = h.to_dense().matvec(&x);
            for i in 0..dim {
                prop_assert!((sparse[i] - dense[i]).norm() < 1e-12);
            }
        }
    }
}
