//! Atomic (spin) coherent states, field coherent states, spin rotations, and
//! product initial states.
//!
//! Conventions: an atomic coherent state |θ⟩ has real coefficients
//! ⟨m|θ⟩ = √C(2j, j+m) · cos(θ/2)^{j+m} · sin(θ/2)^{j−m}, and the general
//! state |θ,φ⟩ = R(θ sinφ, θ cosφ)|j,j⟩ with the rotation
//! R(a,b) = exp[i(a·Jx − b·Jy)]. Vectors follow the m-descending basis order
//! of [`crate::model::SpinLength`].

use crate::linalg::{expm_i_hermitian, Mat};
use crate::model::{build_spin_operators, BasisIndex, SpinLength};
use crate::{Error, Result};
use num_complex::Complex64 as C64;

const C_ZERO: C64 = C64::new(0.0, 0.0);

/// ln(k!) for k = 0..=n as a cumulative table.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    table.push(0.0);
    let mut acc = 0.0f64;
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Tail-safety heuristic for materializing a coherent state with amplitude
/// magnitude `alpha_abs` on a Fock grid truncated at `n_max`: the Poisson
/// weight beyond mean + 8·√mean is below 10⁻¹².
pub fn coherent_cutoff_ok(alpha_abs: f64, n_max: usize) -> bool {
    alpha_abs * alpha_abs + 8.0 * alpha_abs <= n_max as f64
}

/// Coefficients ⟨m|θ⟩ of the atomic coherent state, real by convention.
///
/// The formula is evaluated literally for any real `theta` (no angle
/// canonicalization): negative angles produce the sign pattern
/// ⟨m|−θ⟩ = (−1)^{j−m}⟨m|θ⟩ that the cat-state identity relies on.
pub fn atomic_coherent(spin: SpinLength, theta: f64) -> Vec<C64> {
    let two_j = spin.two_j() as usize;
    let lnf = ln_factorials(two_j);
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let (ln_c, ln_s) = (c.abs().ln(), s.abs().ln());
    // Log-magnitudes keep binomials finite for large j; signs tracked apart.
    let mut ln_mag = vec![f64::NEG_INFINITY; two_j + 1];
    let mut sign = vec![1.0f64; two_j + 1];
    let mut ln_peak = f64::NEG_INFINITY;
    for i in 0..=two_j {
        let pow_c = (two_j - i) as f64; // j + m
        let pow_s = i as f64; // j − m
        if (c == 0.0 && i < two_j) || (s == 0.0 && i > 0) {
            continue;
        }
        let ln_binom = 0.5 * (lnf[two_j] - lnf[i] - lnf[two_j - i]);
        let lm = ln_binom
            + if i < two_j { pow_c * ln_c } else { 0.0 }
            + if i > 0 { pow_s * ln_s } else { 0.0 };
        ln_mag[i] = lm;
        ln_peak = ln_peak.max(lm);
        let neg_c = c < 0.0 && (two_j - i) % 2 == 1;
        let neg_s = s < 0.0 && i % 2 == 1;
        sign[i] = if neg_c != neg_s { -1.0 } else { 1.0 };
    }
    let mut amps: Vec<C64> = (0..=two_j)
        .map(|i| C64::new(sign[i] * (ln_mag[i] - ln_peak).exp(), 0.0))
        .collect();
    let norm = amps.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    for v in &mut amps {
        *v /= norm;
    }
    amps
}

/// Spin rotation R(a,b) = exp[i(a·Jx − b·Jy)] as a dense unitary, computed by
/// exact exponentiation of the Hermitian generator.
pub fn rotation_operator(spin: SpinLength, a: f64, b: f64) -> Result<Mat> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParams("rotation angles must be finite".into()));
    }
    let ops = build_spin_operators(spin);
    let generator = crate::model::SparseOperator::linear_combination(&[
        (C64::new(a, 0.0), &ops.jx),
        (C64::new(-b, 0.0), &ops.jy),
    ]);
    expm_i_hermitian(&generator.to_dense(), 1.0)
}

/// General atomic coherent state |θ,φ⟩ = R(θ sinφ, θ cosφ)|j,j⟩ in closed
/// form: ⟨m|θ,φ⟩ = ⟨m|θ⟩ · e^{i(j−m)φ}, exactly equal to the rotation route
/// including the global phase.
pub fn atomic_coherent_general(spin: SpinLength, theta: f64, phi: f64) -> Vec<C64> {
    let mut amps = atomic_coherent(spin, theta);
    for (i, v) in amps.iter_mut().enumerate() {
        *v *= C64::from_polar(1.0, phi * i as f64); // i = j − m
    }
    amps
}

/// Field coherent state amplitudes ∝ αⁿ/√(n!) on the truncated Fock grid,
/// normalized after truncation.
pub fn field_coherent(alpha: C64, n_max: usize) -> Result<Vec<C64>> {
    let r = alpha.norm();
    if !r.is_finite() {
        return Err(Error::InvalidParams("field amplitude must be finite".into()));
    }
    if !coherent_cutoff_ok(r, n_max) {
        return Err(Error::CutoffTooSmall(format!(
            "coherent state |α| = {r:.3} needs n_max ≥ {}, got {n_max}",
            (r * r + 8.0 * r).ceil() as u64
        )));
    }
    let mut amps = vec![C_ZERO; n_max + 1];
    if r == 0.0 {
        amps[0] = C64::new(1.0, 0.0);
        return Ok(amps);
    }
    let lnf = ln_factorials(n_max);
    let ln_r = r.ln();
    let phase = alpha.arg();
    // Peak of n·ln r − ln(n!)/2 sits near n = r²; shift by the max to avoid
    // underflow of the whole vector at large |α|.
    let ln_peak = (0..=n_max)
        .map(|n| n as f64 * ln_r - 0.5 * lnf[n])
        .fold(f64::NEG_INFINITY, f64::max);
    for (n, amp) in amps.iter_mut().enumerate() {
        let ln_mag = n as f64 * ln_r - 0.5 * lnf[n] - ln_peak;
        *amp = C64::from_polar(ln_mag.exp(), phase * n as f64);
    }
    let norm = amps.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    for v in &mut amps {
        *v /= norm;
    }
    Ok(amps)
}

/// Complex amplitude vector over the product basis |j,m⟩⊗|n⟩.
#[derive(Clone, Debug)]
pub struct Ket {
    basis: BasisIndex,
    amps: Vec<C64>,
}

impl Ket {
    pub fn new(basis: BasisIndex, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector length {} does not match basis dimension {}",
                amps.len(),
                basis.dim()
            )));
        }
        Ok(Ket { basis, amps })
    }

    pub fn basis(&self) -> BasisIndex {
        self.basis
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescale to unit norm; returns the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.amps {
                *v /= n;
            }
        }
        n
    }

    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &Ket) -> Result<C64> {
        if self.basis != other.basis {
            return Err(Error::DimensionMismatch("kets live on different bases".into()));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |⟨self|other⟩|².
    pub fn fidelity_with(&self, other: &Ket) -> Result<f64> {
        Ok(self.overlap(other)?.norm_sqr())
    }

    /// Summed probability weight on the top `fraction` of Fock levels — the
    /// truncation-health indicator (a healthy run keeps this below 10⁻¹⁰).
    pub fn fock_tail_weight(&self, fraction: f64) -> f64 {
        let levels = self.basis.n_max() + 1;
        let tail_levels = ((levels as f64 * fraction).floor() as usize).max(1);
        let n_start = levels - tail_levels;
        let mut weight = 0.0;
        for (idx, amp) in self.amps.iter().enumerate() {
            if idx % levels >= n_start {
                weight += amp.norm_sqr();
            }
        }
        weight
    }
}

/// Product state amps[(m,n)] = spinvec[m]·fockvec[n].
pub fn product_state(spinvec: &[C64], fockvec: &[C64], basis: BasisIndex) -> Result<Ket> {
    if spinvec.len() != basis.spin().multiplicity() {
        return Err(Error::DimensionMismatch(format!(
            "spin factor length {} does not match multiplicity {}",
            spinvec.len(),
            basis.spin().multiplicity()
        )));
    }
    if fockvec.len() != basis.n_max() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "field factor length {} does not match Fock levels {}",
            fockvec.len(),
            basis.n_max() + 1
        )));
    }
    let per_m = basis.n_max() + 1;
    let mut amps = vec![C_ZERO; basis.dim()];
    for (im, sv) in spinvec.iter().enumerate() {
        for (n, fv) in fockvec.iter().enumerate() {
            amps[im * per_m + n] = sv * fv;
        }
    }
    Ket::new(basis, amps)
}

/// Map arbitrary Bloch angles to the canonical ranges θ ∈ [0, π], φ ∈ [0, 2π).
pub fn canonicalize_bloch(theta: f64, phi: f64) -> (f64, f64) {
    let tau = std::f64::consts::TAU;
    let mut t = theta.rem_euclid(tau);
    let mut p = phi;
    if t > std::f64::consts::PI {
        t = tau - t;
        p += std::f64::consts::PI;
    }
    (t, p.rem_euclid(tau))
}

/// Comparison helper: rotate the global phase so the first amplitude whose
/// magnitude exceeds `tol` becomes real and positive. Never applied silently
/// by any constructor.
pub fn align_global_phase(amps: &mut [C64], tol: f64) {
    if let Some(pivot) = amps.iter().find(|v| v.norm() > tol) {
        let phase = pivot.conj() / pivot.norm();
        for v in amps.iter_mut() {
            *v *= phase;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_boson_operators, build_spin_operators, SparseOperator};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spin(two_j: u32) -> SpinLength {
        SpinLength::from_two_j(two_j).unwrap()
    }

    fn expval(op: &SparseOperator, v: &[C64]) -> C64 {
        op.matvec(v).iter().zip(v).map(|(hv, x)| x.conj() * hv).sum()
    }

    fn vec_norm(v: &[C64]) -> f64 {
        v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn north_pole_is_stretched_state() {
        let amps = atomic_coherent(spin(5), 0.0);
        assert_abs_diff_eq!(amps[0].re, 1.0, epsilon = 0.0);
        assert!(amps[1..].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn equal_superposition_at_equator_for_spin_half() {
        let amps = atomic_coherent(spin(1), std::f64::consts::FRAC_PI_2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(amps[0].re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(amps[1].re, r, epsilon = 1e-15);
    }

    #[test]
    fn negative_angle_alternates_signs() {
        let s = spin(4);
        let plus = atomic_coherent(s, 0.8);
        let minus = atomic_coherent(s, -0.8);
        for i in 0..plus.len() {
            let parity = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert_abs_diff_eq!(minus[i].re, parity * plus[i].re, epsilon = 1e-14);
        }
    }

    #[test]
    fn rotation_identity_and_unitarity() {
        let s = spin(3);
        let id = rotation_operator(s, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(id.sub(&Mat::identity(4)).frobenius_norm(), 0.0, epsilon = 1e-13);
        let r = rotation_operator(s, 0.3, -1.1).unwrap();
        let prod = r.adjoint().matmul(&r);
        assert_abs_diff_eq!(prod.sub(&Mat::identity(4)).frobenius_norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_shifts_polar_angle() {
        // R(0, θ′)|θ⟩ = |θ+θ′⟩, exactly including phase.
        let s = spin(5);
        let theta = 0.7;
        let shift = 0.45;
        let r = rotation_operator(s, 0.0, shift).unwrap();
        let rotated = r.matvec(&atomic_coherent(s, theta));
        let target = atomic_coherent(s, theta + shift);
        for i in 0..rotated.len() {
            assert_abs_diff_eq!((rotated[i] - target[i]).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn general_state_matches_rotation_route() {
        let s = spin(4);
        for &(theta, phi) in &[(0.6, 1.3), (2.2, 4.9), (1.0, 0.0)] {
            let closed = atomic_coherent_general(s, theta, phi);
            let r = rotation_operator(s, theta * phi.sin(), theta * phi.cos()).unwrap();
            let stretched: Vec<C64> =
                (0..5).map(|i| if i == 0 { C64::new(1.0, 0.0) } else { C_ZERO }).collect();
            let rotated = r.matvec(&stretched);
            for i in 0..closed.len() {
                assert_abs_diff_eq!((closed[i] - rotated[i]).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn south_pole_up_to_phase() {
        let amps = atomic_coherent_general(spin(3), std::f64::consts::PI, 2.1);
        assert_abs_diff_eq!(amps[3].norm(), 1.0, epsilon = 1e-12);
        assert!(vec_norm(&amps[..3]) < 1e-12);
    }

    #[test]
    fn vacuum_for_zero_amplitude() {
        let amps = field_coherent(C_ZERO, 10).unwrap();
        assert_abs_diff_eq!(amps[0].re, 1.0, epsilon = 0.0);
        assert!(amps[1..].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn coherent_state_moments() {
        let n_max = 150;
        let alpha = C64::new(5.0, 0.0);
        let amps = field_coherent(alpha, n_max).unwrap();
        assert_abs_diff_eq!(vec_norm(&amps), 1.0, epsilon = 1e-13);
        let ops = build_boson_operators(n_max);
        let mean_n = expval(&ops.num, &amps);
        assert_abs_diff_eq!(mean_n.re, 25.0, epsilon = 1e-10);
        let mean_a = expval(&ops.a, &amps);
        assert_abs_diff_eq!((mean_a - alpha).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn coherent_overlap_law() {
        let n_max = 60;
        let a = field_coherent(C64::new(1.0, 0.0), n_max).unwrap();
        let b = field_coherent(C64::new(-1.0, 0.0), n_max).unwrap();
        let ov: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        assert_abs_diff_eq!(ov.norm(), (-2.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn cutoff_guard_rejects_small_grids() {
        assert!(matches!(
            field_coherent(C64::new(5.0, 0.0), 30),
            Err(Error::CutoffTooSmall(_))
        ));
        assert!(coherent_cutoff_ok(5.0, 65));
        assert!(!coherent_cutoff_ok(5.0, 64));
    }

    #[test]
    fn product_state_structure() {
        let basis = BasisIndex::new(spin(3), 5).unwrap();
        let spinvec = atomic_coherent(spin(3), 0.0);
        let fock = field_coherent(C_ZERO, 5).unwrap();
        let ket = product_state(&spinvec, &fock, basis).unwrap();
        assert_eq!(ket.amps().iter().filter(|v| v.norm() > 0.0).count(), 1);
        assert_abs_diff_eq!(ket.amps()[basis.flat(3, 0)].re, 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(ket.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn initial_state_expectations() {
        // θ₀ = π/2, α₀ = 5, j = 3/2: ⟨Jz⟩ = 0, ⟨Jx⟩ = 3/2, ⟨a⟩ = 5.
        let s = spin(3);
        let n_max = 150;
        let basis = BasisIndex::new(s, n_max).unwrap();
        let ket = product_state(
            &atomic_coherent(s, std::f64::consts::FRAC_PI_2),
            &field_coherent(C64::new(5.0, 0.0), n_max).unwrap(),
            basis,
        )
        .unwrap();
        let sp = build_spin_operators(s);
        let field = build_boson_operators(n_max);
        let field_id = SparseOperator::identity(n_max + 1);
        let spin_id = SparseOperator::identity(s.multiplicity());
        let jz = sp.jz.kron(&field_id);
        let jx = sp.jx.kron(&field_id);
        let a_full = spin_id.kron(&field.a);
        assert_abs_diff_eq!(expval(&jz, ket.amps()).re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expval(&jx, ket.amps()).re, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(expval(&a_full, ket.amps()).re, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn fock_tail_weight_counts_top_levels() {
        let basis = BasisIndex::new(spin(1), 19).unwrap();
        let mut amps = vec![C_ZERO; basis.dim()];
        amps[basis.flat(1, 19)] = C64::new(0.6, 0.0); // top 5% of 20 levels = level 19
        amps[basis.flat(-1, 0)] = C64::new(0.8, 0.0);
        let ket = Ket::new(basis, amps).unwrap();
        assert_abs_diff_eq!(ket.fock_tail_weight(0.05), 0.36, epsilon = 1e-15);
    }

    #[test]
    fn bloch_canonicalization() {
        let (t, p) = canonicalize_bloch(-std::f64::consts::FRAC_PI_3, 0.0);
        assert_abs_diff_eq!(t, std::f64::consts::FRAC_PI_3, epsilon = 1e-14);
        assert_abs_diff_eq!(p, std::f64::consts::PI, epsilon = 1e-14);
        // Canonicalization maps to the same physical state.
        let s = spin(4);
        let raw = atomic_coherent_general(s, -0.9, 1.7);
        let (tc, pc) = canonicalize_bloch(-0.9, 1.7);
        let canon = atomic_coherent_general(s, tc, pc);
        let ov: C64 = raw.iter().zip(&canon).map(|(x, y)| x.conj() * y).sum();
        assert_abs_diff_eq!(ov.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn phase_alignment_is_explicit_only() {
        let mut amps = vec![C64::new(0.0, 0.6), C64::new(0.8, 0.0)];
        align_global_phase(&mut amps, 1e-12);
        assert_abs_diff_eq!(amps[0].re, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(amps[0].im, 0.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn coherent_state_expectation_identities(
            theta in 0.0f64..std::f64::consts::PI,
            phi in 0.0f64..std::f64::consts::TAU,
            two_j in 1u32..9,
        ) {
            let s = spin(two_j);
            let amps = atomic_coherent_general(s, theta, phi);
            prop_assert!((vec_norm(&amps) - 1.0).abs() < 1e-12);
            let ops = build_spin_operators(s);
            let jz = expval(&ops.jz, &amps);
            let jx = expval(&ops.jx, &amps);
            let j = s.j();
            prop_assert!((jz.re - j * theta.cos()).abs() < 1e-10);
            prop_assert!((jx.re - j * theta.sin() * phi.cos()).abs() < 1e-10);
            prop_assert!(jz.im.abs() < 1e-12 && jx.im.abs() < 1e-12);
        }
    }
}
