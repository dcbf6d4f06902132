//! Chebyshev polynomial propagation of the Schrödinger equation.
//!
//! A step computes e^{−iH·dt}ψ by expanding the exponential in Chebyshev
//! polynomials of the spectrum-normalized operator
//! H̃ = (2H − (e_max+e_min))/(e_max−e_min): with a = dt·(e_max−e_min)/2 and
//! global phase e^{−i·dt·(e_max+e_min)/2},
//!
//!   e^{−iH·dt} = phase · Σₖ (2−δ_{k0}) (−i)ᵏ Jₖ(a) · Tₖ(H̃),
//!
//! where Jₖ are Bessel functions. The coefficients decay superexponentially
//! once k exceeds a, so the series is cut at machine-level terms and the
//! result is exact to tolerance regardless of step size — the method has no
//! time-discretization error.

use crate::bessel::bessel_j_sequence;
use crate::model::SparseOperator;
use crate::{Error, Result};
use num_complex::Complex64 as C64;

const C_ZERO: C64 = C64::new(0.0, 0.0);

/// Default series tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Chebyshev order targeted by the automatic step subdivision; keeps the
/// recurrence numerically benign while spending most matvecs on real work.
const TARGET_STEP_A: f64 = 400.0;

/// Hard cap on the series order of a single step.
const MAX_ORDER: usize = 60_000;

/// Relative norm change beyond which a step is deemed unsound (the spectrum
/// leaked outside the assumed bounds, making the expansion diverge).
const NORM_GUARD: f64 = 1e-8;

/// Estimated enclosure [e_min, e_max] of the operator spectrum.
#[derive(Clone, Copy, Debug)]
pub struct SpectralBounds {
    pub e_min: f64,
    pub e_max: f64,
}

impl SpectralBounds {
    pub fn width(&self) -> f64 {
        self.e_max - self.e_min
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.e_max + self.e_min)
    }
}

/// Deterministic pseudo-random unit vector (seeded by the dimension) so bound
/// estimates are reproducible run to run.
fn seeded_unit_vector(dim: usize) -> Vec<C64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (dim as u64);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    };
    let mut v: Vec<C64> = (0..dim).map(|_| C64::new(next(), next())).collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    v
}

/// Widen a raw eigenvalue interval by `margin`·width, clip it to the
/// Gershgorin enclosure, and enforce a minimal width so the step scaling
/// stays well-defined for (near-)constant operators.
fn pad_and_clip(mut lo: f64, mut hi: f64, margin: f64, gersh: (f64, f64)) -> SpectralBounds {
    let width = hi - lo;
    lo -= margin * width;
    hi += margin * width;
    lo = lo.max(gersh.0);
    hi = hi.min(gersh.1);
    if lo > hi {
        (lo, hi) = gersh;
    }
    let center = 0.5 * (lo + hi);
    let min_width = 1e-12 * center.abs().max(1.0);
    if hi - lo < min_width {
        lo = center - 0.5 * min_width;
        hi = center + 0.5 * min_width;
    }
    SpectralBounds { e_min: lo, e_max: hi }
}

/// Spectral enclosure with the default 5% safety margin.
pub fn spectral_bounds(h: &SparseOperator) -> Result<SpectralBounds> {
    spectral_bounds_with_margin(h, 0.05)
}

/// Lanczos estimate of the extreme eigenvalues, padded by `margin` times the
/// estimated width and intersected with the Gershgorin enclosure. Falls back
/// to pure Gershgorin bounds when the iteration collapses immediately.
pub fn spectral_bounds_with_margin(h: &SparseOperator, margin: f64) -> Result<SpectralBounds> {
    if !(0.0..1.0).contains(&margin) || !margin.is_finite() {
        return Err(Error::InvalidParams(format!("spectral margin {margin} outside [0, 1)")));
    }
    let dim = h.dim();
    let gersh = h.gershgorin();
    if dim == 0 {
        return Err(Error::InvalidParams("empty operator".into()));
    }
    let scale = gersh.0.abs().max(gersh.1.abs()).max(1e-300);
    let max_iter = dim.min(200);
    let mut q = seeded_unit_vector(dim);
    let mut q_prev = vec![C_ZERO; dim];
    let mut w = vec![C_ZERO; dim];
    let mut diag: Vec<f64> = Vec::with_capacity(max_iter);
    let mut off: Vec<f64> = Vec::with_capacity(max_iter);
    let mut beta = 0.0f64;
    let mut extremes = (f64::INFINITY, f64::NEG_INFINITY);
    let mut stagnant = 0u32;
    for it in 0..max_iter {
        h.matvec_into(&q, &mut w);
        for i in 0..dim {
            w[i] -= beta * q_prev[i];
        }
        let alpha: f64 = q.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        for i in 0..dim {
            w[i] -= alpha * q[i];
        }
        diag.push(alpha);
        beta = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if beta < 1e-12 * scale {
            break; // invariant subspace found: the tridiagonal is complete
        }
        // Periodically check whether the extreme Ritz values have settled.
        if it >= 9 && it % 10 == 9 {
            let (lo, hi) = crate::linalg::tridiagonal_extremes(&diag, &off);
            let tol = 1e-9 * (hi - lo).abs().max(1e-9 * scale);
            if (lo - extremes.0).abs() < tol && (hi - extremes.1).abs() < tol {
                stagnant += 1;
                if stagnant >= 2 {
                    break;
                }
            } else {
                stagnant = 0;
            }
            extremes = (lo, hi);
        }
        if it + 1 < max_iter {
            off.push(beta);
            for i in 0..dim {
                q_prev[i] = q[i];
                q[i] = w[i] / beta;
            }
        }
    }
    let (lo, hi) = crate::linalg::tridiagonal_extremes(&diag, &off[..diag.len() - 1]);
    Ok(pad_and_clip(lo, hi, margin, gersh))
}

/// Counters describing the work done by a [`Propagator`] since creation.
#[derive(Clone, Copy, Debug, Default)]
pub struct PropagationStats {
    /// Chebyshev steps taken.
    pub steps: u64,
    /// Sparse matrix-vector products consumed.
    pub matvecs: u64,
    /// Largest series order used by any step.
    pub max_order: usize,
    /// Largest per-step relative norm change observed (unitarity residual).
    pub max_norm_drift: f64,
    /// Times the spectral bounds were re-estimated after a rejected step.
    pub rebounds: u32,
}

/// Coefficients of one Chebyshev step, cached so uniform time grids pay the
/// (tiny) setup cost once.
struct StepPlan {
    dt: f64,
    coeffs: Vec<C64>,
    phase: C64,
}

/// Reusable Chebyshev propagator for a fixed Hermitian operator.
pub struct Propagator<'a> {
    h: &'a SparseOperator,
    bounds: SpectralBounds,
    tol: f64,
    plan: Option<StepPlan>,
    stats: PropagationStats,
    // scratch buffers for the three-term recurrence and step retry
    t_prev: Vec<C64>,
    t_cur: Vec<C64>,
    t_next: Vec<C64>,
    acc: Vec<C64>,
    saved: Vec<C64>,
}

impl<'a> Propagator<'a> {
    /// Build with estimated spectral bounds and the default tolerance.
    pub fn new(h: &'a SparseOperator) -> Result<Self> {
        Self::with_tolerance(h, DEFAULT_TOL)
    }

    pub fn with_tolerance(h: &'a SparseOperator, tol: f64) -> Result<Self> {
        let bounds = spectral_bounds(h)?;
        Self::with_bounds(h, bounds, tol)
    }

    /// Build with caller-supplied bounds (they need not be exact: a step whose
    /// norm drifts is retried once with conservative Gershgorin bounds).
    pub fn with_bounds(h: &'a SparseOperator, bounds: SpectralBounds, tol: f64) -> Result<Self> {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::InvalidParams(format!("tolerance {tol} must be positive")));
        }
        if !bounds.e_min.is_finite() || !bounds.e_max.is_finite() || bounds.width() <= 0.0 {
            return Err(Error::InvalidParams("spectral bounds must be finite with positive width".into()));
        }
        let dim = h.dim();
        Ok(Propagator {
            h,
            bounds,
            tol,
            plan: None,
            stats: PropagationStats::default(),
            t_prev: vec![C_ZERO; dim],
            t_cur: vec![C_ZERO; dim],
            t_next: vec![C_ZERO; dim],
            acc: vec![C_ZERO; dim],
            saved: vec![C_ZERO; dim],
        })
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    pub fn stats(&self) -> PropagationStats {
        self.stats
    }

    /// Series coefficients for a step of size `dt`: cₖ = (2−δ_{k0})(−i)ᵏJₖ(a),
    /// truncated where the Bessel tail falls below the internal cut.
    fn plan_step(&self, dt: f64) -> Result<StepPlan> {
        let half_width = 0.5 * self.bounds.width();
        let a = dt * half_width;
        let a_abs = a.abs();
        let k_budget = (a_abs + 16.0 * (a_abs + 1.0).powf(1.0 / 3.0) + 30.0).ceil() as usize;
        if k_budget > MAX_ORDER {
            return Err(Error::ToleranceUnreachable(format!(
                "step needs Chebyshev order ~{k_budget}, beyond the cap of {MAX_ORDER}; subdivide the step"
            )));
        }
        let bessel = bessel_j_sequence(a_abs, k_budget);
        let cut = (self.tol * 1e-3).max(4e-16);
        let mut k_star = 0;
        for (k, &b) in bessel.iter().enumerate() {
            if b.abs() > cut {
                k_star = k;
            }
        }
        // (−i)^k cycle; J_k(−a) = (−1)^k J_k(a) folds the sign of dt in too.
        let mut coeffs = Vec::with_capacity(k_star + 1);
        for (k, &b) in bessel.iter().enumerate().take(k_star + 1) {
            let b = if a < 0.0 && k % 2 == 1 { -b } else { b };
            let ik = match k % 4 {
                0 => C64::new(1.0, 0.0),
                1 => C64::new(0.0, -1.0),
                2 => C64::new(-1.0, 0.0),
                _ => C64::new(0.0, 1.0),
            };
            let weight = if k == 0 { 1.0 } else { 2.0 };
            coeffs.push(ik * (weight * b));
        }
        let phase = C64::from_polar(1.0, -dt * self.bounds.center());
        Ok(StepPlan { dt, coeffs, phase })
    }

    /// Apply the planned series to `psi` in place. Returns the series order.
    fn apply_plan(&mut self, psi: &mut [C64]) -> usize {
        let plan = self.plan.as_ref().expect("plan must exist before apply");
        let width = self.bounds.width();
        let center = self.bounds.center();
        let order = plan.coeffs.len() - 1;
        // acc = c₀·T₀ψ; T₀ψ = ψ
        self.t_prev.copy_from_slice(psi);
        for (a, p) in self.acc.iter_mut().zip(psi.iter()) {
            *a = plan.coeffs[0] * p;
        }
        if order >= 1 {
            // T₁ψ = H̃ψ = (2/width)·Hψ − (2·center/width)·ψ
            let zeros = vec![C_ZERO; psi.len()];
            self.h.fused_recurrence(2.0 / width, -2.0 * center / width, &self.t_prev, &zeros, &mut self.t_cur);
            for i in 0..psi.len() {
                self.acc[i] += plan.coeffs[1] * self.t_cur[i];
            }
        }
        for k in 2..=order {
            // T_{k}ψ = 2H̃·T_{k−1}ψ − T_{k−2}ψ
            self.h.fused_recurrence(
                4.0 / width,
                -4.0 * center / width,
                &self.t_cur,
                &self.t_prev,
                &mut self.t_next,
            );
            let ck = plan.coeffs[k];
            for i in 0..psi.len() {
                self.acc[i] += ck * self.t_next[i];
            }
            std::mem::swap(&mut self.t_prev, &mut self.t_cur);
            std::mem::swap(&mut self.t_cur, &mut self.t_next);
        }
        for (p, a) in psi.iter_mut().zip(&self.acc) {
            *p = plan.phase * a;
        }
        order
    }

    /// One exact step ψ ← e^{−iH·dt}ψ. Negative `dt` propagates backwards;
    /// `dt = 0` is a no-op.
    pub fn step(&mut self, psi: &mut [C64], dt: f64) -> Result<()> {
        if psi.len() != self.h.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state length {} does not match operator dimension {}",
                psi.len(),
                self.h.dim()
            )));
        }
        if !dt.is_finite() {
            return Err(Error::InvalidParams(format!("step size {dt} must be finite")));
        }
        if dt == 0.0 {
            return Ok(());
        }
        if self.plan.as_ref().is_none_or(|p| p.dt != dt) {
            self.plan = Some(self.plan_step(dt)?);
        }
        let norm_in: f64 = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        self.saved.copy_from_slice(psi);
        let order = self.apply_plan(psi);
        let norm_out: f64 = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let mut drift = (norm_out / norm_in - 1.0).abs();
        if !drift.is_finite() || drift > NORM_GUARD {
            // The series diverged: the spectrum must poke outside the assumed
            // bounds. Re-enclose with Gershgorin (always safe) and retry once.
            psi.copy_from_slice(&self.saved);
            let gersh = self.h.gershgorin();
            self.bounds = pad_and_clip(gersh.0, gersh.1, 0.0, gersh);
            self.plan = Some(self.plan_step(dt)?);
            self.stats.rebounds += 1;
            let order = self.apply_plan(psi);
            let norm_retry: f64 = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            drift = (norm_retry / norm_in - 1.0).abs();
            if !drift.is_finite() || drift > NORM_GUARD {
                return Err(Error::Numerical(format!(
                    "propagation step lost unitarity (relative norm change {drift:.3e}) even with Gershgorin bounds"
                )));
            }
            self.stats.max_order = self.stats.max_order.max(order);
        } else {
            self.stats.max_order = self.stats.max_order.max(order);
        }
        self.stats.steps += 1;
        self.stats.matvecs += order as u64;
        self.stats.max_norm_drift = self.stats.max_norm_drift.max(drift);
        Ok(())
    }

    /// Advance `psi` (the state at t = 0) through the strictly increasing
    /// sample `times`, invoking `observer(sample_index, t, psi)` at each one.
    /// Long gaps are subdivided automatically so each internal step stays
    /// near the target series order; sample times are landed on exactly.
    pub fn propagate<F>(&mut self, psi: &mut [C64], times: &[f64], mut observer: F) -> Result<PropagationStats>
    where
        F: FnMut(usize, f64, &[C64]) -> Result<()>,
    {
        let mut t_now = 0.0f64;
        for (idx, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidParams(format!("sample time {t} must be finite and ≥ 0")));
            }
            if t < t_now {
                return Err(Error::InvalidParams(format!(
                    "sample times must be non-decreasing ({t} after {t_now})"
                )));
            }
            let gap = t - t_now;
            if gap > 0.0 {
                let a_gap = gap * 0.5 * self.bounds.width();
                let n_sub = (a_gap / TARGET_STEP_A).ceil().max(1.0) as usize;
                let dt = gap / n_sub as f64;
                for _ in 0..n_sub - 1 {
                    self.step(psi, dt)?;
                }
                // Land on the sample exactly, absorbing accumulated rounding.
                t_now += dt * (n_sub - 1) as f64;
                self.step(psi, t - t_now)?;
                t_now = t;
            }
            observer(idx, t, psi)?;
        }
        Ok(self.stats)
    }
}

/// Convenience single-shot step for callers that do not reuse a propagator.
pub fn chebyshev_step(h: &SparseOperator, psi: &mut [C64], dt: f64, tol: f64) -> Result<PropagationStats> {
    let mut prop = Propagator::with_tolerance(h, tol)?;
    prop.step(psi, dt)?;
    Ok(prop.stats())
}
