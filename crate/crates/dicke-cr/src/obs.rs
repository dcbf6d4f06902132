//! Observables on product-basis states: expectation values, reduced
//! densities, entanglement entropy, Schmidt decomposition, field quadrature
//! uncertainty, and Husimi quasi-probability distributions.

use crate::linalg::{eigh, Mat};
use crate::model::{BasisIndex, SparseOperator};
use crate::states::{atomic_coherent_general, coherent_cutoff_ok, field_coherent};
use crate::{Error, Result};
use num_complex::Complex64 as C64;

const C_ZERO: C64 = C64::new(0.0, 0.0);

/// Reduced-density eigenvalues below this weight are treated as zero.
const WEIGHT_FLOOR: f64 = 1e-14;

/// ⟨ψ|A|ψ⟩.
pub fn expval(op: &SparseOperator, amps: &[C64]) -> Result<C64> {
    if op.dim() != amps.len() {
        return Err(Error::DimensionMismatch(format!(
            "operator dimension {} vs state length {}",
            op.dim(),
            amps.len()
        )));
    }
    Ok(op.matvec(amps).iter().zip(amps).map(|(hv, x)| x.conj() * hv).sum())
}

/// ⟨ψ|A|ψ⟩ for Hermitian A; fails if a residual imaginary part indicates the
/// operator (or state) is not what the caller thinks it is.
pub fn expval_real(op: &SparseOperator, amps: &[C64]) -> Result<f64> {
    let v = expval(op, amps)?;
    if v.im.abs() > 1e-10 * (1.0 + v.re.abs()) {
        return Err(Error::Numerical(format!(
            "expectation value has imaginary part {:.3e}; operator not Hermitian on this state",
            v.im
        )));
    }
    Ok(v.re)
}

/// Partial trace over the field: ρₐ[m,m′] = Σₙ ψ(m,n)·ψ*(m′,n).
pub fn reduced_atomic_density(basis: BasisIndex, amps: &[C64]) -> Result<Mat> {
    check_len(basis, amps)?;
    let mult = basis.spin().multiplicity();
    let levels = basis.n_max() + 1;
    let mut rho = Mat::zeros(mult, mult);
    for m in 0..mult {
        for mp in m..mult {
            let mut acc = C_ZERO;
            for n in 0..levels {
                acc += amps[m * levels + n] * amps[mp * levels + n].conj();
            }
            rho[(m, mp)] = acc;
            rho[(mp, m)] = acc.conj();
        }
    }
    Ok(rho)
}

/// Partial trace over the spin: ρ_f[n,n′] = Σₘ ψ(m,n)·ψ*(m,n′).
pub fn reduced_field_density(basis: BasisIndex, amps: &[C64]) -> Result<Mat> {
    check_len(basis, amps)?;
    let mult = basis.spin().multiplicity();
    let levels = basis.n_max() + 1;
    let mut rho = Mat::zeros(levels, levels);
    for n in 0..levels {
        for np in n..levels {
            let mut acc = C_ZERO;
            for m in 0..mult {
                acc += amps[m * levels + n] * amps[m * levels + np].conj();
            }
            rho[(n, np)] = acc;
            rho[(np, n)] = acc.conj();
        }
    }
    Ok(rho)
}

/// Von Neumann entropy −Σ p·ln p of a density matrix (natural log).
pub fn entropy_of_density(rho: &Mat) -> Result<f64> {
    let (w, _) = eigh(rho)?;
    Ok(-w.iter().filter(|&&p| p > WEIGHT_FLOOR).map(|&p| p * p.ln()).sum::<f64>())
}

/// Entanglement entropy of the atom-field split, computed from the smaller
/// subsystem (both give the same nonzero spectrum).
pub fn entanglement_entropy(basis: BasisIndex, amps: &[C64]) -> Result<f64> {
    let rho = if basis.spin().multiplicity() <= basis.n_max() + 1 {
        reduced_atomic_density(basis, amps)?
    } else {
        reduced_field_density(basis, amps)?
    };
    entropy_of_density(&rho)
}

/// First and second moments of the field mode, accumulated directly from the
/// amplitudes (no operator assembly).
#[derive(Clone, Copy, Debug)]
pub struct FieldMoments {
    /// ⟨a⟩
    pub mean_a: C64,
    /// ⟨a²⟩
    pub mean_a2: C64,
    /// ⟨a†a⟩
    pub mean_n: f64,
}

impl FieldMoments {
    /// Variance of the quadrature X = a + a†.
    pub fn var_x(&self) -> f64 {
        let mean_x = 2.0 * self.mean_a.re;
        (2.0 * self.mean_a2.re + 2.0 * self.mean_n + 1.0 - mean_x * mean_x).max(0.0)
    }

    /// Variance of the quadrature P = i(a† − a).
    pub fn var_p(&self) -> f64 {
        let mean_p = 2.0 * self.mean_a.im;
        (-2.0 * self.mean_a2.re + 2.0 * self.mean_n + 1.0 - mean_p * mean_p).max(0.0)
    }

    /// Uncertainty measure Δ_f = ½·√(Var X · Var P); ½ for any coherent
    /// state, (2n+1)/2 for the Fock state |n⟩.
    pub fn uncertainty_product(&self) -> f64 {
        0.5 * (self.var_x() * self.var_p()).sqrt()
    }
}

pub fn field_moments(basis: BasisIndex, amps: &[C64]) -> Result<FieldMoments> {
    check_len(basis, amps)?;
    let mult = basis.spin().multiplicity();
    let levels = basis.n_max() + 1;
    let mut mean_a = C_ZERO;
    let mut mean_a2 = C_ZERO;
    let mut mean_n = 0.0f64;
    for m in 0..mult {
        let row = &amps[m * levels..(m + 1) * levels];
        for n in 1..levels {
            let nf = n as f64;
            mean_n += nf * row[n].norm_sqr();
            mean_a += row[n - 1].conj() * row[n] * nf.sqrt();
            if n >= 2 {
                mean_a2 += row[n - 2].conj() * row[n] * (nf * (nf - 1.0)).sqrt();
            }
        }
    }
    Ok(FieldMoments { mean_a, mean_a2, mean_n })
}

/// Δ_f = ½·√(Var X · Var P) of the field mode.
pub fn field_variance(basis: BasisIndex, amps: &[C64]) -> Result<f64> {
    Ok(field_moments(basis, amps)?.uncertainty_product())
}

/// Schmidt decomposition ψ = Σₖ √(wₖ) · aₖ ⊗ fₖ of the atom-field split.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    /// Reduced-density eigenvalues wₖ (squared Schmidt coefficients),
    /// descending; they sum to 1 when all are kept. Zero-weight modes are
    /// omitted, so fewer than the requested number may be returned.
    pub coefficients: Vec<f64>,
    /// Orthonormal atomic modes, each of length 2j+1.
    pub atomic_vectors: Vec<Vec<C64>>,
    /// Orthonormal field modes, each of length n_max+1.
    pub field_vectors: Vec<Vec<C64>>,
}

/// Top `k_max` Schmidt modes, by diagonalizing the (small) atomic reduced
/// density and projecting the state onto each atomic eigenvector.
pub fn schmidt(basis: BasisIndex, amps: &[C64], k_max: usize) -> Result<SchmidtDecomposition> {
    check_len(basis, amps)?;
    let mult = basis.spin().multiplicity();
    let levels = basis.n_max() + 1;
    let rho = reduced_atomic_density(basis, amps)?;
    let (w, v) = eigh(&rho)?;
    let mut coefficients = Vec::new();
    let mut atomic_vectors = Vec::new();
    let mut field_vectors = Vec::new();
    // eigh sorts ascending; walk from the top.
    for k in (0..mult).rev().take(k_max) {
        let weight = w[k];
        if weight <= WEIGHT_FLOOR {
            continue;
        }
        let a_k: Vec<C64> = (0..mult).map(|m| v[(m, k)]).collect();
        // f̃ₖ[n] = Σₘ aₖ*(m)·ψ(m,n);  fₖ = f̃ₖ/√wₖ
        let mut f_k = vec![C_ZERO; levels];
        for m in 0..mult {
            let am = a_k[m].conj();
            let row = &amps[m * levels..(m + 1) * levels];
            for n in 0..levels {
                f_k[n] += am * row[n];
            }
        }
        let scale = weight.sqrt();
        for x in &mut f_k {
            *x /= scale;
        }
        coefficients.push(weight);
        atomic_vectors.push(a_k);
        field_vectors.push(f_k);
    }
    Ok(SchmidtDecomposition { coefficients, atomic_vectors, field_vectors })
}

/// Rectangular grid in the field phase-space plane Re α × Im α.
#[derive(Clone, Copy, Debug)]
pub struct FieldGridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub n_re: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub n_im: usize,
}

/// Grid on the Bloch sphere: θ ∈ [0, π] inclusive on both ends, φ ∈ [0, 2π)
/// with the periodic endpoint excluded.
#[derive(Clone, Copy, Debug)]
pub struct AtomicGridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

/// Sampled Husimi distribution. `values[ix·y.len() + iy]` is Q at
/// (x[ix], y[iy]); x, y are (Re α, Im α) for the field and (θ, φ) for the
/// atoms.
#[derive(Clone, Debug)]
pub struct HusimiGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<f64>,
    /// Whether the y axis is periodic (true for the Bloch φ axis).
    pub wrap_y: bool,
}

impl HusimiGrid {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.y.len() + iy]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &b| a.max(b))
    }
}

fn linspace(lo: f64, hi: f64, n: usize, inclusive: bool) -> Vec<f64> {
    let steps = if inclusive { (n - 1).max(1) } else { n };
    (0..n).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
}

/// Field-mode Husimi function Q_f(α) = Σₘ |Σₙ ⟨α|n⟩·ψ(m,n)|² ( = ⟨α|ρ_f|α⟩,
/// without the conventional 1/π prefactor).
pub fn field_husimi(basis: BasisIndex, amps: &[C64], spec: &FieldGridSpec) -> Result<HusimiGrid> {
    check_len(basis, amps)?;
    if spec.n_re < 2 || spec.n_im < 2 || spec.re_max <= spec.re_min || spec.im_max <= spec.im_min {
        return Err(Error::InvalidParams("phase-space grid needs ≥ 2 points per axis and a positive extent".into()));
    }
    // The largest |α| over the rectangle is attained at a corner; one check
    // covers every grid point.
    let r_corner = spec
        .re_min
        .abs()
        .max(spec.re_max.abs())
        .hypot(spec.im_min.abs().max(spec.im_max.abs()));
    if !coherent_cutoff_ok(r_corner, basis.n_max()) {
        return Err(Error::CutoffTooSmall(format!(
            "phase-space grid corner |α| = {r_corner:.2} exceeds the coherent-state validity of n_max = {}",
            basis.n_max()
        )));
    }
    let mult = basis.spin().multiplicity();
    let levels = basis.n_max() + 1;
    let x = linspace(spec.re_min, spec.re_max, spec.n_re, true);
    let y = linspace(spec.im_min, spec.im_max, spec.n_im, true);
    let mut values = vec![0.0f64; spec.n_re * spec.n_im];
    for (ix, &re) in x.iter().enumerate() {
        for (iy, &im) in y.iter().enumerate() {
            let coh = field_coherent(C64::new(re, im), basis.n_max())?;
            let mut q = 0.0;
            for m in 0..mult {
                let row = &amps[m * levels..(m + 1) * levels];
                let mut proj = C_ZERO;
                for n in 0..levels {
                    proj += coh[n].conj() * row[n];
                }
                q += proj.norm_sqr();
            }
            values[ix * spec.n_im + iy] = q;
        }
    }
    Ok(HusimiGrid { x, y, values, wrap_y: false })
}

/// Atomic Husimi function Q_a(θ,φ) = Σₙ |Σₘ ⟨θ,φ|m⟩·ψ(m,n)|² over the Bloch
/// sphere.
pub fn atomic_husimi(basis: BasisIndex, amps: &[C64], spec: &AtomicGridSpec) -> Result<HusimiGrid> {
    check_len(basis, amps)?;
    if spec.n_theta < 2 || spec.n_phi < 2 {
        return Err(Error::InvalidParams("Bloch-sphere grid needs ≥ 2 points per axis".into()));
    }
    let mult = basis.spin().multiplicity();
    let levels = basis.n_max() + 1;
    let x = linspace(0.0, std::f64::consts::PI, spec.n_theta, true);
    let y = linspace(0.0, std::f64::consts::TAU, spec.n_phi, false);
    let mut values = vec![0.0f64; spec.n_theta * spec.n_phi];
    for (ix, &theta) in x.iter().enumerate() {
        for (iy, &phi) in y.iter().enumerate() {
            let coh = atomic_coherent_general(basis.spin(), theta, phi);
            let mut q = 0.0;
            for n in 0..levels {
                let mut proj = C_ZERO;
                for m in 0..mult {
                    proj += coh[m].conj() * amps[m * levels + n];
                }
                q += proj.norm_sqr();
            }
            values[ix * spec.n_phi + iy] = q;
        }
    }
    Ok(HusimiGrid { x, y, values, wrap_y: true })
}

/// A local maximum of a sampled distribution.
#[derive(Clone, Copy, Debug)]
pub struct Peak {
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Local maxima of the grid that reach at least `min_rel_height` times the
/// global maximum, with lower peaks within `min_separation` cells (Chebyshev
/// distance, wrapping in y when the grid is periodic) suppressed. Returned
/// in descending height order.
pub fn find_peaks(grid: &HusimiGrid, min_rel_height: f64, min_separation: usize) -> Vec<Peak> {
    let nx = grid.x.len();
    let ny = grid.y.len();
    let threshold = min_rel_height * grid.max_value();
    if threshold <= 0.0 {
        return Vec::new();
    }
    let mut candidates: Vec<Peak> = Vec::new();
    for ix in 0..nx {
        for iy in 0..ny {
            let v = grid.value(ix, iy);
            if v < threshold {
                continue;
            }
            // ≥ against every neighbor (ties resolved by the suppression
            // pass) so symmetric peaks with bit-equal heights all survive.
            let mut is_max = true;
            'nb: for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let jx = ix as i64 + dx;
                    if jx < 0 || jx >= nx as i64 {
                        continue;
                    }
                    let jy = if grid.wrap_y {
                        (iy as i64 + dy).rem_euclid(ny as i64)
                    } else {
                        let jy = iy as i64 + dy;
                        if jy < 0 || jy >= ny as i64 {
                            continue;
                        }
                        jy
                    };
                    if grid.value(jx as usize, jy as usize) > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push(Peak { ix, iy, x: grid.x[ix], y: grid.y[iy], value: v });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .expect("finite Husimi values")
            .then(a.ix.cmp(&b.ix))
            .then(a.iy.cmp(&b.iy))
    });
    let mut kept: Vec<Peak> = Vec::new();
    for cand in candidates {
        let far_enough = kept.iter().all(|p| {
            let dx = cand.ix.abs_diff(p.ix);
            let dy_raw = cand.iy.abs_diff(p.iy);
            let dy = if grid.wrap_y { dy_raw.min(ny - dy_raw) } else { dy_raw };
            dx.max(dy) >= min_separation
        });
        if far_enough {
            kept.push(cand);
        }
    }
    kept
}

/// A set of named scalar channels sampled on a common time grid.
#[derive(Clone, Debug, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub channels: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>) -> Self {
        TimeSeries { times, channels: Vec::new() }
    }

    pub fn push_channel(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.times.len() {
            return Err(Error::DimensionMismatch(format!(
                "channel {name} has {} samples for {} times",
                values.len(),
                self.times.len()
            )));
        }
        if self.channel(&name).is_some() {
            return Err(Error::InvalidParams(format!("duplicate channel {name}")));
        }
        self.channels.push((name, values));
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

fn check_len(basis: BasisIndex, amps: &[C64]) -> Result<()> {
    if amps.len() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state length {} does not match basis dimension {}",
            amps.len(),
            basis.dim()
        )));
    }
    Ok(())
}
