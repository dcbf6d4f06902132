//! Classical limits of the spin–boson dynamics: the driven-atom equations
//! (prescribed classical field) and the semi-classical approximation (field
//! evolved self-consistently alongside the spin expectation values).
//!
//! Both are precession equations ∂tJ = B×J for the Bloch vector
//! J = (⟨Jx⟩, ⟨Jy⟩, ⟨Jz⟩):
//!
//! ```text
//! driven:  B(t) = (2λα₀ cos Ωt, 0, −Δ)
//! SCA:     B(α) = (2λ Re α,     0, −Δ),   ∂tα = −i(Ωα + λJx)
//! ```
//!
//! The cross-product sign is fixed so that the λ = 0 dynamics reproduces the
//! quantum precession under −ΔJz (pinned against the exact propagator in a
//! test). Trajectories are integrated by classic fixed-step fourth-order
//! Runge–Kutta — the right tool for smooth, bounded, deterministic paths —
//! with |J| conservation tracked as the integration-quality certificate.
//! Since the field is classical here, Rabi oscillations never collapse; the
//! envelope helpers at the end of the module turn that qualitative statement
//! into measurable amplitude curves.

use crate::model::ModelParams;
use crate::obs::TimeSeries;
use crate::{Error, Result};
use num_complex::Complex64 as C64;

/// Classical phase-space point: Bloch vector plus field amplitude.
#[derive(Clone, Copy, Debug)]
pub struct ClassicalState {
    /// (⟨Jx⟩, ⟨Jy⟩, ⟨Jz⟩); |J| = j is a constant of motion.
    pub j: [f64; 3],
    /// Coherent field amplitude α.
    pub alpha: C64,
}

/// Time derivative of a [`ClassicalState`].
#[derive(Clone, Copy, Debug)]
pub struct ClassicalDerivative {
    pub dj: [f64; 3],
    pub dalpha: C64,
}

fn cross(b: [f64; 3], j: [f64; 3]) -> [f64; 3] {
    [
        b[1] * j[2] - b[2] * j[1],
        b[2] * j[0] - b[0] * j[2],
        b[0] * j[1] - b[1] * j[0],
    ]
}

/// Effective field of the driven-atom limit, B(t) = (2λα₀ cos Ωt, 0, −Δ).
pub fn driven_field(t: f64, p: &ModelParams, alpha0: f64) -> [f64; 3] {
    [2.0 * p.lambda * alpha0 * (p.omega * t).cos(), 0.0, -p.delta]
}

/// ∂tJ = B(t)×J for the prescribed classical drive.
pub fn driven_rhs(t: f64, j: [f64; 3], p: &ModelParams, alpha0: f64) -> [f64; 3] {
    cross(driven_field(t, p, alpha0), j)
}

/// Coupled semi-classical equations: ∂tJ = B(α)×J, ∂tα = −i(Ωα + λJx).
pub fn sca_rhs(state: &ClassicalState, p: &ModelParams) -> ClassicalDerivative {
    let b = [2.0 * p.lambda * state.alpha.re, 0.0, -p.delta];
    ClassicalDerivative {
        dj: cross(b, state.j),
        dalpha: C64::new(0.0, -1.0) * (p.omega * state.alpha + p.lambda * state.j[0]),
    }
}

/// Default integration step: the faster of the two natural periods, resolved
/// by 200 points.
pub fn default_step(p: &ModelParams) -> f64 {
    let period = |w: f64| if w == 0.0 { f64::INFINITY } else { std::f64::consts::TAU / w.abs() };
    let fastest = period(p.delta).min(period(p.omega));
    if fastest.is_infinite() {
        // Both frequencies zero: any step resolves a constant field.
        1.0
    } else {
        fastest / 200.0
    }
}

/// An integrated classical trajectory sampled at the requested times.
#[derive(Clone, Debug)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ClassicalState>,
    /// |J| at the initial condition, the reference for drift measurements.
    pub j_norm_ref: f64,
}

impl ClassicalTrajectory {
    /// Worst |‖J(t)‖ − ‖J(0)‖|/t over the recorded samples — the conservation
    /// certificate of the cross-product structure plus integrator.
    pub fn max_j_norm_drift_rate(&self) -> f64 {
        self.times
            .iter()
            .zip(&self.states)
            .filter(|(&t, _)| t > 0.0)
            .map(|(&t, s)| (norm3(s.j) - self.j_norm_ref).abs() / t)
            .fold(0.0, f64::max)
    }

    /// Channels jx, jy, jz, alpha_re, alpha_im on the sample grid.
    pub fn to_time_series(&self) -> TimeSeries {
        let mut ts = TimeSeries::new(self.times.clone());
        let pick = |f: fn(&ClassicalState) -> f64| self.states.iter().map(f).collect::<Vec<_>>();
        ts.push_channel("jx", pick(|s| s.j[0])).expect("fresh channel");
        ts.push_channel("jy", pick(|s| s.j[1])).expect("fresh channel");
        ts.push_channel("jz", pick(|s| s.j[2])).expect("fresh channel");
        ts.push_channel("alpha_re", pick(|s| s.alpha.re)).expect("fresh channel");
        ts.push_channel("alpha_im", pick(|s| s.alpha.im)).expect("fresh channel");
        ts
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

type Y = [f64; 5];

fn axpy(y: &Y, k: &Y, h: f64) -> Y {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3], y[4] + h * k[4]]
}

fn rk4_step<F: Fn(f64, &Y) -> Y>(f: &F, t: f64, y: &Y, h: f64) -> Y {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &axpy(y, &k2, 0.5 * h));
    let k4 = f(t + h, &axpy(y, &k3, h));
    let mut out = *y;
    for i in 0..5 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn integrate<F: Fn(f64, &Y) -> Y>(
    f: F,
    state0: ClassicalState,
    times: &[f64],
    dt: f64,
) -> Result<ClassicalTrajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("integration step {dt} must be positive")));
    }
    if times.first().is_some_and(|&t0| t0 < 0.0) {
        return Err(Error::InvalidParams("sample times must start at t ≥ 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("sample times must be non-decreasing".into()));
    }
    let mut y: Y = [
        state0.j[0],
        state0.j[1],
        state0.j[2],
        state0.alpha.re,
        state0.alpha.im,
    ];
    let mut t = 0.0;
    let mut states = Vec::with_capacity(times.len());
    for &target in times {
        let gap = target - t;
        if gap > 0.0 {
            // Exact landing: subdivide the gap into equal steps no longer
            // than dt, so sample times never shift the grid.
            let n_sub = (gap / dt).ceil().max(1.0) as u64;
            let h = gap / n_sub as f64;
            for k in 0..n_sub {
                y = rk4_step(&f, t + k as f64 * h, &y, h);
            }
            t = target;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "classical integration produced a non-finite value near t = {t}"
                )));
            }
        }
        states.push(ClassicalState {
            j: [y[0], y[1], y[2]],
            alpha: C64::new(y[3], y[4]),
        });
    }
    Ok(ClassicalTrajectory {
        times: times.to_vec(),
        states,
        j_norm_ref: norm3(state0.j),
    })
}

/// Integrate the driven-atom equations from `j0` at t = 0, sampling at
/// `times`. The trajectory's field channel carries the prescribed drive
/// α₀e^{−iΩt}.
pub fn integrate_driven(
    p: &ModelParams,
    alpha0: f64,
    j0: [f64; 3],
    times: &[f64],
    dt: f64,
) -> Result<ClassicalTrajectory> {
    let f = |t: f64, y: &Y| {
        let dj = driven_rhs(t, [y[0], y[1], y[2]], p, alpha0);
        // The decorative field label rotates freely; with a real α₀ its real
        // part is exactly the α₀cos Ωt entering B(t).
        [dj[0], dj[1], dj[2], p.omega * y[4], -p.omega * y[3]]
    };
    integrate(
        f,
        ClassicalState { j: j0, alpha: C64::new(alpha0, 0.0) },
        times,
        dt,
    )
}

/// Integrate the self-consistent semi-classical equations from `state0` at
/// t = 0, sampling at `times`.
pub fn integrate_sca(
    p: &ModelParams,
    state0: ClassicalState,
    times: &[f64],
    dt: f64,
) -> Result<ClassicalTrajectory> {
    let f = |_t: f64, y: &Y| {
        let d = sca_rhs(
            &ClassicalState { j: [y[0], y[1], y[2]], alpha: C64::new(y[3], y[4]) },
            p,
        );
        [d.dj[0], d.dj[1], d.dj[2], d.dalpha.re, d.dalpha.im]
    };
    integrate(f, state0, times, dt)
}

/// Oscillation envelope: for each sample, the largest deviation of the signal
/// from its local mean over a centered window of width `window`. Removing the
/// windowed mean first keeps slow offsets (e.g. a collapse plateau) out of
/// the amplitude estimate.
pub fn oscillation_envelope(times: &[f64], values: &[f64], window: f64) -> Result<Vec<f64>> {
    sliding(times, values, window, |mean, vmin, vmax| (vmax - mean).max(mean - vmin))
}

/// Running maximum over a centered window of width `window`; used to smooth
/// an envelope whose raw amplitude is itself modulated (the Rabi amplitude
/// vanishes twice per field period as cos Ωt crosses zero).
pub fn running_max(times: &[f64], values: &[f64], window: f64) -> Result<Vec<f64>> {
    sliding(times, values, window, |_, _, vmax| vmax)
}

fn sliding(
    times: &[f64],
    values: &[f64],
    window: f64,
    reduce: impl Fn(f64, f64, f64) -> f64,
) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    if !(window > 0.0) {
        return Err(Error::InvalidParams(format!("window {window} must be positive")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("times must be non-decreasing".into()));
    }
    let n = times.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    // Monotonic index deques for the windowed max and min.
    let mut maxq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut minq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut out = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, 0usize); // window is [lo, hi)
    for i in 0..n {
        let left = times[i] - window / 2.0;
        let right = times[i] + window / 2.0;
        while hi < n && times[hi] <= right {
            while maxq.back().is_some_and(|&k| values[k] <= values[hi]) {
                maxq.pop_back();
            }
            maxq.push_back(hi);
            while minq.back().is_some_and(|&k| values[k] >= values[hi]) {
                minq.pop_back();
            }
            minq.push_back(hi);
            hi += 1;
        }
        while times[lo] < left {
            if maxq.front() == Some(&lo) {
                maxq.pop_front();
            }
            if minq.front() == Some(&lo) {
                minq.pop_front();
            }
            lo += 1;
        }
        let mean = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
        out.push(reduce(mean, values[*minq.front().unwrap()], values[*maxq.front().unwrap()]));
    }
    Ok(out)
}
