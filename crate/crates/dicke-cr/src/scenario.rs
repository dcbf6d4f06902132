//! Scenario configuration, presets, method orchestration, and file output.
//!
//! A [`Scenario`] bundles the model parameters, the initial product state,
//! the sampling grid, the methods to run, and the channels to record.
//! Scenarios come from named presets ([`Scenario::preset`]) or from flat
//! `key = value` config text ([`Scenario::from_config_str`]), and serialize
//! back to that format, so the manifest emitted next to the data re-runs the
//! exact same job. Everything here is deterministic: with the same
//! configuration, repeated runs produce bit-identical files, with or without
//! `--parallel`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::thread;

use num_complex::Complex64 as C64;

use crate::cheby::Propagator;
use crate::model::{
    build_dicke_hamiltonian, build_spin_operators, BasisIndex, ModelParams, SparseOperator,
    SpinLength,
};
use crate::obs::{self, AtomicGridSpec, FieldGridSpec, HusimiGrid, Peak, TimeSeries};
use crate::pert::{collapse_plateau, EffectiveFrequencies, PerturbativeModel};
use crate::sca::{self, ClassicalState};
use crate::states::{atomic_coherent_general, coherent_cutoff_ok, field_coherent, product_state};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Fraction of the highest Fock levels counted as the truncation tail.
const TAIL_FRACTION: f64 = 0.1;
/// Occupation of the tail above which a truncation warning is raised.
const TAIL_WARN: f64 = 1e-8;
/// Spin-length drift rate above which a classical run raises a warning.
const J_DRIFT_WARN: f64 = 1e-8;
/// Husimi peaks below this fraction of the tallest value are not counted.
const PEAK_MIN_REL_HEIGHT: f64 = 0.15;
/// An envelope dropping below this fraction of its initial value counts as
/// a collapse.
const COLLAPSE_LEVEL: f64 = 0.3;
/// A post-collapse envelope maximum must recover at least this fraction of
/// the initial amplitude to count as a revival. Quantum revivals are partial
/// (branch coherences do not re-phase perfectly), so the bar sits well below
/// full recovery while staying above collapse-plateau sidelobes.
const REVIVAL_MIN_RECOVERY: f64 = 0.3;
/// Width of the revival: the contiguous region within this fraction of the
/// post-collapse maximum, whose midpoint is the reported revival time.
const REVIVAL_PLATEAU: f64 = 0.95;

/// Evolution method.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Chebyshev propagation of the full Hamiltonian.
    Exact,
    /// Second-order branch-form wave function.
    Pert,
    /// Semi-classical mean field with field back-action.
    Sca,
    /// Prescribed classical drive (no back-action).
    Driven,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Exact, Method::Pert, Method::Sca, Method::Driven];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Pert => "pert",
            Method::Sca => "sca",
            Method::Driven => "driven",
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == token)
            .ok_or_else(|| Error::Config(format!("unknown method `{token}` (expected exact, pert, sca, driven)")))
    }

    /// Whether the method produces a full wave function (and can therefore
    /// serve entropy/field channels and snapshots).
    pub fn is_wave(self) -> bool {
        matches!(self, Method::Exact | Method::Pert)
    }
}

/// Recordable channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Output {
    Jx,
    Jy,
    Jz,
    Entropy,
    FieldVar,
    Norm,
    Energy,
    HusimiField,
    HusimiAtom,
    Schmidt,
}

impl Output {
    pub const ALL: [Output; 10] = [
        Output::Jx,
        Output::Jy,
        Output::Jz,
        Output::Entropy,
        Output::FieldVar,
        Output::Norm,
        Output::Energy,
        Output::HusimiField,
        Output::HusimiAtom,
        Output::Schmidt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Output::Jx => "jx",
            Output::Jy => "jy",
            Output::Jz => "jz",
            Output::Entropy => "entropy",
            Output::FieldVar => "field_var",
            Output::Norm => "norm",
            Output::Energy => "energy",
            Output::HusimiField => "husimi_field",
            Output::HusimiAtom => "husimi_atom",
            Output::Schmidt => "schmidt",
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        Output::ALL
            .into_iter()
            .find(|o| o.name() == token)
            .ok_or_else(|| Error::Config(format!("unknown output channel `{token}`")))
    }

    /// Scalar time-series channel (as opposed to a snapshot).
    pub fn is_scalar(self) -> bool {
        !matches!(self, Output::HusimiField | Output::HusimiAtom | Output::Schmidt)
    }

    /// Whether the classical methods can produce this channel.
    fn is_classical(self) -> bool {
        matches!(self, Output::Jx | Output::Jy | Output::Jz)
    }
}

/// A complete, runnable job description.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub params: ModelParams,
    /// Polar angle of the initial spin coherent state.
    pub theta0: f64,
    /// Azimuthal angle of the initial spin coherent state.
    pub phi0: f64,
    /// Initial field coherent amplitude.
    pub alpha0: C64,
    /// Last sample time; the grid is uniform over [0, t_max].
    pub t_max: f64,
    pub n_samples: usize,
    pub methods: Vec<Method>,
    pub outputs: Vec<Output>,
    /// Snapshot times for the Husimi outputs.
    pub husimi_times: Vec<f64>,
    pub field_grid: FieldGridSpec,
    pub atomic_grid: AtomicGridSpec,
    /// Snapshot times for the Schmidt output.
    pub schmidt_times: Vec<f64>,
    pub schmidt_k_max: usize,
}

const DEFAULT_FIELD_GRID: FieldGridSpec =
    FieldGridSpec { re_min: -7.0, re_max: 7.0, n_re: 141, im_min: -7.0, im_max: 7.0, n_im: 141 };
const DEFAULT_ATOMIC_GRID: AtomicGridSpec = AtomicGridSpec { n_theta: 121, n_phi: 241 };

impl Scenario {
    /// Known preset names, canonical first.
    pub fn preset_names() -> &'static [&'static str] {
        &["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10a", "fig10b"]
    }

    /// A frozen, validated parameter set by name. Several names are aliases
    /// for the run that produces their data (`fig3` → `fig1`, `fig5`/`fig6`
    /// → `fig4`, `fig8` → `fig7`).
    pub fn preset(name: &str) -> Result<Scenario> {
        let base = |omega: f64, lambda: f64, two_j: u32, n_max: usize| -> Result<ModelParams> {
            ModelParams::new(1.0, omega, lambda, SpinLength::from_two_j(two_j)?, n_max)
        };
        let scenario = match name.trim().to_ascii_lowercase().as_str() {
            // Three atoms, slow weak field: the long collapse-and-revival
            // benchmark, exact against the branch form, with a field Husimi
            // snapshot while the branches are fully split.
            "fig1" | "fig3" => {
                let fp = TWO_PI / 0.01;
                Scenario {
                    params: base(0.01, 0.01, 3, 200)?,
                    theta0: std::f64::consts::FRAC_PI_2,
                    phi0: 0.0,
                    alpha0: C64::new(5.0, 0.0),
                    t_max: 130.0 * fp,
                    n_samples: 65_001,
                    methods: vec![Method::Exact, Method::Pert],
                    outputs: vec![
                        Output::Jz,
                        Output::Jx,
                        Output::Entropy,
                        Output::FieldVar,
                        Output::Norm,
                        Output::Energy,
                        Output::HusimiField,
                    ],
                    husimi_times: vec![25.0 * fp],
                    field_grid: DEFAULT_FIELD_GRID,
                    atomic_grid: DEFAULT_ATOMIC_GRID,
                    schmidt_times: Vec::new(),
                    schmidt_k_max: 4,
                }
            }
            // Same system, shorter horizon: phase-space portraits of the
            // field while the branches separate and re-merge.
            "fig2" => {
                let fp = TWO_PI / 0.01;
                Scenario {
                    params: base(0.01, 0.01, 3, 200)?,
                    theta0: std::f64::consts::FRAC_PI_2,
                    phi0: 0.0,
                    alpha0: C64::new(5.0, 0.0),
                    t_max: 50.0 * fp,
                    n_samples: 5001,
                    methods: vec![Method::Exact],
                    outputs: vec![Output::Jz, Output::HusimiField],
                    husimi_times: vec![10.0 * fp, 25.0 * fp, 50.0 * fp],
                    field_grid: DEFAULT_FIELD_GRID,
                    atomic_grid: DEFAULT_ATOMIC_GRID,
                    schmidt_times: Vec::new(),
                    schmidt_k_max: 4,
                }
            }
            // Twenty atoms: entanglement entropy with fractional-revival
            // dips, plus Schmidt spectra mid-collapse and near a dip.
            "fig4" | "fig5" | "fig6" => {
                let fp = TWO_PI / 0.05;
                Scenario {
                    params: base(0.05, 0.02, 20, 80)?,
                    theta0: std::f64::consts::FRAC_PI_4,
                    phi0: 0.0,
                    alpha0: C64::new(3.0, 0.0),
                    t_max: 70.0 * fp,
                    n_samples: 3081,
                    methods: vec![Method::Exact],
                    outputs: vec![Output::Jz, Output::Entropy, Output::Schmidt],
                    husimi_times: Vec::new(),
                    field_grid: DEFAULT_FIELD_GRID,
                    atomic_grid: DEFAULT_ATOMIC_GRID,
                    schmidt_times: vec![25.0 * fp, 60.0 * fp],
                    schmidt_k_max: 4,
                }
            }
            // Fast-field regime: the spin splits instead of the field; the
            // atomic Husimi snapshot catches the two-component cat.
            "fig7" | "fig8" => {
                let ap = TWO_PI;
                Scenario {
                    params: base(20.0, 0.5, 20, 80)?,
                    theta0: std::f64::consts::FRAC_PI_4,
                    phi0: 0.0,
                    alpha0: C64::new(3.0, 0.0),
                    t_max: 40.0 * ap,
                    n_samples: 2001,
                    methods: vec![Method::Exact],
                    outputs: vec![Output::Jz, Output::Entropy, Output::HusimiAtom, Output::Schmidt],
                    husimi_times: vec![32.0 * ap],
                    field_grid: DEFAULT_FIELD_GRID,
                    atomic_grid: DEFAULT_ATOMIC_GRID,
                    schmidt_times: vec![32.0 * ap],
                    schmidt_k_max: 4,
                }
            }
            // Single atom through half a revival period: all four methods
            // side by side, exposing where the mean field fails.
            "fig9" => Scenario {
                params: base(0.01, 0.02, 1, 150)?,
                theta0: std::f64::consts::FRAC_PI_2,
                phi0: 0.0,
                alpha0: C64::new(5.0, 0.0),
                t_max: 9425.0,
                n_samples: 18_851,
                methods: vec![Method::Exact, Method::Pert, Method::Sca, Method::Driven],
                outputs: vec![Output::Jz, Output::Jx, Output::Entropy],
                husimi_times: Vec::new(),
                field_grid: DEFAULT_FIELD_GRID,
                atomic_grid: DEFAULT_ATOMIC_GRID,
                schmidt_times: Vec::new(),
                schmidt_k_max: 4,
            },
            // Large field (mean 400 photons): the collapse survives even
            // closer to the classical limit. Heavy run.
            "fig10a" => Scenario {
                params: base(0.01, 0.005, 1, 600)?,
                theta0: std::f64::consts::FRAC_PI_2,
                phi0: 0.0,
                alpha0: C64::new(20.0, 0.0),
                t_max: 150_800.0,
                n_samples: 30_161,
                methods: vec![Method::Exact, Method::Sca],
                outputs: vec![Output::Jz],
                husimi_times: Vec::new(),
                field_grid: DEFAULT_FIELD_GRID,
                atomic_grid: DEFAULT_ATOMIC_GRID,
                schmidt_times: Vec::new(),
                schmidt_k_max: 4,
            },
            // Large spin: same comparison as fig9 at j = 10.
            "fig10b" => Scenario {
                params: base(0.01, 0.02, 20, 150)?,
                theta0: std::f64::consts::FRAC_PI_2,
                phi0: 0.0,
                alpha0: C64::new(5.0, 0.0),
                t_max: 9425.0,
                n_samples: 9426,
                methods: vec![Method::Exact, Method::Sca, Method::Driven],
                outputs: vec![Output::Jz],
                husimi_times: Vec::new(),
                field_grid: DEFAULT_FIELD_GRID,
                atomic_grid: DEFAULT_ATOMIC_GRID,
                schmidt_times: Vec::new(),
                schmidt_k_max: 4,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (known: {})",
                    Scenario::preset_names().join(", ")
                )))
            }
        };
        Ok(scenario)
    }

    /// Parse the flat `key = value` configuration format. `#` starts a
    /// comment; complex numbers are `re,im`; lists are comma-separated.
    /// Unknown and duplicate keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Scenario> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", lineno + 1)));
            };
            let key = key.trim().to_string();
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }

        let mut req = |key: &str| -> Result<String> {
            map.remove(key).ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
        };
        let delta = parse_f64("delta", &req("delta")?)?;
        let omega = parse_f64("omega", &req("omega")?)?;
        let lambda = parse_f64("lambda", &req("lambda")?)?;
        let two_j = parse_u32("two_j", &req("two_j")?)?;
        let n_max = parse_usize("n_max", &req("n_max")?)?;
        let theta0 = parse_f64("theta0", &req("theta0")?)?;
        let alpha0 = parse_c64("alpha0", &req("alpha0")?)?;
        let t_max = parse_f64("t_max", &req("t_max")?)?;
        let n_samples = parse_usize("n_samples", &req("n_samples")?)?;
        let methods = req("methods")?
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Method::parse)
            .collect::<Result<Vec<_>>>()?;
        let outputs = req("outputs")?
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Output::parse)
            .collect::<Result<Vec<_>>>()?;

        let mut opt = |key: &str| map.remove(key);
        let phi0 = opt("phi0").map(|v| parse_f64("phi0", &v)).transpose()?.unwrap_or(0.0);
        let husimi_times =
            opt("husimi_times").map(|v| parse_f64_list("husimi_times", &v)).transpose()?.unwrap_or_default();
        let g = DEFAULT_FIELD_GRID;
        let field_grid = FieldGridSpec {
            re_min: opt("husimi_re_min").map(|v| parse_f64("husimi_re_min", &v)).transpose()?.unwrap_or(g.re_min),
            re_max: opt("husimi_re_max").map(|v| parse_f64("husimi_re_max", &v)).transpose()?.unwrap_or(g.re_max),
            n_re: opt("husimi_n_re").map(|v| parse_usize("husimi_n_re", &v)).transpose()?.unwrap_or(g.n_re),
            im_min: opt("husimi_im_min").map(|v| parse_f64("husimi_im_min", &v)).transpose()?.unwrap_or(g.im_min),
            im_max: opt("husimi_im_max").map(|v| parse_f64("husimi_im_max", &v)).transpose()?.unwrap_or(g.im_max),
            n_im: opt("husimi_n_im").map(|v| parse_usize("husimi_n_im", &v)).transpose()?.unwrap_or(g.n_im),
        };
        let atomic_grid = AtomicGridSpec {
            n_theta: opt("husimi_n_theta")
                .map(|v| parse_usize("husimi_n_theta", &v))
                .transpose()?
                .unwrap_or(DEFAULT_ATOMIC_GRID.n_theta),
            n_phi: opt("husimi_n_phi")
                .map(|v| parse_usize("husimi_n_phi", &v))
                .transpose()?
                .unwrap_or(DEFAULT_ATOMIC_GRID.n_phi),
        };
        let schmidt_times =
            opt("schmidt_times").map(|v| parse_f64_list("schmidt_times", &v)).transpose()?.unwrap_or_default();
        let schmidt_k_max =
            opt("schmidt_k_max").map(|v| parse_usize("schmidt_k_max", &v)).transpose()?.unwrap_or(4);

        if let Some(stray) = map.keys().next() {
            return Err(Error::Config(format!("unknown key `{stray}`")));
        }

        let params = ModelParams::new(delta, omega, lambda, SpinLength::from_two_j(two_j)?, n_max)?;
        Ok(Scenario {
            params,
            theta0,
            phi0,
            alpha0,
            t_max,
            n_samples,
            methods,
            outputs,
            husimi_times,
            field_grid,
            atomic_grid,
            schmidt_times,
            schmidt_k_max,
        })
    }

    /// Serialize to the config format with every key resolved. Floats carry
    /// 17 significant digits, so parsing the result reproduces this scenario
    /// bit for bit.
    pub fn to_config_string(&self) -> String {
        let p = &self.params;
        let mut out = String::from("# dicke-cr scenario (resolved)\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("delta", fmt_f(p.delta));
        kv("omega", fmt_f(p.omega));
        kv("lambda", fmt_f(p.lambda));
        kv("two_j", p.spin.two_j().to_string());
        kv("n_max", p.n_max.to_string());
        kv("theta0", fmt_f(self.theta0));
        kv("phi0", fmt_f(self.phi0));
        kv("alpha0", format!("{},{}", fmt_f(self.alpha0.re), fmt_f(self.alpha0.im)));
        kv("t_max", fmt_f(self.t_max));
        kv("n_samples", self.n_samples.to_string());
        kv("methods", self.methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(","));
        kv("outputs", self.outputs.iter().map(|o| o.name()).collect::<Vec<_>>().join(","));
        kv("husimi_times", self.husimi_times.iter().map(|&t| fmt_f(t)).collect::<Vec<_>>().join(","));
        kv("husimi_re_min", fmt_f(self.field_grid.re_min));
        kv("husimi_re_max", fmt_f(self.field_grid.re_max));
        kv("husimi_n_re", self.field_grid.n_re.to_string());
        kv("husimi_im_min", fmt_f(self.field_grid.im_min));
        kv("husimi_im_max", fmt_f(self.field_grid.im_max));
        kv("husimi_n_im", self.field_grid.n_im.to_string());
        kv("husimi_n_theta", self.atomic_grid.n_theta.to_string());
        kv("husimi_n_phi", self.atomic_grid.n_phi.to_string());
        kv("schmidt_times", self.schmidt_times.iter().map(|&t| fmt_f(t)).collect::<Vec<_>>().join(","));
        kv("schmidt_k_max", self.schmidt_k_max.to_string());
        out
    }

    /// Check every precondition and collect non-fatal warnings (perturbative
    /// validity, small field amplitude). Model parameters were already
    /// validated on construction.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method must be selected".into()));
        }
        if self.outputs.is_empty() {
            return Err(Error::Config("at least one output channel must be selected".into()));
        }
        for i in 1..self.methods.len() {
            if self.methods[..i].contains(&self.methods[i]) {
                return Err(Error::Config(format!("method `{}` listed twice", self.methods[i].name())));
            }
        }
        for i in 1..self.outputs.len() {
            if self.outputs[..i].contains(&self.outputs[i]) {
                return Err(Error::Config(format!("output `{}` listed twice", self.outputs[i].name())));
            }
        }
        if !self.theta0.is_finite() || !self.phi0.is_finite() {
            return Err(Error::Config("theta0 and phi0 must be finite".into()));
        }
        if !self.alpha0.re.is_finite() || !self.alpha0.im.is_finite() {
            return Err(Error::Config("alpha0 must be finite".into()));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::Config(format!("t_max = {} must be positive and finite", self.t_max)));
        }
        if self.n_samples < 2 {
            return Err(Error::Config("n_samples must be at least 2".into()));
        }
        let n_max = self.params.n_max;
        if !coherent_cutoff_ok(self.alpha0.norm(), n_max) {
            return Err(Error::CutoffTooSmall(format!(
                "|alpha0| = {:.2} needs a larger Fock cutoff than n_max = {n_max}",
                self.alpha0.norm()
            )));
        }

        let wave = self.methods.iter().any(|m| m.is_wave());
        for &out in &self.outputs {
            match out {
                Output::Entropy | Output::FieldVar | Output::Norm | Output::Energy => {
                    if !wave {
                        return Err(Error::Config(format!(
                            "output `{}` needs the exact or pert method",
                            out.name()
                        )));
                    }
                }
                Output::HusimiField | Output::HusimiAtom => {
                    if !wave {
                        return Err(Error::Config(format!(
                            "output `{}` needs the exact or pert method",
                            out.name()
                        )));
                    }
                    if self.husimi_times.is_empty() {
                        return Err(Error::Config(format!(
                            "output `{}` requested but husimi_times is empty",
                            out.name()
                        )));
                    }
                }
                Output::Schmidt => {
                    if !wave {
                        return Err(Error::Config("output `schmidt` needs the exact or pert method".into()));
                    }
                    if self.schmidt_times.is_empty() {
                        return Err(Error::Config("output `schmidt` requested but schmidt_times is empty".into()));
                    }
                    if self.schmidt_k_max == 0 {
                        return Err(Error::Config("schmidt_k_max must be at least 1".into()));
                    }
                }
                _ => {}
            }
        }
        for (name, times) in
            [("husimi_times", &self.husimi_times), ("schmidt_times", &self.schmidt_times)]
        {
            for &t in times.iter() {
                if !(t.is_finite() && (0.0..=self.t_max).contains(&t)) {
                    return Err(Error::Config(format!(
                        "{name} entry {t} lies outside the sampled span [0, {}]",
                        self.t_max
                    )));
                }
            }
        }
        if self.outputs.contains(&Output::HusimiField) {
            let g = &self.field_grid;
            if g.n_re < 2 || g.n_im < 2 || g.re_max <= g.re_min || g.im_max <= g.im_min {
                return Err(Error::Config(
                    "the phase-space grid needs at least 2 points per axis and positive extents".into(),
                ));
            }
            let corner = g.re_min.abs().max(g.re_max.abs()).hypot(g.im_min.abs().max(g.im_max.abs()));
            if !coherent_cutoff_ok(corner, n_max) {
                return Err(Error::CutoffTooSmall(format!(
                    "phase-space grid corner |α| = {corner:.2} needs a larger Fock cutoff than n_max = {n_max}"
                )));
            }
        }
        if self.outputs.contains(&Output::HusimiAtom)
            && (self.atomic_grid.n_theta < 2 || self.atomic_grid.n_phi < 2)
        {
            return Err(Error::Config("the Bloch-sphere grid needs at least 2 points per axis".into()));
        }
        if self.methods.contains(&Method::Driven) && self.alpha0.im != 0.0 {
            return Err(Error::Config(
                "the driven method takes a real initial field amplitude (alpha0 = re,0)".into(),
            ));
        }

        let mut warnings = Vec::new();
        if self.methods.contains(&Method::Pert) {
            let model = PerturbativeModel::new(&self.params, self.theta0, self.phi0, self.alpha0)?;
            warnings.extend(model.warnings().iter().cloned());
        }
        Ok(warnings)
    }

    /// The uniform sample grid [0, t_max].
    pub fn sample_times(&self) -> Vec<f64> {
        if self.n_samples < 2 {
            return vec![0.0];
        }
        (0..self.n_samples)
            .map(|i| self.t_max * i as f64 / (self.n_samples - 1) as f64)
            .collect()
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{s}` as a number")))
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{s}` as a non-negative integer")))
}

fn parse_u32(key: &str, s: &str) -> Result<u32> {
    s.parse::<u32>().map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{s}` as a non-negative integer")))
}

fn parse_c64(key: &str, s: &str) -> Result<C64> {
    let Some((re, im)) = s.split_once(',') else {
        return Err(Error::Config(format!("key `{key}`: complex values are written `re,im`, got `{s}`")));
    };
    Ok(C64::new(parse_f64(key, re.trim())?, parse_f64(key, im.trim())?))
}

fn parse_f64_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_f64(key, t))
        .collect()
}

/// Field-mode Husimi snapshot with its detected peaks.
#[derive(Clone, Debug)]
pub struct FieldSnapshot {
    /// Position in the scenario's `husimi_times` list.
    pub index: usize,
    pub time: f64,
    pub grid: HusimiGrid,
    pub peaks: Vec<Peak>,
}

/// Bloch-sphere Husimi snapshot with its detected peaks.
#[derive(Clone, Debug)]
pub struct AtomSnapshot {
    pub index: usize,
    pub time: f64,
    pub grid: HusimiGrid,
    pub peaks: Vec<Peak>,
}

/// Squared Schmidt coefficients at one time, descending.
#[derive(Clone, Debug)]
pub struct SchmidtSnapshot {
    pub index: usize,
    pub time: f64,
    pub weights: Vec<f64>,
}

/// Everything one method produced.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: Method,
    pub series: TimeSeries,
    pub field_snapshots: Vec<FieldSnapshot>,
    pub atom_snapshots: Vec<AtomSnapshot>,
    pub schmidt_snapshots: Vec<SchmidtSnapshot>,
    pub warnings: Vec<String>,
}

/// The full result of a scenario: one [`MethodRun`] per selected method (in
/// the configured order) plus scenario-level warnings.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub runs: Vec<MethodRun>,
    pub warnings: Vec<String>,
}

impl ScenarioRun {
    /// All warnings, scenario-level first, then per method.
    pub fn all_warnings(&self) -> Vec<String> {
        let mut all = self.warnings.clone();
        for run in &self.runs {
            all.extend(run.warnings.iter().cloned());
        }
        all
    }
}

/// Validate and run every selected method. Snapshots are produced by the
/// first wave-function method in the list. With `parallel`, methods run on
/// separate threads; they share only the immutable scenario, so the result
/// is identical either way.
pub fn run_scenario(s: &Scenario, parallel: bool) -> Result<ScenarioRun> {
    let warnings = s.validate()?;
    let times = s.sample_times();
    let snapshot_method = s.methods.iter().copied().find(|m| m.is_wave());
    let run_one = |method: Method| -> Result<MethodRun> {
        let snaps = snapshot_method == Some(method);
        match method {
            Method::Exact => run_exact(s, &times, snaps),
            Method::Pert => run_pert(s, &times, snaps),
            Method::Sca | Method::Driven => run_classical(s, &times, method),
        }
    };
    let runs = if parallel {
        let run_one = &run_one;
        thread::scope(|scope| {
            let handles: Vec<_> =
                s.methods.iter().map(|&m| scope.spawn(move || run_one(m))).collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::Numerical("a method worker panicked".into())))
                })
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        s.methods.iter().map(|&m| run_one(m)).collect::<Result<Vec<_>>>()?
    };
    Ok(ScenarioRun { runs, warnings })
}

/// Full-space expectation operators, built once per run for the requested
/// channels only.
struct WaveOps {
    jx: Option<SparseOperator>,
    jy: Option<SparseOperator>,
    jz: Option<SparseOperator>,
    energy: Option<SparseOperator>,
}

impl WaveOps {
    fn build(s: &Scenario) -> Result<WaveOps> {
        let need = |o: Output| s.outputs.contains(&o);
        let spin_ops = (need(Output::Jx) || need(Output::Jy) || need(Output::Jz))
            .then(|| build_spin_operators(s.params.spin));
        let id_field = SparseOperator::identity(s.params.n_max + 1);
        let lift = |op: &SparseOperator| op.kron(&id_field);
        Ok(WaveOps {
            jx: spin_ops.as_ref().filter(|_| need(Output::Jx)).map(|o| lift(&o.jx)),
            jy: spin_ops.as_ref().filter(|_| need(Output::Jy)).map(|o| lift(&o.jy)),
            jz: spin_ops.as_ref().filter(|_| need(Output::Jz)).map(|o| lift(&o.jz)),
            energy: need(Output::Energy).then(|| build_dicke_hamiltonian(&s.params)).transpose()?,
        })
    }
}

/// Scalar channels this method will record, in output order.
fn scalar_outputs_for(s: &Scenario, method: Method) -> Vec<Output> {
    s.outputs
        .iter()
        .copied()
        .filter(|o| o.is_scalar() && (method.is_wave() || o.is_classical()))
        .collect()
}

/// One scalar channel value from a wave function. For the branch-form state
/// the norm channel reports the raw (pre-normalization) branch-sum norm via
/// `norm_override`.
fn wave_scalar(
    out: Output,
    basis: BasisIndex,
    psi: &[C64],
    ops: &WaveOps,
    norm_override: Option<f64>,
) -> Result<f64> {
    match out {
        Output::Jx => obs::expval_real(ops.jx.as_ref().expect("jx operator built"), psi),
        Output::Jy => obs::expval_real(ops.jy.as_ref().expect("jy operator built"), psi),
        Output::Jz => obs::expval_real(ops.jz.as_ref().expect("jz operator built"), psi),
        Output::Entropy => obs::entanglement_entropy(basis, psi),
        Output::FieldVar => Ok(obs::field_moments(basis, psi)?.uncertainty_product()),
        Output::Norm => Ok(norm_override
            .unwrap_or_else(|| psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt())),
        Output::Energy => obs::expval_real(ops.energy.as_ref().expect("energy operator built"), psi),
        Output::HusimiField | Output::HusimiAtom | Output::Schmidt => {
            unreachable!("snapshot outputs have no scalar channel")
        }
    }
}

/// Occupation of the top `fraction` of the Fock grid.
fn fock_tail(basis: BasisIndex, psi: &[C64], fraction: f64) -> f64 {
    let levels = basis.n_max() + 1;
    let n0 = ((1.0 - fraction) * levels as f64).ceil() as usize;
    psi.iter()
        .enumerate()
        .filter(|(i, _)| i % levels >= n0)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

fn field_peak_separation(spec: &FieldGridSpec) -> usize {
    (spec.n_re.max(spec.n_im) / 10).max(2)
}

fn atom_peak_separation(spec: &AtomicGridSpec) -> usize {
    (spec.n_phi / 12).max(2)
}

fn field_snapshot(index: usize, time: f64, basis: BasisIndex, psi: &[C64], s: &Scenario) -> Result<FieldSnapshot> {
    let grid = obs::field_husimi(basis, psi, &s.field_grid)?;
    let peaks = obs::find_peaks(&grid, PEAK_MIN_REL_HEIGHT, field_peak_separation(&s.field_grid));
    Ok(FieldSnapshot { index, time, grid, peaks })
}

fn atom_snapshot(index: usize, time: f64, basis: BasisIndex, psi: &[C64], s: &Scenario) -> Result<AtomSnapshot> {
    let grid = obs::atomic_husimi(basis, psi, &s.atomic_grid)?;
    let peaks = obs::find_peaks(&grid, PEAK_MIN_REL_HEIGHT, atom_peak_separation(&s.atomic_grid));
    Ok(AtomSnapshot { index, time, grid, peaks })
}

fn schmidt_snapshot(index: usize, time: f64, basis: BasisIndex, psi: &[C64], s: &Scenario) -> Result<SchmidtSnapshot> {
    let decomposition = obs::schmidt(basis, psi, s.schmidt_k_max)?;
    Ok(SchmidtSnapshot { index, time, weights: decomposition.coefficients })
}

#[derive(Clone, Copy)]
enum Ev {
    Grid,
    HField(usize),
    HAtom(usize),
    Schmidt(usize),
}

/// Sample-grid and snapshot events merged on one non-decreasing time axis,
/// grouped by identical time so each instant is visited once.
fn event_schedule(s: &Scenario, times: &[f64], snaps: bool) -> Vec<(f64, Vec<Ev>)> {
    let mut events: Vec<(f64, u8, Ev)> = times.iter().map(|&t| (t, 0, Ev::Grid)).collect();
    if snaps {
        if s.outputs.contains(&Output::HusimiField) {
            events.extend(s.husimi_times.iter().enumerate().map(|(k, &t)| (t, 1, Ev::HField(k))));
        }
        if s.outputs.contains(&Output::HusimiAtom) {
            events.extend(s.husimi_times.iter().enumerate().map(|(k, &t)| (t, 2, Ev::HAtom(k))));
        }
        if s.outputs.contains(&Output::Schmidt) {
            events.extend(s.schmidt_times.iter().enumerate().map(|(k, &t)| (t, 3, Ev::Schmidt(k))));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut grouped: Vec<(f64, Vec<Ev>)> = Vec::new();
    for (t, _, ev) in events {
        match grouped.last_mut() {
            Some(last) if last.0 == t => last.1.push(ev),
            _ => grouped.push((t, vec![ev])),
        }
    }
    grouped
}

fn assemble_series(times: &[f64], outs: &[Output], columns: Vec<Vec<f64>>) -> Result<TimeSeries> {
    let mut series = TimeSeries::new(times.to_vec());
    for (out, column) in outs.iter().zip(columns) {
        series.push_channel(out.name(), column)?;
    }
    Ok(series)
}

fn run_exact(s: &Scenario, times: &[f64], snaps: bool) -> Result<MethodRun> {
    let p = &s.params;
    let basis = p.basis();
    let h = build_dicke_hamiltonian(p)?;
    let ops = WaveOps::build(s)?;
    let spin_amps = atomic_coherent_general(p.spin, s.theta0, s.phi0);
    let field_amps = field_coherent(s.alpha0, p.n_max)?;
    let mut amps = product_state(&spin_amps, &field_amps, basis)?.amps().to_vec();

    let scalar_outputs = scalar_outputs_for(s, Method::Exact);
    let mut columns: Vec<Vec<f64>> =
        scalar_outputs.iter().map(|_| Vec::with_capacity(times.len())).collect();
    let mut field_snapshots = Vec::new();
    let mut atom_snapshots = Vec::new();
    let mut schmidt_snapshots = Vec::new();
    let mut max_tail = 0.0f64;

    let schedule = event_schedule(s, times, snaps);
    let schedule_times: Vec<f64> = schedule.iter().map(|g| g.0).collect();
    let mut propagator = Propagator::new(&h)?;
    propagator.propagate(&mut amps, &schedule_times, |idx, t, psi| {
        for &ev in &schedule[idx].1 {
            match ev {
                Ev::Grid => {
                    for (column, &out) in columns.iter_mut().zip(&scalar_outputs) {
                        column.push(wave_scalar(out, basis, psi, &ops, None)?);
                    }
                    max_tail = max_tail.max(fock_tail(basis, psi, TAIL_FRACTION));
                }
                Ev::HField(k) => field_snapshots.push(field_snapshot(k, t, basis, psi, s)?),
                Ev::HAtom(k) => atom_snapshots.push(atom_snapshot(k, t, basis, psi, s)?),
                Ev::Schmidt(k) => schmidt_snapshots.push(schmidt_snapshot(k, t, basis, psi, s)?),
            }
        }
        Ok(())
    })?;

    let mut warnings = Vec::new();
    if max_tail > TAIL_WARN {
        warnings.push(format!(
            "exact: occupation of the top tenth of the Fock grid reached {max_tail:.1e}; consider raising n_max"
        ));
    }
    Ok(MethodRun {
        method: Method::Exact,
        series: assemble_series(times, &scalar_outputs, columns)?,
        field_snapshots,
        atom_snapshots,
        schmidt_snapshots,
        warnings,
    })
}

fn run_pert(s: &Scenario, times: &[f64], snaps: bool) -> Result<MethodRun> {
    let p = &s.params;
    let basis = p.basis();
    // Validity warnings were already collected by `Scenario::validate`.
    let model = PerturbativeModel::new(p, s.theta0, s.phi0, s.alpha0)?;
    let ops = WaveOps::build(s)?;

    let scalar_outputs = scalar_outputs_for(s, Method::Pert);
    let mut columns: Vec<Vec<f64>> =
        scalar_outputs.iter().map(|_| Vec::with_capacity(times.len())).collect();
    for &t in times {
        let state = model.state_at(t)?;
        for (column, &out) in columns.iter_mut().zip(&scalar_outputs) {
            column.push(wave_scalar(out, basis, state.ket.amps(), &ops, Some(state.raw_norm))?);
        }
    }

    let mut field_snapshots = Vec::new();
    let mut atom_snapshots = Vec::new();
    let mut schmidt_snapshots = Vec::new();
    if snaps {
        let want_field = s.outputs.contains(&Output::HusimiField);
        let want_atom = s.outputs.contains(&Output::HusimiAtom);
        if want_field || want_atom {
            for (k, &t) in s.husimi_times.iter().enumerate() {
                let state = model.state_at(t)?;
                if want_field {
                    field_snapshots.push(field_snapshot(k, t, basis, state.ket.amps(), s)?);
                }
                if want_atom {
                    atom_snapshots.push(atom_snapshot(k, t, basis, state.ket.amps(), s)?);
                }
            }
        }
        if s.outputs.contains(&Output::Schmidt) {
            for (k, &t) in s.schmidt_times.iter().enumerate() {
                let state = model.state_at(t)?;
                schmidt_snapshots.push(schmidt_snapshot(k, t, basis, state.ket.amps(), s)?);
            }
        }
    }

    Ok(MethodRun {
        method: Method::Pert,
        series: assemble_series(times, &scalar_outputs, columns)?,
        field_snapshots,
        atom_snapshots,
        schmidt_snapshots,
        warnings: Vec::new(),
    })
}

fn run_classical(s: &Scenario, times: &[f64], method: Method) -> Result<MethodRun> {
    let p = &s.params;
    let j_len = p.spin.j();
    let j0 = [
        j_len * s.theta0.sin() * s.phi0.cos(),
        j_len * s.theta0.sin() * s.phi0.sin(),
        j_len * s.theta0.cos(),
    ];
    let dt = sca::default_step(p);
    let trajectory = match method {
        Method::Sca => sca::integrate_sca(p, ClassicalState { j: j0, alpha: s.alpha0 }, times, dt)?,
        Method::Driven => sca::integrate_driven(p, s.alpha0.re, j0, times, dt)?,
        _ => unreachable!("run_classical only handles sca and driven"),
    };
    let full = trajectory.to_time_series();

    let scalar_outputs = scalar_outputs_for(s, method);
    let mut series = TimeSeries::new(times.to_vec());
    for &out in &scalar_outputs {
        let values = full.channel(out.name()).expect("trajectory spin channels").to_vec();
        series.push_channel(out.name(), values)?;
    }

    let mut warnings = Vec::new();
    let drift = trajectory.max_j_norm_drift_rate();
    if drift > J_DRIFT_WARN {
        warnings.push(format!(
            "{}: spin-length drift rate {drift:.1e} exceeds {J_DRIFT_WARN:.0e}; consider a smaller step",
            method.name()
        ));
    }
    Ok(MethodRun {
        method,
        series,
        field_snapshots: Vec::new(),
        atom_snapshots: Vec::new(),
        schmidt_snapshots: Vec::new(),
        warnings,
    })
}

/// Amplitude envelope of a collapse-and-revival signal.
#[derive(Clone, Debug)]
pub struct EnvelopeMetrics {
    /// Envelope value at t = 0.
    pub initial: f64,
    /// First time the envelope drops below 30% of the initial value.
    pub collapse_time: Option<f64>,
    /// Midpoint of the post-collapse region within 95% of the recovered
    /// maximum; absent when nothing recovers half the initial amplitude.
    pub revival_time: Option<f64>,
    /// The smoothed envelope itself, on the input time grid.
    pub envelope: Vec<f64>,
}

/// Envelope windows suited to the model's two time scales: deviations are
/// measured over a few carrier (atomic) periods, then smoothed over the
/// slower of a field period and twice that carrier window.
pub fn envelope_windows(p: &ModelParams) -> Option<(f64, f64)> {
    if p.delta == 0.0 {
        return None;
    }
    let fast = 3.0 * TWO_PI / p.delta.abs();
    let smooth = if p.omega == 0.0 { 2.0 * fast } else { (TWO_PI / p.omega.abs()).max(2.0 * fast) };
    Some((fast, smooth))
}

/// Two-stage envelope (local oscillation amplitude, then a running maximum)
/// with collapse and revival detection.
pub fn envelope_metrics(
    times: &[f64],
    values: &[f64],
    fast_window: f64,
    smooth_window: f64,
) -> Result<EnvelopeMetrics> {
    let raw = sca::oscillation_envelope(times, values, fast_window)?;
    let envelope = sca::running_max(times, &raw, smooth_window)?;
    let initial = envelope[0];
    let mut collapse_time = None;
    let mut revival_time = None;
    if initial > 0.0 {
        if let Some(ic) = envelope.iter().position(|&v| v < COLLAPSE_LEVEL * initial) {
            let t_collapse = times[ic];
            collapse_time = Some(t_collapse);
            // Look for the recovery strictly after the collapse has had time
            // to complete, so the pre-collapse plateau cannot shadow it.
            if let Some(i0) = times.iter().position(|&t| t > 2.0 * t_collapse) {
                let recovered = envelope[i0..].iter().fold(0.0f64, |a, &b| a.max(b));
                if recovered >= REVIVAL_MIN_RECOVERY * initial {
                    let i_peak = i0
                        + envelope[i0..]
                            .iter()
                            .position(|&v| v == recovered)
                            .expect("maximum attained");
                    let mut lo = i_peak;
                    while lo > i0 && envelope[lo - 1] >= REVIVAL_PLATEAU * recovered {
                        lo -= 1;
                    }
                    let mut hi = i_peak;
                    while hi + 1 < envelope.len() && envelope[hi + 1] >= REVIVAL_PLATEAU * recovered {
                        hi += 1;
                    }
                    revival_time = Some(0.5 * (times[lo] + times[hi]));
                }
            }
        }
    }
    Ok(EnvelopeMetrics { initial, collapse_time, revival_time, envelope })
}

/// Envelope metrics of a run's ⟨Jz⟩ channel with the model-derived windows;
/// `None` when the channel or the windows are unavailable.
pub fn jz_envelope_metrics(p: &ModelParams, series: &TimeSeries) -> Option<EnvelopeMetrics> {
    let jz = series.channel("jz")?;
    let (fast, smooth) = envelope_windows(p)?;
    envelope_metrics(&series.times, jz, fast, smooth).ok()
}

/// Indices of local minima that dip at least `rel_depth` below the lower of
/// the two neighboring maxima within `window` on either side. Of several
/// qualifying minima closer than `window`, only the deepest is kept.
pub fn count_entropy_dips(
    times: &[f64],
    values: &[f64],
    window: f64,
    rel_depth: f64,
) -> Result<Vec<usize>> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::InvalidParams(format!("window = {window} must be positive and finite")));
    }
    let n = times.len();
    let mut candidates: Vec<usize> = Vec::new();
    let (mut lo, mut hi) = (0usize, 0usize);
    for i in 0..n {
        while times[i] - times[lo] > window {
            lo += 1;
        }
        while hi + 1 < n && times[hi + 1] - times[i] <= window {
            hi += 1;
        }
        if lo == i || hi == i {
            continue; // need neighbors on both sides
        }
        let left_max = values[lo..i].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let right_max = values[i + 1..=hi].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let window_min = values[lo..=hi].iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if values[i] > window_min {
            continue;
        }
        if values[i] <= (1.0 - rel_depth) * left_max.min(right_max) {
            candidates.push(i);
        }
    }
    let mut by_depth = candidates;
    by_depth.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in by_depth {
        if kept.iter().all(|&k| (times[i] - times[k]).abs() > window) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Sup-norm and RMS difference of two equally sampled channels.
pub fn channel_diff(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "channels of length {} and {} cannot be compared",
            a.len(),
            b.len()
        )));
    }
    let mut sup = 0.0f64;
    let mut sum_sq = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = (x - y).abs();
        sup = sup.max(d);
        sum_sq += d * d;
    }
    Ok((sup, (sum_sq / a.len() as f64).sqrt()))
}

fn kv_f(out: &mut String, key: &str, value: f64) {
    let _ = writeln!(out, "{key} = {}", fmt_f(value));
}

/// Derived quantities and detected features, in the same `key = value`
/// format as the configuration.
pub fn summary_text(s: &Scenario, run: &ScenarioRun) -> String {
    let mut out = String::from("# derived quantities and detected features\n");
    match EffectiveFrequencies::new(&s.params, s.alpha0) {
        Ok(freqs) => {
            kv_f(&mut out, "omega_e", freqs.omega_e);
            kv_f(&mut out, "omega_s", freqs.omega_s);
            kv_f(&mut out, "t_e", freqs.t_e);
            kv_f(&mut out, "t_s", freqs.t_s);
            if let Some(delta_theta) = freqs.delta_theta {
                kv_f(&mut out, "delta_theta", delta_theta);
            }
            kv_f(&mut out, "validity_ratio", freqs.validity_ratio);
            if s.alpha0.im == 0.0 {
                if let Ok(plateau) = collapse_plateau(&s.params, s.theta0, s.alpha0.re) {
                    kv_f(&mut out, "plateau_prediction", plateau);
                }
            }
        }
        Err(e) => {
            let _ = writeln!(out, "# effective frequencies unavailable: {e}");
        }
    }
    for method_run in &run.runs {
        let name = method_run.method.name();
        if let Some(metrics) = jz_envelope_metrics(&s.params, &method_run.series) {
            kv_f(&mut out, &format!("envelope_initial_{name}"), metrics.initial);
            if let Some(t) = metrics.collapse_time {
                kv_f(&mut out, &format!("collapse_time_{name}"), t);
            }
            if let Some(t) = metrics.revival_time {
                kv_f(&mut out, &format!("revival_time_{name}"), t);
            }
        }
        for snap in &method_run.field_snapshots {
            kv_f(&mut out, &format!("husimi_field_time_{}", snap.index), snap.time);
            let _ = writeln!(out, "husimi_field_peaks_{} = {}", snap.index, snap.peaks.len());
        }
        for snap in &method_run.atom_snapshots {
            kv_f(&mut out, &format!("husimi_atom_time_{}", snap.index), snap.time);
            let _ = writeln!(out, "husimi_atom_peaks_{} = {}", snap.index, snap.peaks.len());
        }
        for snap in &method_run.schmidt_snapshots {
            kv_f(&mut out, &format!("schmidt_time_{}", snap.index), snap.time);
            let weights =
                snap.weights.iter().map(|&w| fmt_f(w)).collect::<Vec<_>>().join(",");
            let _ = writeln!(out, "schmidt_weights_{} = {}", snap.index, weights);
        }
    }
    for (i, warning) in run.all_warnings().iter().enumerate() {
        let _ = writeln!(out, "warning_{i} = {warning}");
    }
    out
}

/// Pairwise channel differences plus per-method envelope metrics.
pub fn compare_report(s: &Scenario, run: &ScenarioRun) -> String {
    let mut out = String::from("# method comparison\n");
    for i in 0..run.runs.len() {
        for j in i + 1..run.runs.len() {
            let (a, b) = (&run.runs[i], &run.runs[j]);
            for (channel, values_a) in &a.series.channels {
                if let Some(values_b) = b.series.channel(channel) {
                    let (sup, rms) =
                        channel_diff(values_a, values_b).expect("channels share the sample grid");
                    let pair = format!("{}_{}_{}", a.method.name(), b.method.name(), channel);
                    kv_f(&mut out, &format!("sup_{pair}"), sup);
                    kv_f(&mut out, &format!("rms_{pair}"), rms);
                }
            }
        }
    }
    for method_run in &run.runs {
        let name = method_run.method.name();
        if let Some(metrics) = jz_envelope_metrics(&s.params, &method_run.series) {
            kv_f(&mut out, &format!("envelope_initial_{name}"), metrics.initial);
            if let Some(t) = metrics.collapse_time {
                kv_f(&mut out, &format!("collapse_time_{name}"), t);
            }
            if let Some(t) = metrics.revival_time {
                kv_f(&mut out, &format!("revival_time_{name}"), t);
            }
        }
    }
    out
}

fn channel_file_text(s: &Scenario, method: Method, channel: &str, times: &[f64], values: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# method: {}   channel: {channel}", method.name());
    let _ = writeln!(out, "# columns: t  t/(2pi/omega)  t/(2pi/delta)  value");
    let omega_factor = s.params.omega / TWO_PI;
    let delta_factor = s.params.delta / TWO_PI;
    for (&t, &v) in times.iter().zip(values) {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            fmt_f(t),
            fmt_f(t * omega_factor),
            fmt_f(t * delta_factor),
            fmt_f(v)
        );
    }
    out
}

fn husimi_file_text(method: Method, channel: &str, index: usize, time: f64, grid: &HusimiGrid, axes: (&str, &str)) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# method: {}   channel: {channel}   snapshot: {index}", method.name());
    let _ = writeln!(out, "# t = {}", fmt_f(time));
    let _ = writeln!(out, "# columns: {}  {}  q   (blank line between {} scans)", axes.0, axes.1, axes.0);
    for (ix, &x) in grid.x.iter().enumerate() {
        for (iy, &y) in grid.y.iter().enumerate() {
            let _ = writeln!(out, "{} {} {}", fmt_f(x), fmt_f(y), fmt_f(grid.value(ix, iy)));
        }
        out.push('\n');
    }
    out
}

fn schmidt_file_text(method: Method, snap: &SchmidtSnapshot) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# method: {}   channel: schmidt   snapshot: {}", method.name(), snap.index);
    let _ = writeln!(out, "# t = {}", fmt_f(snap.time));
    let _ = writeln!(out, "# columns: k  weight");
    for (k, &w) in snap.weights.iter().enumerate() {
        let _ = writeln!(out, "{k} {}", fmt_f(w));
    }
    out
}

/// Write every data file plus `summary.txt` and `manifest.txt` into `dir`
/// (created if missing). The manifest is a complete config file; running it
/// reproduces these outputs byte for byte.
pub fn write_outputs(dir: &Path, s: &Scenario, run: &ScenarioRun) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for method_run in &run.runs {
        let method = method_run.method;
        for (channel, values) in &method_run.series.channels {
            let text = channel_file_text(s, method, channel, &method_run.series.times, values);
            std::fs::write(dir.join(format!("{}_{channel}.dat", method.name())), text)?;
        }
        for snap in &method_run.field_snapshots {
            let text = husimi_file_text(method, "husimi_field", snap.index, snap.time, &snap.grid, ("re_alpha", "im_alpha"));
            std::fs::write(dir.join(format!("{}_husimi_field_{}.dat", method.name(), snap.index)), text)?;
        }
        for snap in &method_run.atom_snapshots {
            let text = husimi_file_text(method, "husimi_atom", snap.index, snap.time, &snap.grid, ("theta", "phi"));
            std::fs::write(dir.join(format!("{}_husimi_atom_{}.dat", method.name(), snap.index)), text)?;
        }
        for snap in &method_run.schmidt_snapshots {
            std::fs::write(
                dir.join(format!("{}_schmidt_{}.dat", method.name(), snap.index)),
                schmidt_file_text(method, snap),
            )?;
        }
    }
    std::fs::write(dir.join("summary.txt"), summary_text(s, run))?;
    std::fs::write(dir.join("manifest.txt"), s.to_config_string())?;
    Ok(())
}

/// Write `compare_report.txt` into `dir` (created if missing).
pub fn write_compare_report(dir: &Path, s: &Scenario, run: &ScenarioRun) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("compare_report.txt"), compare_report(s, run))?;
    Ok(())
}
