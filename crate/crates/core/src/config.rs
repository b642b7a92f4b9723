//! TOML run configuration.
//!
//! Complex numbers are written `[re, im]`. Channels, observables, intervals
//! and Fock levels named in the file are 1-based for channels, observables
//! and intervals (matching the usual physics numbering) and 0-based for
//! photon numbers. Unknown keys are rejected.

use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionConfig, Method};
use crate::fock::{pure_density, DensityOperator, StateVector, SystemOperator, TruncatedSpace};
use crate::generator::{FieldProfile, GeneratorContext};
use crate::measurement::{dpo_observables, ObservableSpec, TestFunction};
use crate::model::{dpo_model, DpoParams, ModelSpec};
use crate::statistics::{default_kappa_max, IncrementAxis, IncrementGrid, Sampling, DEFAULT_N_KAPPA};
use crate::timefn::TimeFunction;

fn cx(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub truncation: TruncationSection,
    #[serde(default)]
    pub observables: Option<ObservablesSection>,
    #[serde(default)]
    pub field: Option<FieldSection>,
    #[serde(default)]
    pub test_function: Option<TestFunctionSection>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub initial_state: InitialStateSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSection {
    Dpo(Box<DpoSection>),
    /// Operators given entrywise.
    Generic {
        channels: usize,
        #[serde(default)]
        k: Vec<Entry>,
        #[serde(default)]
        r: Vec<Vec<Entry>>,
        /// `channels x channels`, row-major; identity if absent.
        #[serde(default)]
        scattering: Option<Vec<Vec<[f64; 2]>>>,
        #[serde(default)]
        label: Option<String>,
    },
    /// Dimension-one system (truncation must be `n_max = m_max = 0`).
    Trivial {
        channels: usize,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpoSection {
    pub omega_c: f64,
    pub g: f64,
    pub kappa: f64,
    #[serde(default)]
    pub nbar: f64,
    pub kappa_p: f64,
    #[serde(default)]
    pub nbar_p: f64,
    /// Splitting fractions `c_i` with `sum |c_i|^2 = 1`; equal real splits if
    /// neither these nor explicit amplitudes are given.
    #[serde(default)]
    pub alpha_split: Option<[[f64; 2]; 3]>,
    #[serde(default)]
    pub beta_split: Option<[[f64; 2]; 3]>,
    #[serde(default)]
    pub alpha: Option<[[f64; 2]; 4]>,
    #[serde(default)]
    pub beta: Option<[[f64; 2]; 4]>,
    #[serde(default)]
    pub theta3: f64,
    #[serde(default)]
    pub lambda_drive: [f64; 2],
}

impl DpoSection {
    pub fn params(&self) -> Result<DpoParams> {
        let s = 1.0 / 3f64.sqrt();
        let equal = [[s, 0.0]; 3];
        let split = |v: [[f64; 2]; 3]| v.map(cx);
        let mut p = DpoParams::from_splits(
            self.omega_c,
            self.g,
            self.kappa,
            self.nbar,
            self.kappa_p,
            self.nbar_p,
            split(self.alpha_split.unwrap_or(equal)),
            split(self.beta_split.unwrap_or(equal)),
            self.theta3,
            cx(self.lambda_drive),
        )?;
        if let Some(a) = self.alpha {
            p.alpha = a.map(cx);
        }
        if let Some(b) = self.beta {
            p.beta = b.map(cx);
        }
        p.validate()?;
        Ok(p)
    }
}

/// `<e_{at[0],at[1]}| X |e_{at[2],at[3]}> = value`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub at: [usize; 4],
    pub value: [f64; 2],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    pub n_max: usize,
    pub m_max: usize,
    #[serde(default = "default_guard")]
    pub guard: usize,
}

fn default_guard() -> usize {
    2
}

/// Either `preset = "dpo"` or explicit data. `h`, `b`, `c` default to zero.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSection {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub theta3: Option<f64>,
    #[serde(default)]
    pub omega_c: Option<f64>,
    /// `m x d` eigenvalues.
    #[serde(default)]
    pub eigenvalues: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub h: Option<Vec<Vec<TimeFunction>>>,
    #[serde(default)]
    pub b: Option<Vec<TimeFunction>>,
    #[serde(default)]
    pub c: Option<Vec<TimeFunction>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSection {
    Vacuum,
    /// Pump laser on channel 4 on `[0, window_end)`; DPO models only.
    Laser {
        #[serde(default)]
        window_end: Option<f64>,
    },
    Custom {
        channels: Vec<TimeFunction>,
        #[serde(default)]
        window_end: Option<f64>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSection {
    pub breakpoints: Vec<f64>,
    /// One row of `m` values per interval.
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub breakpoints: Vec<f64>,
    pub increments: Vec<IncrementSection>,
    #[serde(default = "default_n_kappa")]
    pub n_kappa: usize,
    /// Largest count reported by `counts`.
    #[serde(default = "default_count_max")]
    pub count_max: usize,
    #[serde(default)]
    pub x_min: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default = "default_x_points")]
    pub x_points: usize,
}

fn default_n_kappa() -> usize {
    DEFAULT_N_KAPPA
}

fn default_count_max() -> usize {
    20
}

fn default_x_points() -> usize {
    401
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncrementSection {
    /// 1-based.
    pub interval: usize,
    /// 1-based.
    pub observable: usize,
    /// `"counting"` or `"symmetric"`; by observable kind if absent.
    #[serde(default)]
    pub sampling: Option<String>,
    #[serde(default)]
    pub kappa_max: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    pub t_end: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_stride")]
    pub store_stride: usize,
    #[serde(default)]
    pub leakage_companion: bool,
}

fn default_method() -> String {
    "rk4".into()
}

fn default_rtol() -> f64 {
    1e-8
}

fn default_atol() -> f64 {
    1e-12
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateSection {
    Fock {
        #[serde(default)]
        n: usize,
        #[serde(default)]
        m: usize,
    },
    /// Product coherent state, truncated and renormalized.
    Coherent {
        #[serde(default)]
        alpha: [f64; 2],
        #[serde(default)]
        beta: [f64; 2],
    },
}

impl Default for InitialStateSection {
    fn default() -> Self {
        InitialStateSection::Fock { n: 0, m: 0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    /// Significant digits in CSV output.
    #[serde(default = "default_precision")]
    pub precision: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_out_dir(), precision: default_precision() }
    }
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_precision() -> usize {
    17
}

/// Sizes used by `oracle-compare`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_oracle_n")]
    pub n_max: usize,
    #[serde(default = "default_oracle_m")]
    pub m_max: usize,
    #[serde(default = "default_oracle_t")]
    pub t: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { n_max: default_oracle_n(), m_max: default_oracle_m(), t: default_oracle_t() }
    }
}

fn default_oracle_n() -> usize {
    2
}

fn default_oracle_m() -> usize {
    1
}

fn default_oracle_t() -> f64 {
    1.0
}

/// Parsed configuration plus the raw text hash.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<LoadedConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(LoadedConfig { config, sha256 })
}

fn cfg_err(e: Error) -> Error {
    match e {
        Error::Io(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl RunConfig {
    pub fn space(&self) -> TruncatedSpace {
        TruncatedSpace::new(self.truncation.n_max, self.truncation.m_max)
    }

    pub fn dpo_params(&self) -> Result<Option<DpoParams>> {
        match &self.model {
            ModelSection::Dpo(d) => d.params().map(Some),
            _ => Ok(None),
        }
    }

    pub fn model_on(&self, space: TruncatedSpace) -> Result<ModelSpec> {
        match &self.model {
            ModelSection::Dpo(d) => dpo_model(&d.params()?, space),
            ModelSection::Generic { channels, k, r, scattering, label } => {
                if r.len() != *channels {
                    return Err(Error::Config(format!("model.r lists {} operators for {channels} channels", r.len())));
                }
                let op = |entries: &[Entry]| -> Result<SystemOperator> {
                    let mut trip = Vec::with_capacity(entries.len());
                    for e in entries {
                        let row = space.index(e.at[0], e.at[1]);
                        let col = space.index(e.at[2], e.at[3]);
                        match (row, col) {
                            (Some(r), Some(c)) => trip.push((r, c, cx(e.value))),
                            _ => return Err(Error::Config(format!("entry {:?} outside the truncation {space}", e.at))),
                        }
                    }
                    SystemOperator::from_triplets(space, trip)
                };
                let s = match scattering {
                    None => Array2::eye(*channels).mapv(|x: f64| Complex64::new(x, 0.0)),
                    Some(rows) => {
                        if rows.len() != *channels || rows.iter().any(|r| r.len() != *channels) {
                            return Err(Error::Config(format!("model.scattering must be {channels} x {channels}")));
                        }
                        Array2::from_shape_fn((*channels, *channels), |(i, j)| cx(rows[i][j]))
                    }
                };
                let rs = r.iter().map(|e| op(e)).collect::<Result<Vec<_>>>()?;
                ModelSpec::new(op(k)?, rs, s, label.clone().unwrap_or_else(|| "generic".into()))
            }
            ModelSection::Trivial { channels } => {
                if space.dim() != 1 {
                    return Err(Error::Config("a trivial model needs n_max = m_max = 0".into()));
                }
                Ok(ModelSpec::trivial(*channels))
            }
        }
    }

    pub fn model(&self) -> Result<ModelSpec> {
        self.model_on(self.space())
    }

    pub fn channels(&self) -> usize {
        match &self.model {
            ModelSection::Dpo(_) => crate::model::DPO_CHANNELS,
            ModelSection::Generic { channels, .. } | ModelSection::Trivial { channels } => *channels,
        }
    }

    pub fn observables(&self) -> Result<ObservableSpec> {
        let d = self.channels();
        let dpo = self.dpo_params()?;
        let Some(sec) = &self.observables else {
            return match dpo {
                Some(p) => Ok(dpo_observables(p.theta3, p.omega_c)),
                None => Ok(ObservableSpec::empty(d)),
            };
        };
        if let Some(preset) = &sec.preset {
            if preset != "dpo" {
                return Err(Error::Config(format!("unknown observables preset '{preset}'")));
            }
            if sec.eigenvalues.is_some() || sec.h.is_some() || sec.b.is_some() || sec.c.is_some() {
                return Err(Error::Config("observables: give either a preset or explicit data, not both".into()));
            }
            if d != crate::model::DPO_CHANNELS {
                return Err(Error::Config(format!("the dpo observables need 8 channels, the model has {d}")));
            }
            let theta3 = sec.theta3.or(dpo.as_ref().map(|p| p.theta3)).unwrap_or(0.0);
            let omega = sec.omega_c.or(dpo.as_ref().map(|p| p.omega_c)).ok_or_else(|| {
                Error::Config("observables.omega_c is required with preset = \"dpo\" on a non-dpo model".into())
            })?;
            return Ok(dpo_observables(theta3, omega));
        }
        if sec.theta3.is_some() || sec.omega_c.is_some() {
            return Err(Error::Config("observables.theta3 / omega_c only apply to preset = \"dpo\"".into()));
        }
        let eig = sec.eigenvalues.clone().ok_or_else(|| Error::Config("observables.eigenvalues is required".into()))?;
        let m = eig.len();
        if eig.iter().any(|row| row.len() != d) {
            return Err(Error::Config(format!("observables.eigenvalues rows must have {d} entries")));
        }
        let eig = Array2::from_shape_fn((m, d), |(a, i)| eig[a][i]);
        let h = sec.h.clone().unwrap_or_else(|| vec![vec![TimeFunction::Zero; d]; m]);
        let b = sec.b.clone().unwrap_or_else(|| vec![TimeFunction::Zero; d]);
        let c = sec.c.clone().unwrap_or_else(|| vec![TimeFunction::Zero; m]);
        ObservableSpec::new(eig, h, b, c).map_err(cfg_err)
    }

    pub fn field(&self) -> Result<FieldProfile> {
        let d = self.channels();
        match &self.field {
            None | Some(FieldSection::Vacuum) => Ok(FieldProfile::vacuum(d)),
            Some(FieldSection::Laser { window_end }) => {
                let p = self
                    .dpo_params()?
                    .ok_or_else(|| Error::Config("field.kind = \"laser\" needs a dpo model".into()))?;
                FieldProfile::dpo_laser(&p, window_end.unwrap_or(f64::INFINITY)).map_err(cfg_err)
            }
            Some(FieldSection::Custom { channels, window_end }) => {
                if channels.len() != d {
                    return Err(Error::Config(format!(
                        "field.channels has {} entries for {d} channels",
                        channels.len()
                    )));
                }
                FieldProfile::new(channels.clone(), *window_end).map_err(cfg_err)
            }
        }
    }

    pub fn test_function(&self, m: usize) -> Result<TestFunction> {
        match &self.test_function {
            None => Ok(TestFunction::zero(m)),
            Some(t) => {
                TestFunction::new(t.breakpoints.clone(), t.values.clone()).and_then(|k| k.with_m(m)).map_err(cfg_err)
            }
        }
    }

    pub fn context(&self) -> Result<GeneratorContext> {
        let spec = self.observables()?;
        let k = self.test_function(spec.m())?;
        GeneratorContext::new(Arc::new(self.model()?), Arc::new(spec), self.field()?, k).map_err(cfg_err)
    }

    pub fn evolution(&self) -> Result<EvolutionConfig> {
        let e = &self.evolution;
        let method = match e.method.as_str() {
            "rk4" => Method::Rk4,
            "adaptive" => Method::Adaptive { rtol: e.rtol, atol: e.atol },
            other => {
                return Err(Error::Config(format!("evolution.method must be \"rk4\" or \"adaptive\", got \"{other}\"")))
            }
        };
        let cfg = EvolutionConfig {
            t_end: e.t_end,
            dt: e.dt,
            method,
            guard: self.truncation.guard,
            store_stride: e.store_stride,
            store_states: false,
            leakage_companion: e.leakage_companion,
        };
        cfg.validate().map_err(cfg_err)?;
        Ok(cfg)
    }

    pub fn initial_state(&self) -> Result<DensityOperator> {
        let space = self.space();
        match self.initial_state {
            InitialStateSection::Fock { n, m } => space
                .basis(n, m)
                .map(|v| pure_density(&v))
                .map_err(|_| Error::Config(format!("initial Fock state ({n}, {m}) outside {space}"))),
            InitialStateSection::Coherent { alpha, beta } => {
                let amp = |z: Complex64, level: usize| -> Complex64 {
                    let log_fact: f64 = (1..=level).map(|i| (i as f64).ln()).sum();
                    (-0.5 * z.norm_sqr()).exp() * z.powu(level as u32) / (0.5 * log_fact).exp()
                };
                let (a, b) = (cx(alpha), cx(beta));
                let mut psi = StateVector::zeros(space.dim());
                for idx in 0..space.dim() {
                    let (n, m) = space.levels(idx);
                    psi[idx] = amp(a, n) * amp(b, m);
                }
                let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                psi.mapv_inplace(|z| z / norm);
                Ok(pure_density(&psi))
            }
        }
    }

    /// Increment grid from the `[grid]` section. `kappa_max` of symmetric
    /// axes may be left open (`None` in the returned list) for the caller
    /// to estimate.
    pub fn grid(&self, spec: &ObservableSpec) -> Result<(IncrementGrid, Vec<bool>)> {
        let g = self.grid.as_ref().ok_or_else(|| Error::Config("this command needs a [grid] section".into()))?;
        let mut axes = Vec::new();
        let mut open = Vec::new();
        for inc in &g.increments {
            if inc.interval == 0 || inc.observable == 0 {
                return Err(Error::Config("grid increments use 1-based interval and observable numbers".into()));
            }
            let (l, a) = (inc.interval - 1, inc.observable - 1);
            if a >= spec.m() {
                return Err(Error::Config(format!("observable {} of {}", inc.observable, spec.m())));
            }
            let sampling = match inc.sampling.as_deref() {
                Some("counting") => "counting",
                Some("symmetric") => "symmetric",
                Some(other) => return Err(Error::Config(format!("unknown sampling '{other}'"))),
                None => match spec.kind(a) {
                    crate::measurement::ObservableKind::Diffusive => "symmetric",
                    _ => "counting",
                },
            };
            if sampling == "counting" {
                axes.push(IncrementAxis::counting(l, a, g.n_kappa));
                open.push(false);
            } else {
                axes.push(IncrementAxis::symmetric(l, a, g.n_kappa, inc.kappa_max.unwrap_or(1.0)));
                open.push(inc.kappa_max.is_none());
            }
        }
        Ok((IncrementGrid::new(g.breakpoints.clone(), axes).map_err(cfg_err)?, open))
    }
}

impl RunConfig {
    /// [`RunConfig::grid`] with open `kappa_max` values estimated from the
    /// spread of each increment under `ctx` (its test function is ignored).
    pub fn resolved_grid(&self, ctx: &GeneratorContext, ecfg: &EvolutionConfig) -> Result<IncrementGrid> {
        let (mut grid, open) = self.grid(ctx.spec())?;
        let rho0 = self.initial_state()?;
        let zero = ctx.with_test_function(TestFunction::zero(ctx.spec().m()))?;
        for (i, is_open) in open.iter().enumerate() {
            if *is_open {
                let ax = &grid.axes()[i];
                let (t0, t1) = (grid.breakpoints()[ax.interval], grid.breakpoints()[ax.interval + 1]);
                let kmax = default_kappa_max(&zero, ax.observable, t0, t1, &rho0, ecfg)?;
                grid = with_kappa_max(&grid, i, kmax)?;
            }
        }
        Ok(grid)
    }
}

/// Replace the `kappa_max` of axis `i`.
pub fn with_kappa_max(grid: &IncrementGrid, i: usize, kappa_max: f64) -> Result<IncrementGrid> {
    let mut axes = grid.axes().to_vec();
    axes[i].sampling = Sampling::Symmetric { kappa_max };
    IncrementGrid::new(grid.breakpoints().to_vec(), axes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DPO: &str = r#"
[model]
kind = "dpo"
omega_c = 1.0
g = 0.5
kappa = 1.0
nbar = 0.1
kappa_p = 1.0
theta3 = 0.25
lambda_drive = [0.5, 0.0]

[truncation]
n_max = 6
m_max = 4

[field]
kind = "laser"
window_end = 10.0

[evolution]
t_end = 1.0
dt = 1e-3
"#;

    #[test]
    fn dpo_config_builds() {
        let c = parse(DPO).unwrap();
        let ctx = c.config.context().unwrap();
        assert_eq!(ctx.model().d(), 8);
        assert_eq!(ctx.spec().m(), 3);
        assert_eq!(c.sha256.len(), 64);
        let rho = c.config.initial_state().unwrap();
        assert_eq!(rho[[0, 0]], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = DPO.replace("[truncation]", "[truncation]\nbogus = 1");
        assert!(matches!(parse(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn channel_count_mismatch_is_config_error() {
        let bad = format!("{DPO}\n[observables]\neigenvalues = [[1.0, 0.0]]\n");
        let c = parse(&bad).unwrap();
        assert!(matches!(c.config.observables(), Err(Error::Config(_))));
    }

    #[test]
    fn generic_and_coherent() {
        let text = r#"
[model]
kind = "generic"
channels = 1
k = [{ at = [1, 0, 1, 0], value = [-0.5, 0.0] }]
r = [[{ at = [0, 0, 1, 0], value = [1.0, 0.0] }]]

[truncation]
n_max = 3
m_max = 0

[initial_state]
kind = "coherent"
alpha = [0.3, 0.0]

[evolution]
t_end = 0.5
method = "adaptive"
"#;
        let c = parse(text).unwrap().config;
        let model = c.model().unwrap();
        assert_eq!(model.d(), 1);
        let rho = c.initial_state().unwrap();
        assert!((crate::fock::trace(&rho) - 1.0).norm() < 1e-14);
        assert!(matches!(c.evolution().unwrap().method, Method::Adaptive { .. }));
    }
}
