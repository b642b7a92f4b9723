//! Time stepping of `d rho/dt = L_t[rho]` from `rho(0) = rho0`, giving the
//! propagated operator and the characteristic functional `Phi_t(k) = Tr rho(t)`.
//!
//! The interval `[0, t_end]` is cut at every discontinuity of the coefficient
//! functions; inside each segment the coefficients are smooth and the
//! classical fourth-order Runge-Kutta method keeps its order. Piecewise
//! pieces are selected by the segment midpoint, so a step that ends on a
//! breakpoint uses the one-sided limit from inside the segment.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{hermiticity_defect, trace, trace_norm, DensityOperator};
use crate::generator::{Generator, GeneratorContext, GeneratorNode};
use crate::measurement::TestFunction;

/// `|Phi|` above `(1 + CONTRACTIVITY_SLACK) * ||rho0||_1` aborts the run.
pub const CONTRACTIVITY_SLACK: f64 = 1e-6;
/// Allowed growth of `max |rho - rho^dagger|` in Markov (`k = 0`) runs.
pub const HERMITICITY_DRIFT_TOL: f64 = 1e-8;
/// Safety factor in the automatic step: `dt * rho_est = AUTO_DT_FACTOR`.
pub const AUTO_DT_FACTOR: f64 = 0.1;
const MAX_CONSECUTIVE_REJECTIONS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    /// Classical RK4 with (at most) the base step on every segment.
    Rk4,
    /// RK4 with step doubling, Richardson-corrected.
    Adaptive { rtol: f64, atol: f64 },
}

impl Method {
    pub fn adaptive_default() -> Self {
        Method::Adaptive { rtol: 1e-8, atol: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub t_end: f64,
    /// Base (fixed) or initial (adaptive) step. `None` picks one from a
    /// norm bound of the generator.
    pub dt: Option<f64>,
    pub method: Method,
    /// Width of the band below each cutoff counted as leakage.
    pub guard: usize,
    /// Record `Phi` every `store_stride` accepted steps (and at the end).
    pub store_stride: usize,
    pub store_states: bool,
    /// For `k != 0`, also run the `k = 0` companion to report leakage.
    pub leakage_companion: bool,
}

impl EvolutionConfig {
    pub fn new(t_end: f64) -> Self {
        EvolutionConfig {
            t_end,
            dt: None,
            method: Method::Rk4,
            guard: 2,
            store_stride: 1,
            store_states: false,
            leakage_companion: false,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Validation(format!("t_end = {} must be finite and >= 0", self.t_end)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Validation(format!("dt = {dt} must be positive")));
            }
        }
        if self.store_stride == 0 {
            return Err(Error::Validation("store_stride must be >= 1".into()));
        }
        if let Method::Adaptive { rtol, atol } = self.method {
            if !(rtol >= 0.0 && atol >= 0.0 && rtol + atol > 0.0) {
                return Err(Error::Validation(format!("bad tolerances rtol={rtol} atol={atol}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub generator_applications: usize,
    pub min_step: f64,
    pub max_step: f64,
    pub segments: usize,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub phi: Vec<Complex64>,
    /// Stored only with `store_states`.
    pub states: Vec<DensityOperator>,
    /// `(t, leakage)`; from the run itself at `k = 0`, from the companion
    /// otherwise (empty if no companion was requested).
    pub leakage: Vec<(f64, f64)>,
    pub final_state: DensityOperator,
    pub stats: StepStats,
    pub max_hermiticity_drift: Option<f64>,
}

impl EvolutionResult {
    pub fn final_phi(&self) -> Complex64 {
        *self.phi.last().expect("at least the initial time is stored")
    }

    pub fn max_leakage(&self) -> Option<f64> {
        self.leakage.iter().map(|x| x.1).reduce(f64::max)
    }
}

/// Population on basis states within `guard` of either cutoff.
pub fn leakage(ctx: &GeneratorContext, rho: &DensityOperator, guard: usize) -> f64 {
    let space = ctx.model().space();
    (0..space.dim()).filter(|&i| space.in_guard_band(i, guard)).map(|i| rho[[i, i]].norm()).fold(0.0, |acc, x| acc + x)
}

/// Base step from a norm bound of the generator sampled over `[0, t_end]`.
pub fn auto_dt(ctx: &GeneratorContext, t_end: f64) -> f64 {
    let gen = Generator::new(ctx);
    let mut pts: Vec<f64> = (0..=8).map(|j| t_end * j as f64 / 8.0).collect();
    let mut cuts = vec![0.0];
    cuts.extend(ctx.breakpoints_within(t_end));
    cuts.push(t_end);
    pts.extend(cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let bound = pts.iter().map(|&t| gen.norm_bound(&gen.node(t, t))).fold(0.0, f64::max);
    if bound > 0.0 {
        AUTO_DT_FACTOR / bound
    } else {
        t_end.max(1.0)
    }
}

struct Workspace {
    k1: DensityOperator,
    k2: DensityOperator,
    k3: DensityOperator,
    k4: DensityOperator,
    tmp: DensityOperator,
    applications: usize,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        let z = || Array2::zeros((dim, dim));
        Workspace { k1: z(), k2: z(), k3: z(), k4: z(), tmp: z(), applications: 0 }
    }

    /// One classical RK4 step; `start`/`end` are the nodes at `t` and `t+h`.
    #[allow(clippy::too_many_arguments)]
    fn rk4(
        &mut self,
        gen: &Generator,
        start: &GeneratorNode,
        mid: &GeneratorNode,
        end: &GeneratorNode,
        h: f64,
        y: &DensityOperator,
        out: &mut DensityOperator,
    ) {
        let hh = Complex64::new(0.5 * h, 0.0);
        let hc = Complex64::new(h, 0.0);
        gen.apply(start, y, &mut self.k1);
        self.tmp.assign(y);
        self.tmp.scaled_add(hh, &self.k1);
        gen.apply(mid, &self.tmp, &mut self.k2);
        self.tmp.assign(y);
        self.tmp.scaled_add(hh, &self.k2);
        gen.apply(mid, &self.tmp, &mut self.k3);
        self.tmp.assign(y);
        self.tmp.scaled_add(hc, &self.k3);
        gen.apply(end, &self.tmp, &mut self.k4);
        self.applications += 4;
        let w = h / 6.0;
        ndarray::Zip::from(out)
            .and(y)
            .and(&self.k1)
            .and(&self.k2)
            .and(&self.k3)
            .and(&self.k4)
            .for_each(|o, &y, &a, &b, &c, &d| *o = y + (a + (b + c) * 2.0 + d) * w);
    }
}

struct Recorder<'o> {
    stride: usize,
    store_states: bool,
    markov: bool,
    guard: usize,
    bound: f64,
    initial_defect: f64,
    check_hermiticity: bool,
    since_store: usize,
    times: Vec<f64>,
    phi: Vec<Complex64>,
    states: Vec<DensityOperator>,
    leakage: Vec<(f64, f64)>,
    drift: f64,
    observer: Option<Observer<'o>>,
}

impl Recorder<'_> {
    fn record(&mut self, ctx: &GeneratorContext, t: f64, rho: &DensityOperator) -> Result<()> {
        let phi = trace(rho);
        if !phi.re.is_finite() || !phi.im.is_finite() {
            return Err(Error::Integration(format!("non-finite Phi at t = {t}; step too large?")));
        }
        if phi.norm() > self.bound {
            return Err(Error::Contractivity { time: t, modulus: phi.norm() });
        }
        if self.markov {
            self.leakage.push((t, leakage(ctx, rho, self.guard)));
            if self.check_hermiticity {
                let drift = hermiticity_defect(rho) - self.initial_defect;
                self.drift = self.drift.max(drift);
                if drift > HERMITICITY_DRIFT_TOL {
                    return Err(Error::Integration(format!("hermiticity drift {drift:.3e} at t = {t} in a k = 0 run")));
                }
            }
        }
        self.times.push(t);
        self.phi.push(phi);
        if self.store_states {
            self.states.push(rho.clone());
        }
        if let Some(obs) = self.observer.as_mut() {
            obs(t, rho);
        }
        Ok(())
    }

    fn after_step(&mut self, ctx: &GeneratorContext, t: f64, rho: &DensityOperator, last: bool) -> Result<()> {
        self.since_store += 1;
        if self.since_store >= self.stride || last {
            self.since_store = 0;
            self.record(ctx, t, rho)?;
        }
        Ok(())
    }
}

/// Integrate from 0 to `cfg.t_end`.
pub fn evolve(ctx: &GeneratorContext, rho0: &DensityOperator, cfg: &EvolutionConfig) -> Result<EvolutionResult> {
    evolve_observed(ctx, rho0, cfg, None)
}

/// Callback receiving every stored `(t, state)`.
pub type Observer<'a> = &'a mut dyn FnMut(f64, &DensityOperator);

/// As [`evolve`], calling `observer(t, rho)` at every stored time.
pub fn evolve_observed(
    ctx: &GeneratorContext,
    rho0: &DensityOperator,
    cfg: &EvolutionConfig,
    observer: Option<Observer<'_>>,
) -> Result<EvolutionResult> {
    cfg.validate()?;
    let dim = ctx.model().space().dim();
    if rho0.dim() != (dim, dim) {
        return Err(Error::Dimension(format!("initial operator is {:?}, space has dimension {dim}", rho0.dim())));
    }
    let markov = ctx.test_function().is_zero();
    let initial_defect = hermiticity_defect(rho0);
    let mut rec = Recorder {
        stride: cfg.store_stride,
        store_states: cfg.store_states,
        markov,
        guard: cfg.guard,
        bound: (1.0 + CONTRACTIVITY_SLACK) * trace_norm(rho0),
        initial_defect,
        check_hermiticity: initial_defect <= 1e-12,
        since_store: 0,
        times: Vec::new(),
        phi: Vec::new(),
        states: Vec::new(),
        leakage: Vec::new(),
        drift: 0.0,
        observer,
    };
    let mut rho = rho0.as_standard_layout().to_owned();
    rec.record(ctx, 0.0, &rho)?;

    let mut cuts = vec![0.0];
    cuts.extend(ctx.breakpoints_within(cfg.t_end));
    cuts.push(cfg.t_end);
    let dt = cfg.dt.unwrap_or_else(|| auto_dt(ctx, cfg.t_end));
    let gen = Generator::new(ctx);
    let mut ws = Workspace::new(dim);
    let mut stats = StepStats { min_step: f64::INFINITY, ..Default::default() };
    let mut next = Array2::zeros((dim, dim));

    let n_seg = cuts.len() - 1;
    let mut h_adapt = dt;
    for (si, w) in cuts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        stats.segments += 1;
        let probe = 0.5 * (a + b);
        let last_seg = si + 1 == n_seg;
        match cfg.method {
            Method::Rk4 => {
                let n = ((b - a) / dt).ceil().max(1.0) as usize;
                let h = (b - a) / n as f64;
                stats.min_step = stats.min_step.min(h);
                stats.max_step = stats.max_step.max(h);
                let mut start = gen.node(a, probe);
                for j in 0..n {
                    let t0 = a + j as f64 * h;
                    let t1 = if j + 1 == n { b } else { a + (j + 1) as f64 * h };
                    let mid = gen.node(0.5 * (t0 + t1), probe);
                    let end = gen.node(t1, probe);
                    ws.rk4(&gen, &start, &mid, &end, t1 - t0, &rho, &mut next);
                    std::mem::swap(&mut rho, &mut next);
                    stats.accepted += 1;
                    rec.after_step(ctx, t1, &rho, last_seg && j + 1 == n)?;
                    start = end;
                }
            }
            Method::Adaptive { rtol, atol } => {
                let mut t = a;
                let mut rejections = 0;
                let mut half = Array2::zeros((dim, dim));
                let mut fine = Array2::zeros((dim, dim));
                let mut start = gen.node(a, probe);
                while t < b {
                    let mut h = h_adapt.min(b - t);
                    let hit_end = t + h >= b * (1.0 - 1e-15) || b - (t + h) < 1e-12 * h;
                    if hit_end {
                        h = b - t;
                    }
                    let t1 = if hit_end { b } else { t + h };
                    let tm = t + 0.5 * h;
                    let n_q1 = gen.node(t + 0.25 * h, probe);
                    let n_m = gen.node(tm, probe);
                    let n_q3 = gen.node(t + 0.75 * h, probe);
                    let n_e = gen.node(t1, probe);
                    ws.rk4(&gen, &start, &n_m, &n_e, h, &rho, &mut next);
                    ws.rk4(&gen, &start, &n_q1, &n_m, 0.5 * h, &rho, &mut half);
                    ws.rk4(&gen, &n_m, &n_q3, &n_e, 0.5 * h, &half, &mut fine);
                    let scale = atol + rtol * fine.iter().map(|z| z.norm()).fold(0.0, f64::max);
                    let diff = fine.iter().zip(next.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                    let err = diff / 15.0 / scale;
                    let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) };
                    if err <= 1.0 && err.is_finite() {
                        ndarray::Zip::from(&mut rho)
                            .and(&fine)
                            .and(&next)
                            .for_each(|r, &f, &c| *r = f + (f - c) / 15.0);
                        stats.accepted += 1;
                        stats.min_step = stats.min_step.min(h);
                        stats.max_step = stats.max_step.max(h);
                        rejections = 0;
                        t = t1;
                        rec.after_step(ctx, t, &rho, last_seg && hit_end)?;
                        start = n_e;
                        if !hit_end {
                            h_adapt = h * factor;
                        } else {
                            h_adapt = h_adapt.max(h * factor);
                        }
                    } else {
                        stats.rejected += 1;
                        rejections += 1;
                        h_adapt = h * if err.is_finite() { factor } else { 0.2 };
                        if rejections > MAX_CONSECUTIVE_REJECTIONS || h_adapt < 1e-14 * cfg.t_end.max(1.0) {
                            return Err(Error::Integration(format!(
                                "step size collapsed to {h_adapt:.3e} at t = {t} after {rejections} rejections (err {err:.3e}); \
                                 {} accepted, {} rejected so far",
                                stats.accepted, stats.rejected
                            )));
                        }
                    }
                }
            }
        }
    }
    stats.generator_applications = ws.applications;
    if stats.accepted == 0 {
        stats.min_step = 0.0;
    }

    let mut leakage_series = std::mem::take(&mut rec.leakage);
    if !markov && cfg.leakage_companion {
        let companion_ctx = ctx.with_test_function(TestFunction::zero(ctx.spec().m()))?;
        let companion_cfg =
            EvolutionConfig { leakage_companion: false, store_states: false, dt: Some(dt), ..cfg.clone() };
        leakage_series = evolve(&companion_ctx, rho0, &companion_cfg)?.leakage;
    }
    Ok(EvolutionResult {
        times: rec.times,
        phi: rec.phi,
        states: rec.states,
        leakage: leakage_series,
        final_state: rho,
        stats,
        max_hermiticity_drift: (markov && rec.check_hermiticity).then_some(rec.drift),
    })
}

/// Largest entrywise deviation between evolving `0 -> t` in one go and
/// evolving `0 -> s`, then continuing with the context shifted by `s` for
/// `t - s`.
pub fn composition_check(
    ctx: &GeneratorContext,
    rho0: &DensityOperator,
    s: f64,
    t: f64,
    cfg: &EvolutionConfig,
) -> Result<f64> {
    if !(0.0..=t).contains(&s) {
        return Err(Error::Domain(format!("split point {s} outside [0, {t}]")));
    }
    let lean =
        EvolutionConfig { store_states: false, leakage_companion: false, store_stride: usize::MAX, ..cfg.clone() };
    let one_shot = evolve(ctx, rho0, &EvolutionConfig { t_end: t, ..lean.clone() })?;
    let first = evolve(ctx, rho0, &EvolutionConfig { t_end: s, ..lean.clone() })?;
    let second = evolve(&ctx.shifted(s), &first.final_state, &EvolutionConfig { t_end: t - s, ..lean })?;
    Ok(one_shot.final_state.iter().zip(second.final_state.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

/// Evolve the same context for several test functions in parallel; results
/// are in input order.
pub fn evolve_many(
    ctx: &GeneratorContext,
    ks: &[TestFunction],
    rho0: &DensityOperator,
    cfg: &EvolutionConfig,
) -> Result<Vec<EvolutionResult>> {
    use rayon::prelude::*;
    ks.par_iter()
        .enumerate()
        .map(|(i, k)| {
            ctx.with_test_function(k.clone())
                .and_then(|c| evolve(&c, rho0, cfg))
                .map_err(|e| e.context(format!("test function #{i}")))
        })
        .collect()
}
