//! The time-dependent generator of the reduced characteristic evolution,
//! acting on trace-class operators:
//!
//! ```text
//! L_t[rho] = K(f, r(-k)) rho + rho K(f, r(k))^dagger
//!          + sum_ij <z_i|S(k) z_j> B_j(f) rho B_i(f)^dagger + C(k, b, c, h) rho
//! ```
//!
//! with `B_i(l) = R_i + sum_j S_ij l_j` and
//! `K(l, r) = K - sum_ij R_i^dagger S_ij l_j - |l|^2/2 + sum_i conj(r_i) B_i(l)`.
//! At `k = 0` this is the Lindblad generator of the driven master equation.
//!
//! [`Generator`] folds the scalar pieces into two sparse operators `A`, `B`
//! and a handful of sandwich terms so that one application costs a few
//! sparse-dense products:
//! `L_t[rho] = A rho + rho B^dagger + sum_g w_g O_g rho O_g^dagger`.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{Csr, DensityOperator, SystemOperator, ONE, ZERO};
use crate::measurement::{c_from_values, r_from_values, s_diag, ObservableSpec, TestFunction};
use crate::model::{DpoParams, ModelSpec, DPO_CHANNELS, DPO_LASER_CHANNEL};
use crate::timefn::TimeFunction;

/// Coherent-state amplitude `f_i(t)` of the input field, zero outside
/// `[window.0, window.1)`.
#[derive(Clone, Debug)]
pub struct FieldProfile {
    channels: Vec<TimeFunction>,
    window: (f64, f64),
}

impl FieldProfile {
    pub fn new(channels: Vec<TimeFunction>, window_end: Option<f64>) -> Result<Self> {
        for f in &channels {
            f.validate()?;
        }
        let end = window_end.unwrap_or(f64::INFINITY);
        if !(end > 0.0) {
            return Err(Error::Validation(format!("field window end {end} must be positive")));
        }
        Ok(FieldProfile { channels, window: (0.0, end) })
    }

    /// Vacuum input on `d` channels.
    pub fn vacuum(d: usize) -> Self {
        FieldProfile { channels: vec![TimeFunction::Zero; d], window: (0.0, f64::INFINITY) }
    }

    /// Monochromatic pump laser on channel 4:
    /// `f_4(t) = i lambda exp(-2 i omega_c t) / conj(beta_2)` on `[0, T)`.
    pub fn dpo_laser(params: &DpoParams, window_end: f64) -> Result<Self> {
        let mut channels = vec![TimeFunction::Zero; DPO_CHANNELS];
        if params.lambda_drive != ZERO {
            if params.beta[1] == ZERO {
                return Err(Error::Validation("laser drive needs beta2 != 0".into()));
            }
            let amp = crate::fock::I * params.lambda_drive / params.beta[1].conj();
            channels[DPO_LASER_CHANNEL] = TimeFunction::exp(amp, 0.0, -2.0 * params.omega_c);
        }
        Self::new(channels, Some(window_end))
    }

    pub fn d(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[TimeFunction] {
        &self.channels
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn eval_at(&self, t: f64, probe: f64) -> Array1<Complex64> {
        if probe < self.window.0 || probe >= self.window.1 {
            return Array1::zeros(self.d());
        }
        Array1::from_iter(self.channels.iter().map(|f| f.eval_at(t, probe)))
    }

    pub fn eval(&self, t: f64) -> Array1<Complex64> {
        self.eval_at(t, t)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [self.window.0, self.window.1].into_iter().filter(|x| x.is_finite()).collect();
        v.extend(self.channels.iter().flat_map(|f| f.breakpoints()));
        v
    }

    pub fn shifted(&self, s: f64) -> Self {
        FieldProfile {
            channels: self.channels.iter().map(|f| f.shifted(s)).collect(),
            window: (self.window.0 - s, self.window.1 - s),
        }
    }

    pub fn frozen(&self, grid: &[f64]) -> Self {
        let windowed: Vec<TimeFunction> = self
            .channels
            .iter()
            .map(|f| {
                let (a, b) = self.window;
                let g = grid.windows(2).map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    if mid >= a && mid < b {
                        f.eval(mid)
                    } else {
                        ZERO
                    }
                });
                TimeFunction::table(grid.to_vec(), g.collect()).expect("grid is increasing")
            })
            .collect();
        FieldProfile { channels: windowed, window: (f64::NEG_INFINITY, f64::INFINITY) }
    }
}

/// Everything the generator depends on.
#[derive(Clone, Debug)]
pub struct GeneratorContext {
    model: Arc<ModelSpec>,
    spec: Arc<ObservableSpec>,
    field: FieldProfile,
    k: TestFunction,
}

impl GeneratorContext {
    pub fn new(model: Arc<ModelSpec>, spec: Arc<ObservableSpec>, field: FieldProfile, k: TestFunction) -> Result<Self> {
        let d = model.d();
        if spec.d() != d || field.d() != d {
            return Err(Error::Dimension(format!(
                "channel counts disagree: model {d}, observables {}, field {}",
                spec.d(),
                field.d()
            )));
        }
        let k = k.with_m(spec.m())?;
        Ok(GeneratorContext { model, spec, field, k })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn model_arc(&self) -> &Arc<ModelSpec> {
        &self.model
    }

    pub fn spec(&self) -> &ObservableSpec {
        &self.spec
    }

    pub fn spec_arc(&self) -> &Arc<ObservableSpec> {
        &self.spec
    }

    pub fn field(&self) -> &FieldProfile {
        &self.field
    }

    pub fn test_function(&self) -> &TestFunction {
        &self.k
    }

    pub fn with_test_function(&self, k: TestFunction) -> Result<Self> {
        Self::new(self.model.clone(), self.spec.clone(), self.field.clone(), k)
    }

    pub fn with_field(&self, field: FieldProfile) -> Result<Self> {
        Self::new(self.model.clone(), self.spec.clone(), field, self.k.clone())
    }

    /// Context for the interval starting at `s`: `f`, `k`, `h`, `b`, `c`
    /// all shifted by `s`.
    pub fn shifted(&self, s: f64) -> Self {
        GeneratorContext {
            model: self.model.clone(),
            spec: Arc::new(self.spec.shifted(s)),
            field: self.field.shifted(s),
            k: self.k.shifted(s),
        }
    }

    /// Midpoint-frozen copy: every time function replaced by its value at the
    /// midpoint of each segment of `grid` (plus existing breakpoints).
    pub fn frozen(&self, grid: &[f64]) -> Self {
        let mut pts: Vec<f64> = grid.to_vec();
        let (lo, hi) = (grid[0], *grid.last().unwrap());
        pts.extend(self.breakpoints().into_iter().filter(|x| *x > lo && *x < hi));
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        GeneratorContext {
            model: self.model.clone(),
            spec: Arc::new(self.spec.frozen(&pts)),
            field: self.field.frozen(&pts),
            k: self.k.clone(),
        }
    }

    /// All discontinuities of the coefficient functions, unsorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = self.k.breakpoints().to_vec();
        v.extend(self.field.breakpoints());
        v.extend(self.spec.breakpoints());
        v
    }

    /// Sorted discontinuities strictly inside `(0, t_end)`.
    pub fn breakpoints_within(&self, t_end: f64) -> Vec<f64> {
        let tol = 1e-12 * t_end.abs().max(1.0);
        let mut v: Vec<f64> = self.breakpoints().into_iter().filter(|x| *x > tol && *x < t_end - tol).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup_by(|a, b| (*a - *b).abs() <= tol);
        v
    }
}

/// `B_i(l) = R_i + sum_j S_ij l_j` (0-based `i`).
pub fn b_of_lambda(model: &ModelSpec, lambda: &[Complex64], i: usize) -> Result<SystemOperator> {
    check_lambda(model, lambda)?;
    let r = model.channel(i)?;
    let mu: Complex64 = (0..model.d()).map(|j| model.scattering()[[i, j]] * lambda[j]).sum();
    Ok(r.shift(mu))
}

/// `K(l, r) = K - sum_ij R_i^dagger S_ij l_j - |l|^2/2 + sum_i conj(r_i) B_i(l)`.
pub fn k_of_lambda_r(model: &ModelSpec, lambda: &[Complex64], r: &[Complex64]) -> Result<SystemOperator> {
    check_lambda(model, lambda)?;
    check_lambda(model, r)?;
    let norm2: f64 = lambda.iter().map(|z| z.norm_sqr()).sum();
    let mut acc = model.k().shift(Complex64::new(-0.5 * norm2, 0.0));
    for i in 0..model.d() {
        let mu: Complex64 = (0..model.d()).map(|j| model.scattering()[[i, j]] * lambda[j]).sum();
        let ri = model.channel(i)?;
        acc = acc.sub(&ri.adjoint().scale(mu))?;
        acc = acc.add(&b_of_lambda(model, lambda, i)?.scale(r[i].conj()))?;
    }
    Ok(acc)
}

fn check_lambda(model: &ModelSpec, v: &[Complex64]) -> Result<()> {
    if v.len() != model.d() {
        return Err(Error::Dimension(format!("vector of length {} for {} channels", v.len(), model.d())));
    }
    Ok(())
}

/// One-shot application of the generator at time `t` (right-continuous
/// convention at breakpoints).
pub fn apply_generator(ctx: &GeneratorContext, t: f64, rho: &DensityOperator) -> Result<DensityOperator> {
    let dim = ctx.model().space().dim();
    if rho.dim() != (dim, dim) {
        return Err(Error::Dimension(format!("density {:?} on dimension {dim}", rho.dim())));
    }
    let gen = Generator::new(ctx);
    let node = gen.node(t, t);
    let mut out = Array2::zeros((dim, dim));
    gen.apply(&node, &rho.as_standard_layout().to_owned(), &mut out);
    Ok(out)
}

/// Sparse operators on a shared union pattern, combined with per-node
/// coefficients without re-sorting.
#[derive(Clone, Debug)]
struct ComboBasis {
    pattern: Csr,
    // For each term, (slot in pattern, value) pairs.
    terms: Vec<Vec<(usize, Complex64)>>,
}

impl ComboBasis {
    fn new(dim: usize, ops: &[Vec<(usize, usize, Complex64)>]) -> Self {
        let mut map = std::collections::BTreeMap::new();
        for op in ops {
            for &(r, c, _) in op {
                map.insert((r, c), ZERO);
            }
        }
        let pattern = Csr::from_map(dim, &map, true);
        let slot = |r: usize, c: usize| -> usize {
            let span = pattern.row_ptr[r]..pattern.row_ptr[r + 1];
            span.start + pattern.cols[span].binary_search(&c).expect("entry in union pattern")
        };
        let terms = ops.iter().map(|op| op.iter().map(|&(r, c, v)| (slot(r, c), v)).collect()).collect();
        ComboBasis { pattern, terms }
    }

    fn combine(&self, coeffs: &[Complex64], out: &mut Csr) {
        out.vals.iter_mut().for_each(|v| *v = ZERO);
        for (term, &w) in self.terms.iter().zip(coeffs) {
            if w == ZERO {
                continue;
            }
            for &(slot, v) in term {
                out.vals[slot] += w * v;
            }
        }
    }
}

/// Channels whose operators are scalar multiples of one operator share a
/// sandwich product.
#[derive(Clone, Debug)]
struct SandwichGroup {
    op: Csr,
    members: Vec<(usize, f64)>,
}

fn proportional(rep: &SystemOperator, other: &SystemOperator) -> Option<Complex64> {
    if rep.nnz() != other.nnz() || rep.nnz() == 0 {
        return None;
    }
    let a: Vec<_> = rep.triplets().collect();
    let b: Vec<_> = other.triplets().collect();
    if a.iter().zip(&b).any(|(x, y)| x.0 != y.0 || x.1 != y.1) {
        return None;
    }
    let ratio = b[0].2 / a[0].2;
    let scale = b.iter().map(|x| x.2.norm()).fold(0.0, f64::max);
    a.iter().zip(&b).all(|(x, y)| (y.2 - ratio * x.2).norm() <= 1e-14 * scale).then_some(ratio)
}

/// Per-node data: folded left/right operators and sandwich weights.
#[derive(Clone, Debug)]
pub struct GeneratorNode {
    left: Csr,
    right: Csr,
    weights: Vec<Complex64>,
}

/// Precomputed structure of the generator for one context.
#[derive(Clone, Debug)]
pub struct Generator<'a> {
    ctx: &'a GeneratorContext,
    basis: ComboBasis,
    groups: Vec<SandwichGroup>,
    dim: usize,
}

impl<'a> Generator<'a> {
    pub fn new(ctx: &'a GeneratorContext) -> Self {
        let model = ctx.model();
        let d = model.d();
        let dim = model.space().dim();
        let mut ops: Vec<Vec<(usize, usize, Complex64)>> = Vec::with_capacity(2 * d + 2);
        ops.push(model.k().triplets().collect());
        for r in model.channels() {
            ops.push(r.triplets().collect());
        }
        for r in model.channels() {
            ops.push(r.adjoint().triplets().collect());
        }
        ops.push((0..dim).map(|i| (i, i, ONE)).collect());
        let basis = ComboBasis::new(dim, &ops);

        let mut groups: Vec<(usize, SandwichGroup)> = Vec::new();
        for (i, r) in model.channels().iter().enumerate() {
            if r.is_zero() {
                continue;
            }
            let found = groups.iter_mut().find_map(|(rep, g)| proportional(&model.channels()[*rep], r).map(|q| (g, q)));
            match found {
                Some((g, ratio)) => g.members.push((i, ratio.norm_sqr())),
                None => groups.push((i, SandwichGroup { op: r.csr().clone(), members: vec![(i, 1.0)] })),
            }
        }
        Generator { ctx, basis, groups: groups.into_iter().map(|(_, g)| g).collect(), dim }
    }

    pub fn context(&self) -> &GeneratorContext {
        self.ctx
    }

    /// Coefficients at time `t`, discontinuous pieces selected by `probe`.
    pub fn node(&self, t: f64, probe: f64) -> GeneratorNode {
        let ctx = self.ctx;
        let model = ctx.model();
        let d = model.d();
        let kappa = ctx.k.eval_at(probe);
        let minus: Vec<f64> = kappa.iter().map(|x| -x).collect();
        let vals = ctx.spec.values_at(t, probe);
        let s = s_diag(ctx.spec.eigenvalues(), &kappa);
        let s_minus = s.mapv(|z| z.conj());
        let r_plus = r_from_values(&s, &kappa, &vals);
        let r_minus = r_from_values(&s_minus, &minus, &vals);
        let c = c_from_values(&s, &kappa, &vals);
        let f = ctx.field.eval_at(t, probe);
        let mu: Vec<Complex64> = (0..d).map(|i| (0..d).map(|j| model.scattering()[[i, j]] * f[j]).sum()).collect();
        let half_f2 = Complex64::new(0.5 * f.iter().map(|z| z.norm_sqr()).sum::<f64>(), 0.0);

        let mut left = vec![ZERO; 2 * d + 2];
        let mut right = vec![ZERO; 2 * d + 2];
        left[0] = ONE;
        right[0] = ONE;
        let mut left_id = c - half_f2;
        let mut right_id = -half_f2;
        for i in 0..d {
            left[1 + i] = r_minus[i].conj() + s[i] * mu[i].conj();
            right[1 + i] = r_plus[i].conj() + (s[i] * mu[i]).conj();
            left[1 + d + i] = -mu[i];
            right[1 + d + i] = -mu[i];
            left_id += r_minus[i].conj() * mu[i] + s[i] * mu[i].norm_sqr();
            right_id += r_plus[i].conj() * mu[i];
        }
        left[2 * d + 1] = left_id;
        right[2 * d + 1] = right_id;

        let mut lcsr = self.basis.pattern.clone();
        let mut rcsr = self.basis.pattern.clone();
        self.basis.combine(&left, &mut lcsr);
        self.basis.combine(&right, &mut rcsr);
        let weights = self.groups.iter().map(|g| g.members.iter().map(|&(i, w)| s[i] * w).sum()).collect();
        GeneratorNode { left: lcsr, right: rcsr, weights }
    }

    /// `out = L[rho]` (overwrites `out`).
    pub fn apply(&self, node: &GeneratorNode, rho: &DensityOperator, out: &mut DensityOperator) {
        out.fill(ZERO);
        node.left.left_mul_acc(rho, ONE, out);
        node.right.right_mul_adjoint_acc(rho, ONE, out);
        let mut tmp = Array2::zeros((self.dim, self.dim));
        for (g, &w) in self.groups.iter().zip(&node.weights) {
            if w == ZERO {
                continue;
            }
            tmp.fill(ZERO);
            g.op.left_mul_acc(rho, ONE, &mut tmp);
            g.op.right_mul_adjoint_acc(&tmp, w, out);
        }
    }

    /// Upper bound on the spectral radius of the superoperator at one node.
    pub fn norm_bound(&self, node: &GeneratorNode) -> f64 {
        let left = node.left.norm_inf().max(node.left.norm_one());
        let right = node.right.norm_inf().max(node.right.norm_one());
        let sandwich: f64 = self
            .groups
            .iter()
            .zip(&node.weights)
            .map(|(g, w)| w.norm() * g.op.norm_inf().max(g.op.norm_one()).powi(2))
            .sum();
        left + right + sandwich
    }
}
