//! From characteristic functionals to distributions.
//!
//! An [`IncrementGrid`] picks up to four (interval, observable) increments
//! and a sample set of `kappa` values for each. [`joint_charfunc`] evaluates
//! `Phi` at every point of the product grid (one evolution per point, in
//! parallel); the inversion routines turn slices of the result into count
//! probabilities, quadrature densities or moments.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionConfig};
use crate::fock::{DensityOperator, ZERO};
use crate::generator::GeneratorContext;
use crate::measurement::{ObservableKind, ObservableSpec, TestFunction};

pub const DEFAULT_N_KAPPA: usize = 256;
pub const MAX_AXES: usize = 4;
/// `kappa_max = KAPPA_MAX_SIGMAS / sigma` by default.
pub const KAPPA_MAX_SIGMAS: f64 = 12.0;
/// Imaginary parts of inverted probabilities above this are an error.
pub const IMAG_RESIDUE_TOL: f64 = 1e-6;
/// Negative probabilities below `-NEGATIVE_TOL` produce a warning.
pub const NEGATIVE_TOL: f64 = 1e-7;
/// `|Phi|` at the ends of a symmetric grid must be below this.
pub const DECAY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// `kappa_j = 2 pi j / n`, `j = 0..n`.
    Counting,
    /// `kappa_j = -kappa_max + 2 kappa_max j / n`, `j = 0..n`.
    Symmetric { kappa_max: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementAxis {
    /// 0-based interval `[t_l, t_{l+1})` of the grid breakpoints.
    pub interval: usize,
    /// 0-based observable index.
    pub observable: usize,
    pub sampling: Sampling,
    pub n: usize,
}

impl IncrementAxis {
    pub fn counting(interval: usize, observable: usize, n: usize) -> Self {
        IncrementAxis { interval, observable, sampling: Sampling::Counting, n }
    }

    pub fn symmetric(interval: usize, observable: usize, n: usize, kappa_max: f64) -> Self {
        IncrementAxis { interval, observable, sampling: Sampling::Symmetric { kappa_max }, n }
    }

    pub fn kappa(&self, j: usize) -> f64 {
        match self.sampling {
            Sampling::Counting => 2.0 * std::f64::consts::PI * j as f64 / self.n as f64,
            Sampling::Symmetric { kappa_max } => -kappa_max + 2.0 * kappa_max * j as f64 / self.n as f64,
        }
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.kappa(j)).collect()
    }

    pub fn spacing(&self) -> f64 {
        match self.sampling {
            Sampling::Counting => 2.0 * std::f64::consts::PI / self.n as f64,
            Sampling::Symmetric { kappa_max } => 2.0 * kappa_max / self.n as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementGrid {
    breakpoints: Vec<f64>,
    axes: Vec<IncrementAxis>,
}

impl IncrementGrid {
    pub fn new(breakpoints: Vec<f64>, axes: Vec<IncrementAxis>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints[0] < 0.0 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation(
                "increment breakpoints must be >= 0 and strictly increasing, at least two".into(),
            ));
        }
        if axes.is_empty() || axes.len() > MAX_AXES {
            return Err(Error::Validation(format!("between 1 and {MAX_AXES} increments per grid, got {}", axes.len())));
        }
        for (i, ax) in axes.iter().enumerate() {
            if ax.interval + 1 >= breakpoints.len() {
                return Err(Error::Index(format!(
                    "interval {} but only {} intervals",
                    ax.interval,
                    breakpoints.len() - 1
                )));
            }
            if !ax.n.is_power_of_two() || ax.n < 2 {
                return Err(Error::Validation(format!("grid size {} must be a power of two >= 2", ax.n)));
            }
            if let Sampling::Symmetric { kappa_max } = ax.sampling {
                if !(kappa_max > 0.0) || !kappa_max.is_finite() {
                    return Err(Error::Validation(format!("kappa_max = {kappa_max} must be positive")));
                }
            }
            if axes[..i].iter().any(|o| o.interval == ax.interval && o.observable == ax.observable) {
                return Err(Error::Validation(format!(
                    "increment (interval {}, observable {}) listed twice",
                    ax.interval, ax.observable
                )));
            }
        }
        Ok(IncrementGrid { breakpoints, axes })
    }

    /// Axes with the sampling suggested by each observable's kind; mixed
    /// observables use the counting grid.
    pub fn for_spec(
        spec: &ObservableSpec,
        breakpoints: Vec<f64>,
        increments: &[(usize, usize)],
        n: usize,
        kappa_max: f64,
    ) -> Result<Self> {
        let axes = increments
            .iter()
            .map(|&(l, a)| {
                if a >= spec.m() {
                    return Err(Error::Index(format!("observable {a} of {}", spec.m())));
                }
                Ok(match spec.kind(a) {
                    ObservableKind::Diffusive => IncrementAxis::symmetric(l, a, n, kappa_max),
                    _ => IncrementAxis::counting(l, a, n),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(breakpoints, axes)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn axes(&self) -> &[IncrementAxis] {
        &self.axes
    }

    pub fn t_end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of flat (row-major) position `flat`.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (slot, ax) in idx.iter_mut().zip(&self.axes).rev() {
            *slot = flat % ax.n;
            flat /= ax.n;
        }
        idx
    }

    /// Test function for grid point `idx` and `m` observables.
    pub fn test_function(&self, idx: &[usize], m: usize) -> Result<TestFunction> {
        let mut values = vec![vec![0.0; m]; self.breakpoints.len() - 1];
        for (ax, &j) in self.axes.iter().zip(idx) {
            if ax.observable >= m {
                return Err(Error::Index(format!("observable {} of {m}", ax.observable)));
            }
            values[ax.interval][ax.observable] = ax.kappa(j);
        }
        TestFunction::new(self.breakpoints.clone(), values)
    }
}

/// `Phi` on an increment grid, row-major in the axis order.
#[derive(Clone, Debug)]
pub struct CharfuncGrid {
    pub grid: IncrementGrid,
    pub values: ArrayD<Complex64>,
    /// Largest leakage of the `k = 0` companion (if requested).
    pub leakage: Option<f64>,
}

/// Evaluate `Phi_T(k)` at every grid point, `T` the last grid breakpoint.
pub fn joint_charfunc(
    ctx: &GeneratorContext,
    grid: &IncrementGrid,
    rho0: &DensityOperator,
    cfg: &EvolutionConfig,
) -> Result<CharfuncGrid> {
    let m = ctx.spec().m();
    let run_cfg = EvolutionConfig {
        t_end: grid.t_end(),
        store_stride: usize::MAX,
        store_states: false,
        leakage_companion: false,
        ..cfg.clone()
    };
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let idx = grid.multi_index(flat);
            let annotate = |e: Error| {
                let kappas: Vec<String> =
                    grid.axes.iter().zip(&idx).map(|(a, &j)| format!("{:.6}", a.kappa(j))).collect();
                e.context(format!("grid point {idx:?} (kappa = [{}])", kappas.join(", ")))
            };
            let k = grid.test_function(&idx, m).map_err(annotate)?;
            if k.is_zero() {
                return Ok(rho0.diag().sum());
            }
            let local = ctx.with_test_function(k).map_err(annotate)?;
            Ok(evolve(&local, rho0, &run_cfg).map_err(annotate)?.final_phi())
        })
        .collect::<Result<_>>()?;
    let leakage = if cfg.leakage_companion {
        let zero = ctx.with_test_function(TestFunction::zero(m))?;
        evolve(&zero, rho0, &run_cfg)?.max_leakage()
    } else {
        None
    };
    let values = ArrayD::from_shape_vec(IxDyn(&grid.shape()), values).expect("shape matches grid");
    Ok(CharfuncGrid { grid: grid.clone(), values, leakage })
}

#[derive(Clone, Debug, Serialize)]
pub struct CountDistribution {
    pub counts: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub imag_residue: f64,
    pub total_mass: f64,
    pub min_raw: f64,
    pub warnings: Vec<String>,
}

/// `p(n) = (1/N) sum_j Phi(2 pi j / N) exp(-i n 2 pi j / N)` for `n = 0..=n_max`.
pub fn invert_counting(charfunc: &[Complex64], n_max: usize) -> Result<CountDistribution> {
    let joint =
        invert_counting_joint(&ArrayD::from_shape_vec(IxDyn(&[charfunc.len()]), charfunc.to_vec()).unwrap(), &[n_max])?;
    Ok(CountDistribution {
        counts: (0..=n_max).collect(),
        probabilities: joint.probabilities.iter().copied().collect(),
        imag_residue: joint.imag_residue,
        total_mass: joint.total_mass,
        min_raw: joint.min_raw,
        warnings: joint.warnings,
    })
}

#[derive(Clone, Debug)]
pub struct JointCountDistribution {
    /// Indexed by the count on each axis.
    pub probabilities: ArrayD<f64>,
    pub imag_residue: f64,
    pub total_mass: f64,
    pub min_raw: f64,
    pub warnings: Vec<String>,
}

/// Separable inverse DFT over every axis of a counting grid.
pub fn invert_counting_joint(charfunc: &ArrayD<Complex64>, n_max: &[usize]) -> Result<JointCountDistribution> {
    if charfunc.ndim() != n_max.len() {
        return Err(Error::Dimension(format!("{} axes but {} count limits", charfunc.ndim(), n_max.len())));
    }
    for (&n, &nm) in charfunc.shape().iter().zip(n_max) {
        if n < nm + 1 {
            return Err(Error::Validation(format!("{n} samples cannot resolve counts up to {nm}")));
        }
    }
    let mut cur = charfunc.clone();
    for (axis, &nm) in n_max.iter().enumerate() {
        let n = cur.shape()[axis];
        let mut shape = cur.shape().to_vec();
        shape[axis] = nm + 1;
        let mut next = ArrayD::from_elem(IxDyn(&shape), ZERO);
        let twiddle: Vec<Vec<Complex64>> = (0..=nm)
            .map(|c| {
                (0..n)
                    .map(|j| {
                        Complex64::from_polar(
                            1.0 / n as f64,
                            -2.0 * std::f64::consts::PI * ((c * j) % n) as f64 / n as f64,
                        )
                    })
                    .collect()
            })
            .collect();
        for (src, mut dst) in cur.lanes(ndarray::Axis(axis)).into_iter().zip(next.lanes_mut(ndarray::Axis(axis))) {
            for (c, w) in twiddle.iter().enumerate() {
                dst[c] = src.iter().zip(w).map(|(a, b)| a * b).sum();
            }
        }
        cur = next;
    }
    let imag_residue = cur.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag_residue > IMAG_RESIDUE_TOL {
        return Err(Error::Inversion(format!(
            "imaginary residue {imag_residue:.3e} exceeds {IMAG_RESIDUE_TOL:.0e}; the characteristic function is not that of an integer-valued law"
        )));
    }
    let min_raw = cur.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let mut warnings = Vec::new();
    if min_raw < -NEGATIVE_TOL {
        warnings.push(format!("negative probability {min_raw:.3e} clipped to 0"));
    }
    let probabilities = cur.mapv(|z| z.re.max(0.0));
    let total_mass = probabilities.sum();
    Ok(JointCountDistribution { probabilities, imag_residue, total_mass, min_raw, warnings })
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureDensity {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub imag_residue: f64,
    /// Trapezoid integral of the density over `x`.
    pub mass: f64,
    pub edge_modulus: f64,
}

/// `p(x) = (1/2pi) int Phi(kappa) e^{-i kappa x} dkappa` by the trapezoid rule
/// on the symmetric grid `kappa_j = -kappa_max + j * 2 kappa_max / N`.
pub fn invert_homodyne(charfunc: &[Complex64], kappa_max: f64, x: &[f64]) -> Result<QuadratureDensity> {
    let n = charfunc.len();
    if n < 2 || !(kappa_max > 0.0) {
        return Err(Error::Validation("homodyne inversion needs at least two samples and kappa_max > 0".into()));
    }
    let edge_modulus = charfunc[0].norm().max(charfunc[n - 1].norm());
    if edge_modulus >= DECAY_TOL {
        return Err(Error::Aliasing(format!(
            "|Phi| = {edge_modulus:.3e} at the edge of the kappa grid; raise kappa_max (currently {kappa_max})"
        )));
    }
    let dk = 2.0 * kappa_max / n as f64;
    let kappas: Vec<f64> = (0..n).map(|j| -kappa_max + dk * j as f64).collect();
    let vals: Vec<Complex64> = x
        .par_iter()
        .map(|&xv| {
            let s: Complex64 =
                charfunc.iter().zip(&kappas).map(|(p, &k)| p * Complex64::from_polar(1.0, -k * xv)).sum();
            s * (dk / (2.0 * std::f64::consts::PI))
        })
        .collect();
    let imag_residue = vals.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let density: Vec<f64> = vals.iter().map(|z| z.re).collect();
    let mass = x.windows(2).zip(density.windows(2)).map(|(xs, ds)| 0.5 * (xs[1] - xs[0]) * (ds[0] + ds[1])).sum();
    Ok(QuadratureDensity { x: x.to_vec(), density, imag_residue, mass, edge_modulus })
}

/// `points` equally spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Moments {
    /// Raw moments `E[X^j]`, `j = 1..=order`.
    pub values: Vec<f64>,
    /// `|m(h) - m(2h)| / 15` where the wider stencil fits, else `None`.
    pub richardson: Vec<Option<f64>>,
    pub h: f64,
}

/// Stencil half-width needed for derivatives up to `order`.
pub fn stencil_half_width(order: usize) -> usize {
    if order <= 2 {
        2
    } else {
        3
    }
}

/// Raw moments from `Phi(j h)`, `j = -J..=J` (`values.len() = 2J + 1`),
/// using fourth-order central differences:
///
/// ```text
/// d1 = (-f2 + 8 f1 - 8 f-1 + f-2) / 12h
/// d2 = (-f2 + 16 f1 - 30 f0 + 16 f-1 - f-2) / 12h^2
/// d3 = (-f3 + 8 f2 - 13 f1 + 13 f-1 - 8 f-2 + f-3) / 8h^3
/// d4 = (-f3 + 12 f2 - 39 f1 + 56 f0 - 39 f-1 + 12 f-2 - f-3) / 6h^4
/// ```
///
/// and `E[X^j] = Re(i^{-j} d_j)`.
pub fn moments_from_charfunc(values: &[Complex64], h: f64, order: usize) -> Result<Moments> {
    if !(1..=4).contains(&order) {
        return Err(Error::Domain(format!("moment order {order} not in 1..=4")));
    }
    if values.len().is_multiple_of(2) || !(h > 0.0) {
        return Err(Error::Validation("moment stencil needs an odd number of samples and h > 0".into()));
    }
    let half = values.len() / 2;
    let need = stencil_half_width(order);
    if half < need {
        return Err(Error::Validation(format!("order {order} needs samples at +-{need}h, got +-{half}h")));
    }
    let f = |j: i64, stride: i64| values[(half as i64 + j * stride) as usize];
    let derivs = |stride: i64, hh: f64| -> Vec<Option<Complex64>> {
        let fits = |w: usize| half as i64 >= w as i64 * stride;
        let f = |j| f(j, stride);
        vec![
            fits(2).then(|| (-f(2) + f(1) * 8.0 - f(-1) * 8.0 + f(-2)) / (12.0 * hh)),
            fits(2).then(|| (-f(2) + f(1) * 16.0 - f(0) * 30.0 + f(-1) * 16.0 - f(-2)) / (12.0 * hh * hh)),
            fits(3)
                .then(|| (-f(3) + f(2) * 8.0 - f(1) * 13.0 + f(-1) * 13.0 - f(-2) * 8.0 + f(-3)) / (8.0 * hh.powi(3))),
            fits(3).then(|| {
                (-f(3) + f(2) * 12.0 - f(1) * 39.0 + f(0) * 56.0 - f(-1) * 39.0 + f(-2) * 12.0 - f(-3))
                    / (6.0 * hh.powi(4))
            }),
        ]
    };
    let to_moment = |j: usize, d: Complex64| (d * Complex64::i().powi(-(j as i32))).re;
    let fine = derivs(1, h);
    let coarse = derivs(2, 2.0 * h);
    let mut out = Moments { values: Vec::new(), richardson: Vec::new(), h };
    for j in 1..=order {
        let m = to_moment(j, fine[j - 1].expect("half width checked"));
        out.values.push(m);
        out.richardson.push(coarse[j - 1].map(|d| (m - to_moment(j, d)).abs() / 15.0));
    }
    Ok(out)
}

/// Test functions for a moment stencil of one increment: `kappa = j h` on
/// interval `[t0, t1)` for observable `alpha`, `j = -J..=J`.
pub fn stencil_test_functions(
    m: usize,
    alpha: usize,
    t0: f64,
    t1: f64,
    h: f64,
    half: usize,
) -> Result<Vec<TestFunction>> {
    (-(half as i64)..=half as i64)
        .map(|j| {
            let mut kappa = vec![0.0; m];
            kappa[alpha] = j as f64 * h;
            TestFunction::constant(kappa, t0, t1)
        })
        .collect()
}

/// Evaluate `Phi` on a moment stencil and differentiate.
#[allow(clippy::too_many_arguments)]
pub fn moments(
    ctx: &GeneratorContext,
    alpha: usize,
    t0: f64,
    t1: f64,
    rho0: &DensityOperator,
    cfg: &EvolutionConfig,
    order: usize,
    h: f64,
) -> Result<Moments> {
    let half = 2 * stencil_half_width(order);
    let ks = stencil_test_functions(ctx.spec().m(), alpha, t0, t1, h, half)?;
    let run_cfg = EvolutionConfig { t_end: t1, store_stride: usize::MAX, leakage_companion: false, ..cfg.clone() };
    let phis =
        crate::evolution::evolve_many(ctx, &ks, rho0, &run_cfg)?.iter().map(|r| r.final_phi()).collect::<Vec<_>>();
    moments_from_charfunc(&phis, h, order)
}

/// Default `kappa_max = 12 / sigma` with `sigma` from a finite-difference
/// variance estimate of the increment.
pub fn default_kappa_max(
    ctx: &GeneratorContext,
    alpha: usize,
    t0: f64,
    t1: f64,
    rho0: &DensityOperator,
    cfg: &EvolutionConfig,
) -> Result<f64> {
    let m = moments(ctx, alpha, t0, t1, rho0, cfg, 2, 1e-2)?;
    let var = m.values[1] - m.values[0] * m.values[0];
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::Inversion(format!("variance estimate {var:.3e} is not positive; set kappa_max explicitly")));
    }
    Ok(KAPPA_MAX_SIGMAS / var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_cf(mu: f64, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|j| (mu * (Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64) - 1.0)).exp())
            .collect()
    }

    fn poisson(mu: f64, k: usize) -> f64 {
        (-mu + k as f64 * mu.ln() - (1..=k).map(|i| (i as f64).ln()).sum::<f64>()).exp()
    }

    #[test]
    fn phi_one_is_zero_counts() {
        let d = invert_counting(&[Complex64::new(1.0, 0.0); 16], 5).unwrap();
        assert!((d.probabilities[0] - 1.0).abs() < 1e-15);
        assert!(d.probabilities[1..].iter().all(|p| p.abs() < 1e-15));
    }

    #[test]
    fn poisson_inversion() {
        let d = invert_counting(&poisson_cf(2.0, 256), 20).unwrap();
        for (n, p) in d.probabilities.iter().enumerate() {
            assert!((p - poisson(2.0, n)).abs() < 1e-14);
        }
        assert!((d.total_mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn doubling_samples_is_stable() {
        let a = invert_counting(&poisson_cf(3.0, 128), 20).unwrap();
        let b = invert_counting(&poisson_cf(3.0, 256), 20).unwrap();
        for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn joint_inversion_factorizes() {
        let (n, mu1, mu2) = (64, 1.5, 0.5);
        let cf = ArrayD::from_shape_fn(IxDyn(&[n, n]), |ix| {
            let (a, b) = (poisson_cf(mu1, n)[ix[0]], poisson_cf(mu2, n)[ix[1]]);
            a * b
        });
        let j = invert_counting_joint(&cf, &[10, 8]).unwrap();
        for a in 0..=10 {
            for b in 0..=8 {
                assert!((j.probabilities[[a, b]] - poisson(mu1, a) * poisson(mu2, b)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn imaginary_residue_is_an_error() {
        let cf: Vec<Complex64> = (0..8).map(|j| Complex64::from_polar(1.0, 0.3 * j as f64)).collect();
        assert!(matches!(invert_counting(&cf, 3), Err(Error::Inversion(_))));
    }

    #[test]
    fn gaussian_inversion() {
        let (n, kmax, mean, var) = (256, 12.0, 0.7, 1.0);
        let cf: Vec<Complex64> = (0..n)
            .map(|j| {
                let k = -kmax + 2.0 * kmax * j as f64 / n as f64;
                Complex64::new(-0.5 * var * k * k, mean * k).exp()
            })
            .collect();
        let x = linspace(-6.0, 6.0, 241);
        let d = invert_homodyne(&cf, kmax, &x).unwrap();
        for (xv, p) in x.iter().zip(&d.density) {
            let exact = (-(xv - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
            assert!((p - exact).abs() < 1e-12);
        }
        assert!(d.imag_residue < 1e-12);
        assert!((d.mass - 1.0).abs() < 1e-5);
    }

    #[test]
    fn no_decay_is_aliasing() {
        assert!(matches!(invert_homodyne(&[Complex64::new(1.0, 0.0); 32], 4.0, &[0.0]), Err(Error::Aliasing(_))));
    }

    #[test]
    fn moments_of_known_laws() {
        let h = 1e-2;
        let stencil = |f: &dyn Fn(f64) -> Complex64| (-6..=6).map(|j| f(j as f64 * h)).collect::<Vec<_>>();
        let one = moments_from_charfunc(&stencil(&|_| Complex64::new(1.0, 0.0)), h, 4).unwrap();
        assert!(one.values.iter().all(|m| m.abs() < 1e-12));
        let mu = 2.0;
        let pois =
            moments_from_charfunc(&stencil(&|k| (mu * (Complex64::new(0.0, k).exp() - 1.0)).exp()), h, 4).unwrap();
        let exact =
            [mu, mu + mu * mu, mu.powi(3) + 3.0 * mu * mu + mu, mu.powi(4) + 6.0 * mu.powi(3) + 7.0 * mu * mu + mu];
        for (m, e) in pois.values.iter().zip(exact) {
            assert!((m - e).abs() / e < 1e-6, "{m} vs {e}");
        }
        let gauss = moments_from_charfunc(&stencil(&|k| Complex64::new(-0.5 * 1.7 * k * k, 0.0).exp()), h, 2).unwrap();
        assert!(gauss.values[0].abs() < 1e-12);
        assert!((gauss.values[1] - 1.7).abs() < 1e-6);
        assert!(gauss.richardson[1].unwrap() < 1e-6);
    }

    #[test]
    fn grid_validation() {
        let bad = IncrementGrid::new(vec![0.0, 1.0], vec![IncrementAxis::counting(0, 0, 100)]);
        assert!(bad.is_err());
        let twice = IncrementGrid::new(
            vec![0.0, 1.0],
            vec![IncrementAxis::counting(0, 0, 8), IncrementAxis::counting(0, 0, 8)],
        );
        assert!(twice.is_err());
        let g = IncrementGrid::new(
            vec![0.0, 1.0, 2.0],
            vec![IncrementAxis::counting(0, 0, 4), IncrementAxis::counting(1, 1, 8)],
        )
        .unwrap();
        assert_eq!(g.len(), 32);
        assert_eq!(g.multi_index(13), vec![1, 5]);
        let k = g.test_function(&[1, 5], 3).unwrap();
        assert!((k.eval(0.5)[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((k.eval(1.5)[1] - 2.0 * std::f64::consts::PI * 5.0 / 8.0).abs() < 1e-15);
    }
}
