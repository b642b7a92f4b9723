//! Observable-side data: commuting field observables in their diagonal
//! basis, the piecewise-constant test functions `k`, and the scalar
//! quantities `S(kappa)`, `r(k; t)`, `C(kappa, b, c, h)` and `G_ij(t; k)`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{I, ONE};
use crate::timefn::TimeFunction;

/// Number of uniform samples used (on top of breakpoints) when checking the
/// pointwise reality condition on `<h^a(t)|h^b(t)>`.
const REALITY_SAMPLES: usize = 512;
const REALITY_TOL: f64 = 1e-12;

/// How an observable's increments are distributed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// Eigenvalues in {0, 1}, `h = 0`, no `b`/`c` offsets: integer increments.
    Counting,
    /// `B = 0`, `h != 0`: real increments with a density.
    Diffusive,
    /// Anything else.
    Mixed,
}

/// Field observables `X(alpha, t)`, `alpha = 1..m`, over `d` channels.
///
/// `eigenvalues[[alpha, i]]` is the eigenvalue of `B^alpha` on `z_i`;
/// `h[alpha][i]` the component `h^alpha_i(t)`.
#[derive(Clone, Debug)]
pub struct ObservableSpec {
    eigenvalues: Array2<f64>,
    h: Vec<Vec<TimeFunction>>,
    b: Vec<TimeFunction>,
    c: Vec<TimeFunction>,
}

/// Values of `h`, `b`, `c` at one instant.
#[derive(Clone, Debug)]
pub struct ObservableValues {
    pub h: Array2<Complex64>,
    pub b: Array1<Complex64>,
    pub c: Array1<f64>,
}

impl ObservableSpec {
    pub fn new(
        eigenvalues: Array2<f64>,
        h: Vec<Vec<TimeFunction>>,
        b: Vec<TimeFunction>,
        c: Vec<TimeFunction>,
    ) -> Result<Self> {
        let (m, d) = eigenvalues.dim();
        if h.len() != m || h.iter().any(|row| row.len() != d) {
            return Err(Error::Dimension(format!("h must be {m} x {d}")));
        }
        if b.len() != d {
            return Err(Error::Dimension(format!("b has {} components, expected {d}", b.len())));
        }
        if c.len() != m {
            return Err(Error::Dimension(format!("c has {} components, expected {m}", c.len())));
        }
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite eigenvalue".into()));
        }
        for f in h.iter().flatten().chain(&b).chain(&c) {
            f.validate()?;
        }
        if let Some(a) = c.iter().position(|f| !f.is_real()) {
            return Err(Error::Validation(format!("c^{} must be real-valued", a + 1)));
        }
        let spec = ObservableSpec { eigenvalues, h, b, c };
        spec.check_orthogonality()?;
        spec.check_reality()?;
        Ok(spec)
    }

    /// No observables on `d` channels.
    pub fn empty(d: usize) -> Self {
        ObservableSpec { eigenvalues: Array2::zeros((0, d)), h: vec![], b: vec![TimeFunction::Zero; d], c: vec![] }
    }

    // B^a h^b(t) = 0: with diagonal B this is B^a_i h^b_i(t) = 0 for every i.
    fn check_orthogonality(&self) -> Result<()> {
        let (m, d) = self.eigenvalues.dim();
        for a in 0..m {
            for i in 0..d {
                if self.eigenvalues[[a, i]] == 0.0 {
                    continue;
                }
                for bb in 0..m {
                    if !self.h[bb][i].is_identically_zero() {
                        return Err(Error::Validation(format!(
                            "B^{} h^{} != 0: B^{}_{} = {} but h^{}_{} is not identically zero",
                            a + 1,
                            bb + 1,
                            a + 1,
                            i + 1,
                            self.eigenvalues[[a, i]],
                            bb + 1,
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    // Im <h^a(t)|h^b(t)> = 0, checked on breakpoints, their neighbourhoods
    // and a uniform sample grid.
    fn check_reality(&self) -> Result<()> {
        let m = self.m();
        if m < 2 {
            return Ok(());
        }
        let mut times: Vec<f64> = Vec::new();
        let mut horizon: f64 = 10.0;
        for f in self.h.iter().flatten() {
            for bp in f.breakpoints() {
                horizon = horizon.max(bp.abs() * 1.1);
                times.extend([bp, bp - 1e-9, bp + 1e-9]);
            }
        }
        times.extend((0..=REALITY_SAMPLES).map(|j| horizon * j as f64 / REALITY_SAMPLES as f64));
        for &t in times.iter().filter(|t| **t >= 0.0) {
            let hv = self.h_at(t, t);
            for a in 0..m {
                for bb in a + 1..m {
                    let ip: Complex64 = (0..self.d()).map(|i| hv[[a, i]].conj() * hv[[bb, i]]).sum();
                    let scale = 1.0 + hv.row(a).iter().map(|z| z.norm_sqr()).sum::<f64>();
                    if ip.im.abs() > REALITY_TOL * scale {
                        return Err(Error::Validation(format!("Im<h^{}|h^{}> = {} at t = {t}", a + 1, bb + 1, ip.im)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.eigenvalues.nrows()
    }

    pub fn d(&self) -> usize {
        self.eigenvalues.ncols()
    }

    pub fn eigenvalues(&self) -> &Array2<f64> {
        &self.eigenvalues
    }

    pub fn h(&self) -> &[Vec<TimeFunction>] {
        &self.h
    }

    pub fn b(&self) -> &[TimeFunction] {
        &self.b
    }

    pub fn c(&self) -> &[TimeFunction] {
        &self.c
    }

    fn h_at(&self, t: f64, probe: f64) -> Array2<Complex64> {
        Array2::from_shape_fn((self.m(), self.d()), |(a, i)| self.h[a][i].eval_at(t, probe))
    }

    /// `h`, `b`, `c` at `t`, pieces selected by `probe`.
    pub fn values_at(&self, t: f64, probe: f64) -> ObservableValues {
        ObservableValues {
            h: self.h_at(t, probe),
            b: Array1::from_iter(self.b.iter().map(|f| f.eval_at(t, probe))),
            c: Array1::from_iter(self.c.iter().map(|f| f.eval_at(t, probe).re)),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.h.iter().flatten().chain(&self.b).chain(&self.c).flat_map(|f| f.breakpoints()).collect()
    }

    /// All functions shifted by `s` (`h_s(x) = h(x + s)` and so on).
    pub fn shifted(&self, s: f64) -> Self {
        ObservableSpec {
            eigenvalues: self.eigenvalues.clone(),
            h: self.h.iter().map(|row| row.iter().map(|f| f.shifted(s)).collect()).collect(),
            b: self.b.iter().map(|f| f.shifted(s)).collect(),
            c: self.c.iter().map(|f| f.shifted(s)).collect(),
        }
    }

    /// Midpoint-frozen copy on `grid` (see [`TimeFunction::frozen`]).
    pub fn frozen(&self, grid: &[f64]) -> Self {
        ObservableSpec {
            eigenvalues: self.eigenvalues.clone(),
            h: self.h.iter().map(|row| row.iter().map(|f| f.frozen(grid)).collect()).collect(),
            b: self.b.iter().map(|f| f.frozen(grid)).collect(),
            c: self.c.iter().map(|f| f.frozen(grid)).collect(),
        }
    }

    pub fn kind(&self, alpha: usize) -> ObservableKind {
        let eig = self.eigenvalues.row(alpha);
        let h_zero = self.h[alpha].iter().all(|f| f.is_identically_zero());
        let b_zero_on_support = eig.iter().zip(&self.b).all(|(&e, f)| e == 0.0 || f.is_identically_zero());
        let c_zero = self.c[alpha].is_identically_zero();
        let binary = eig.iter().all(|&e| e == 0.0 || e == 1.0) && eig.iter().any(|&e| e != 0.0);
        if binary && h_zero && b_zero_on_support && c_zero {
            ObservableKind::Counting
        } else if eig.iter().all(|&e| e == 0.0) && !h_zero {
            ObservableKind::Diffusive
        } else {
            ObservableKind::Mixed
        }
    }

    fn check_kappa(&self, kappa: &[f64]) -> Result<()> {
        if kappa.len() != self.m() {
            return Err(Error::Dimension(format!("kappa has {} components, expected {}", kappa.len(), self.m())));
        }
        Ok(())
    }
}

/// Diagonal of `S(kappa) = prod_a exp(i kappa_a B^a)`.
pub fn s_diag(eigenvalues: &Array2<f64>, kappa: &[f64]) -> Array1<Complex64> {
    Array1::from_iter((0..eigenvalues.ncols()).map(|i| {
        let phase: f64 = kappa.iter().enumerate().map(|(a, k)| k * eigenvalues[[a, i]]).sum();
        Complex64::from_polar(1.0, phase)
    }))
}

/// `r = i sum_a kappa_a h^a + (S - 1) b` from precomputed values.
pub fn r_from_values(s: &Array1<Complex64>, kappa: &[f64], vals: &ObservableValues) -> Array1<Complex64> {
    Array1::from_iter((0..s.len()).map(|i| {
        let hk: Complex64 = kappa.iter().enumerate().map(|(a, k)| vals.h[[a, i]] * *k).sum();
        I * hk + (s[i] - ONE) * vals.b[i]
    }))
}

/// `C = <b|(S-1)b> + i sum kappa_a c^a - 1/2 sum kappa_a <h^a|h^b> kappa_b`.
pub fn c_from_values(s: &Array1<Complex64>, kappa: &[f64], vals: &ObservableValues) -> Complex64 {
    let d = s.len();
    let bsb: Complex64 = (0..d).map(|i| vals.b[i].conj() * (s[i] - ONE) * vals.b[i]).sum();
    let kc: f64 = kappa.iter().zip(vals.c.iter()).map(|(k, c)| k * c).sum();
    // sum_ab k_a <h^a|h^b> k_b = || sum_a k_a h^a ||^2 for real kappa
    let quad: f64 =
        (0..d).map(|i| kappa.iter().enumerate().map(|(a, k)| vals.h[[a, i]] * *k).sum::<Complex64>().norm_sqr()).sum();
    bsb + I * kc - Complex64::new(0.5 * quad, 0.0)
}

/// Diagonal entries of `S(kappa)`.
pub fn s_of_kappa(spec: &ObservableSpec, kappa: &[f64]) -> Result<Array1<Complex64>> {
    spec.check_kappa(kappa)?;
    Ok(s_diag(spec.eigenvalues(), kappa))
}

pub fn r_of_k(spec: &ObservableSpec, kappa: &[f64], t: f64) -> Result<Array1<Complex64>> {
    spec.check_kappa(kappa)?;
    let s = s_diag(spec.eigenvalues(), kappa);
    Ok(r_from_values(&s, kappa, &spec.values_at(t, t)))
}

pub fn c_scalar(spec: &ObservableSpec, kappa: &[f64], t: f64) -> Result<Complex64> {
    spec.check_kappa(kappa)?;
    let s = s_diag(spec.eigenvalues(), kappa);
    Ok(c_from_values(&s, kappa, &spec.values_at(t, t)))
}

/// The `(d+1) x (d+1)` coefficient matrix of the characteristic-operator
/// QSDE; index 0 is the time channel.
pub fn g_coefficients(spec: &ObservableSpec, kappa: &[f64], t: f64) -> Result<Array2<Complex64>> {
    spec.check_kappa(kappa)?;
    let d = spec.d();
    let vals = spec.values_at(t, t);
    let s = s_diag(spec.eigenvalues(), kappa);
    let r = r_from_values(&s, kappa, &vals);
    let mut g = Array2::zeros((d + 1, d + 1));
    g[[0, 0]] = c_from_values(&s, kappa, &vals);
    for j in 0..d {
        g[[j + 1, 0]] = r[j];
        g[[0, j + 1]] = -r[j].conj() * s[j];
        g[[j + 1, j + 1]] = s[j] - ONE;
    }
    Ok(g)
}

/// Two photocounters on channels 1 and 2 and a homodyne detector on channel
/// 3 with `h^3_i(t) = delta_{i3} exp(i (theta3 - omega_c t))`; `b = c = 0`.
pub fn dpo_observables(theta3: f64, omega_c: f64) -> ObservableSpec {
    let d = crate::model::DPO_CHANNELS;
    let mut eig = Array2::zeros((3, d));
    eig[[0, 0]] = 1.0;
    eig[[1, 1]] = 1.0;
    let mut h = vec![vec![TimeFunction::Zero; d]; 3];
    h[2][2] = TimeFunction::exp(ONE, theta3, -omega_c);
    ObservableSpec::new(eig, h, vec![TimeFunction::Zero; d], vec![TimeFunction::Zero; 3])
        .expect("valid by construction")
}

/// Piecewise-constant test function `k(s) = sum_l 1_[t_{l-1}, t_l)(s) kappa^l`,
/// zero outside `[t_0, t_n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    m: usize,
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TestFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::Validation(format!("{} breakpoints for {} intervals", breakpoints.len(), values.len())));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation("test-function breakpoints must be finite and strictly increasing".into()));
        }
        if breakpoints[0] < 0.0 {
            return Err(Error::Validation("test-function breakpoints must be nonnegative".into()));
        }
        let m = values.first().map_or(0, Vec::len);
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::Dimension("every interval needs the same number of observables".into()));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Validation("test-function values must be finite".into()));
        }
        Ok(TestFunction { m, breakpoints, values })
    }

    /// `k = 0` for `m` observables.
    pub fn zero(m: usize) -> Self {
        TestFunction { m, breakpoints: vec![0.0], values: vec![] }
    }

    /// `k = kappa` on `[t0, t1)`.
    pub fn constant(kappa: Vec<f64>, t0: f64, t1: f64) -> Result<Self> {
        Self::new(vec![t0, t1], vec![kappa])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Zero test functions keep `m` from construction; a test function with
    /// no intervals reports the `m` it was built with.
    pub fn with_m(mut self, m: usize) -> Result<Self> {
        if !self.values.is_empty() && self.m != m {
            return Err(Error::Dimension(format!("test function has {} observables, expected {m}", self.m)));
        }
        self.m = m;
        Ok(self)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|x| *x == 0.0)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.eval_at(t)
    }

    /// Value on the interval containing `probe`.
    pub fn eval_at(&self, probe: f64) -> Vec<f64> {
        if self.values.is_empty() || probe < self.breakpoints[0] || probe >= *self.breakpoints.last().unwrap() {
            return vec![0.0; self.m];
        }
        let l = self.breakpoints.partition_point(|&b| b <= probe) - 1;
        self.values[l].clone()
    }

    /// `k_s(x) = k(x + s)`, truncated to `x >= 0`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        for (l, v) in self.values.iter().enumerate() {
            let (a, b) = (self.breakpoints[l] - s, self.breakpoints[l + 1] - s);
            if b <= 0.0 {
                continue;
            }
            let a = a.max(0.0);
            if bps.is_empty() {
                bps.push(a);
            }
            bps.push(b);
            vals.push(v.clone());
        }
        if bps.is_empty() {
            return Self::zero(self.m);
        }
        TestFunction { m: self.m, breakpoints: bps, values: vals }
    }

    /// Pointwise combination `x * self + y * other` on the merged breakpoints.
    pub fn combine(&self, x: f64, other: &TestFunction, y: f64) -> Result<Self> {
        if self.m != other.m {
            return Err(Error::Dimension(format!("combining test functions with m = {} and {}", self.m, other.m)));
        }
        let mut bps: Vec<f64> = self.breakpoints.iter().chain(other.breakpoints.iter()).copied().collect();
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bps.dedup();
        if bps.len() < 2 {
            return Ok(Self::zero(self.m));
        }
        let values = bps
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.eval_at(mid).iter().zip(other.eval_at(mid)).map(|(p, q)| x * p + y * q).collect()
            })
            .collect();
        Self::new(bps, values)
    }

    pub fn sub(&self, other: &TestFunction) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ZERO;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(rng: &mut ChaCha8Rng) -> ObservableSpec {
        // channels 0..2 diffusive, 2..5 counting-type
        let d = 5;
        let m = 3;
        let mut eig = Array2::zeros((m, d));
        for a in 0..m {
            for i in 2..d {
                eig[[a, i]] = rng.random::<f64>() * 2.0 - 1.0;
            }
        }
        let mut h = vec![vec![TimeFunction::Zero; d]; m];
        // real multiples of one common complex profile keep <h^a|h^b> real
        let omega = rng.random::<f64>();
        for (a, row) in h.iter_mut().enumerate() {
            for (i, f) in row.iter_mut().take(2).enumerate() {
                let coeff = (a as f64 + 1.0) * (i as f64 - 0.3);
                *f = TimeFunction::exp(Complex64::new(coeff, 0.0), 0.2 * i as f64, omega);
            }
        }
        let b = (0..d).map(|i| TimeFunction::exp(Complex64::new(0.3, -0.2 * i as f64), 0.1, 0.5)).collect();
        let c = (0..m).map(|a| TimeFunction::constant(Complex64::new(a as f64 - 1.0, 0.0))).collect();
        ObservableSpec::new(eig, h, b, c).unwrap()
    }

    #[test]
    fn s_is_identity_at_zero_and_unitary() {
        let spec = dpo_observables(0.3, 1.1);
        let s = s_of_kappa(&spec, &[0.0; 3]).unwrap();
        assert!(s.iter().all(|z| *z == ONE));
        let s = s_of_kappa(&spec, &[0.4, -1.2, 2.5]).unwrap();
        let expect = [Complex64::from_polar(1.0, 0.4), Complex64::from_polar(1.0, -1.2)];
        assert!((s[0] - expect[0]).norm() < 1e-15 && (s[1] - expect[1]).norm() < 1e-15);
        assert!(s.iter().skip(2).all(|z| *z == ONE));
        assert!(s.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));

        let null = ObservableSpec::new(
            Array2::zeros((1, 3)),
            vec![vec![TimeFunction::Zero; 3]],
            vec![TimeFunction::Zero; 3],
            vec![TimeFunction::Zero],
        )
        .unwrap();
        assert!(s_of_kappa(&null, &[7.0]).unwrap().iter().all(|z| *z == ONE));
    }

    #[test]
    fn r_examples() {
        let spec = dpo_observables(0.3, 1.1);
        assert!(r_of_k(&spec, &[0.0; 3], 0.7).unwrap().iter().all(|z| *z == ZERO));
        let (x, t) = (0.8, 0.45);
        let r = r_of_k(&spec, &[0.0, 0.0, x], t).unwrap();
        let expect = I * x * Complex64::from_polar(1.0, 0.3 - 1.1 * t);
        assert!((r[2] - expect).norm() < 1e-15);
        assert!(r.iter().enumerate().all(|(i, z)| i == 2 || *z == ZERO));
    }

    #[test]
    fn c_examples() {
        let spec = dpo_observables(0.3, 1.1);
        assert_eq!(c_scalar(&spec, &[0.0; 3], 0.2).unwrap(), ZERO);
        let c = c_scalar(&spec, &[0.9, -0.4, 1.7], 2.3).unwrap();
        assert!((c - Complex64::new(-1.7 * 1.7 / 2.0, 0.0)).norm() < 1e-14);

        let single = ObservableSpec::new(
            Array2::zeros((1, 1)),
            vec![vec![TimeFunction::exp(ONE, 0.0, 3.0)]],
            vec![TimeFunction::Zero],
            vec![TimeFunction::Zero],
        )
        .unwrap();
        let c = c_scalar(&single, &[1.3], 0.4).unwrap();
        assert!((c + Complex64::new(1.3 * 1.3 / 2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn g_examples() {
        let spec = dpo_observables(0.3, 1.1);
        assert!(g_coefficients(&spec, &[0.0; 3], 1.0).unwrap().iter().all(|z| *z == ZERO));
        let (x, t) = (0.6, 1.9);
        let g = g_coefficients(&spec, &[0.0, 0.0, x], t).unwrap();
        let ph = 0.3 - 1.1 * t;
        assert!((g[[3, 0]] - I * x * Complex64::from_polar(1.0, ph)).norm() < 1e-15);
        assert!((g[[0, 3]] - I * x * Complex64::from_polar(1.0, -ph)).norm() < 1e-15);
    }

    #[test]
    fn conjugation_and_r_identities_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = random_spec(&mut rng);
        for _ in 0..1000 {
            let kappa: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 8.0 - 4.0).collect();
            let minus: Vec<f64> = kappa.iter().map(|k| -k).collect();
            let t = rng.random::<f64>() * 5.0;
            let gp = g_coefficients(&spec, &kappa, t).unwrap();
            let gm = g_coefficients(&spec, &minus, t).unwrap();
            for i in 0..gp.nrows() {
                for j in 0..gp.ncols() {
                    assert!((gm[[i, j]].conj() - gp[[j, i]]).norm() < 1e-13);
                }
            }
            let s = s_of_kappa(&spec, &kappa).unwrap();
            assert!(s.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
            let r = r_of_k(&spec, &kappa, t).unwrap();
            let rm = r_of_k(&spec, &minus, t).unwrap();
            for i in 0..spec.d() {
                assert!((s[i].conj() * r[i] + rm[i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_hypothesis_violations() {
        // B^1 h^1 != 0
        let mut eig = Array2::zeros((1, 2));
        eig[[0, 0]] = 1.0;
        let h = vec![vec![TimeFunction::constant(ONE), TimeFunction::Zero]];
        let err = ObservableSpec::new(eig, h, vec![TimeFunction::Zero; 2], vec![TimeFunction::Zero]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        // Im <h^1|h^2> != 0
        let h = vec![vec![TimeFunction::constant(ONE)], vec![TimeFunction::constant(I)]];
        let err = ObservableSpec::new(Array2::zeros((2, 1)), h, vec![TimeFunction::Zero], vec![TimeFunction::Zero; 2])
            .unwrap_err();
        assert!(err.to_string().contains("Im<h^1|h^2>"), "{err}");
        // time-dependent violation appearing only later
        let h = vec![vec![TimeFunction::constant(ONE)], vec![TimeFunction::exp(ONE, 0.0, 0.5)]];
        assert!(ObservableSpec::new(Array2::zeros((2, 1)), h, vec![TimeFunction::Zero], vec![TimeFunction::Zero; 2])
            .is_err());
        // complex c
        let err = ObservableSpec::new(
            Array2::zeros((1, 1)),
            vec![vec![TimeFunction::Zero]],
            vec![TimeFunction::Zero],
            vec![TimeFunction::constant(I)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn kinds() {
        let spec = dpo_observables(0.0, 1.0);
        assert_eq!(spec.kind(0), ObservableKind::Counting);
        assert_eq!(spec.kind(1), ObservableKind::Counting);
        assert_eq!(spec.kind(2), ObservableKind::Diffusive);
        let mut eig = Array2::zeros((1, 1));
        eig[[0, 0]] = 1.0;
        let mixed = ObservableSpec::new(
            eig,
            vec![vec![TimeFunction::Zero]],
            vec![TimeFunction::constant(ONE)],
            vec![TimeFunction::Zero],
        )
        .unwrap();
        assert_eq!(mixed.kind(0), ObservableKind::Mixed);
    }

    #[test]
    fn test_function_eval_shift_and_combine() {
        let k = TestFunction::new(vec![0.0, 1.0, 2.5], vec![vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        assert_eq!(k.eval(0.5), vec![1.0, 2.0]);
        assert_eq!(k.eval(1.0), vec![-1.0, 0.5]);
        assert_eq!(k.eval(2.5), vec![0.0, 0.0]);
        let s = k.shifted(0.75);
        assert_eq!(s.breakpoints(), &[0.0, 0.25, 1.75]);
        assert_eq!(s.eval(0.1), vec![1.0, 2.0]);
        assert_eq!(s.eval(1.0), vec![-1.0, 0.5]);
        assert!(k.shifted(3.0).is_zero());
        let q = TestFunction::constant(vec![0.5, 0.5], 0.5, 2.0).unwrap();
        let diff = k.sub(&q).unwrap();
        assert_eq!(diff.eval(0.2), vec![1.0, 2.0]);
        assert_eq!(diff.eval(0.7), vec![0.5, 1.5]);
        assert_eq!(diff.eval(2.2), vec![-1.0, 0.5]);
        assert!(TestFunction::new(vec![1.0, 1.0], vec![vec![0.0]]).is_err());
        assert!(TestFunction::zero(3).is_zero());
    }
}
