//! System-side model data: `K`, the channel operators `R_i` and the scalar
//! scattering matrix `S`, plus the built-in degenerate parametric oscillator.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{
    ladder_a, ladder_a_dag, ladder_b, ladder_b_dag, StateVector, SystemOperator, TruncatedSpace, I, ONE, ZERO,
};

/// Relative tolerance for the amplitude constraints of [`DpoParams`].
pub const AMPLITUDE_TOL: f64 = 1e-12;

/// Tolerance used by [`ModelSpec::new`] on the unitarity of `S`.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Channel count of the parametric oscillator model.
pub const DPO_CHANNELS: usize = 8;

/// Channel carrying the pump laser in the parametric oscillator (0-based; "channel 4").
pub const DPO_LASER_CHANNEL: usize = 3;

#[derive(Clone, Debug)]
pub struct ModelSpec {
    space: TruncatedSpace,
    k: SystemOperator,
    channels: Vec<SystemOperator>,
    scattering: Array2<Complex64>,
    label: String,
}

impl ModelSpec {
    /// Assemble a model. `scattering` must be a `d x d` unitary with
    /// `d = channels.len()`.
    pub fn new(
        k: SystemOperator,
        channels: Vec<SystemOperator>,
        scattering: Array2<Complex64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let space = k.space();
        let d = channels.len();
        if let Some(bad) = channels.iter().position(|r| r.space() != space) {
            return Err(Error::Dimension(format!("channel {} lives on a different truncation than K", bad + 1)));
        }
        if scattering.dim() != (d, d) {
            return Err(Error::Dimension(format!("scattering matrix {:?} for {d} channels", scattering.dim())));
        }
        let dev = scattering_deviation(&scattering);
        if dev > UNITARITY_TOL {
            return Err(Error::Validation(format!("scattering matrix is not unitary (deviation {dev:.3e})")));
        }
        Ok(ModelSpec { space, k, channels, scattering, label: label.into() })
    }

    /// Model with `S = identity`.
    pub fn with_identity_scattering(
        k: SystemOperator,
        channels: Vec<SystemOperator>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let d = channels.len();
        Self::new(k, channels, Array2::eye(d).mapv(|x: f64| Complex64::new(x, 0.0)), label)
    }

    /// Dimension-one model with `K = 0`, `R_i = 0`, `S = identity`: only the
    /// field is left.
    pub fn trivial(d: usize) -> Self {
        let space = TruncatedSpace::new(0, 0);
        Self::with_identity_scattering(SystemOperator::zeros(space), vec![SystemOperator::zeros(space); d], "trivial")
            .expect("consistent by construction")
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn d(&self) -> usize {
        self.channels.len()
    }

    pub fn k(&self) -> &SystemOperator {
        &self.k
    }

    pub fn channels(&self) -> &[SystemOperator] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> Result<&SystemOperator> {
        self.channels.get(i).ok_or_else(|| Error::Index(format!("channel {i} of {}", self.d())))
    }

    pub fn scattering(&self) -> &Array2<Complex64> {
        &self.scattering
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_k(&self, k: SystemOperator) -> Result<Self> {
        Self::new(k, self.channels.clone(), self.scattering.clone(), self.label.clone())
    }

    pub fn with_channels(&self, channels: Vec<SystemOperator>, scattering: Array2<Complex64>) -> Result<Self> {
        Self::new(self.k.clone(), channels, scattering, self.label.clone())
    }
}

/// Max entrywise deviation of `S†S` and `SS†` from the identity.
pub fn scattering_deviation(s: &Array2<Complex64>) -> f64 {
    let sh = s.t().mapv(|z| z.conj());
    let eye = Array2::<Complex64>::eye(s.nrows());
    let a = (&sh.dot(s) - &eye).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let b = (&s.dot(&sh) - &eye).iter().map(|z| z.norm()).fold(0.0, f64::max);
    a.max(b)
}

pub fn check_s_unitary(model: &ModelSpec) -> f64 {
    scattering_deviation(model.scattering())
}

/// `N_j = -sum_k R_k^dagger S_kj` (0-based `j`).
pub fn derived_n(model: &ModelSpec, j: usize) -> Result<SystemOperator> {
    if j >= model.d() {
        return Err(Error::Index(format!("channel {j} of {}", model.d())));
    }
    let mut acc = SystemOperator::zeros(model.space());
    for (k, r) in model.channels().iter().enumerate() {
        let s = model.scattering()[[k, j]];
        if s != ZERO {
            acc = acc.add(&r.adjoint().scale(-s))?;
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipativityReport {
    pub max_residual: f64,
    pub interior_dim: usize,
    pub vectors_checked: usize,
}

fn dissipativity_residual(model: &ModelSpec, u: &StateVector) -> Result<f64> {
    let ku = model.k().apply_to_vector(u)?;
    let re_kuu: f64 = ku.iter().zip(u.iter()).map(|(x, y)| (y.conj() * x).re).sum();
    let mut loss = 0.0;
    for r in model.channels() {
        loss += r.apply_to_vector(u)?.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok((2.0 * re_kuu + loss).abs())
}

/// Residual of `2 Re<Ku|u> = -sum_k ||R_k u||^2` on the interior basis vectors
/// (`guard` levels away from both cutoffs) and on `n_random` random unit
/// vectors supported there.
pub fn check_dissipativity(model: &ModelSpec, guard: usize, n_random: usize, seed: u64) -> Result<DissipativityReport> {
    let space = model.space();
    let interior = space.interior(guard);
    if interior.is_empty() {
        return Err(Error::Domain(format!("guard {guard} leaves no interior on {space}")));
    }
    let mut worst = 0.0f64;
    for &idx in &interior {
        let mut u = StateVector::zeros(space.dim());
        u[idx] = ONE;
        worst = worst.max(dissipativity_residual(model, &u)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        let mut u = StateVector::zeros(space.dim());
        for &idx in &interior {
            u[idx] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        u.mapv_inplace(|z| z / norm);
        worst = worst.max(dissipativity_residual(model, &u)?);
    }
    Ok(DissipativityReport {
        max_residual: worst,
        interior_dim: interior.len(),
        vectors_checked: interior.len() + n_random,
    })
}

/// Physical constants and channel amplitudes of the degenerate parametric
/// oscillator.
#[derive(Clone, Debug, PartialEq)]
pub struct DpoParams {
    pub omega_c: f64,
    pub g: f64,
    pub kappa: f64,
    pub nbar: f64,
    pub kappa_p: f64,
    pub nbar_p: f64,
    pub alpha: [Complex64; 4],
    pub beta: [Complex64; 4],
    pub theta3: f64,
    pub lambda_drive: Complex64,
}

impl DpoParams {
    /// Amplitudes from splitting fractions: `alpha_i = sqrt(2 kappa (nbar+1)) c_i`
    /// for `i = 1..3` and `alpha_4 = sqrt(2 kappa nbar)`, likewise for `beta`.
    /// The splits must satisfy `sum |c_i|^2 = 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_splits(
        omega_c: f64,
        g: f64,
        kappa: f64,
        nbar: f64,
        kappa_p: f64,
        nbar_p: f64,
        alpha_split: [Complex64; 3],
        beta_split: [Complex64; 3],
        theta3: f64,
        lambda_drive: Complex64,
    ) -> Result<Self> {
        for (name, split) in [("alpha", &alpha_split), ("beta", &beta_split)] {
            let total: f64 = split.iter().map(|z| z.norm_sqr()).sum();
            if (total - 1.0).abs() > AMPLITUDE_TOL {
                return Err(Error::Validation(format!(
                    "{name} splitting fractions have sum |c|^2 = {total}, expected 1"
                )));
            }
        }
        let sa = (2.0 * kappa * (nbar + 1.0)).sqrt();
        let sb = (2.0 * kappa_p * (nbar_p + 1.0)).sqrt();
        let params = DpoParams {
            omega_c,
            g,
            kappa,
            nbar,
            kappa_p,
            nbar_p,
            alpha: [
                alpha_split[0] * sa,
                alpha_split[1] * sa,
                alpha_split[2] * sa,
                Complex64::new((2.0 * kappa * nbar).sqrt(), 0.0),
            ],
            beta: [
                beta_split[0] * sb,
                beta_split[1] * sb,
                beta_split[2] * sb,
                Complex64::new((2.0 * kappa_p * nbar_p).sqrt(), 0.0),
            ],
            theta3,
            lambda_drive,
        };
        params.validate()?;
        Ok(params)
    }

    /// Check every constraint, listing all that fail.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let positive = [("omega_c", self.omega_c), ("kappa", self.kappa), ("kappa_p", self.kappa_p)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                bad.push(format!("{name} = {v} must be > 0"));
            }
        }
        for (name, v) in [("nbar", self.nbar), ("nbar_p", self.nbar_p)] {
            if !(v >= 0.0) || !v.is_finite() {
                bad.push(format!("{name} = {v} must be >= 0"));
            }
        }
        if !self.g.is_finite() {
            bad.push(format!("g = {} must be finite", self.g));
        }
        let close = |lhs: f64, rhs: f64| (lhs - rhs).abs() <= AMPLITUDE_TOL * rhs.abs().max(1.0);
        let a123: f64 = self.alpha[..3].iter().map(|z| z.norm_sqr()).sum();
        let b123: f64 = self.beta[..3].iter().map(|z| z.norm_sqr()).sum();
        let checks = [
            ("|alpha1|^2+|alpha2|^2+|alpha3|^2 = 2 kappa (nbar+1)", a123, 2.0 * self.kappa * (self.nbar + 1.0)),
            ("|alpha4|^2 = 2 kappa nbar", self.alpha[3].norm_sqr(), 2.0 * self.kappa * self.nbar),
            ("|beta1|^2+|beta2|^2+|beta3|^2 = 2 kappa_p (nbar_p+1)", b123, 2.0 * self.kappa_p * (self.nbar_p + 1.0)),
            ("|beta4|^2 = 2 kappa_p nbar_p", self.beta[3].norm_sqr(), 2.0 * self.kappa_p * self.nbar_p),
        ];
        for (name, lhs, rhs) in checks {
            if !close(lhs, rhs) {
                bad.push(format!("{name} violated: {lhs} vs {rhs}"));
            }
        }
        if self.lambda_drive != ZERO && self.beta[1] == ZERO {
            bad.push("beta2 must be nonzero when the laser drive is on".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad.join("; ")))
        }
    }
}

/// `H_0 = omega a†a + 2 omega b†b + (i g / 2)(a†² b - b† a²)` built from the
/// truncated ladder operators.
pub fn dpo_hamiltonian(params: &DpoParams, space: TruncatedSpace) -> SystemOperator {
    let w = params.omega_c;
    let free = SystemOperator::diagonal(space, |idx| {
        let (n, m) = space.levels(idx);
        Complex64::new(w * n as f64 + 2.0 * w * m as f64, 0.0)
    });
    let ad = ladder_a_dag(space);
    let a = ladder_a(space);
    let pump_to_pair = ad.matmul(&ad).and_then(|x| x.matmul(&ladder_b(space))).expect("same space");
    let pair_to_pump = ladder_b_dag(space).matmul(&a).and_then(|x| x.matmul(&a)).expect("same space");
    let coupling = pump_to_pair.sub(&pair_to_pump).expect("same space").scale(I * (params.g / 2.0));
    free.add(&coupling).expect("same space")
}

/// Parametric oscillator with `K` taken entrywise from the closed-form
/// action on `e_{n,m}` (restricted to the truncation), eight channels
/// `R_1 = beta1 b, R_2 = alpha1 a, R_3 = alpha2 a, R_4 = beta2 b, R_5 = beta3 b,
/// R_6 = alpha3 a, R_7 = beta4 b†, R_8 = alpha4 a†` and `S = identity`.
pub fn dpo_model(params: &DpoParams, space: TruncatedSpace) -> Result<ModelSpec> {
    params.validate()?;
    let DpoParams { omega_c: w, g, kappa, nbar, kappa_p, nbar_p, .. } = *params;
    let mut trip = Vec::new();
    for idx in 0..space.dim() {
        let (n, m) = space.levels(idx);
        let (nf, mf) = (n as f64, m as f64);
        let diag = Complex64::new(
            kappa * nbar + kappa_p * nbar_p + kappa * (2.0 * nbar + 1.0) * nf + kappa_p * (2.0 * nbar_p + 1.0) * mf,
            w * nf + 2.0 * w * mf,
        );
        trip.push((idx, idx, -diag));
        // (g/2) sqrt(n(n-1)(m+1)) u_{n-2,m+1}
        if n >= 2 {
            if let Some(col) = space.index(n - 2, m + 1) {
                trip.push((idx, col, Complex64::new(0.5 * g * (nf * (nf - 1.0) * (mf + 1.0)).sqrt(), 0.0)));
            }
        }
        // -(g/2) sqrt(m(n+1)(n+2)) u_{n+2,m-1}
        if m >= 1 {
            if let Some(col) = space.index(n + 2, m - 1) {
                trip.push((idx, col, Complex64::new(-0.5 * g * (mf * (nf + 1.0) * (nf + 2.0)).sqrt(), 0.0)));
            }
        }
    }
    let k = SystemOperator::from_triplets(space, trip)?;
    let (a, ad, b, bd) = (ladder_a(space), ladder_a_dag(space), ladder_b(space), ladder_b_dag(space));
    let [a1, a2, a3, a4] = params.alpha;
    let [b1, b2, b3, b4] = params.beta;
    let channels =
        vec![b.scale(b1), a.scale(a1), a.scale(a2), b.scale(b2), b.scale(b3), a.scale(a3), bd.scale(b4), ad.scale(a4)];
    ModelSpec::with_identity_scattering(k, channels, "degenerate parametric oscillator")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{number_a, number_b};

    pub(crate) fn params(g: f64, nbar: f64, nbar_p: f64) -> DpoParams {
        let s = 1.0 / 3f64.sqrt();
        let split = [Complex64::new(s, 0.0), Complex64::new(0.0, s), Complex64::new(-s, 0.0)];
        DpoParams::from_splits(1.3, g, 0.7, nbar, 0.9, nbar_p, split, split, 0.4, Complex64::new(0.5, 0.2)).unwrap()
    }

    #[test]
    fn k_matrix_elements() {
        let p = params(0.8, 0.3, 0.2);
        let model = dpo_model(&p, TruncatedSpace::new(6, 4)).unwrap();
        let k = model.k();
        let up = k.element((2, 0), (0, 1));
        assert!((up - Complex64::new(0.8 / 2f64.sqrt(), 0.0)).norm() < 1e-15);
        let d = k.element((0, 0), (0, 0));
        assert!((d + Complex64::new(0.7 * 0.3 + 0.9 * 0.2, 0.0)).norm() < 1e-15);
        // anti-Hermitian coupling block
        assert!((k.element((0, 1), (2, 0)) + up.conj()).norm() < 1e-15);
    }

    #[test]
    fn k_sparsity_pattern() {
        let p = params(0.8, 0.3, 0.2);
        let space = TruncatedSpace::new(7, 4);
        let model = dpo_model(&p, space).unwrap();
        for (r, c, _) in model.k().triplets() {
            let (n, m) = space.levels(r);
            let (n2, m2) = space.levels(c);
            let (dn, dm) = (n2 as i64 - n as i64, m2 as i64 - m as i64);
            assert!(matches!((dn, dm), (0, 0) | (-2, 1) | (2, -1)), "unexpected entry {n},{m} <- {n2},{m2}");
        }
    }

    #[test]
    fn linear_model_k() {
        let p = params(0.0, 0.0, 0.0);
        let space = TruncatedSpace::new(5, 3);
        let model = dpo_model(&p, space).unwrap();
        let h0 = dpo_hamiltonian(&p, space);
        assert!(h0.triplets().all(|(r, c, _)| r == c));
        let expect = h0
            .scale(-I)
            .sub(&number_a(space).scale(Complex64::new(p.kappa, 0.0)))
            .unwrap()
            .sub(&number_b(space).scale(Complex64::new(p.kappa_p, 0.0)))
            .unwrap();
        assert!(model.k().max_abs_diff(&expect).unwrap() < 1e-14);
        // no n <-> m mixing
        assert!(model.k().triplets().all(|(r, c, _)| r == c));
    }

    #[test]
    fn hamiltonian_plus_loss_reproduces_k_in_interior() {
        let p = params(0.6, 0.4, 0.1);
        let space = TruncatedSpace::new(8, 5);
        let model = dpo_model(&p, space).unwrap();
        let mut expect = dpo_hamiltonian(&p, space).scale(-I);
        for r in model.channels() {
            expect = expect.sub(&r.adjoint().matmul(r).unwrap().scale(Complex64::new(0.5, 0.0))).unwrap();
        }
        let diff = model.k().sub(&expect).unwrap();
        for (r, c, v) in diff.triplets() {
            if !space.in_guard_band(r, 2) && !space.in_guard_band(c, 2) {
                assert!(v.norm() < 1e-12, "{v} at {r},{c}");
            }
        }
    }

    #[test]
    fn dissipativity_on_dpo() {
        let p = params(0.8, 0.3, 0.2);
        let model = dpo_model(&p, TruncatedSpace::new(10, 6)).unwrap();
        let rep = check_dissipativity(&model, 2, 8, 7).unwrap();
        assert!(rep.max_residual < 1e-10, "{}", rep.max_residual);
        assert_eq!(rep.interior_dim, 9 * 5);
    }

    #[test]
    fn dissipativity_without_channels_is_nonzero() {
        let p = params(0.8, 0.3, 0.2);
        let model = dpo_model(&p, TruncatedSpace::new(6, 4)).unwrap();
        let stripped = model.with_channels(vec![], Array2::zeros((0, 0))).unwrap();
        let rep = check_dissipativity(&stripped, 2, 0, 0).unwrap();
        // basis vector e_{0,0}: 2 Re<Ku|u> = -2 (kappa nbar + kappa_p nbar_p)
        assert!(rep.max_residual > 2.0 * (0.7 * 0.3 + 0.9 * 0.2) - 1e-12);
    }

    #[test]
    fn dissipativity_hamiltonian_case() {
        let p = params(0.8, 0.3, 0.2);
        let space = TruncatedSpace::new(6, 4);
        let k = dpo_hamiltonian(&p, space).scale(-I);
        let model = ModelSpec::with_identity_scattering(k, vec![], "hamiltonian").unwrap();
        let rep = check_dissipativity(&model, 2, 16, 1).unwrap();
        assert!(rep.max_residual < 1e-14, "{}", rep.max_residual);
    }

    #[test]
    fn empty_interior_is_domain_error() {
        let p = params(0.8, 0.3, 0.2);
        let model = dpo_model(&p, TruncatedSpace::new(3, 1)).unwrap();
        assert!(matches!(check_dissipativity(&model, 2, 0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn amplitude_constraints_rejected() {
        let mut p = params(0.8, 0.3, 0.2);
        p.alpha[0] *= 1.01;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("alpha1"), "{err}");
        let mut p = params(0.8, 0.3, 0.2);
        p.beta[1] = ZERO;
        p.beta[0] = Complex64::new((2.0 * 0.9 * 1.2 - p.beta[2].norm_sqr()).sqrt(), 0.0);
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("beta2"), "{err}");
        assert!(dpo_model(&p, TruncatedSpace::new(2, 2)).is_err());
    }

    #[test]
    fn unitarity_deviation() {
        let p = params(0.8, 0.3, 0.2);
        let model = dpo_model(&p, TruncatedSpace::new(2, 2)).unwrap();
        assert_eq!(check_s_unitary(&model), 0.0);
        let phases =
            Array2::from_diag(&ndarray::Array1::from_iter((0..3).map(|k| Complex64::from_polar(1.0, 0.7 * k as f64))));
        assert!(scattering_deviation(&phases) < 1e-15);
        let bad = Array2::from_shape_fn((3, 3), |(i, j)| Complex64::new(0.3 * i as f64 + 0.1, 0.2 * j as f64));
        assert!(scattering_deviation(&bad) > 0.1);
        let space = TruncatedSpace::new(1, 0);
        let a = ladder_a(space);
        assert!(matches!(ModelSpec::new(a.clone(), vec![a.clone(); 3], bad, "x"), Err(Error::Validation(_))));
    }

    #[test]
    fn derived_n_examples() {
        let p = params(0.8, 0.3, 0.2);
        let space = TruncatedSpace::new(4, 3);
        let model = dpo_model(&p, space).unwrap();
        for j in 0..8 {
            let n = derived_n(&model, j).unwrap();
            assert!(n.max_abs_diff(&model.channels()[j].adjoint().scale(-ONE)).unwrap() < 1e-15);
        }
        let n2 = derived_n(&model, 1).unwrap();
        let expect = ladder_a_dag(space).scale(-p.alpha[0].conj());
        assert!(n2.max_abs_diff(&expect).unwrap() < 1e-15);
        assert!(matches!(derived_n(&model, 8), Err(Error::Index(_))));

        let theta = 0.9;
        let s = Array2::from_elem((1, 1), Complex64::from_polar(1.0, theta));
        let single = ModelSpec::new(SystemOperator::zeros(space), vec![ladder_a(space)], s, "one").unwrap();
        let n = derived_n(&single, 0).unwrap();
        let expect = ladder_a_dag(space).scale(-Complex64::from_polar(1.0, theta));
        assert!(n.max_abs_diff(&expect).unwrap() < 1e-15);
    }
}
