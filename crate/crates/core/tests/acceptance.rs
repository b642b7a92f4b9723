//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! value, its threshold and the wall time. Runs without the libtest
//! harness so the lines always appear in `cargo test` output.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use contmeas::evolution::{composition_check, evolve, evolve_many, EvolutionConfig, Method};
use contmeas::fock::{expectation, hermitian_eigenvalues, ladder_b, trace, TruncatedSpace};
use contmeas::measurement::dpo_observables;
use contmeas::oracle::{dense_expm_propagate, duality_check};
use contmeas::statistics::{invert_counting, invert_homodyne, joint_charfunc, linspace, IncrementAxis, IncrementGrid};
use contmeas::{
    apply_generator, check_dissipativity, dpo_model, DpoParams, FieldProfile, GeneratorContext, ModelSpec,
    ObservableSpec, SystemOperator, TestFunction, TimeFunction,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn below(value: f64, tol: f64, what: &str) -> Verdict {
    Verdict { pass: value < tol, detail: format!("{what} {value:.3e} (tol {tol:.0e})") }
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Verdict,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "dissipativity identity", budget: Duration::from_secs(5), run: dissipativity },
        Criterion { id: 2, name: "master-equation equivalence", budget: Duration::from_secs(10), run: master_equation },
        Criterion { id: 3, name: "trace preservation", budget: Duration::from_secs(60), run: trace_preservation },
        Criterion { id: 4, name: "contractivity", budget: Duration::from_secs(300), run: contractivity },
        Criterion { id: 5, name: "positive-definite Gram matrices", budget: Duration::from_secs(600), run: gram_psd },
        Criterion {
            id: 6,
            name: "composition and shift covariance",
            budget: Duration::from_secs(120),
            run: composition,
        },
        Criterion { id: 7, name: "Poisson oracle", budget: Duration::from_secs(30), run: poisson },
        Criterion { id: 8, name: "Gaussian oracle", budget: Duration::from_secs(30), run: gaussian },
        Criterion { id: 9, name: "brute-force equivalence", budget: Duration::from_secs(60), run: brute_force },
        Criterion { id: 10, name: "linear-model analytics", budget: Duration::from_secs(60), run: linear_model },
        Criterion { id: 11, name: "convergence order", budget: Duration::from_secs(300), run: convergence_order },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || c.id.to_string() == *f) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|_| Verdict { pass: false, detail: "panicked".into() });
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let pass = verdict.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "{} [{:>2}] {}: {}; {:.2} s (budget {} s{})",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            verdict.detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn dissipativity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let space = TruncatedSpace::new(12, 8);
    let mut worst = 0.0f64;
    for draw in 0..20 {
        let p = random_dpo(&mut rng);
        let model = dpo_model(&p, space).unwrap();
        let rep = check_dissipativity(&model, 2, 16, draw).unwrap();
        worst = worst.max(rep.max_residual);
    }
    below(worst, 1e-10, "max residual over 20 parameter draws")
}

/// Right-hand side of the oscillator master equation, coded directly from
/// dense ladder matrices. `a a^dag` and `b b^dag` are their compressions to
/// the truncation, `diag(n + 1)` and `diag(m + 1)`.
fn master_rhs(p: &DpoParams, space: TruncatedSpace, t: f64, rho: &Array2<C>) -> Array2<C> {
    let dim = space.dim();
    let zero = Array2::<C>::zeros((dim, dim));
    let (mut a, mut b) = (zero.clone(), zero.clone());
    let (mut na, mut na1, mut nb, mut nb1) = (zero.clone(), zero.clone(), zero.clone(), zero.clone());
    for col in 0..dim {
        let (n, m) = space.levels(col);
        if n > 0 {
            a[[space.index(n - 1, m).unwrap(), col]] = C::new((n as f64).sqrt(), 0.0);
        }
        if m > 0 {
            b[[space.index(n, m - 1).unwrap(), col]] = C::new((m as f64).sqrt(), 0.0);
        }
        na[[col, col]] = C::new(n as f64, 0.0);
        na1[[col, col]] = C::new(n as f64 + 1.0, 0.0);
        nb[[col, col]] = C::new(m as f64, 0.0);
        nb1[[col, col]] = C::new(m as f64 + 1.0, 0.0);
    }
    let dag = |x: &Array2<C>| x.t().mapv(|z| z.conj());
    let (ad, bd) = (dag(&a), dag(&b));
    let i = C::new(0.0, 1.0);
    let w = p.omega_c;
    let h0 = na.mapv(|z| z * w)
        + nb.mapv(|z| z * 2.0 * w)
        + (ad.dot(&ad).dot(&b) - bd.dot(&a).dot(&a)).mapv(|z| z * i * (p.g / 2.0));
    let lam = p.lambda_drive * (-2.0 * i * w * t).exp();
    let h = h0 + bd.mapv(|z| z * lam) + b.mapv(|z| z * lam.conj());
    let comm = h.dot(rho) - rho.dot(&h);
    let dissip = |x: &Array2<C>, xd: &Array2<C>, xdx: &Array2<C>| {
        x.dot(rho).dot(xd).mapv(|z| z * 2.0) - xdx.dot(rho) - rho.dot(xdx)
    };
    comm.mapv(|z| -i * z)
        + dissip(&a, &ad, &na).mapv(|z| z * p.kappa * (p.nbar + 1.0))
        + dissip(&ad, &a, &na1).mapv(|z| z * p.kappa * p.nbar)
        + dissip(&bd, &b, &nb1).mapv(|z| z * p.kappa_p * p.nbar_p)
        + dissip(&b, &bd, &nb).mapv(|z| z * p.kappa_p * (p.nbar_p + 1.0))
}

fn master_equation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let space = TruncatedSpace::new(12, 8);
    let p = random_dpo(&mut rng);
    let ctx = dpo_context(&p, space, f64::INFINITY, TestFunction::zero(3));
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rho = random_hermitian(&mut rng, space.dim());
        let t = 5.0 * rng.random::<f64>();
        let got = apply_generator(&ctx, t, &rho).unwrap();
        worst = worst.max(max_abs_diff(&got, &master_rhs(&p, space, t, &rho)));
    }
    below(worst, 1e-12, "max entrywise deviation over 100 Hermitian inputs")
}

fn trace_preservation() -> Verdict {
    let p = mild_dpo(0.2, 0.01);
    let space = TruncatedSpace::new(12, 8);
    let ctx = dpo_context(&p, space, f64::INFINITY, TestFunction::zero(3));
    let t_end = 3.0 / p.kappa;
    let res = evolve(&ctx, &vacuum(space), &EvolutionConfig::new(t_end).with_dt(0.01)).unwrap();
    let leak = res.max_leakage().unwrap_or(0.0);
    let dev = res.phi.iter().map(|z| (z - 1.0).norm()).fold(0.0, f64::max);
    let mut v = below(dev, 1e-7, "max |Phi(t) - 1|");
    v.pass &= leak < 1e-6;
    v.detail.push_str(&format!(", leakage {leak:.2e} (required < 1e-6)"));
    v
}

fn contractivity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = mild_dpo(0.5, 0.05);
    let space = TruncatedSpace::new(8, 4);
    let t = 2.0;
    let ctx = dpo_context(&p, space, f64::INFINITY, TestFunction::zero(3));
    let ks: Vec<TestFunction> = (0..30).map(|_| random_k(&mut rng, 3, t, 4, 3.0)).collect();
    let runs = evolve_many(&ctx, &ks, &vacuum(space), &EvolutionConfig::new(t).with_dt(0.005)).unwrap();
    let worst = runs.iter().flat_map(|r| r.phi.iter().map(|z| z.norm())).fold(0.0, f64::max);
    Verdict { pass: worst <= 1.0 + 1e-9, detail: format!("max |Phi_t(k)| {worst:.12} over 30 draws (bound 1 + 1e-9)") }
}

fn gram_psd() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = mild_dpo(0.5, 0.05);
    let space = TruncatedSpace::new(6, 3);
    let t = 1.5;
    let ctx = dpo_context(&p, space, f64::INFINITY, TestFunction::zero(3));
    let rho0 = vacuum(space);
    let cfg = EvolutionConfig::new(t).with_dt(0.005);
    let mut worst = f64::INFINITY;
    for _ in 0..10 {
        let set: Vec<TestFunction> = (0..5).map(|_| random_k(&mut rng, 3, t, 3, 2.0)).collect();
        let diffs: Vec<TestFunction> = (0..25).map(|ij| set[ij / 5].sub(&set[ij % 5]).unwrap()).collect();
        let runs = evolve_many(&ctx, &diffs, &rho0, &cfg).unwrap();
        let gram = Array2::from_shape_fn((5, 5), |(i, j)| runs[5 * i + j].final_phi());
        worst = worst.min(hermitian_eigenvalues(&gram)[0]);
    }
    Verdict { pass: worst >= -1e-7, detail: format!("smallest eigenvalue {worst:.3e} over 10 sets (bound -1e-7)") }
}

/// Oscillator problem with a test function whose pieces, and the split
/// point, divide into RK4 steps that halve exactly when `dt = 0.02` halves.
fn composition_problem() -> (GeneratorContext, ndarray::Array2<C>, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = mild_dpo(0.5, 0.05);
    let space = TruncatedSpace::new(6, 3);
    // pieces [0, 0.6), [0.6, 1.312), [1.312, 2.012); split at 0.916
    let bps = vec![0.0, 0.6, 1.312, 2.012];
    let values = (0..3).map(|_| (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()).collect();
    let k = TestFunction::new(bps, values).unwrap();
    let ctx = dpo_context(&p, space, f64::INFINITY, k);
    (ctx, random_density(&mut rng, space.dim()), 0.916, 2.012)
}

fn composition() -> Verdict {
    let (ctx, rho0, s, t) = composition_problem();
    let cfg = EvolutionConfig::new(t).with_method(Method::Adaptive { rtol: 1e-8, atol: 1e-12 });
    let res = composition_check(&ctx, &rho0, s, t, &cfg).unwrap();
    below(res, 1e-7, "composition residual at rtol 1e-8")
}

fn poisson() -> Verdict {
    let mu: f64 = 2.0;
    let spec = ObservableSpec::new(
        Array2::from_elem((1, 1), 1.0),
        vec![vec![TimeFunction::Zero]],
        vec![TimeFunction::Zero],
        vec![TimeFunction::Zero],
    )
    .unwrap();
    let field = FieldProfile::new(vec![TimeFunction::constant(C::new(mu.sqrt(), 0.0))], Some(1.0)).unwrap();
    let ctx =
        GeneratorContext::new(Arc::new(ModelSpec::trivial(1)), Arc::new(spec), field, TestFunction::zero(1)).unwrap();
    let grid = IncrementGrid::new(vec![0.0, 1.0], vec![IncrementAxis::counting(0, 0, 64)]).unwrap();
    let unit = Array2::from_elem((1, 1), C::new(1.0, 0.0));
    let cf = joint_charfunc(&ctx, &grid, &unit, &EvolutionConfig::new(1.0).with_dt(1e-3)).unwrap();
    let phi: Vec<C> = cf.values.iter().copied().collect();
    let dist = invert_counting(&phi, 20).unwrap();
    let mut worst = 0.0f64;
    let mut pn = (-mu).exp();
    for n in 0..=20 {
        if n > 0 {
            pn *= mu / n as f64;
        }
        worst = worst.max((dist.probabilities[n] - pn).abs());
    }
    below(worst, 1e-8, "max |p(n) - Poisson| for n <= 20")
}

fn gaussian() -> Verdict {
    let mut worst = 0.0f64;
    // vacuum, then a coherent field out of phase with the quadrature
    for (amp, phase) in [(0.0, 0.0), (0.8, 1.1)] {
        let theta = 0.3;
        let spec = ObservableSpec::new(
            Array2::zeros((1, 1)),
            vec![vec![TimeFunction::exp(C::new(1.0, 0.0), theta, 0.0)]],
            vec![TimeFunction::Zero],
            vec![TimeFunction::Zero],
        )
        .unwrap();
        let field = FieldProfile::new(vec![TimeFunction::exp(C::new(amp, 0.0), phase, 0.0)], None).unwrap();
        let ctx = GeneratorContext::new(Arc::new(ModelSpec::trivial(1)), Arc::new(spec), field, TestFunction::zero(1))
            .unwrap();
        let kmax = 12.0;
        let grid = IncrementGrid::new(vec![0.0, 1.0], vec![IncrementAxis::symmetric(0, 0, 256, kmax)]).unwrap();
        let unit = Array2::from_elem((1, 1), C::new(1.0, 0.0));
        let cf = joint_charfunc(&ctx, &grid, &unit, &EvolutionConfig::new(1.0).with_dt(1e-3)).unwrap();
        let phi: Vec<C> = cf.values.iter().copied().collect();
        let x = linspace(-6.0, 6.0, 241);
        let d = invert_homodyne(&phi, kmax, &x).unwrap();
        // mean 2 Re(conj(h) f) over unit time, unit variance
        let mean = 2.0 * amp * (phase - theta).cos();
        for (xv, p) in x.iter().zip(&d.density) {
            let exact = (-(xv - mean).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
            worst = worst.max((p - exact).abs());
        }
    }
    below(worst, 1e-6, "sup density error (vacuum and coherent)")
}

fn brute_force() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = 1.0;
    let mut expm_dev = 0.0f64;
    for _ in 0..3 {
        let p = random_dpo(&mut rng);
        let space = TruncatedSpace::new(3, 1);
        let k = random_k(&mut rng, 3, t, 3, 1.5);
        let ctx = dpo_context(&p, space, f64::INFINITY, k).frozen(&linspace(0.0, t, 21));
        let rho0 = random_density(&mut rng, space.dim());
        let exact = dense_expm_propagate(&ctx, &rho0, t).unwrap();
        let rk = evolve(&ctx, &rho0, &EvolutionConfig::new(t).with_dt(1e-3)).unwrap().final_state;
        expm_dev = expm_dev.max(max_abs_diff(&exact, &rk));
    }
    let p = random_dpo(&mut rng);
    let space = TruncatedSpace::new(2, 1);
    let ctx = dpo_context(&p, space, f64::INFINITY, random_k(&mut rng, 3, t, 3, 1.5));
    let x = SystemOperator::from_dense(space, &random_matrix(&mut rng, space.dim())).unwrap();
    let tau = random_density(&mut rng, space.dim());
    let dual = duality_check(&ctx, t, &x, &tau, &EvolutionConfig::new(t).with_dt(1e-3), 1e-3).unwrap();
    Verdict {
        pass: expm_dev < 1e-8 && dual < 1e-7,
        detail: format!(
            "expm deviation {expm_dev:.3e} on dim 8 (tol 1e-8), duality residual {dual:.3e} on dim 6 (tol 1e-7)"
        ),
    }
}

fn linear_model() -> Verdict {
    let s = 1.0 / 3f64.sqrt();
    let split = [C::new(s, 0.0); 3];
    let lambda = C::new(0.3, 0.4);
    let p = DpoParams::from_splits(1.3, 0.0, 0.7, 0.0, 0.9, 0.0, split, split, 0.0, lambda).unwrap();
    let space = TruncatedSpace::new(1, 10);
    let model = dpo_model(&p, space).unwrap();
    let spec = dpo_observables(p.theta3, p.omega_c);
    let field = FieldProfile::dpo_laser(&p, f64::INFINITY).unwrap();
    let ctx = GeneratorContext::new(Arc::new(model), Arc::new(spec), field, TestFunction::zero(3)).unwrap();
    let t_end = 3.0 / p.kappa_p;
    let mut cfg = EvolutionConfig::new(t_end).with_dt(2e-3);
    cfg.store_states = true;
    let res = evolve(&ctx, &vacuum(space), &cfg).unwrap();
    let b = ladder_b(space);
    let i = C::new(0.0, 1.0);
    let exact = |t: f64| -i * lambda * (-2.0 * i * p.omega_c * t).exp() * (1.0 - (-p.kappa_p * t).exp()) / p.kappa_p;
    let scale = res.times.iter().map(|&t| exact(t).norm()).fold(0.0, f64::max);
    let worst = res
        .times
        .iter()
        .zip(&res.states)
        .map(|(&t, rho)| (expectation(&b, rho) / trace(rho) - exact(t)).norm())
        .fold(0.0, f64::max);
    below(worst / scale, 1e-6, "max |<b> - closed form| / sup |<b>|")
}

fn convergence_order() -> Verdict {
    let (ctx, rho0, s, t) = composition_problem();
    let r1 = composition_check(&ctx, &rho0, s, t, &EvolutionConfig::new(t).with_dt(0.02)).unwrap();
    let r2 = composition_check(&ctx, &rho0, s, t, &EvolutionConfig::new(t).with_dt(0.01)).unwrap();
    let ratio = r1 / r2;
    Verdict {
        pass: (12.0..=20.0).contains(&ratio),
        detail: format!("residual {r1:.3e} at dt 0.02, {r2:.3e} at dt 0.01, ratio {ratio:.2} (want [12, 20])"),
    }
}
