//! Reference computations used only to check the engine. Nothing here
//! calls into the generator or the time stepper it is compared against
//! (except `duality_check`, whose point is to compare the engine's forward
//! run with an independent backward one).
//!
//! * [`system_free_charfunc`]: closed form of `Phi` for a dimension-one
//!   system (`K = 0`, `R = 0`, `S = 1`), by adaptive Gauss-Kronrod quadrature.
//! * [`dense_expm_propagate`]: dense `dim^2 x dim^2` superoperator per
//!   piecewise-constant segment, exponentiated by scaling and squaring.
//! * [`duality_check`]: Heisenberg-side backward integration compared with
//!   the forward evolution through `Tr(X rho)`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionConfig};
use crate::fock::{DensityOperator, SystemOperator};
use crate::generator::{FieldProfile, GeneratorContext};
use crate::measurement::{ObservableSpec, TestFunction};

pub const EXPM_MAX_DIM: usize = 12;
const GK_MAX_DEPTH: usize = 40;

type C = Complex64;

// 15-point Kronrod nodes on [-1, 1] (positive half) and weights; the
// 7-point Gauss rule uses the odd-indexed nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> C, a: f64, b: f64) -> (C, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

fn adaptive(f: &dyn Fn(f64) -> C, a: f64, b: f64, tol: f64, depth: usize) -> Result<C> {
    let (val, err) = gk15(f, a, b);
    if err <= tol.max(1e-15 * val.norm()) {
        return Ok(val);
    }
    if depth >= GK_MAX_DEPTH {
        return Err(Error::Quadrature(format!("no convergence on [{a}, {b}] (error estimate {err:.3e})")));
    }
    let m = 0.5 * (a + b);
    Ok(adaptive(f, a, m, 0.5 * tol, depth + 1)? + adaptive(f, m, b, 0.5 * tol, depth + 1)?)
}

/// `int_a^b f` by adaptive 7-15 Gauss-Kronrod.
pub fn integrate(f: &dyn Fn(f64) -> C, a: f64, b: f64, tol: f64) -> Result<C> {
    if b <= a {
        return Ok(C::new(0.0, 0.0));
    }
    adaptive(f, a, b, tol, 0)
}

fn cuts(mut pts: Vec<f64>, t: f64) -> Vec<f64> {
    pts.retain(|x| *x > 0.0 && *x < t);
    pts.push(0.0);
    pts.push(t);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// `Phi_t(k)` for a system of dimension one in the coherent field `f`:
///
/// ```text
/// log Phi = int_0^t ds [ <f+b|(S(k)-1)(f+b)> + i sum_a k_a (c_a + 2 Re<h^a|f>)
///                        - 1/2 sum_ab k_a <h^a|h^b> k_b ]
/// ```
pub fn system_free_charfunc(spec: &ObservableSpec, f: &FieldProfile, k: &TestFunction, t: f64) -> Result<C> {
    let (m, d) = spec.eigenvalues().dim();
    if f.d() != d {
        return Err(Error::Dimension(format!("field has {} channels, observables {d}", f.d())));
    }
    let k = k.clone().with_m(m)?;
    let mut pts: Vec<f64> = k.breakpoints().to_vec();
    pts.extend(f.breakpoints());
    pts.extend(spec.breakpoints());
    let grid = cuts(pts, t);
    let mut total = C::new(0.0, 0.0);
    for w in grid.windows(2) {
        let probe = 0.5 * (w[0] + w[1]);
        let kappa = k.eval_at(probe);
        if kappa.iter().all(|x| *x == 0.0) {
            continue;
        }
        let phases: Vec<C> = (0..d)
            .map(|i| C::new(0.0, (0..m).map(|a| kappa[a] * spec.eigenvalues()[[a, i]]).sum::<f64>()).exp())
            .collect();
        let integrand = |s: f64| -> C {
            let mut acc = C::new(0.0, 0.0);
            let mut kh = vec![C::new(0.0, 0.0); d];
            for i in 0..d {
                let fb = f.eval_at(s, probe)[i] + spec.b()[i].eval_at(s, probe);
                acc += fb.conj() * (phases[i] - 1.0) * fb;
                for a in 0..m {
                    kh[i] += spec.h()[a][i].eval_at(s, probe) * kappa[a];
                }
            }
            let fs = f.eval_at(s, probe);
            for a in 0..m {
                let hf: C = (0..d).map(|i| spec.h()[a][i].eval_at(s, probe).conj() * fs[i]).sum();
                let c = spec.c()[a].eval_at(s, probe).re;
                acc += C::new(0.0, kappa[a] * (c + 2.0 * hf.re));
            }
            acc - 0.5 * kh.iter().map(|z| z.norm_sqr()).sum::<f64>()
        };
        total += integrate(&integrand, w[0], w[1], 1e-14)?;
    }
    Ok(total.exp())
}

fn dense(op: &SystemOperator) -> Array2<C> {
    op.to_dense()
}

fn dagger(a: &Array2<C>) -> Array2<C> {
    a.t().mapv(|z| z.conj())
}

/// Scalar data of the generator at `(t, probe)`, computed directly from
/// the observable and field definitions.
struct Coefficients {
    lambda: Vec<C>,
    s: Vec<C>,
    r_plus: Vec<C>,
    r_minus: Vec<C>,
    c: C,
}

fn coefficients(ctx: &GeneratorContext, t: f64, probe: f64) -> Coefficients {
    let spec = ctx.spec();
    let (m, d) = spec.eigenvalues().dim();
    let kappa = ctx.test_function().eval_at(probe);
    let lambda: Vec<C> = ctx.field().eval_at(t, probe).to_vec();
    let h: Vec<Vec<C>> = (0..m).map(|a| (0..d).map(|i| spec.h()[a][i].eval_at(t, probe)).collect()).collect();
    let b: Vec<C> = (0..d).map(|i| spec.b()[i].eval_at(t, probe)).collect();
    let cvals: Vec<f64> = (0..m).map(|a| spec.c()[a].eval_at(t, probe).re).collect();
    let s: Vec<C> =
        (0..d).map(|i| C::from_polar(1.0, (0..m).map(|a| kappa[a] * spec.eigenvalues()[[a, i]]).sum())).collect();
    let r = |sign: f64| -> Vec<C> {
        (0..d)
            .map(|i| {
                let si = if sign > 0.0 { s[i] } else { s[i].conj() };
                let hk: C = (0..m).map(|a| h[a][i] * (sign * kappa[a])).sum();
                C::i() * hk + (si - 1.0) * b[i]
            })
            .collect()
    };
    let mut c = C::new(0.0, 0.0);
    for i in 0..d {
        c += b[i].conj() * (s[i] - 1.0) * b[i];
    }
    for a in 0..m {
        c += C::new(0.0, kappa[a] * cvals[a]);
        for bb in 0..m {
            let hh: C = (0..d).map(|i| h[a][i].conj() * h[bb][i]).sum();
            c -= 0.5 * kappa[a] * kappa[bb] * hh;
        }
    }
    let (r_plus, r_minus) = (r(1.0), r(-1.0));
    Coefficients { lambda, s, r_plus, r_minus, c }
}

/// Dense `K(l, r)`, `B_i(l)` and their adjoints, each from its own formula.
struct DenseOperators {
    k_minus: Array2<C>,
    k_plus_dag: Array2<C>,
    b: Vec<Array2<C>>,
    b_dag: Vec<Array2<C>>,
}

fn dense_operators(ctx: &GeneratorContext, co: &Coefficients) -> DenseOperators {
    let model = ctx.model();
    let d = model.d();
    let dim = model.space().dim();
    let sm = model.scattering();
    let eye = Array2::<C>::eye(dim);
    let kd = dense(model.k());
    let rs: Vec<Array2<C>> = model.channels().iter().map(dense).collect();
    let rds: Vec<Array2<C>> = model.channels().iter().map(|r| dense(&r.adjoint())).collect();
    let norm2: f64 = co.lambda.iter().map(|z| z.norm_sqr()).sum();
    let sl: Vec<C> = (0..d).map(|i| (0..d).map(|j| sm[[i, j]] * co.lambda[j]).sum()).collect();
    // B_i(l) = R_i + sum_j S_ij l_j ; B_i(l)* = R_i* + sum_j conj(l_j) conj(S_ij)
    let b: Vec<Array2<C>> = (0..d).map(|i| &rs[i] + &eye.mapv(|x| x * sl[i])).collect();
    let b_dag: Vec<Array2<C>> = (0..d)
        .map(|i| {
            let z: C = (0..d).map(|j| co.lambda[j].conj() * sm[[i, j]].conj()).sum();
            &rds[i] + &eye.mapv(|x| x * z)
        })
        .collect();
    // K(l, r) = K - sum_ij R_i* S_ij l_j - |l|^2/2 + sum_i conj(r_i) B_i(l)
    let k_of = |r: &[C]| {
        let mut acc = &kd - &eye.mapv(|x| x * (0.5 * norm2));
        for i in 0..d {
            acc = acc - rds[i].mapv(|x| x * sl[i]) + b[i].mapv(|x| x * r[i].conj());
        }
        acc
    };
    // K(l, r)* = K* - sum_ij conj(S_ij l_j) R_i - |l|^2/2 + sum_i r_i B_i(l)*
    let k_dag_of = |r: &[C]| {
        let mut acc = dagger(&kd) - eye.mapv(|x| x * (0.5 * norm2));
        for i in 0..d {
            acc = acc - rs[i].mapv(|x| x * sl[i].conj()) + b_dag[i].mapv(|x| x * r[i]);
        }
        acc
    };
    DenseOperators { k_minus: k_of(&co.r_minus), k_plus_dag: k_dag_of(&co.r_plus), b, b_dag }
}

/// Dense superoperator of the forward generator in row-major vectorization
/// (`vec(A rho B) = (A kron B^T) vec(rho)`).
pub fn dense_superoperator(ctx: &GeneratorContext, t: f64, probe: f64) -> Array2<C> {
    let co = coefficients(ctx, t, probe);
    let ops = dense_operators(ctx, &co);
    let dim = ctx.model().space().dim();
    let eye = Array2::<C>::eye(dim);
    // rho K2* : B = K2*, B^T = conj(K2)
    let k_plus_conj = ops.k_plus_dag.t().to_owned();
    let mut l = kron(&ops.k_minus, &eye) + kron(&eye, &k_plus_conj);
    for i in 0..ops.b.len() {
        if co.s[i] == C::new(0.0, 0.0) {
            continue;
        }
        l = l + kron(&ops.b[i], &ops.b_dag[i].t().to_owned()).mapv(|x| x * co.s[i]);
    }
    l + Array2::<C>::eye(dim * dim).mapv(|x| x * co.c)
}

fn kron(a: &Array2<C>, b: &Array2<C>) -> Array2<C> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

fn norm1(a: &Array2<C>) -> f64 {
    a.columns().into_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(a)` by scaling and squaring with a Taylor polynomial.
pub fn expm(a: &Array2<C>) -> Array2<C> {
    let n = a.nrows();
    let nrm = norm1(a);
    let squarings = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.mapv(|x| x / 2f64.powi(squarings));
    let mut result = Array2::<C>::eye(n);
    let mut term = Array2::<C>::eye(n);
    for j in 1..=40 {
        term = term.dot(&scaled).mapv(|x| x / j as f64);
        result += &term;
        if norm1(&term) <= 1e-18 * norm1(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Propagate `rho0` to `t` with one dense exponential per piecewise-constant
/// segment. The context must be piecewise constant in time (use
/// [`GeneratorContext::frozen`] first for smooth data).
pub fn dense_expm_propagate(ctx: &GeneratorContext, rho0: &DensityOperator, t: f64) -> Result<DensityOperator> {
    let dim = ctx.model().space().dim();
    if dim > EXPM_MAX_DIM {
        return Err(Error::Dimension(format!("dense propagation limited to dimension {EXPM_MAX_DIM}, got {dim}")));
    }
    if rho0.dim() != (dim, dim) {
        return Err(Error::Dimension(format!("initial operator {:?} on dimension {dim}", rho0.dim())));
    }
    let mut v: Array1<C> = Array1::from_iter(rho0.iter().copied());
    let grid = cuts(ctx.breakpoints(), t);
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let probe = 0.5 * (a + b);
        let l = dense_superoperator(ctx, probe, probe);
        for edge in [a, b] {
            let other = dense_superoperator(ctx, edge, probe);
            let dev = (&other - &l).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if dev > 1e-12 * (1.0 + norm1(&l)) {
                return Err(Error::Validation(format!(
                    "generator varies inside [{a}, {b}] (deviation {dev:.3e}); freeze the coefficients first"
                )));
            }
        }
        v = expm(&l.mapv(|x| x * (b - a))).dot(&v);
    }
    Ok(Array2::from_shape_vec((dim, dim), v.to_vec()).expect("dim^2 entries"))
}

/// Heisenberg generator `X K1 + K2* X + sum_i s_i B_i* X B_i + C X`.
fn heisenberg_apply(ctx: &GeneratorContext, t: f64, probe: f64, x: &Array2<C>) -> Array2<C> {
    let co = coefficients(ctx, t, probe);
    let ops = dense_operators(ctx, &co);
    let mut out = x.dot(&ops.k_minus) + ops.k_plus_dag.dot(x) + x.mapv(|z| z * co.c);
    for i in 0..ops.b.len() {
        out = out + ops.b_dag[i].dot(x).dot(&ops.b[i]).mapv(|z| z * co.s[i]);
    }
    out
}

/// `G(0, t)[X]` by integrating `dY/ds = -L_s^*[Y]` backward from `Y(t) = X`
/// with fixed-step RK4 on every segment.
pub fn heisenberg_propagate(ctx: &GeneratorContext, x: &Array2<C>, t: f64, dt: f64) -> Array2<C> {
    let grid = cuts(ctx.breakpoints(), t);
    let mut y = x.clone();
    for w in grid.windows(2).rev() {
        let (a, b) = (w[0], w[1]);
        let probe = 0.5 * (a + b);
        let n = ((b - a) / dt).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        for j in 0..n {
            let s = b - j as f64 * h;
            let f = |s: f64, y: &Array2<C>| heisenberg_apply(ctx, s, probe, y).mapv(|z| -z);
            // backward in s: dY = f ds with ds = -h
            let k1 = f(s, &y);
            let k2 = f(s - 0.5 * h, &(&y - &k1.mapv(|z| z * (0.5 * h))));
            let k3 = f(s - 0.5 * h, &(&y - &k2.mapv(|z| z * (0.5 * h))));
            let k4 = f(s - h, &(&y - &k3.mapv(|z| z * h)));
            y = &y - &((k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0)));
        }
    }
    y
}

fn trace_product(a: &Array2<C>, b: &Array2<C>) -> C {
    let n = a.nrows();
    let mut acc = C::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

/// `|Tr(G(0,t)[X] tau) - Tr(X rho(t))|`, the forward side from the engine
/// with `cfg`, the backward side from [`heisenberg_propagate`] with step `dt`.
pub fn duality_check(
    ctx: &GeneratorContext,
    t: f64,
    x: &SystemOperator,
    tau: &DensityOperator,
    cfg: &EvolutionConfig,
    dt: f64,
) -> Result<f64> {
    let xd = x.to_dense();
    let forward = evolve(
        ctx,
        tau,
        &EvolutionConfig { t_end: t, store_stride: usize::MAX, leakage_companion: false, ..cfg.clone() },
    )?;
    let back = heisenberg_propagate(ctx, &xd, t, dt);
    Ok((trace_product(&back, tau) - trace_product(&xd, &forward.final_state)).norm())
}
