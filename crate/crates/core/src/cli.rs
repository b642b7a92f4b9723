//! Command-line front end: `contmeas <command> --config run.toml [--out DIR]`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{load, LoadedConfig};
use crate::error::{Error, Result};
use crate::evolution::{evolve, evolve_observed, leakage, EvolutionConfig};
use crate::fock::{expectation, ladder_a, ladder_b, number_a, number_b, pure_density, SystemOperator, TruncatedSpace};
use crate::generator::{FieldProfile, GeneratorContext};
use crate::measurement::{ObservableKind, ObservableSpec, TestFunction};
use crate::model::{check_dissipativity, check_s_unitary, dpo_model, DpoParams, UNITARITY_TOL};
use crate::oracle::{dense_expm_propagate, duality_check, system_free_charfunc};
use crate::statistics::{
    invert_counting_joint, invert_homodyne, joint_charfunc, linspace, moments, IncrementGrid, Sampling,
};
use crate::timefn::TimeFunction;

pub const DISSIPATIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "contmeas",
    version,
    about = "Characteristic functionals of continuously measured open quantum systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check model structure, scattering unitarity and observable data.
    Validate(CommonArgs),
    /// Integrate the master equation (k = 0) and write occupations over time.
    Evolve(CommonArgs),
    /// Characteristic functional on the configured grid or test function.
    Charfunc(CommonArgs),
    /// Photon-count distribution of counting increments.
    Counts(CommonArgs),
    /// Density of one homodyne increment.
    Homodyne(CommonArgs),
    /// Run the reference-oracle comparisons at small dimension.
    OracleCompare(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed for random test vectors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Validate(a)
            | Command::Evolve(a)
            | Command::Charfunc(a)
            | Command::Counts(a)
            | Command::Homodyne(a)
            | Command::OracleCompare(a) => a,
        }
    }
}

/// Files written and a one-line summary.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Parse arguments, run, print, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(out) => {
            println!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: &Command) -> Result<Outcome> {
    let args = cmd.args();
    let loaded = load(&args.config)?;
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&loaded.config.output.dir));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let ctx = Runner { loaded: &loaded, out_dir, seed: args.seed };
    pool.install(|| match cmd {
        Command::Validate(_) => ctx.validate(),
        Command::Evolve(_) => ctx.evolve(),
        Command::Charfunc(_) => ctx.charfunc(),
        Command::Counts(_) => ctx.counts(),
        Command::Homodyne(_) => ctx.homodyne(),
        Command::OracleCompare(_) => ctx.oracle_compare(),
    })
}

#[derive(Debug, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub truncation: String,
    pub leakage: String,
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    threshold: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value < threshold, message: None }
    }

    fn failed(name: &str, message: String) -> Self {
        Check { name: name.into(), value: f64::NAN, threshold: f64::NAN, pass: false, message: Some(message) }
    }
}

struct Runner<'a> {
    loaded: &'a LoadedConfig,
    out_dir: PathBuf,
    seed: u64,
}

fn leakage_text(max: Option<f64>) -> String {
    match max {
        Some(l) => format!("max={l:.3e}"),
        None => "not computed".into(),
    }
}

fn num(x: f64, precision: usize) -> String {
    format!("{:.*e}", precision.max(1) - 1, x)
}

impl Runner<'_> {
    fn cfg(&self) -> &crate::config::RunConfig {
        &self.loaded.config
    }

    fn header(&self, space: TruncatedSpace, leakage: Option<f64>) -> Header {
        Header {
            tool: "contmeas".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: self.loaded.sha256.clone(),
            truncation: format!("{space} guard={}", self.cfg().truncation.guard),
            leakage: leakage_text(leakage),
        }
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, body)?;
        Ok(path)
    }

    fn write_csv(&self, name: &str, header: &Header, columns: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let p = self.cfg().output.precision;
        let mut s = String::new();
        let _ = writeln!(s, "# tool: {} {}", header.tool, header.version);
        let _ = writeln!(s, "# config_sha256: {}", header.config_sha256);
        let _ = writeln!(s, "# truncation: {}", header.truncation);
        let _ = writeln!(s, "# leakage: {}", header.leakage);
        let _ = writeln!(s, "{}", columns.join(","));
        for row in rows {
            let cells: Vec<String> = row.iter().map(|x| num(*x, p)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        self.write(name, &s)
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn validate(&self) -> Result<Outcome> {
        let cfg = self.cfg();
        let space = cfg.space();
        let mut checks = Vec::new();
        if let crate::config::ModelSection::Dpo(d) = &cfg.model {
            match d.params() {
                Ok(_) => checks.push(Check {
                    name: "dpo_amplitudes".into(),
                    value: 0.0,
                    threshold: 0.0,
                    pass: true,
                    message: None,
                }),
                Err(e) => checks.push(Check::failed("dpo_amplitudes", e.to_string())),
            }
        }
        match cfg.model() {
            Ok(model) => {
                match check_dissipativity(&model, cfg.truncation.guard, 32, self.seed) {
                    Ok(rep) => {
                        let mut c = Check::below("dissipativity", rep.max_residual, DISSIPATIVITY_TOL);
                        c.message = Some(format!("interior_dim={} vectors={}", rep.interior_dim, rep.vectors_checked));
                        checks.push(c);
                    }
                    Err(e) => checks.push(Check::failed("dissipativity", e.to_string())),
                }
                checks.push(Check::below("scattering_unitarity", check_s_unitary(&model), UNITARITY_TOL));
            }
            Err(e) => checks.push(Check::failed("model", e.to_string())),
        }
        match cfg.observables() {
            Ok(_) => {
                checks.push(Check { name: "observables".into(), value: 0.0, threshold: 0.0, pass: true, message: None })
            }
            Err(e) => checks.push(Check::failed("observables", e.to_string())),
        }
        for (name, res) in [
            ("field", cfg.field().map(|_| ())),
            ("context", cfg.context().map(|_| ())),
            ("evolution", cfg.evolution().map(|_| ())),
            ("initial_state", cfg.initial_state().map(|_| ())),
        ] {
            if let Err(e) = res {
                checks.push(Check::failed(name, e.to_string()));
            }
        }
        let pass = checks.iter().all(|c| c.pass);
        let report = json!({ "header": self.header(space, None), "checks": checks, "pass": pass });
        let path = self.write_json("validate.json", &report)?;
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        if !pass {
            return Err(Error::Validation(format!("failed checks: {} (see {})", failed.join(", "), path.display())));
        }
        Ok(Outcome { files: vec![path], summary: format!("validate: {} checks passed", checks.len()) })
    }

    fn evolve(&self) -> Result<Outcome> {
        let cfg = self.cfg();
        let base = cfg.context()?;
        let ctx = base.with_test_function(TestFunction::zero(base.spec().m()))?;
        let space = ctx.model().space();
        let ecfg = cfg.evolution()?;
        let rho0 = cfg.initial_state()?;
        let (na, nb, a, b) = (number_a(space), number_b(space), ladder_a(space), ladder_b(space));
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let guard = ecfg.guard;
        let mut observer = |t: f64, rho: &crate::fock::DensityOperator| {
            let tr = rho.diag().sum();
            let av = expectation(&a, rho);
            let bv = expectation(&b, rho);
            rows.push(vec![
                t,
                tr.re,
                tr.im,
                expectation(&na, rho).re,
                expectation(&nb, rho).re,
                av.re,
                av.im,
                bv.re,
                bv.im,
                leakage(&ctx, rho, guard),
            ]);
        };
        let res = evolve_observed(&ctx, &rho0, &ecfg, Some(&mut observer))?;
        let max_leak = res.max_leakage();
        let header = self.header(space, max_leak);
        let cols = ["t", "tr_re", "tr_im", "n_a", "n_b", "a_re", "a_im", "b_re", "b_im", "leakage"];
        let path = self.write_csv("evolve.csv", &header, &cols, &rows)?;
        Ok(Outcome {
            files: vec![path],
            summary: format!(
                "evolve: {} rows to t = {}, {} steps, leakage {}",
                rows.len(),
                ecfg.t_end,
                res.stats.accepted,
                leakage_text(max_leak)
            ),
        })
    }

    fn charfunc(&self) -> Result<Outcome> {
        let cfg = self.cfg();
        let base = cfg.context()?;
        let space = base.model().space();
        let ecfg = cfg.evolution()?;
        let rho0 = cfg.initial_state()?;
        if cfg.grid.is_some() {
            let ctx = base.with_test_function(TestFunction::zero(base.spec().m()))?;
            let grid = cfg.resolved_grid(&ctx, &ecfg)?;
            let cf = joint_charfunc(&ctx, &grid, &rho0, &ecfg)?;
            let r = grid.axes().len();
            let mut cols: Vec<String> = (1..=r).map(|i| format!("j{i}")).collect();
            cols.extend((1..=r).map(|i| format!("kappa{i}")));
            cols.push("phi_re".into());
            cols.push("phi_im".into());
            let rows: Vec<Vec<f64>> = cf
                .values
                .iter()
                .enumerate()
                .map(|(flat, z)| {
                    let idx = grid.multi_index(flat);
                    let mut row: Vec<f64> = idx.iter().map(|&j| j as f64).collect();
                    row.extend(grid.axes().iter().zip(&idx).map(|(a, &j)| a.kappa(j)));
                    row.push(z.re);
                    row.push(z.im);
                    row
                })
                .collect();
            let colrefs: Vec<&str> = cols.iter().map(String::as_str).collect();
            let path = self.write_csv("charfunc.csv", &self.header(space, cf.leakage), &colrefs, &rows)?;
            return Ok(Outcome { files: vec![path], summary: format!("charfunc: {} grid points", rows.len()) });
        }
        let res = evolve(&base, &rho0, &ecfg)?;
        let rows: Vec<Vec<f64>> = res.times.iter().zip(&res.phi).map(|(t, z)| vec![*t, z.re, z.im]).collect();
        let path =
            self.write_csv("charfunc.csv", &self.header(space, res.max_leakage()), &["t", "phi_re", "phi_im"], &rows)?;
        let last = res.final_phi();
        Ok(Outcome {
            files: vec![path],
            summary: format!("charfunc: Phi(t_end) = {:.12e} {:+.12e}i", last.re, last.im),
        })
    }

    fn counts(&self) -> Result<Outcome> {
        let cfg = self.cfg();
        let base = cfg.context()?;
        let ctx = base.with_test_function(TestFunction::zero(base.spec().m()))?;
        let space = ctx.model().space();
        let ecfg = cfg.evolution()?;
        let rho0 = cfg.initial_state()?;
        let grid = cfg.resolved_grid(&ctx, &ecfg)?;
        let mut caveats = Vec::new();
        for ax in grid.axes() {
            if !matches!(ax.sampling, Sampling::Counting) {
                return Err(Error::Config(format!(
                    "observable {} is sampled symmetrically; use `homodyne`",
                    ax.observable + 1
                )));
            }
            if ctx.spec().kind(ax.observable) == ObservableKind::Mixed {
                caveats.push(format!(
                    "observable {} is mixed; counting inversion assumes integer-valued increments",
                    ax.observable + 1
                ));
            }
        }
        let count_max = cfg.grid.as_ref().map_or(20, |g| g.count_max);
        let n_max: Vec<usize> = grid.axes().iter().map(|a| count_max.min(a.n - 1)).collect();
        let cf = joint_charfunc(&ctx, &grid, &rho0, &EvolutionConfig { leakage_companion: true, ..ecfg.clone() })?;
        let dist = invert_counting_joint(&cf.values, &n_max)?;
        let shape: Vec<usize> = dist.probabilities.shape().to_vec();
        let mut counts = Vec::new();
        let mut probs = Vec::new();
        for (flat, p) in dist.probabilities.iter().enumerate() {
            let mut rem = flat;
            let mut idx = vec![0; shape.len()];
            for (slot, n) in idx.iter_mut().zip(&shape).rev() {
                *slot = rem % n;
                rem /= n;
            }
            counts.push(if idx.len() == 1 { json!(idx[0]) } else { json!(idx) });
            probs.push(*p);
        }
        let report = json!({
            "header": self.header(space, cf.leakage),
            "counts": counts,
            "probabilities": probs,
            "diagnostics": {
                "imag_residue": dist.imag_residue,
                "total_mass": dist.total_mass,
                "min_raw": dist.min_raw,
                "n_kappa": grid.axes().iter().map(|a| a.n).collect::<Vec<_>>(),
                "warnings": dist.warnings,
                "caveats": caveats,
                "leakage": cf.leakage,
            },
        });
        let path = self.write_json("counts.json", &report)?;
        Ok(Outcome { files: vec![path], summary: format!("counts: total mass {:.12}", dist.total_mass) })
    }

    fn homodyne(&self) -> Result<Outcome> {
        let cfg = self.cfg();
        let base = cfg.context()?;
        let ctx = base.with_test_function(TestFunction::zero(base.spec().m()))?;
        let space = ctx.model().space();
        let ecfg = cfg.evolution()?;
        let rho0 = cfg.initial_state()?;
        let grid = cfg.resolved_grid(&ctx, &ecfg)?;
        if grid.axes().len() != 1 {
            return Err(Error::Config("homodyne inverts exactly one increment".into()));
        }
        let ax = grid.axes()[0].clone();
        let Sampling::Symmetric { kappa_max } = ax.sampling else {
            return Err(Error::Config(format!(
                "observable {} uses counting sampling; use `counts`",
                ax.observable + 1
            )));
        };
        let g = cfg.grid.as_ref().expect("grid present");
        let (t0, t1) = (grid.breakpoints()[ax.interval], grid.breakpoints()[ax.interval + 1]);
        let (lo, hi) = match (g.x_min, g.x_max) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                let m = moments(&ctx, ax.observable, t0, t1, &rho0, &ecfg, 2, 1e-2)?;
                let sigma = (m.values[1] - m.values[0] * m.values[0]).max(0.0).sqrt();
                (g.x_min.unwrap_or(m.values[0] - 8.0 * sigma), g.x_max.unwrap_or(m.values[0] + 8.0 * sigma))
            }
        };
        let cf = joint_charfunc(&ctx, &grid, &rho0, &EvolutionConfig { leakage_companion: true, ..ecfg.clone() })?;
        let slice: Vec<Complex64> = cf.values.iter().copied().collect();
        let x = linspace(lo, hi, g.x_points);
        let dens = invert_homodyne(&slice, kappa_max, &x)?;
        let report = json!({
            "header": self.header(space, cf.leakage),
            "x": dens.x,
            "density": dens.density,
            "diagnostics": {
                "imag_residue": dens.imag_residue,
                "mass": dens.mass,
                "edge_modulus": dens.edge_modulus,
                "kappa_max": kappa_max,
                "n_kappa": ax.n,
                "leakage": cf.leakage,
            },
        });
        let path = self.write_json("homodyne.json", &report)?;
        Ok(Outcome { files: vec![path], summary: format!("homodyne: {} points, mass {:.9}", x.len(), dens.mass) })
    }

    fn oracle_compare(&self) -> Result<Outcome> {
        let cfg = self.cfg();
        let checks = vec![
            oracle_poisson()?,
            oracle_gaussian()?,
            oracle_expm(self, self.seed)?,
            oracle_duality(self, self.seed)?,
        ];
        let pass = checks.iter().all(|c| c.pass);
        let space = TruncatedSpace::new(cfg.oracle.n_max, cfg.oracle.m_max);
        let report = json!({ "header": self.header(space, None), "checks": checks, "pass": pass });
        let path = self.write_json("oracle.json", &report)?;
        if !pass {
            let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            return Err(Error::Validation(format!("oracle checks failed: {}", failed.join(", "))));
        }
        Ok(Outcome { files: vec![path], summary: format!("oracle-compare: {} checks passed", checks.len()) })
    }

    /// Small model for the dense oracles: the configured DPO on the oracle
    /// truncation, or the configured model itself if it is small enough.
    fn oracle_context(&self) -> Result<GeneratorContext> {
        let cfg = self.cfg();
        let space = TruncatedSpace::new(cfg.oracle.n_max, cfg.oracle.m_max);
        let model = match cfg.dpo_params()? {
            Some(p) => dpo_model(&p, space)?,
            None => cfg.model()?,
        };
        if model.space().dim() > crate::oracle::EXPM_MAX_DIM {
            return Err(Error::Config(format!(
                "oracle model dimension {} exceeds {}",
                model.space().dim(),
                crate::oracle::EXPM_MAX_DIM
            )));
        }
        let spec = cfg.observables()?;
        GeneratorContext::new(Arc::new(model), Arc::new(spec.clone()), cfg.field()?, TestFunction::zero(spec.m()))
    }
}

fn single_channel_spec(eig: f64, h: TimeFunction) -> Result<ObservableSpec> {
    ObservableSpec::new(
        Array2::from_elem((1, 1), eig),
        vec![vec![h]],
        vec![TimeFunction::Zero],
        vec![TimeFunction::Zero],
    )
}

fn system_free_ctx(spec: ObservableSpec, field: FieldProfile) -> Result<GeneratorContext> {
    GeneratorContext::new(Arc::new(crate::model::ModelSpec::trivial(1)), Arc::new(spec), field, TestFunction::zero(1))
}

fn unit() -> crate::fock::DensityOperator {
    Array2::from_elem((1, 1), Complex64::new(1.0, 0.0))
}

fn oracle_poisson() -> Result<Check> {
    let mu: f64 = 2.0;
    let field = FieldProfile::new(vec![TimeFunction::constant(Complex64::new(mu.sqrt(), 0.0))], Some(1.0))?;
    let spec = single_channel_spec(1.0, TimeFunction::Zero)?;
    let ctx = system_free_ctx(spec.clone(), field.clone())?;
    let grid = IncrementGrid::new(vec![0.0, 1.0], vec![crate::statistics::IncrementAxis::counting(0, 0, 64)])?;
    let cf = joint_charfunc(&ctx, &grid, &unit(), &EvolutionConfig::new(1.0).with_dt(1e-3))?;
    let dist = invert_counting_joint(&cf.values, &[20])?;
    let mut worst = 0.0f64;
    let mut log_fact = 0.0;
    for n in 0..=20usize {
        if n > 0 {
            log_fact += (n as f64).ln();
        }
        let exact = (-mu + n as f64 * mu.ln() - log_fact).exp();
        worst = worst.max((dist.probabilities[[n]] - exact).abs());
    }
    // and the closed form itself at one grid point
    let k = TestFunction::constant(vec![grid.axes()[0].kappa(5)], 0.0, 1.0)?;
    let closed = system_free_charfunc(&spec, &field, &k, 1.0)?;
    worst = worst.max((closed - cf.values[[5]]).norm());
    Ok(Check::below("poisson_system_free", worst, 1e-8))
}

fn oracle_gaussian() -> Result<Check> {
    let mut worst = 0.0f64;
    for amp in [0.0, 0.8] {
        let h = TimeFunction::exp(Complex64::new(1.0, 0.0), 0.3, -1.0);
        let field = FieldProfile::new(vec![TimeFunction::exp(Complex64::new(amp, 0.0), 0.3, -1.0)], None)?;
        let spec = single_channel_spec(0.0, h)?;
        let ctx = system_free_ctx(spec, field)?;
        let kmax = 12.0;
        let grid =
            IncrementGrid::new(vec![0.0, 1.0], vec![crate::statistics::IncrementAxis::symmetric(0, 0, 256, kmax)])?;
        let cf = joint_charfunc(&ctx, &grid, &unit(), &EvolutionConfig::new(1.0).with_dt(1e-3))?;
        let slice: Vec<Complex64> = cf.values.iter().copied().collect();
        let x = linspace(-5.0, 7.0, 241);
        let d = invert_homodyne(&slice, kmax, &x)?;
        // mean = int 2 Re(conj(h) f) = 2 amp, variance = int |h|^2 = 1
        let mean = 2.0 * amp;
        for (xv, p) in x.iter().zip(&d.density) {
            let exact = (-(xv - mean).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            worst = worst.max((p - exact).abs());
        }
    }
    Ok(Check::below("gaussian_system_free", worst, 1e-6))
}

fn random_k(rng: &mut ChaCha8Rng, m: usize, t: f64) -> Result<TestFunction> {
    let pieces = 3;
    let mut bps: Vec<f64> = (0..pieces - 1).map(|_| rng.random::<f64>() * t).collect();
    bps.push(0.0);
    bps.push(t);
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();
    let values = (0..bps.len() - 1).map(|_| (0..m).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()).collect();
    TestFunction::new(bps, values)
}

fn oracle_expm(r: &Runner, seed: u64) -> Result<Check> {
    let t = r.cfg().oracle.t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = r.oracle_context()?;
    let k = random_k(&mut rng, ctx.spec().m(), t)?;
    let ctx = ctx.with_test_function(k)?.frozen(&linspace(0.0, t, 21));
    let space = ctx.model().space();
    let rho0 = pure_density(&space.basis(0, 0)?);
    match dense_expm_propagate(&ctx, &rho0, t) {
        Ok(exact) => {
            let rk = evolve(&ctx, &rho0, &EvolutionConfig::new(t).with_dt(1e-3))?.final_state;
            let dev = (&exact - &rk).iter().map(|z| z.norm()).fold(0.0, f64::max);
            Ok(Check::below("expm_vs_evolve", dev, 1e-8))
        }
        Err(e) => Ok(Check::failed("expm_vs_evolve", e.to_string())),
    }
}

fn oracle_duality(r: &Runner, seed: u64) -> Result<Check> {
    let t = r.cfg().oracle.t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let ctx = r.oracle_context()?;
    let k = random_k(&mut rng, ctx.spec().m(), t)?;
    let ctx = ctx.with_test_function(k)?;
    let space = ctx.model().space();
    let dim = space.dim();
    let mut rc = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let xd = Array2::from_shape_fn((dim, dim), |_| rc());
    let tau = Array2::from_shape_fn((dim, dim), |_| rc());
    let x = SystemOperator::from_dense(space, &xd)?;
    let res = duality_check(&ctx, t, &x, &tau, &EvolutionConfig::new(t).with_dt(1e-3), 1e-3)?;
    Ok(Check::below("duality", res, 1e-7))
}

/// DPO parameters used by examples and tests when nothing else is given.
pub fn reference_dpo_params() -> DpoParams {
    let s = 1.0 / 3f64.sqrt();
    let split = [Complex64::new(s, 0.0); 3];
    DpoParams::from_splits(1.0, 0.5, 1.0, 0.0, 1.0, 0.0, split, split, 0.0, Complex64::new(0.5, 0.0)).expect("valid")
}
