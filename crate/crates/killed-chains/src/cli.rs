//! Command-line front end: `solve`, `verify` and `simulate`.
//!
//! Every run writes `run_config.json` and `domain.json` next to its results,
//! so a run can be repeated from its own output directory. Exit codes are 0
//! on success, 2 for invalid input or missing prerequisites, 3 for solver
//! failures and 4 when a check falls outside its window.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::defaults::{DEFAULT_OUTPUT, LAZY_HOLDING, OUTPUT_ENV, SEED, THETA};
use crate::error::{Error, Result};
use crate::geometry::{
    best_inner_uniform_alpha, best_john_alpha, john_radius, whitney_cover, JohnCertificate,
};
use crate::graph::Domain;
use crate::inequalities::{
    doubling_constant, dyadic_radii, moderate_growth, poincare_scan, test_suite, verify_nash, Sample, Weights,
};
use crate::io::{self, CheckRow, DomainSpec, LoadedDomain};
use crate::kernels::{dirichlet_kernel, doob_transform, neumann_kernel, KernelMatrix};
use crate::quasistationary::{
    carleson_check, convergence_profile, eigenvalue_path_bound, exit_time_bound_check, gaussian_bound_check,
    nu_control_check, require_aperiodic, simulate_killed, XrMap,
};
use crate::spectral::{perron_pair, spectrum_summary, SolverOptions, SpectralPair};
use crate::zoo::{FamilySpec, GeometricClass};

pub const CHECKS: [&str; 12] = [
    "john",
    "inner_uniform",
    "whitney",
    "doubling",
    "poincare",
    "nash",
    "carleson",
    "gaussian",
    "exit_time",
    "convergence",
    "qsd",
    "path_bound",
];

#[derive(Debug, Parser)]
#[command(name = "killed-chains", version, about = "Killed random walks on graph domains")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Perron pair, spectrum and kernel of a domain.
    Solve(SolveArgs),
    /// Run named checks and summarize them against their windows.
    Verify(VerifyArgs),
    /// Monte Carlo survival and occupancy.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DomainArgs {
    /// Family name, e.g. `cone45` or `diamond_ball`.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long = "N", default_value_t = 8)]
    pub n: usize,
    /// Inner radius of the annulus families.
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Dimension of the punctured-ball, annulus and box families.
    #[arg(long)]
    pub d: Option<usize>,
    /// Domain-spec JSON file, used instead of `--family`.
    #[arg(long, conflicts_with = "family")]
    pub spec: Option<PathBuf>,
    /// Add holding `1/2` to the killed kernel.
    #[arg(long)]
    pub lazify: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write pre-binned series for plotting.
    #[arg(long)]
    pub plot_data: bool,
    #[arg(long, default_value_t = crate::defaults::DENSE_THRESHOLD)]
    pub dense_threshold: usize,
    #[arg(long, default_value_t = crate::defaults::EIGEN_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Comma-separated check names, or `all`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub checks: Vec<String>,
    #[arg(long, default_value_t = SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Start vertex: `center`, `x<k>` for ambient vertex `k`, comma-separated
    /// coordinates, or a local state index.
    #[arg(long, default_value = "center")]
    pub x: String,
    #[arg(long, default_value_t = 10)]
    pub t: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = SEED)]
    pub seed: u64,
}

/// Everything that determines a run, written to `run_config.json`.
#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub version: String,
    pub domain: DomainSpec,
    pub lazify: bool,
    pub solver: SolverOptions,
    pub checks: Option<Vec<String>>,
    pub x: Option<String>,
    pub t: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

/// Status of one check in the verify summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// Failure expected for this family.
    Xfail,
    /// Not applicable to this domain.
    Skip,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub check: String,
    pub status: Status,
    pub statistic: f64,
    pub window: String,
    pub detail: String,
}

/// Parse and run, returning the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        // A pool may already exist when `run` is called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, cli.threads),
        Command::Verify(a) => cmd_verify(a, cli.threads),
        Command::Simulate(a) => cmd_simulate(a, cli.threads),
    }
}

struct Prepared {
    loaded: LoadedDomain,
    spec: DomainSpec,
    kernel: KernelMatrix,
    solver: SolverOptions,
    out: PathBuf,
}

impl Prepared {
    fn dom(&self) -> &Domain {
        &self.loaded.domain
    }

    fn family_name(&self) -> &'static str {
        self.loaded.family.as_ref().map(|f| f.name()).unwrap_or("explicit")
    }

    fn size(&self) -> usize {
        self.loaded.family.as_ref().map(|f| f.size()).unwrap_or(self.dom().len())
    }

    fn class(&self) -> Option<GeometricClass> {
        self.loaded.family.as_ref().map(|f| f.class())
    }
}

fn output_dir(a: &DomainArgs, command: &str) -> PathBuf {
    if let Some(o) = &a.out {
        return o.clone();
    }
    let root = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    let tag = match (&a.family, &a.spec) {
        (Some(f), _) => format!("{command}_{f}_N{}", a.n),
        (None, Some(p)) => format!("{command}_{}", p.file_stem().and_then(|s| s.to_str()).unwrap_or("spec")),
        _ => command.to_string(),
    };
    root.join(tag)
}

fn prepare(a: &DomainArgs, command: &str) -> Result<Prepared> {
    let spec = match (&a.family, &a.spec) {
        (_, Some(p)) => DomainSpec::read(p)?,
        (Some(f), None) => DomainSpec::generator(FamilySpec::from_name(f, a.n, a.d, a.l)?),
        (None, None) => return Err(Error::validation("give either --family or --spec")),
    };
    let loaded = spec.build()?;
    let mut kernel = dirichlet_kernel(&loaded.domain)?;
    if a.lazify {
        kernel = kernel.lazy(LAZY_HOLDING)?;
    }
    let solver = SolverOptions { dense_threshold: a.dense_threshold, tol: a.tol, ..SolverOptions::default() };
    let out = output_dir(a, command);
    std::fs::create_dir_all(&out)?;
    Ok(Prepared { loaded, spec, kernel, solver, out })
}

fn write_provenance(p: &Prepared, cfg: &RunConfig) -> Result<()> {
    io::write_json(&p.out.join("run_config.json"), cfg)?;
    p.spec.write(&p.out.join("domain.json"))
}

fn config(p: &Prepared, command: &str, a: &DomainArgs, threads: Option<usize>) -> RunConfig {
    RunConfig {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        domain: p.spec.clone(),
        lazify: a.lazify,
        solver: p.solver.clone(),
        checks: None,
        x: None,
        t: None,
        trials: None,
        seed: None,
        threads,
        out: p.out.clone(),
    }
}

fn solve_pair(p: &Prepared) -> Result<SpectralPair> {
    perron_pair(&p.kernel, &p.solver).inspect_err(|e| {
        let _ = std::fs::write(p.out.join("diagnostics.txt"), format!("{e}\n"));
    })
}

/// Mean and range of a per-state series grouped by `delta`.
fn binned_by_delta(dom: &Domain, values: &[f64]) -> Vec<(u32, usize, f64, f64, f64)> {
    let mut groups: std::collections::BTreeMap<u32, Vec<f64>> = Default::default();
    for (i, &v) in values.iter().enumerate() {
        groups.entry(dom.delta(i)).or_default().push(v);
    }
    groups
        .into_iter()
        .map(|(d, vs)| {
            let mean = vs.iter().sum::<f64>() / vs.len() as f64;
            let lo = vs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (d, vs.len(), mean, lo, hi)
        })
        .collect()
}

fn write_binned(path: &Path, dom: &Domain, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["delta", "count", "mean", "min", "max"])?;
    for row in binned_by_delta(dom, values) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_solve(a: &SolveArgs, threads: Option<usize>) -> Result<i32> {
    let p = prepare(&a.domain, "solve")?;
    write_provenance(&p, &config(&p, "solve", &a.domain, threads))?;
    let sp = solve_pair(&p)?;
    if sp.period > 1 {
        let msg = format!(
            "warning: the killed kernel has period {}; conditional limits do not exist (use --lazify)",
            sp.period
        );
        eprintln!("{msg}");
        std::fs::write(p.out.join("warnings.txt"), msg + "\n")?;
    }
    let spectrum = spectrum_summary(&p.kernel, &p.solver, None)?;
    io::write_kernel(&p.out, &p.kernel)?;
    io::write_spectrum(&p.out.join("spectrum.csv"), &spectrum)?;
    io::write_beta0(&p.out.join("beta0.csv"), &sp)?;
    io::write_vector(&p.out.join("phi0.csv"), p.dom(), &sp.phi0)?;
    io::write_vector(&p.out.join("pi_phi0.csv"), p.dom(), &sp.pi_phi0)?;
    if a.domain.plot_data {
        write_binned(&p.out.join("phi0_by_delta.csv"), p.dom(), &sp.phi0)?;
    }
    println!("beta0 = {:.15} ({} states, {:?})", sp.beta0, p.dom().len(), sp.method);
    Ok(0)
}

pub fn parse_vertex(dom: &Domain, s: &str) -> Result<usize> {
    let s = s.trim();
    if s == "center" {
        return Ok(dom.center());
    }
    if let Some(rest) = s.strip_prefix('x') {
        let v: usize = rest.parse().map_err(|_| Error::validation(format!("bad vertex `{s}`")))?;
        return dom.require_local(v);
    }
    if s.contains(',') {
        let c: Vec<i64> = s
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::validation(format!("bad coordinates `{s}`"))))
            .collect::<Result<_>>()?;
        return dom.local_at(&c).ok_or_else(|| Error::validation(format!("{c:?} is not in the domain")));
    }
    let i: usize = s.parse().map_err(|_| Error::validation(format!("bad vertex `{s}`")))?;
    if i >= dom.len() {
        return Err(Error::UnknownVertex(i));
    }
    Ok(i)
}

#[derive(Serialize)]
struct SurvivalRow<'a> {
    family: &'a str,
    #[serde(rename = "N")]
    n: usize,
    x: usize,
    t: usize,
    trials: u64,
    survivors: u64,
    survival: f64,
    std_error: f64,
    exact: Option<f64>,
    z: Option<f64>,
}

/// Cap on `t * nnz` for the exact cross-check column.
const EXACT_WORK_CAP: usize = 2_000_000_000;

pub fn cmd_simulate(a: &SimulateArgs, threads: Option<usize>) -> Result<i32> {
    let p = prepare(&a.domain, "simulate")?;
    let mut cfg = config(&p, "simulate", &a.domain, threads);
    cfg.x = Some(a.x.clone());
    cfg.t = Some(a.t);
    cfg.trials = Some(a.trials);
    cfg.seed = Some(a.seed);
    let x = parse_vertex(p.dom(), &a.x)?;
    let sim = simulate_killed(&p.kernel, x, a.t, a.trials, a.seed)?;
    write_provenance(&p, &cfg)?;
    let exact_row = (a.t.saturating_mul(p.kernel.nnz()) <= EXACT_WORK_CAP)
        .then(|| p.kernel.power_rows(&[x], a.t).remove(0));
    let exact = exact_row.as_ref().map(|r| r.iter().sum::<f64>());
    let z = exact.and_then(|e| {
        let se = (e * (1.0 - e) / a.trials as f64).sqrt();
        (se > 0.0).then(|| (sim.survival - e) / se)
    });
    let row = SurvivalRow {
        family: p.family_name(),
        n: p.size(),
        x,
        t: a.t,
        trials: a.trials,
        survivors: sim.survivors,
        survival: sim.survival,
        std_error: sim.std_error,
        exact,
        z,
    };
    io::write_rows(&p.out.join("survival.csv"), &[row])?;
    let mut w = csv::Writer::from_path(p.out.join("occupancy.csv"))?;
    w.write_record(["state", "vertex", "occupancy", "std_error", "exact"])?;
    for (i, &o) in sim.occupancy.iter().enumerate() {
        let se = if sim.survivors > 0 { (o * (1.0 - o) / sim.survivors as f64).sqrt() } else { 0.0 };
        let ex = match (&exact_row, exact) {
            (Some(r), Some(s)) if s > 0.0 => Some(r[i] / s),
            _ => None,
        };
        w.serialize((i, p.dom().member(i), o, se, ex))?;
    }
    w.flush()?;
    if a.domain.plot_data {
        write_binned(&p.out.join("occupancy_by_delta.csv"), p.dom(), &sim.occupancy)?;
    }
    println!("survival = {:.6} +- {:.6} over {} trials", sim.survival, sim.std_error, a.trials);
    Ok(0)
}

/// State shared by the checks of one verify run.
struct VerifyCtx<'a> {
    p: &'a Prepared,
    sp: SpectralPair,
    seed: u64,
    cert: Option<JohnCertificate>,
    iu: bool,
}

struct CheckOutput {
    rows: Vec<CheckRow>,
    summary: SummaryRow,
}

impl VerifyCtx<'_> {
    fn row(&self, check: &str, t_or_r: f64, measured: f64, envelope: f64) -> CheckRow {
        CheckRow {
            family: self.p.family_name().to_string(),
            n: self.p.size(),
            check_id: check.to_string(),
            t_or_r,
            measured,
            envelope,
            ratio: measured / envelope,
        }
    }

    fn certificate(&mut self) -> Result<&JohnCertificate> {
        if self.cert.is_none() {
            let dom = self.p.dom();
            let o = dom.center();
            let alpha = best_john_alpha(dom, o)?;
            if alpha <= 0.0 {
                return Err(Error::Dependency("no John certificate around the center".into()));
            }
            self.cert = john_radius(dom, o, alpha)?;
        }
        self.cert.as_ref().ok_or_else(|| Error::Dependency("no John certificate around the center".into()))
    }

    fn require_iu(&self, check: &str) -> Result<()> {
        if self.iu {
            Ok(())
        } else {
            Err(Error::Dependency(format!(
                "`{check}` needs an inner-uniform certificate; run `inner_uniform` first or use an inner-uniform family"
            )))
        }
    }
}

fn summary(check: &str, ok: bool, statistic: f64, window: &str, detail: String) -> SummaryRow {
    SummaryRow {
        check: check.to_string(),
        status: if ok { Status::Pass } else { Status::Fail },
        statistic,
        window: window.to_string(),
        detail,
    }
}

fn run_check(ctx: &mut VerifyCtx<'_>, check: &str) -> Result<CheckOutput> {
    let dom = ctx.p.dom();
    let k = &ctx.p.kernel;
    let radius = dom.internal_radius().max(1) as f64;
    match check {
        "john" => {
            let cert = ctx.certificate()?.clone();
            let rows = vec![ctx.row(check, cert.john_radius as f64, cert.alpha, f64::NAN)];
            let mut s = summary(
                check,
                cert.alpha > 0.0,
                cert.alpha,
                "alpha > 0",
                format!("alpha = {:.4} with R = {} around state {}", cert.alpha, cert.john_radius, cert.center),
            );
            if ctx.p.class() == Some(GeometricClass::Neither) {
                s.status = Status::Xfail;
                s.detail += "; this family has no uniform John constant, alpha decays with N";
            }
            Ok(CheckOutput { rows, summary: s })
        }
        "inner_uniform" => {
            let alpha = best_inner_uniform_alpha(dom, 2.0, 40)?;
            if alpha > 0.0 {
                ctx.iu = true;
            }
            let rows = vec![ctx.row(check, 2.0, alpha, f64::NAN)];
            let mut s = summary(check, alpha > 0.0, alpha, "alpha > 0 with A = 2", format!("alpha = {alpha:.4}"));
            if alpha <= 0.0 && matches!(ctx.p.class(), Some(GeometricClass::John | GeometricClass::Neither)) {
                s.status = Status::Xfail;
            }
            Ok(CheckOutput { rows, summary: s })
        }
        "whitney" => {
            let mut rows = Vec::new();
            let mut ok = true;
            let mut detail = Vec::new();
            for eta in [1.0 / 12.0, 0.25, 0.8] {
                let a = whitney_cover(dom, eta, None)?.audit(dom, dom.internal_radius() as usize);
                let good = a.disjoint && a.triples_cover && a.radius_bound_ok;
                ok &= good;
                rows.push(ctx.row(check, eta, a.max_radius, a.radius_bound));
                detail.push(format!("eta {eta:.3}: {}", if good { "ok" } else { "violated" }));
            }
            let s = summary(check, ok, f64::NAN, "disjoint, triples cover, radius bound", detail.join("; "));
            Ok(CheckOutput { rows, summary: s })
        }
        "doubling" => {
            let radii = dyadic_radii(2.0 * radius);
            let pi_u = dom.pi_u();
            let base = doubling_constant(dom, &pi_u, &radii, &Sample::All)?;
            let tilted = doubling_constant(dom, &ctx.sp.pi_phi0, &radii, &Sample::All)?;
            let rows = vec![
                ctx.row("doubling_pi_u", base.worst_witness.1, base.constant, f64::NAN),
                ctx.row("doubling_pi_phi0", tilted.worst_witness.1, tilted.constant, f64::NAN),
            ];
            let ok = base.constant.is_finite() && tilted.constant.is_finite();
            let s = summary(
                check,
                ok,
                tilted.constant,
                "finite",
                format!("D(pi_U) = {:.3}, D(pi_phi0) = {:.3}", base.constant, tilted.constant),
            );
            Ok(CheckOutput { rows, summary: s })
        }
        "poincare" => {
            let radii = dyadic_radii(radius);
            let sample = if dom.len() > 400 { Sample::Random { n: 200, seed: ctx.seed } } else { Sample::All };
            let base = poincare_scan(dom, &radii, THETA, Weights::Base, &sample)?;
            let psi: Vec<f64> = ctx.sp.phi0.iter().map(|v| v * v).collect();
            let tilted = poincare_scan(
                dom,
                &radii,
                THETA,
                Weights::Tilted { psi: &psi, rule: crate::kernels::HRule::Geometric },
                &sample,
            )?;
            let rows = vec![
                ctx.row("poincare_base", base.witness.1, base.constant, f64::NAN),
                ctx.row("poincare_phi0", tilted.witness.1, tilted.constant, f64::NAN),
            ];
            let ok = base.constant.is_finite() && tilted.constant.is_finite();
            let s = summary(
                check,
                ok,
                tilted.constant,
                "finite",
                format!("P(base) = {:.3}, P(phi0) = {:.3}", base.constant, tilted.constant),
            );
            Ok(CheckOutput { rows, summary: s })
        }
        "nash" => {
            let nk = neumann_kernel(dom)?.lazy(LAZY_HOLDING)?;
            let growth = moderate_growth(dom, &dom.pi_u())?;
            let suite = test_suite(dom, Some(&nk), 4, ctx.seed)?;
            let rep = verify_nash(&nk, THETA, growth.nu.max(1e-3), radius * radius, &suite)?;
            let rows = rep.decay.iter().map(|&(n, m, b)| ctx.row(check, n as f64, m, b)).collect();
            let s = summary(
                check,
                rep.decay_holds,
                rep.c_suite,
                "decay bound holds",
                format!("C = {:.4}, nu = {:.3}", rep.c_suite, growth.nu),
            );
            Ok(CheckOutput { rows, summary: s })
        }
        "carleson" => {
            ctx.require_iu(check)?;
            let cert = ctx.certificate()?.clone();
            let radii = dyadic_radii(radius);
            let radii: Vec<f64> = radii.into_iter().filter(|&r| r >= 1.0).collect();
            let rep = carleson_check(&ctx.sp, dom, XrMap::Certified(&cert), &radii)?;
            let rows = vec![
                ctx.row("carleson_c0", rep.witness.1, rep.c0, f64::NAN),
                ctx.row("carleson_doubling", f64::NAN, rep.doubling, f64::NAN),
                ctx.row("carleson_regularity", 0.125, rep.regularity, f64::NAN),
            ];
            let s = summary(
                check,
                rep.c0.is_finite() && rep.doubling.is_finite(),
                rep.c0,
                "finite",
                format!("C0 = {:.4}, D0 = {:.3}", rep.c0, rep.doubling),
            );
            Ok(CheckOutput { rows, summary: s })
        }
        "gaussian" => {
            ctx.require_iu(check)?;
            let cert = ctx.certificate()?.clone();
            let doob = doob_transform(k, &ctx.sp)?;
            let n = ctx.p.size().max(2);
            let ts: Vec<usize> = [4, n * n / 4, n * n].into_iter().filter(|&t| t > 0).collect();
            let starts: Vec<usize> = if dom.len() <= 400 {
                (0..dom.len()).collect()
            } else {
                (0..dom.len()).step_by(dom.len() / 200).collect()
            };
            let rep = gaussian_bound_check(&doob, &ctx.sp, dom, XrMap::Certified(&cert), &ts, &starts)?;
            let rows = rep
                .rows
                .iter()
                .map(|r| ctx.row(check, r.t as f64, r.measured, 1.0 / r.denominator))
                .collect();
            let ok = rep.fit.c2 > 0.0 && rep.lower_violations == 0;
            let s = summary(
                check,
                ok,
                rep.fit.c2,
                "c2 > 0, no lower violations",
                format!("{:?}, lower violations {}", rep.fit, rep.lower_violations),
            );
            Ok(CheckOutput { rows, summary: s })
        }
        "exit_time" => {
            ctx.require_iu(check)?;
            let cert = ctx.certificate()?.clone();
            let n = ctx.p.size().max(2);
            let ts = [1, n, n * n / 4, n * n];
            let grid: Vec<(usize, usize)> = (0..dom.len()).flat_map(|x| ts.map(|t| (x, t))).collect();
            let rep = exit_time_bound_check(k, &ctx.sp, dom, XrMap::Certified(&cert), &grid)?;
            let rows = rep.rows.iter().map(|r| ctx.row(check, r.t, r.measured, r.envelope)).collect();
            let w = rep.window();
            let s = summary(
                check,
                w <= 100.0,
                w,
                "max/min ratio <= 100",
                format!("ratios in [{:.4}, {:.4}]", rep.min_ratio, rep.max_ratio),
            );
            Ok(CheckOutput { rows, summary: s })
        }
        "convergence" => {
            require_aperiodic(k)?;
            let doob = doob_transform(k, &ctx.sp)?;
            let rep = convergence_profile(&doob, &ctx.sp, None)?;
            let rows = rep
                .points
                .iter()
                .map(|&(t, d)| ctx.row(check, t as f64, d, (-rep.predicted_rate * t as f64).exp()))
                .collect();
            let s = summary(
                check,
                rep.relative_error <= 0.05,
                rep.relative_error,
                "fitted rate within 5% of spectral rate",
                format!("fitted {:.5}, predicted {:.5}", rep.fitted_rate, rep.predicted_rate),
            );
            Ok(CheckOutput { rows, summary: s })
        }
        "qsd" => {
            require_aperiodic(k)?;
            let doob = doob_transform(k, &ctx.sp)?;
            let x = dom.center();
            let mut rows = Vec::new();
            let mut ok = true;
            let mut detail = Vec::new();
            for eps in [0.1, 0.01] {
                let r = nu_control_check(&doob, &ctx.sp, eps, x)?;
                ok &= r.holds;
                rows.push(ctx.row(check, r.n_eps as f64, r.worst, r.bound));
                detail.push(format!("eps {eps}: N_eps {} worst {:.3e} bound {:.3e}", r.n_eps, r.worst, r.bound));
            }
            Ok(CheckOutput { rows, summary: summary(check, ok, f64::NAN, "worst <= 2 eps/(1-eps)", detail.join("; ")) })
        }
        "path_bound" => {
            let b = eigenvalue_path_bound(dom, None)?;
            let gap = 1.0 - ctx.sp.beta0;
            let rows = vec![ctx.row(check, b.weight_exponent, gap, b.lower_bound)];
            let s = summary(
                check,
                gap >= b.lower_bound,
                gap / b.lower_bound,
                "1 - beta0 >= 1/C_w",
                format!("1 - beta0 = {gap:.4e}, 1/C_w = {:.4e}", b.lower_bound),
            );
            Ok(CheckOutput { rows, summary: s })
        }
        other => Err(Error::validation(format!("unknown check `{other}`"))),
    }
}

/// Resolve the check list; `all` expands to every check.
pub fn resolve_checks(names: &[String]) -> Result<(Vec<&'static str>, bool)> {
    let names: Vec<&str> = names.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err(Error::validation("the check list is empty"));
    }
    if names.contains(&"all") {
        return Ok((CHECKS.to_vec(), true));
    }
    let mut out = Vec::new();
    for n in names {
        let c = CHECKS
            .iter()
            .find(|c| **c == n)
            .ok_or_else(|| Error::validation(format!("unknown check `{n}`; known: {}", CHECKS.join(", "))))?;
        if !out.contains(c) {
            out.push(*c);
        }
    }
    // The inner-uniform certificate, when requested, must exist before the
    // checks that depend on it.
    out.sort_by_key(|c| CHECKS.iter().position(|k| k == c));
    Ok((out, false))
}

pub fn cmd_verify(a: &VerifyArgs, threads: Option<usize>) -> Result<i32> {
    let (checks, expanded) = resolve_checks(&a.checks)?;
    let p = prepare(&a.domain, "verify")?;
    let mut cfg = config(&p, "verify", &a.domain, threads);
    cfg.checks = Some(checks.iter().map(|c| c.to_string()).collect());
    cfg.seed = Some(a.seed);
    write_provenance(&p, &cfg)?;
    let sp = solve_pair(&p)?;
    let iu = p.class() == Some(GeometricClass::InnerUniform);
    let mut ctx = VerifyCtx { p: &p, sp, seed: a.seed, cert: None, iu };
    let mut summaries = Vec::new();
    let mut plot = Vec::new();
    for check in checks {
        match run_check(&mut ctx, check) {
            Ok(out) => {
                io::write_rows(&p.out.join(format!("{check}.csv")), &out.rows)?;
                plot.extend(out.rows);
                summaries.push(out.summary);
            }
            Err(e @ (Error::Dependency(_) | Error::Periodic { .. })) if expanded => summaries.push(SummaryRow {
                check: check.to_string(),
                status: Status::Skip,
                statistic: f64::NAN,
                window: String::new(),
                detail: e.to_string(),
            }),
            Err(e) => {
                io::write_rows(&p.out.join("summary.csv"), &summaries)?;
                return Err(e);
            }
        }
    }
    io::write_rows(&p.out.join("summary.csv"), &summaries)?;
    if a.domain.plot_data {
        write_plot_bins(&p.out.join("plot_data.csv"), &plot)?;
    }
    let stdout = std::io::stdout();
    let mut h = stdout.lock();
    for s in &summaries {
        let _ = writeln!(h, "{:<14} {:?} {}", s.check, s.status, s.detail);
    }
    Ok(if summaries.iter().any(|s| s.status == Status::Fail) { 4 } else { 0 })
}

/// Ratio ranges per check and `t_or_r` value.
fn write_plot_bins(path: &Path, rows: &[CheckRow]) -> Result<()> {
    let mut groups: std::collections::BTreeMap<(String, u64), (usize, f64, f64)> = Default::default();
    for r in rows.iter().filter(|r| r.ratio.is_finite()) {
        let e = groups
            .entry((r.check_id.clone(), r.t_or_r.to_bits()))
            .or_insert((0, f64::INFINITY, f64::NEG_INFINITY));
        e.0 += 1;
        e.1 = e.1.min(r.ratio);
        e.2 = e.2.max(r.ratio);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["check_id", "t_or_r", "count", "min_ratio", "max_ratio"])?;
    for ((c, t), (n, lo, hi)) in groups {
        w.serialize((c, f64::from_bits(t), n, lo, hi))?;
    }
    w.flush()?;
    Ok(())
}
