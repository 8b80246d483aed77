//! Command dispatch. Every command fills one [`Report`] and may drop CSV
//! tables next to it; the boolean each handler returns is the verdict that
//! decides between exit status 0 and 1.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use decaycert::attractor::{default_schedule, invariance_gap, pullback_attractor, sample_ball};
use decaycert::certificate::{
    bounds, chen_rate, derive_constants, exp_certificate, halanay_map, hale_envelope, CertificateConstants,
    Decay, ExpDecayCertificate, InequalityData, Verdict,
};
use decaycert::config::{Config, ConfigError, SectorialSection, SuperlinearSection};
use decaycert::dde::{aligned_step, integrate, DelaySystem, History, Trajectory};
use decaycert::func::ScalarFunction;
use decaycert::kernels::{decay_majorant, kappa_sup, theta_sup, Kernel2, QuadratureConfig};
use decaycert::oracle::{characteristic_root, log_slope, majorant_fixed_point, OracleError, OracleOptions};
use decaycert::report::Report;
use decaycert::sectorial::{neural_demo_build, sectorial_thresholds, NeuralDemo, SectorialParams, Variant};
use decaycert::systems::{
    linear_lag_system, periodic_certificate, periodic_tau_grid, scalar_fde_certificate, superlinear_certificate,
    ScalarFde, SuperlinearSystem, SystemError,
};

/// Horizon for sup estimates when the configuration gives none.
const DEFAULT_HORIZON: f64 = 50.0;
/// Simulated span when `simulation.t_end` is absent.
const DEFAULT_SPAN: f64 = 20.0;
/// Largest state gap accepted by the neural convergence and periodicity checks.
const DEMO_TOL: f64 = 1e-4;
/// Samples per segment when computing segment norms for CSV output.
const SEGMENT_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Certify,
    Simulate,
    Verify,
    Attractor,
    Halanay,
    Sectorial,
    Oracle,
    Demo,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Certify => "certify",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Attractor => "attractor",
            Command::Halanay => "halanay",
            Command::Sectorial => "sectorial",
            Command::Oracle => "oracle",
            Command::Demo => "demo",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Status {
    pub positive: bool,
    pub summary: String,
}

impl Status {
    pub fn code(&self) -> u8 {
        if self.positive {
            0
        } else {
            1
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Core(decaycert::Error),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> String {
        match self {
            Failure::Core(e) => e.code(),
            Failure::Io(_) => "cli.Io".into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

fn core<E: Into<decaycert::Error>>(e: E) -> Failure {
    Failure::Core(e.into())
}

fn io(e: impl fmt::Display) -> Failure {
    Failure::Io(e.to_string())
}

fn invalid(msg: impl Into<String>) -> Failure {
    core(ConfigError::Invalid(msg.into()))
}

fn missing(section: &str) -> Failure {
    core(ConfigError::Missing(section.into()))
}

struct Ctx<'a> {
    cfg: &'a Config,
    quad: QuadratureConfig,
    out: &'a Path,
    seed: u64,
    /// Initial norm the a priori bounds are evaluated at.
    y0_norm: f64,
    report: Report,
}

pub fn run(rc: &RunConfig) -> Result<Status, Failure> {
    let cfg = Config::load(&rc.input_path, &rc.overrides).map_err(core)?;
    std::fs::create_dir_all(&rc.output_dir).map_err(io)?;
    let mut ctx = Ctx {
        cfg: &cfg,
        quad: cfg.quadrature(),
        out: &rc.output_dir,
        seed: rc.seed,
        y0_norm: match rc.command {
            Command::Oracle => cfg.oracle.y0_norm,
            _ => cfg.simulation.history_norm,
        },
        report: Report::new(),
    };
    ctx.report.set("command", rc.command.as_str()).set("seed", rc.seed.to_string());
    let result = match rc.command {
        Command::Certify => certify(&mut ctx),
        Command::Simulate => simulate(&mut ctx),
        Command::Verify => verify(&mut ctx),
        Command::Attractor => attractor(&mut ctx),
        Command::Halanay => halanay_command(&mut ctx),
        Command::Sectorial => sectorial_command(&mut ctx),
        Command::Oracle => oracle(&mut ctx),
        Command::Demo => demo(&mut ctx),
    };
    match result {
        Ok(positive) => {
            ctx.report.set("positive", positive);
            ctx.report.write(ctx.out).map_err(io)?;
            let verdict = ctx
                .report
                .get("verdict")
                .map(|v| format!(" verdict={}", text(v)))
                .unwrap_or_default();
            Ok(Status {
                positive,
                summary: format!(
                    "{}{verdict} positive={positive} report={}",
                    rc.command.as_str(),
                    ctx.out.join("report.txt").display()
                ),
            })
        }
        Err(e) => {
            // leave a report behind so the failure is visible next to the artifacts
            ctx.report.set("error.code", e.code()).set("error.message", e.to_string());
            let _ = ctx.report.write(ctx.out);
            Err(e)
        }
    }
}

fn text(v: &decaycert::report::Value) -> String {
    match v {
        decaycert::report::Value::Text(s) => s.clone(),
        other => format!("{other:?}"),
    }
}

fn selected(ctx: &mut Ctx<'_>) -> Result<String, Failure> {
    let name = ctx.cfg.selected().map_err(core)?.to_string();
    ctx.report.set("system", name.as_str());
    Ok(name)
}

/// What a certification produced, for commands that go on to simulate.
struct Certified {
    consts: CertificateConstants,
    cert: Option<ExpDecayCertificate>,
    rho: f64,
}

impl Certified {
    fn geas(&self) -> bool {
        self.consts.verdict == Verdict::Geas
    }
}

fn certify(ctx: &mut Ctx<'_>) -> Result<bool, Failure> {
    let cfg = ctx.cfg;
    match selected(ctx)?.as_str() {
        "inequality" => {
            let s = cfg.inequality.as_ref().unwrap();
            let data = s.build().map_err(core)?;
            Ok(certify_data(ctx, &data, s.horizon.unwrap_or(DEFAULT_HORIZON))?.geas())
        }
        "halanay" => Ok(certify_halanay(ctx)?.geas()),
        "linear_lag" => Ok(certify_linear_lag(ctx)?.geas()),
        "scalar_fde" => {
            let s = cfg.scalar_fde.as_ref().unwrap();
            let sys = s.build().map_err(core)?;
            Ok(certify_fde(ctx, &sys, s.tau_samples, s.horizon)?.geas())
        }
        "periodic" => certify_periodic(ctx),
        "superlinear" => certify_superlinear(ctx, cfg.superlinear.as_ref().unwrap()).map(|c| c.is_some()),
        "sectorial" => sectorial_section(ctx, cfg.sectorial.as_ref().unwrap()),
        "neural" => neural_section(ctx).map(|(_, ok)| ok),
        other => Err(invalid(format!("unknown system {other:?}"))),
    }
}

fn report_constants(r: &mut Report, consts: &CertificateConstants) {
    r.note("theta", consts.theta, "sup E(t,s), upper bound")
        .note("kappa", consts.kappa, "sup of past plus future kernel mass, upper bound")
        .note("mu", consts.mu, "1/(1-kappa)")
        .note("c", consts.c, "max(theta/(1-kappa), 1)")
        .note("gamma", consts.gamma, "(mu+1)/(1-kappa c)")
        .note("sigma", consts.sigma, "(1+kappa c)/2")
        .note("verdict", consts.verdict.as_str(), "GEAS iff kappa < 1/(1+theta); GAS_only iff kappa < 1");
}

fn report_certificate(r: &mut Report, cert: Option<&ExpDecayCertificate>) {
    const ENV: &str = "|y_t| <= M |phi| exp(-lambda (t-tau)) + gamma rho";
    r.note("envelope.M", cert.map(|c| c.m), ENV)
        .note("envelope.lambda", cert.map(|c| c.lambda), "certified decay rate")
        .note("envelope.horizon", cert.map(|c| c.horizon), "crossing time plus lag")
        .set("envelope.t0", cert.map(|c| c.t0))
        .set("envelope.t1", cert.map(|c| c.t1));
}

fn report_bounds(ctx: &mut Ctx<'_>, consts: &CertificateConstants, rho: f64) -> Result<(), Failure> {
    let y0 = ctx.y0_norm;
    let b = bounds(consts, y0, rho).ok();
    ctx.report
        .set("bound.y0_norm", y0)
        .set("rho", rho)
        .note("bound.uniform", b.map(|b| b.uniform), "c |y0| + mu rho")
        .note("bound.ultimate", b.map(|b| b.ultimate), "mu rho")
        .note("bound.apriori", b.map(|b| b.apriori), "(c+1)(|y0|+1) + mu rho");
    Ok(())
}

fn finish(ctx: &mut Ctx<'_>, consts: CertificateConstants, cert: Option<ExpDecayCertificate>, rho: f64) -> Result<Certified, Failure> {
    report_constants(&mut ctx.report, &consts);
    report_certificate(&mut ctx.report, cert.as_ref());
    report_bounds(ctx, &consts, rho)?;
    Ok(Certified { consts, cert, rho })
}

fn certify_data(ctx: &mut Ctx<'_>, data: &InequalityData, horizon: f64) -> Result<Certified, Failure> {
    data.validate().map_err(core)?;
    let theta = theta_sup(&data.e, horizon, &ctx.quad).map_err(core)?;
    let kappa = kappa_sup(data.k1.as_ref(), data.k2.as_ref(), horizon, &ctx.quad).map_err(core)?;
    ctx.report
        .set("theta_pad", theta.pad)
        .set("kappa_pad", kappa.pad)
        .set("horizon", horizon);
    let consts = derive_constants(theta.upper(), kappa.upper());
    let cert = if consts.verdict == Verdict::Geas {
        let decay = match &data.e {
            Kernel2::ExponentialScaled { m0, lambda0 } => exp_certificate(
                &consts,
                Decay::Exponential {
                    m0: *m0,
                    lambda0: *lambda0,
                },
                data.r,
            ),
            e => {
                let maj = decay_majorant(e, horizon, 64, &ctx.quad).map_err(core)?;
                exp_certificate(&consts, Decay::Majorant(&maj), data.r)
            }
        };
        Some(decay.map_err(core)?)
    } else {
        None
    };
    finish(ctx, consts, cert, data.rho)
}

fn halanay_data(alpha: f64, beta: f64, r: f64, rho: f64) -> Result<InequalityData, Failure> {
    let mut data = halanay_map(alpha, beta, r).map_err(core)?;
    data.rho = rho;
    Ok(data)
}

fn certify_halanay(ctx: &mut Ctx<'_>) -> Result<Certified, Failure> {
    let s = ctx.cfg.halanay.as_ref().ok_or_else(|| missing("halanay"))?;
    let out = certify_data(ctx, &halanay_data(s.alpha, s.beta, s.r, s.rho)?, DEFAULT_HORIZON)?;
    let chen = chen_rate(s.alpha, s.beta, s.r).ok();
    ctx.report
        .note("halanay.chen_rate", chen, "root of beta exp(mu r) = alpha - mu")
        .set(
            "halanay.lambda_below_chen_rate",
            match (out.cert, chen) {
                (Some(c), Some(m)) => decaycert::report::Value::Bool(c.lambda <= m),
                _ => decaycert::report::Value::Undefined,
            },
        );
    // the same inequality read as a past-only Hale envelope with K = 1
    let hale = hale_envelope(1.0, s.beta, 0.0, s.alpha, 1.0, 0.0).ok();
    ctx.report
        .note("hale.ratio", hale.map(|h| h.beta), "L/alpha")
        .note("hale.exponent", hale.map(|h| h.exponent), "alpha - L/(1 - L/alpha)")
        .set("hale.decays", hale.is_some_and(|h| h.decays));
    Ok(out)
}

fn halanay_command(ctx: &mut Ctx<'_>) -> Result<bool, Failure> {
    ctx.report.set("system", "halanay");
    Ok(certify_halanay(ctx)?.geas())
}

fn certify_linear_lag(ctx: &mut Ctx<'_>) -> Result<Certified, Failure> {
    let s = ctx.cfg.linear_lag.as_ref().ok_or_else(|| missing("linear_lag"))?;
    let out = certify_data(ctx, &halanay_data(s.a, s.b.abs(), s.lag, 0.0)?, DEFAULT_HORIZON)?;
    let root = characteristic_root(s.a, s.b, s.lag).ok();
    ctx.report
        .note("characteristic_root", root, "real root of lambda + a = b exp(-lambda lag)");
    Ok(out)
}

fn certify_fde(
    ctx: &mut Ctx<'_>,
    sys: &ScalarFde,
    tau_samples: usize,
    horizon: Option<f64>,
) -> Result<Certified, Failure> {
    let period = sys.a.period();
    let horizon = horizon.unwrap_or(period.map_or(DEFAULT_HORIZON, |p| 10.0 * p));
    let taus = periodic_tau_grid(period.unwrap_or(horizon), tau_samples);
    let rep = scalar_fde_certificate(sys, &taus, horizon, &ctx.quad).map_err(core)?;
    ctx.report
        .set("horizon", horizon)
        .note("tau_sweep.count", taus.len(), "initial times sampled")
        .note("tau_sweep.verdict", rep.verdict.as_str(), "verdict holding at every sampled initial time");
    let consts = rep.constants();
    let cert = if consts.verdict == Verdict::Geas {
        Some(exp_certificate(&consts, Decay::Majorant(&rep.majorant), sys.r).map_err(core)?)
    } else {
        None
    };
    finish(ctx, consts, cert, 0.0)
}

fn periodic_fde(ctx: &Ctx<'_>) -> Result<(ScalarFde, f64), Failure> {
    let s = ctx.cfg.periodic.as_ref().ok_or_else(|| missing("periodic"))?;
    let a = s.a.build().map_err(core)?;
    let omega = s
        .omega
        .or_else(|| a.period())
        .ok_or_else(|| invalid("periodic needs omega or a periodic coefficient"))?;
    Ok((ScalarFde::lagged(a, ScalarFunction::constant(s.beta), s.lag), omega))
}

fn certify_periodic(ctx: &mut Ctx<'_>) -> Result<bool, Failure> {
    let (fde, omega) = periodic_fde(ctx)?;
    let beta = ctx.cfg.periodic.as_ref().unwrap().beta;
    let rep = periodic_certificate(&fde.a, omega, beta, fde.r, &ctx.quad).map_err(core)?;
    let r = &mut ctx.report;
    r.set("periodic.omega", rep.omega)
        .set("periodic.beta", rep.beta)
        .note("periodic.mean_integral", rep.i, "integral of a over one period")
        .note("periodic.positive_part", rep.i_plus, "integral of a^+ over one period")
        .note("periodic.negative_part", rep.i_minus, "integral of a^- over one period")
        .note("periodic.rate", rep.lambda_rate, "mean of a")
        .note("periodic.theta_bound", rep.theta_bound, "exp of the negative part")
        .note("periodic.kappa_bound", rep.kappa_bound, "beta omega exp(positive part) / mean integral")
        .note("periodic.gas_threshold", rep.beta1, "beta below this gives GAS")
        .note("periodic.geas_threshold", rep.beta2, "beta below this gives GEAS")
        .note("periodic.swept_theta", rep.exact_theta, "swept over initial times")
        .note("periodic.swept_kappa", rep.exact_kappa, "swept over initial times")
        .set("periodic.swept_verdict", rep.exact_verdict.as_str())
        .note("verdict", rep.verdict.as_str(), "from the period-integral thresholds");
    if let Some(c) = &rep.coarse {
        r.note("periodic.coarse.gas_threshold", c.beta1, "closed-form bound for a sine coefficient")
            .set("periodic.coarse.geas_threshold", c.beta2)
            .set("periodic.coarse.positive_part", c.i_plus)
            .set("periodic.coarse.negative_part", c.i_minus);
    }
    Ok(rep.verdict == Verdict::Geas)
}

fn certify_superlinear(ctx: &mut Ctx<'_>, s: &SuperlinearSection) -> Result<Option<SuperlinearSystem>, Failure> {
    let sys = s.build().map_err(core)?;
    let r = &mut ctx.report;
    match superlinear_certificate(&sys) {
        Ok(c) => {
            r.note("superlinear.gamma_exp", c.gamma_exp, "p(q-1)/(p-q) + 1")
                .note("superlinear.alpha0", c.alpha0, "dissipation coefficient, halved under forcing")
                .note("superlinear.alpha_sum", c.alpha_sum, "sum of coupling magnitudes")
                .set("superlinear.c0", c.c0)
                .set("superlinear.c1", c.c1)
                .set("superlinear.c2", c.c2)
                .note("superlinear.theta", c.theta, "exp(c2)")
                .set("superlinear.kappa0", c.kappa0)
                .note("superlinear.eps", c.eps_star, "largest admissible epsilon found")
                .set("superlinear.dissipative", c.dissipative)
                .set("verdict", if c.dissipative { "dissipative" } else { "not_dissipative" });
            Ok(c.dissipative.then_some(sys))
        }
        Err(SystemError::Infeasible { binding }) => {
            r.set("superlinear.dissipative", false)
                .set("superlinear.binding_constraint", binding)
                .set("verdict", "not_dissipative");
            Ok(None)
        }
        Err(SystemError::ForcingBoundViolated { s, t, excess }) => {
            r.set("superlinear.dissipative", false)
                .note("superlinear.forcing_violation", excess, "excess over M(t-s)+N")
                .set("superlinear.forcing_violation_window", vec![s, t])
                .set("verdict", "not_dissipative");
            Ok(None)
        }
        Err(e) => Err(core(e)),
    }
}

fn report_sectorial(
    ctx: &mut Ctx<'_>,
    prefix: &str,
    params: &SectorialParams,
    variant: Variant,
) -> Result<bool, Failure> {
    let v = sectorial_thresholds(params, variant, &ctx.quad).map_err(core)?;
    let key = |k: &str| format!("{prefix}.{k}");
    ctx.report
        .set(key("variant"), variant.as_str())
        .set(key("alpha"), params.alpha)
        .set(key("beta"), params.beta)
        .note(key("m_sect"), params.m_sect, "semigroup bound |exp(-At)| <= M exp(-beta t)")
        .note(key("lipschitz"), params.lipschitz, "Lipschitz constant L of the nonlinearity")
        .note(key("kappa0"), v.kappa0.upper(), "sup of the resolvent kernel mass, upper bound")
        .note(key("equilibrium_threshold"), v.equilibrium_threshold, "1/(kappa0 M)")
        .note(key("geas_threshold"), v.geas_threshold, "1/(kappa0 M (1+M))")
        .set(key("equilibrium_exists"), v.equilibrium_exists)
        .set(key("gas"), v.gas)
        .set(key("geas"), v.geas)
        .note(key("rho_eq"), v.rho_eq, "radius of the ball around the bounded complete solution");
    Ok(v.equilibrium_exists)
}

fn sectorial_section(ctx: &mut Ctx<'_>, s: &SectorialSection) -> Result<bool, Failure> {
    let (params, variant) = s.build().map_err(core)?;
    report_sectorial(ctx, "sectorial", &params, variant)
}

fn neural_section(ctx: &mut Ctx<'_>) -> Result<(NeuralDemo, bool), Failure> {
    let s = ctx.cfg.neural.as_ref().ok_or_else(|| missing("neural"))?;
    let net = s.build().map_err(core)?;
    let demo = neural_demo_build(&net).map_err(core)?;
    ctx.report
        .set("neural.neurons", net.neurons())
        .set("neural.mesh_points", net.mesh_points)
        .note("neural.decay_rate", demo.beta, "smallest eigenvalue of the symmetric part of A - B")
        .note("neural.gershgorin_rate", demo.gershgorin_beta, "row-sum lower bound, cross-check")
        .set("neural.symmetric_coupling", demo.symmetric)
        .note("neural.i_const", demo.i_const, "1/beta")
        .note("neural.unique_periodic", demo.unique_periodic, "L < 1/(M I)");
    let ok = report_sectorial(ctx, "neural", &demo.params, Variant::Stable)?;
    let unique = demo.unique_periodic;
    Ok((demo, ok && unique))
}

fn sectorial_command(ctx: &mut Ctx<'_>) -> Result<bool, Failure> {
    let cfg = ctx.cfg;
    if cfg.sectorial.is_none() && cfg.neural.is_none() {
        return Err(missing("sectorial"));
    }
    let mut ok = true;
    if let Some(s) = &cfg.sectorial {
        ok &= sectorial_section(ctx, s)?;
    }
    if cfg.neural.is_some() {
        ok &= neural_section(ctx)?.1;
    }
    Ok(ok)
}

/// Seeded history `c0 + c1 sin(w s + p)` per component, sup norm at most `norm`.
fn random_history(rng: &mut ChaCha8Rng, dim: usize, norm: f64) -> History {
    let size = norm * rng.random_range(0.5..=1.0) / (dim as f64).sqrt();
    let comps: Vec<[f64; 4]> = (0..dim)
        .map(|_| {
            let c0: f64 = rng.random_range(-1.0..=1.0);
            let c1: f64 = rng.random_range(-1.0..=1.0);
            let scale = size / (c0.abs() + c1.abs()).max(1e-3);
            [scale * c0, scale * c1, rng.random_range(0.0..6.0), rng.random_range(0.0..TAU)]
        })
        .collect();
    History::function(dim, move |s, out| {
        for (o, [a, b, w, p]) in out.iter_mut().zip(&comps) {
            *o = a + b * (w * s + p).sin();
        }
    })
}

fn histories(ctx: &Ctx<'_>, dim: usize, n: usize) -> Result<Vec<History>, Failure> {
    let sim = &ctx.cfg.simulation;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut out = Vec::with_capacity(n);
    if let Some(v) = &sim.history {
        if v.len() != dim {
            return Err(invalid(format!("history has {} components, the system has {dim}", v.len())));
        }
        out.push(History::constant(v.clone()));
    }
    while out.len() < n.max(1) {
        out.push(random_history(&mut rng, dim, sim.history_norm));
    }
    Ok(out)
}

fn integrate_all(ctx: &mut Ctx<'_>, sys: &DelaySystem, hists: &[History], t_end: f64) -> Result<Vec<Trajectory>, Failure> {
    let sim = &ctx.cfg.simulation;
    let h = aligned_step(sim.h, sys);
    ctx.report
        .note("simulation.h", h, "step, aligned to the constant lags")
        .set("simulation.tau", sim.tau)
        .set("simulation.t_end", t_end)
        .set("simulation.histories", hists.len());
    hists
        .iter()
        .map(|phi| integrate(sys, phi, sim.tau, t_end, h, &sim.options()).map_err(core))
        .collect()
}

fn save_trajectory(ctx: &Ctx<'_>, traj: &Trajectory, name: &str) -> Result<(), Failure> {
    traj.save_csv(&ctx.out.join(name), SEGMENT_SAMPLES).map_err(core)
}

fn delay_system(ctx: &mut Ctx<'_>, name: &str) -> Result<DelaySystem, Failure> {
    let cfg = ctx.cfg;
    Ok(match name {
        "halanay" => {
            let s = cfg.halanay.as_ref().unwrap();
            linear_lag_system(s.alpha, s.beta, s.r)
        }
        "linear_lag" => {
            let s = cfg.linear_lag.as_ref().unwrap();
            linear_lag_system(s.a, s.b, s.lag)
        }
        "scalar_fde" => cfg.scalar_fde.as_ref().unwrap().build().map_err(core)?.system(),
        "periodic" => periodic_fde(ctx)?.0.system(),
        "superlinear" => cfg.superlinear.as_ref().unwrap().build().map_err(core)?.system(),
        "neural" => {
            let net = cfg.neural.as_ref().unwrap().build().map_err(core)?;
            neural_demo_build(&net).map_err(core)?.system
        }
        other => return Err(invalid(format!("section [{other}] does not describe a delay system"))),
    })
}

fn simulate(ctx: &mut Ctx<'_>) -> Result<bool, Failure> {
    let name = selected(ctx)?;
    let sys = delay_system(ctx, &name)?;
    let sim = &ctx.cfg.simulation;
    let t_end = sim.t_end.unwrap_or(sim.tau + DEFAULT_SPAN);
    let hists = histories(ctx, sys.dim, sim.n_histories)?;
    let trajs = integrate_all(ctx, &sys, &hists, t_end)?;
    for (k, traj) in trajs.iter().enumerate() {
        let file = if k == 0 {
            "trajectory.csv".to_string()
        } else {
            format!("trajectory_{k}.csv")
        };
        save_trajectory(ctx, traj, &file)?;
        let last = traj.times().len() - 1;
        ctx.report
            .set(format!("trajectory.{k}.file"), file)
            .set(format!("trajectory.{k}.initial_norm"), hists[k].sup_norm(sys.max_lag, 256))
            .note(
                format!("trajectory.{k}.final_segment_norm"),
                traj.segment_norm(traj.times()[last], 256).map_err(core)?,
                "sup norm over the last lag window",
            );
    }
    Ok(true)
}

fn verify(ctx: &mut Ctx<'_>) -> Result<bool, Failure> {
    let name = selected(ctx)?;
    let certified = match name.as_str() {
        "halanay" => certify_halanay(ctx)?,
        "linear_lag" => certify_linear_lag(ctx)?,
        "scalar_fde" => {
            let s = ctx.cfg.scalar_fde.as_ref().unwrap();
            certify_fde(ctx, &s.build().map_err(core)?, s.tau_samples, s.horizon)?
        }
        "periodic" => {
            let (fde, omega) = periodic_fde(ctx)?;
            certify_fde(ctx, &fde, 16, Some(10.0 * omega))?
        }
        other => {
            return Err(invalid(format!(
                "verify needs a delay system with an exponential certificate, not [{other}]"
            )))
        }
    };
    let Some(cert) = certified.cert else {
        ctx.report.set("verify.skipped", "no exponential certificate");
        return Ok(false);
    };
    let gamma = certified.consts.gamma.expect("GEAS constants define gamma");
    let sys = delay_system(ctx, &name)?;
    let sim = &ctx.cfg.simulation;
    let span = sim.t_end.map_or(DEFAULT_SPAN, |t| t - sim.tau).max(cert.horizon);
    let hists = histories(ctx, sys.dim, sim.n_histories)?;
    let tol = sim.envelope_tol;
    let trajs = integrate_all(ctx, &sys, &hists, sim.tau + span)?;
    save_trajectory(ctx, &trajs[0], "trajectory.csv")?;
    let mut passed = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_time = sim.tau;
    let mut allowance = 0.0f64;
    for traj in &trajs {
        let env = traj.verify_envelope(&cert, gamma, certified.rho, tol).map_err(core)?;
        passed += usize::from(env.passed);
        allowance = allowance.max(env.allowance);
        if env.max_violation > worst {
            worst = env.max_violation;
            worst_time = env.worst_time;
        }
    }
    let all = passed == trajs.len();
    ctx.report
        .set("verify.histories", trajs.len())
        .set("verify.passed", passed)
        .note("verify.max_violation", worst, "largest segment norm minus envelope, negative when inside")
        .set("verify.worst_time", worst_time)
        .note("verify.allowance", allowance, "tol (M |phi| + gamma rho + 1)")
        .set("verify.all_passed", all);
    Ok(all)
}

fn attractor(ctx: &mut Ctx<'_>) -> Result<bool, Failure> {
    let cfg = ctx.cfg;
    let s = cfg.superlinear.as_ref().ok_or_else(|| missing("superlinear"))?;
    ctx.report.set("system", "superlinear");
    certify_superlinear(ctx, s)?;
    let sys_def = s.build().map_err(core)?;
    let sys = sys_def.system();
    let a = &cfg.attractor;
    let r = sys.max_lag;
    let cloud = sample_ball(sys.dim, r, a.radius, a.n_random, a.spacing, ctx.seed).map_err(core)?;
    let schedule = default_schedule(a.t_star, r);
    let opts = cfg.simulation.options();
    let rep = pullback_attractor(&sys, a.t_star, &cloud, &schedule, a.h, a.tol, a.containment_radius, &opts)
        .map_err(core)?;
    let gap = invariance_gap(&sys, &rep, &cloud, r.max(1.0), a.h, &opts).map_err(core)?;
    let f = std::fs::File::create(ctx.out.join("attractor_sample.csv")).map_err(io)?;
    rep.attractor_sample.write_csv(std::io::BufWriter::new(f)).map_err(core)?;
    ctx.report
        .set("attractor.t_star", rep.t_star)
        .set("attractor.schedule", rep.tau_schedule.clone())
        .note("attractor.dh_history", rep.dh_history.clone(), "semi-distance between consecutive pullback images")
        .set("attractor.converged", rep.converged)
        .set("attractor.tolerance", rep.tolerance)
        .set("attractor.sample_size", rep.attractor_sample.len())
        .note("attractor.sample_max_norm", rep.attractor_sample.max_norm(), "largest segment norm in the sample")
        .set("attractor.dropped", rep.dropped)
        .set("attractor.containment_radius", rep.radius)
        .set(
            "attractor.contained",
            rep.contained_in_ball
                .map_or(decaycert::report::Value::Undefined, decaycert::report::Value::Bool),
        )
        .note("attractor.invariance_gap", gap, "forward image of the sample against the pullback image")
        .set("attractor.file", "attractor_sample.csv");
    Ok(rep.converged && rep.contained_in_ball != Some(false))
}

fn oracle(ctx: &mut Ctx<'_>) -> Result<bool, Failure> {
    let cfg = ctx.cfg;
    let name = selected(ctx)?;
    let (data, horizon) = match name.as_str() {
        "inequality" => {
            let s = cfg.inequality.as_ref().unwrap();
            (s.build().map_err(core)?, s.horizon.unwrap_or(DEFAULT_HORIZON))
        }
        "halanay" => {
            let s = cfg.halanay.as_ref().unwrap();
            (halanay_data(s.alpha, s.beta, s.r, s.rho)?, DEFAULT_HORIZON)
        }
        "linear_lag" => {
            let s = cfg.linear_lag.as_ref().unwrap();
            let root = characteristic_root(s.a, s.b, s.lag).ok();
            ctx.report
                .note("characteristic_root", root, "real root of lambda + a = b exp(-lambda lag)");
            (halanay_data(s.a, s.b.abs(), s.lag, 0.0)?, DEFAULT_HORIZON)
        }
        other => return Err(invalid(format!("the oracle needs inequality data, not [{other}]"))),
    };
    let certified = certify_data(ctx, &data, horizon)?;
    let o = &cfg.oracle;
    let opts = OracleOptions {
        tol: o.tol,
        max_iterations: o.max_iterations,
        quadrature: ctx.quad,
    };
    let table = match majorant_fixed_point(&data, o.y0_norm, o.t_max, o.n_grid, &opts) {
        Ok(t) => t,
        Err(OracleError::NotContractive(k)) => {
            ctx.report
                .set("oracle.contractive", false)
                .note("oracle.kappa", k, "kernel mass, at least 1");
            return Ok(false);
        }
        Err(e) => return Err(core(e)),
    };
    table.save_csv(&ctx.out.join("majorant.csv")).map_err(core)?;
    ctx.report
        .set("oracle.contractive", true)
        .set("oracle.y0_norm", o.y0_norm)
        .set("oracle.t_max", o.t_max)
        .set("oracle.n_grid", o.n_grid)
        .set("oracle.iterations", table.iterations)
        .set("oracle.residual", table.residual)
        .note("oracle.max", table.max(), "sup of the fixed-point majorant")
        .set("oracle.final", *table.values.last().unwrap())
        .note(
            "oracle.decay_rate",
            log_slope(&table, 0.5 * o.t_max, o.t_max),
            "minus the slope of ln y over the second half",
        )
        .set("oracle.file", "majorant.csv");
    if let Ok(b) = bounds(&certified.consts, o.y0_norm, data.rho) {
        ctx.report
            .note("oracle.below_uniform_bound", table.max() <= b.uniform, "sup y <= c |y0| + mu rho");
    }
    Ok(true)
}

fn demo(ctx: &mut Ctx<'_>) -> Result<bool, Failure> {
    ctx.report.set("system", "neural");
    let (demo, certified) = neural_section(ctx)?;
    let s = ctx.cfg.neural.as_ref().unwrap();
    let period = s.period.or_else(|| {
        s.inputs
            .iter()
            .filter_map(|f| f.build().ok().and_then(|f| f.period()))
            .reduce(f64::max)
    });
    let t_end = s.t_end;
    let dim = demo.system.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let hists = [
        History::constant(vec![1.0; dim]),
        random_history(&mut rng, dim, ctx.cfg.simulation.history_norm),
    ];
    let trajs = integrate_all(ctx, &demo.system, &hists, t_end)?;
    save_trajectory(ctx, &trajs[0], "neural.csv")?;
    let (a, b) = (&trajs[0], &trajs[1]);
    let transient = 0.6 * t_end;
    let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let mut pair = 0.0f64;
    let mut periodic_gap = period.map(|_| 0.0f64);
    for (k, &t) in a.times().iter().enumerate() {
        if t < transient {
            continue;
        }
        pair = pair.max(dist(a.state(k), b.state(k)));
        if let (Some(p), Some(g)) = (period, periodic_gap.as_mut()) {
            if t + p <= t_end {
                *g = g.max(dist(a.state(k), &a.value(t + p).map_err(core)?));
            }
        }
    }
    let converged = pair < DEMO_TOL;
    let periodic = periodic_gap.is_some_and(|g| g < DEMO_TOL);
    ctx.report
        .note("demo.input_period", period, "largest input period")
        .note("demo.transient", transient, "checks start here")
        .note("demo.pairwise_gap", pair, "max distance between two solutions after the transient")
        .note("demo.periodicity_gap", periodic_gap, "max distance between x(t) and x(t + period)")
        .set("demo.tolerance", DEMO_TOL)
        .set("demo.converged", converged)
        .set("demo.periodic", periodic)
        .set("demo.file", "neural.csv");
    Ok(certified && converged && (period.is_none() || periodic))
}
