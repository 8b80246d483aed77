//! Fixed-step integration of delay differential equations by the method of
//! steps: classical RK4 with cubic Hermite dense output, delayed values read
//! from accepted steps, and a fixed-point predictor when a delayed time
//! falls inside the step being taken.

mod hermite;
mod history;
mod trajectory;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use history::{History, Table};
pub use trajectory::{fmt17, EnvelopeReport, Trajectory};

pub(crate) use history::norm;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdeError {
    #[error("state norm exceeded the blow-up guard at t={t}")]
    Blowup { t: f64 },
    #[error("overlap predictor did not converge at t={t}")]
    PredictorDiverged { t: f64 },
    #[error("delayed lookup at t={t} precedes the history window")]
    LookupBeforeHistory { t: f64 },
    #[error("t={t} is outside the trajectory")]
    OutOfDomain { t: f64 },
    #[error("trajectory spans {available}, the certificate needs {needed}")]
    TooShort { needed: f64, available: f64 },
    #[error("delay value {value} at t={t} is outside [0, max_lag]")]
    DelayOutOfRange { t: f64, value: f64 },
    #[error("invalid integration input: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type DelayFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Right-hand side `f(t, x(t), [x(t - r_1(t)), ...], out)`.
pub type RhsFn = Arc<dyn Fn(f64, &[f64], &[Vec<f64>], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum Delay {
    Constant(f64),
    /// A time-varying delay with declared range `[min, max]`.
    Varying { f: DelayFn, min: f64, max: f64 },
}

impl Delay {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Delay::Constant(r) => *r,
            Delay::Varying { f, .. } => f(t),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Delay::Constant(r) => *r,
            Delay::Varying { min, .. } => *min,
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Delay::Constant(r) => *r,
            Delay::Varying { max, .. } => *max,
        }
    }
}

impl fmt::Debug for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Constant(r) => write!(f, "Constant({r})"),
            Delay::Varying { min, max, .. } => write!(f, "Varying([{min}, {max}])"),
        }
    }
}

/// A delay system of dimension `dim`; segments live on `[-max_lag, 0]`.
#[derive(Clone)]
pub struct DelaySystem {
    pub dim: usize,
    pub delays: Vec<Delay>,
    pub max_lag: f64,
    pub rhs: RhsFn,
}

impl fmt::Debug for DelaySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelaySystem")
            .field("dim", &self.dim)
            .field("delays", &self.delays)
            .field("max_lag", &self.max_lag)
            .finish_non_exhaustive()
    }
}

impl DelaySystem {
    pub fn new(
        dim: usize,
        delays: Vec<Delay>,
        rhs: impl Fn(f64, &[f64], &[Vec<f64>], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        let max_lag = delays.iter().map(Delay::max).fold(0.0, f64::max);
        Self {
            dim,
            delays,
            max_lag,
            rhs: Arc::new(rhs),
        }
    }

    /// Widens the segment window beyond the largest delay.
    pub fn with_max_lag(mut self, r: f64) -> Self {
        self.max_lag = self.max_lag.max(r);
        self
    }

    pub fn min_lag(&self) -> f64 {
        self.delays.iter().map(Delay::min).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub blowup_guard: f64,
    /// Resolve delayed times inside the current step by fixed-point sweeps.
    pub overlap_iteration: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            blowup_guard: 1e12,
            overlap_iteration: false,
        }
    }
}

const PREDICTOR_SWEEPS: usize = 5;
const PREDICTOR_TOL: f64 = 1e-12;

/// Largest step `<= h` dividing every constant delay at least `h` long an
/// integer number of times, when such a step exists among `lag / k`.
pub fn aligned_step(h: f64, sys: &DelaySystem) -> f64 {
    let lags: Vec<f64> = sys
        .delays
        .iter()
        .filter_map(|d| match d {
            Delay::Constant(r) if *r >= h => Some(*r),
            _ => None,
        })
        .collect();
    let Some(&base) = lags.iter().min_by(|a, b| a.total_cmp(b)) else {
        return h;
    };
    let k = (base / h).ceil();
    let cand = base / k;
    let divides = |r: f64| {
        let q = r / cand;
        (q - q.round()).abs() < 1e-9
    };
    if lags.iter().all(|r| divides(*r)) {
        cand
    } else {
        h
    }
}

/// Integrates from `tau` to `t_end` with step `h`, `φ` given on `[-r, 0]`.
pub fn integrate(
    sys: &DelaySystem,
    phi: &History,
    tau: f64,
    t_end: f64,
    h: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory, DdeError> {
    if !(h > 0.0) || !(t_end >= tau) || !tau.is_finite() || !t_end.is_finite() {
        return Err(DdeError::Invalid("need h > 0 and t_end >= tau".into()));
    }
    if phi.dim() != sys.dim {
        return Err(DdeError::Invalid(format!(
            "history dimension {} does not match system dimension {}",
            phi.dim(),
            sys.dim
        )));
    }
    if sys.delays.iter().any(|d| d.min() < 0.0 || d.max() > sys.max_lag) {
        return Err(DdeError::Invalid("delay range must lie in [0, max_lag]".into()));
    }
    if !sys.delays.is_empty() && sys.min_lag() < h && !opts.overlap_iteration {
        return Err(DdeError::Invalid(
            "a delay can be shorter than the step; enable overlap iteration".into(),
        ));
    }
    let n_steps = if t_end == tau {
        0
    } else {
        (((t_end - tau) / h) - 1e-9).ceil().max(1.0) as usize
    };
    let mut times = Vec::with_capacity(n_steps + 1);
    for k in 0..n_steps {
        times.push(tau + k as f64 * h);
    }
    times.push(t_end);
    let dim = sys.dim;
    let mut traj = Trajectory {
        tau,
        r: sys.max_lag,
        dim,
        h,
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity((n_steps + 1) * dim),
        derivs: Vec::with_capacity((n_steps + 1) * dim),
        history: phi.clone(),
        node_norms: Vec::with_capacity(n_steps + 1),
    };
    traj.times.push(tau);
    let mut x0 = vec![0.0; dim];
    phi.eval(0.0, &mut x0);
    guard(&x0, tau, opts)?;
    traj.node_norms.push(norm(&x0));
    traj.states.extend_from_slice(&x0);
    let mut ws = Workspace::new(dim, sys.delays.len());
    let mut d0 = vec![0.0; dim];
    ws.delayed(sys, &traj, None, tau)?;
    (sys.rhs)(tau, &x0, &ws.xd, &mut d0);
    guard(&d0, tau, opts)?;
    traj.derivs.extend_from_slice(&d0);
    for k in 0..n_steps {
        let (t0, t1) = (times[k], times[k + 1]);
        let (x1, d1) = step(sys, &mut traj, &mut ws, t0, t1, opts)?;
        guard(&x1, t1, opts)?;
        traj.times.push(t1);
        traj.node_norms.push(norm(&x1));
        traj.states.extend_from_slice(&x1);
        traj.derivs.extend_from_slice(&d1);
    }
    Ok(traj)
}

fn guard(x: &[f64], t: f64, opts: &IntegratorOptions) -> Result<(), DdeError> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= opts.blowup_guard) {
        Ok(())
    } else {
        Err(DdeError::Blowup { t })
    }
}

/// Provisional end state of the step in progress, for overlap lookups.
struct Provisional<'a> {
    t0: f64,
    t1: f64,
    x0: &'a [f64],
    d0: &'a [f64],
    x1: &'a [f64],
    d1: &'a [f64],
}

struct Workspace {
    xd: Vec<Vec<f64>>,
    overlap: bool,
}

impl Workspace {
    fn new(dim: usize, n_delays: usize) -> Self {
        Self {
            xd: vec![vec![0.0; dim]; n_delays],
            overlap: false,
        }
    }

    /// Fills `xd` with the delayed states at time `t`.
    fn delayed(
        &mut self,
        sys: &DelaySystem,
        traj: &Trajectory,
        prov: Option<&Provisional<'_>>,
        t: f64,
    ) -> Result<(), DdeError> {
        let accepted_end = *traj.times.last().unwrap();
        let slack = 1e-9 * traj.h;
        for (d, out) in sys.delays.iter().zip(self.xd.iter_mut()) {
            let lag = d.at(t);
            if !(lag >= -slack && lag <= sys.max_lag + slack) {
                return Err(DdeError::DelayOutOfRange { t, value: lag });
            }
            let td = t - lag;
            if td < traj.tau - traj.r - slack * (1.0 + traj.tau.abs()) {
                return Err(DdeError::LookupBeforeHistory { t: td });
            }
            if td <= accepted_end + slack {
                traj.eval_unchecked(td.min(accepted_end), out);
            } else {
                self.overlap = true;
                match prov {
                    Some(p) => {
                        hermite::eval(p.t0, p.t1, p.x0, p.x1, p.d0, p.d1, td.min(p.t1), out)
                    }
                    None => return Err(DdeError::PredictorDiverged { t }),
                }
            }
        }
        Ok(())
    }
}

fn step(
    sys: &DelaySystem,
    traj: &mut Trajectory,
    ws: &mut Workspace,
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Result<(Vec<f64>, Vec<f64>), DdeError> {
    let dim = sys.dim;
    let k = traj.times.len() - 1;
    let x0 = traj.state(k).to_vec();
    let d0 = traj.derivative_at_node(k).to_vec();
    let h = t1 - t0;
    // initial guess for the end of the step: extrapolate the previous piece
    let (mut px1, mut pd1) = if k > 0 {
        let (a, b) = (traj.times[k - 1], traj.times[k]);
        let (xa, da) = (traj.state(k - 1), traj.derivative_at_node(k - 1));
        let mut x = vec![0.0; dim];
        let mut d = vec![0.0; dim];
        hermite::eval(a, b, xa, &x0, da, &d0, t1, &mut x);
        hermite::derivative(a, b, xa, &x0, da, &d0, t1, &mut d);
        (x, d)
    } else {
        (x0.iter().zip(&d0).map(|(x, d)| x + h * d).collect(), d0.clone())
    };
    let mut stage = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut x1 = vec![0.0; dim];
    let mut d1 = vec![0.0; dim];
    for sweep in 0..=PREDICTOR_SWEEPS {
        ws.overlap = false;
        let prov = Provisional {
            t0,
            t1,
            x0: &x0,
            d0: &d0,
            x1: &px1,
            d1: &pd1,
        };
        let tm = t0 + 0.5 * h;
        for i in 0..dim {
            stage[i] = x0[i] + 0.5 * h * d0[i];
        }
        ws.delayed(sys, traj, Some(&prov), tm)?;
        (sys.rhs)(tm, &stage, &ws.xd, &mut k2);
        for i in 0..dim {
            stage[i] = x0[i] + 0.5 * h * k2[i];
        }
        (sys.rhs)(tm, &stage, &ws.xd, &mut k3);
        for i in 0..dim {
            stage[i] = x0[i] + h * k3[i];
        }
        ws.delayed(sys, traj, Some(&prov), t1)?;
        (sys.rhs)(t1, &stage, &ws.xd, &mut k4);
        for i in 0..dim {
            x1[i] = x0[i] + h / 6.0 * (d0[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        guard(&x1, t1, opts)?;
        let provisional_end = Provisional {
            t0,
            t1,
            x0: &x0,
            d0: &d0,
            x1: &x1,
            d1: &pd1,
        };
        ws.delayed(sys, traj, Some(&provisional_end), t1)?;
        (sys.rhs)(t1, &x1, &ws.xd, &mut d1);
        if !ws.overlap {
            return Ok((x1, d1));
        }
        if !opts.overlap_iteration {
            return Err(DdeError::PredictorDiverged { t: t1 });
        }
        let change = x1
            .iter()
            .zip(&px1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = 1.0 + x1.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let dchange = d1
            .iter()
            .zip(&pd1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let dscale = 1.0 + d1.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if sweep > 0 && change <= PREDICTOR_TOL * scale && dchange * h <= PREDICTOR_TOL * dscale.max(scale) {
            return Ok((x1, d1));
        }
        px1.copy_from_slice(&x1);
        pd1.copy_from_slice(&d1);
    }
    Err(DdeError::PredictorDiverged { t: t1 })
}
