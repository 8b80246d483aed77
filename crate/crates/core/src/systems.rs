//! Concrete delay systems with their certificates: the scalar equation
//! `ẋ = -a(t)x + B(t, x_t)`, periodic coefficients, the linear lag equation,
//! and superlinear systems with delayed sublinear coupling.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::certificate::{derive_constants, CertificateConstants, Verdict};
use crate::dde::{Delay, DdeError, DelaySystem};
use crate::func::ScalarFunction;
use crate::kernels::{
    decay_majorant, kappa_sup, theta_sup, DecayMajorant, Kernel2, KernelError, QuadratureConfig, SupEstimate,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error("mean coefficient over one period is {0}, not positive")]
    NonPositiveMeanCoefficient(f64),
    #[error("no admissible epsilon; binding constraint: {binding}")]
    Infeasible { binding: String },
    #[error("forcing integral exceeds M(t-s)+N by {excess} on [{s}, {t}]")]
    ForcingBoundViolated { s: f64, t: f64, excess: f64 },
    #[error("invalid system: {0}")]
    Invalid(String),
}

/// How the delayed functional `B(t, x_t)` is realized.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// `b(t) x(t - lag)`
    Lagged { lag: f64 },
    /// `b(t) max_k |x(t - lag_k)|`
    SampledMax { lags: Vec<f64> },
}

/// `ẋ = -a(t) x + B(t, x_t)` with `|B(t, φ)| <= b(t)‖φ‖`.
#[derive(Debug, Clone)]
pub struct ScalarFde {
    pub a: ScalarFunction,
    pub b: ScalarFunction,
    pub coupling: Coupling,
    pub r: f64,
}

impl ScalarFde {
    pub fn lagged(a: ScalarFunction, b: ScalarFunction, lag: f64) -> Self {
        Self {
            a,
            b,
            coupling: Coupling::Lagged { lag },
            r: lag,
        }
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        let lags: Vec<f64> = match &self.coupling {
            Coupling::Lagged { lag } => vec![*lag],
            Coupling::SampledMax { lags } => lags.clone(),
        };
        if lags.is_empty() || lags.iter().any(|l| !(*l >= 0.0 && *l <= self.r)) {
            return Err(SystemError::Invalid("coupling lags must lie in [0, r]".into()));
        }
        Ok(())
    }

    /// `B(t, φ)` for a segment given by its sampled delayed values.
    pub fn functional(&self, t: f64, delayed: &[f64]) -> f64 {
        let b = self.b.eval(t);
        match self.coupling {
            Coupling::Lagged { .. } => b * delayed[0],
            Coupling::SampledMax { .. } => b * delayed.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn system(&self) -> DelaySystem {
        let lags: Vec<f64> = match &self.coupling {
            Coupling::Lagged { lag } => vec![*lag],
            Coupling::SampledMax { lags } => lags.clone(),
        };
        let me = self.clone();
        DelaySystem::new(1, lags.into_iter().map(Delay::Constant).collect(), move |t, x, xd, out| {
            let delayed: Vec<f64> = xd.iter().map(|v| v[0]).collect();
            out[0] = -me.a.eval(t) * x[0] + me.functional(t, &delayed);
        })
        .with_max_lag(self.r)
    }

    /// `E(t,s) = exp(-∫_s^t a)` and `K(t,s) = E(t,s) b(s)`, translated by `tau`.
    pub fn kernels(&self, tau: f64) -> (Kernel2, Kernel2) {
        let e = Kernel2::coefficient(self.a.clone()).translated(tau);
        let k = Kernel2::coefficient(self.a.clone())
            .scaled(self.b.clone())
            .translated(tau);
        (e, k)
    }
}

/// `ẋ = -a x + b x(t - lag)`.
pub fn linear_lag_system(a: f64, b: f64, lag: f64) -> DelaySystem {
    DelaySystem::new(1, vec![Delay::Constant(lag)], move |_, x, xd, out| {
        out[0] = -a * x[0] + b * xd[0][0];
    })
}

#[derive(Debug, Clone)]
pub struct ScalarFdeReport {
    pub taus: Vec<f64>,
    pub theta_tau: Vec<SupEstimate>,
    pub kappa_tau: Vec<SupEstimate>,
    pub verdict: Verdict,
    pub majorant: DecayMajorant,
}

impl ScalarFdeReport {
    /// Worst-case `(ϑ, κ)` upper bounds over the sweep.
    pub fn worst(&self) -> (f64, f64) {
        let th = self.theta_tau.iter().map(SupEstimate::upper).fold(0.0, f64::max);
        let ka = self.kappa_tau.iter().map(SupEstimate::upper).fold(0.0, f64::max);
        (th, ka)
    }

    /// Constants from the worst-case pair; uniform in the initial time.
    pub fn constants(&self) -> CertificateConstants {
        let (th, ka) = self.worst();
        derive_constants(th, ka)
    }
}

/// Per-`τ` constants `ϑ_τ`, `κ_τ` and the combined verdict.
pub fn scalar_fde_certificate(
    sys: &ScalarFde,
    tau_grid: &[f64],
    horizon: f64,
    cfg: &QuadratureConfig,
) -> Result<ScalarFdeReport, SystemError> {
    sys.validate()?;
    if tau_grid.is_empty() {
        return Err(SystemError::Invalid("empty tau grid".into()));
    }
    let majorant = decay_majorant(&Kernel2::coefficient(sys.a.clone()), horizon, 64, cfg)?;
    let rows: Vec<(SupEstimate, SupEstimate)> = tau_grid
        .par_iter()
        .map(|&tau| {
            let (e, k) = sys.kernels(tau);
            Ok((theta_sup(&e, horizon, cfg)?, kappa_sup(Some(&k), None, horizon, cfg)?))
        })
        .collect::<Result<_, KernelError>>()?;
    let (theta_tau, kappa_tau): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let all = |f: &dyn Fn(f64, f64) -> bool| {
        theta_tau
            .iter()
            .zip(&kappa_tau)
            .all(|(th, ka)| f(th.upper(), ka.upper()))
    };
    let verdict = if all(&|th, ka| ka < 1.0 / (1.0 + th)) {
        Verdict::Geas
    } else if all(&|_, ka| ka < 1.0) {
        Verdict::GasOnly
    } else {
        Verdict::Uncertified
    };
    Ok(ScalarFdeReport {
        taus: tau_grid.to_vec(),
        theta_tau,
        kappa_tau,
        verdict,
        majorant,
    })
}

/// `n` evenly spaced initial times covering one period.
pub fn periodic_tau_grid(period: f64, n: usize) -> Vec<f64> {
    (0..n.max(1)).map(|i| period * i as f64 / n.max(1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseSineBounds {
    pub i_plus: f64,
    pub i_minus: f64,
    pub beta1: f64,
    pub beta2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCoefficientReport {
    pub omega: f64,
    pub beta: f64,
    pub i: f64,
    pub i_plus: f64,
    pub i_minus: f64,
    pub lambda_rate: f64,
    pub theta_bound: f64,
    pub kappa_bound: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Thresholds from `∫(A sin + ε)^+ <= 2|A|/w + εω`, `∫(A sin + ε)^- <= 2|A|/w`.
    pub coarse: Option<CoarseSineBounds>,
    pub verdict: Verdict,
    pub exact_theta: f64,
    pub exact_kappa: f64,
    pub exact_verdict: Verdict,
}

/// Positive and negative parts `(∫ a^+, ∫ a^-)` over `[0, omega]`, with the
/// sign changes located by bisection.
pub fn signed_parts(a: &ScalarFunction, omega: f64) -> (f64, f64) {
    const N: usize = 4096;
    let mut cuts = vec![0.0];
    let mut prev = a.eval(0.0);
    for k in 1..=N {
        let t = omega * k as f64 / N as f64;
        let v = a.eval(t);
        if (prev < 0.0) != (v < 0.0) {
            let (mut lo, mut hi) = (omega * (k - 1) as f64 / N as f64, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (a.eval(mid) < 0.0) == (prev < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
                    break;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev = v;
    }
    cuts.push(omega);
    let (mut plus, mut minus) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let part = a.integral(w[0], w[1]);
        if part >= 0.0 {
            plus += part;
        } else {
            minus -= part;
        }
    }
    (plus, minus)
}

/// Thresholds for `ẋ = -a(t)x + B`, `|B| <= β‖x_t‖`, with `a` of period `omega`.
pub fn periodic_certificate(
    a: &ScalarFunction,
    omega: f64,
    beta: f64,
    lag: f64,
    cfg: &QuadratureConfig,
) -> Result<PeriodicCoefficientReport, SystemError> {
    if !(omega > 0.0 && beta >= 0.0) {
        return Err(SystemError::Invalid("need omega > 0 and beta >= 0".into()));
    }
    let i = a.integral(0.0, omega);
    if !(i > 0.0) {
        return Err(SystemError::NonPositiveMeanCoefficient(i));
    }
    let (i_plus, i_minus) = signed_parts(a, omega);
    let beta1 = i / (omega * i_plus.exp());
    let beta2 = beta1 / (1.0 + i_minus.exp());
    let coarse = match a {
        ScalarFunction::SineOffset {
            amplitude,
            frequency,
            offset,
            ..
        } if *offset > 0.0 && *frequency != 0.0 => {
            let base = 2.0 * amplitude.abs() / frequency.abs();
            let ip = base + offset * omega;
            let b1 = i / (omega * ip.exp());
            Some(CoarseSineBounds {
                i_plus: ip,
                i_minus: base,
                beta1: b1,
                beta2: b1 / (1.0 + base.exp()),
            })
        }
        _ => None,
    };
    let verdict = if beta < beta2 {
        Verdict::Geas
    } else if beta < beta1 {
        Verdict::GasOnly
    } else {
        Verdict::Uncertified
    };
    let fde = ScalarFde::lagged(a.clone(), ScalarFunction::constant(beta), lag);
    let exact = scalar_fde_certificate(&fde, &periodic_tau_grid(omega, 16), 10.0 * omega, cfg)?;
    let (exact_theta, exact_kappa) = exact.worst();
    Ok(PeriodicCoefficientReport {
        omega,
        beta,
        i,
        i_plus,
        i_minus,
        lambda_rate: i / omega,
        theta_bound: i_minus.exp(),
        kappa_bound: beta * omega * i_plus.exp() / i,
        beta1,
        beta2,
        coarse,
        verdict,
        exact_theta,
        exact_kappa,
        exact_verdict: exact.verdict,
    })
}

/// A delayed coupling term `coeff |y|^{q-1} y` with `y = x(t - r_i(t))`.
#[derive(Debug, Clone)]
pub struct SuperlinearCoupling {
    pub coeff: f64,
    pub delay: Delay,
}

/// `ẋ = -k|x|^{p-1}x + f(t) + Σ_i c_i |x(t-r_i)|^{q-1} x(t-r_i)`.
///
/// The structure constants are `α_i = |c_i|`, and `α_0 = k` without forcing.
/// With forcing, `α_0 = k/2` and Young's inequality gives
/// `β_0(t) = p/(p+1) |f| (|f| / (k/2 (p+1)))^{1/p}`.
#[derive(Debug, Clone)]
pub struct SuperlinearSystem {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub dissipation: f64,
    /// One function per component, or empty for no forcing.
    pub forcing: Vec<ScalarFunction>,
    pub couplings: Vec<SuperlinearCoupling>,
    pub m_bound: f64,
    pub n_bound: f64,
}

impl SuperlinearSystem {
    pub fn validate(&self) -> Result<(), SystemError> {
        if !(self.p > self.q && self.q >= 1.0) {
            return Err(SystemError::Invalid("need p > q >= 1".into()));
        }
        if !(self.dissipation > 0.0) {
            return Err(SystemError::Invalid("dissipation coefficient must be positive".into()));
        }
        if !self.forcing.is_empty() && self.forcing.len() != self.dim {
            return Err(SystemError::Invalid("forcing needs one function per component".into()));
        }
        if !(self.m_bound >= 0.0 && self.n_bound >= 0.0) {
            return Err(SystemError::Invalid("M and N must be nonnegative".into()));
        }
        if self.couplings.iter().any(|c| c.delay.min() < 0.0) {
            return Err(SystemError::Invalid("delays must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn is_forced(&self) -> bool {
        !self.forcing.is_empty()
    }

    pub fn alpha0(&self) -> f64 {
        if self.is_forced() {
            0.5 * self.dissipation
        } else {
            self.dissipation
        }
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.couplings.iter().map(|c| c.coeff.abs()).collect()
    }

    pub fn forcing_norm(&self, t: f64) -> f64 {
        self.forcing.iter().map(|f| f.eval(t).powi(2)).sum::<f64>().sqrt()
    }

    /// `β_0(t)`; the delayed terms carry no forcing, so `β_i = 0` for `i >= 1`.
    pub fn beta0(&self, t: f64) -> f64 {
        if !self.is_forced() {
            return 0.0;
        }
        let f = self.forcing_norm(t);
        let c = 0.5 * self.dissipation;
        self.p / (self.p + 1.0) * f * (f / (c * (self.p + 1.0))).powf(1.0 / self.p)
    }

    /// `(F_0(t,x), x)`, for checking the dissipation structure.
    pub fn f0_dot_x(&self, t: f64, x: &[f64]) -> f64 {
        let n = crate::dde::norm(x);
        let mut s = -self.dissipation * n.powf(self.p + 1.0);
        for (i, f) in self.forcing.iter().enumerate() {
            s += f.eval(t) * x[i];
        }
        s
    }

    /// Largest common delay bound.
    pub fn max_lag(&self) -> f64 {
        self.couplings.iter().map(|c| c.delay.max()).fold(0.0, f64::max)
    }

    pub fn system(&self) -> DelaySystem {
        let (p, q, k) = (self.p, self.q, self.dissipation);
        let forcing = self.forcing.clone();
        let coeffs: Vec<f64> = self.couplings.iter().map(|c| c.coeff).collect();
        let dim = self.dim;
        DelaySystem::new(
            dim,
            self.couplings.iter().map(|c| c.delay.clone()).collect(),
            move |t, x, xd, out| {
                let nx = crate::dde::norm(x);
                let damp = k * nx.powf(p - 1.0);
                for i in 0..dim {
                    out[i] = -damp * x[i];
                }
                for (i, f) in forcing.iter().enumerate() {
                    out[i] += f.eval(t);
                }
                for (c, y) in coeffs.iter().zip(xd) {
                    let g = c * crate::dde::norm(y).powf(q - 1.0);
                    for i in 0..dim {
                        out[i] += g * y[i];
                    }
                }
            },
        )
    }

    /// Checks `∫_s^t Σβ_i <= M(t-s) + N` for all `s < t` in `[0, span]`.
    pub fn check_forcing_bound(&self, span: f64, dt: f64) -> Result<(), SystemError> {
        if !self.is_forced() {
            return Ok(());
        }
        let n = (span / dt).ceil() as usize;
        let mut integral = 0.0;
        let mut prev = self.beta0(0.0);
        // running minimum of G(s) = B(s) - M s; the bound fails when G(t) - min G > N
        let mut min_g = 0.0;
        let mut min_at = 0.0;
        for k in 1..=n {
            let t = k as f64 * dt;
            let cur = self.beta0(t);
            integral += 0.5 * dt * (prev + cur);
            prev = cur;
            let g = integral - self.m_bound * t;
            let excess = g - min_g - self.n_bound;
            if excess > 0.0 {
                return Err(SystemError::ForcingBoundViolated {
                    s: min_at,
                    t,
                    excess,
                });
            }
            if g < min_g {
                min_g = g;
                min_at = t;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperlinearCertificate {
    pub gamma_exp: f64,
    pub alpha0: f64,
    pub alpha_sum: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub theta: f64,
    pub kappa0: f64,
    pub eps_star: Option<f64>,
    pub dissipative: bool,
    pub rho_empirical: Option<f64>,
}

/// Upper limits on `ε`, by name.
fn eps_limits(cert: &SuperlinearCertificate, m: f64) -> Vec<(&'static str, f64)> {
    let lim = |den: f64, num: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    vec![
        ("eps*kappa0 < 1/(1+theta)", lim(cert.kappa0, 1.0 / (1.0 + cert.theta))),
        (
            "eps*(gamma+1)*(alpha+M) < c0/2",
            lim((cert.gamma_exp + 1.0) * (cert.alpha_sum + m), cert.c0 / 2.0),
        ),
        ("eps*alpha < alpha0", lim(cert.alpha_sum, cert.alpha0)),
        ("eps < 1", 1.0),
    ]
}

pub fn superlinear_certificate(sys: &SuperlinearSystem) -> Result<SuperlinearCertificate, SystemError> {
    sys.validate()?;
    let span = match sys.forcing.iter().filter_map(ScalarFunction::period).fold(None, |m: Option<f64>, p| {
        Some(m.map_or(p, |m| m.max(p)))
    }) {
        Some(p) => 20.0 * p,
        None => 200.0,
    };
    sys.check_forcing_bound(span, 0.01)?;
    let gamma_exp = sys.p * (sys.q - 1.0) / (sys.p - sys.q) + 1.0;
    let alpha0 = sys.alpha0();
    let alpha_sum: f64 = sys.alphas().iter().sum();
    let c0 = (gamma_exp + 1.0) * alpha0;
    let c1 = c0 / 2.0;
    let c2 = (gamma_exp + 1.0) * sys.n_bound;
    let theta = c2.exp();
    let kappa0 = alpha_sum * (gamma_exp + 1.0) * theta / c1;
    let mut cert = SuperlinearCertificate {
        gamma_exp,
        alpha0,
        alpha_sum,
        c0,
        c1,
        c2,
        theta,
        kappa0,
        eps_star: None,
        dissipative: false,
        rho_empirical: None,
    };
    let limits = eps_limits(&cert, sys.m_bound);
    let (binding, limit) = limits
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let lo: f64 = 1e-8;
    if !(limit > lo) {
        return Err(SystemError::Infeasible {
            binding: binding.to_string(),
        });
    }
    let feasible = |e: f64| limits.iter().all(|(_, l)| e < *l);
    let eps = (0..60)
        .map(|k| (lo.ln() + (limit.ln() - lo.ln()) * k as f64 / 59.0).exp())
        .filter(|e| feasible(*e))
        .fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))));
    match eps {
        Some(e) => {
            cert.eps_star = Some(e);
            cert.dissipative = true;
            Ok(cert)
        }
        None => Err(SystemError::Infeasible {
            binding: binding.to_string(),
        }),
    }
}

/// The forced scalar example `ẋ = -x³ + c x(t - lag) + amp·sin(t)`.
pub fn scalar_superlinear(coeff: f64, lag: f64, forcing_amplitude: f64) -> SuperlinearSystem {
    SuperlinearSystem {
        dim: 1,
        p: 3.0,
        q: 1.0,
        dissipation: 1.0,
        forcing: if forcing_amplitude == 0.0 {
            vec![]
        } else {
            vec![ScalarFunction::sine_offset(forcing_amplitude, 1.0, 0.0, 0.0)]
        },
        couplings: vec![SuperlinearCoupling {
            coeff,
            delay: Delay::Constant(lag),
        }],
        m_bound: if forcing_amplitude == 0.0 { 0.0 } else { 1.0 },
        n_bound: if forcing_amplitude == 0.0 { 0.0 } else { 1.0 },
    }
}

/// Period used by the sine examples.
pub const TWO_PI: f64 = 2.0 * PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::{integrate, History};
    use proptest::prelude::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn constant_coefficients_give_one_third() {
        let s = ScalarFde::lagged(ScalarFunction::constant(3.0), ScalarFunction::constant(1.0), 1.0);
        let rep = scalar_fde_certificate(&s, &[0.0, 0.7, 2.0], 40.0 / 3.0, &cfg()).unwrap();
        for (th, ka) in rep.theta_tau.iter().zip(&rep.kappa_tau) {
            assert!((th.value - 1.0).abs() < 1e-12);
            assert!((ka.value - 1.0 / 3.0).abs() < 1e-9);
        }
        assert_eq!(rep.verdict, Verdict::Geas);
    }

    #[test]
    fn zero_gain_and_boundary_case() {
        let s = ScalarFde::lagged(ScalarFunction::constant(3.0), ScalarFunction::constant(0.0), 1.0);
        let rep = scalar_fde_certificate(&s, &[0.0], 10.0, &cfg()).unwrap();
        assert_eq!(rep.kappa_tau[0].value, 0.0);
        assert_eq!(rep.verdict, Verdict::Geas);
        let s = ScalarFde::lagged(ScalarFunction::constant(1.0), ScalarFunction::constant(1.0), 1.0);
        let rep = scalar_fde_certificate(&s, &[0.0, 1.0], 40.0, &cfg()).unwrap();
        assert!(rep.kappa_tau[0].upper() >= 1.0);
        assert_eq!(rep.verdict, Verdict::Uncertified);
    }

    #[test]
    fn sine_example_report() {
        let a = ScalarFunction::sine_offset(1.0, 1.0, 0.0, 0.5);
        let rep = periodic_certificate(&a, TWO_PI, 0.002, 1.0, &cfg()).unwrap();
        let i_minus = 3f64.sqrt() - PI / 3.0;
        assert!((rep.i - PI).abs() < 1e-12);
        assert!((rep.i_minus - i_minus).abs() < 1e-10);
        assert!((rep.i_plus - (PI + i_minus)).abs() < 1e-10);
        assert!((rep.beta1 - 0.01089).abs() < 1e-5);
        let coarse = rep.coarse.clone().unwrap();
        assert!((coarse.beta1 - 0.5 * (-(2.0 + PI)).exp()).abs() < 1e-12);
        assert!(coarse.beta1 <= rep.beta1 && rep.beta2 < rep.beta1);
        assert!(rep.kappa_bound >= rep.exact_kappa);
        assert!(rep.theta_bound >= rep.exact_theta - 1e-9);
        assert_eq!(rep.verdict, Verdict::Geas);
    }

    #[test]
    fn constant_coefficient_thresholds() {
        let rep = periodic_certificate(&ScalarFunction::constant(1.0), 3.0, 0.01, 1.0, &cfg()).unwrap();
        assert!((rep.i - 3.0).abs() < 1e-15 && rep.i_minus == 0.0 && (rep.i_plus - 3.0).abs() < 1e-15);
        assert!((rep.beta1 - (-3f64).exp()).abs() < 1e-15);
        assert!((rep.beta2 - (-3f64).exp() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn non_positive_mean_is_rejected() {
        let a = ScalarFunction::sine_offset(1.0, 1.0, 0.0, -0.1);
        assert!(matches!(
            periodic_certificate(&a, TWO_PI, 0.001, 1.0, &cfg()),
            Err(SystemError::NonPositiveMeanCoefficient(_))
        ));
    }

    #[test]
    fn kappa_tau_is_periodic() {
        let s = ScalarFde::lagged(
            ScalarFunction::sine_offset(1.0, 1.0, 0.0, 0.5),
            ScalarFunction::constant(0.002),
            1.0,
        );
        let rep = scalar_fde_certificate(&s, &[0.3, 0.3 + TWO_PI], 10.0 * TWO_PI, &cfg()).unwrap();
        assert!((rep.kappa_tau[0].value - rep.kappa_tau[1].value).abs() < 1e-8);
    }

    #[test]
    fn superlinear_constants() {
        let cert = superlinear_certificate(&scalar_superlinear(0.1, 1.0, 0.0)).unwrap();
        assert_eq!(cert.gamma_exp, 1.0);
        assert_eq!((cert.c0, cert.c1, cert.c2, cert.theta), (2.0, 1.0, 0.0, 1.0));
        assert!((cert.kappa0 - 0.2).abs() < 1e-15);
        let e = cert.eps_star.unwrap();
        assert!(e * 0.2 < 0.5 && e * 2.0 * 0.1 < 1.0 && e < 1.0);
        assert!(cert.dissipative);
        let mut s = scalar_superlinear(0.1, 1.0, 0.0);
        s.q = 2.0;
        assert_eq!(superlinear_certificate(&s).unwrap().gamma_exp, 4.0);
    }

    #[test]
    fn forced_superlinear_is_dissipative() {
        let cert = superlinear_certificate(&scalar_superlinear(0.1, 1.0, 1.0)).unwrap();
        assert!(cert.dissipative);
        assert_eq!(cert.alpha0, 0.5);
        let e = cert.eps_star.unwrap();
        assert!(e * cert.kappa0 < 1.0 / (1.0 + cert.theta));
        assert!(e * (cert.gamma_exp + 1.0) * (cert.alpha_sum + 1.0) < cert.c0 / 2.0);
    }

    #[test]
    fn forcing_bound_violation_is_an_error() {
        let mut s = scalar_superlinear(0.1, 1.0, 1.0);
        s.m_bound = 0.1;
        s.n_bound = 0.1;
        assert!(matches!(
            superlinear_certificate(&s),
            Err(SystemError::ForcingBoundViolated { .. })
        ));
    }

    #[test]
    fn infeasible_when_coupling_dominates() {
        let mut s = scalar_superlinear(50.0, 1.0, 1.0);
        s.n_bound = 30.0;
        assert!(matches!(superlinear_certificate(&s), Err(SystemError::Infeasible { .. })));
    }

    #[test]
    fn right_hand_sides() {
        let mut out = [0.0];
        let sys = linear_lag_system(3.0, 1.0, 1.0);
        (sys.rhs)(0.0, &[2.0], &[vec![5.0]], &mut out);
        assert_eq!(out[0], -1.0);
        let fde = ScalarFde::lagged(
            ScalarFunction::sine_offset(1.0, 1.0, 0.0, 0.5),
            ScalarFunction::constant(0.2),
            1.0,
        );
        (fde.system().rhs)(1.0, &[2.0], &[vec![3.0]], &mut out);
        assert!((out[0] - (-(1f64.sin() + 0.5) * 2.0 + 0.6)).abs() < 1e-15);
        (scalar_superlinear(0.1, 1.0, 0.0).system().rhs)(0.0, &[2.0], &[vec![3.0]], &mut out);
        assert!((out[0] - (-8.0 + 0.3)).abs() < 1e-14);
    }

    #[test]
    fn sampled_max_coupling_respects_gain_bound() {
        let fde = ScalarFde {
            a: ScalarFunction::constant(2.0),
            b: ScalarFunction::constant(0.5),
            coupling: Coupling::SampledMax { lags: vec![0.25, 0.5, 1.0] },
            r: 1.0,
        };
        let tr = integrate(&fde.system(), &History::scalar(1.0), 0.0, 5.0, 0.01, &Default::default()).unwrap();
        assert!(tr.last_state()[0].abs() < 1.0);
    }

    proptest! {
        #[test]
        fn structure_condition_holds(x in -20.0f64..20.0, t in -50.0f64..50.0, amp in 0.0f64..3.0) {
            let s = scalar_superlinear(0.1, 1.0, amp);
            let lhs = s.f0_dot_x(t, &[x]);
            let rhs = -s.alpha0() * x.abs().powf(s.p + 1.0) + s.beta0(t);
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn coupling_bound_holds(t in 0.0f64..20.0, vals in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let fde = ScalarFde {
                a: ScalarFunction::constant(1.0),
                b: ScalarFunction::sine_offset(0.3, 1.0, 0.0, 0.4),
                coupling: Coupling::SampledMax { lags: vec![0.2, 0.5, 1.0] },
                r: 1.0,
            };
            let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(fde.functional(t, &vals).abs() <= fde.b.eval(t).abs() * sup + 1e-15);
        }

        #[test]
        fn threshold_ordering(amp in 0.0f64..2.0, off in 0.1f64..2.0) {
            let a = ScalarFunction::sine_offset(amp, 1.0, 0.0, off);
            let (ip, im) = signed_parts(&a, TWO_PI);
            let i = a.integral(0.0, TWO_PI);
            prop_assert!((ip - im - i).abs() < 1e-9);
            let b1 = i / (TWO_PI * ip.exp());
            prop_assert!(b1 / (1.0 + im.exp()) < b1);
        }
    }
}
