//! Stability constants, exponential decay certificates, and the Halanay family.

use thiserror::Error;

use crate::func::ScalarFunction;
use crate::kernels::{DecayMajorant, Kernel2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("verdict is {0}, exponential decay needs GEAS")]
    NotGeas(Verdict),
    #[error("decay majorant never drops below {threshold} within its table")]
    MajorantTooShort { threshold: f64 },
    #[error("constants are undefined for an uncertified inequality")]
    Uncertified,
    #[error("L/alpha + M/gamma = {0} is not below 1")]
    BetaNotLessThanOne(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Kernels, offset and lag of a retarded integral inequality
/// `y(t) <= E(t,τ)‖y_τ‖ + ∫_τ^t K1(t,s)‖y_s‖ds + ∫_t^∞ K2(t,s)‖y_s‖ds + ρ`.
#[derive(Debug, Clone)]
pub struct InequalityData {
    pub e: Kernel2,
    pub k1: Option<Kernel2>,
    pub k2: Option<Kernel2>,
    pub rho: f64,
    pub r: f64,
}

impl InequalityData {
    pub fn validate(&self) -> Result<(), CertificateError> {
        if !(self.rho >= 0.0 && self.r >= 0.0) {
            return Err(CertificateError::Invalid("rho and r must be nonnegative".into()));
        }
        if matches!(self.e, Kernel2::PowerSingular { .. } | Kernel2::FutureExponential { .. }) {
            return Err(CertificateError::Invalid("E must be a decay kernel".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Geas,
    GasOnly,
    Uncertified,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Geas => "GEAS",
            Verdict::GasOnly => "GAS_only",
            Verdict::Uncertified => "Uncertified",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Constants derived from `(ϑ, κ)`. Fields that do not exist for the given
/// `κ` are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateConstants {
    pub theta: f64,
    pub kappa: f64,
    pub mu: Option<f64>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub verdict: Verdict,
}

/// `μ = 1/(1-κ)`, `c = max(ϑ/(1-κ), 1)`, `γ = (μ+1)/(1-κc)`, `σ = (1+κc)/2`.
pub fn derive_constants(theta: f64, kappa: f64) -> CertificateConstants {
    let mut out = CertificateConstants {
        theta,
        kappa,
        mu: None,
        c: None,
        gamma: None,
        sigma: None,
        verdict: Verdict::Uncertified,
    };
    if !(kappa < 1.0) || !(theta > 0.0) || !(kappa >= 0.0) {
        return out;
    }
    let mu = 1.0 / (1.0 - kappa);
    let c = (theta / (1.0 - kappa)).max(1.0);
    out.mu = Some(mu);
    out.c = Some(c);
    out.verdict = Verdict::GasOnly;
    if kappa < 1.0 / (1.0 + theta) {
        let kc = kappa * c;
        out.gamma = Some((mu + 1.0) / (1.0 - kc));
        out.sigma = Some((1.0 + kc) / 2.0);
        out.verdict = Verdict::Geas;
    }
    out
}

/// Envelope `‖y_t‖ <= M‖y_τ‖e^{-λ(t-τ)} + γρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpDecayCertificate {
    pub t0: f64,
    pub t1: f64,
    pub horizon: f64,
    pub lambda: f64,
    pub m: f64,
}

impl ExpDecayCertificate {
    pub fn envelope(&self, phi_norm: f64, gamma: f64, rho: f64, elapsed: f64) -> f64 {
        self.m * phi_norm * (-self.lambda * elapsed).exp() + gamma * rho
    }
}

/// Source of decay information for [`exp_certificate`].
#[derive(Debug, Clone, Copy)]
pub enum Decay<'a> {
    Exponential { m0: f64, lambda0: f64 },
    Majorant(&'a DecayMajorant),
}

pub fn exp_certificate(
    consts: &CertificateConstants,
    decay: Decay<'_>,
    r: f64,
) -> Result<ExpDecayCertificate, CertificateError> {
    let (Some(c), Some(gamma), Some(sigma), Verdict::Geas) =
        (consts.c, consts.gamma, consts.sigma, consts.verdict)
    else {
        return Err(CertificateError::NotGeas(consts.verdict));
    };
    if !(r >= 0.0) {
        return Err(CertificateError::Invalid("r must be nonnegative".into()));
    }
    let kc = consts.kappa * c;
    match decay {
        Decay::Exponential { m0, lambda0 } => {
            if !(m0 > 0.0 && lambda0 > 0.0) {
                return Err(CertificateError::Invalid("need m0 > 0 and lambda0 > 0".into()));
            }
            let l0 = (m0 * gamma).ln();
            let l1 = (2.0 * m0 / (1.0 - kc)).ln();
            // both logs are negative only when m0 < 1; the crossing is then at 0
            let m1 = l0.max(l1).max(0.0);
            let denom = m1 + r * lambda0;
            if denom == 0.0 {
                return Err(CertificateError::Invalid(
                    "zero certificate horizon (m0 too small and r = 0)".into(),
                ));
            }
            Ok(ExpDecayCertificate {
                t0: l0 / lambda0,
                t1: l1 / lambda0,
                horizon: m1 / lambda0 + r,
                lambda: (2f64.ln() - (1.0 + kc).ln()) / (2.0 * denom) * lambda0,
                m: c * (2.0 / (1.0 + kc)).sqrt(),
            })
        }
        Decay::Majorant(e) => {
            let crossing = |pred: &dyn Fn(f64) -> bool, threshold: f64| {
                e.times()
                    .zip(&e.table)
                    .find(|(_, v)| pred(**v))
                    .map(|(t, _)| t + e.dt)
                    .ok_or(CertificateError::MajorantTooShort { threshold })
            };
            let t0 = crossing(&|v| v * gamma <= 1.0, 1.0 / gamma)?;
            let half_gap = (1.0 - kc) / 2.0;
            let t1 = crossing(&|v| v < half_gap, half_gap)?;
            let horizon = t0.max(t1) + r;
            let lambda = -sigma.ln() / (2.0 * horizon);
            Ok(ExpDecayCertificate {
                t0,
                t1,
                horizon,
                lambda,
                m: c * (lambda * horizon).exp(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub uniform: f64,
    pub ultimate: f64,
    pub apriori: f64,
}

/// Uniform bound `c‖y₀‖+μρ`, ultimate bound `μρ`, a priori bound
/// `(c+1)(‖y₀‖+1)+μρ`.
pub fn bounds(consts: &CertificateConstants, y0_norm: f64, rho: f64) -> Result<Bounds, CertificateError> {
    let (Some(mu), Some(c)) = (consts.mu, consts.c) else {
        return Err(CertificateError::Uncertified);
    };
    if !(y0_norm >= 0.0 && rho >= 0.0) {
        return Err(CertificateError::Invalid("norms must be nonnegative".into()));
    }
    Ok(Bounds {
        uniform: c * y0_norm + mu * rho,
        ultimate: mu * rho,
        apriori: (c + 1.0) * (y0_norm + 1.0) + mu * rho,
    })
}

/// Inequality data for `ẏ <= -αy + β‖y_t‖`: `E = e^{-α(t-s)}`, `K1 = βE`.
pub fn halanay_map(alpha: f64, beta: f64, r: f64) -> Result<InequalityData, CertificateError> {
    if !(alpha > 0.0 && beta >= 0.0 && r >= 0.0) {
        return Err(CertificateError::Invalid("need alpha > 0, beta >= 0, r >= 0".into()));
    }
    let e = Kernel2::exponential(1.0, alpha);
    Ok(InequalityData {
        k1: Some(e.clone().scaled(ScalarFunction::constant(beta))),
        e,
        k2: None,
        rho: 0.0,
        r,
    })
}

/// Root `μ ∈ (0, α-β]` of `β e^{μr} = α - μ`, by bisection.
pub fn chen_rate(alpha: f64, beta: f64, r: f64) -> Result<f64, CertificateError> {
    if !(beta > 0.0 && beta < alpha && r >= 0.0) {
        return Err(CertificateError::Invalid("need 0 < beta < alpha and r >= 0".into()));
    }
    let f = |m: f64| beta * (m * r).exp() - (alpha - m);
    let (mut lo, mut hi) = (0.0, alpha * (1.0 - 1e-12));
    if r == 0.0 {
        return Ok(alpha - beta);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaleEnvelope {
    pub beta: f64,
    pub exponent: f64,
    pub bound: f64,
    pub decays: bool,
}

/// `(1-β)^{-1} K e^{-[α-(1-β)^{-1}L]t}` with `β = L/α + M/γ`.
pub fn hale_envelope(
    k: f64,
    l: f64,
    m_future: f64,
    alpha: f64,
    gamma_rate: f64,
    t: f64,
) -> Result<HaleEnvelope, CertificateError> {
    if !(alpha > 0.0 && t >= 0.0 && l >= 0.0 && m_future >= 0.0) {
        return Err(CertificateError::Invalid("need alpha > 0, t >= 0, L, M >= 0".into()));
    }
    let fut = if m_future == 0.0 { 0.0 } else { m_future / gamma_rate };
    let beta = l / alpha + fut;
    if !(beta < 1.0) {
        return Err(CertificateError::BetaNotLessThanOne(beta));
    }
    let exponent = alpha - l / (1.0 - beta);
    Ok(HaleEnvelope {
        beta,
        exponent,
        bound: k / (1.0 - beta) * (-exponent * t).exp(),
        decays: exponent > 0.0,
    })
}
