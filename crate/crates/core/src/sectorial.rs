//! Constants for parabolic problems whose linear part decays like
//! `t^(-alpha) e^(-beta t)`, and a finite-difference reaction-diffusion
//! neural network with delayed coupling.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::dde::{Delay, DelaySystem};
use crate::func::ScalarFunction;
use crate::kernels::{kappa_sup, Kernel2, KernelError, QuadratureConfig, SupEstimate};
use crate::quad;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SectorialError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("symmetric part of the linear operator has smallest eigenvalue {0} <= 0")]
    UnstableLinearPart(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid sectorial input: {0}")]
    Invalid(String),
}

/// Which integrals enter `κ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Past power kernel plus the future exponential of an unstable part.
    Full,
    /// Past power kernel only; the whole spectrum lies to the right.
    Stable,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Stable => "stable",
        }
    }
}

/// Horizon handed to the stationary κ path; the exponential cutoff always
/// binds first.
const UNBOUNDED: f64 = 1e12;

fn check_exponents(alpha: f64, beta: f64) -> Result<(), SectorialError> {
    if !(0.0..1.0).contains(&alpha) || !(beta > 0.0 && beta.is_finite()) {
        return Err(SectorialError::Invalid("need alpha in [0,1) and beta > 0".into()));
    }
    Ok(())
}

/// `sup_t (∫_0^t (t-s)^(-α) e^(-β(t-s)) ds [+ ∫_t^∞ e^(β(t-s)) ds])` by
/// quadrature.
pub fn kappa0(alpha: f64, beta: f64, variant: Variant, cfg: &QuadratureConfig) -> Result<SupEstimate, SectorialError> {
    check_exponents(alpha, beta)?;
    let past = Kernel2::PowerSingular { c: 1.0, alpha, beta };
    let future = Kernel2::FutureExponential { c: 1.0, beta };
    let k2 = match variant {
        Variant::Full => Some(&future),
        Variant::Stable => None,
    };
    Ok(kappa_sup(Some(&past), k2, UNBOUNDED, cfg)?)
}

/// `Γ(1-α) β^(α-1)`, plus `1/β` for the full variant.
pub fn kappa0_closed_form(alpha: f64, beta: f64, variant: Variant) -> f64 {
    let past = gamma(1.0 - alpha) * beta.powf(alpha - 1.0);
    match variant {
        Variant::Full => past + 1.0 / beta,
        Variant::Stable => past,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorialParams {
    pub alpha: f64,
    pub beta: f64,
    /// Semigroup constant; `M_sect` in reports.
    pub m_sect: f64,
    pub lipschitz: f64,
    pub c0: f64,
    pub c1: f64,
}

impl SectorialParams {
    pub fn validate(&self) -> Result<(), SectorialError> {
        check_exponents(self.alpha, self.beta)?;
        if !(self.m_sect >= 1.0) || !(self.lipschitz >= 0.0) || !(self.c0 >= 0.0) || !(self.c1 >= 0.0) {
            return Err(SectorialError::Invalid("need M_sect >= 1 and L, C0, C1 >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorialVerdict {
    pub variant: Variant,
    pub kappa0: SupEstimate,
    /// `1 / (κ₀ M)`
    pub equilibrium_threshold: f64,
    /// `1 / (κ₀ M (1 + M))`
    pub geas_threshold: f64,
    pub equilibrium_exists: bool,
    pub gas: bool,
    pub geas: bool,
    pub rho_eq: Option<f64>,
}

/// Threshold checks on `L` and the radius of the absorbing ball around the
/// bounded complete solution.
///
/// Stability verdicts need the whole spectrum on the stable side, so the
/// full variant only ever answers the existence question.
pub fn sectorial_thresholds(
    params: &SectorialParams,
    variant: Variant,
    cfg: &QuadratureConfig,
) -> Result<SectorialVerdict, SectorialError> {
    params.validate()?;
    let k = kappa0(params.alpha, params.beta, variant, cfg)?;
    let m = params.m_sect;
    let eq_thr = 1.0 / (k.upper() * m);
    let geas_thr = eq_thr / (1.0 + m);
    let l = params.lipschitz;
    let equilibrium_exists = l < eq_thr;
    let stable = variant == Variant::Stable;
    let denom = 1.0 - k.upper() * params.c0 * m;
    let rho_eq = if denom > 0.0 {
        Some(params.c1 * m / denom * resolvent_mass(params.alpha, params.beta, cfg))
    } else {
        None
    };
    Ok(SectorialVerdict {
        variant,
        kappa0: k,
        equilibrium_threshold: eq_thr,
        geas_threshold: geas_thr,
        equilibrium_exists,
        gas: stable && equilibrium_exists,
        geas: stable && l < geas_thr,
        rho_eq,
    })
}

/// `∫_0^∞ (1 + s^(-α)) e^(-βs) ds`, with the tail past the cutoff added as
/// an upper bound.
pub fn resolvent_mass(alpha: f64, beta: f64, cfg: &QuadratureConfig) -> f64 {
    let upper = cfg.tail_cutoff.unwrap_or(40.0 / beta);
    let q = quad::power_substituted(
        alpha,
        upper,
        |u| (1.0 + u.powf(alpha)) * (-beta * u).exp(),
        cfg.abs_tol.max(cfg.rel_tol),
        cfg.max_refinements + 6,
    );
    let tail = (1.0 + upper.powf(-alpha)) * (-beta * upper).exp() / beta;
    q.value + tail
}

/// `2 (Σ_i (Σ_j |T_ij| L_j)²)^(1/2)`
pub fn neural_lipschitz(t: &[Vec<f64>], lg: &[f64]) -> Result<f64, SectorialError> {
    let n = lg.len();
    if t.len() != n || t.iter().any(|row| row.len() != n) {
        return Err(SectorialError::DimensionMismatch(format!(
            "connection matrix must be {n}x{n} to match {n} activation constants"
        )));
    }
    if lg.iter().any(|l| !(*l >= 0.0)) {
        return Err(SectorialError::Invalid("activation Lipschitz constants must be >= 0".into()));
    }
    let sum: f64 = t
        .iter()
        .map(|row| row.iter().zip(lg).map(|(tij, l)| tij.abs() * l).sum::<f64>().powi(2))
        .sum();
    Ok(2.0 * sum.sqrt())
}

/// A neural network `du_i/dt = (a_i u_i')' + Σ b_ij u_j + Σ T_ij g(u_j(t - r_ij)) + J_i(t)`
/// on `(0, 1)` with Dirichlet ends, `g = tanh`.
#[derive(Debug, Clone)]
pub struct NeuralNetwork {
    pub mesh_points: usize,
    pub diffusion: Vec<f64>,
    pub coupling: Vec<Vec<f64>>,
    pub connections: Vec<Vec<f64>>,
    pub delays: Vec<Vec<f64>>,
    pub inputs: Vec<ScalarFunction>,
}

/// Lipschitz constant of `tanh`.
pub const TANH_LIPSCHITZ: f64 = 1.0;

impl NeuralNetwork {
    pub fn neurons(&self) -> usize {
        self.diffusion.len()
    }

    pub fn validate(&self) -> Result<(), SectorialError> {
        let n = self.neurons();
        if n == 0 {
            return Err(SectorialError::Invalid("need at least one neuron".into()));
        }
        if self.mesh_points < 3 {
            return Err(SectorialError::Invalid("need at least 3 mesh points".into()));
        }
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if !square(&self.coupling) || !square(&self.connections) || !square(&self.delays) || self.inputs.len() != n {
            return Err(SectorialError::DimensionMismatch(format!(
                "coupling, connections and delays must be {n}x{n}, inputs of length {n}"
            )));
        }
        if self.diffusion.iter().any(|a| !(*a > 0.0)) {
            return Err(SectorialError::Invalid("diffusion coefficients must be positive".into()));
        }
        if self.delays.iter().flatten().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(SectorialError::Invalid("delays must be positive".into()));
        }
        Ok(())
    }

    /// The matrix of `A - B`, with `A` the negative discrete diffusion.
    pub fn linear_operator(&self) -> DMatrix<f64> {
        let n = self.neurons();
        let m = self.mesh_points;
        let h = 1.0 / (m + 1) as f64;
        let mut op = DMatrix::zeros(n * m, n * m);
        for i in 0..n {
            let d = self.diffusion[i] / (h * h);
            for k in 0..m {
                let row = i * m + k;
                op[(row, row)] += 2.0 * d;
                if k > 0 {
                    op[(row, row - 1)] -= d;
                }
                if k + 1 < m {
                    op[(row, row + 1)] -= d;
                }
                for j in 0..n {
                    op[(row, j * m + k)] -= self.coupling[i][j];
                }
            }
        }
        op
    }
}

#[derive(Debug, Clone)]
pub struct NeuralDemo {
    pub system: DelaySystem,
    pub params: SectorialParams,
    /// Smallest eigenvalue of the symmetric part of `A - B`.
    pub beta: f64,
    /// Whether the coupling matrix is symmetric.
    pub symmetric: bool,
    /// Gershgorin lower bound on the real spectrum of `A - B`.
    pub gershgorin_beta: f64,
    /// `sup_t ∫_0^t e^(-β(t-s)) ds = 1/β`
    pub i_const: f64,
    /// `L < 1/(M I)`
    pub unique_periodic: bool,
}

/// Discretizes the network on `mesh_points` interior nodes and estimates
/// its constants.
///
/// `‖e^{-(A-B)t}‖₂ <= e^{-βt}` holds with `β` the smallest eigenvalue of
/// the symmetric part, so `M_sect = 1`. The Gershgorin bound is reported
/// as a cross-check when the coupling is not symmetric.
pub fn neural_demo_build(net: &NeuralNetwork) -> Result<NeuralDemo, SectorialError> {
    net.validate()?;
    let n = net.neurons();
    let m = net.mesh_points;
    let op = net.linear_operator();
    let sym = (&op + op.transpose()) * 0.5;
    let beta = SymmetricEigen::new(sym).eigenvalues.min();
    if !(beta > 0.0) {
        return Err(SectorialError::UnstableLinearPart(beta));
    }
    let symmetric = (0..n).all(|i| (0..n).all(|j| net.coupling[i][j] == net.coupling[j][i]));
    let gershgorin_beta = (0..n * m)
        .map(|r| {
            let off: f64 = (0..n * m).filter(|&c| c != r).map(|c| op[(r, c)].abs()).sum();
            op[(r, r)] - off
        })
        .fold(f64::INFINITY, f64::min);
    let lg = vec![TANH_LIPSCHITZ; n];
    let lipschitz = neural_lipschitz(&net.connections, &lg)?;
    let i_const = 1.0 / beta;
    let params = SectorialParams {
        alpha: 0.0,
        beta,
        m_sect: 1.0,
        lipschitz,
        c0: lipschitz,
        c1: 0.0,
    };

    let mut delays = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            delays.push(Delay::Constant(net.delays[i][j]));
        }
    }
    let minus_op = -op;
    let connections = net.connections.clone();
    let inputs = net.inputs.clone();
    let system = DelaySystem::new(n * m, delays, move |t, x, delayed, out| {
        for (r, o) in out.iter_mut().enumerate() {
            *o = minus_op.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
        for i in 0..n {
            let drive = inputs[i].eval(t);
            for k in 0..m {
                let mut s = drive;
                for j in 0..n {
                    s += connections[i][j] * delayed[i * n + j][j * m + k].tanh();
                }
                out[i * m + k] += s;
            }
        }
    });
    Ok(NeuralDemo {
        system,
        params,
        beta,
        symmetric,
        gershgorin_beta,
        i_const,
        unique_periodic: lipschitz < 1.0 / (params.m_sect * i_const),
    })
}
