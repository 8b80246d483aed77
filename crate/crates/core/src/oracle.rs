//! Brute-force reference values: the extremal solution of a retarded integral
//! inequality by fixed-point iteration, and the real characteristic root of
//! `ẋ = -a x + b x(t - lag)`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::certificate::InequalityData;
use crate::dde::fmt17;
use crate::kernels::{kappa_sup, Kernel2, KernelError, QuadratureConfig};
use crate::quad::{self, GaussLegendre};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("kappa = {0} >= 1, the iteration is not a contraction")]
    NotContractive(f64),
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid oracle input: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub quadrature: QuadratureConfig,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 10_000,
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// The iterated extremal solution on a uniform grid reaching back to `-r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorantTable {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl MajorantTable {
    /// Linear interpolation; clamps outside the grid.
    pub fn at(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t <= g[0] {
            return self.values[0];
        }
        let k = g.partition_point(|x| *x <= t);
        if k >= g.len() {
            return *self.values.last().unwrap();
        }
        let w = (t - g[k - 1]) / (g[k] - g[k - 1]);
        (1.0 - w) * self.values[k - 1] + w * self.values[k]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), OracleError> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| OracleError::Io(e.to_string());
        out.write_record(["t", "y*"]).map_err(io)?;
        for (t, v) in self.grid.iter().zip(&self.values) {
            out.write_record([fmt17(*t), fmt17(*v)]).map_err(io)?;
        }
        out.flush().map_err(|e| OracleError::Io(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), OracleError> {
        let f = std::fs::File::create(path).map_err(|e| OracleError::Io(e.to_string()))?;
        self.write_csv(f)
    }
}

/// `∫_a^b K(t, s) ds` for `a < b` within the kernel's support.
fn cell_integral(k: &Kernel2, t: f64, a: f64, b: f64, rule: &GaussLegendre, cfg: &QuadratureConfig, singular: bool) -> Result<f64, KernelError> {
    let mut err = None;
    let mut f = |s: f64| match k.eval(t, s) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let v = if singular {
        quad::adaptive(&mut f, a, b, cfg.abs_tol, cfg.rel_tol).value
    } else {
        rule.apply(a, b, &mut f)
    };
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `∫_{t_max}^∞ K2(t, s) ds`, available for exponential future kernels.
fn future_tail(k: &Kernel2, t: f64, t_max: f64) -> Result<f64, KernelError> {
    match k {
        Kernel2::FutureExponential { c, beta } if *beta > 0.0 => Ok(c * (beta * (t - t_max)).exp() / beta),
        Kernel2::ScaledBy { base, b } => {
            let bound = b.sup_abs_bound().ok_or(KernelError::DivergentTail)?;
            Ok(future_tail(base, t, t_max)? * bound)
        }
        _ => Err(KernelError::DivergentTail),
    }
}

/// Iterates the right-hand side of the inequality as a map on grid
/// functions, starting from the constant `y0_norm`, until the sup-change
/// drops below `opts.tol`.
///
/// Each cell of the integrals is weighted by the exact kernel mass and the
/// larger segment norm of its endpoints, so the discrete map overestimates
/// the continuous one. The segment norm on `[t-r, t]` is the grid maximum
/// over the window, rounded outward to whole cells. Iteration is Jacobi:
/// each table is built only from the previous one.
pub fn majorant_fixed_point(
    data: &InequalityData,
    y0_norm: f64,
    t_max: f64,
    n_grid: usize,
    opts: &OracleOptions,
) -> Result<MajorantTable, OracleError> {
    data.validate().map_err(|e| OracleError::Invalid(e.to_string()))?;
    if !(y0_norm >= 0.0 && t_max > 0.0 && n_grid >= 2) {
        return Err(OracleError::Invalid("need y0_norm >= 0, t_max > 0, n_grid >= 2".into()));
    }
    let cfg = &opts.quadrature;
    let kappa = kappa_sup(data.k1.as_ref(), data.k2.as_ref(), t_max, cfg)?;
    if kappa.upper() >= 1.0 {
        return Err(OracleError::NotContractive(kappa.upper()));
    }

    let dt = t_max / (n_grid - 1) as f64;
    let lag_cells = (data.r / dt - 1e-9).ceil().max(0.0) as usize;
    let times: Vec<f64> = (0..n_grid).map(|i| i as f64 * dt).collect();
    let rule = GaussLegendre::new(8);

    // past[i][j]: mass of K1(t_i, .) on [t_j, t_{j+1}], j < i
    let past: Vec<Vec<f64>> = match &data.k1 {
        None => vec![Vec::new(); n_grid],
        Some(k) => times
            .par_iter()
            .enumerate()
            .map(|(i, &t)| {
                (0..i)
                    .map(|j| cell_integral(k, t, times[j], times[j + 1], &rule, cfg, j + 1 == i))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?,
    };
    // future[i][j - i]: mass of K2(t_i, .) on [t_j, t_{j+1}], j >= i
    let (future, tails): (Vec<Vec<f64>>, Vec<f64>) = match &data.k2 {
        None => (vec![Vec::new(); n_grid], vec![0.0; n_grid]),
        Some(k) => {
            let rows = times
                .par_iter()
                .enumerate()
                .map(|(i, &t)| -> Result<(Vec<f64>, f64), KernelError> {
                    let cells = (i..n_grid - 1)
                        .map(|j| cell_integral(k, t, times[j], times[j + 1], &rule, cfg, false))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok((cells, future_tail(k, t, t_max)?))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.into_iter().unzip()
        }
    };
    let forcing: Vec<f64> = times
        .iter()
        .map(|&t| Ok(data.e.eval(t, 0.0)? * y0_norm + data.rho))
        .collect::<Result<_, KernelError>>()?;

    let mut y = vec![y0_norm; n_grid];
    let mut seg = vec![0.0; n_grid];
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        for i in 0..n_grid {
            let lo = i.saturating_sub(lag_cells);
            let mut m = y[lo..=i].iter().copied().fold(0.0, f64::max);
            if i < lag_cells {
                m = m.max(y0_norm);
            }
            seg[i] = m;
        }
        let sup_seg = seg.iter().copied().fold(0.0, f64::max);
        let next: Vec<f64> = (0..n_grid)
            .into_par_iter()
            .map(|i| {
                let p: f64 = past[i].iter().enumerate().map(|(j, w)| w * seg[j].max(seg[j + 1])).sum();
                let f: f64 = future[i]
                    .iter()
                    .enumerate()
                    .map(|(d, w)| w * seg[i + d].max(seg[i + d + 1]))
                    .sum();
                forcing[i] + p + f + tails[i] * sup_seg
            })
            .collect();
        residual = next.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        y = next;
        if residual < opts.tol {
            let mut grid: Vec<f64> = (1..=lag_cells).rev().map(|k| -(k as f64) * dt).collect();
            let mut values = vec![y0_norm; lag_cells];
            grid.extend_from_slice(&times);
            values.extend_from_slice(&y);
            return Ok(MajorantTable {
                grid,
                values,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(OracleError::NoConvergence {
        iterations: opts.max_iterations,
        residual,
    })
}

/// The real root of `λ + a = b e^{-λ lag}`, by bisection on
/// `[-a, max(b - a, 0)]`.
pub fn characteristic_root(a: f64, b: f64, lag: f64) -> Result<f64, OracleError> {
    if !(b >= 0.0 && lag > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(OracleError::Invalid("need b >= 0 and lag > 0".into()));
    }
    let f = |l: f64| l + a - b * (-l * lag).exp();
    let (mut lo, mut hi) = (-a, (b - a).max(0.0));
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    if f(lo) >= 0.0 {
        return Ok(lo);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Empirical decay rate of the majorant for each `κ = β/α` of the Halanay
/// family with `α = 1`, `ρ = 0`, `y0 = 1`: the log-linear slope over the
/// second half of `[0, t_max]`. Covers the band where only GAS is
/// certified; nothing is asserted about the result.
pub fn sharpness_probe(kappas: &[f64], r: f64, t_max: f64, n_grid: usize) -> Result<Vec<(f64, f64)>, OracleError> {
    kappas
        .iter()
        .map(|&k| {
            let data = crate::certificate::halanay_map(1.0, k, r).map_err(|e| OracleError::Invalid(e.to_string()))?;
            let table = majorant_fixed_point(&data, 1.0, t_max, n_grid, &OracleOptions::default())?;
            Ok((k, log_slope(&table, 0.5 * t_max, t_max)))
        })
        .collect()
}

/// Minus the least-squares slope of `ln y` over `[a, b]`.
pub fn log_slope(table: &MajorantTable, a: f64, b: f64) -> f64 {
    let pts: Vec<(f64, f64)> = table
        .grid
        .iter()
        .zip(&table.values)
        .filter(|(t, v)| **t >= a && **t <= b && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    -slope(&pts)
}

pub(crate) fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{derive_constants, exp_certificate, chen_rate, halanay_map, Decay};

    fn halanay(alpha: f64, beta: f64, rho: f64) -> InequalityData {
        let mut d = halanay_map(alpha, beta, 1.0).unwrap();
        d.rho = rho;
        d
    }

    #[test]
    fn pure_decay_reproduces_kernel() {
        let data = InequalityData {
            e: Kernel2::exponential(1.0, 1.0),
            k1: None,
            k2: None,
            rho: 0.0,
            r: 0.0,
        };
        let t = majorant_fixed_point(&data, 1.0, 5.0, 101, &OracleOptions::default()).unwrap();
        for (x, v) in t.grid.iter().zip(&t.values) {
            assert!((v - (-x).exp()).abs() < 1e-14);
        }
        assert!(t.iterations <= 2);
    }

    #[test]
    fn ultimate_bound_from_below() {
        let t = majorant_fixed_point(&halanay(2.0, 1.0, 1.0), 0.0, 30.0, 1501, &OracleOptions::default()).unwrap();
        assert!(t.max() <= 2.0 + 1e-3, "{}", t.max());
        assert!(*t.values.last().unwrap() > 1.9);
        assert!(t.values.iter().all(|v| *v >= 0.0));
        assert!(t.residual < 1e-10);
    }

    #[test]
    fn stays_under_exponential_certificate() {
        let data = halanay(3.0, 1.0, 0.0);
        let consts = derive_constants(1.0, 1.0 / 3.0);
        let cert = exp_certificate(&consts, Decay::Exponential { m0: 1.0, lambda0: 3.0 }, 1.0).unwrap();
        let t = majorant_fixed_point(&data, 1.0, 40.0, 2001, &OracleOptions::default()).unwrap();
        for (x, v) in t.grid.iter().zip(&t.values) {
            let env = cert.m * (-cert.lambda * x.max(0.0)).exp();
            assert!(*v <= env + 1e-9, "t={x}: {v} > {env}");
        }
    }

    #[test]
    fn not_contractive_is_rejected() {
        let e = majorant_fixed_point(&halanay(1.0, 1.0, 0.0), 1.0, 10.0, 101, &OracleOptions::default());
        assert!(matches!(e, Err(OracleError::NotContractive(_))));
    }

    #[test]
    fn future_kernel_is_included() {
        let data = InequalityData {
            e: Kernel2::exponential(1.0, 1.0),
            k1: None,
            k2: Some(Kernel2::FutureExponential { c: 0.25, beta: 1.0 }),
            rho: 1.0,
            r: 0.0,
        };
        let t = majorant_fixed_point(&data, 0.0, 20.0, 401, &OracleOptions::default()).unwrap();
        // κ = 0.25, so the fixed point of y = 1 + κ y is 4/3
        assert!((t.max() - 4.0 / 3.0).abs() < 1e-3, "{}", t.max());
        assert!(t.max() <= 4.0 / 3.0 + 1e-9);
    }

    #[test]
    fn characteristic_root_examples() {
        assert!(characteristic_root(1.0, 1.0, 1.0).unwrap().abs() < 1e-12);
        let r = characteristic_root(2.0, 1.0, 1.0).unwrap();
        assert!((r + 0.4429).abs() < 1e-4);
        assert!((r + chen_rate(2.0, 1.0, 1.0).unwrap()).abs() < 1e-10);
        assert!(characteristic_root(1.0, 2.0, 1.0).unwrap() > 0.0);
        assert!((characteristic_root(3.0, 0.0, 1.0).unwrap() + 3.0).abs() < 1e-15);
        let r = characteristic_root(3.0, 1.0, 1.0).unwrap();
        assert!((r + 0.7921).abs() < 1e-4, "{r}");
        assert!((r + 3.0 - (-r).exp()).abs() < 1e-12);
    }

    #[test]
    fn probe_reports_slower_decay_near_one() {
        let out = sharpness_probe(&[0.5, 0.9], 1.0, 40.0, 801).unwrap();
        assert!(out[0].1 > out[1].1);
        assert!(out[1].1 > 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let t = majorant_fixed_point(&halanay(2.0, 1.0, 1.0), 0.0, 2.0, 21, &OracleOptions::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        let back: Vec<f64> = rd.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
        assert_eq!(back, t.values);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn chen_rate_is_minus_root(alpha in 0.2f64..5.0, frac in 0.01f64..0.99, r in 0.05f64..3.0) {
            let beta = alpha * frac;
            let root = characteristic_root(alpha, beta, r).unwrap();
            let chen = chen_rate(alpha, beta, r).unwrap();
            proptest::prop_assert!((root + chen).abs() < 1e-10, "{} vs {}", root, chen);
        }
    }
}
