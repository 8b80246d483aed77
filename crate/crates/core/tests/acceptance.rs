//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use decaycert::attractor::{default_schedule, pullback_attractor, sample_ball};
use decaycert::certificate::{chen_rate, derive_constants, exp_certificate, halanay_map, Decay};
use decaycert::dde::{integrate, Delay, DelaySystem, History, IntegratorOptions};
use decaycert::func::ScalarFunction;
use decaycert::kernels::{kappa_sup, theta_sup, QuadratureConfig};
use decaycert::oracle::{characteristic_root, majorant_fixed_point, OracleOptions};
use decaycert::sectorial::{
    kappa0, kappa0_closed_form, neural_demo_build, sectorial_thresholds, NeuralNetwork, Variant,
};
use decaycert::systems::{
    linear_lag_system, periodic_certificate, scalar_fde_certificate, scalar_superlinear,
    superlinear_certificate, ScalarFde, TWO_PI,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn constants_exactness() -> Outcome {
    let c = derive_constants(1.0, 1.0 / 3.0);
    let close = |v: Option<f64>, e: f64| v.is_some_and(|v| (v - e).abs() <= 1e-12);
    check(
        close(c.mu, 1.5) && close(c.c, 1.5) && close(c.gamma, 5.0) && close(c.sigma, 0.75),
        format!("mu={:?} c={:?} gamma={:?} sigma={:?}", c.mu, c.c, c.gamma, c.sigma),
    )
}

fn halanay_mapping() -> Outcome {
    let data = halanay_map(2.0, 1.0, 1.0).map_err(err)?;
    let k = kappa_sup(data.k1.as_ref(), None, 50.0, &QuadratureConfig::default()).map_err(err)?;
    let th = theta_sup(&data.e, 50.0, &QuadratureConfig::default()).map_err(err)?;
    check(
        (k.value - 0.5).abs() <= 1e-6 && th.value == 1.0,
        format!("kappa={:.12} (pad {:.1e}), theta={}", k.value, k.pad, th.value),
    )
}

fn kappa0_closed_form_check() -> Outcome {
    let q = kappa0(0.5, 1.0, Variant::Full, &QuadratureConfig::default()).map_err(err)?;
    let g = kappa0_closed_form(0.5, 1.0, Variant::Full);
    let exact = PI.sqrt() + 1.0;
    check(
        (q.value - g).abs() <= 1e-6 && (q.value - exact).abs() <= 1e-6,
        format!("quadrature={:.10} gamma-form={:.10}", q.value, g),
    )
}

/// `c0 + c1 sin(w s + p)` scaled so that the sup over `[-1, 0]` is at most 10.
fn random_history(rng: &mut ChaCha8Rng) -> History {
    let c0: f64 = rng.random_range(-1.0..=1.0);
    let c1: f64 = rng.random_range(-1.0..=1.0);
    let w = rng.random_range(0.0..6.0);
    let p = rng.random_range(0.0..TWO_PI);
    let size: f64 = rng.random_range(0.5..=10.0);
    let scale = size / (c0.abs() + c1.abs()).max(1e-3);
    History::function(1, move |s, out| out[0] = scale * (c0 + c1 * (w * s + p).sin()))
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn end_to_end_envelope() -> Outcome {
    let data = halanay_map(3.0, 1.0, 1.0).map_err(err)?;
    let cfg = QuadratureConfig::default();
    let theta = theta_sup(&data.e, 50.0, &cfg).map_err(err)?;
    let kappa = kappa_sup(data.k1.as_ref(), None, 50.0, &cfg).map_err(err)?;
    let consts = derive_constants(theta.upper(), kappa.upper());
    let cert = exp_certificate(&consts, Decay::Exponential { m0: 1.0, lambda0: 3.0 }, 1.0).map_err(err)?;
    if (cert.m - 1.7321).abs() > 1e-4 || (cert.lambda - 0.0936).abs() > 1e-4 {
        return Err(format!("certificate M={} lambda={}", cert.m, cert.lambda));
    }
    let oracle = -characteristic_root(3.0, 1.0, 1.0).map_err(err)?;
    let sys = linear_lag_system(3.0, 1.0, 1.0);
    let gamma = consts.gamma.unwrap();
    let t_end = cert.horizon.max(24.0);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let histories: Vec<History> = (0..200).map(|_| random_history(&mut rng)).collect();
    let rows: Vec<Result<(bool, f64), String>> = histories
        .par_iter()
        .map(|phi| {
            let tr = integrate(&sys, phi, 0.0, t_end, 0.01, &IntegratorOptions::default()).map_err(err)?;
            let rep = tr.verify_envelope(&cert, gamma, 0.0, 1e-6).map_err(err)?;
            let pts: Vec<(f64, f64)> = (0..=160)
                .map(|k| 8.0 + 0.1 * k as f64)
                .map(|t| Ok((t, tr.segment_norm(t, 64).map_err(err)?.ln())))
                .collect::<Result<_, String>>()?;
            Ok((rep.passed, -slope(&pts)))
        })
        .collect();
    let mut all_pass = true;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        let (passed, rate) = r?;
        all_pass &= passed;
        lo = lo.min(rate);
        hi = hi.max(rate);
    }
    let within = |r: f64| (r - oracle).abs() <= 0.05 * oracle && r >= cert.lambda;
    check(
        all_pass && within(lo) && within(hi),
        format!(
            "M={:.4} lambda={:.4}; envelopes pass={all_pass}; empirical rates in [{lo:.4}, {hi:.4}] vs root {oracle:.4}",
            cert.m, cert.lambda
        ),
    )
}

fn sharpness_witness() -> Outcome {
    let unstable = characteristic_root(1.0, 2.0, 1.0).map_err(err)?;
    let root = characteristic_root(2.0, 1.0, 1.0).map_err(err)?;
    let chen = chen_rate(2.0, 1.0, 1.0).map_err(err)?;
    check(
        unstable > 0.0 && (root + chen).abs() <= 1e-10,
        format!("root(1,2,1)={unstable:.6}, root(2,1,1)={root:.12}, chen={chen:.12}"),
    )
}

fn periodic_thresholds() -> Outcome {
    let a = ScalarFunction::sine_offset(1.0, 1.0, 0.0, 0.5);
    let cfg = QuadratureConfig::default();
    let rep = periodic_certificate(&a, TWO_PI, 0.002, 1.0, &cfg).map_err(err)?;
    let coarse = rep.coarse.clone().ok_or("no coarse bounds")?;
    let i_minus = 3f64.sqrt() - PI / 3.0;
    let quad_ok = (rep.i - PI).abs() <= 1e-8 && (rep.i_minus - i_minus).abs() <= 1e-8;
    let order_ok = coarse.beta1 <= rep.beta1 && (coarse.beta1 - 0.5 * (-(2.0 + PI)).exp()).abs() < 1e-12;

    let fde = ScalarFde::lagged(a, ScalarFunction::constant(0.002), 1.0);
    let sweep = scalar_fde_certificate(&fde, &decaycert::systems::periodic_tau_grid(TWO_PI, 16), 10.0 * TWO_PI, &cfg)
        .map_err(err)?;
    let consts = sweep.constants();
    let cert = exp_certificate(&consts, Decay::Majorant(&sweep.majorant), 1.0).map_err(err)?;
    let target = 1e-4;
    let t_star = cert.horizon + (cert.m / target).ln() / cert.lambda;
    let tr = integrate(&fde.system(), &History::scalar(1.0), 0.0, t_star, 0.01, &IntegratorOptions::default())
        .map_err(err)?;
    let last = tr.segment_norm(t_star, 64).map_err(err)?;
    let env = tr.verify_envelope(&cert, consts.gamma.unwrap(), 0.0, 1e-6).map_err(err)?;
    check(
        quad_ok && order_ok && last < target && env.passed,
        format!(
            "I={:.10} I-={:.10}; coarse beta1={:.5} <= beta1={:.5}; decayed to {last:.2e} by t={t_star:.1} (M={:.3}, lambda={:.4})",
            rep.i, rep.i_minus, coarse.beta1, rep.beta1, cert.m, cert.lambda
        ),
    )
}

fn superlinear_dissipativity() -> Outcome {
    let sl = scalar_superlinear(0.1, 1.0, 1.0);
    let cert = superlinear_certificate(&sl).map_err(err)?;
    if !cert.dissipative {
        return Err("superlinear certificate is not dissipative".into());
    }
    let sys = sl.system();
    let h = 0.005;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let histories: Vec<History> = (0..100).map(|_| random_history(&mut rng)).collect();
    let peaks: Vec<(f64, f64)> = histories
        .par_iter()
        .map(|phi| {
            let tr = integrate(&sys, phi, 0.0, 60.0, h, &IntegratorOptions::default()).map_err(err)?;
            let (mut first, mut second) = (0.0f64, 0.0f64);
            for (k, &t) in tr.times().iter().enumerate() {
                let v = tr.state(k)[0].abs();
                if (20.0..40.0).contains(&t) {
                    first = first.max(v);
                } else if t >= 40.0 {
                    second = second.max(v);
                }
            }
            Ok((first, second))
        })
        .collect::<Result<_, String>>()?;
    let radius = 1.1 * peaks.iter().map(|p| p.0).fold(0.0, f64::max);
    let stays = peaks.iter().all(|p| p.1 <= radius);

    let cloud = sample_ball(1, sys.max_lag, 10.0, 16, 0.05, 42).map_err(err)?;
    let schedule = default_schedule(0.0, sys.max_lag);
    let rep = pullback_attractor(&sys, 0.0, &cloud, &schedule, h, 1e-3, Some(radius), &IntegratorOptions::default())
        .map_err(err)?;
    let last = *rep.dh_history.last().unwrap();
    check(
        stays && rep.converged && last < 1e-3,
        format!(
            "eps*={:.3e}; radius={radius:.4}, all stay inside={stays}; pullback dH history {:?}",
            cert.eps_star.unwrap(),
            rep.dh_history.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn oracle_dominance() -> Outcome {
    let mut data = halanay_map(2.0, 1.0, 1.0).map_err(err)?;
    data.rho = 1.0;
    let t_max = 20.0;
    let table = majorant_fixed_point(&data, 0.0, t_max, 2001, &OracleOptions::default()).map_err(err)?;
    let below_ultimate = table.max() <= 2.0 + 1e-3;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let members: Vec<(f64, f64, f64, f64, f64, f64)> = (0..50)
        .map(|k| {
            if k == 0 {
                // the extremal member: c = 1, g = 2
                (1.0, 0.0, 0.0, 2.0, 0.0, 0.0)
            } else {
                let c = rng.random_range(-1.0..=1.0);
                let cw = rng.random_range(0.0..4.0);
                let cp = rng.random_range(0.0..TWO_PI);
                let g = rng.random_range(-2.0..=2.0);
                let gw = rng.random_range(0.0..4.0);
                let gp = rng.random_range(0.0..TWO_PI);
                (c, cw, cp, g, gw, gp)
            }
        })
        .collect();
    let worst = members
        .par_iter()
        .map(|&(c, cw, cp, g, gw, gp)| {
            // |c(t)| <= 1, |g(t)| <= 2, so |x| satisfies the Halanay inequality with ρ = 1
            let sys = DelaySystem::new(1, vec![Delay::Constant(1.0)], move |t, x, xd, out| {
                let ct = if cw == 0.0 { c } else { c * (cw * t + cp).cos() };
                let gt = if gw == 0.0 { g } else { g * (gw * t + gp).cos() };
                out[0] = -2.0 * x[0] + ct * xd[0][0] + gt;
            });
            let tr = integrate(&sys, &History::scalar(0.0), 0.0, t_max, 0.01, &IntegratorOptions::default())
                .map_err(err)?;
            let mut worst = f64::NEG_INFINITY;
            for (k, &t) in tr.times().iter().enumerate() {
                worst = worst.max(tr.state(k)[0].abs() - table.at(t));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>, String>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        below_ultimate && worst <= 1e-3,
        format!(
            "majorant max={:.6} after {} iterations; worst member excess={worst:.3e}",
            table.max(),
            table.iterations
        ),
    )
}

fn order_four() -> Outcome {
    let sys = linear_lag_system(2.0, 1.0, 1.0);
    let exact = (1.0 + (-2f64).exp()) / 2.0;
    let errors: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let tr = integrate(&sys, &History::scalar(1.0), 0.0, 1.0, h, &IntegratorOptions::default()).map_err(err)?;
            Ok((tr.last_state()[0] - exact).abs())
        })
        .collect::<Result<_, String>>()?;
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    check(
        ratios.iter().all(|r| *r >= 12.0),
        format!(
            "errors {:?}, ratios {ratios:.2?}",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn neural_demo() -> Outcome {
    let net = NeuralNetwork {
        mesh_points: 9,
        diffusion: vec![1.0, 1.0],
        coupling: vec![vec![0.0; 2]; 2],
        connections: vec![vec![0.5, -0.3], vec![0.4, 0.5]],
        delays: vec![vec![0.5, 1.0], vec![1.0, 0.5]],
        inputs: vec![
            ScalarFunction::sine_offset(1.0, 1.0, 0.0, 0.0),
            ScalarFunction::sine_offset(1.0, 1.0, PI / 2.0, 0.0),
        ],
    };
    let demo = neural_demo_build(&net).map_err(err)?;
    let verdict = sectorial_thresholds(&demo.params, Variant::Stable, &QuadratureConfig::default()).map_err(err)?;
    if !(verdict.equilibrium_exists && demo.unique_periodic) {
        return Err(format!("L={} not below 1/(kappa0 M)={}", demo.params.lipschitz, verdict.equilibrium_threshold));
    }
    let dim = demo.system.dim;
    let h = 0.005;
    let t_end = 40.0;
    let opts = IntegratorOptions::default();
    let a = integrate(&demo.system, &History::constant(vec![1.0; dim]), 0.0, t_end, h, &opts).map_err(err)?;
    let b = integrate(
        &demo.system,
        &History::function(dim, |s, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = -2.0 * ((i as f64 + 1.0) * (s + 0.3)).cos();
            }
        }),
        0.0,
        t_end,
        h,
        &opts,
    )
    .map_err(err)?;
    let gap = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let mut pair = 0.0f64;
    let mut period = 0.0f64;
    for (k, &t) in a.times().iter().enumerate() {
        if t >= 25.0 {
            pair = pair.max(gap(a.state(k), b.state(k)));
        }
        if t >= 25.0 && t + TWO_PI <= t_end {
            let shifted = a.value(t + TWO_PI).map_err(err)?;
            period = period.max(gap(a.state(k), &shifted));
        }
    }
    check(
        pair < 1e-4 && period < 1e-4,
        format!(
            "beta={:.4} L={:.4} threshold={:.4}; pairwise gap={pair:.2e}, periodicity gap={period:.2e}",
            demo.beta, demo.params.lipschitz, verdict.equilibrium_threshold
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("constants exactness", constants_exactness, Duration::from_millis(1)),
        ("halanay mapping", halanay_mapping, Duration::from_secs(1)),
        ("kappa0 closed form", kappa0_closed_form_check, Duration::from_secs(1)),
        ("end-to-end GEAS envelope", end_to_end_envelope, Duration::from_secs(30)),
        ("sharpness witness", sharpness_witness, Duration::from_secs(1)),
        ("periodic example thresholds", periodic_thresholds, Duration::from_secs(60)),
        ("superlinear dissipativity", superlinear_dissipativity, Duration::from_secs(120)),
        ("oracle dominance and ultimate bound", oracle_dominance, Duration::from_secs(60)),
        ("order-4 convergence", order_four, Duration::from_secs(10)),
        ("neural demo", neural_demo, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; exceeded budget {budget:?}")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name} [{:.3?}]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            took
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
