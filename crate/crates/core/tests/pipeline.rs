//! Cross-module properties: certificates against simulations, the oracle
//! against both, and metric sanity of the segment-space distance.

use decaycert::attractor::{hausdorff_semidist, SetCloud};
use decaycert::certificate::{bounds, derive_constants, exp_certificate, halanay_map, Decay, Verdict};
use decaycert::config::Config;
use decaycert::dde::{integrate, History, IntegratorOptions};
use decaycert::kernels::{kappa_sup, theta_sup, QuadratureConfig};
use decaycert::oracle::{characteristic_root, majorant_fixed_point, OracleOptions};
use decaycert::systems::linear_lag_system;
use proptest::prelude::*;

fn cloud(values: &[f64]) -> SetCloud {
    let hist: Vec<History> = values.iter().map(|v| History::scalar(*v)).collect();
    SetCloud::from_histories(&hist, 1.0, 0.25, "test").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Solutions of `ẋ = -a x + b x(t-1)` with `0 < b < a/2` stay inside the
    /// certified envelope.
    #[test]
    fn certified_envelope_contains_simulation(a in 1.0f64..5.0, frac in 0.05f64..0.45, c0 in -5.0f64..5.0) {
        let b = frac * a;
        let data = halanay_map(a, b, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let th = theta_sup(&data.e, 50.0, &cfg).unwrap();
        let ka = kappa_sup(data.k1.as_ref(), None, 50.0, &cfg).unwrap();
        let consts = derive_constants(th.upper(), ka.upper());
        prop_assert_eq!(consts.verdict, Verdict::Geas);
        let cert = exp_certificate(&consts, Decay::Exponential { m0: 1.0, lambda0: a }, 1.0).unwrap();
        let sys = linear_lag_system(a, b, 1.0);
        let t_end = cert.horizon.max(10.0);
        let traj = integrate(&sys, &History::scalar(c0), 0.0, t_end, 0.01, &IntegratorOptions::default()).unwrap();
        let env = traj.verify_envelope(&cert, consts.gamma.unwrap(), 0.0, 1e-6).unwrap();
        prop_assert!(env.passed, "violation {}", env.max_violation);
    }

    /// The fixed-point majorant dominates the simulated extremal solution and
    /// stays under the uniform bound `c |y0|`.
    #[test]
    fn majorant_dominates_extremal_solution(a in 1.0f64..4.0, frac in 0.1f64..0.9) {
        let b = frac * a;
        let data = halanay_map(a, b, 1.0).unwrap();
        let table = majorant_fixed_point(&data, 1.0, 10.0, 501, &OracleOptions::default()).unwrap();
        let sys = linear_lag_system(a, b, 1.0);
        let traj = integrate(&sys, &History::scalar(1.0), 0.0, 10.0, 0.005, &IntegratorOptions::default()).unwrap();
        for (k, &t) in traj.times().iter().enumerate() {
            prop_assert!(traj.state(k)[0].abs() <= table.at(t) + 1e-9, "t={} x={} y*={}", t, traj.state(k)[0], table.at(t));
        }
        let cfg = QuadratureConfig::default();
        let consts = derive_constants(
            theta_sup(&data.e, 50.0, &cfg).unwrap().upper(),
            kappa_sup(data.k1.as_ref(), None, 50.0, &cfg).unwrap().upper(),
        );
        let uniform = bounds(&consts, 1.0, 0.0).unwrap().uniform;
        prop_assert!(table.max() <= uniform * (1.0 + 1e-9));
    }

    /// The semi-distance satisfies the triangle inequality on constant clouds.
    #[test]
    fn semidistance_triangle(
        x in prop::collection::vec(-5.0f64..5.0, 1..5),
        y in prop::collection::vec(-5.0f64..5.0, 1..5),
        z in prop::collection::vec(-5.0f64..5.0, 1..5),
    ) {
        let (x, y, z) = (cloud(&x), cloud(&y), cloud(&z));
        let xz = hausdorff_semidist(&x, &z).unwrap();
        let xy = hausdorff_semidist(&x, &y).unwrap();
        let yz = hausdorff_semidist(&y, &z).unwrap();
        prop_assert!(xz <= xy + yz + 1e-12);
        prop_assert_eq!(hausdorff_semidist(&x, &x).unwrap(), 0.0);
    }
}

#[test]
fn simulated_decay_rate_matches_characteristic_root() {
    let (a, b) = (2.0, 1.0);
    let root = characteristic_root(a, b, 1.0).unwrap();
    let sys = linear_lag_system(a, b, 1.0);
    let traj = integrate(&sys, &History::scalar(1.0), 0.0, 30.0, 0.01, &IntegratorOptions::default()).unwrap();
    let (x1, x2) = (traj.value(20.0).unwrap()[0], traj.value(30.0).unwrap()[0]);
    let rate = (x2.abs() / x1.abs()).ln() / 10.0;
    assert!((rate - root).abs() < 1e-3, "rate {rate} root {root}");
}

#[test]
fn config_round_trip_drives_certificate() {
    let cfg = Config::parse(
        "[inequality.e]\nkind = \"exponential\"\nm0 = 1.0\nlambda0 = 2.0\n\
         [inequality.k1]\nkind = \"exponential\"\nm0 = 0.5\nlambda0 = 2.0\n",
        &["inequality.rho=0.25".to_string()],
    )
    .unwrap();
    assert_eq!(cfg.selected().unwrap(), "inequality");
    let data = cfg.inequality.unwrap().build().unwrap();
    assert_eq!(data.rho, 0.25);
    let q = QuadratureConfig::default();
    let kappa = kappa_sup(data.k1.as_ref(), None, 50.0, &q).unwrap();
    assert!((kappa.value - 0.25).abs() < 1e-9);
    let consts = derive_constants(theta_sup(&data.e, 50.0, &q).unwrap().upper(), kappa.upper());
    assert_eq!(consts.verdict, Verdict::Geas);
    let b = bounds(&consts, 1.0, data.rho).unwrap();
    assert!((b.ultimate - 0.25 / 0.75).abs() < 1e-9);
}
