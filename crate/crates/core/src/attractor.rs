//! Pullback images of sampled sets of history segments, and the Hausdorff
//! semi-distance between such samples.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dde::{fmt17, integrate, DdeError, DelaySystem, History, IntegratorOptions, Table};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttractorError {
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error("segment clouds use different tabulations")]
    Incompatible,
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// A finite sample of history segments sharing one tabulation of `[-r, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SetCloud {
    pub r: f64,
    pub dim: usize,
    pub nodes: Arc<[f64]>,
    pub segments: Vec<Table>,
    pub label: String,
}

impl SetCloud {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        if self.nodes.len() < 2 {
            0.0
        } else {
            self.nodes[1] - self.nodes[0]
        }
    }

    /// Builds a cloud from functions `φ_k(s)` with derivatives, sampled at
    /// `round(r / spacing) + 1` nodes.
    pub fn from_histories(
        histories: &[History],
        r: f64,
        spacing: f64,
        label: impl Into<String>,
    ) -> Result<Self, AttractorError> {
        let dim = histories
            .first()
            .map(History::dim)
            .ok_or_else(|| AttractorError::Invalid("empty cloud".into()))?;
        if histories.iter().any(|h| h.dim() != dim) {
            return Err(AttractorError::Invalid("mixed dimensions".into()));
        }
        let nodes = node_grid(r, spacing);
        let segments = histories
            .iter()
            .map(|h| {
                let mut values = vec![0.0; nodes.len() * dim];
                let mut derivs = vec![0.0; nodes.len() * dim];
                for (j, s) in nodes.iter().enumerate() {
                    h.eval(*s, &mut values[j * dim..(j + 1) * dim]);
                    h.derivative(*s, &mut derivs[j * dim..(j + 1) * dim]);
                }
                Table {
                    nodes: nodes.clone(),
                    dim,
                    values,
                    derivs: Some(derivs),
                }
            })
            .collect();
        Ok(Self {
            r,
            dim,
            nodes,
            segments,
            label: label.into(),
        })
    }

    /// Largest segment sup-norm over the tabulation nodes.
    pub fn max_norm(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|t| t.values.chunks(self.dim))
            .map(crate::dde::norm)
            .fold(0.0, f64::max)
    }

    /// Rows `segment, s, x1..xn`, one per tabulation node.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), AttractorError> {
        let err = |e: csv::Error| AttractorError::Invalid(e.to_string());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["segment".to_string(), "s".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        wr.write_record(&header).map_err(err)?;
        for (k, seg) in self.segments.iter().enumerate() {
            for (j, s) in self.nodes.iter().enumerate() {
                let mut row = vec![k.to_string(), fmt17(*s)];
                row.extend(seg.value(j).iter().map(|v| fmt17(*v)));
                wr.write_record(&row).map_err(err)?;
            }
        }
        wr.flush().map_err(|e| AttractorError::Invalid(e.to_string()))
    }
}

fn node_grid(r: f64, spacing: f64) -> Arc<[f64]> {
    if r == 0.0 {
        return Arc::from(vec![0.0]);
    }
    let m = ((r / spacing).round() as usize).max(1);
    Arc::from((0..=m).map(|j| -r + r * j as f64 / m as f64).collect::<Vec<_>>())
}

/// Samples a ball of radius `radius` in the segment space: linear histories
/// `a + b(1 + 2s/r)` with `a, b` at the corners `±radius/2` (scaled by
/// `1/√dim` per component), and `n_random` uniformly drawn constants.
pub fn sample_ball(
    dim: usize,
    r: f64,
    radius: f64,
    n_random: usize,
    spacing: f64,
    seed: u64,
) -> Result<SetCloud, AttractorError> {
    if dim == 0 || !(radius >= 0.0) || !(r >= 0.0) {
        return Err(AttractorError::Invalid("need dim > 0, radius >= 0, r >= 0".into()));
    }
    let half = radius / 2.0 / (dim as f64).sqrt();
    let signs: Vec<Vec<f64>> = if dim <= 3 {
        (0..1usize << dim)
            .map(|mask| (0..dim).map(|i| if mask >> i & 1 == 1 { half } else { -half }).collect())
            .collect()
    } else {
        vec![vec![half; dim], vec![-half; dim]]
    };
    let mut hist = Vec::new();
    for a in &signs {
        for b in &signs {
            let (a, b) = (a.clone(), b.clone());
            // φ(s) = (a + b) + (2b/r) s
            let slope: Vec<f64> = b.iter().map(|v| if r > 0.0 { 2.0 * v / r } else { 0.0 }).collect();
            let base: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            hist.push(History::Polynomial(vec![base, slope]));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = radius / (dim as f64).sqrt();
    for _ in 0..n_random {
        hist.push(History::Constant((0..dim).map(|_| rng.random_range(-side..=side)).collect()));
    }
    SetCloud::from_histories(&hist, r, spacing, format!("ball(radius={radius}, seed={seed})"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutcome {
    pub cloud: SetCloud,
    /// Indices of input segments whose trajectories blew up.
    pub dropped: Vec<usize>,
}

/// `Φ(t, τ)` applied to every segment of the cloud.
pub fn process_evolve(
    sys: &DelaySystem,
    cloud: &SetCloud,
    tau: f64,
    t: f64,
    h: f64,
    opts: &IntegratorOptions,
) -> Result<EvolveOutcome, AttractorError> {
    if t < tau {
        return Err(AttractorError::Invalid("evolution needs t >= tau".into()));
    }
    if (cloud.r - sys.max_lag).abs() > 1e-12 * (1.0 + cloud.r) {
        return Err(AttractorError::Invalid("cloud window differs from the system's lag".into()));
    }
    if t == tau {
        return Ok(EvolveOutcome {
            cloud: cloud.clone(),
            dropped: vec![],
        });
    }
    let spacing = cloud.spacing();
    let results: Vec<Result<Option<Table>, DdeError>> = cloud
        .segments
        .par_iter()
        .map(|seg| {
            match integrate(sys, &History::Tabulated(seg.clone()), tau, t, h, opts) {
                Ok(tr) => {
                    let mut out = tr.segment(t, if spacing > 0.0 { spacing } else { 1.0 })?;
                    out.nodes = cloud.nodes.clone();
                    Ok(Some(out))
                }
                Err(DdeError::Blowup { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut segments = Vec::with_capacity(results.len());
    let mut dropped = Vec::new();
    for (k, res) in results.into_iter().enumerate() {
        match res? {
            Some(s) => segments.push(s),
            None => dropped.push(k),
        }
    }
    Ok(EvolveOutcome {
        cloud: SetCloud {
            r: cloud.r,
            dim: cloud.dim,
            nodes: cloud.nodes.clone(),
            segments,
            label: format!("Phi({t}, {tau}) {}", cloud.label),
        },
        dropped,
    })
}

fn seg_distance(a: &Table, b: &Table, dim: usize) -> f64 {
    a.values
        .chunks(dim)
        .zip(b.values.chunks(dim))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `sup_{φ∈A} inf_{ψ∈B} ‖φ - ψ‖`, with the sup-norm taken over the shared
/// tabulation nodes.
pub fn hausdorff_semidist(a: &SetCloud, b: &SetCloud) -> Result<f64, AttractorError> {
    if a.dim != b.dim || a.nodes.len() != b.nodes.len() {
        return Err(AttractorError::Incompatible);
    }
    if a.nodes.iter().zip(b.nodes.iter()).any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs())) {
        return Err(AttractorError::Incompatible);
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    if b.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok(a.segments
        .par_iter()
        .map(|x| {
            b.segments
                .iter()
                .map(|y| seg_distance(x, y, a.dim))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max))
}

/// `max(d_H(A,B), d_H(B,A))`.
pub fn mutual_semidist(a: &SetCloud, b: &SetCloud) -> Result<f64, AttractorError> {
    Ok(hausdorff_semidist(a, b)?.max(hausdorff_semidist(b, a)?))
}

/// Initial times `t_star - {10, 20, 40, 80, 160}·r`.
pub fn default_schedule(t_star: f64, r: f64) -> Vec<f64> {
    let unit = if r > 0.0 { r } else { 1.0 };
    [10.0, 20.0, 40.0, 80.0, 160.0].iter().map(|k| t_star - k * unit).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackReport {
    pub t_star: f64,
    pub tau_schedule: Vec<f64>,
    /// Mutual semi-distance between images at consecutive schedule points.
    pub dh_history: Vec<f64>,
    pub converged: bool,
    /// A sample of the attractor section at `t_star`.
    pub attractor_sample: SetCloud,
    pub radius: Option<f64>,
    /// `None` when no radius was given or segments blew up.
    pub contained_in_ball: Option<bool>,
    pub dropped: usize,
    pub tolerance: f64,
}

/// Pulls `cloud0` back along the schedule and measures convergence of the
/// images `Φ(t_star, τ_k) cloud0`.
#[allow(clippy::too_many_arguments)]
pub fn pullback_attractor(
    sys: &DelaySystem,
    t_star: f64,
    cloud0: &SetCloud,
    tau_schedule: &[f64],
    h: f64,
    tol: f64,
    radius: Option<f64>,
    opts: &IntegratorOptions,
) -> Result<PullbackReport, AttractorError> {
    if tau_schedule.is_empty() {
        return Err(AttractorError::Invalid("empty schedule".into()));
    }
    if tau_schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(AttractorError::Invalid("schedule must be strictly decreasing".into()));
    }
    if tau_schedule[0] > t_star - sys.max_lag {
        return Err(AttractorError::Invalid("schedule must start below t_star - r".into()));
    }
    let mut prev: Option<SetCloud> = None;
    let mut dh_history = Vec::new();
    let mut dropped = 0;
    for &tau in tau_schedule {
        let out = process_evolve(sys, cloud0, tau, t_star, h, opts)?;
        dropped += out.dropped.len();
        if let Some(p) = &prev {
            dh_history.push(mutual_semidist(p, &out.cloud)?);
        }
        prev = Some(out.cloud);
    }
    let sample = prev.unwrap();
    let converged = dh_history.last().is_some_and(|d| *d < tol);
    let contained_in_ball = match radius {
        Some(rad) if dropped == 0 => Some(sample.max_norm() <= rad),
        _ => None,
    };
    Ok(PullbackReport {
        t_star,
        tau_schedule: tau_schedule.to_vec(),
        dh_history,
        converged,
        attractor_sample: sample,
        radius,
        contained_in_ball,
        dropped,
        tolerance: tol,
    })
}

/// Semi-distance between `Φ(t_star + Δ, t_star)` applied to the attractor
/// sample and the pullback image at `t_star + Δ` from the last schedule time.
pub fn invariance_gap(
    sys: &DelaySystem,
    report: &PullbackReport,
    cloud0: &SetCloud,
    delta: f64,
    h: f64,
    opts: &IntegratorOptions,
) -> Result<f64, AttractorError> {
    let tau = *report.tau_schedule.last().unwrap();
    let t = report.t_star + delta;
    let forward = process_evolve(sys, &report.attractor_sample, report.t_star, t, h, opts)?;
    let pulled = process_evolve(sys, cloud0, tau, t, h, opts)?;
    hausdorff_semidist(&forward.cloud, &pulled.cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::Delay;
    use crate::systems::{linear_lag_system, scalar_superlinear};

    fn constant_cloud(vals: &[f64]) -> SetCloud {
        let h: Vec<History> = vals.iter().map(|v| History::scalar(*v)).collect();
        SetCloud::from_histories(&h, 1.0, 0.25, "test").unwrap()
    }

    #[test]
    fn semidistance_examples() {
        let a = constant_cloud(&[0.0]);
        let b = constant_cloud(&[0.0, 5.0]);
        assert_eq!(hausdorff_semidist(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff_semidist(&constant_cloud(&[2.0]), &a).unwrap(), 2.0);
        assert_eq!(hausdorff_semidist(&a, &b).unwrap(), 0.0);
        assert_eq!(hausdorff_semidist(&b, &a).unwrap(), 5.0);
    }

    #[test]
    fn identity_at_equal_times() {
        let sys = linear_lag_system(3.0, 1.0, 1.0);
        let c = sample_ball(1, 1.0, 2.0, 3, 0.01, 7).unwrap();
        let out = process_evolve(&sys, &c, 0.5, 0.5, 0.01, &Default::default()).unwrap();
        assert_eq!(out.cloud, c);
    }

    #[test]
    fn composition_matches_single_leg() {
        let sys = scalar_superlinear(0.1, 1.0, 0.0).system();
        let c = sample_ball(1, 1.0, 2.0, 6, 0.01, 11).unwrap();
        let opts = IntegratorOptions::default();
        let one = process_evolve(&sys, &c, 0.0, 5.0, 0.01, &opts).unwrap().cloud;
        let mid = process_evolve(&sys, &c, 0.0, 2.0, 0.01, &opts).unwrap().cloud;
        let two = process_evolve(&sys, &mid, 2.0, 5.0, 0.01, &opts).unwrap().cloud;
        let gap = one
            .segments
            .iter()
            .zip(&two.segments)
            .map(|(a, b)| seg_distance(a, b, 1))
            .fold(0.0, f64::max);
        assert!(gap < 1e-8, "gap {gap}");
    }

    #[test]
    fn contraction_shrinks_diameter() {
        let sys = linear_lag_system(3.0, 1.0, 1.0);
        let c = sample_ball(1, 1.0, 4.0, 4, 0.01, 3).unwrap();
        let mut last = f64::INFINITY;
        for t in [2.0, 4.0, 6.0] {
            let img = process_evolve(&sys, &c, 0.0, t, 0.01, &Default::default()).unwrap().cloud;
            let d = mutual_semidist(&img, &constant_cloud_like(&img, 0.0)).unwrap();
            assert!(d < last);
            last = d;
        }
    }

    fn constant_cloud_like(c: &SetCloud, v: f64) -> SetCloud {
        SetCloud::from_histories(&[History::scalar(v)], c.r, c.spacing(), "zero").unwrap()
    }

    #[test]
    fn pullback_of_plain_decay_collapses_to_zero() {
        let sys = DelaySystem::new(1, vec![], |_, x, _, o| o[0] = -x[0]).with_max_lag(1.0);
        let c = sample_ball(1, 1.0, 2.0, 4, 0.05, 1).unwrap();
        let rep = pullback_attractor(&sys, 0.0, &c, &default_schedule(0.0, 1.0), 0.05, 1e-3, Some(1.0), &Default::default())
            .unwrap();
        assert!(rep.converged);
        assert!(rep.attractor_sample.max_norm() < 1e-3);
        assert_eq!(rep.contained_in_ball, Some(true));
    }

    #[test]
    fn fixed_point_cloud_converges_immediately() {
        let sys = linear_lag_system(3.0, 1.0, 1.0);
        let c = constant_cloud(&[0.0, 0.0]);
        let rep = pullback_attractor(&sys, 0.0, &c, &[-2.0, -4.0], 0.05, 1e-12, None, &Default::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.dh_history, vec![0.0]);
    }

    #[test]
    fn blown_up_segments_are_dropped() {
        let sys = DelaySystem::new(1, vec![Delay::Constant(1.0)], |_, x, _, o| o[0] = x[0] * x[0]);
        let c = constant_cloud(&[-1.0, 10.0]);
        let out = process_evolve(&sys, &c, 0.0, 1.0, 0.001, &Default::default()).unwrap();
        assert_eq!(out.dropped, vec![1]);
        assert_eq!(out.cloud.len(), 1);
    }

    #[test]
    fn ball_samples_are_bounded_and_seeded() {
        let a = sample_ball(2, 1.0, 3.0, 5, 0.1, 9).unwrap();
        let b = sample_ball(2, 1.0, 3.0, 5, 0.1, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.max_norm() <= 3.0 + 1e-12);
        assert_eq!(a.len(), 16 + 5);
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let c = constant_cloud(&[1.0, 2.0]);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 5);
    }
}
