use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use super::history::{norm, History, Table};
use super::{hermite, DdeError};
use crate::certificate::ExpDecayCertificate;

/// Dense solution of a delay system on `[tau - r, t_end]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub(crate) tau: f64,
    pub(crate) r: f64,
    pub(crate) dim: usize,
    pub(crate) h: f64,
    pub(crate) times: Vec<f64>,
    pub(crate) states: Vec<f64>,
    pub(crate) derivs: Vec<f64>,
    pub(crate) history: History,
    pub(crate) node_norms: Vec<f64>,
}

impl Trajectory {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lag(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn derivative_at_node(&self, k: usize) -> &[f64] {
        &self.derivs[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    /// Index `k` of the step `[times[k], times[k+1]]` containing `t`.
    pub(crate) fn locate(&self, t: f64) -> usize {
        let last = self.times.len() - 2;
        let mut k = (((t - self.tau) / self.h).floor().max(0.0) as usize).min(last);
        while k > 0 && self.times[k] > t {
            k -= 1;
        }
        while k < last && self.times[k + 1] < t {
            k += 1;
        }
        k
    }

    fn check(&self, t: f64) -> Result<(), DdeError> {
        let slack = 1e-9 * (1.0 + self.h);
        if t < self.tau - self.r - slack {
            return Err(DdeError::LookupBeforeHistory { t });
        }
        if t > self.t_end() + slack {
            return Err(DdeError::OutOfDomain { t });
        }
        Ok(())
    }

    /// Dense value at `t`; stored states are returned unchanged at mesh nodes.
    pub fn eval(&self, t: f64, out: &mut [f64]) -> Result<(), DdeError> {
        self.check(t)?;
        self.eval_unchecked(t, out);
        Ok(())
    }

    pub(crate) fn eval_unchecked(&self, t: f64, out: &mut [f64]) {
        if t < self.tau {
            self.history.eval(t - self.tau, out);
            return;
        }
        if self.times.len() == 1 {
            out.copy_from_slice(self.state(0));
            return;
        }
        let k = self.locate(t);
        let (a, b) = (self.times[k], self.times[k + 1]);
        if t == a {
            out.copy_from_slice(self.state(k));
        } else if t >= b {
            out.copy_from_slice(self.state(k + 1));
        } else {
            hermite::eval(
                a,
                b,
                self.state(k),
                self.state(k + 1),
                self.derivative_at_node(k),
                self.derivative_at_node(k + 1),
                t,
                out,
            );
        }
    }

    pub fn value(&self, t: f64) -> Result<Vec<f64>, DdeError> {
        let mut out = vec![0.0; self.dim];
        self.eval(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_derivative(&self, t: f64, out: &mut [f64]) -> Result<(), DdeError> {
        self.check(t)?;
        if t < self.tau {
            self.history.derivative(t - self.tau, out);
            return Ok(());
        }
        if self.times.len() == 1 {
            out.copy_from_slice(self.derivative_at_node(0));
            return Ok(());
        }
        let k = self.locate(t);
        let (a, b) = (self.times[k], self.times[k + 1]);
        if t == a {
            out.copy_from_slice(self.derivative_at_node(k));
        } else if t >= b {
            out.copy_from_slice(self.derivative_at_node(k + 1));
        } else {
            hermite::derivative(
                a,
                b,
                self.state(k),
                self.state(k + 1),
                self.derivative_at_node(k),
                self.derivative_at_node(k + 1),
                t,
                out,
            );
        }
        Ok(())
    }

    /// `‖x_t‖ = sup_{s∈[-r,0]} |x(t+s)|`, from the mesh nodes inside the
    /// window and `n_samples + 1` uniformly spaced points including both ends.
    pub fn segment_norm(&self, t: f64, n_samples: usize) -> Result<f64, DdeError> {
        let slack = 1e-9 * (1.0 + self.h);
        if t < self.tau - slack || t > self.t_end() + slack {
            return Err(DdeError::OutOfDomain { t });
        }
        let t = t.clamp(self.tau, self.t_end());
        let lo = t - self.r;
        let mut best = 0.0f64;
        let first = self.times.partition_point(|x| *x < lo);
        let last = self.times.partition_point(|x| *x <= t);
        for v in &self.node_norms[first..last] {
            best = best.max(*v);
        }
        let mut buf = vec![0.0; self.dim];
        let n = if self.r == 0.0 { 0 } else { n_samples.max(1) };
        for j in 0..=n {
            let s = if n == 0 { t } else { lo + self.r * j as f64 / n as f64 };
            self.eval_unchecked(s.max(self.tau - self.r), &mut buf);
            best = best.max(norm(&buf));
        }
        Ok(best)
    }

    /// Segment norms at every mesh node.
    pub fn segment_norms(&self, n_samples: usize) -> Vec<f64> {
        self.times
            .iter()
            .map(|&t| self.segment_norm(t, n_samples).unwrap_or(f64::NAN))
            .collect()
    }

    /// The lift `x_t` as a Hermite table with node spacing `spacing`.
    pub fn segment(&self, t: f64, spacing: f64) -> Result<Table, DdeError> {
        self.check(t)?;
        self.check(t - self.r)?;
        let m = if self.r == 0.0 {
            0
        } else {
            ((self.r / spacing).round() as usize).max(1)
        };
        let nodes: Vec<f64> = (0..=m)
            .map(|j| if m == 0 { 0.0 } else { -self.r + self.r * j as f64 / m as f64 })
            .collect();
        let mut values = vec![0.0; (m + 1) * self.dim];
        let mut derivs = vec![0.0; (m + 1) * self.dim];
        for (j, s) in nodes.iter().enumerate() {
            let tt = snap(t + s, &self.times);
            self.eval_unchecked(tt, &mut values[j * self.dim..(j + 1) * self.dim]);
            self.eval_derivative(tt, &mut derivs[j * self.dim..(j + 1) * self.dim])?;
        }
        Ok(Table {
            nodes: Arc::from(nodes),
            dim: self.dim,
            values,
            derivs: Some(derivs),
        })
    }

    /// Checks `‖x_t‖ <= M‖φ‖e^{-λ(t-τ)} + γρ` at every mesh node.
    pub fn verify_envelope(
        &self,
        cert: &ExpDecayCertificate,
        gamma: f64,
        rho: f64,
        tol: f64,
    ) -> Result<EnvelopeReport, DdeError> {
        let span = self.t_end() - self.tau;
        if span < cert.horizon {
            return Err(DdeError::TooShort {
                needed: cert.horizon,
                available: span,
            });
        }
        let phi = self.history.sup_norm(self.r, 256).max(self.segment_norm(self.tau, 256)?);
        let mut worst = f64::NEG_INFINITY;
        let mut worst_time = self.tau;
        for &t in &self.times {
            let v = self.segment_norm(t, 32)? - cert.envelope(phi, gamma, rho, t - self.tau);
            if v > worst {
                worst = v;
                worst_time = t;
            }
        }
        let allowance = tol * (cert.m * phi + gamma * rho + 1.0);
        Ok(EnvelopeReport {
            passed: worst <= allowance,
            max_violation: worst,
            worst_time,
            samples: self.times.len(),
            allowance,
        })
    }

    /// CSV with columns `t, x1..xn, segnorm`, one row per mesh node, 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, w: W, n_samples: usize) -> Result<(), DdeError> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        header.push("segnorm".into());
        wr.write_record(&header).map_err(io)?;
        let norms = self.segment_norms(n_samples);
        for (k, &t) in self.times.iter().enumerate() {
            let mut row = vec![fmt17(t)];
            row.extend(self.state(k).iter().map(|v| fmt17(*v)));
            row.push(fmt17(norms[k]));
            wr.write_record(&row).map_err(io)?;
        }
        wr.flush().map_err(|e| DdeError::Io(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path, n_samples: usize) -> Result<(), DdeError> {
        let f = std::fs::File::create(path).map_err(|e| DdeError::Io(e.to_string()))?;
        self.write_csv(std::io::BufWriter::new(f), n_samples)
    }
}

fn io(e: csv::Error) -> DdeError {
    DdeError::Io(e.to_string())
}

/// Fixed 17-significant-digit formatting used by every CSV export.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "undefined".into()
    }
}

/// Moves `t` onto a mesh node when it is within roundoff of one.
fn snap(t: f64, times: &[f64]) -> f64 {
    let k = times.partition_point(|x| *x < t);
    for j in [k.saturating_sub(1), k] {
        if let Some(&x) = times.get(j) {
            if (x - t).abs() <= 1e-10 * (1.0 + x.abs()) {
                return x;
            }
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    pub passed: bool,
    pub max_violation: f64,
    pub worst_time: f64,
    pub samples: usize,
    /// The tolerance actually applied, `tol·(M‖φ‖+γρ+1)`.
    pub allowance: f64,
}
