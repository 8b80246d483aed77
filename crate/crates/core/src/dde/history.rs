use std::fmt;
use std::sync::Arc;

use super::hermite;

/// Initial segment `φ` on `[-r, 0]`, indexed by the offset `s` from the
/// initial time.
#[derive(Clone)]
pub enum History {
    Constant(Vec<f64>),
    /// `φ(s) = Σ_k coeffs[k] s^k`, each `coeffs[k]` a state vector.
    Polynomial(Vec<Vec<f64>>),
    Tabulated(Table),
    Function {
        dim: usize,
        f: Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>,
    },
}

/// Node values (and optionally derivatives) of a segment, flattened
/// row-major by node. With derivatives the table interpolates by cubic
/// Hermite pieces, otherwise piecewise linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub nodes: Arc<[f64]>,
    pub dim: usize,
    pub values: Vec<f64>,
    pub derivs: Option<Vec<f64>>,
}

impl Table {
    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    fn piece(&self, s: f64) -> usize {
        let n = self.nodes.len();
        self.nodes.partition_point(|x| *x <= s).saturating_sub(1).min(n - 2)
    }

    fn eval(&self, s: f64, out: &mut [f64]) {
        let n = self.nodes.len();
        if n == 1 {
            out.copy_from_slice(self.value(0));
            return;
        }
        let s = s.clamp(self.nodes[0], self.nodes[n - 1]);
        let j = self.piece(s);
        let (a, b) = (self.nodes[j], self.nodes[j + 1]);
        if s == a {
            out.copy_from_slice(self.value(j));
            return;
        }
        if s == b {
            out.copy_from_slice(self.value(j + 1));
            return;
        }
        let d = self.dim;
        match &self.derivs {
            Some(dv) => hermite::eval(
                a,
                b,
                self.value(j),
                self.value(j + 1),
                &dv[j * d..(j + 1) * d],
                &dv[(j + 1) * d..(j + 2) * d],
                s,
                out,
            ),
            None => {
                let w = (s - a) / (b - a);
                for i in 0..d {
                    out[i] = self.values[j * d + i] * (1.0 - w) + self.values[(j + 1) * d + i] * w;
                }
            }
        }
    }

    fn derivative(&self, s: f64, out: &mut [f64]) {
        let n = self.nodes.len();
        if n == 1 {
            out.fill(0.0);
            return;
        }
        let s = s.clamp(self.nodes[0], self.nodes[n - 1]);
        let j = self.piece(s);
        let (a, b) = (self.nodes[j], self.nodes[j + 1]);
        let d = self.dim;
        match &self.derivs {
            Some(dv) => hermite::derivative(
                a,
                b,
                self.value(j),
                self.value(j + 1),
                &dv[j * d..(j + 1) * d],
                &dv[(j + 1) * d..(j + 2) * d],
                s,
                out,
            ),
            None => {
                for i in 0..d {
                    out[i] = (self.values[(j + 1) * d + i] - self.values[j * d + i]) / (b - a);
                }
            }
        }
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "Constant({v:?})"),
            Self::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            Self::Tabulated(t) => write!(f, "Tabulated(nodes={}, dim={})", t.nodes.len(), t.dim),
            Self::Function { dim, .. } => write!(f, "Function(dim={dim})"),
        }
    }
}

impl History {
    pub fn constant(v: Vec<f64>) -> Self {
        Self::Constant(v)
    }

    pub fn scalar(v: f64) -> Self {
        Self::Constant(vec![v])
    }

    pub fn function(dim: usize, f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self::Function { dim, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(v) => v.len(),
            Self::Polynomial(c) => c.first().map_or(0, Vec::len),
            Self::Tabulated(t) => t.dim,
            Self::Function { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, s: f64, out: &mut [f64]) {
        match self {
            Self::Constant(v) => out.copy_from_slice(v),
            Self::Polynomial(c) => {
                out.fill(0.0);
                for coeff in c.iter().rev() {
                    for (o, k) in out.iter_mut().zip(coeff) {
                        *o = *o * s + k;
                    }
                }
            }
            Self::Tabulated(t) => t.eval(s, out),
            Self::Function { f, .. } => f(s, out),
        }
    }

    pub fn derivative(&self, s: f64, out: &mut [f64]) {
        match self {
            Self::Constant(_) => out.fill(0.0),
            Self::Polynomial(c) => {
                out.fill(0.0);
                for (k, coeff) in c.iter().enumerate().skip(1).rev() {
                    for (o, a) in out.iter_mut().zip(coeff) {
                        *o = *o * s + k as f64 * a;
                    }
                }
            }
            Self::Tabulated(t) => t.derivative(s, out),
            Self::Function { f, dim } => {
                let h = 1e-6 * (1.0 + s.abs());
                let mut lo = vec![0.0; *dim];
                f(s - h, &mut lo);
                f(s + h, out);
                for (o, l) in out.iter_mut().zip(&lo) {
                    *o = (*o - l) / (2.0 * h);
                }
            }
        }
    }

    /// `sup_{s∈[-r,0]} |φ(s)|` in the Euclidean norm, sampled at `n + 1`
    /// points plus any table nodes.
    pub fn sup_norm(&self, r: f64, n: usize) -> f64 {
        let mut buf = vec![0.0; self.dim()];
        let mut best = 0.0f64;
        let mut probe = |s: f64, best: &mut f64| {
            self.eval(s, &mut buf);
            *best = best.max(norm(&buf));
        };
        if let Self::Constant(v) = self {
            return norm(v);
        }
        if let Self::Tabulated(t) = self {
            for &s in t.nodes.iter() {
                probe(s, &mut best);
            }
        }
        let n = n.max(1);
        for j in 0..=n {
            probe(-r + r * j as f64 / n as f64, &mut best);
        }
        best
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
