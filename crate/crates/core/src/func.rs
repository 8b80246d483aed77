//! Scalar coefficient functions of time.
//!
//! These feed the kernels (`exp(-∫ a)`, gains `b(s)`) and the example
//! systems. Every variant except `Custom` integrates in closed form.

use std::fmt;
use std::sync::Arc;

use crate::quad;

/// A real function of one variable with an attached antiderivative.
#[derive(Clone)]
pub enum ScalarFunction {
    Constant(f64),
    /// `amplitude * sin(frequency * t + phase) + offset`
    SineOffset {
        amplitude: f64,
        frequency: f64,
        phase: f64,
        offset: f64,
    },
    /// Piecewise linear through `(times[i], values[i])`. Outside the table
    /// the function repeats with period `times.last - times.first` when
    /// `periodic`, otherwise it is held at the end values.
    Table {
        times: Arc<[f64]>,
        values: Arc<[f64]>,
        periodic: bool,
    },
    /// `inner(t + shift)`
    Shifted {
        inner: Box<ScalarFunction>,
        shift: f64,
    },
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        label: String,
    },
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::SineOffset {
                amplitude,
                frequency,
                phase,
                offset,
            } => write!(f, "SineOffset({amplitude}*sin({frequency}t+{phase})+{offset})"),
            Self::Table { times, periodic, .. } => {
                write!(f, "Table(n={}, periodic={periodic})", times.len())
            }
            Self::Shifted { inner, shift } => write!(f, "Shifted({inner:?}, {shift})"),
            Self::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl ScalarFunction {
    pub fn constant(c: f64) -> Self {
        Self::Constant(c)
    }

    pub fn sine_offset(amplitude: f64, frequency: f64, phase: f64, offset: f64) -> Self {
        Self::SineOffset {
            amplitude,
            frequency,
            phase,
            offset,
        }
    }

    /// Builds a table; times must be strictly increasing and at least two.
    pub fn table(times: Vec<f64>, values: Vec<f64>, periodic: bool) -> Option<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return None;
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self::Table {
            times: times.into(),
            values: values.into(),
            periodic,
        })
    }

    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom {
            f: Arc::new(f),
            label: label.into(),
        }
    }

    /// `t ↦ self(t + shift)`.
    pub fn shifted(&self, shift: f64) -> Self {
        match self {
            Self::Constant(_) => self.clone(),
            Self::SineOffset {
                amplitude,
                frequency,
                phase,
                offset,
            } => Self::SineOffset {
                amplitude: *amplitude,
                frequency: *frequency,
                phase: phase + frequency * shift,
                offset: *offset,
            },
            Self::Shifted { inner, shift: s } => Self::Shifted {
                inner: inner.clone(),
                shift: s + shift,
            },
            _ => Self::Shifted {
                inner: Box::new(self.clone()),
                shift,
            },
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::SineOffset {
                amplitude,
                frequency,
                phase,
                offset,
            } => amplitude * (frequency * t + phase).sin() + offset,
            Self::Table {
                times,
                values,
                periodic,
            } => table_eval(times, values, *periodic, t),
            Self::Shifted { inner, shift } => inner.eval(t + shift),
            Self::Custom { f, .. } => f(t),
        }
    }

    /// `∫_a^b f`. Closed form for every variant but `Custom`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::Constant(c) => c * (b - a),
            Self::SineOffset {
                amplitude,
                frequency,
                phase,
                offset,
            } => {
                let trig = if *frequency == 0.0 {
                    amplitude * phase.sin() * (b - a)
                } else {
                    -amplitude / frequency
                        * ((frequency * b + phase).cos() - (frequency * a + phase).cos())
                };
                trig + offset * (b - a)
            }
            Self::Table {
                times,
                values,
                periodic,
            } => table_antiderivative(times, values, *periodic, b)
                - table_antiderivative(times, values, *periodic, a),
            Self::Shifted { inner, shift } => inner.integral(a + shift, b + shift),
            Self::Custom { f, .. } => quad::adaptive(|t| f(t), a, b, 1e-13, 1e-12).value,
        }
    }

    /// The minimal period when the function is known to be periodic.
    pub fn period(&self) -> Option<f64> {
        match self {
            Self::Constant(_) => None,
            Self::SineOffset {
                amplitude,
                frequency,
                ..
            } => (*frequency != 0.0 && *amplitude != 0.0)
                .then(|| 2.0 * std::f64::consts::PI / frequency.abs()),
            Self::Table {
                times, periodic, ..
            } => periodic.then(|| times[times.len() - 1] - times[0]),
            Self::Shifted { inner, .. } => inner.period(),
            Self::Custom { .. } => None,
        }
    }

    /// An upper bound on `sup |f|` when one is available without sampling.
    pub fn sup_abs_bound(&self) -> Option<f64> {
        match self {
            Self::Constant(c) => Some(c.abs()),
            Self::SineOffset {
                amplitude, offset, ..
            } => Some(amplitude.abs() + offset.abs()),
            Self::Table { values, .. } => Some(values.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
            Self::Shifted { inner, .. } => inner.sup_abs_bound(),
            Self::Custom { .. } => None,
        }
    }

    /// True when the function is constant in time.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Self::Constant(c) => Some(*c),
            Self::SineOffset {
                amplitude, offset, ..
            } if *amplitude == 0.0 => Some(*offset),
            Self::Shifted { inner, .. } => inner.as_constant(),
            _ => None,
        }
    }
}

fn wrap(times: &[f64], periodic: bool, t: f64) -> (f64, f64) {
    // returns (time folded into the table, number of whole periods removed)
    let t0 = times[0];
    let t1 = times[times.len() - 1];
    if periodic {
        let p = t1 - t0;
        let k = ((t - t0) / p).floor();
        let mut u = t - k * p;
        if u >= t1 {
            u = t1;
        }
        (u, k)
    } else {
        (t, 0.0)
    }
}

fn locate(times: &[f64], t: f64) -> usize {
    // index i with times[i] <= t < times[i+1], clamped to the valid range
    match times.binary_search_by(|x| x.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i.min(times.len() - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(times.len() - 2),
    }
}

fn table_eval(times: &[f64], values: &[f64], periodic: bool, t: f64) -> f64 {
    let (u, _) = wrap(times, periodic, t);
    let n = times.len();
    if u <= times[0] {
        return values[0];
    }
    if u >= times[n - 1] {
        return values[n - 1];
    }
    let i = locate(times, u);
    let w = (u - times[i]) / (times[i + 1] - times[i]);
    values[i] + w * (values[i + 1] - values[i])
}

fn segment_area(times: &[f64], values: &[f64], i: usize, u: f64) -> f64 {
    // ∫_{times[i]}^{u} of the linear piece on [times[i], times[i+1]]
    let dt = u - times[i];
    let slope = (values[i + 1] - values[i]) / (times[i + 1] - times[i]);
    values[i] * dt + 0.5 * slope * dt * dt
}

/// Antiderivative anchored at `times[0]`.
fn table_antiderivative(times: &[f64], values: &[f64], periodic: bool, t: f64) -> f64 {
    let n = times.len();
    let full: f64 = (0..n - 1)
        .map(|i| segment_area(times, values, i, times[i + 1]))
        .sum();
    let (u, k) = wrap(times, periodic, t);
    let within = if u <= times[0] {
        values[0] * (u - times[0])
    } else if u >= times[n - 1] {
        full + values[n - 1] * (u - times[n - 1])
    } else {
        let i = locate(times, u);
        (0..i)
            .map(|j| segment_area(times, values, j, times[j + 1]))
            .sum::<f64>()
            + segment_area(times, values, i, u)
    };
    within + k * full
}
