//! Quadrature primitives shared by the kernel functionals.
//!
//! Two rules live here: an adaptive Gauss-Kronrod 7/15 rule for smooth
//! integrands, and a trapezoid rule with Richardson refinement applied after
//! the substitution `v = u^(1-alpha)`, which removes an integrable
//! `u^(-alpha)` singularity at the left endpoint.

/// Relative floating-point slack folded into every error estimate.
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Result of a quadrature: the value and an error bound estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

impl QuadResult {
    pub const ZERO: QuadResult = QuadResult { value: 0.0, error: 0.0 };

    fn add(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            error: self.error + other.error,
        }
    }
}

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre recurrence, started from the
    /// Chebyshev-like guess `cos(pi (i + 3/4) / (n + 1/2))`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule on [a, b].
    pub fn apply<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

// Gauss-Kronrod 7/15 abscissae on [0, 1] (mirror for negative), Kronrod
// weights, and the Gauss weights for the odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// `(kronrod, |kronrod - gauss|)` on one panel.
fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(mid - dx) + f(mid + dx);
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Adaptive bisection with the Gauss-Kronrod 7/15 pair on [a, b].
///
/// A panel is accepted when `|K15 - G7|` is within
/// `max(abs_tol, rel_tol * |value|)`, scaled by the panel's share of the
/// interval. The returned error sums the accepted differences, which bound
/// the Kronrod error from above for all but pathological integrands, plus
/// a roundoff allowance.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    if a == b {
        return QuadResult::ZERO;
    }
    if b < a {
        let r = adaptive(f, b, a, abs_tol, rel_tol);
        return QuadResult {
            value: -r.value,
            error: r.error,
        };
    }
    let res = refine(&mut f, a, b, abs_tol, rel_tol, b - a, 0);
    QuadResult {
        value: res.value,
        error: res.error + ROUNDOFF * res.value.abs(),
    }
}

fn refine<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    total: f64,
    depth: u32,
) -> QuadResult {
    let (value, diff) = kronrod15(f, a, b);
    let share = (b - a) / total;
    let tol = abs_tol.max(rel_tol * value.abs()) * share.max(1e-6);
    if diff <= tol || depth >= 40 || !diff.is_finite() {
        return QuadResult { value, error: diff };
    }
    let mid = 0.5 * (a + b);
    refine(f, a, mid, abs_tol, rel_tol, total, depth + 1).add(refine(f, mid, b, abs_tol, rel_tol, total, depth + 1))
}

/// `∫_0^upper u^(-alpha) g(u) du` for `alpha in [0, 1)` and smooth `g`.
///
/// Substitutes `v = u^(1-alpha)`, giving `1/(1-alpha) ∫_0^{upper^(1-alpha)}
/// g(v^(1/(1-alpha))) dv`, and runs the trapezoid rule with interval
/// doubling. Richardson extrapolation is applied to successive trapezoid
/// sums; the error is the last extrapolated correction.
pub fn power_substituted<G: FnMut(f64) -> f64>(
    alpha: f64,
    upper: f64,
    mut g: G,
    tol: f64,
    max_refinements: u32,
) -> QuadResult {
    debug_assert!((0.0..1.0).contains(&alpha));
    if upper <= 0.0 {
        return QuadResult::ZERO;
    }
    let expo = 1.0 / (1.0 - alpha);
    let vmax = upper.powf(1.0 - alpha);
    let mut h = |v: f64| g(v.powf(expo));
    let mut n = 64usize;
    let step = vmax / n as f64;
    let mut sum = 0.5 * (h(0.0) + h(vmax)) + (1..n).map(|i| h(i as f64 * step)).sum::<f64>();
    let mut trap = sum * step;
    let mut best = trap;
    let mut err = f64::INFINITY;
    let mut prev_extrap: Option<f64> = None;
    for _ in 0..max_refinements.max(1) {
        let step = vmax / (2 * n) as f64;
        sum += (0..n).map(|i| h((2 * i + 1) as f64 * step)).sum::<f64>();
        n *= 2;
        let next = sum * step;
        let extrap = next + (next - trap) / 3.0;
        err = match prev_extrap {
            Some(p) => (extrap - p).abs(),
            None => (next - trap).abs(),
        };
        best = extrap;
        trap = next;
        prev_extrap = Some(extrap);
        if err <= tol.max(ROUNDOFF * best.abs()) {
            break;
        }
    }
    QuadResult {
        value: best * expo,
        error: err * expo + ROUNDOFF * best.abs() * expo,
    }
}
