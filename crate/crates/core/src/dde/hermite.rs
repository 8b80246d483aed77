//! Cubic Hermite interpolation on one interval.

#[allow(clippy::too_many_arguments)]
pub(crate) fn eval(a: f64, b: f64, ya: &[f64], yb: &[f64], da: &[f64], db: &[f64], t: f64, out: &mut [f64]) {
    let h = b - a;
    let th = (t - a) / h;
    let th2 = th * th;
    let th3 = th2 * th;
    let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
    let h10 = th3 - 2.0 * th2 + th;
    let h01 = -2.0 * th3 + 3.0 * th2;
    let h11 = th3 - th2;
    for i in 0..out.len() {
        out[i] = h00 * ya[i] + h * h10 * da[i] + h01 * yb[i] + h * h11 * db[i];
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn derivative(
    a: f64,
    b: f64,
    ya: &[f64],
    yb: &[f64],
    da: &[f64],
    db: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let h = b - a;
    let th = (t - a) / h;
    let th2 = th * th;
    let g00 = (6.0 * th2 - 6.0 * th) / h;
    let g10 = 3.0 * th2 - 4.0 * th + 1.0;
    let g01 = (-6.0 * th2 + 6.0 * th) / h;
    let g11 = 3.0 * th2 - 2.0 * th;
    for i in 0..out.len() {
        out[i] = g00 * ya[i] + g10 * da[i] + g01 * yb[i] + g11 * db[i];
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn reproduces_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t + 1.0;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let (a, b) = (0.3, 1.1);
        let mut o = [0.0];
        for k in 0..=10 {
            let t = a + (b - a) * k as f64 / 10.0;
            super::eval(a, b, &[f(a)], &[f(b)], &[df(a)], &[df(b)], t, &mut o);
            assert!((o[0] - f(t)).abs() < 1e-14);
            super::derivative(a, b, &[f(a)], &[f(b)], &[df(a)], &[df(b)], t, &mut o);
            assert!((o[0] - df(t)).abs() < 1e-13);
        }
    }
}
