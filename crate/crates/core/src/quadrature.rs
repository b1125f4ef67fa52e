//! Time quadrature over (possibly non-uniform) sample times.

/// Composite Simpson rule over consecutive interval pairs, exact for
/// quadratics on non-uniform nodes. A trailing odd interval uses the
/// three-point rule on the last three nodes restricted to that interval.
pub fn simpson(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len(), "times and values differ in length");
    let n = times.len();
    match n {
        0 | 1 => return 0.0,
        2 => return 0.5 * (times[1] - times[0]) * (values[0] + values[1]),
        _ => {}
    }
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        total += simpson_pair(&times[i..i + 3], &values[i..i + 3]);
        i += 2;
    }
    if i + 1 < n {
        // one interval left: integrate the quadratic through the last three
        // nodes over [t_{n-2}, t_{n-1}]
        let (t0, t1, t2) = (times[n - 3], times[n - 2], times[n - 1]);
        let (f0, f1, f2) = (values[n - 3], values[n - 2], values[n - 1]);
        total += quadratic_integral([t0, t1, t2], [f0, f1, f2], t1, t2);
    }
    total
}

fn simpson_pair(t: &[f64], f: &[f64]) -> f64 {
    let h0 = t[1] - t[0];
    let h1 = t[2] - t[1];
    let s = h0 + h1;
    s / 6.0 * (f[0] * (2.0 - h1 / h0) + f[1] * s * s / (h0 * h1) + f[2] * (2.0 - h0 / h1))
}

/// Integral over `[a, b]` of the Lagrange quadratic through three nodes.
fn quadratic_integral(t: [f64; 3], f: [f64; 3], a: f64, b: f64) -> f64 {
    // Antiderivative of each Lagrange basis polynomial, evaluated exactly.
    let mut total = 0.0;
    for j in 0..3 {
        let (p, q) = match j {
            0 => (t[1], t[2]),
            1 => (t[0], t[2]),
            _ => (t[0], t[1]),
        };
        let denom = (t[j] - p) * (t[j] - q);
        // ∫ (x−p)(x−q) dx = x³/3 − (p+q)x²/2 + pq x
        let anti = |x: f64| x * x * x / 3.0 - (p + q) * x * x / 2.0 + p * q * x;
        total += f[j] * (anti(b) - anti(a)) / denom;
    }
    total
}

/// Left-rectangle rule: `Σ_i f_i (t_{i+1} − t_i)`.
pub fn left_rectangle(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len(), "times and values differ in length");
    times
        .windows(2)
        .zip(values)
        .map(|(w, f)| f * (w[1] - w[0]))
        .sum()
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
