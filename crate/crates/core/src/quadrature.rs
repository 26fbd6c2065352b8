//! Composite Simpson quadrature with refinement by interval doubling.

/// Relative agreement required between successive Simpson estimates.
pub const SIMPSON_RTOL: f64 = 1e-10;

/// Upper bound on the number of subintervals used for a single integral.
pub const MAX_SUBINTERVALS: usize = 1 << 20;

/// Outcome of a doubling Simpson run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub subintervals: usize,
    pub converged: bool,
}

/// Integrates `f` over `[lo, hi]` with composite Simpson, doubling the number
/// of subintervals until two successive estimates agree to [`SIMPSON_RTOL`]
/// relative to the larger of the integral and the integral of `|f|`.
///
/// The returned value includes the Richardson correction `(S_2n - S_n) / 15`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Estimate {
    if hi == lo {
        return Estimate {
            value: 0.0,
            subintervals: 0,
            converged: true,
        };
    }
    let width = hi - lo;
    // Samples are kept in order; doubling only evaluates the new midpoints.
    let mut samples = vec![f(lo), f(lo + 0.5 * width), f(hi)];
    let mut intervals = 2usize;
    let (mut prev, _) = simpson_sum(&samples, width);
    loop {
        let step = width / (2 * intervals) as f64;
        let mut refined = Vec::with_capacity(2 * samples.len() - 1);
        for (i, pair) in samples.windows(2).enumerate() {
            refined.push(pair[0]);
            refined.push(f(lo + (2 * i + 1) as f64 * step));
        }
        refined.push(*samples.last().unwrap());
        samples = refined;
        intervals *= 2;
        let (cur, abs) = simpson_sum(&samples, width);
        let diff = (cur - prev).abs();
        let scale = cur.abs().max(abs);
        if diff <= SIMPSON_RTOL * scale || intervals >= MAX_SUBINTERVALS {
            return Estimate {
                value: cur + (cur - prev) / 15.0,
                subintervals: intervals,
                converged: diff <= SIMPSON_RTOL * scale,
            };
        }
        prev = cur;
    }
}

fn simpson_sum(samples: &[f64], width: f64) -> (f64, f64) {
    let m = samples.len() - 1;
    let step = width / m as f64;
    let mut s = samples[0] + samples[m];
    let mut a = samples[0].abs() + samples[m].abs();
    for (i, v) in samples.iter().enumerate().take(m).skip(1) {
        let c = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += c * v;
        a += c * v.abs();
    }
    (s * step / 3.0, a * step.abs() / 3.0)
}

/// Composite trapezoid rule on arbitrary abscissae.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Running trapezoid integral: `out[i] = ∫_{xs[0]}^{xs[i]}`.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]);
        out.push(acc);
    }
    out
}
