//! Gauss–Legendre rules and a few special functions.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pq = if q == 1 { z } else { p1 };
            let pqm1 = if q == 1 { 1.0 } else { p0 };
            dp = q as f64 * (z * pq - pqm1) / (z * z - 1.0);
            let dz = pq / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Composite rule on `[a, b]` with panels graded geometrically away from `a`.
///
/// The first panel has width `first`; panel widths double until `b` is reached.
pub fn graded_rule(a: f64, b: f64, first: f64, q: usize, out: &mut Vec<(f64, f64)>) {
    let len = (b - a).abs();
    if len <= 0.0 {
        return;
    }
    let sign = if b >= a { 1.0 } else { -1.0 };
    let (gx, gw) = gauss_legendre(q);
    let mut lo = 0.0;
    let mut width = first.min(len).max(len * 1e-12);
    while lo < len {
        let hi = (lo + width).min(len);
        let hi = if len - hi < 0.5 * width { len } else { hi };
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for (x, w) in gx.iter().zip(&gw) {
            out.push((a + sign * (mid + half * x), half * w));
        }
        lo = hi;
        width *= 2.0;
    }
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}
