//! Small numerical helpers shared across modules: quadrature on uniform
//! grids, the unit-sphere surface area, and least-squares line fits.

/// Gamma function at integer or half-integer arguments (2z integer, z > 0).
pub fn gamma_half_integer(two_z: usize) -> f64 {
    assert!(two_z > 0);
    if two_z % 2 == 0 {
        // Γ(n) = (n-1)!
        let n = two_z / 2;
        (1..n).fold(1.0, |acc, k| acc * k as f64)
    } else {
        // Γ(1/2 + k) = (2k)! / (4^k k!) √π
        let k = (two_z - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for j in 0..k {
            v *= j as f64 + 0.5;
        }
        v
    }
}

/// Surface area of the unit sphere S^{d-1} in ℝ^d (2 for d = 1).
pub fn sphere_surface_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half_integer(d)
}

/// Composite trapezoid rule on a uniform grid with spacing `h`.
pub fn trapezoid_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..n - 1].iter().sum();
    h * (0.5 * (values[0] + values[n - 1]) + interior)
}

/// Composite Simpson rule on a uniform grid with spacing `h`.
///
/// Needs an even number of intervals; a trailing trapezoid panel is used
/// otherwise (negligible for decayed integrands).
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 3 {
        return trapezoid_uniform(values, h);
    }
    let m = if (n - 1) % 2 == 0 { n } else { n - 1 };
    let mut sum = values[0] + values[m - 1];
    for (j, &v) in values[1..m - 1].iter().enumerate() {
        sum += if j % 2 == 0 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = sum * h / 3.0;
    if m != n {
        total += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    total
}

/// Cumulative trapezoid of `y` against (possibly nonuniform) abscissae `x`.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
        out.push(acc);
    }
    out
}

/// Least-squares fit y ≈ a + b x; returns (a, b).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    let b = (n * sxy - sx * sy) / denom;
    let a = (sy - b * sx) / n;
    (a, b)
}

/// Least-squares fit of y ≈ c x through the origin.
pub fn proportional_fit(x: &[f64], y: &[f64]) -> f64 {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    sxy / sxx
}
