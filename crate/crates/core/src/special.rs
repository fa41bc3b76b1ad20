//! Saddle-point evaluation of binomial-type probabilities (Loader's form):
//! `ln P` is assembled from the Stirling remainder and the deviance term
//! `x ln(x / m) + m - x`, each evaluated without cancellation, so the mass is
//! accurate to a few ulps even for indices in the millions.

use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Stirling remainder `ln Γ(x + 1) - (x + 1/2) ln x + x - ln √(2π)`, `x > 0`.
pub(crate) fn stirlerr(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    // δ(x) = δ(x + 1) + (x + 1/2) ln(1 + 1/x) - 1 lifts small arguments into
    // the range where the asymptotic series is exact to double precision.
    let mut shift = 0.0;
    let mut y = x;
    while y < 15.0 {
        shift += (y + 0.5) * (1.0 / y).ln_1p() - 1.0;
        y += 1.0;
    }
    let yy = y * y;
    shift + (S0 - (S1 - (S2 - (S3 - S4 / yy) / yy) / yy) / yy) / y
}

/// Deviance `x ln(x / m) + m - x` for `x >= 0`, `m > 0`.
pub(crate) fn bd0(x: f64, m: f64) -> f64 {
    if x == 0.0 {
        return m;
    }
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / f64::from(2 * j + 1);
            if next == s {
                return next;
            }
            s = next;
        }
        return s;
    }
    x * (x / m).ln() + m - x
}

/// `C(n, x) p^x q^(n - x)` with real `n >= x >= 0`, `q = 1 - p` passed
/// separately to keep its precision.
pub(crate) fn binomial_mass(x: f64, n: f64, p: f64, q: f64) -> f64 {
    if x == 0.0 {
        if n == 0.0 {
            return 1.0;
        }
        let lc = if p < 0.1 {
            -bd0(n, n * q) - n * p
        } else {
            n * q.ln()
        };
        return lc.exp();
    }
    if x == n {
        let lc = if q < 0.1 {
            -bd0(n, n * p) - n * q
        } else {
            n * p.ln()
        };
        return lc.exp();
    }
    if x < 0.0 || x > n {
        return 0.0;
    }
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = (2.0 * PI).ln() + x.ln() + (-x / n).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `e^{-λ} λ^x / x!`.
pub(crate) fn poisson_mass(x: f64, lambda: f64) -> f64 {
    if x == 0.0 {
        return (-lambda).exp();
    }
    (-stirlerr(x) - bd0(x, lambda) - LN_SQRT_2PI - 0.5 * x.ln()).exp()
}

/// `Γ(r + x) / (Γ(r) x!) q^r (1 - q)^x`, via `r / (r + x) · C(r + x, r)`-form.
pub(crate) fn negative_binomial_mass(x: f64, r: f64, q: f64) -> f64 {
    if x == 0.0 {
        return (r * q.ln()).exp();
    }
    r / (r + x) * binomial_mass(r, r + x, q, 1.0 - q)
}
