//! Added masses of a triaxial ellipsoid from its depolarisation integrals.

use nalgebra::{Matrix6, Vector6};
use std::f64::consts::{FRAC_PI_2, PI};

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

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature to absolute tolerance `tol`.
pub fn gauss_kronrod_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b)];
    let mut total = 0.0;
    let width = (b - a).abs();
    while let Some((lo, hi)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        if err <= tol * (hi - lo).abs() / width || (hi - lo).abs() < 1e-12 * width {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }
    total
}

/// Depolarisation integrals `α_i = abc ∫₀^∞ dλ / ((a_i² + λ)Δ(λ))`, with
/// `Δ = √((a² + λ)(b² + λ)(c² + λ))`; they sum to 2.
pub fn ellipsoid_depolarization(a: f64, b: f64, c: f64) -> [f64; 3] {
    let axes = [a, b, c];
    let mut out = [0.0; 3];
    for i in 0..3 {
        let scale = axes[i] * axes[i];
        let integrand = |theta: f64| {
            let t = theta.tan();
            let lam = scale * t * t;
            let dlam = 2.0 * scale * t / (theta.cos() * theta.cos());
            let delta = ((a * a + lam) * (b * b + lam) * (c * c + lam)).sqrt();
            dlam / ((scale + lam) * delta)
        };
        // λ = a_i² tan²θ maps [0, π/2) onto the half-line
        out[i] = a * b * c * gauss_kronrod_adaptive(integrand, 0.0, FRAC_PI_2, 1e-13);
    }
    out
}

/// Analytic added-mass matrix `diag(μ₁..μ₆)` of the ellipsoid with semi-axes
/// `(a, b, c)` along `(e₁, e₂, e₃)` in a fluid of unit density.
pub fn ellipsoid_added_mass(a: f64, b: f64, c: f64) -> Matrix6<f64> {
    assert!(a > 0.0 && b > 0.0 && c > 0.0, "semi-axes must be positive");
    let alpha = ellipsoid_depolarization(a, b, c);
    let volume = 4.0 / 3.0 * PI * a * b * c;
    let sq = [a * a, b * b, c * c];
    let mut mu = Vector6::zeros();
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let d = sq[j] - sq[k];
        mu[i] = if d == 0.0 {
            0.0
        } else {
            let num = d * d * (alpha[k] - alpha[j]);
            let den = 2.0 * d + (sq[j] + sq[k]) * (alpha[j] - alpha[k]);
            volume * num / (5.0 * den)
        };
        mu[i + 3] = volume * alpha[i] / (2.0 - alpha[i]);
    }
    Matrix6::from_diagonal(&mu)
}
