use nalgebra::Vector3;
use std::f64::consts::PI;

pub const DEFAULT_RADIAL_ORDER: usize = 16;
pub const DEFAULT_ANGULAR_STRENGTH: usize = 11;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Product quadrature on the unit ball.
#[derive(Debug, Clone)]
pub struct BallQuadrature {
    pub nodes: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    pub radial_order: usize,
    pub angular_strength: usize,
}

impl BallQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ wₖ f(xₖ)`, accumulated in node order.
    pub fn integrate<F: Fn(&Vector3<f64>) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_vec<F: Fn(&Vector3<f64>) -> Vector3<f64>>(&self, f: F) -> Vector3<f64> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(Vector3::zeros(), |acc, (x, w)| acc + *w * f(x))
    }
}

/// Ball rule with the default angular strength.
pub fn ball_quadrature(order: usize) -> BallQuadrature {
    ball_quadrature_with(order, DEFAULT_ANGULAR_STRENGTH)
}

/// Gauss–Legendre in the radius (weight `r²` folded in) times a product
/// angular rule: Gauss in `cos θ` and `strength + 1` equispaced azimuths.
/// Exact for polynomials of total degree `≤ min(strength, 2·order − 3)`.
pub fn ball_quadrature_with(order: usize, strength: usize) -> BallQuadrature {
    assert!(order >= 1, "radial order must be positive");
    let (rx, rw) = gauss_legendre(order);
    let n_polar = (strength + 2) / 2;
    let n_azimuth = strength + 1;
    let (cx, cw) = gauss_legendre(n_polar);
    let mut nodes = Vec::with_capacity(order * n_polar * n_azimuth);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (x, w) in rx.iter().zip(&rw) {
        let r = 0.5 * (x + 1.0);
        let wr = 0.5 * w * r * r;
        for (ct, wt) in cx.iter().zip(&cw) {
            let st = (1.0 - ct * ct).sqrt();
            for k in 0..n_azimuth {
                let phi = 2.0 * PI * (k as f64 + 0.5) / n_azimuth as f64;
                nodes.push(Vector3::new(r * st * phi.cos(), r * st * phi.sin(), r * ct));
                weights.push(wr * wt * 2.0 * PI / n_azimuth as f64);
            }
        }
    }
    BallQuadrature {
        nodes,
        weights,
        radial_order: order,
        angular_strength: strength,
    }
}
