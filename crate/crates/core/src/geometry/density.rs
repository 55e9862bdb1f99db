use super::BallQuadrature;
use nalgebra::{Matrix3, Vector3};

/// Mass per unit reference volume on the closed unit ball.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityField {
    Constant(f64),
    /// `c + l·x + xᵀQx` with `Q` symmetric.
    Polynomial { constant: f64, linear: Vector3<f64>, quadratic: Matrix3<f64> },
    /// `Σₖ cₖ |x|^{2k}`.
    Radial { coefficients: Vec<f64> },
}

impl DensityField {
    pub fn evaluate(&self, x: &Vector3<f64>) -> f64 {
        match self {
            DensityField::Constant(c) => *c,
            DensityField::Polynomial { constant, linear, quadratic } => constant + linear.dot(x) + x.dot(&(quadratic * x)),
            DensityField::Radial { coefficients } => {
                let r2 = x.norm_squared();
                coefficients.iter().rev().fold(0.0, |acc, c| acc * r2 + c)
            }
        }
    }

    /// Smallest value over the quadrature nodes and a boundary sample.
    pub fn min_value(&self, quad: &BallQuadrature) -> f64 {
        let boundary = super::icosphere(2).0;
        quad.nodes
            .iter()
            .chain(boundary.iter())
            .map(|x| self.evaluate(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self, quad: &BallQuadrature) -> bool {
        self.min_value(quad) > 0.0
    }

    pub fn mass(&self, quad: &BallQuadrature) -> f64 {
        quad.integrate(|x| self.evaluate(x))
    }
}
