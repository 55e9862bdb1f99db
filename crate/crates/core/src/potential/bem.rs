//! Direct boundary integral formulation with constant panels.
//!
//! For a potential `φ` harmonic in the fluid and decaying at infinity, with
//! `n` pointing into the body, Green's representation on the surface reads
//! `φ(x)/2 + ∫ φ(y) ∂_{n_y}G(x, y) dA_y = ∫ G(x, y) ∂_nφ(y) dA_y`,
//! `G = 1/(4π|x − y|)`. It is collocated at panel centroids.

use crate::geometry::SurfaceMesh;
use crate::{Error, Result};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use nalgebra::Vector3;
use std::f64::consts::PI;

const FOUR_PI: f64 = 4.0 * PI;
/// Far-field threshold in panel diameters for the one-point rule.
const FAR: f64 = 4.0;
/// Near-field threshold in panel diameters below which a panel is subdivided.
const NEAR: f64 = 1.5;
const MAX_SUBDIVISION: u32 = 4;

// Degree-5 seven-point rule on the reference triangle (barycentric, weight).
const DUNAVANT7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059715871789770, 0.470142064105115, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.059715871789770, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.470142064105115, 0.059715871789770], 0.132394152788506),
    ([0.797426985353087, 0.101286507323456, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.797426985353087, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.101286507323456, 0.797426985353087], 0.125939180544827),
];

/// `∫_T dA/|x − y|` for `x` in the plane of `T`, by the edge formula
/// `Σ_e d_e ln((s₊ + R₊)/(s₋ + R₋))`.
pub fn self_panel_potential(x: &Vector3<f64>, tri: [Vector3<f64>; 3]) -> f64 {
    let mut total = 0.0;
    for e in 0..3 {
        let a = tri[e];
        let b = tri[(e + 1) % 3];
        let len = (b - a).norm();
        let t = (b - a) / len;
        let sm = (a - x).dot(&t);
        let sp = (b - x).dot(&t);
        let rm = (a - x).norm();
        let rp = (b - x).norm();
        let d = ((a - x) - sm * t).norm();
        if d < 1e-300 {
            continue;
        }
        total += d * ((sp + rp) / (sm + rm)).ln();
    }
    total
}

/// `(∫_T G dA, ∫_T (x − y)·n/(4π|x − y|³) dA)` by the distance-graded rule;
/// with `n` the panel normal the second entry is the double-layer kernel.
fn panel_pair(x: &Vector3<f64>, n: &Vector3<f64>, tri: [Vector3<f64>; 3], centroid: &Vector3<f64>, area: f64, diam: f64, level: u32) -> (f64, f64) {
    let dist = (x - centroid).norm();
    if dist > FAR * diam {
        let d = x - centroid;
        let r = dist;
        return (area / (FOUR_PI * r), area * d.dot(n) / (FOUR_PI * r * r * r));
    }
    if dist > NEAR * diam || level >= MAX_SUBDIVISION {
        let mut s = 0.0;
        let mut k = 0.0;
        for (b, w) in DUNAVANT7.iter() {
            let y = tri[0] * b[0] + tri[1] * b[1] + tri[2] * b[2];
            let d = x - y;
            let r = d.norm();
            s += w / r;
            k += w * d.dot(n) / (r * r * r);
        }
        return (area * s / FOUR_PI, area * k / FOUR_PI);
    }
    let m01 = (tri[0] + tri[1]) * 0.5;
    let m12 = (tri[1] + tri[2]) * 0.5;
    let m20 = (tri[2] + tri[0]) * 0.5;
    let children = [[tri[0], m01, m20], [tri[1], m12, m01], [tri[2], m20, m12], [m01, m12, m20]];
    let mut out = (0.0, 0.0);
    for c in children {
        let cc = (c[0] + c[1] + c[2]) / 3.0;
        let r = panel_pair(x, n, c, &cc, 0.25 * area, 0.5 * diam, level + 1);
        out.0 += r.0;
        out.1 += r.1;
    }
    out
}

/// Boundary data of one exterior Neumann problem.
#[derive(Debug, Clone)]
pub struct BoundarySolution {
    pub potentials: Vec<f64>,
    pub fluxes: Vec<f64>,
}

impl BoundarySolution {
    /// `Σ flux·area`.
    pub fn net_flux(&self, mesh: &SurfaceMesh) -> f64 {
        self.fluxes.iter().zip(&mesh.areas).map(|(f, a)| f * a).sum()
    }

    /// `∫_Σ φ g dσ` for per-panel data `g`.
    pub fn energy_against(&self, mesh: &SurfaceMesh, g: &[f64]) -> f64 {
        self.potentials.iter().zip(g).zip(&mesh.areas).map(|((p, g), a)| p * g * a).sum()
    }
}

/// Factorised collocation system for one mesh, reusable across right-hand sides.
pub struct BoundarySolver {
    mesh: SurfaceMesh,
    single: Mat<f64>,
    lu: PartialPivLu<f64>,
}

impl BoundarySolver {
    pub fn new(mesh: SurfaceMesh) -> Result<Self> {
        let n = mesh.len();
        let tris: Vec<[Vector3<f64>; 3]> = mesh
            .panels
            .iter()
            .map(|p| [mesh.vertices[p[0]], mesh.vertices[p[1]], mesh.vertices[p[2]]])
            .collect();
        let diams: Vec<f64> = tris
            .iter()
            .map(|t| (t[0] - t[1]).norm().max((t[1] - t[2]).norm()).max((t[2] - t[0]).norm()))
            .collect();
        let mut single = Mat::<f64>::zeros(n, n);
        let mut a = Mat::<f64>::zeros(n, n);
        for q in 0..n {
            for p in 0..n {
                if p == q {
                    single[(p, p)] = self_panel_potential(&mesh.centroids[p], tris[p]) / FOUR_PI;
                    a[(p, p)] = 0.5;
                } else {
                    let (s, d) = panel_pair(&mesh.centroids[p], &mesh.normals[q], tris[q], &mesh.centroids[q], mesh.areas[q], diams[q], 0);
                    single[(p, q)] = s;
                    a[(p, q)] = d;
                }
            }
        }
        let lu = a.partial_piv_lu();
        drop(a);
        let u = lu.U();
        let mut umax = 0.0f64;
        let mut umin = f64::INFINITY;
        for i in 0..n {
            let d = u[(i, i)].abs();
            if !d.is_finite() {
                return Err(Error::SingularSystem);
            }
            umax = umax.max(d);
            umin = umin.min(d);
        }
        if !(umin > 1e-13 * umax) || !umax.is_finite() {
            return Err(Error::SingularSystem);
        }
        Ok(Self { mesh, single, lu })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    /// Solves for several flux vectors at once.
    pub fn solve_many(&self, fluxes: &[Vec<f64>]) -> Result<Vec<BoundarySolution>> {
        let n = self.mesh.len();
        let k = fluxes.len();
        for f in fluxes {
            if f.len() != n {
                return Err(Error::InvalidInput(format!("flux length {} does not match {} panels", f.len(), n)));
            }
        }
        let flux = Mat::<f64>::from_fn(n, k, |p, j| fluxes[j][p]);
        let rhs = &self.single * &flux;
        let phi = self.lu.solve(&rhs);
        let mut out = Vec::with_capacity(k);
        for (j, f) in fluxes.iter().enumerate() {
            let potentials: Vec<f64> = (0..n).map(|p| phi[(p, j)]).collect();
            if potentials.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularSystem);
            }
            out.push(BoundarySolution { potentials, fluxes: f.clone() });
        }
        Ok(out)
    }

    pub fn solve(&self, flux: &[f64]) -> Result<BoundarySolution> {
        Ok(self.solve_many(&[flux.to_vec()])?.remove(0))
    }
}

/// One-shot exterior Neumann solve for interior-directed flux data `∂_nψ`.
pub fn solve_exterior_neumann(mesh: &SurfaceMesh, flux: &[f64]) -> Result<BoundarySolution> {
    if flux.iter().all(|f| *f == 0.0) {
        let n = mesh.len();
        return Ok(BoundarySolution { potentials: vec![0.0; n], fluxes: flux.to_vec() });
    }
    BoundarySolver::new(mesh.clone())?.solve(flux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gauss_legendre, icosphere};

    // Polar integration around x: each edge contributes ∫ ρ(φ) dφ.
    fn polar_oracle(x: &Vector3<f64>, tri: [Vector3<f64>; 3]) -> f64 {
        let (gx, gw) = gauss_legendre(40);
        let mut total = 0.0;
        for e in 0..3 {
            let a = tri[e] - x;
            let b = tri[(e + 1) % 3] - x;
            let ang = a.angle(&b);
            let ua = a.normalize();
            let perp = (b - ua * b.dot(&ua)).normalize();
            let edge = b - a;
            for (t, w) in gx.iter().zip(&gw) {
                let phi = 0.5 * ang * (t + 1.0);
                let dir = ua * phi.cos() + perp * phi.sin();
                // ray x + ρ·dir meets the edge a + μ(b − a)
                let m = nalgebra::Matrix2::new(dir.dot(&dir), -dir.dot(&edge), dir.dot(&edge), -edge.dot(&edge));
                let rhs = nalgebra::Vector2::new(dir.dot(&a), edge.dot(&a));
                let sol = m.lu().solve(&rhs).unwrap();
                total += 0.5 * ang * w * sol[0];
            }
        }
        total
    }

    #[test]
    fn self_potential_matches_polar_quadrature() {
        let tri = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.3, 0.1, 0.0), Vector3::new(0.2, 0.9, 0.0)];
        let c = (tri[0] + tri[1] + tri[2]) / 3.0;
        let exact = polar_oracle(&c, tri);
        assert!((self_panel_potential(&c, tri) - exact).abs() < 1e-10 * exact);
        let off = Vector3::new(0.4, 0.3, 0.0);
        assert!((self_panel_potential(&off, tri) - polar_oracle(&off, tri)).abs() < 1e-10);
    }

    #[test]
    fn near_rule_converges_to_far_rule() {
        let tri = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.1, 0.0, 0.0), Vector3::new(0.0, 0.1, 0.0)];
        let c = (tri[0] + tri[1] + tri[2]) / 3.0;
        let x = Vector3::new(0.03, 0.04, 0.12);
        let n = Vector3::new(0.0, 0.0, 1.0);
        let (s, k) = panel_pair(&x, &n, tri, &c, 0.005, 0.1f64 * 2f64.sqrt(), 0);
        // reference: brute-force midpoint rule on a fine grid
        let m = 400;
        let (mut sr, mut kr) = (0.0, 0.0);
        let h = 0.1 / m as f64;
        for i in 0..m {
            for j in 0..m - i {
                for (di, dj, up) in [(1.0 / 3.0, 1.0 / 3.0, true), (2.0 / 3.0, 2.0 / 3.0, false)] {
                    if !up && i + j + 1 >= m {
                        continue;
                    }
                    let y = Vector3::new((i as f64 + di) * h, (j as f64 + dj) * h, 0.0);
                    let d = x - y;
                    let r = d.norm();
                    sr += 0.5 * h * h / (FOUR_PI * r);
                    kr += 0.5 * h * h * d.dot(&n) / (FOUR_PI * r * r * r);
                }
            }
        }
        assert!((s - sr).abs() < 1e-5 * sr, "{s} {sr}");
        assert!((k - kr).abs() < 1e-4 * kr, "{k} {kr}");
    }

    #[test]
    fn monopole_on_sphere() {
        // φ = 1/|x| has φ = 1 and ∂_nφ = 1 on the unit sphere
        let (v, f) = icosphere(3);
        let mesh = SurfaceMesh::new(v, f);
        let sol = solve_exterior_neumann(&mesh, &vec![1.0; mesh.len()]).unwrap();
        let worst = sol.potentials.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
    }

    #[test]
    fn zero_flux_gives_zero_potential() {
        let (v, f) = icosphere(1);
        let mesh = SurfaceMesh::new(v, f);
        let sol = solve_exterior_neumann(&mesh, &vec![0.0; mesh.len()]).unwrap();
        assert!(sol.potentials.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn dipole_on_sphere() {
        let (v, f) = icosphere(3);
        let mesh = SurfaceMesh::new(v, f);
        let flux: Vec<f64> = mesh.normals.iter().map(|n| n.x).collect();
        let sol = solve_exterior_neumann(&mesh, &flux).unwrap();
        let mut worst = 0.0f64;
        for (p, c) in sol.potentials.iter().zip(&mesh.centroids) {
            let exact = -c.normalize().x / 2.0;
            worst = worst.max((p - exact).abs());
        }
        assert!(worst < 0.01 * 0.5, "max error {worst}");
    }

    #[test]
    fn degenerate_mesh_is_singular() {
        let v = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, 0.0, 1.0)];
        let f = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        let mesh = SurfaceMesh::new(v, f.clone());
        // duplicate every panel: the collocation matrix has identical rows
        let mut ff = f.clone();
        ff.extend(f);
        let dup = SurfaceMesh::new(mesh.vertices.clone(), ff);
        assert!(matches!(BoundarySolver::new(dup), Err(Error::SingularSystem)));
    }
}

