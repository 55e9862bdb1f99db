use super::{ShapeCoords, SwimmerConfig};
use crate::{Error, Result};
use nalgebra::Vector3;
use std::collections::HashMap;
use std::io::Write;

/// Triangulated closed surface with per-panel data. Normals point into the body.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub panels: Vec<[usize; 3]>,
    pub centroids: Vec<Vector3<f64>>,
    pub areas: Vec<f64>,
    pub normals: Vec<Vector3<f64>>,
    /// Per panel, a point of the reference sphere `Σ` (the normalised mean of
    /// the panel's reference vertices).
    pub anchors: Vec<Vector3<f64>>,
    /// Images of the anchors on the exact deformed interface.
    pub anchor_images: Vec<Vector3<f64>>,
}

impl SurfaceMesh {
    /// Builds panel data from vertices and outward-oriented (counter-clockwise
    /// seen from outside) triangles. Anchors default to the centroids.
    pub fn new(vertices: Vec<Vector3<f64>>, panels: Vec<[usize; 3]>) -> Self {
        let mut centroids = Vec::with_capacity(panels.len());
        let mut areas = Vec::with_capacity(panels.len());
        let mut normals = Vec::with_capacity(panels.len());
        for p in &panels {
            let (a, b, c) = (vertices[p[0]], vertices[p[1]], vertices[p[2]]);
            let cr = (b - a).cross(&(c - a));
            let norm = cr.norm();
            centroids.push((a + b + c) / 3.0);
            areas.push(0.5 * norm);
            normals.push(-cr / norm);
        }
        Self {
            anchors: centroids.clone(),
            anchor_images: centroids.clone(),
            vertices,
            panels,
            centroids,
            areas,
            normals,
        }
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// `|Σ area·normal| / Σ area`; zero for a closed surface.
    pub fn closure_defect(&self) -> f64 {
        let s = self
            .areas
            .iter()
            .zip(&self.normals)
            .fold(Vector3::zeros(), |acc, (a, n)| acc + *a * n);
        s.norm() / self.total_area()
    }

    /// Largest panel diameter.
    pub fn max_diameter(&self) -> f64 {
        self.panels.iter().map(|p| self.diameter_of(p)).fold(0.0, f64::max)
    }

    fn diameter_of(&self, p: &[usize; 3]) -> f64 {
        let (a, b, c) = (self.vertices[p[0]], self.vertices[p[1]], self.vertices[p[2]]);
        (a - b).norm().max((b - c).norm()).max((c - a).norm())
    }

    /// Smallest triangle quality `4√3·A / Σ ℓ²` (1 for an equilateral triangle).
    pub fn min_quality(&self) -> f64 {
        self.panels
            .iter()
            .zip(&self.areas)
            .map(|(p, a)| {
                let (x, y, z) = (self.vertices[p[0]], self.vertices[p[1]], self.vertices[p[2]]);
                let l2 = (x - y).norm_squared() + (y - z).norm_squared() + (z - x).norm_squared();
                4.0 * 3f64.sqrt() * a / l2
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Object File Format export with 17 significant digits.
    pub fn write_off<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} 0", self.vertices.len(), self.panels.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z)?;
        }
        for p in &self.panels {
            writeln!(w, "3 {} {} {}", p[0], p[1], p[2])?;
        }
        Ok(())
    }
}

/// Subdivided icosahedron on the unit sphere: `10·4^k + 2` vertices and
/// `20·4^k` outward-oriented triangles.
pub fn icosphere(refinement: usize) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..refinement {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    for f in faces.iter_mut() {
        let (a, b, c) = (verts[f[0]], verts[f[1]], verts[f[2]]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }
    (verts, faces)
}

/// Icosphere of the reference interface pushed through `Θ_s`.
pub fn surface_mesh(config: &SwimmerConfig, s: &ShapeCoords, refinement: usize) -> Result<SurfaceMesh> {
    let (reference, panels) = icosphere(refinement);
    let mut vertices = Vec::with_capacity(reference.len());
    for y in &reference {
        config.eval_jacobian(s, y)?;
        vertices.push(config.eval_map(s, y));
    }
    let mut mesh = SurfaceMesh::new(vertices, panels);
    if mesh.areas.iter().any(|&a| a <= 0.0 || !a.is_finite()) || mesh.min_quality() < 1e-3 {
        return Err(Error::InvalidInput("degenerate panel in deformed mesh".into()));
    }
    mesh.anchors = mesh
        .panels
        .iter()
        .map(|p| (reference[p[0]] + reference[p[1]] + reference[p[2]]).normalize())
        .collect();
    mesh.anchor_images = mesh.anchors.iter().map(|y| config.eval_map(s, y)).collect();
    Ok(mesh)
}
