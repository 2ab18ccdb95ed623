//! Icosphere triangle mesh: subdivided icosahedron projected to the sphere,
//! oriented with vertices at both poles so the criterion probe points are
//! mesh nodes.

use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct IcoMesh {
    pub radius: f64,
    pub verts: Vec<[f64; 3]>,
    pub tris: Vec<[u32; 3]>,
}

impl IcoMesh {
    pub fn n_verts(&self) -> usize {
        self.verts.len()
    }

    /// Index of the vertex nearest an ambient position.
    pub fn nearest_vertex(&self, p: [f64; 3]) -> usize {
        let mut best = (0usize, f64::INFINITY);
        for (i, v) in self.verts.iter().enumerate() {
            let d2 = (v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2) + (v[2] - p[2]).powi(2);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        best.0
    }
}

fn normalize_to(r: f64, p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [r * p[0] / n, r * p[1] / n, r * p[2] / n]
}

/// Pole-aligned icosahedron: north pole, an upper ring of 5 at z = 1/sqrt(5),
/// a staggered lower ring, south pole.
fn icosahedron(r: f64) -> IcoMesh {
    let mut verts = Vec::with_capacity(12);
    verts.push([0.0, 0.0, r]);
    let zc = r / 5.0f64.sqrt();
    let rc = 2.0 * r / 5.0f64.sqrt();
    for k in 0..5 {
        let ang = std::f64::consts::TAU * k as f64 / 5.0;
        verts.push([rc * ang.cos(), rc * ang.sin(), zc]);
    }
    for k in 0..5 {
        let ang = std::f64::consts::TAU * (k as f64 + 0.5) / 5.0;
        verts.push([rc * ang.cos(), rc * ang.sin(), -zc]);
    }
    verts.push([0.0, 0.0, -r]);

    let mut tris: Vec<[u32; 3]> = Vec::with_capacity(20);
    let up = |k: u32| 1 + k % 5;
    let lo = |k: u32| 6 + k % 5;
    for k in 0..5u32 {
        tris.push([0, up(k), up(k + 1)]);
        tris.push([up(k), lo(k), up(k + 1)]);
        tris.push([up(k + 1), lo(k), lo(k + 1)]);
        tris.push([11, lo(k + 1), lo(k)]);
    }
    IcoMesh {
        radius: r,
        verts,
        tris,
    }
}

pub fn icosphere(subdivisions: u32, radius: f64) -> IcoMesh {
    let mut mesh = icosahedron(radius);
    for _ in 0..subdivisions {
        mesh = subdivide(&mesh);
    }
    mesh
}

fn subdivide(mesh: &IcoMesh) -> IcoMesh {
    let mut verts = mesh.verts.clone();
    let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
    let mut mid = |a: u32, b: u32, verts: &mut Vec<[f64; 3]>| -> u32 {
        let key = (a.min(b), a.max(b));
        if let Some(&idx) = midpoint.get(&key) {
            return idx;
        }
        let pa = verts[a as usize];
        let pb = verts[b as usize];
        let m = normalize_to(
            mesh.radius,
            [
                0.5 * (pa[0] + pb[0]),
                0.5 * (pa[1] + pb[1]),
                0.5 * (pa[2] + pb[2]),
            ],
        );
        let idx = verts.len() as u32;
        verts.push(m);
        midpoint.insert(key, idx);
        idx
    };
    let mut tris = Vec::with_capacity(mesh.tris.len() * 4);
    for &[a, b, c] in &mesh.tris {
        let ab = mid(a, b, &mut verts);
        let bc = mid(b, c, &mut verts);
        let ca = mid(c, a, &mut verts);
        tris.push([a, ab, ca]);
        tris.push([b, bc, ab]);
        tris.push([c, ca, bc]);
        tris.push([ab, bc, ca]);
    }
    IcoMesh {
        radius: mesh.radius,
        verts,
        tris,
    }
}

pub fn triangle_area(p: [f64; 3], q: [f64; 3], r: [f64; 3]) -> f64 {
    let u = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let v = [r[0] - p[0], r[1] - p[1], r[2] - p[2]];
    let c = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_counts_follow_the_subdivision_formula() {
        for s in 0..4u32 {
            let mesh = icosphere(s, 1.0);
            assert_eq!(mesh.n_verts(), 10 * 4usize.pow(s) + 2);
            assert_eq!(mesh.tris.len(), 20 * 4usize.pow(s));
        }
    }

    #[test]
    fn vertices_lie_on_the_sphere_and_poles_are_nodes() {
        let mesh = icosphere(3, 2.0);
        for v in &mesh.verts {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((n - 2.0).abs() < 1e-12);
        }
        assert_eq!(mesh.nearest_vertex([0.0, 0.0, 2.0]), 0);
        let south = mesh.nearest_vertex([0.0, 0.0, -2.0]);
        assert!((mesh.verts[south][2] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn total_area_approaches_the_sphere_area() {
        let mesh = icosphere(4, 1.0);
        let total: f64 = mesh
            .tris
            .iter()
            .map(|&[a, b, c]| {
                triangle_area(
                    mesh.verts[a as usize],
                    mesh.verts[b as usize],
                    mesh.verts[c as usize],
                )
            })
            .sum();
        let sphere = 4.0 * std::f64::consts::PI;
        assert!((total - sphere).abs() / sphere < 5e-3);
    }
}
