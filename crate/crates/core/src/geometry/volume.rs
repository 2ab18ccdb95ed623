//! Weighted volume of the manifold: integral of e^{2h} dvol.

use super::{metric_jet, ManifoldKind, ManifoldModel, Point, ScalarField};
use crate::error::Result;
use crate::spectral::mesh::{icosphere, triangle_area};

/// Quadrature of the h-volume. Rectangle manifolds use the midpoint rule
/// on a `resolution` x `resolution` periodic grid (spectrally accurate for
/// smooth periodic integrands); the sphere uses triangle-mesh quadrature
/// with barycentric vertex areas at a subdivision level matched to
/// `resolution`.
pub fn h_volume(m: &ManifoldModel, h: &ScalarField, resolution: usize) -> Result<f64> {
    match &m.kind {
        ManifoldKind::Sphere { radius } => {
            let subdiv = sphere_subdivision_for(resolution);
            let mesh = icosphere(subdiv, *radius);
            let mut vertex_area = vec![0.0f64; mesh.n_verts()];
            for &[a, b, c] in &mesh.tris {
                let area = triangle_area(
                    mesh.verts[a as usize],
                    mesh.verts[b as usize],
                    mesh.verts[c as usize],
                );
                for idx in [a, b, c] {
                    vertex_area[idx as usize] += area / 3.0;
                }
            }
            let mut total = 0.0;
            for (i, v) in mesh.verts.iter().enumerate() {
                let p = m.point_from_ambient(*v);
                total += (2.0 * h.eval(m, &p)?).exp() * vertex_area[i];
            }
            Ok(total)
        }
        ManifoldKind::FlatTorus { lu, lv } | ManifoldKind::ExpressionMetric { lu, lv, .. } => {
            let (lu, lv) = (*lu, *lv);
            let n = resolution;
            let (au, av) = (lu / n as f64, lv / n as f64);
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let p = Point::new(0, (i as f64 + 0.5) * au, (j as f64 + 0.5) * av);
                    let jet = metric_jet(m, &p)?;
                    total += jet.sqrt_det_g * (2.0 * h.eval(m, &p)?).exp() * au * av;
                }
            }
            Ok(total)
        }
    }
}

/// Grid resolution -> icosphere subdivision: 64 maps to level 4 (2562
/// vertices), doubling the resolution adds one level.
pub fn sphere_subdivision_for(resolution: usize) -> u32 {
    let mut level = 0u32;
    let mut r = resolution.max(8) / 4;
    while r > 1 && level < 7 {
        r /= 2;
        level += 1;
    }
    level.max(1)
}
