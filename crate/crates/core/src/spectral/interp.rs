//! Smooth off-node evaluation of spectral node fields, needed to take
//! directional derivatives of the deterministic semigroup at arbitrary
//! points: trigonometric interpolation on the periodic grid, and a
//! weighted least-squares fit in restricted ambient polynomials on the
//! sphere (degrees 5 and 6 together span the harmonics up to degree 6).

use super::mesh::IcoMesh;

/// Exact trigonometric interpolant of a real field sampled on the periodic
/// nu x nv grid, with the usual half-weight treatment of the Nyquist modes.
pub struct TorusInterp {
    nu: usize,
    nv: usize,
    lu: f64,
    lv: f64,
    // complex DFT coefficients, row-major (re, im)
    coef: Vec<(f64, f64)>,
}

impl TorusInterp {
    /// `values[i * nv + j]` = field at (i Lu / nu, j Lv / nv).
    pub fn new(nu: usize, nv: usize, lu: f64, lv: f64, values: &[f64]) -> TorusInterp {
        assert_eq!(values.len(), nu * nv);
        // separable direct DFT: rows (v-direction) first, then columns
        let mut stage = vec![(0.0f64, 0.0f64); nu * nv];
        for i in 0..nu {
            for q in 0..nv {
                let (mut re, mut im) = (0.0, 0.0);
                for k in 0..nv {
                    let ang = -std::f64::consts::TAU * (q * k) as f64 / nv as f64;
                    let f = values[i * nv + k];
                    re += f * ang.cos();
                    im += f * ang.sin();
                }
                stage[i * nv + q] = (re, im);
            }
        }
        let mut coef = vec![(0.0f64, 0.0f64); nu * nv];
        for q in 0..nv {
            for p in 0..nu {
                let (mut re, mut im) = (0.0, 0.0);
                for j in 0..nu {
                    let ang = -std::f64::consts::TAU * (p * j) as f64 / nu as f64;
                    let (sr, si) = stage[j * nv + q];
                    re += sr * ang.cos() - si * ang.sin();
                    im += sr * ang.sin() + si * ang.cos();
                }
                coef[p * nv + q] = (re / (nu * nv) as f64, im / (nu * nv) as f64);
            }
        }
        TorusInterp {
            nu,
            nv,
            lu,
            lv,
            coef,
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let (nu, nv) = (self.nu as isize, self.nv as isize);
        let tu = std::f64::consts::TAU * u / self.lu;
        let tv = std::f64::consts::TAU * v / self.lv;
        let mut total = 0.0f64;
        for p in -(nu / 2)..=(nu / 2) {
            let wp = if 2 * p.abs() == nu { 0.5 } else { 1.0 };
            for q in -(nv / 2)..=(nv / 2) {
                let wq = if 2 * q.abs() == nv { 0.5 } else { 1.0 };
                let pi = p.rem_euclid(nu) as usize;
                let qi = q.rem_euclid(nv) as usize;
                let (re, im) = self.coef[pi * self.nv + qi];
                let ang = p as f64 * tu + q as f64 * tv;
                total += wp * wq * (re * ang.cos() - im * ang.sin());
            }
        }
        total
    }
}

/// Least-squares fit of mesh node values in the restricted monomials of
/// total degree 5 and 6, orthonormalized in the mesh quadrature inner
/// product. Evaluating the fit gives a globally smooth representative of
/// the node field, differentiable to machine precision.
pub struct SphereFit {
    /// exponent triples of the monomial basis
    exponents: Vec<[u32; 3]>,
    /// rows express each orthonormal function in the monomial basis
    combo: Vec<Vec<f64>>,
    /// fitted coefficients against the orthonormal functions
    coefs: Vec<f64>,
    pub rel_residual: f64,
}

impl SphereFit {
    pub fn new(mesh: &IcoMesh, weights: &[f64], values: &[f64]) -> SphereFit {
        let n = mesh.n_verts();
        assert_eq!(weights.len(), n);
        assert_eq!(values.len(), n);
        let mut exponents = Vec::new();
        for total in [5u32, 6] {
            for a in 0..=total {
                for b in 0..=(total - a) {
                    exponents.push([a, b, total - a - b]);
                }
            }
        }
        let nb = exponents.len();
        // node values of each monomial
        let mut cols: Vec<Vec<f64>> = exponents
            .iter()
            .map(|&[a, b, c]| {
                mesh.verts
                    .iter()
                    .map(|p| p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                    .collect()
            })
            .collect();
        let mut combo: Vec<Vec<f64>> = (0..nb)
            .map(|i| {
                let mut row = vec![0.0; nb];
                row[i] = 1.0;
                row
            })
            .collect();
        let wdot = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(weights).map(|((x, y), w)| x * y * w).sum()
        };
        // modified Gram-Schmidt with a second pass, tracking combos
        let mut kept: Vec<usize> = Vec::new();
        for i in 0..nb {
            for _pass in 0..2 {
                for &j in &kept {
                    let (ci, cj) = if i < j {
                        let (lo, hi) = cols.split_at_mut(j);
                        (&mut lo[i], &hi[0])
                    } else {
                        let (lo, hi) = cols.split_at_mut(i);
                        (&mut hi[0], &lo[j])
                    };
                    let proj = wdot(ci, cj);
                    for (x, y) in ci.iter_mut().zip(cj.iter()) {
                        *x -= proj * y;
                    }
                    let (ri, rj) = if i < j {
                        let (lo, hi) = combo.split_at_mut(j);
                        (&mut lo[i], &hi[0])
                    } else {
                        let (lo, hi) = combo.split_at_mut(i);
                        (&mut hi[0], &lo[j])
                    };
                    for (x, y) in ri.iter_mut().zip(rj.iter()) {
                        *x -= proj * y;
                    }
                }
            }
            let nrm = wdot(&cols[i], &cols[i]).max(0.0).sqrt();
            if nrm > 1e-10 {
                for x in &mut cols[i] {
                    *x /= nrm;
                }
                for x in &mut combo[i] {
                    *x /= nrm;
                }
                kept.push(i);
            }
        }
        let coefs: Vec<f64> = kept.iter().map(|&i| wdot(values, &cols[i])).collect();
        // fit residual
        let mut recon = vec![0.0f64; n];
        for (ci, &i) in coefs.iter().zip(&kept) {
            for (r, c) in recon.iter_mut().zip(&cols[i]) {
                *r += ci * c;
            }
        }
        let num: f64 = recon
            .iter()
            .zip(values)
            .zip(weights)
            .map(|((r, v), w)| (r - v) * (r - v) * w)
            .sum();
        let den: f64 = values.iter().zip(weights).map(|(v, w)| v * v * w).sum();
        let rel_residual = (num / den.max(1e-300)).sqrt();
        SphereFit {
            exponents,
            combo: kept.iter().map(|&i| combo[i].clone()).collect(),
            coefs,
            rel_residual,
        }
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let mono: Vec<f64> = self
            .exponents
            .iter()
            .map(|&[a, b, c]| p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
            .collect();
        self.coefs
            .iter()
            .zip(&self.combo)
            .map(|(c, row)| c * row.iter().zip(&mono).map(|(r, m)| r * m).sum::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::mesh::{icosphere, triangle_area};

    #[test]
    fn torus_interp_reproduces_nodes_and_low_modes() {
        let (nu, nv) = (16usize, 12usize);
        let (lu, lv) = (std::f64::consts::TAU, 3.0);
        let field = |u: f64, v: f64| {
            (u).cos() + 0.5 * (std::f64::consts::TAU * 2.0 * v / lv).sin() - 0.25
        };
        let mut vals = vec![0.0; nu * nv];
        for i in 0..nu {
            for j in 0..nv {
                vals[i * nv + j] = field(i as f64 * lu / nu as f64, j as f64 * lv / nv as f64);
            }
        }
        let interp = TorusInterp::new(nu, nv, lu, lv, &vals);
        // node reproduction
        for i in 0..nu {
            for j in 0..nv {
                let u = i as f64 * lu / nu as f64;
                let v = j as f64 * lv / nv as f64;
                assert!((interp.eval(u, v) - vals[i * nv + j]).abs() < 1e-11);
            }
        }
        // off-node: the field is band-limited so the interpolant is exact
        for (u, v) in [(0.37, 0.11), (3.9, 2.71), (5.5, 0.02)] {
            assert!((interp.eval(u, v) - field(u, v)).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_fit_recovers_polynomials_exactly() {
        let mesh = icosphere(3, 1.0);
        let n = mesh.n_verts();
        let mut weights = vec![0.0f64; n];
        for &[a, b, c] in &mesh.tris {
            let t = triangle_area(
                mesh.verts[a as usize],
                mesh.verts[b as usize],
                mesh.verts[c as usize],
            );
            for idx in [a, b, c] {
                weights[idx as usize] += t / 3.0;
            }
        }
        // f = z + x y is degree <= 2, inside the fitted space
        let values: Vec<f64> = mesh.verts.iter().map(|p| p[2] + p[0] * p[1]).collect();
        let fit = SphereFit::new(&mesh, &weights, &values);
        assert!(fit.rel_residual < 1e-10, "residual {}", fit.rel_residual);
        for p in [
            [0.0f64, 0.0, 1.0],
            [0.6, -0.64, 0.48],
            [-0.707, 0.0, 0.707],
        ] {
            let nn = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let q = [p[0] / nn, p[1] / nn, p[2] / nn];
            let exact = q[2] + q[0] * q[1];
            assert!((fit.eval(q) - exact).abs() < 1e-9);
        }
    }
}
