//! Metric jets and curvature. Built-in manifolds use closed forms; the
//! expression metrics (and the validation path for the sphere) go through
//! central finite differences, which also supply every derivative of the
//! potential h.

use super::{ManifoldKind, ManifoldModel, Point, ScalarField};
use crate::error::{MyersError, Result};
use crate::linalg::{generalized_sym_eigs, Mat2, EYE2, ZERO2};

/// Metric, inverse, first derivatives, Christoffel symbols, volume factor.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: Mat2,
    pub g_inv: Mat2,
    /// `dg[k]` = partial_k g as a matrix.
    pub dg: [Mat2; 2],
    /// `christoffel[k]` = matrix of Gamma^k_{ij} over (i, j).
    pub christoffel: [Mat2; 2],
    pub sqrt_det_g: f64,
}

/// Pointwise curvature data for the criterion potential rho^h.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    pub ric: Mat2,
    pub hess_h: Mat2,
    /// Raised gradient (nabla h)^i = g^{ij} partial_j h.
    pub grad_h: [f64; 2],
    pub rho_h: f64,
    pub h_value: f64,
}

fn christoffel_from_dg(g_inv: &Mat2, dg: &[Mat2; 2]) -> [Mat2; 2] {
    let mut gamma = [ZERO2; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut sum = 0.0;
                for l in 0..2 {
                    sum += g_inv.m[k][l] * (dg[i].m[j][l] + dg[j].m[i][l] - dg[l].m[i][j]);
                }
                gamma[k].m[i][j] = 0.5 * sum;
            }
        }
    }
    gamma
}

fn jet_from_g_dg(g: Mat2, dg: [Mat2; 2], p: &Point) -> Result<MetricJet> {
    let det = g.det();
    if det <= 0.0 || g.m[0][0] <= 0.0 {
        return Err(MyersError::NonSpdMetric {
            u: p.coords[0],
            v: p.coords[1],
            min_eig: g.sym_eig_min(),
        });
    }
    let g_inv = g.inverse();
    let christoffel = christoffel_from_dg(&g_inv, &dg);
    Ok(MetricJet {
        g,
        g_inv,
        dg,
        christoffel,
        sqrt_det_g: det.sqrt(),
    })
}

/// Jet of an arbitrary metric evaluator by central differences.
pub fn metric_jet_fd(
    g_eval: &dyn Fn([f64; 2]) -> Result<Mat2>,
    c: [f64; 2],
    fd_step: f64,
    p: &Point,
) -> Result<MetricJet> {
    let g = g_eval(c)?;
    let e = fd_step;
    let mut dg = [ZERO2; 2];
    for k in 0..2 {
        let mut cp = c;
        let mut cm = c;
        cp[k] += e;
        cm[k] -= e;
        let gp = g_eval(cp)?;
        let gm = g_eval(cm)?;
        dg[k] = gp.sub(&gm).scale(1.0 / (2.0 * e));
    }
    jet_from_g_dg(g, dg, p)
}

/// Metric jet at a point: closed forms for the built-ins, finite
/// differences for expression metrics.
pub fn metric_jet(m: &ManifoldModel, p: &Point) -> Result<MetricJet> {
    m.require_margin(p, 2.0 * m.params.fd_step)?;
    match &m.kind {
        ManifoldKind::FlatTorus { .. } => Ok(MetricJet {
            g: EYE2,
            g_inv: EYE2,
            dg: [ZERO2; 2],
            christoffel: [ZERO2; 2],
            sqrt_det_g: 1.0,
        }),
        ManifoldKind::Sphere { radius } => Ok(sphere_jet(*radius, p.coords)),
        ManifoldKind::ExpressionMetric { .. } => {
            let chart = p.chart;
            let eval = |c: [f64; 2]| m.metric(chart, c);
            metric_jet_fd(&eval, p.coords, m.params.fd_step, p)
        }
    }
}

/// Closed-form jet of the conformal stereographic metric g = lambda^2 I,
/// lambda = 2 r^2 / (r^2 + rho^2).
fn sphere_jet(r: f64, c: [f64; 2]) -> MetricJet {
    let [u, v] = c;
    let d = r * r + u * u + v * v;
    let lam2 = 4.0 * r.powi(4) / (d * d);
    let g = Mat2::diag(lam2, lam2);
    let g_inv = Mat2::diag(1.0 / lam2, 1.0 / lam2);
    // partial_k lambda^2 = -16 r^4 c_k / d^3
    let fac = -16.0 * r.powi(4) / (d * d * d);
    let dg = [Mat2::diag(fac * u, fac * u), Mat2::diag(fac * v, fac * v)];
    // conformal Christoffels from phi = log lambda: phi_k = -2 c_k / d
    let pu = -2.0 * u / d;
    let pv = -2.0 * v / d;
    let gamma_u = Mat2::new(pu, pv, pv, -pu);
    let gamma_v = Mat2::new(-pv, pu, pu, pv);
    MetricJet {
        g,
        g_inv,
        dg,
        christoffel: [gamma_u, gamma_v],
        sqrt_det_g: lam2,
    }
}

/// Ricci tensor by the coordinate formula
/// R_ij = d_k Gamma^k_ij - d_j Gamma^k_ik + Gamma^k_kl Gamma^l_ij - Gamma^k_jl Gamma^l_ik
/// with the Christoffel derivatives by central differences of step `fd2_step`.
pub fn ricci_fd(
    g_eval: &dyn Fn([f64; 2]) -> Result<Mat2>,
    c: [f64; 2],
    fd_step: f64,
    fd2_step: f64,
    p: &Point,
) -> Result<Mat2> {
    let gamma_at = |cc: [f64; 2]| -> Result<[Mat2; 2]> {
        Ok(metric_jet_fd(g_eval, cc, fd_step, p)?.christoffel)
    };
    let e = fd2_step;
    let center = gamma_at(c)?;
    // dgamma[k][l] = partial_k of Gamma^l matrix
    let mut dgamma = [[ZERO2; 2]; 2];
    for k in 0..2 {
        let mut cp = c;
        let mut cm = c;
        cp[k] += e;
        cm[k] -= e;
        let gp = gamma_at(cp)?;
        let gm = gamma_at(cm)?;
        for l in 0..2 {
            dgamma[k][l] = gp[l].sub(&gm[l]).scale(1.0 / (2.0 * e));
        }
    }
    let mut ric = ZERO2;
    for i in 0..2 {
        for j in 0..2 {
            let mut val = 0.0;
            for k in 0..2 {
                val += dgamma[k][k].m[i][j] - dgamma[j][k].m[i][k];
                for l in 0..2 {
                    val += center[k].m[k][l] * center[l].m[i][j]
                        - center[k].m[j][l] * center[l].m[i][k];
                }
            }
            ric.m[i][j] = val;
        }
    }
    // symmetrize away stencil noise
    Ok(ric.add(&ric.transpose()).scale(0.5))
}

/// Ricci curvature: closed forms for the built-ins (sphere: g / r^2, flat
/// torus: 0), finite differences for expression metrics.
pub fn ricci(m: &ManifoldModel, p: &Point) -> Result<Mat2> {
    match &m.kind {
        ManifoldKind::FlatTorus { .. } => Ok(ZERO2),
        ManifoldKind::Sphere { radius } => {
            let g = m.metric(p.chart, p.coords)?;
            Ok(g.scale(1.0 / (radius * radius)))
        }
        ManifoldKind::ExpressionMetric { .. } => {
            m.require_margin(p, 4.0 * m.params.fd_step)?;
            let chart = p.chart;
            let eval = |c: [f64; 2]| m.metric(chart, c);
            ricci_fd(&eval, p.coords, m.params.fd_step, m.params.fd2_step, p)
        }
    }
}

// Fourth-order stencils for the potential: the chart-independence of
// rho^h is checked to 1e-8, which a second-order Hessian cannot reach.
fn d1_4th(f: &dyn Fn(f64) -> Result<f64>, e: f64) -> Result<f64> {
    Ok((8.0 * (f(e)? - f(-e)?) - (f(2.0 * e)? - f(-2.0 * e)?)) / (12.0 * e))
}

fn d2_4th(f: &dyn Fn(f64) -> Result<f64>, f0: f64, e: f64) -> Result<f64> {
    Ok(
        (-f(2.0 * e)? + 16.0 * f(e)? - 30.0 * f0 + 16.0 * f(-e)? - f(-2.0 * e)?)
            / (12.0 * e * e),
    )
}

/// Partial derivatives (lower index) of a scalar field in the chart of `p`.
/// Fourth-order central stencil; the second-order one leaves ~5e-9
/// truncation in the Hessian correction term, which the 1e-8
/// chart-independence contract cannot afford.
pub fn field_partials(m: &ManifoldModel, h: &ScalarField, p: &Point) -> Result<[f64; 2]> {
    if h.is_zero() {
        return Ok([0.0, 0.0]);
    }
    let e = m.params.fd_step;
    let chart = p.chart;
    let [u, v] = p.coords;
    let fu = |s: f64| h.eval_chart(m, chart, [u + s, v]);
    let fv = |s: f64| h.eval_chart(m, chart, [u, v + s]);
    Ok([d1_4th(&fu, e)?, d1_4th(&fv, e)?])
}

/// Raised gradient of h.
pub fn grad_h(m: &ManifoldModel, h: &ScalarField, p: &Point) -> Result<[f64; 2]> {
    let partials = field_partials(m, h, p)?;
    let g_inv = metric_jet(m, p)?.g_inv;
    Ok(g_inv.matvec(partials))
}

/// Covariant Hessian Hess(h)_ij = d_i d_j h - Gamma^k_ij d_k h.
pub fn hessian_h(m: &ManifoldModel, h: &ScalarField, p: &Point) -> Result<Mat2> {
    hessian_h_with_jet(m, h, p, &metric_jet(m, p)?)
}

pub fn hessian_h_with_jet(
    m: &ManifoldModel,
    h: &ScalarField,
    p: &Point,
    jet: &MetricJet,
) -> Result<Mat2> {
    if h.is_zero() {
        return Ok(ZERO2);
    }
    let e2 = m.params.fd2_step;
    m.require_margin(p, 4.0 * e2)?;
    let chart = p.chart;
    let [u, v] = p.coords;
    let f0 = h.eval_chart(m, chart, [u, v])?;

    let fu = |s: f64| h.eval_chart(m, chart, [u + s, v]);
    let fv = |s: f64| h.eval_chart(m, chart, [u, v + s]);
    let huu = d2_4th(&fu, f0, e2)?;
    let hvv = d2_4th(&fv, f0, e2)?;
    // mixed partial: 4th-order first-derivative operators nested
    let dv_at = |du: f64| -> Result<f64> {
        let g = |sv: f64| h.eval_chart(m, chart, [u + du, v + sv]);
        d1_4th(&g, e2)
    };
    let huv = d1_4th(&dv_at, e2)?;

    let partials = field_partials(m, h, p)?;
    let corr = |i: usize, j: usize| {
        jet.christoffel[0].m[i][j] * partials[0] + jet.christoffel[1].m[i][j] * partials[1]
    };
    Ok(Mat2::new(
        huu - corr(0, 0),
        huv - corr(0, 1),
        huv - corr(1, 0),
        hvv - corr(1, 1),
    ))
}

/// Everything the criterion needs at one point.
pub fn curvature_pack(m: &ManifoldModel, h: &ScalarField, p: &Point) -> Result<CurvaturePack> {
    let jet = metric_jet(m, p)?;
    let ric = ricci(m, p)?;
    let hess = hessian_h_with_jet(m, h, p, &jet)?;
    let partials = field_partials(m, h, p)?;
    let grad = jet.g_inv.matvec(partials);
    let s = ric.sub(&hess.scale(2.0));
    let (rho, _) = generalized_sym_eigs(&s, &jet.g);
    Ok(CurvaturePack {
        ric,
        hess_h: hess,
        grad_h: grad,
        rho_h: rho,
        h_value: h.eval(m, p)?,
    })
}

/// Curvature floor: smallest eigenvalue of (Ric - 2 Hess h) against g.
pub fn rho_h(m: &ManifoldModel, h: &ScalarField, p: &Point) -> Result<f64> {
    Ok(curvature_pack(m, h, p)?.rho_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldModel;

    fn sphere_and_height(a: f64) -> (ManifoldModel, ScalarField) {
        let m = ManifoldModel::sphere(1.0);
        let h = ScalarField::parse(&format!("{a}*z")).unwrap();
        (m, h)
    }

    #[test]
    fn flat_torus_jet_is_trivial() {
        let m = ManifoldModel::flat_torus(6.0, 6.0);
        let jet = metric_jet(&m, &Point::new(0, 1.0, 2.0)).unwrap();
        assert_eq!(jet.g, EYE2);
        assert_eq!(jet.christoffel[0], ZERO2);
        assert_eq!(jet.christoffel[1], ZERO2);
        assert_eq!(jet.sqrt_det_g, 1.0);
    }

    #[test]
    fn expression_metric_evaluates_entries() {
        use crate::expr::ScalarFieldExpr;
        let m = ManifoldModel::expression_metric(
            "test",
            2.0 * std::f64::consts::PI,
            2.0 * std::f64::consts::PI,
            ScalarFieldExpr::parse("1").unwrap(),
            ScalarFieldExpr::parse("0").unwrap(),
            ScalarFieldExpr::parse("sin(u)^2+0.1").unwrap(),
        );
        let jet = metric_jet(&m, &Point::new(0, std::f64::consts::FRAC_PI_2, 1.0)).unwrap();
        assert!((jet.g.m[1][1] - 1.1).abs() < 1e-12);
        assert!((jet.g.m[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metric_jet_identities_hold() {
        use crate::expr::ScalarFieldExpr;
        let m = ManifoldModel::expression_metric(
            "bumpy",
            2.0 * std::f64::consts::PI,
            2.0 * std::f64::consts::PI,
            ScalarFieldExpr::parse("1+0.3*cos(u)").unwrap(),
            ScalarFieldExpr::parse("0.1*sin(u)*sin(v)").unwrap(),
            ScalarFieldExpr::parse("1+0.3*sin(v)").unwrap(),
        );
        let p = Point::new(0, 1.3, 2.1);
        let jet = metric_jet(&m, &p).unwrap();
        // g g^{-1} = I
        assert!(jet.g.matmul(&jet.g_inv).sub(&EYE2).frob_norm() < 1e-10);
        // symmetry of Gamma^k_{ij} in (i, j)
        for k in 0..2 {
            assert!((jet.christoffel[k].m[0][1] - jet.christoffel[k].m[1][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_ricci_closed_form() {
        for r in [1.0, 2.0] {
            let m = ManifoldModel::sphere(r);
            let p = Point::new(0, 0.3, -0.5);
            let ric = ricci(&m, &p).unwrap();
            let g = m.metric(p.chart, p.coords).unwrap();
            // Ric(v, v) = 1/r^2 for unit v <=> Ric = g / r^2
            assert!(ric.sub(&g.scale(1.0 / (r * r))).frob_norm() < 1e-13);
        }
    }

    #[test]
    fn fd_ricci_matches_sphere_closed_form() {
        // the finite-difference pipeline applied to the closed-form metric
        let m = ManifoldModel::sphere(1.0);
        let eval = |c: [f64; 2]| m.metric(0, c);
        for k in 0..50 {
            let ang = 0.37 * k as f64;
            let rad = 0.02 + 1.3 * (k as f64 / 50.0);
            let p = Point::new(0, rad * ang.cos(), rad * ang.sin());
            let fd = ricci_fd(&eval, p.coords, 1e-4, 1e-3, &p).unwrap();
            let exact = m.metric(0, p.coords).unwrap();
            assert!(
                fd.sub(&exact).frob_norm() < 1e-4,
                "fd ricci off by {} at {:?}",
                fd.sub(&exact).frob_norm(),
                p
            );
        }
    }

    #[test]
    fn hessian_of_zero_potential_vanishes() {
        let m = ManifoldModel::sphere(1.0);
        let h = ScalarField::zero();
        let hess = hessian_h(&m, &h, &Point::new(0, 0.4, 0.1)).unwrap();
        assert_eq!(hess, ZERO2);
    }

    #[test]
    fn flat_torus_hessian_is_plain_second_derivative() {
        let m = ManifoldModel::flat_torus(2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI);
        let h = ScalarField::parse("cos(u)").unwrap();
        let hess = hessian_h(&m, &h, &Point::new(0, 0.0, 1.0)).unwrap();
        assert!((hess.m[0][0] + 1.0).abs() < 1e-9);
        assert!(hess.m[0][1].abs() < 1e-9);
        assert!(hess.m[1][1].abs() < 1e-9);
    }

    #[test]
    fn sphere_height_hessian_matches_minus_z_times_metric() {
        // Hess(z) = -z g on the unit sphere, checked by the finite-difference
        // pipeline at scattered points in both charts.
        let (m, h) = sphere_and_height(1.0);
        for chart in [0usize, 1] {
            for k in 0..20 {
                let ang = 0.61 * k as f64 + 0.2;
                let rad = 0.05 + 1.2 * (k as f64 / 20.0);
                let p = Point::new(chart, rad * ang.cos(), rad * ang.sin());
                let hess = hessian_h(&m, &h, &p).unwrap();
                let z = m.env_at(&p).z.unwrap();
                let g = m.metric(p.chart, p.coords).unwrap();
                let expected = g.scale(-z);
                assert!(
                    hess.sub(&expected).frob_norm() < 1e-7,
                    "Hess(z) != -z g at chart {chart}, point {k}: err {}",
                    hess.sub(&expected).frob_norm()
                );
            }
        }
    }

    #[test]
    fn rho_h_closed_forms() {
        // unit sphere, h = 0: rho = 1 everywhere
        let m = ManifoldModel::sphere(1.0);
        let h0 = ScalarField::zero();
        for k in 0..10 {
            let p = Point::new(k % 2, 0.1 + 0.1 * k as f64, -0.3);
            assert!((rho_h(&m, &h0, &p).unwrap() - 1.0).abs() < 1e-12);
        }
        // flat torus: rho = 0
        let t = ManifoldModel::flat_torus(6.0, 6.0);
        assert!(rho_h(&t, &h0, &Point::new(0, 1.0, 2.0)).unwrap().abs() < 1e-14);
        // h = 0.3 z: rho^h = 1 + 0.6 z; poles are chart origins
        let (m, h) = sphere_and_height(0.3);
        let north = m.point_from_ambient([0.0, 0.0, 1.0]);
        let south = m.point_from_ambient([0.0, 0.0, -1.0]);
        assert!((rho_h(&m, &h, &north).unwrap() - 1.6).abs() < 1e-8);
        assert!((rho_h(&m, &h, &south).unwrap() - 0.4).abs() < 1e-8);
    }

    #[test]
    fn rho_h_is_chart_independent() {
        let (m, h) = sphere_and_height(0.3);
        for k in 0..50 {
            let ang = 0.41 * k as f64;
            let rad = 0.7 + 0.6 * (k as f64 / 50.0); // overlap band
            let p = Point::new(0, rad * ang.cos(), rad * ang.sin());
            let (q, _) = m.transition(&p);
            let a = rho_h(&m, &h, &p).unwrap();
            let b = rho_h(&m, &h, &q).unwrap();
            assert!(
                (a - b).abs() < 1e-8,
                "chart disagreement {} at point {k}",
                (a - b).abs()
            );
        }
    }

    #[test]
    fn rho_h_matches_angle_sweep_minimization() {
        // independent oracle: minimize (Ric - 2 Hess h)(v, v) over g-unit
        // vectors by angle sweep with one parabolic refinement
        use crate::expr::ScalarFieldExpr;
        let bumpy = ManifoldModel::expression_metric(
            "bumpy",
            2.0 * std::f64::consts::PI,
            2.0 * std::f64::consts::PI,
            ScalarFieldExpr::parse("1+0.3*cos(u)").unwrap(),
            ScalarFieldExpr::parse("0.1*sin(u)*sin(v)").unwrap(),
            ScalarFieldExpr::parse("1+0.3*sin(v)").unwrap(),
        );
        let h = ScalarField::parse("0.2*sin(v)").unwrap();
        let manifolds: Vec<(ManifoldModel, ScalarField)> = vec![
            (ManifoldModel::sphere(1.0), ScalarField::parse("0.3*z").unwrap()),
            (
                ManifoldModel::flat_torus(
                    2.0 * std::f64::consts::PI,
                    2.0 * std::f64::consts::PI,
                ),
                ScalarField::parse("0.5*cos(u)").unwrap(),
            ),
            (bumpy, h),
        ];
        let mut state = 123456789u64;
        let mut unit = move || {
            // xorshift, plenty good for scattering test points
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for (m, h) in &manifolds {
            for _ in 0..100 {
                let p = match m.periods() {
                    Some((lu, lv)) => Point::new(0, unit() * lu, unit() * lv),
                    None => {
                        let ang = unit() * std::f64::consts::TAU;
                        let rad = unit() * 1.2;
                        Point::new(if unit() < 0.5 { 0 } else { 1 }, rad * ang.cos(), rad * ang.sin())
                    }
                };
                let pack = curvature_pack(m, h, &p).unwrap();
                let jet = metric_jet(m, &p).unwrap();
                let s = pack.ric.sub(&pack.hess_h.scale(2.0));
                // g-orthonormal frame to parametrize the unit circle
                let frame = crate::linalg::orthonormalize_frame(&jet.g, &EYE2);
                let quad = |theta: f64| {
                    let a = theta.cos();
                    let b = theta.sin();
                    let vvec = [
                        a * frame.m[0][0] + b * frame.m[0][1],
                        a * frame.m[1][0] + b * frame.m[1][1],
                    ];
                    crate::linalg::g_inner(&s, vvec, vvec)
                };
                let n = 360;
                let mut best = (0usize, f64::INFINITY);
                for i in 0..n {
                    let val = quad(i as f64 * std::f64::consts::TAU / n as f64);
                    if val < best.1 {
                        best = (i, val);
                    }
                }
                // parabolic refinement around the grid minimum
                let dth = std::f64::consts::TAU / n as f64;
                let t0 = best.0 as f64 * dth;
                let (fm, f0, fp) = (quad(t0 - dth), best.1, quad(t0 + dth));
                let denom = fm - 2.0 * f0 + fp;
                let sweep_min = if denom.abs() > 1e-300 {
                    let shift = 0.5 * (fm - fp) / denom;
                    quad(t0 + shift * dth)
                } else {
                    f0
                };
                assert!(
                    (sweep_min - pack.rho_h).abs() < 1e-6,
                    "angle sweep {} vs eigenvalue {} on {}",
                    sweep_min,
                    pack.rho_h,
                    m.name
                );
            }
        }
    }

    #[test]
    fn chart_boundary_is_reported() {
        let m = ManifoldModel::sphere(1.0);
        let err = metric_jet(&m, &Point::new(0, 2.0, 0.0)).unwrap_err();
        assert!(matches!(err, MyersError::ChartBoundary { .. }));
    }
}

