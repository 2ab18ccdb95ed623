//! Manifold catalog: the built-in sphere (two stereographic charts), the
//! flat torus, and user expression metrics on periodic rectangles.
//!
//! Everything geometric downstream (curvature, sampling, discrete
//! operators) is derived from a `ManifoldModel`.

mod field;
mod jet;
mod volume;

pub use field::ScalarField;
pub use jet::{
    curvature_pack, field_partials, grad_h, hessian_h, metric_jet, metric_jet_fd, ricci,
    ricci_fd, rho_h, CurvaturePack, MetricJet,
};
pub use volume::h_volume;

use crate::error::{MyersError, Result};
use crate::expr::{Env, ScalarFieldExpr, Var};
use crate::linalg::Mat2;

/// Finite-difference steps: `fd_step` for first derivatives, `fd2_step`
/// for the second-derivative stencils.
#[derive(Debug, Clone, Copy)]
pub struct GeomParams {
    pub fd_step: f64,
    pub fd2_step: f64,
}

impl Default for GeomParams {
    fn default() -> Self {
        GeomParams {
            fd_step: 1e-4,
            fd2_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ManifoldKind {
    Sphere {
        radius: f64,
    },
    FlatTorus {
        lu: f64,
        lv: f64,
    },
    ExpressionMetric {
        lu: f64,
        lv: f64,
        g11: ScalarFieldExpr,
        g12: ScalarFieldExpr,
        g22: ScalarFieldExpr,
    },
}

#[derive(Debug, Clone)]
pub struct ManifoldModel {
    pub name: String,
    pub kind: ManifoldKind,
    /// Test label from the catalog; `None` for user metrics.
    pub known_pi1_finite: Option<bool>,
    pub params: GeomParams,
}

/// A point in chart coordinates. Chart 0 is the only chart for the
/// rectangle manifolds; the sphere also has chart 1 (projection from the
/// south pole, covering the north).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub chart: usize,
    pub coords: [f64; 2],
}

impl Point {
    pub fn new(chart: usize, u: f64, v: f64) -> Point {
        Point {
            chart,
            coords: [u, v],
        }
    }
}

impl ManifoldModel {
    pub fn sphere(radius: f64) -> ManifoldModel {
        ManifoldModel {
            name: format!("sphere(r={radius})"),
            kind: ManifoldKind::Sphere { radius },
            known_pi1_finite: Some(true),
            params: GeomParams::default(),
        }
    }

    pub fn flat_torus(lu: f64, lv: f64) -> ManifoldModel {
        ManifoldModel {
            name: format!("flat_torus({lu}x{lv})"),
            kind: ManifoldKind::FlatTorus { lu, lv },
            known_pi1_finite: Some(false),
            params: GeomParams::default(),
        }
    }

    pub fn expression_metric(
        name: &str,
        lu: f64,
        lv: f64,
        g11: ScalarFieldExpr,
        g12: ScalarFieldExpr,
        g22: ScalarFieldExpr,
    ) -> ManifoldModel {
        ManifoldModel {
            name: name.to_string(),
            kind: ManifoldKind::ExpressionMetric {
                lu,
                lv,
                g11,
                g12,
                g22,
            },
            known_pi1_finite: None,
            params: GeomParams::default(),
        }
    }

    pub fn n_charts(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, ManifoldKind::Sphere { .. })
    }

    pub fn periods(&self) -> Option<(f64, f64)> {
        match self.kind {
            ManifoldKind::FlatTorus { lu, lv } => Some((lu, lv)),
            ManifoldKind::ExpressionMetric { lu, lv, .. } => Some((lu, lv)),
            ManifoldKind::Sphere { .. } => None,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            ManifoldKind::Sphere { radius } => Some(radius),
            _ => None,
        }
    }

    /// Variables an expression field may reference on this manifold.
    pub fn available_vars(&self) -> &'static [Var] {
        match self.kind {
            ManifoldKind::Sphere { .. } => &[Var::U, Var::V, Var::X, Var::Y, Var::Z],
            _ => &[Var::U, Var::V],
        }
    }

    /// Metric matrix in a chart. Closed form for the built-ins.
    pub fn metric(&self, chart: usize, c: [f64; 2]) -> Result<Mat2> {
        match &self.kind {
            ManifoldKind::Sphere { radius } => {
                let lam2 = sphere_conformal_sq(*radius, c);
                Ok(Mat2::diag(lam2, lam2))
            }
            ManifoldKind::FlatTorus { .. } => Ok(crate::linalg::EYE2),
            ManifoldKind::ExpressionMetric { g11, g12, g22, .. } => {
                debug_assert_eq!(chart, 0);
                let env = Env::chart(c[0], c[1]);
                let a = g11.eval(&env)?;
                let b = g12.eval(&env)?;
                let d = g22.eval(&env)?;
                Ok(Mat2::new(a, b, b, d))
            }
        }
    }

    /// Ambient position for sphere points.
    pub fn ambient(&self, p: &Point) -> Option<[f64; 3]> {
        match self.kind {
            ManifoldKind::Sphere { radius } => Some(sphere_ambient(radius, p)),
            _ => None,
        }
    }

    /// Chart point for an ambient sphere position, in the chart whose
    /// origin is nearest (chart 1 for the upper hemisphere).
    pub fn point_from_ambient(&self, xyz: [f64; 3]) -> Point {
        let r = self.radius().expect("ambient points only exist on the sphere");
        let [x, y, w] = xyz;
        if w >= 0.0 {
            Point::new(1, r * x / (r + w), r * y / (r + w))
        } else {
            Point::new(0, r * x / (r - w), r * y / (r - w))
        }
    }

    /// Evaluation environment at a chart point: chart coordinates plus the
    /// ambient coordinates when the manifold defines them.
    pub fn env_at(&self, p: &Point) -> Env {
        let mut env = Env::chart(p.coords[0], p.coords[1]);
        if let ManifoldKind::Sphere { radius } = self.kind {
            let [x, y, z] = sphere_ambient(radius, p);
            env.x = Some(x);
            env.y = Some(y);
            env.z = Some(z);
        }
        env
    }

    /// Map a sphere point to the other chart, returning the transition
    /// Jacobian acting on coordinate tangent vectors.
    pub fn transition(&self, p: &Point) -> (Point, Mat2) {
        let r = self
            .radius()
            .expect("chart transitions only exist on the sphere");
        let [u, v] = p.coords;
        let rho2 = u * u + v * v;
        let s = r * r / rho2;
        let target = 1 - p.chart;
        let q = Point::new(target, s * u, s * v);
        let j = Mat2::new(
            r * r * (v * v - u * u) / (rho2 * rho2),
            -2.0 * r * r * u * v / (rho2 * rho2),
            -2.0 * r * r * u * v / (rho2 * rho2),
            r * r * (u * u - v * v) / (rho2 * rho2),
        );
        (q, j)
    }

    /// Does the chart contain the point with the given margin to its edge?
    /// Rectangle manifolds are periodic, so the answer is always yes there.
    pub fn chart_contains(&self, p: &Point, margin: f64) -> bool {
        match self.kind {
            ManifoldKind::Sphere { radius } => {
                let [u, v] = p.coords;
                (u * u + v * v).sqrt() < 2.0 * radius - margin
            }
            _ => true,
        }
    }

    pub fn require_margin(&self, p: &Point, margin: f64) -> Result<()> {
        if self.chart_contains(p, margin) {
            Ok(())
        } else {
            Err(MyersError::ChartBoundary {
                chart: p.chart,
                u: p.coords[0],
                v: p.coords[1],
                margin,
            })
        }
    }

    /// Canonical representative: wraps rectangle coordinates into
    /// [0, Lu) x [0, Lv). Sphere points are returned unchanged.
    pub fn wrap(&self, p: &Point) -> Point {
        match self.periods() {
            Some((lu, lv)) => Point::new(
                p.chart,
                p.coords[0].rem_euclid(lu),
                p.coords[1].rem_euclid(lv),
            ),
            None => *p,
        }
    }

    /// Switch charts when a sphere point leaves `threshold * r`; the frame
    /// columns are pushed through the transition Jacobian. Reports
    /// `StepOutOfAtlas` if no chart holds the result, which the catalog
    /// manifolds never trigger.
    pub fn normalize_after_step(
        &self,
        p: &Point,
        frame: &Mat2,
        threshold: f64,
    ) -> Result<(Point, Mat2)> {
        match self.kind {
            ManifoldKind::Sphere { radius } => {
                let [u, v] = p.coords;
                let rho = (u * u + v * v).sqrt();
                if rho > threshold * radius {
                    let (q, j) = self.transition(p);
                    let new_frame = j.matmul(frame);
                    if !self.chart_contains(&q, 0.0) {
                        return Err(MyersError::StepOutOfAtlas {
                            chart: q.chart,
                            u: q.coords[0],
                            v: q.coords[1],
                        });
                    }
                    Ok((q, new_frame))
                } else {
                    Ok((*p, *frame))
                }
            }
            _ => Ok((self.wrap(p), *frame)),
        }
    }

    /// Eager model validation: SPD metric on a sample grid and periodic
    /// metric entries for expression metrics; variable availability for
    /// the supplied potential.
    pub fn validate(&self, h: &ScalarField) -> Result<()> {
        for var in h.variables() {
            if !self.available_vars().contains(&var) {
                return Err(MyersError::UnavailableVariable {
                    name: var.name().to_string(),
                    manifold: self.name.clone(),
                });
            }
        }
        if let ManifoldKind::ExpressionMetric { lu, lv, .. } = &self.kind {
            let (lu, lv) = (*lu, *lv);
            let n = 64usize;
            for i in 0..n {
                for j in 0..n {
                    let u = (i as f64 + 0.5) * lu / n as f64;
                    let v = (j as f64 + 0.5) * lv / n as f64;
                    let g = self.metric(0, [u, v])?;
                    let min_eig = g.sym_eig_min();
                    if min_eig <= 1e-10 {
                        return Err(MyersError::NonSpdMetric { u, v, min_eig });
                    }
                }
            }
            // periodicity of each entry on sampled boundary points
            let entries: [(&'static str, &ScalarFieldExpr); 3] = match &self.kind {
                ManifoldKind::ExpressionMetric { g11, g12, g22, .. } => {
                    [("g11", g11), ("g12", g12), ("g22", g22)]
                }
                _ => unreachable!(),
            };
            for (name, e) in entries {
                for k in 0..=16 {
                    let s = k as f64 / 16.0;
                    let du = (e.eval_uv(0.0, s * lv)? - e.eval_uv(lu, s * lv)?).abs();
                    if du > 1e-9 {
                        return Err(MyersError::NonPeriodicMetric {
                            entry: name,
                            at: format!("u in {{0, {lu}}}, v = {}", s * lv),
                            diff: du,
                        });
                    }
                    let dv = (e.eval_uv(s * lu, 0.0)? - e.eval_uv(s * lu, lv)?).abs();
                    if dv > 1e-9 {
                        return Err(MyersError::NonPeriodicMetric {
                            entry: name,
                            at: format!("u = {}, v in {{0, {lv}}}", s * lu),
                            diff: dv,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Conformal factor squared of the stereographic chart: (2 r^2 / (r^2 + rho^2))^2.
fn sphere_conformal_sq(r: f64, c: [f64; 2]) -> f64 {
    let rho2 = c[0] * c[0] + c[1] * c[1];
    let lam = 2.0 * r * r / (r * r + rho2);
    lam * lam
}

/// Ambient position of a sphere chart point. Chart 0 projects from the
/// north pole (its origin is the south pole), chart 1 from the south.
fn sphere_ambient(r: f64, p: &Point) -> [f64; 3] {
    let [u, v] = p.coords;
    let rho2 = u * u + v * v;
    let d = r * r + rho2;
    let sigma = if p.chart == 0 { 1.0 } else { -1.0 };
    [
        2.0 * r * r * u / d,
        2.0 * r * r * v / d,
        sigma * r * (rho2 - r * r) / d,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_charts_agree_on_ambient() {
        let m = ManifoldModel::sphere(1.0);
        let p = Point::new(0, 0.9, -0.4);
        let (q, _) = m.transition(&p);
        let a = m.ambient(&p).unwrap();
        let b = m.ambient(&q).unwrap();
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-14);
        }
        // on-sphere check
        let n2: f64 = a.iter().map(|x| x * x).sum();
        assert!((n2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_transitions_are_mutually_inverse() {
        let m = ManifoldModel::sphere(2.0);
        for k in 0..50 {
            let ang = 0.13 * k as f64;
            let rad = 1.0 + 1.4 * (k as f64 / 50.0); // overlap band
            let p = Point::new(0, rad * ang.cos(), rad * ang.sin());
            let (q, j1) = m.transition(&p);
            let (back, j2) = m.transition(&q);
            assert!((back.coords[0] - p.coords[0]).abs() < 1e-10);
            assert!((back.coords[1] - p.coords[1]).abs() < 1e-10);
            let prod = j2.matmul(&j1);
            assert!(prod.sub(&crate::linalg::EYE2).frob_norm() < 1e-10);
        }
    }

    #[test]
    fn transition_is_a_metric_isometry() {
        let m = ManifoldModel::sphere(1.0);
        let p = Point::new(0, 1.2, 0.7);
        let (q, j) = m.transition(&p);
        let gp = m.metric(p.chart, p.coords).unwrap();
        let gq = m.metric(q.chart, q.coords).unwrap();
        // g_p = J^T g_q J
        let pulled = j.transpose().matmul(&gq.matmul(&j));
        assert!(pulled.sub(&gp).frob_norm() < 1e-12);
    }

    #[test]
    fn stereographic_metric_at_origin() {
        let m = ManifoldModel::sphere(1.0);
        let g = m.metric(0, [0.0, 0.0]).unwrap();
        assert!((g.m[0][0] - 4.0).abs() < 1e-15);
        assert!((g.m[0][1]).abs() < 1e-15);
        assert!((g.m[1][1] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn poles_map_to_chart_origins() {
        let m = ManifoldModel::sphere(1.0);
        let np = m.point_from_ambient([0.0, 0.0, 1.0]);
        assert_eq!(np.chart, 1);
        assert!(np.coords[0].abs() < 1e-15 && np.coords[1].abs() < 1e-15);
        let env = m.env_at(&np);
        assert!((env.z.unwrap() - 1.0).abs() < 1e-15);
        let sp = m.point_from_ambient([0.0, 0.0, -1.0]);
        assert_eq!(sp.chart, 0);
        assert!((m.env_at(&sp).z.unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn torus_wraps_coordinates() {
        let m = ManifoldModel::flat_torus(2.0, 3.0);
        let p = m.wrap(&Point::new(0, -0.5, 7.1));
        assert!((p.coords[0] - 1.5).abs() < 1e-12);
        assert!((p.coords[1] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn non_spd_metric_rejected_at_load() {
        let g11 = ScalarFieldExpr::parse("cos(u)").unwrap(); // negative on part of the square
        let g12 = ScalarFieldExpr::parse("0").unwrap();
        let g22 = ScalarFieldExpr::parse("1").unwrap();
        let m = ManifoldModel::expression_metric(
            "bad",
            2.0 * std::f64::consts::PI,
            2.0 * std::f64::consts::PI,
            g11,
            g12,
            g22,
        );
        let err = m.validate(&ScalarField::zero()).unwrap_err();
        assert!(matches!(err, MyersError::NonSpdMetric { .. }));
    }

    #[test]
    fn non_periodic_metric_rejected_at_load() {
        let g11 = ScalarFieldExpr::parse("1+0.1*u").unwrap();
        let g12 = ScalarFieldExpr::parse("0").unwrap();
        let g22 = ScalarFieldExpr::parse("1").unwrap();
        let m = ManifoldModel::expression_metric("bad", 1.0, 1.0, g11, g12, g22);
        let err = m.validate(&ScalarField::zero()).unwrap_err();
        assert!(matches!(err, MyersError::NonPeriodicMetric { entry: "g11", .. }));
    }

    #[test]
    fn ambient_variables_rejected_on_torus() {
        let m = ManifoldModel::flat_torus(1.0, 1.0);
        let h = ScalarField::parse("0.3*z").unwrap();
        let err = m.validate(&h).unwrap_err();
        assert!(matches!(err, MyersError::UnavailableVariable { .. }));
    }
}
