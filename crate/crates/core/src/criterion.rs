//! Criterion orchestration: run the spectral engine and the Monte Carlo
//! engine on one manifold + potential, cross-check every identity, and
//! assemble the verdict report.

use crate::error::{MyersError, Result};
use crate::flows::{self, PotentialEstimate};
use crate::geometry::{h_volume, ManifoldModel, Point, ScalarField};
use crate::report::Json;
use crate::sde::{sample_functionals, EnsembleRecord, ObservableSpec, SamplerConfig};
use crate::spectral::{
    build_operator, interp::SphereFit, interp::TorusInterp, potential_resolvent, semigroup_apply,
    smooth_test_field, top_eigen, witten_check, DiscreteOperator, OperatorMeta,
};

const CRITERION_CUTOFF: f64 = -1e-6;

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub sampler: SamplerConfig,
    pub resolution: usize,
    pub subdivision: u32,
    pub rho_shift: f64,
    /// chart-0 coordinates, snapped to the nearest operator node
    pub probes: Option<Vec<[f64; 2]>>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            sampler: SamplerConfig {
                t_max: 10.0,
                n_paths: 20_000,
                ..SamplerConfig::default()
            },
            resolution: 64,
            subdivision: 5,
            rho_shift: 0.0,
            probes: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct U1Stats {
    pub sup: f64,
    pub inf: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub label: String,
    pub node: usize,
    pub chart: usize,
    pub coords: [f64; 2],
    pub u1: PotentialEstimate,
    pub u1_spectral_here: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct DecayFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub rel_err_vs_mu_top: f64,
}

#[derive(Debug, Clone)]
pub struct MyersReport {
    pub manifold: String,
    pub h_source: String,
    pub seed: u64,
    pub mu_top: f64,
    pub lambda0: f64,
    pub eigen_residual: f64,
    pub criterion_holds: bool,
    pub u1_spectral: Option<U1Stats>,
    pub probes: Vec<ProbeReport>,
    pub h_volume: f64,
    pub rho_negative_volume_fraction: f64,
    pub decay_fit: Option<DecayFit>,
    pub identity_checks: Vec<IdentityCheck>,
    pub known_pi1_finite: Option<bool>,
    pub consistency: bool,
    pub note: String,
}

/// Probe points for the Monte Carlo suite: fixed landmarks on the catalog
/// manifolds, seeded grid nodes otherwise, or the user-supplied list.
pub fn probe_nodes(
    m: &ManifoldModel,
    op: &DiscreteOperator,
    override_probes: &Option<Vec<[f64; 2]>>,
    seed: u64,
) -> Vec<(String, usize)> {
    if let Some(list) = override_probes {
        return list
            .iter()
            .enumerate()
            .map(|(k, &c)| (format!("probe{k}"), nearest_node(op, m, c)))
            .collect();
    }
    match &op.meta {
        OperatorMeta::SphereMesh { mesh, .. } => {
            let r = m.radius().unwrap();
            vec![
                ("north_pole".to_string(), mesh.nearest_vertex([0.0, 0.0, r])),
                ("south_pole".to_string(), mesh.nearest_vertex([0.0, 0.0, -r])),
                ("equator".to_string(), mesh.nearest_vertex([r, 0.0, 0.0])),
            ]
        }
        OperatorMeta::TorusGrid { lu, lv, .. } => {
            if matches!(m.kind, crate::geometry::ManifoldKind::FlatTorus { .. }) {
                vec![
                    ("origin".to_string(), nearest_node(op, m, [0.0, 0.0])),
                    (
                        "center".to_string(),
                        nearest_node(op, m, [lu / 2.0, lv / 2.0]),
                    ),
                ]
            } else {
                let mut state = seed ^ 0xabcdef0102030405;
                let mut unit = move || {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state >> 11) as f64 / (1u64 << 53) as f64
                };
                (0..4)
                    .map(|k| {
                        (
                            format!("random{k}"),
                            nearest_node(op, m, [unit() * lu, unit() * lv]),
                        )
                    })
                    .collect()
            }
        }
    }
}

fn nearest_node(op: &DiscreteOperator, m: &ManifoldModel, c: [f64; 2]) -> usize {
    match &op.meta {
        OperatorMeta::TorusGrid { nu, nv, lu, lv } => {
            let i = (c[0].rem_euclid(*lu) / lu * *nu as f64).round() as usize % nu;
            let j = (c[1].rem_euclid(*lv) / lv * *nv as f64).round() as usize % nv;
            i * nv + j
        }
        OperatorMeta::SphereMesh { mesh, .. } => {
            let p = Point::new(0, c[0], c[1]);
            let xyz = m.ambient(&p).unwrap();
            mesh.nearest_vertex(xyz)
        }
    }
}

/// Least-squares decay rate of the sup-over-probes FK curve in a window.
/// Demands at least 10 samples, each mean at least 10 standard errors.
pub fn decay_rate_fit(
    times: &[f64],
    sup_fk: &[f64],
    sup_stderr: &[f64],
    window: (f64, f64),
) -> Result<f64> {
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for ((&t, &v), &s) in times.iter().zip(sup_fk).zip(sup_stderr) {
        if t >= window.0 && t <= window.1 {
            if v.is_nan() || v <= 10.0 * s {
                return Err(MyersError::InsufficientDecayWindow {
                    found: ts.len(),
                    need: 10,
                    t0: window.0,
                    t1: window.1,
                });
            }
            ts.push(t);
            vs.push(v);
        }
    }
    if ts.len() < 10 {
        return Err(MyersError::InsufficientDecayWindow {
            found: ts.len(),
            need: 10,
            t0: window.0,
            t1: window.1,
        });
    }
    flows::log_slope(&ts, &vs).ok_or(MyersError::InsufficientDecayWindow {
        found: ts.len(),
        need: 10,
        t0: window.0,
        t1: window.1,
    })
}

#[derive(Debug, Clone)]
pub struct BakryRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Integration-by-parts inequality: <P_t f - f, g>_w <= sup(U1) |df|_inf |dg|_L1.
pub fn bakry_inequality_check(
    m: &ManifoldModel,
    op: &DiscreteOperator,
    u1_sup: f64,
    f: &ScalarField,
    g: &ScalarField,
    t: f64,
) -> Result<BakryRecord> {
    let f_nodes = op.node_field(m, f)?;
    let g_nodes = op.node_field(m, g)?;
    let ptf = semigroup_apply(op, &f_nodes, t, false)?;
    let diff: Vec<f64> = ptf.iter().zip(&f_nodes).map(|(a, b)| a - b).collect();
    let lhs = op.w_inner(&diff, &g_nodes);
    let grad_f = op.node_grad_norms(m, f)?;
    let grad_g = op.node_grad_norms(m, g)?;
    let df_sup = grad_f.iter().fold(0.0f64, |a, &b| a.max(b));
    let dg_l1: f64 = grad_g.iter().zip(&op.weights).map(|(n, w)| n * w).sum();
    let rhs = u1_sup * df_sup * dg_l1;
    Ok(BakryRecord {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}

/// Geodesic step from a point: closed form on the sphere, straight
/// coordinate line on the flat torus (exact) and on expression metrics
/// (the O(eps^2) chart deviation is far below the identity tolerances).
pub fn exp_map(m: &ManifoldModel, x0: &Point, w: [f64; 2]) -> Point {
    if m.is_sphere() {
        let r = m.radius().unwrap();
        let p = m.ambient(x0).unwrap();
        // push the coordinate vector to an ambient tangent via a centered
        // difference of the (analytic) chart embedding
        let eps = 1e-5;
        let qp = Point::new(
            x0.chart,
            x0.coords[0] + eps * w[0],
            x0.coords[1] + eps * w[1],
        );
        let qm = Point::new(
            x0.chart,
            x0.coords[0] - eps * w[0],
            x0.coords[1] - eps * w[1],
        );
        let pp = m.ambient(&qp).unwrap();
        let pm = m.ambient(&qm).unwrap();
        let mut tangent = [
            (pp[0] - pm[0]) / (2.0 * eps),
            (pp[1] - pm[1]) / (2.0 * eps),
            (pp[2] - pm[2]) / (2.0 * eps),
        ];
        // project exactly onto the tangent plane
        let radial = (tangent[0] * p[0] + tangent[1] * p[1] + tangent[2] * p[2]) / (r * r);
        for k in 0..3 {
            tangent[k] -= radial * p[k];
        }
        let norm = (tangent[0] * tangent[0] + tangent[1] * tangent[1] + tangent[2] * tangent[2])
            .sqrt();
        if norm == 0.0 {
            return *x0;
        }
        let theta = norm / r;
        let dir = [tangent[0] / norm, tangent[1] / norm, tangent[2] / norm];
        let out = [
            theta.cos() * p[0] + r * theta.sin() * dir[0],
            theta.cos() * p[1] + r * theta.sin() * dir[1],
            theta.cos() * p[2] + r * theta.sin() * dir[2],
        ];
        m.point_from_ambient(out)
    } else {
        m.wrap(&Point::new(
            x0.chart,
            x0.coords[0] + w[0],
            x0.coords[1] + w[1],
        ))
    }
}

/// Evaluate a spectral node field at an arbitrary point through the smooth
/// interpolants (trigonometric on grids, restricted polynomials on the
/// sphere).
pub fn eval_node_field_at(
    m: &ManifoldModel,
    op: &DiscreteOperator,
    values: &[f64],
    p: &Point,
) -> f64 {
    match &op.meta {
        OperatorMeta::TorusGrid { nu, nv, lu, lv } => {
            TorusInterp::new(*nu, *nv, *lu, *lv, values).eval(p.coords[0], p.coords[1])
        }
        OperatorMeta::SphereMesh { mesh, .. } => {
            let fit = SphereFit::new(mesh, &op.weights, values);
            fit.eval(m.ambient(p).unwrap())
        }
    }
}

struct OneFormCase {
    f: ScalarField,
    x0_hint: [f64; 2],
    t: f64,
}

fn one_form_case(m: &ManifoldModel) -> OneFormCase {
    match m.periods() {
        Some((lu, _)) => OneFormCase {
            f: ScalarField::parse(&format!("cos({:.16e}*u)", std::f64::consts::TAU / lu))
                .unwrap(),
            x0_hint: [lu / 4.0, 0.0],
            t: 0.5,
        },
        None => OneFormCase {
            f: ScalarField::parse("z").unwrap(),
            x0_hint: [0.0, 0.0], // replaced by the equator probe
            t: 0.5,
        },
    }
}

/// Full criterion run. Deterministic for a fixed config and seed.
pub fn check(m: &ManifoldModel, h: &ScalarField, cfg: &CheckConfig) -> Result<MyersReport> {
    m.validate(h)?;
    cfg.sampler.validate()?;
    let op = build_operator(m, h, cfg.resolution, cfg.subdivision, cfg.rho_shift)?;
    let eigen = top_eigen(&op)?;
    let criterion_holds = eigen.lambda0 < CRITERION_CUTOFF;

    let total_weight: f64 = op.weights.iter().sum();
    let neg_weight: f64 = op
        .weights
        .iter()
        .zip(&op.rho)
        .filter(|(_, &r)| r < 0.0)
        .map(|(w, _)| w)
        .sum();

    let u1_vec = if criterion_holds {
        Some(potential_resolvent(&op, &eigen)?)
    } else {
        None
    };
    let u1_spectral = u1_vec.as_ref().map(|u| {
        let sup = u.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let inf = u.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let mean = op.w_inner(u, &vec![1.0; u.len()]) / total_weight;
        U1Stats { sup, inf, mean }
    });

    let volume = h_volume(m, h, cfg.resolution)?;

    // Monte Carlo suite at the probe nodes
    let probes = probe_nodes(m, &op, &cfg.probes, cfg.sampler.seed);
    let mut probe_records: Vec<EnsembleRecord> = Vec::new();
    let mut probe_reports: Vec<ProbeReport> = Vec::new();
    for (label, node) in &probes {
        let x0 = op.points[*node];
        let mut rec = sample_functionals(
            m,
            h,
            &x0,
            ObservableSpec {
                integrate_fk: true,
                ..Default::default()
            },
            &cfg.sampler,
        )?;
        if cfg.rho_shift != 0.0 {
            apply_rho_shift_to_record(&mut rec, cfg.rho_shift);
        }
        let u1 = flows::potential_from_record(&rec, cfg.sampler.t_max, None)?;
        probe_reports.push(ProbeReport {
            label: label.clone(),
            node: *node,
            chart: x0.chart,
            coords: x0.coords,
            u1,
            u1_spectral_here: u1_vec.as_ref().map(|u| u[*node]),
        });
        probe_records.push(rec);
    }

    let mut checks: Vec<IdentityCheck> = Vec::new();

    // Feynman-Kac cross-validation at t in {0.5, 1, 2}
    checks.push(run_fk_check(m, &op, &probes, &probe_records, &cfg.sampler));

    // flow-norm bound at every recorded time; a rho shift decouples the
    // Schrodinger potential from the geometric floor and the inequality
    // no longer applies
    if cfg.rho_shift == 0.0 {
        checks.push(run_flow_norm_check(&op, &probe_records, cfg.sampler.dt));
    } else {
        checks.push(IdentityCheck {
            name: "flow_norm_bound",
            residual: None,
            tolerance: 0.0,
            passed: true,
            note: "skipped: rho_shift override active".to_string(),
        });
    }

    // the one-form identity and its norm bound share one MC run
    let (c13, c4) = run_one_form_checks(m, h, &op, &probes, cfg)?;
    checks.push(c13);
    checks.push(c4);

    // Witten conjugation
    checks.push(match witten_check(m, h, cfg.resolution, cfg.subdivision) {
        Ok(w) => {
            let res = w.max_eig_mismatch.max(w.pointwise_rel_residual / 5.0);
            IdentityCheck {
                name: "witten",
                residual: Some(w.max_eig_mismatch),
                tolerance: 0.01,
                passed: res <= 0.01 + 1e-12,
                note: format!(
                    "top-10 eigenvalue mismatch {:.3e}, pointwise conjugation {:.3e}",
                    w.max_eig_mismatch, w.pointwise_rel_residual
                ),
            }
        }
        Err(e) => IdentityCheck {
            name: "witten",
            residual: None,
            tolerance: 0.01,
            passed: false,
            note: format!("failed: {e}"),
        },
    });

    // Bakry integration-by-parts inequality, only meaningful when U1 is finite
    if let Some(stats) = &u1_spectral {
        let mut worst = f64::NEG_INFINITY;
        let mut err: Option<String> = None;
        for s in 0..5u64 {
            let f = smooth_test_field(m, 2 * s + 1);
            let g = smooth_test_field(m, 2 * s + 2);
            match bakry_inequality_check(m, &op, stats.sup, &f, &g, 1.0) {
                Ok(rec) => worst = worst.max(rec.lhs - rec.rhs),
                Err(e) => err = Some(e.to_string()),
            }
        }
        checks.push(match err {
            None => IdentityCheck {
                name: "bakry",
                residual: Some(worst),
                tolerance: 0.0,
                passed: worst <= 1e-9,
                note: "max(lhs - rhs) over 5 seeded smooth pairs".to_string(),
            },
            Some(e) => IdentityCheck {
                name: "bakry",
                residual: None,
                tolerance: 0.0,
                passed: false,
                note: format!("failed: {e}"),
            },
        });
    }

    // decay-rate fit of the sup-probe FK curve on the second half
    let decay_fit = {
        let times = &probe_records[0].times;
        let sup_fk: Vec<f64> = (0..times.len())
            .map(|i| {
                probe_records
                    .iter()
                    .map(|r| r.fk_mean[i])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let sup_err: Vec<f64> = (0..times.len())
            .map(|i| {
                probe_records
                    .iter()
                    .map(|r| r.fk_stderr[i])
                    .fold(0.0f64, f64::max)
            })
            .collect();
        let window = (cfg.sampler.t_max / 2.0, cfg.sampler.t_max);
        match decay_rate_fit(times, &sup_fk, &sup_err, window) {
            Ok(rate) => {
                let rel = if eigen.mu_top.abs() > 1e-9 {
                    (rate - eigen.mu_top).abs() / eigen.mu_top.abs()
                } else {
                    (rate - eigen.mu_top).abs()
                };
                Some(DecayFit {
                    rate,
                    window,
                    rel_err_vs_mu_top: rel,
                })
            }
            Err(_) => None,
        }
    };

    let consistency = !(criterion_holds && m.known_pi1_finite == Some(false));

    Ok(MyersReport {
        manifold: m.name.clone(),
        h_source: h.source().to_string(),
        seed: cfg.sampler.seed,
        mu_top: eigen.mu_top,
        lambda0: eigen.lambda0,
        eigen_residual: eigen.residual,
        criterion_holds,
        u1_spectral,
        probes: probe_reports,
        h_volume: volume,
        rho_negative_volume_fraction: neg_weight / total_weight,
        decay_fit,
        identity_checks: checks,
        known_pi1_finite: m.known_pi1_finite,
        consistency,
        note: "criterion_holds implies a finite fundamental group; a failed criterion \
               proves nothing about pi1"
            .to_string(),
    })
}

/// A constant added to rho multiplies every Feynman-Kac weight by exactly
/// e^{-c t / 2}; fold that into the sampled curves so the spectral
/// cross-checks stay consistent under the override hook. The pathwise time
/// integral is rebuilt from the adjusted curve on the record grid.
fn apply_rho_shift_to_record(rec: &mut EnsembleRecord, shift: f64) {
    for i in 0..rec.times.len() {
        let factor = (-0.5 * shift * rec.times[i]).exp();
        rec.fk_mean[i] *= factor;
        rec.fk_stderr[i] *= factor;
    }
    let mut integral = 0.0;
    for i in 1..rec.times.len() {
        integral +=
            0.5 * (rec.fk_mean[i - 1] + rec.fk_mean[i]) * (rec.times[i] - rec.times[i - 1]);
    }
    rec.u1_mean = integral;
}

fn run_fk_check(
    m: &ManifoldModel,
    op: &DiscreteOperator,
    probes: &[(String, usize)],
    records: &[EnsembleRecord],
    sampler: &SamplerConfig,
) -> IdentityCheck {
    let _ = m;
    let ones = vec![1.0; op.n()];
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for t_target in [0.5, 1.0, 2.0] {
        if t_target > sampler.t_max + 1e-12 {
            continue;
        }
        let Some(slot) = records[0]
            .times
            .iter()
            .position(|&t| (t - t_target).abs() < 1e-9)
        else {
            continue;
        };
        let spectral = match semigroup_apply(op, &ones, t_target, true) {
            Ok(v) => v,
            Err(e) => {
                return IdentityCheck {
                    name: "feynman_kac",
                    residual: None,
                    tolerance: 0.02,
                    passed: false,
                    note: format!("semigroup failed: {e}"),
                }
            }
        };
        for ((_, node), rec) in probes.iter().zip(records) {
            let mc = rec.fk_mean[slot];
            let sig = rec.fk_stderr[slot];
            let sp = spectral[*node];
            let beyond_noise = ((mc - sp).abs() - 3.0 * sig).max(0.0) / sp.abs().max(1e-300);
            if beyond_noise > worst {
                worst = beyond_noise;
                detail = format!("worst at t={t_target}, mc={mc:.6}, spectral={sp:.6}");
            }
        }
    }
    IdentityCheck {
        name: "feynman_kac",
        residual: Some(worst),
        tolerance: 0.02,
        passed: worst <= 0.02,
        note: detail,
    }
}

fn run_flow_norm_check(op: &DiscreteOperator, records: &[EnsembleRecord], dt: f64) -> IdentityCheck {
    // E|W_t| <= E[FK weight] with an explicit-Euler discretization
    // allowance dt * osc(rho) relative to the weight
    let rho_osc = {
        let max = op.rho.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = op.rho.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        max - min
    };
    let mut worst = f64::NEG_INFINITY;
    for rec in records {
        for i in 0..rec.times.len() {
            let sig = (rec.w_stderr[i].powi(2) + rec.fk_stderr[i].powi(2)).sqrt();
            let allowance = rec.fk_mean[i] * dt * rho_osc + 1e-12;
            let violation = rec.w_mean[i] - rec.fk_mean[i] - 3.0 * sig - allowance;
            worst = worst.max(violation / rec.fk_mean[i].max(1e-300));
        }
    }
    IdentityCheck {
        name: "flow_norm_bound",
        residual: Some(worst.max(0.0)),
        tolerance: 0.0,
        passed: worst <= 0.0,
        note: "max over probes and times of (E|W| - E[FK] - 3 sigma - dt allowance)".to_string(),
    }
}

fn run_one_form_checks(
    m: &ManifoldModel,
    h: &ScalarField,
    op: &DiscreteOperator,
    probes: &[(String, usize)],
    cfg: &CheckConfig,
) -> Result<(IdentityCheck, IdentityCheck)> {
    let case = one_form_case(m);
    // start point: equator probe on the sphere, hinted node otherwise
    let node = if m.is_sphere() {
        probes
            .iter()
            .find(|(l, _)| l == "equator")
            .map(|(_, n)| *n)
            .unwrap_or(probes[0].1)
    } else {
        nearest_node(op, m, case.x0_hint)
    };
    let x0 = op.points[node];
    let init = crate::sde::init_state(m, h, &x0)?;
    let v0 = [init.frame.m[0][0], init.frame.m[1][0]];

    let mut sampler = cfg.sampler;
    sampler.t_max = case.t;
    let rec = sample_functionals(
        m,
        h,
        &x0,
        ObservableSpec {
            one_form: Some((v0, &case.f)),
            ..Default::default()
        },
        &sampler,
    )?;
    let last = rec.times.len() - 1;
    let (mc, sig) = (rec.pairing_mean[last], rec.pairing_stderr[last]);

    // spectral side: directional difference of the plain heat semigroup
    let f_nodes = op.node_field(m, &case.f)?;
    let ptf = semigroup_apply(op, &f_nodes, case.t, false)?;
    let eps = 1e-3;
    let plus = exp_map(m, &x0, [eps * v0[0], eps * v0[1]]);
    let minus = exp_map(m, &x0, [-eps * v0[0], -eps * v0[1]]);
    let fp = eval_node_field_at(m, op, &ptf, &plus);
    let fm = eval_node_field_at(m, op, &ptf, &minus);
    let derivative = (fp - fm) / (2.0 * eps);

    let resid13 = (mc - derivative).abs();
    let tol13 = 3.0 * sig + 1e-2;
    let c13 = IdentityCheck {
        name: "one_form_identity",
        residual: Some(resid13),
        tolerance: tol13,
        passed: resid13 <= tol13,
        note: format!(
            "mc pairing {mc:.6} vs spectral directional derivative {derivative:.6} at t={}",
            case.t
        ),
    };

    // norm bound: |pairing| <= sup|df|_g E|W_t| + 3 sigma
    let grad = op.node_grad_norms(m, &case.f)?;
    let df_sup = grad.iter().fold(0.0f64, |a, &b| a.max(b));
    let bound = df_sup * rec.w_mean[last];
    let sig4 = (sig.powi(2) + (df_sup * rec.w_stderr[last]).powi(2)).sqrt();
    let resid4 = mc.abs() - bound - 3.0 * sig4;
    let c4 = IdentityCheck {
        name: "one_form_bound",
        residual: Some(resid4.max(0.0)),
        tolerance: 0.0,
        passed: resid4 <= 1e-9,
        note: format!("|pairing| {:.6} vs sup|df| E|W| {:.6}", mc.abs(), bound),
    };
    Ok((c13, c4))
}

impl MyersReport {
    pub fn to_json(&self) -> Json {
        let mut root = Json::obj();
        root.push("manifold", Json::Str(self.manifold.clone()));
        root.push("h", Json::Str(self.h_source.clone()));
        root.push("seed", Json::Int(self.seed as i64));
        root.push("mu_top", Json::Num(self.mu_top));
        root.push("lambda0", Json::Num(self.lambda0));
        root.push("eigen_residual", Json::Num(self.eigen_residual));
        root.push("criterion_holds", Json::Bool(self.criterion_holds));
        root.push(
            "u1_spectral",
            match &self.u1_spectral {
                Some(s) => {
                    let mut o = Json::obj();
                    o.push("sup", Json::Num(s.sup));
                    o.push("inf", Json::Num(s.inf));
                    o.push("mean", Json::Num(s.mean));
                    o
                }
                None => Json::Null,
            },
        );
        let mut probes = Vec::new();
        for p in &self.probes {
            let mut o = Json::obj();
            o.push("label", Json::Str(p.label.clone()));
            o.push("node", Json::Int(p.node as i64));
            o.push("chart", Json::Int(p.chart as i64));
            o.push("coords", Json::num_array(&p.coords));
            o.push("u1_diverged", Json::Bool(p.u1.diverged));
            o.push(
                "u1_mc",
                match p.u1.u1_mc {
                    Some(v) => Json::Num(v),
                    None => Json::Null,
                },
            );
            o.push("u1_stderr", Json::Num(p.u1.u1_stderr));
            o.push("u1_tail_bound", Json::Num(p.u1.tail_bound));
            o.push("u1_decay_rate_fit", Json::Num(p.u1.decay_rate_fit));
            o.push(
                "u1_spectral_here",
                match p.u1_spectral_here {
                    Some(v) => Json::Num(v),
                    None => Json::Null,
                },
            );
            probes.push(o);
        }
        root.push("probes", Json::Arr(probes));
        root.push("h_volume", Json::Num(self.h_volume));
        root.push(
            "rho_negative_volume_fraction",
            Json::Num(self.rho_negative_volume_fraction),
        );
        root.push(
            "decay_fit",
            match &self.decay_fit {
                Some(d) => {
                    let mut o = Json::obj();
                    o.push("rate", Json::Num(d.rate));
                    o.push("window_start", Json::Num(d.window.0));
                    o.push("window_end", Json::Num(d.window.1));
                    o.push("rel_err_vs_mu_top", Json::Num(d.rel_err_vs_mu_top));
                    o
                }
                None => Json::Null,
            },
        );
        let mut checks = Vec::new();
        for c in &self.identity_checks {
            let mut o = Json::obj();
            o.push("name", Json::Str(c.name.to_string()));
            o.push(
                "residual",
                match c.residual {
                    Some(r) if r.is_finite() => Json::Num(r),
                    _ => Json::Null,
                },
            );
            o.push("tolerance", Json::Num(c.tolerance));
            o.push("passed", Json::Bool(c.passed));
            o.push("note", Json::Str(c.note.clone()));
            checks.push(o);
        }
        root.push("identity_checks", Json::Arr(checks));
        root.push(
            "known_pi1_finite",
            match self.known_pi1_finite {
                Some(b) => Json::Bool(b),
                None => Json::Null,
            },
        );
        root.push("consistency", Json::Bool(self.consistency));
        root.push("note", Json::Str(self.note.clone()));
        root
    }

    /// Flat CSV of the identity residuals.
    pub fn residuals_csv(&self) -> String {
        use crate::report::{csv_num, csv_row};
        let mut out = csv_row(&[
            "check".into(),
            "residual".into(),
            "tolerance".into(),
            "passed".into(),
        ]);
        for c in &self.identity_checks {
            out.push_str(&csv_row(&[
                c.name.to_string(),
                c.residual.map(csv_num).unwrap_or_default(),
                csv_num(c.tolerance),
                c.passed.to_string(),
            ]));
        }
        out
    }
}
