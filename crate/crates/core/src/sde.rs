//! h-Brownian motion in chart coordinates: Euler-Maruyama with frame noise
//! (the frame columns are g-orthonormal, so frame frame^T = g^{-1} and the
//! scheme has generator 1/2 Delta + grad h . grad), discrete parallel
//! transport of the frame, chart switching on the sphere, and the running
//! Feynman-Kac integral of the curvature floor.
//!
//! Ensembles are embarrassingly parallel. Each path draws from a
//! counter-based substream keyed (seed, path index), and paths are grouped
//! into fixed-size batches that are reduced in index order, so results are
//! bit-identical for any worker count.

use crate::error::{MyersError, Result};
use crate::flows;
use crate::geometry::{
    curvature_pack, metric_jet, CurvaturePack, ManifoldModel, MetricJet, Point, ScalarField,
};
use crate::linalg::{orthonormalize_frame, Mat2, EYE2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

const BATCH: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    /// process-time step
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub n_paths: usize,
    /// sphere chart-switch threshold as a multiple of the radius
    pub chart_switch_margin: f64,
    pub record_stride: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            dt: 2e-3,
            t_max: 1.0,
            seed: 42,
            n_paths: 1000,
            chart_switch_margin: 1.5,
            record_stride: 10,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| {
            Err(MyersError::Config {
                path: format!("sde.{path}"),
                message: message.to_string(),
            })
        };
        if self.dt.is_nan() || self.dt <= 0.0 {
            return bad("dt", "must be positive");
        }
        if self.t_max < self.dt {
            return bad("t_max", "must be at least dt");
        }
        if self.n_paths < 1 {
            return bad("n_paths", "must be at least 1");
        }
        if self.record_stride < 1 {
            return bad("record_stride", "must be at least 1");
        }
        if self.chart_switch_margin.is_nan() || self.chart_switch_margin <= 1.0 {
            return bad("chart_switch_margin", "must exceed 1");
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round().max(1.0) as usize
    }

    pub fn record_times(&self) -> Vec<f64> {
        let n_rec = self.n_steps() / self.record_stride;
        (0..=n_rec)
            .map(|k| (k * self.record_stride) as f64 * self.dt)
            .collect()
    }
}

/// Live state of one trajectory.
#[derive(Debug, Clone)]
pub struct PathState {
    pub point: Point,
    pub t: f64,
    /// columns = g-orthonormal tangent vectors (coordinate components)
    pub frame: Mat2,
    /// accumulated integral of rho^h along the path (trapezoid)
    pub fk_integral: f64,
    /// Hessian-flow matrix in the moving frame
    pub w_matrix: Mat2,
    /// local geometry at `point`, reused by the next step
    local: LocalGeom,
}

#[derive(Debug, Clone)]
struct LocalGeom {
    jet: MetricJet,
    pack: CurvaturePack,
}

fn local_geom(m: &ManifoldModel, h: &ScalarField, p: &Point) -> Result<LocalGeom> {
    Ok(LocalGeom {
        jet: metric_jet(m, p)?,
        pack: curvature_pack(m, h, p)?,
    })
}

/// Drift of the h-Brownian motion: b^i = -1/2 g^{jk} Gamma^i_{jk} + (grad h)^i.
pub fn drift(m: &ManifoldModel, h: &ScalarField, p: &Point) -> Result<[f64; 2]> {
    let lg = local_geom(m, h, p)?;
    Ok(drift_from_local(&lg))
}

fn drift_from_local(lg: &LocalGeom) -> [f64; 2] {
    let mut b = [0.0f64; 2];
    for i in 0..2 {
        let mut contracted = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                contracted += lg.jet.g_inv.m[j][k] * lg.jet.christoffel[i].m[j][k];
            }
        }
        b[i] = -0.5 * contracted + lg.pack.grad_h[i];
    }
    b
}

/// Initial state: g-orthonormalized canonical frame, identity flow matrix.
pub fn init_state(m: &ManifoldModel, h: &ScalarField, x0: &Point) -> Result<PathState> {
    let local = local_geom(m, h, x0)?;
    let frame = orthonormalize_frame(&local.jet.g, &EYE2);
    Ok(PathState {
        point: *x0,
        t: 0.0,
        frame,
        fk_integral: 0.0,
        w_matrix: EYE2,
        local,
    })
}

/// One Euler-Maruyama step, including the Hessian-flow update, first-order
/// frame transport, chart normalization, re-orthonormalization, and the
/// trapezoidal Feynman-Kac increment.
pub fn step(
    m: &ManifoldModel,
    h: &ScalarField,
    state: &mut PathState,
    dt: f64,
    switch_threshold: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let xi0: f64 = StandardNormal.sample(rng);
    let xi1: f64 = StandardNormal.sample(rng);

    let b = drift_from_local(&state.local);
    let noise = state.frame.matvec([xi0, xi1]);
    let sqdt = dt.sqrt();
    let dx = [b[0] * dt + sqdt * noise[0], b[1] * dt + sqdt * noise[1]];

    // Hessian flow advances with the frame-expressed matrix at the old point
    let a_frame = flows::flow_matrix(&state.local.pack, &state.frame);
    state.w_matrix = flows::flow_update(&state.w_matrix, &a_frame, dt);

    // first-order parallel transport along dx, in the old chart
    let gamma = &state.local.jet.christoffel;
    let mut moved = state.frame;
    for col in 0..2 {
        let v = [state.frame.m[0][col], state.frame.m[1][col]];
        for k in 0..2 {
            let mut corr = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    corr += gamma[k].m[i][j] * dx[i] * v[j];
                }
            }
            moved.m[k][col] -= corr;
        }
    }

    let raw = Point::new(
        state.point.chart,
        state.point.coords[0] + dx[0],
        state.point.coords[1] + dx[1],
    );
    let (new_point, switched_frame) = m.normalize_after_step(&raw, &moved, switch_threshold)?;

    let rho_old = state.local.pack.rho_h;
    let local_new = local_geom(m, h, &new_point)?;
    let frame = orthonormalize_frame(&local_new.jet.g, &switched_frame);

    state.fk_integral += 0.5 * (rho_old + local_new.pack.rho_h) * dt;
    state.point = new_point;
    state.frame = frame;
    state.local = local_new;
    state.t += dt;
    Ok(())
}

/// Current curvature floor at the path position (cached by the stepper).
pub fn current_rho(state: &PathState) -> f64 {
    state.local.pack.rho_h
}

// ---------------------------------------------------------------------------
// ensembles
// ---------------------------------------------------------------------------

/// What to record along the ensemble, besides the always-on Feynman-Kac
/// weight and Hessian-flow norm.
#[derive(Clone, Copy, Default)]
pub struct ObservableSpec<'a> {
    /// scalar observable f(x_t)
    pub f: Option<&'a ScalarField>,
    /// exact one-form pairing df(W_t v0) for the given start vector
    pub one_form: Option<([f64; 2], &'a ScalarField)>,
    /// accumulate the pathwise time integral of the FK weight
    pub integrate_fk: bool,
}

/// Per-time Monte Carlo means and standard errors, reduced in path order.
#[derive(Debug, Clone, Default)]
pub struct EnsembleRecord {
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub excluded: usize,
    pub f_mean: Vec<f64>,
    pub f_stderr: Vec<f64>,
    pub fk_mean: Vec<f64>,
    pub fk_stderr: Vec<f64>,
    pub w_mean: Vec<f64>,
    pub w_stderr: Vec<f64>,
    pub pairing_mean: Vec<f64>,
    pub pairing_stderr: Vec<f64>,
    /// pathwise trapezoid of the FK weight over [0, t_max]
    pub u1_mean: f64,
    pub u1_stderr: f64,
}

const SLOTS: usize = 8;

#[derive(Clone)]
struct BatchAccum {
    slot_sums: Vec<[f64; SLOTS]>,
    u1_sum: f64,
    u1_sq: f64,
    included: usize,
    excluded: usize,
}

fn mean_stderr(s1: f64, s2: f64, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = s1 / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((s2 - s1 * s1 / n as f64) / (n as f64 - 1.0)).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// Sample `cfg.n_paths` trajectories from `x0` and reduce the recorded
/// functionals. Identical seeds give bit-identical records regardless of
/// the rayon worker count.
pub fn sample_functionals(
    m: &ManifoldModel,
    h: &ScalarField,
    x0: &Point,
    spec: ObservableSpec<'_>,
    cfg: &SamplerConfig,
) -> Result<EnsembleRecord> {
    cfg.validate()?;
    let times = cfg.record_times();
    let n_rec = times.len();
    let n_steps = cfg.n_steps();

    // the initial frame is deterministic, so the frame coordinates of the
    // one-form start vector are fixed across paths
    let init = init_state(m, h, x0)?;
    let a0 = spec.one_form.map(|(v0, _)| init.frame.solve(v0));

    let n_batches = cfg.n_paths.div_ceil(BATCH);
    let batches: Vec<Result<BatchAccum>> = (0..n_batches)
        .into_par_iter()
        .map(|bi| {
            let lo = bi * BATCH;
            let hi = ((bi + 1) * BATCH).min(cfg.n_paths);
            let mut acc = BatchAccum {
                slot_sums: vec![[0.0; SLOTS]; n_rec],
                u1_sum: 0.0,
                u1_sq: 0.0,
                included: 0,
                excluded: 0,
            };
            'path: for p in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(p as u64);
                let mut state = init_state(m, h, x0)?;
                let mut path_slots = vec![[0.0f64; 4]; n_rec];
                let mut u1_acc = 0.0f64;
                let mut fkw_prev = 1.0f64;

                let record =
                    |slot: &mut [f64; 4], state: &PathState| -> Result<()> {
                        let fkw = flows::fk_weight(state);
                        slot[1] = fkw;
                        slot[2] = state.w_matrix.op_norm();
                        if let Some(f) = spec.f {
                            slot[0] = f.eval(m, &state.point)?;
                        }
                        if let Some((_, f)) = spec.one_form {
                            let partials =
                                crate::geometry::field_partials(m, f, &state.point)?;
                            let wv = state.w_matrix.matvec(a0.unwrap());
                            let tangent = state.frame.matvec(wv);
                            slot[3] = partials[0] * tangent[0] + partials[1] * tangent[1];
                        }
                        Ok(())
                    };

                if record(&mut path_slots[0], &state).is_err() {
                    acc.excluded += 1;
                    continue 'path;
                }
                for k in 1..=n_steps {
                    match step(m, h, &mut state, cfg.dt, cfg.chart_switch_margin, &mut rng) {
                        Ok(()) => {}
                        Err(MyersError::Domain { .. }) => {
                            acc.excluded += 1;
                            continue 'path;
                        }
                        Err(other) => return Err(other),
                    }
                    if spec.integrate_fk {
                        let fkw = flows::fk_weight(&state);
                        u1_acc += 0.5 * (fkw_prev + fkw) * cfg.dt;
                        fkw_prev = fkw;
                    }
                    if k % cfg.record_stride == 0 {
                        let slot_idx = k / cfg.record_stride;
                        if record(&mut path_slots[slot_idx], &state).is_err() {
                            acc.excluded += 1;
                            continue 'path;
                        }
                    }
                }
                // path completed: fold its records into the batch sums
                acc.included += 1;
                for (sums, vals) in acc.slot_sums.iter_mut().zip(&path_slots) {
                    for ob in 0..4 {
                        sums[2 * ob] += vals[ob];
                        sums[2 * ob + 1] += vals[ob] * vals[ob];
                    }
                }
                acc.u1_sum += u1_acc;
                acc.u1_sq += u1_acc * u1_acc;
            }
            Ok(acc)
        })
        .collect();

    // order-deterministic reduction
    let mut total = BatchAccum {
        slot_sums: vec![[0.0; SLOTS]; n_rec],
        u1_sum: 0.0,
        u1_sq: 0.0,
        included: 0,
        excluded: 0,
    };
    for acc in batches {
        let acc = acc?;
        for (t, b) in total.slot_sums.iter_mut().zip(&acc.slot_sums) {
            for s in 0..SLOTS {
                t[s] += b[s];
            }
        }
        total.u1_sum += acc.u1_sum;
        total.u1_sq += acc.u1_sq;
        total.included += acc.included;
        total.excluded += acc.excluded;
    }

    if total.excluded * 1000 > cfg.n_paths {
        return Err(MyersError::TooManyExcludedPaths {
            count: total.excluded,
            total: cfg.n_paths,
            percent: 100.0 * total.excluded as f64 / cfg.n_paths as f64,
        });
    }

    let n = total.included;
    let mut rec = EnsembleRecord {
        times,
        n_paths: n,
        excluded: total.excluded,
        ..Default::default()
    };
    for sums in &total.slot_sums {
        let (fm, fs) = mean_stderr(sums[0], sums[1], n);
        let (km, ks) = mean_stderr(sums[2], sums[3], n);
        let (wm, ws) = mean_stderr(sums[4], sums[5], n);
        let (pm, ps) = mean_stderr(sums[6], sums[7], n);
        if spec.f.is_some() {
            rec.f_mean.push(fm);
            rec.f_stderr.push(fs);
        }
        rec.fk_mean.push(km);
        rec.fk_stderr.push(ks);
        rec.w_mean.push(wm);
        rec.w_stderr.push(ws);
        if spec.one_form.is_some() {
            rec.pairing_mean.push(pm);
            rec.pairing_stderr.push(ps);
        }
    }
    if spec.integrate_fk {
        let (um, us) = mean_stderr(total.u1_sum, total.u1_sq, n);
        rec.u1_mean = um;
        rec.u1_stderr = us;
    }
    Ok(rec)
}

/// Rows of one dumped path at the record stride, for the CSV writers.
pub struct PathDumpRow {
    pub t: f64,
    pub chart: usize,
    pub u: f64,
    pub v: f64,
    pub rho_h: f64,
    pub fk_weight: f64,
    pub w_norm: f64,
}

pub fn dump_path(
    m: &ManifoldModel,
    h: &ScalarField,
    x0: &Point,
    cfg: &SamplerConfig,
    path_index: usize,
) -> Result<Vec<PathDumpRow>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path_index as u64);
    let mut state = init_state(m, h, x0)?;
    let mut rows = Vec::new();
    let push = |rows: &mut Vec<PathDumpRow>, state: &PathState| {
        rows.push(PathDumpRow {
            t: state.t,
            chart: state.point.chart,
            u: state.point.coords[0],
            v: state.point.coords[1],
            rho_h: current_rho(state),
            fk_weight: flows::fk_weight(state),
            w_norm: state.w_matrix.op_norm(),
        });
    };
    push(&mut rows, &state);
    for k in 1..=cfg.n_steps() {
        step(m, h, &mut state, cfg.dt, cfg.chart_switch_margin, &mut rng)?;
        if k % cfg.record_stride == 0 {
            push(&mut rows, &state);
        }
    }
    Ok(rows)
}
