//! Orchestrator-level checks: the trivial cases of the integration-by-parts
//! inequality, the degenerate Witten check, the t = 0 one-form identity,
//! and off-node evaluation round trips.

use myers_core::criterion::{bakry_inequality_check, eval_node_field_at, exp_map};
use myers_core::geometry::{field_partials, ManifoldModel, Point, ScalarField};
use myers_core::sde::{init_state, sample_functionals, ObservableSpec, SamplerConfig};
use myers_core::spectral::{build_operator, witten_check};

const TAU: f64 = std::f64::consts::TAU;

#[test]
fn bakry_trivial_cases() {
    let m = ManifoldModel::sphere(1.0);
    let h = ScalarField::zero();
    let op = build_operator(&m, &h, 32, 3, 0.0).unwrap();
    let u1_sup = 2.0; // exact for rho = 1

    // constant f: P_t f = f so lhs = 0, and grad f = 0 makes rhs = 0
    let f_const = ScalarField::parse("2.5").unwrap();
    let g = ScalarField::parse("z").unwrap();
    let rec = bakry_inequality_check(&m, &op, u1_sup, &f_const, &g, 1.0).unwrap();
    assert!(rec.lhs.abs() < 1e-9, "lhs {}", rec.lhs);
    assert!(rec.rhs.abs() < 1e-12, "rhs {}", rec.rhs);

    // constant g: lhs = <P_t f - f, 1>_w = 0 by mass conservation
    let f = ScalarField::parse("z").unwrap();
    let g_const = ScalarField::parse("1").unwrap();
    let rec = bakry_inequality_check(&m, &op, u1_sup, &f, &g_const, 1.0).unwrap();
    assert!(rec.lhs.abs() < 1e-8, "mass conservation violated: {}", rec.lhs);
    assert!(rec.slack >= -1e-8);
}

#[test]
fn witten_check_is_exact_for_zero_potential() {
    // h = 0 conjugates by 1: both operators are the same matrix
    let m = ManifoldModel::flat_torus(TAU, TAU);
    let w = witten_check(&m, &ScalarField::zero(), 32, 0).unwrap();
    assert!(w.max_eig_mismatch < 1e-9, "mismatch {}", w.max_eig_mismatch);
    assert!(
        w.pointwise_rel_residual < 1e-12,
        "pointwise {}",
        w.pointwise_rel_residual
    );
}

#[test]
fn one_form_pairing_at_time_zero_is_exact() {
    // W_0 = id, so the recorded pairing at t = 0 is df(v0) exactly
    let m = ManifoldModel::flat_torus(TAU, TAU);
    let h = ScalarField::zero();
    let f = ScalarField::parse("cos(u)+0.5*sin(v)").unwrap();
    let x0 = Point::new(0, 1.1, 0.4);
    let init = init_state(&m, &h, &x0).unwrap();
    let v0 = [init.frame.m[0][0], init.frame.m[1][0]];
    let cfg = SamplerConfig {
        dt: 1e-2,
        t_max: 0.1,
        seed: 31,
        n_paths: 8,
        chart_switch_margin: 1.5,
        record_stride: 10,
    };
    let rec = sample_functionals(
        &m,
        &h,
        &x0,
        ObservableSpec {
            one_form: Some((v0, &f)),
            ..Default::default()
        },
        &cfg,
    )
    .unwrap();
    let partials = field_partials(&m, &f, &x0).unwrap();
    let exact = partials[0] * v0[0] + partials[1] * v0[1];
    assert!((rec.pairing_mean[0] - exact).abs() < 1e-12);
    assert_eq!(rec.pairing_stderr[0], 0.0);
}

#[test]
fn exp_map_closed_forms() {
    // sphere: the geodesic from the equator along the meridian reaches the
    // pole after a quarter turn
    let m = ManifoldModel::sphere(1.0);
    let x0 = m.point_from_ambient([1.0, 0.0, 0.0]);
    let init = init_state(&m, &ScalarField::zero(), &x0).unwrap();
    // find the frame combination pointing towards +z
    let e1 = [init.frame.m[0][0], init.frame.m[1][0]];
    let e2 = [init.frame.m[0][1], init.frame.m[1][1]];
    let z_of = |w: [f64; 2], s: f64| {
        let p = exp_map(&m, &x0, [s * w[0], s * w[1]]);
        m.env_at(&p).z.unwrap()
    };
    let dz1 = (z_of(e1, 1e-4) - z_of(e1, -1e-4)) / 2e-4;
    let dz2 = (z_of(e2, 1e-4) - z_of(e2, -1e-4)) / 2e-4;
    // one of the frame directions must be meridional
    let (mer, sign) = if dz1.abs() > dz2.abs() {
        (e1, dz1.signum())
    } else {
        (e2, dz2.signum())
    };
    let quarter = std::f64::consts::FRAC_PI_2;
    let pole = exp_map(&m, &x0, [sign * quarter * mer[0], sign * quarter * mer[1]]);
    let z = m.env_at(&pole).z.unwrap();
    assert!((z - 1.0).abs() < 1e-8, "z after quarter turn: {z}");
    // geodesics preserve arc length: |exp(t v)| from x0 subtends angle t
    let p = exp_map(&m, &x0, [0.3 * mer[0], 0.3 * mer[1]]);
    let a = m.ambient(&p).unwrap();
    let cosang = a[0]; // dot with (1,0,0)
    assert!((cosang - 0.3f64.cos()).abs() < 1e-8);

    // torus: exp is the straight line with wrap
    let t = ManifoldModel::flat_torus(TAU, TAU);
    let p = exp_map(&t, &Point::new(0, 6.0, 0.5), [1.0, 0.0]);
    assert!((p.coords[0] - (7.0 - TAU)).abs() < 1e-12);
}

#[test]
fn node_field_interpolation_reproduces_smooth_fields() {
    // torus grid + trig interpolation
    let m = ManifoldModel::flat_torus(TAU, TAU);
    let f = ScalarField::parse("cos(u)*sin(2*v)").unwrap();
    let op = build_operator(&m, &ScalarField::zero(), 32, 0, 0.0).unwrap();
    let nodes = op.node_field(&m, &f).unwrap();
    for (u, v) in [(0.123, 4.56), (3.0, 0.001)] {
        let got = eval_node_field_at(&m, &op, &nodes, &Point::new(0, u, v));
        let want = f.eval(&m, &Point::new(0, u, v)).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    // sphere mesh + polynomial fit
    let s = ManifoldModel::sphere(1.0);
    let fz = ScalarField::parse("z+0.3*x*y").unwrap();
    let op = build_operator(&s, &ScalarField::zero(), 32, 3, 0.0).unwrap();
    let nodes = op.node_field(&s, &fz).unwrap();
    let probe = s.point_from_ambient([0.48, -0.6, 0.6400000000000001]);
    let got = eval_node_field_at(&s, &op, &nodes, &probe);
    let want = fz.eval(&s, &probe).unwrap();
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
}

#[test]
fn rho_shift_override_stays_consistent_end_to_end() {
    // shifting rho by +1/2 on the flat torus turns lambda0 from 0 into
    // -1/2 and scales every FK weight by e^{-t/4}; the cross-checks must
    // still line up, and the report must flag the fabricated criterion as
    // inconsistent with the infinite-pi1 label
    use myers_core::criterion::{check, CheckConfig};
    let m = ManifoldModel::flat_torus(TAU, TAU);
    let cfg = CheckConfig {
        sampler: SamplerConfig {
            dt: 5e-3,
            t_max: 3.0,
            seed: 7,
            n_paths: 400,
            chart_switch_margin: 1.5,
            record_stride: 10,
        },
        resolution: 32,
        subdivision: 3,
        rho_shift: 0.5,
        probes: None,
    };
    let report = check(&m, &ScalarField::zero(), &cfg).unwrap();
    assert!((report.lambda0 + 0.5).abs() < 1e-6, "lambda0 {}", report.lambda0);
    assert!(report.criterion_holds);
    assert_eq!(report.known_pi1_finite, Some(false));
    assert!(!report.consistency, "a shifted torus criterion must be flagged");
    let u1 = report.u1_spectral.as_ref().unwrap();
    assert!((u1.sup - 4.0).abs() < 1e-6, "U1 sup {}", u1.sup);
    for probe in &report.probes {
        let mc = probe.u1.u1_mc.unwrap();
        assert!((mc - 4.0).abs() < 0.05, "probe U1 {mc}");
    }
    let fk = report
        .identity_checks
        .iter()
        .find(|c| c.name == "feynman_kac")
        .unwrap();
    assert!(fk.passed, "fk check under shift: {}", fk.note);
    let flow_bound = report
        .identity_checks
        .iter()
        .find(|c| c.name == "flow_norm_bound")
        .unwrap();
    assert!(flow_bound.passed && flow_bound.note.contains("skipped"));
}
