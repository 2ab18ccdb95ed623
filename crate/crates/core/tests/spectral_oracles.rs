//! Spectral-engine checks against closed-form spectra: the flat-torus
//! Fourier eigenvalues, the spherical-harmonic ladder, operator structure
//! (w-symmetry, constants in the kernel, negative semidefiniteness), the
//! resolvent identity, and the spectral-shift smoke test.

use myers_core::geometry::{ManifoldModel, ScalarField};
use myers_core::spectral::{
    build_operator, potential_resolvent, semigroup_apply, top_eigen, top_eigenvalues_plain,
};

const TAU: f64 = std::f64::consts::TAU;

fn torus() -> ManifoldModel {
    ManifoldModel::flat_torus(TAU, TAU)
}

#[test]
fn torus_spectrum_matches_fourier_ladder() {
    let m = torus();
    let op = build_operator(&m, &ScalarField::zero(), 64, 0, 0.0).unwrap();
    // eigenvalues of L approach -(j^2 + k^2); top of the ladder:
    // 0, -1 (x4), -2 (x4), ... and top_eigenvalues_plain returns 1/2 L values
    let eigs = top_eigenvalues_plain(&op, 6).unwrap();
    let expected_l = [0.0, -1.0, -1.0, -1.0, -1.0, -2.0];
    for (got, want) in eigs.iter().zip(expected_l) {
        let got_l = 2.0 * got;
        assert!(
            (got_l - want).abs() <= 0.001 * want.abs().max(1e-6),
            "eigenvalue {got_l} vs {want}"
        );
    }
}

#[test]
fn operator_structure_invariants() {
    use myers_core::expr::ScalarFieldExpr;
    let bumpy = ManifoldModel::expression_metric(
        "bumpy",
        TAU,
        TAU,
        ScalarFieldExpr::parse("1+0.3*cos(u)").unwrap(),
        ScalarFieldExpr::parse("0.1*sin(u)*sin(v)").unwrap(),
        ScalarFieldExpr::parse("1+0.3*sin(v)").unwrap(),
    );
    let h = ScalarField::parse("0.2*sin(v)").unwrap();
    for (m, h) in [
        (torus(), ScalarField::parse("0.5*cos(u)").unwrap()),
        (bumpy, h),
        (ManifoldModel::sphere(1.0), ScalarField::parse("0.3*z").unwrap()),
    ] {
        let (res, sub) = (32, 3);
        let op = build_operator(&m, &h, res, sub, 0.0).unwrap();
        let n = op.n();
        // L kills constants
        let ones = vec![1.0; n];
        let l_one = op.apply_lap(&ones);
        let sup = l_one.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(sup < 1e-10, "L 1 = {sup:e} on {}", m.name);
        // w-symmetry and negative semidefiniteness on pseudo-random fields
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut unit = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..5 {
            let f: Vec<f64> = (0..n).map(|_| unit()).collect();
            let g: Vec<f64> = (0..n).map(|_| unit()).collect();
            let lf = op.apply_lap(&f);
            let lg = op.apply_lap(&g);
            let asym = (op.w_inner(&lf, &g) - op.w_inner(&f, &lg)).abs();
            let scale = op.w_norm(&f) * op.w_norm(&g);
            assert!(asym <= 1e-10 * scale, "asymmetry {asym:e} on {}", m.name);
            let quad = op.w_inner(&lf, &f);
            assert!(quad <= 1e-10 * scale, "positive quadratic form {quad:e} on {}", m.name);
        }
    }
}

#[test]
fn sphere_spectrum_matches_spherical_harmonics_subdivision_4() {
    // faster pre-check at subdivision 4; the acceptance suite re-runs this
    // at subdivision 5 with the 1% contract
    let m = ManifoldModel::sphere(1.0);
    let op = build_operator(&m, &ScalarField::zero(), 64, 4, 0.0).unwrap();
    let eigs = top_eigenvalues_plain(&op, 9).unwrap();
    let mut expected = vec![0.0];
    expected.extend(std::iter::repeat_n(-2.0, 3));
    expected.extend(std::iter::repeat_n(-6.0, 5));
    for (got, want) in eigs.iter().zip(&expected) {
        let got_l = 2.0 * got;
        assert!(
            (got_l - want).abs() <= 0.02 * want.abs().max(1e-3),
            "eigenvalue {got_l} vs {want}"
        );
    }
}

#[test]
fn unit_sphere_top_eigen_and_resolvent_closed_forms() {
    let m = ManifoldModel::sphere(1.0);
    let op = build_operator(&m, &ScalarField::zero(), 64, 4, 0.0).unwrap();
    let eig = top_eigen(&op).unwrap();
    // rho = 1: mu_top = -1/2 exactly (constants shift by the potential)
    assert!((eig.mu_top + 0.5).abs() < 1e-6, "mu_top {}", eig.mu_top);
    assert!((eig.lambda0 + 1.0).abs() < 1e-6);
    let u1 = potential_resolvent(&op, &eig).unwrap();
    for v in &u1 {
        assert!((v - 2.0).abs() < 1e-6, "U1 {v}");
    }
    // resolvent identity: (diag rho - L) u / 2 = 1
    let lu = op.apply_lap(&u1);
    for i in 0..op.n() {
        let back = 0.5 * (op.rho[i] * u1[i] - lu[i]);
        assert!((back - 1.0).abs() < 1e-8, "resolvent identity {back}");
    }
}

#[test]
fn torus_criterion_fails_and_resolvent_refuses() {
    let m = torus();
    let op = build_operator(&m, &ScalarField::zero(), 32, 0, 0.0).unwrap();
    let eig = top_eigen(&op).unwrap();
    assert!(eig.mu_top.abs() < 1e-8, "flat torus mu_top {}", eig.mu_top);
    assert!(potential_resolvent(&op, &eig).is_err());
}

#[test]
fn semigroup_oracles() {
    let m = ManifoldModel::sphere(1.0);
    let op = build_operator(&m, &ScalarField::zero(), 64, 4, 0.0).unwrap();
    let n = op.n();
    // t = 0 is the identity
    let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
    let f0 = semigroup_apply(&op, &f, 0.0, false).unwrap();
    assert_eq!(f, f0);
    // constants are preserved (stochastic completeness)
    let ones = vec![1.0; n];
    let pt1 = semigroup_apply(&op, &ones, 1.7, false).unwrap();
    for v in &pt1 {
        assert!((v - 1.0).abs() < 1e-9);
    }
    // f = z decays like e^{-t} (l = 1 harmonic)
    let z = ScalarField::parse("z").unwrap();
    let z_nodes = op.node_field(&m, &z).unwrap();
    let t = 1.0;
    let pz = semigroup_apply(&op, &z_nodes, t, false).unwrap();
    let decay = (-t).exp();
    let mut worst = 0.0f64;
    for (a, b) in pz.iter().zip(&z_nodes) {
        worst = worst.max((a - decay * b).abs());
    }
    assert!(worst < 0.01, "z decay error {worst}");
    // positivity is preserved within round-off
    let nonneg: Vec<f64> = z_nodes.iter().map(|v| v.max(0.0)).collect();
    let evolved = semigroup_apply(&op, &nonneg, 0.5, false).unwrap();
    let min = evolved.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    assert!(min >= -1e-10, "positivity violated: {min}");
}

#[test]
fn rho_shift_moves_lambda0_exactly() {
    let m = ManifoldModel::sphere(1.0);
    let h = ScalarField::parse("0.3*z").unwrap();
    let base = build_operator(&m, &h, 32, 3, 0.0).unwrap();
    let shifted = build_operator(&m, &h, 32, 3, 0.25).unwrap();
    let e0 = top_eigen(&base).unwrap();
    let e1 = top_eigen(&shifted).unwrap();
    assert!(
        ((e1.lambda0 - e0.lambda0) + 0.25).abs() < 1e-8,
        "shift moved lambda0 by {}",
        e1.lambda0 - e0.lambda0
    );
}

#[test]
fn spectral_convergence_of_lambda0_on_the_torus_family() {
    let m = torus();
    let h = ScalarField::parse("0.5*cos(u)").unwrap();
    let lam = |res: usize| {
        let op = build_operator(&m, &h, res, 0, 0.0).unwrap();
        top_eigen(&op).unwrap().lambda0
    };
    let (l32, l64, l128) = (lam(32), lam(64), lam(128));
    let scale = l128.abs().max(1e-6);
    assert!(
        (l64 - l128).abs() / scale < 0.01,
        "lambda0 not converged: {l32} {l64} {l128}"
    );
}
