mod common;

use common::*;
use maris::linalg::{hermitian_eigen, min_eigenvalue, CMat, CVec, C64};
use maris::solver::*;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn embedding_of_identity_is_identity() {
    let e = hermitian_to_real_embedding(&CMat::identity(3, 3)).unwrap();
    assert_eq!(e, DMatrix::identity(6, 6));
}

#[test]
fn embedding_of_pauli_y() {
    let x = CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(0.0, 0.0)]);
    let e = hermitian_to_real_embedding(&x).unwrap();
    let ev = sorted(SymmetricEigen::new(e).eigenvalues.iter().copied().collect());
    let want = [-1.0, -1.0, 1.0, 1.0];
    for (a, b) in ev.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn embedding_spectrum_is_doubled() {
    let mut r = rng(5);
    for n in 1..=6 {
        let x = hermitian(&mut r, n);
        let e = hermitian_to_real_embedding(&x).unwrap();
        let got = sorted(SymmetricEigen::new(e.clone()).eigenvalues.iter().copied().collect());
        let (vals, _) = hermitian_eigen(&x);
        let want = sorted(vals.iter().flat_map(|&v| [v, v]).collect());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((e.trace() - 2.0 * x.trace().re).abs() < 1e-12);
        assert_eq!(min_eigenvalue(&x) >= 0.0, got[0] >= 0.0);
    }
}

#[test]
fn embedding_rejects_non_hermitian() {
    let mut x = CMat::identity(2, 2);
    x[(0, 1)] = C64::new(0.5, 0.0);
    assert_eq!(hermitian_to_real_embedding(&x), Err(SolverError::NotHermitian));
}

#[test]
fn min_trace_with_unit_corner_complex() {
    let mut p = ConicProgram::new();
    let x = HermitianVar::new(&mut p, 3);
    for (v, c) in x.trace_coeffs_identity() {
        p.set_objective(v, -c);
    }
    p.add_linear(LinearConstraint::new(vec![(x.diag(0), 1.0)], Relation::Equal, 1.0));
    p.add_psd(x.psd_block());
    let r = solve_sdp(&p, &SolverSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((-r.objective - 1.0).abs() < 1e-6);
}

#[test]
fn trace_budget_gives_largest_eigenvalue() {
    let mut r = rng(6);
    for n in [2, 3, 5] {
        let c = hermitian(&mut r, n);
        let mut p = ConicProgram::new();
        let x = HermitianVar::new(&mut p, n);
        for (v, w) in x.trace_coeffs(&c) {
            p.set_objective(v, w);
        }
        p.add_linear(LinearConstraint::new(x.trace_coeffs_identity(), Relation::LessEq, 1.0));
        p.add_psd(x.psd_block());
        let rep = solve_sdp(&p, &SolverSettings::default()).unwrap();
        let (lmax, _) = leading_eigvec(&c);
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!((rep.objective - lmax.max(0.0)).abs() < 1e-6, "{} vs {lmax}", rep.objective);
        assert!(rep.relative_gap <= 1e-6);
    }
}

/// `X = ½(I + xσx + yσy + zσz)` for a point of the unit ball.
fn bloch(x: f64, y: f64, z: f64) -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[C64::new(0.5 * (1.0 + z), 0.0), C64::new(0.5 * x, -0.5 * y), C64::new(0.5 * x, 0.5 * y), C64::new(0.5 * (1.0 - z), 0.0)],
    )
}

fn tr(a: &CMat, x: &CMat) -> f64 {
    (a * x).trace().re
}

/// Maximizes `tr(C X)` over unit-trace 2×2 PSD `X` with `tr(A X) ≤ b`.
///
/// The feasible set is the Bloch ball cut by a half-space, so the optimum
/// lies on the sphere or on the circle where the plane meets it; both are
/// searched on grids and the best point is refined by zooming in.
fn bloch_grid_oracle(c: &CMat, a: &CMat, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let f = |x: f64, y: f64, z: f64| {
        let m = bloch(x, y, z);
        if tr(a, &m) <= b {
            tr(c, &m)
        } else {
            f64::NEG_INFINITY
        }
    };
    let sphere = |th: f64, ph: f64| f(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
    let mut best = f64::NEG_INFINITY;
    let (mut bt, mut bp) = (0.0, 0.0);
    let n = 400;
    for i in 0..=n {
        for j in 0..2 * n {
            let (th, ph) = (pi * i as f64 / n as f64, pi * j as f64 / n as f64);
            let v = sphere(th, ph);
            if v > best {
                (best, bt, bp) = (v, th, ph);
            }
        }
    }
    let mut span = pi / n as f64;
    for _ in 0..8 {
        let (ct, cp) = (bt, bp);
        for i in -20..=20 {
            for j in -20..=20 {
                let (th, ph) = (ct + span * i as f64 / 20.0, cp + span * j as f64 / 20.0);
                let v = sphere(th, ph);
                if v > best {
                    (best, bt, bp) = (v, th, ph);
                }
            }
        }
        span /= 10.0;
    }
    // Plane tr(A X) = b in Bloch coordinates: ½(tr A + α·r) = b.
    let alpha = nalgebra::Vector3::new(
        tr(a, &bloch(1.0, 0.0, 0.0)) - tr(a, &bloch(0.0, 0.0, 0.0)),
        tr(a, &bloch(0.0, 1.0, 0.0)) - tr(a, &bloch(0.0, 0.0, 0.0)),
        tr(a, &bloch(0.0, 0.0, 1.0)) - tr(a, &bloch(0.0, 0.0, 0.0)),
    );
    let offset = b - tr(a, &bloch(0.0, 0.0, 0.0));
    let an = alpha.norm();
    if an > 0.0 && (offset / an).abs() < 1.0 {
        let nrm = alpha / an;
        let center = nrm * (offset / an);
        let radius = (1.0 - (offset / an).powi(2)).sqrt();
        let helper = if nrm.x.abs() < 0.9 { nalgebra::Vector3::x() } else { nalgebra::Vector3::y() };
        let e1 = nrm.cross(&helper).normalize();
        let e2 = nrm.cross(&e1);
        let g = |s: f64| {
            let p = center + (e1 * s.cos() + e2 * s.sin()) * radius;
            tr(c, &bloch(p.x, p.y, p.z))
        };
        let mut bs = 0.0;
        let mut bv = f64::NEG_INFINITY;
        for i in 0..20_000 {
            let s = 2.0 * pi * i as f64 / 20_000.0;
            if g(s) > bv {
                (bv, bs) = (g(s), s);
            }
        }
        let mut span = 2.0 * pi / 20_000.0;
        for _ in 0..6 {
            let cs = bs;
            for i in -20..=20 {
                let s = cs + span * i as f64 / 20.0;
                if g(s) > bv {
                    (bv, bs) = (g(s), s);
                }
            }
            span /= 10.0;
        }
        best = best.max(bv);
    }
    best
}

#[test]
fn small_sdp_matches_bloch_grid() {
    let mut r = rng(7);
    for _ in 0..5 {
        let c = hermitian(&mut r, 2);
        let a = hermitian(&mut r, 2);
        let (lo, hi) = (min_eigenvalue(&a), leading_eigvec(&a).0);
        let b = lo + r.random_range(0.2..0.9) * (hi - lo);
        let mut p = ConicProgram::new();
        let x = HermitianVar::new(&mut p, 2);
        for (v, w) in x.trace_coeffs(&c) {
            p.set_objective(v, w);
        }
        p.add_linear(LinearConstraint::new(x.trace_coeffs_identity(), Relation::Equal, 1.0));
        p.add_linear(LinearConstraint::new(x.trace_coeffs(&a), Relation::LessEq, b));
        p.add_psd(x.psd_block());
        let rep = solve_sdp(&p, &SolverSettings::default()).unwrap();
        let oracle = bloch_grid_oracle(&c, &a, b);
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!((rep.objective - oracle).abs() <= 1e-5, "solver {} grid {oracle}", rep.objective);
    }
}

#[test]
fn qcp_linear_bound() {
    let mut p = ConicProgram::new();
    let chi = p.add_var();
    p.set_objective(chi, 1.0);
    p.add_linear(LinearConstraint::new(vec![(chi, 1.0)], Relation::LessEq, 3.0));
    let rep = solve_qcp(&p, &SolverSettings::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((rep.objective - 3.0).abs() < 1e-6);
}

#[test]
fn qcp_quadratic_vertex() {
    let t0 = [-0.4, 0.25];
    let mut p = ConicProgram::new();
    let chi = p.add_var();
    let t = p.add_vars(2);
    p.set_objective(chi, 1.0);
    p.add_quadratic(QuadraticConstraint {
        vars: t.clone(),
        quad: DMatrix::identity(2, 2),
        linear: vec![(chi, 1.0), (t[0], -2.0 * t0[0]), (t[1], -2.0 * t0[1])],
        constant: -1.0 + t0[0] * t0[0] + t0[1] * t0[1],
    });
    let rep = solve_qcp(&p, &SolverSettings::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((rep.objective - 1.0).abs() < 1e-6);
    assert!((rep.solution[t[0]] - t0[0]).abs() < 1e-3 && (rep.solution[t[1]] - t0[1]).abs() < 1e-3);
}

#[test]
fn random_concave_qcp_matches_grid() {
    let mut r = rng(8);
    for _ in 0..4 {
        // χ ≤ c_i + g_iᵀ(t − a_i) − (d_i/2)‖t − a_i‖², |t_x|, |t_y| ≤ 1.
        let pieces: Vec<(f64, [f64; 2], [f64; 2], f64)> = (0..3)
            .map(|_| {
                (
                    r.random_range(0.0..1.0),
                    [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)],
                    [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)],
                    r.random_range(0.5..4.0),
                )
            })
            .collect();
        let value = |x: f64, y: f64| {
            pieces
                .iter()
                .map(|(c, g, a, d)| {
                    let (dx, dy) = (x - a[0], y - a[1]);
                    c + g[0] * dx + g[1] * dy - 0.5 * d * (dx * dx + dy * dy)
                })
                .fold(f64::INFINITY, f64::min)
        };
        let mut p = ConicProgram::new();
        let chi = p.add_var();
        let t = p.add_vars(2);
        p.set_objective(chi, 1.0);
        for (c, g, a, d) in &pieces {
            // χ − c − gᵀ(t − a) + (d/2)‖t − a‖² ≤ 0
            p.add_quadratic(QuadraticConstraint {
                vars: t.clone(),
                quad: DMatrix::identity(2, 2) * (0.5 * d),
                linear: vec![(chi, 1.0), (t[0], -g[0] - d * a[0]), (t[1], -g[1] - d * a[1])],
                constant: -c + g[0] * a[0] + g[1] * a[1] + 0.5 * d * (a[0] * a[0] + a[1] * a[1]),
            });
        }
        for &v in &t {
            p.add_linear(LinearConstraint::new(vec![(v, 1.0)], Relation::LessEq, 1.0));
            p.add_linear(LinearConstraint::new(vec![(v, 1.0)], Relation::GreaterEq, -1.0));
        }
        let rep = solve_qcp(&p, &SolverSettings::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        let n = 1000;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                best = best.max(value(-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64));
            }
        }
        assert!(rep.objective >= best - 1e-6);
        assert!((rep.objective - best).abs() <= 1e-3 * best.abs().max(1.0), "qcp {} grid {best}", rep.objective);
        let at = value(rep.solution[t[0]], rep.solution[t[1]]);
        assert!((at - rep.objective).abs() < 1e-5);
    }
}

#[test]
fn failures_are_reported_not_panicked() {
    let mut p = ConicProgram::new();
    let y = p.add_var();
    p.set_objective(y, 1.0);
    p.add_linear(LinearConstraint::new(vec![(y, 1.0)], Relation::GreaterEq, 2.0));
    p.add_linear(LinearConstraint::new(vec![(y, 1.0)], Relation::LessEq, 1.0));
    assert_eq!(solve_sdp(&p, &SolverSettings::default()).unwrap().status, SolveStatus::Infeasible);

    let mut p = ConicProgram::new();
    let y = p.add_var();
    p.set_objective(y, 1.0);
    assert_eq!(solve_sdp(&p, &SolverSettings::default()).unwrap().status, SolveStatus::Unbounded);

    let mut p = ConicProgram::new();
    let x = HermitianVar::new(&mut p, 4);
    let c = hermitian(&mut rng(9), 4);
    for (v, w) in x.trace_coeffs(&c) {
        p.set_objective(v, w);
    }
    p.add_linear(LinearConstraint::new(x.trace_coeffs_identity(), Relation::LessEq, 1.0));
    p.add_psd(x.psd_block());
    let tight = SolverSettings { max_iterations: 2, ..Default::default() };
    assert_eq!(solve_sdp(&p, &tight).unwrap().status, SolveStatus::IterationLimit);

    let mut p = ConicProgram::new();
    let t = p.add_vars(2);
    p.add_quadratic(QuadraticConstraint { vars: t.clone(), quad: -DMatrix::identity(2, 2), linear: vec![], constant: 0.0 });
    assert_eq!(solve_qcp(&p, &SolverSettings::default()).unwrap_err(), SolverError::NotConvex(0));

    let mut p = ConicProgram::new();
    p.add_var();
    p.add_linear(LinearConstraint::new(vec![(7, 1.0)], Relation::LessEq, 1.0));
    assert!(matches!(solve_sdp(&p, &SolverSettings::default()), Err(SolverError::Malformed(_))));
}

#[test]
fn leading_eigvec_examples() {
    let d = CMat::from_diagonal(&CVec::from_vec(vec![C64::new(3.0, 0.0), C64::new(1.0, 0.0)]));
    let (l, u) = leading_eigvec(&d);
    assert!((l - 3.0).abs() < 1e-14);
    assert!((u[0].norm() - 1.0).abs() < 1e-14 && u[1].norm() < 1e-14);

    let mut r = rng(10);
    let v = cvec(&mut r, 5);
    let (l, u) = leading_eigvec(&(&v * v.adjoint()));
    assert!((l - v.norm_squared()).abs() < 1e-12 * l);
    assert!(((u.adjoint() * &v)[(0, 0)].norm() - v.norm()).abs() < 1e-12 * v.norm());

    for n in 1..8 {
        let x = psd(&mut r, n);
        let (l, u) = leading_eigvec(&x);
        assert!((u.norm() - 1.0).abs() < 1e-12);
        assert!((&x * &u - &u * C64::new(l, 0.0)).norm() <= 1e-8 * x.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn embedding_roundtrip_is_identity(seed in 0u64..10_000, n in 1usize..7) {
        let x = hermitian(&mut rng(seed), n);
        let back = real_embedding_to_hermitian(&hermitian_to_real_embedding(&x).unwrap());
        prop_assert!((back - &x).norm() <= 1e-14 * x.norm().max(1.0));
    }

    #[test]
    fn optimal_solutions_are_feasible_in_the_complex_domain(seed in 0u64..10_000, n in 2usize..5) {
        let mut r = rng(seed);
        let c = hermitian(&mut r, n);
        let a = psd(&mut r, n);
        let b = 0.3 * a.trace().re;
        let mut p = ConicProgram::new();
        let x = HermitianVar::new(&mut p, n);
        for (v, w) in x.trace_coeffs(&c) {
            p.set_objective(v, w);
        }
        p.add_linear(LinearConstraint::new(x.trace_coeffs_identity(), Relation::LessEq, 1.0));
        p.add_linear(LinearConstraint::new(x.trace_coeffs(&a), Relation::LessEq, b));
        p.add_psd(x.psd_block());
        let rep = solve_sdp(&p, &SolverSettings::default()).unwrap();
        prop_assert_eq!(rep.status, SolveStatus::Optimal);
        let xm = x.value(&rep.solution);
        prop_assert!(min_eigenvalue(&xm) >= -1e-6);
        prop_assert!(xm.trace().re <= 1.0 + 1e-6);
        prop_assert!((&a * &xm).trace().re <= b + 1e-6);
        prop_assert!(rep.max_violation <= 1e-6);
    }
}
