mod common;

use std::f64::consts::PI;

use common::*;
use maris::channel::{equivalent_user_channel, sample_realization, AntennaLayout, PhaseSolution};
use maris::config::Tolerances;
use maris::linalg::{min_eigenvalue, row_quadratic, CMat, CRow, CVec, C64};
use maris::metrics::{beampattern_gain, sinr, steering_vector, CovarianceSolution};
use maris::solver::{leading_eigvec, SolverSettings};
use maris::srcr::*;
use proptest::prelude::*;
use rand::Rng;

fn quad(v: &CVec, x: &CMat) -> C64 {
    (v.adjoint() * x * v)[(0, 0)]
}

fn random_phase(r: &mut impl Rng, n: usize) -> PhaseSolution {
    PhaseSolution { phases: (0..n).map(|_| r.random_range(-PI..PI)).collect() }
}

#[test]
fn hl_of_zero_covariance_is_zero() {
    let mut r = rng(1);
    let h = cmat(&mut r, 4, 3);
    let (hl, lifted) = build_hl(&h, &CMat::zeros(3, 3), &cvec(&mut r, 4));
    assert_eq!(hl.norm(), 0.0);
    assert_eq!(lifted.shape(), (5, 5));
    assert_eq!(lifted.norm(), 0.0);
}

#[test]
fn hl_single_element_recovers_gain() {
    let h = CMat::from_element(1, 1, C64::new(0.3, -0.4));
    let r = CMat::from_element(1, 1, C64::new(2.0, 0.0));
    let (hl, lifted) = build_hl(&h, &r, &CVec::from_element(1, C64::new(1.0, 0.0)));
    assert!((hl[(0, 0)].re - 2.0 * 0.25).abs() < 1e-15);
    for p in [0.0, 1.3, -2.0] {
        let v = PhaseSolution { phases: vec![p] }.lifted();
        assert!((quad(&v, &lifted).re - 0.5).abs() < 1e-15);
    }
}

#[test]
fn lifted_sensing_matches_beampattern_gain() {
    let cfg = desk(3, 2, 6, 2);
    let real = sample_realization(&cfg, 4);
    let layout = AntennaLayout::upa(3, 0.05);
    let mut r = rng(2);
    let phase = random_phase(&mut r, 6);
    let cov = psd(&mut r, 3);
    let h = maris::channel::bs_ris_channel(&real, &layout).unwrap();
    for th in [-1.0, -0.2, 0.5, 1.4] {
        let a = steering_vector(th, 6, cfg.ris_spacing, cfg.wavelength);
        let (_, lifted) = build_hl(&h, &cov, &a);
        let v = phase.lifted();
        let want = beampattern_gain(&real, &layout, &phase, &cov, th).unwrap();
        assert!((quad(&v, &lifted).re - want).abs() <= 1e-10 * want);
    }
}

#[test]
fn zero_tilde_covariance_makes_the_target_unreachable() {
    let mut r = rng(3);
    let h = cmat(&mut r, 3, 2);
    let rk = psd(&mut r, 2);
    let gamma = 4.0;
    // R = (1 + 1/Γ) R_k makes R̃_k vanish.
    let cov = CovarianceSolution { r: rk.scale(1.0 + 1.0 / gamma), r_k: vec![rk] };
    let w = build_wk(&h, &crow(&mut r, 3), &crow(&mut r, 2), &cov, 0, gamma);
    assert!(w.norm() < 1e-12);
    let (_, hl) = build_hl(&h, &cov.r, &cvec(&mut r, 3));
    assert!(solve_relaxed(&[hl], &[w], &[1e-3], None, &SolverSettings::default()).is_none());
}

#[test]
fn wk_matches_direct_expansion() {
    let cfg = desk(3, 2, 5, 2);
    let real = sample_realization(&cfg, 5);
    let layout = AntennaLayout::upa(3, 0.05);
    let mut r = rng(4);
    let phase = random_phase(&mut r, 5);
    let rk: Vec<CMat> = (0..2).map(|_| psd(&mut r, 3)).collect();
    let cov = CovarianceSolution { r: &rk[0] + &rk[1] + psd(&mut r, 3), r_k: rk };
    let links = maris::channel::Links::new(&real, &layout).unwrap();
    for k in 0..2 {
        let w = build_wk(&links.h, &real.users[k].h2, &links.h1[k], &cov, k, cfg.gamma);
        let hk = equivalent_user_channel(&real, &layout, &phase, k).unwrap();
        let rt = cov.r_k[k].scale(1.0 + 1.0 / cfg.gamma) - &cov.r;
        let want = row_quadratic(&hk, &rt);
        assert!((quad(&phase.lifted(), &w).re - want).abs() <= 1e-10 * rt.norm() * hk.norm_squared());
    }
}

#[test]
fn wk_single_element_single_antenna_block() {
    let h = CMat::from_element(1, 1, C64::new(0.7, 0.2));
    let h2 = CRow::from_element(1, C64::new(-0.1, 0.5));
    let h1 = CRow::from_element(1, C64::new(0.3, 0.3));
    let cov = CovarianceSolution {
        r: CMat::from_element(1, 1, C64::new(1.5, 0.0)),
        r_k: vec![CMat::from_element(1, 1, C64::new(1.0, 0.0))],
    };
    let gamma = 0.5;
    let rt = (1.0 + 1.0 / gamma) * 1.0 - 1.5;
    let g = h2[0] * h[(0, 0)];
    let w = build_wk(&h, &h2, &h1, &cov, 0, gamma);
    assert!((w[(0, 0)] - C64::new(g.norm_sqr() * rt, 0.0)).norm() < 1e-14);
    assert!((w[(1, 1)] - C64::new(h1[0].norm_sqr() * rt, 0.0)).norm() < 1e-14);
    assert!((w[(0, 1)] - g * h1[0].conj() * rt).norm() < 1e-14);
    assert!((w[(1, 0)] - h1[0] * g.conj() * rt).norm() < 1e-14);
}

#[test]
fn rank_one_start_has_zero_residual() {
    let phase = random_phase(&mut rng(5), 6);
    let st = LiftedPhaseState::from_phase(&phase);
    assert!(st.rank_residual().abs() < 1e-12);
    for i in 0..7 {
        assert!((st.v[(i, i)].re - 1.0).abs() < 1e-14);
    }
}

#[test]
fn zero_weight_step_is_the_plain_relaxation() {
    let cfg = desk(4, 2, 6, 2);
    let (_, real, st) = feasible_draws(&cfg, 1, 1).remove(0);
    let pp = phase_problem(&cfg, &real, &st);
    let (hls, wks) = (pp.lifted_sensing(), pp.lifted_users());
    let settings = SolverSettings::default();
    let plain = solve_relaxed(&hls, &wks, &pp.noise, None, &settings).unwrap();
    let mut state = LiftedPhaseState::from_phase(&st.phase);
    state.w = 0.0;
    state.tau = 0.05;
    let (next, obj) = srcr_step(&state, &hls, &wks, &pp.noise, 0.05, &settings);
    assert!(close(obj.unwrap(), plain.objective, 1e-9));
    assert!((&next.v - &plain.v).norm() <= 1e-6 * plain.v.norm());
    assert_eq!(next.tau, 0.05);
}

#[test]
fn iterates_keep_unit_diagonal_and_stay_psd() {
    let cfg = desk(4, 2, 6, 2);
    let (_, real, st) = feasible_draws(&cfg, 1, 1).remove(0);
    let pp = phase_problem(&cfg, &real, &st);
    let (hls, wks) = (pp.lifted_sensing(), pp.lifted_users());
    let settings = SolverSettings::default();
    let mut state = LiftedPhaseState::from_phase(&st.phase);
    state.tau = 0.05;
    for _ in 0..12 {
        let (next, obj) = srcr_step(&state, &hls, &wks, &pp.noise, 0.05, &settings);
        match obj {
            Some(_) => assert_eq!(next.tau, 0.05),
            None => assert_eq!(next.tau, 0.5 * state.tau),
        }
        for i in 0..7 {
            assert!((next.v[(i, i)].re - 1.0).abs() < 1e-6);
        }
        assert!(min_eigenvalue(&next.v) >= -1e-6);
        assert!(next.w <= 1.0);
        state = next;
    }
}

#[test]
fn full_weight_forces_rank_one() {
    let cfg = desk(4, 2, 6, 2);
    let (_, real, st) = feasible_draws(&cfg, 1, 1).remove(0);
    let pp = phase_problem(&cfg, &real, &st);
    let (hls, wks) = (pp.lifted_sensing(), pp.lifted_users());
    let settings = SolverSettings::default();
    // Anchor the constraint at the current phases, which are feasible.
    let v = st.phase.lifted();
    let (_, u) = leading_eigvec(&(&v * v.adjoint()));
    if let Some(s) = solve_relaxed(&hls, &wks, &pp.noise, Some((&u, 1.0)), &settings) {
        assert!(rank_residual(&s.v) <= 1e-5, "residual {}", rank_residual(&s.v));
    }
}

#[test]
fn single_element_phase_is_already_optimal() {
    let cfg = desk(4, 2, 1, 2);
    let (_, real, st) = feasible_draws(&cfg, 1, 1).remove(0);
    let mut pp = phase_problem(&cfg, &real, &st);
    // Without users the single phase cannot change any gain.
    pp.h2.clear();
    pp.h1.clear();
    pp.noise.clear();
    pp.cov.r_k.clear();
    let incoming = PhaseSolution { phases: vec![0.8] };
    let out = optimize_phase(&pp, &incoming, &Tolerances::default(), &SolverSettings::default());
    assert!(close(out.min_gain, pp.min_gain(&incoming), 1e-9));
}

#[test]
fn two_elements_match_the_phase_grid() {
    let cfg = desk(4, 2, 2, 2);
    for (_, real, st) in feasible_draws(&cfg, 1, 2) {
        let pp = phase_problem(&cfg, &real, &st);
        let out = optimize_phase(&pp, &st.phase, &Tolerances::default(), &SolverSettings::default());
        let (grid, g1, g2) = phase_grid(&pp, (0.0, 0.0), PI, 720).unwrap();
        let half_step = PI / 720.0;
        let (fine_g, _, _) = phase_grid(&pp, (g1, g2), half_step, 101).unwrap();
        let (fine_s, _, _) = phase_grid(&pp, (out.phase.phases[0], out.phase.phases[1]), half_step, 101)
            .unwrap_or((f64::NEG_INFINITY, 0.0, 0.0));
        let refined = grid.max(fine_g).max(fine_s);
        assert!(out.min_gain >= grid * (1.0 - 1e-3), "srcr {:e} grid {grid:e}", out.min_gain);
        assert!(close(out.min_gain, refined, 1e-3), "srcr {:e} refined {refined:e}", out.min_gain);
    }
}

#[test]
fn eight_elements_postconditions() {
    let cfg = desk(4, 2, 8, 2);
    let tol = Tolerances::default();
    for (_, real, st) in feasible_draws(&cfg, 1, 2) {
        let pp = phase_problem(&cfg, &real, &st);
        let out = optimize_phase(&pp, &st.phase, &tol, &SolverSettings::default());
        assert!(out.min_gain >= pp.min_gain(&st.phase));
        assert!(pp.sinr_ok(&out.phase, 1e-6));
        if out.status == PhaseStatus::Converged {
            assert!(out.rank_residual <= tol.srcr_eps);
        }
        for (k, h) in pp.user_rows(&out.phase).iter().enumerate() {
            let direct = sinr(&real, &st.layout, &out.phase, &st.cov, k, cfg.noise).unwrap();
            let via_rows = maris::metrics::sinr_from_row(h, &st.cov, k, cfg.noise).unwrap();
            assert!(close(direct, via_rows, 1e-9));
        }
        // The recovered unit-modulus vector reproduces the lifted objective.
        let v = out.phase.lifted();
        let (lmax, _) = leading_eigvec(&out.lifted);
        let slack = out.lifted.trace().re - lmax;
        for hl in pp.lifted_sensing() {
            let lifted_value = (&hl * &out.lifted).trace().re;
            let gap = (quad(&v, &hl).re - lifted_value).abs();
            if out.status != PhaseStatus::KeptIncoming {
                assert!(gap <= hl.norm() * slack.max(0.0) + 1e-9 * lifted_value.abs(), "gap {gap:e}, bound {:e}", hl.norm() * slack);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wk_constraint_is_the_sinr_target(seed in 0u64..1000, gamma_db in -5.0f64..15.0) {
        let cfg = desk(3, 2, 4, 2);
        let real = sample_realization(&cfg, seed);
        let layout = AntennaLayout::upa(3, 0.05);
        let mut r = rng(seed);
        let phase = random_phase(&mut r, 4);
        let rk: Vec<CMat> = (0..2).map(|_| { let w = cvec(&mut r, 3); &w * w.adjoint() }).collect();
        let cov = CovarianceSolution { r: &rk[0] + &rk[1] + psd(&mut r, 3).scale(0.1), r_k: rk };
        let links = maris::channel::Links::new(&real, &layout).unwrap();
        let gamma = 10f64.powf(gamma_db / 10.0);
        for k in 0..2 {
            let hk = equivalent_user_channel(&real, &layout, &phase, k).unwrap();
            let noise = 0.3 * row_quadratic(&hk, &cov.r_k[k]);
            let w = build_wk(&links.h, &real.users[k].h2, &links.h1[k], &cov, k, gamma);
            let lhs = quad(&phase.lifted(), &w).re;
            let s = sinr(&real, &layout, &phase, &cov, k, noise).unwrap();
            if (lhs - noise).abs() > 1e-9 * noise {
                prop_assert_eq!(lhs >= noise, s >= gamma);
            }
        }
    }
}
