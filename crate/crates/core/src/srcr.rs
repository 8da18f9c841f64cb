//! RIS phase design by sequential rank-one constraint relaxation.
//!
//! The phases enter through `v̄ = [vec(Φ*); 1]`. Lifting `V̄ = v̄ v̄ᴴ` turns the
//! sensing gains and SINR constraints into linear functions of `V̄`; the rank
//! condition is replaced by `u_maxᴴ V̄ u_max ≥ w·tr(V̄)` where `u_max` is the
//! leading eigenvector of the previous iterate and `w` climbs toward one.

use serde::Serialize;

use crate::channel::PhaseSolution;
use crate::config::Tolerances;
use crate::linalg::{cis, row_quadratic, trace_product, CMat, CRow, CVec, C64};
use crate::metrics::{sinr_from_row, CovarianceSolution};
use crate::solver::{
    leading_eigvec, solve_sdp, ConicProgram, HermitianVar, LinearConstraint, Relation, SolveStatus, SolverSettings,
};

/// Inputs of the phase subproblem at fixed covariance and layout.
#[derive(Debug, Clone)]
pub struct PhaseProblem {
    /// BS–RIS channel `H`.
    pub h: CMat,
    /// RIS steering vectors `a(θ_l)`.
    pub steering: Vec<CVec>,
    /// `h_{2,k}ᴴ` rows.
    pub h2: Vec<CRow>,
    /// `h_{1,k}ᴴ` rows.
    pub h1: Vec<CRow>,
    pub cov: CovarianceSolution,
    pub gamma: f64,
    pub noise: Vec<f64>,
}

/// `H_l = diag(a*) H R Hᴴ diag(a)` and its zero-bordered lift `H̄_l`.
pub fn build_hl(h: &CMat, r: &CMat, a: &CVec) -> (CMat, CMat) {
    let n = h.nrows();
    let mut left = h.clone();
    for i in 0..n {
        let s = a[i].conj();
        for j in 0..left.ncols() {
            left[(i, j)] *= s;
        }
    }
    let hl = &left * r * left.adjoint();
    let hl = (&hl + hl.adjoint()).scale(0.5);
    let mut lifted = CMat::zeros(n + 1, n + 1);
    lifted.view_mut((0, 0), (n, n)).copy_from(&hl);
    (hl, lifted)
}

/// `[G; h1ᴴ]` with `G = diag(h2ᴴ) H`, so that `h_kᴴ = v̄ᴴ [G; h1ᴴ]`.
pub fn stacked_user_map(h: &CMat, h2: &CRow, h1: &CRow) -> CMat {
    let n = h.nrows();
    let m = h.ncols();
    let mut out = CMat::zeros(n + 1, m);
    for i in 0..n {
        for j in 0..m {
            out[(i, j)] = h2[i] * h[(i, j)];
        }
    }
    for j in 0..m {
        out[(n, j)] = h1[j];
    }
    out
}

/// `W_k`, with `v̄ᴴ W_k v̄ = h_kᴴ ((1+1/Γ) R_k − R) h_k`.
pub fn build_wk(h: &CMat, h2: &CRow, h1: &CRow, cov: &CovarianceSolution, k: usize, gamma: f64) -> CMat {
    let rt = cov.r_k[k].scale(1.0 + 1.0 / gamma) - &cov.r;
    let s = stacked_user_map(h, h2, h1);
    let w = &s * rt * s.adjoint();
    (&w + w.adjoint()).scale(0.5)
}

impl PhaseProblem {
    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn lifted_sensing(&self) -> Vec<CMat> {
        self.steering.iter().map(|a| build_hl(&self.h, &self.cov.r, a).1).collect()
    }

    pub fn lifted_users(&self) -> Vec<CMat> {
        (0..self.h2.len())
            .map(|k| build_wk(&self.h, &self.h2[k], &self.h1[k], &self.cov, k, self.gamma))
            .collect()
    }

    /// Equivalent user rows `h_kᴴ` under `phase`.
    pub fn user_rows(&self, phase: &PhaseSolution) -> Vec<CRow> {
        let d = phase.diagonal();
        self.h2
            .iter()
            .zip(&self.h1)
            .map(|(h2, h1)| {
                let w = CRow::from_iterator(h2.len(), h2.iter().zip(d.iter()).map(|(a, b)| a * b));
                w * &self.h + h1
            })
            .collect()
    }

    pub fn sensing_gains(&self, phase: &PhaseSolution) -> Vec<f64> {
        let d = phase.diagonal();
        self.steering
            .iter()
            .map(|a| {
                let w = CRow::from_iterator(a.len(), a.iter().zip(d.iter()).map(|(a, p)| a.conj() * p));
                row_quadratic(&(w * &self.h), &self.cov.r)
            })
            .collect()
    }

    pub fn min_gain(&self, phase: &PhaseSolution) -> f64 {
        self.sensing_gains(phase).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Whether every user meets `SINR ≥ Γ(1 − rel_tol)`.
    pub fn sinr_ok(&self, phase: &PhaseSolution, rel_tol: f64) -> bool {
        self.user_rows(phase)
            .iter()
            .enumerate()
            .all(|(k, h)| sinr_from_row(h, &self.cov, k, self.noise[k]).is_ok_and(|s| s >= self.gamma * (1.0 - rel_tol)))
    }
}

/// Iterate of the relaxed lifted problem.
#[derive(Debug, Clone)]
pub struct LiftedPhaseState {
    pub v: CMat,
    pub w: f64,
    pub tau: f64,
    pub iteration: usize,
}

impl LiftedPhaseState {
    pub fn from_phase(phase: &PhaseSolution) -> Self {
        let v = phase.lifted();
        Self { v: &v * v.adjoint(), w: 0.0, tau: 0.0, iteration: 0 }
    }

    /// `tr(V̄)/λ_max(V̄) − 1`.
    pub fn rank_residual(&self) -> f64 {
        rank_residual(&self.v)
    }
}

pub fn rank_residual(v: &CMat) -> f64 {
    let (lmax, _) = leading_eigvec(v);
    if lmax <= 0.0 {
        return f64::INFINITY;
    }
    v.trace().re / lmax - 1.0
}

/// Result of one relaxed solve.
#[derive(Debug, Clone)]
pub struct RelaxedSolve {
    pub v: CMat,
    pub objective: f64,
}

/// Solves `max χ` s.t. `tr(H̄_l V̄) ≥ χ`, `tr(W_k V̄) ≥ σ²_k`, `diag V̄ = 1`,
/// `V̄ ⪰ 0` and, when `rank` is given as `(u, w)`, `uᴴ V̄ u ≥ w·tr V̄`.
///
/// Returns `None` when the program is not solved to optimality with a
/// feasibility residual within `1e−6`.
pub fn solve_relaxed(
    hls: &[CMat],
    wks: &[CMat],
    noise: &[f64],
    rank: Option<(&CVec, f64)>,
    settings: &SolverSettings,
) -> Option<RelaxedSolve> {
    let n1 = hls.first().or(wks.first())?.nrows();
    let mut p = ConicProgram::new();
    let chi = p.add_var();
    let v = HermitianVar::new(&mut p, n1);
    p.set_objective(chi, 1.0);
    for i in 0..n1 {
        p.add_linear(LinearConstraint::new(vec![(v.diag(i), 1.0)], Relation::Equal, 1.0));
    }
    let hscale = hls.iter().map(|h| h.norm()).fold(0.0, f64::max);
    let hscale = if hscale > 0.0 { hscale } else { 1.0 };
    for hl in hls {
        let mut c = v.trace_coeffs(&hl.unscale(hscale));
        c.push((chi, -1.0));
        p.add_linear(LinearConstraint::new(c, Relation::GreaterEq, 0.0));
    }
    let mut checks = Vec::new();
    for (k, wk) in wks.iter().enumerate() {
        let s = wk.norm().max(f64::MIN_POSITIVE);
        let c = v.trace_coeffs(&wk.unscale(s));
        checks.push((wk, noise[k]));
        p.add_linear(LinearConstraint::new(c, Relation::GreaterEq, noise[k] / s));
    }
    if let Some((u, w)) = rank {
        if w > 0.0 {
            let uu = u * u.adjoint();
            let mut c = v.trace_coeffs(&uu);
            for d in 0..n1 {
                c.push((v.diag(d), -w));
            }
            p.add_linear(LinearConstraint::new(c, Relation::GreaterEq, 0.0));
        }
    }
    p.add_psd(v.psd_block());
    let rep = solve_sdp(&p, settings).ok()?;
    if rep.status != SolveStatus::Optimal || rep.max_violation > 1e-6 {
        return None;
    }
    let vm = v.value(&rep.solution);
    for (wk, sigma) in checks {
        if trace_product(wk, &vm) < sigma * (1.0 - 1e-6) - 1e-6 * wk.norm() {
            return None;
        }
    }
    Some(RelaxedSolve { objective: rep.solution[chi] * hscale, v: vm })
}

/// One SRCR iteration.
///
/// On success the new `V̄` is adopted and `τ` reset to `τ⁽⁰⁾`; otherwise `V̄`
/// is kept and `τ` halved. Either way `w ← min(1, λ_max/tr + τ)`.
pub fn srcr_step(
    state: &LiftedPhaseState,
    hls: &[CMat],
    wks: &[CMat],
    noise: &[f64],
    tau0: f64,
    settings: &SolverSettings,
) -> (LiftedPhaseState, Option<f64>) {
    let (_, u) = leading_eigvec(&state.v);
    let solved = solve_relaxed(hls, wks, noise, Some((&u, state.w)), settings);
    let (v, tau, objective) = match solved {
        Some(s) => (s.v, tau0, Some(s.objective)),
        None => (state.v.clone(), 0.5 * state.tau, None),
    };
    let (lmax, _) = leading_eigvec(&v);
    let w = (lmax / v.trace().re + tau).min(1.0);
    (LiftedPhaseState { v, w, tau, iteration: state.iteration + 1 }, objective)
}

/// Unit-modulus phases from the dominant eigenvector, rotated so that the
/// last lifted entry is one.
pub fn recover_phase(v: &CMat) -> PhaseSolution {
    let (lmax, u) = leading_eigvec(v);
    let scaled = u.scale(lmax.max(0.0).sqrt());
    let projected = CVec::from_iterator(
        scaled.len(),
        scaled.iter().map(|z| if z.norm() > 0.0 { z / C64::new(z.norm(), 0.0) } else { cis(0.0) }),
    );
    PhaseSolution::from_lifted(&projected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseStatus {
    Converged,
    IterationLimit,
    /// The recovered phases were worse than (or infeasible compared with) the
    /// incoming ones, which were kept.
    KeptIncoming,
}

#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    pub phase: PhaseSolution,
    pub status: PhaseStatus,
    pub min_gain: f64,
    pub iterations: usize,
    pub rank_residual: f64,
    /// Relaxed objective of each accepted iterate.
    pub objective_trace: Vec<f64>,
    /// Accepted iterates whose relaxed objective fell by more than `1e−7`
    /// (relative) below the previous accepted one.
    pub monotonicity_flags: usize,
    /// Final lifted matrix.
    pub lifted: CMat,
}

/// Runs the SRCR schedule from `incoming` and recovers unit-modulus phases.
pub fn optimize_phase(
    problem: &PhaseProblem,
    incoming: &PhaseSolution,
    tol: &Tolerances,
    settings: &SolverSettings,
) -> PhaseOutcome {
    let hls = problem.lifted_sensing();
    let wks = problem.lifted_users();
    let mut state = LiftedPhaseState::from_phase(incoming);
    let mut trace = Vec::new();
    if let Some(s) = solve_relaxed(&hls, &wks, &problem.noise, None, settings) {
        state.v = s.v;
        trace.push(s.objective);
    }
    let (lmax, _) = leading_eigvec(&state.v);
    state.tau = tol.srcr_tau0;
    state.w = (lmax / state.v.trace().re + state.tau).min(1.0);

    let mut converged = state.rank_residual() <= tol.srcr_eps;
    let mut failed_w = None;
    while !converged && state.iteration < tol.srcr_max_iter && state.tau > 1e-12 {
        if failed_w == Some(state.w) {
            // Identical program to the one that just failed.
            let (lmax, _) = leading_eigvec(&state.v);
            state.tau *= 0.5;
            state.w = (lmax / state.v.trace().re + state.tau).min(1.0);
            state.iteration += 1;
            continue;
        }
        let w = state.w;
        let (next, obj) = srcr_step(&state, &hls, &wks, &problem.noise, tol.srcr_tau0, settings);
        state = next;
        match obj {
            Some(o) => {
                trace.push(o);
                failed_w = None;
            }
            None => failed_w = Some(w),
        }
        converged = state.rank_residual() <= tol.srcr_eps;
    }
    let flags = trace
        .windows(2)
        .filter(|w| w[1] < w[0] - 1e-7 * w[0].abs().max(f64::MIN_POSITIVE))
        .count();

    let candidate = recover_phase(&state.v);
    let incoming_gain = problem.min_gain(incoming);
    let cand_gain = problem.min_gain(&candidate);
    let rank_res = state.rank_residual();
    let base = PhaseOutcome {
        phase: candidate.clone(),
        status: if converged { PhaseStatus::Converged } else { PhaseStatus::IterationLimit },
        min_gain: cand_gain,
        iterations: state.iteration,
        rank_residual: rank_res,
        objective_trace: trace,
        monotonicity_flags: flags,
        lifted: state.v,
    };
    if cand_gain >= incoming_gain && problem.sinr_ok(&candidate, 1e-6) {
        base
    } else {
        PhaseOutcome { phase: incoming.clone(), status: PhaseStatus::KeptIncoming, min_gain: incoming_gain, ..base }
    }
}
