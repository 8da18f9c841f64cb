//! Transmit-covariance design by semidefinite relaxation, and recovery of
//! rank-one per-user covariances from the relaxed optimum.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{hermitian_eigen, row_quadratic, trace_product, CMat, CRow};
use crate::metrics::CovarianceSolution;
use crate::solver::{
    solve_sdp, ConicProgram, HermitianVar, LinearConstraint, PsdBlock, Relation, SolveStatus, SolverError,
    SolverReport, SolverSettings, VarId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibilityClass {
    /// The SINR targets cannot be met at any transmit power.
    Sinr,
    /// The SINR targets need more than the available power.
    Power,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamformingError {
    #[error("covariance problem infeasible ({class:?}){}", power_note(.required_power))]
    Infeasible { class: InfeasibilityClass, required_power: Option<f64> },
    #[error("solver returned {0:?}")]
    Solver(SolveStatus),
    #[error(transparent)]
    Program(#[from] SolverError),
    #[error("user {0} receives no signal power from its covariance")]
    DegenerateUser(usize),
}

fn power_note(p: &Option<f64>) -> String {
    match p {
        Some(w) => format!("; the SINR targets need {w:.4e} W"),
        None => "; the SINR targets are unattainable at any power".into(),
    }
}

/// Data of the covariance subproblem at a fixed phase and layout.
#[derive(Debug, Clone)]
pub struct CovarianceProblem {
    /// `a(θ_l)ᴴ Φ H` per sensing angle, so `A(θ_l)` is its Gram matrix.
    pub sensing_rows: Vec<CRow>,
    /// Equivalent user channels `h_kᴴ`.
    pub user_rows: Vec<CRow>,
    pub gamma: f64,
    pub noise: Vec<f64>,
    pub p0: f64,
}

/// Scalar variables of the normalized program `R = P0 R'`.
#[derive(Debug, Clone)]
pub struct CovarianceVars {
    pub chi: VarId,
    pub r: HermitianVar,
    pub r_k: Vec<HermitianVar>,
    /// `χ = chi_scale · χ'`.
    pub chi_scale: f64,
}

fn gram(row: &CRow) -> CMat {
    row.adjoint() * row
}

impl CovarianceProblem {
    pub fn m(&self) -> usize {
        self.sensing_rows.first().or(self.user_rows.first()).map_or(0, |r| r.len())
    }

    /// Epigraph form: `max χ` subject to `tr(A_l R) ≥ χ`, the SINR
    /// constraints `(1+1/Γ) tr(R_k H_k) ≥ tr(R H_k) + σ²_k`, `tr R ≤ P0`, and
    /// `R, R_k, R − Σ R_k ⪰ 0`.
    pub fn build(&self) -> (ConicProgram, CovarianceVars) {
        self.build_with(true)
    }

    fn build_with(&self, power_cap: bool) -> (ConicProgram, CovarianceVars) {
        let m = self.m();
        let mut p = ConicProgram::new();
        let chi = p.add_var();
        let r = HermitianVar::new(&mut p, m);
        let r_k: Vec<HermitianVar> = self.user_rows.iter().map(|_| HermitianVar::new(&mut p, m)).collect();

        let sense_scale = self.sensing_rows.iter().map(|s| s.norm_squared()).fold(0.0, f64::max);
        let sense_scale = if sense_scale > 0.0 { sense_scale } else { 1.0 };
        for s in &self.sensing_rows {
            let a = gram(s).unscale(sense_scale);
            let mut coeffs = r.trace_coeffs(&a);
            coeffs.push((chi, -1.0));
            p.add_linear(LinearConstraint::new(coeffs, Relation::GreaterEq, 0.0));
        }
        for (k, h) in self.user_rows.iter().enumerate() {
            let hn = h.norm_squared().max(f64::MIN_POSITIVE);
            let hk = gram(h).unscale(hn);
            let mut coeffs: Vec<(VarId, f64)> = r_k[k]
                .trace_coeffs(&hk)
                .into_iter()
                .map(|(v, c)| (v, c * (1.0 + 1.0 / self.gamma)))
                .collect();
            coeffs.extend(r.trace_coeffs(&hk).into_iter().map(|(v, c)| (v, -c)));
            p.add_linear(LinearConstraint::new(coeffs, Relation::GreaterEq, self.noise[k] / (self.p0 * hn)));
        }
        if power_cap {
            p.add_linear(LinearConstraint::new(r.trace_coeffs_identity(), Relation::LessEq, 1.0));
        }
        p.add_psd(r.psd_block());
        for rk in &r_k {
            p.add_psd(rk.psd_block());
        }
        if !r_k.is_empty() {
            let mut residual = PsdBlock::new(r.embedded_dim());
            r.add_to_block(&mut residual, 1.0);
            for rk in &r_k {
                rk.add_to_block(&mut residual, -1.0);
            }
            p.add_psd(residual);
        }
        let chi_scale = self.p0 * sense_scale;
        (p, CovarianceVars { chi, r, r_k, chi_scale })
    }

    /// Smallest `tr R` meeting the SINR targets, or `None` if no power suffices.
    pub fn minimum_power(&self, settings: &SolverSettings) -> Result<Option<f64>, BeamformingError> {
        let Some(first) = self.minimum_power_scaled(settings)? else { return Ok(None) };
        if !(first > 0.0) {
            return Ok(Some(first));
        }
        // Re-solve with the variables normalized by the estimate itself.
        let rescaled = CovarianceProblem { p0: first, ..self.clone() };
        Ok(rescaled.minimum_power_scaled(settings)?.or(Some(first)))
    }

    fn minimum_power_scaled(&self, settings: &SolverSettings) -> Result<Option<f64>, BeamformingError> {
        let (mut p, vars) = self.build_with(false);
        p.set_objective(vars.chi, 0.0);
        for (v, c) in vars.r.trace_coeffs_identity() {
            p.set_objective(v, -c);
        }
        let rep = solve_sdp(&p, settings)?;
        Ok(match rep.status {
            SolveStatus::Optimal => Some(-rep.objective * self.p0),
            _ => None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceOutcome {
    pub solution: CovarianceSolution,
    /// Relaxed optimum `χ` (minimum sensing gain).
    pub objective: f64,
    pub report: SolverReport,
}

/// Solves the relaxed covariance problem.
pub fn solve_covariance(
    problem: &CovarianceProblem,
    settings: &SolverSettings,
) -> Result<CovarianceOutcome, BeamformingError> {
    let (mut program, vars) = problem.build();
    program.set_objective(vars.chi, 1.0);
    let report = solve_sdp(&program, settings)?;
    match report.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            let required = problem.minimum_power(settings)?;
            let class = if required.is_some() { InfeasibilityClass::Power } else { InfeasibilityClass::Sinr };
            return Err(BeamformingError::Infeasible { class, required_power: required });
        }
        other => return Err(BeamformingError::Solver(other)),
    }
    let y = &report.solution;
    let p0 = problem.p0;
    let solution = CovarianceSolution {
        r: vars.r.value(y).scale(p0),
        r_k: vars.r_k.iter().map(|v| v.value(y).scale(p0)).collect(),
    };
    Ok(CovarianceOutcome { objective: y[vars.chi] * vars.chi_scale, solution, report })
}

/// Replaces each `R_k` by `R_k h_k h_kᴴ R_k / (h_kᴴ R_k h_k)`, keeping `R`.
pub fn extract_rank_one(solution: &CovarianceSolution, user_rows: &[CRow]) -> Result<CovarianceSolution, BeamformingError> {
    let mut r_k = Vec::with_capacity(solution.r_k.len());
    for (k, (rk, h)) in solution.r_k.iter().zip(user_rows).enumerate() {
        let rk = (rk + rk.adjoint()).scale(0.5);
        let w = &rk * h.adjoint();
        let denom = row_quadratic(h, &rk);
        if !(denom > 1e-14 * rk.norm() * h.norm_squared()) || denom <= 0.0 {
            return Err(BeamformingError::DegenerateUser(k));
        }
        r_k.push((&w * w.adjoint()).unscale(denom));
    }
    Ok(CovarianceSolution { r: solution.r.clone(), r_k })
}

/// Ratio of the second-largest to the largest eigenvalue magnitude.
pub fn rank_one_ratio(x: &CMat) -> f64 {
    let (vals, _) = hermitian_eigen(x);
    let n = vals.len();
    if n < 2 {
        return 0.0;
    }
    let mut mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    if mags[0] == 0.0 {
        return 0.0;
    }
    mags[1] / mags[0]
}

/// Minimum of `tr(A_l R)` over the sensing rows.
pub fn min_sensing_gain(sensing_rows: &[CRow], r: &CMat) -> f64 {
    sensing_rows.iter().map(|s| row_quadratic(s, r)).fold(f64::INFINITY, f64::min)
}

/// Largest relative SINR-constraint shortfall, `max_k (Γ − SINR_k)/Γ` clipped at 0.
pub fn sinr_shortfall(problem: &CovarianceProblem, cov: &CovarianceSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, h) in problem.user_rows.iter().enumerate() {
        let s = row_quadratic(h, &cov.r_k[k]);
        let i = row_quadratic(h, &cov.r) - s;
        let sinr = s / (i.max(0.0) + problem.noise[k]);
        worst = worst.max((problem.gamma - sinr) / problem.gamma);
    }
    worst
}

/// `(1+1/Γ) tr(R_k H_k) − tr(R H_k) − σ²_k`; nonnegative iff the SINR target holds.
pub fn sinr_margin(h: &CRow, cov: &CovarianceSolution, k: usize, gamma: f64, noise: f64) -> f64 {
    let hk = gram(h);
    (1.0 + 1.0 / gamma) * trace_product(&cov.r_k[k], &hk) - trace_product(&cov.r, &hk) - noise
}
