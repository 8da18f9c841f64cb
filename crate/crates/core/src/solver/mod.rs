//! Self-contained conic optimization: a small modelling layer
//! ([`ConicProgram`]), a primal–dual interior-point core, and the complex
//! helpers the subproblems need.

mod hermitian;
mod ipm;
mod program;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{hermitian_eigen, symmetrize_hermitian, CMat, CVec, C64};

pub use hermitian::HermitianVar;
pub use program::{ConicProgram, LinearConstraint, PsdBlock, QuadraticConstraint, Relation, VarId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("quadratic constraint {0} is not convex")]
    NotConvex(usize),
    #[error("matrix is not Hermitian")]
    NotHermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub solution: nalgebra::DVector<f64>,
    pub max_violation: f64,
    pub iterations: usize,
    pub relative_gap: f64,
}

impl SolverReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub feasibility_tol: f64,
    pub gap_tol: f64,
    pub infeasibility_tol: f64,
    pub max_iterations: usize,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { feasibility_tol: 1e-7, gap_tol: 1e-7, infeasibility_tol: 1e-8, max_iterations: 200, verbose: false }
    }
}

/// Solves a program whose constraints are linear and semidefinite.
pub fn solve_sdp(program: &ConicProgram, settings: &SolverSettings) -> Result<SolverReport, SolverError> {
    ipm::solve(program, settings)
}

/// Solves a program that may also carry convex quadratic constraints; each
/// one is lifted to an equivalent small LMI before the interior-point solve.
pub fn solve_qcp(program: &ConicProgram, settings: &SolverSettings) -> Result<SolverReport, SolverError> {
    ipm::solve(program, settings)
}

/// `[[Re X, −Im X], [Im X, Re X]]`.
pub fn hermitian_to_real_embedding(x: &CMat) -> Result<DMatrix<f64>, SolverError> {
    let x = symmetrize_hermitian(x).ok_or(SolverError::NotHermitian)?;
    let n = x.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = x[(i, j)];
            out[(i, j)] = v.re;
            out[(i + n, j + n)] = v.re;
            out[(i + n, j)] = v.im;
            out[(i, j + n)] = -v.im;
        }
    }
    Ok(out)
}

/// Inverse of [`hermitian_to_real_embedding`]; averages the redundant copies.
pub fn real_embedding_to_hermitian(y: &DMatrix<f64>) -> CMat {
    let n = y.nrows() / 2;
    let x = CMat::from_fn(n, n, |i, j| {
        let re = 0.5 * (y[(i, j)] + y[(i + n, j + n)]);
        let im = 0.5 * (y[(i + n, j)] - y[(i, j + n)]);
        C64::new(re, im)
    });
    (&x + x.adjoint()).scale(0.5)
}

/// Largest eigenvalue of a Hermitian matrix with a unit eigenvector.
pub fn leading_eigvec(x: &CMat) -> (f64, CVec) {
    let n = x.nrows();
    if n == 0 {
        return (0.0, CVec::zeros(0));
    }
    let (values, vectors) = hermitian_eigen(x);
    let mut u = vectors.column(n - 1).into_owned();
    let norm = u.norm();
    if norm > 0.0 {
        u.unscale_mut(norm);
    }
    (values[n - 1], u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn hermitian_from(re: &[f64], im: &[f64], n: usize) -> CMat {
        let a = CMat::from_fn(n, n, |i, j| C64::new(re[i * n + j], im[i * n + j]));
        (&a + a.adjoint()).scale(0.5)
    }

    #[test]
    fn min_trace_with_unit_corner() {
        let mut p = ConicProgram::new();
        let x = HermitianVar::new_real(&mut p, 2);
        for (v, c) in x.trace_coeffs_identity() {
            p.set_objective(v, -c);
        }
        p.add_linear(LinearConstraint::new(vec![(x.diag(0), 1.0)], Relation::Equal, 1.0));
        p.add_psd(x.psd_block());
        let r = solve_sdp(&p, &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective + 1.0).abs() < 1e-6, "{}", r.objective);
    }

    #[test]
    fn trace_budget_gives_largest_eigenvalue() {
        let c = hermitian_from(&[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0], &[0.0, 0.3, -0.2, -0.3, 0.0, 0.7, 0.2, -0.7, 0.0], 3);
        let mut p = ConicProgram::new();
        let x = HermitianVar::new(&mut p, 3);
        for (v, w) in x.trace_coeffs(&c) {
            p.set_objective(v, w);
        }
        p.add_linear(LinearConstraint::new(x.trace_coeffs_identity(), Relation::LessEq, 1.0));
        p.add_psd(x.psd_block());
        let r = solve_sdp(&p, &SolverSettings::default()).unwrap();
        let (lmax, _) = leading_eigvec(&c);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - lmax).abs() < 1e-6, "{} vs {lmax}", r.objective);
    }

    #[test]
    fn infeasible_lmi_is_reported() {
        let mut p = ConicProgram::new();
        let y = p.add_var();
        p.set_objective(y, 1.0);
        let mut b = PsdBlock::new(1);
        b.add_term(y, 0, 0, 1.0);
        b.add_constant(0, 0, -1.0);
        p.add_psd(b);
        p.add_linear(LinearConstraint::new(vec![(y, 1.0)], Relation::LessEq, 0.5));
        let r = solve_sdp(&p, &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut p = ConicProgram::new();
        let y = p.add_var();
        p.set_objective(y, 1.0);
        p.add_linear(LinearConstraint::new(vec![(y, 1.0)], Relation::GreaterEq, 0.0));
        let r = solve_sdp(&p, &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn quadratic_vertex() {
        let mut p = ConicProgram::new();
        let chi = p.add_var();
        let t = p.add_vars(2);
        p.set_objective(chi, 1.0);
        // χ − 1 + ‖t − t₀‖² ≤ 0 with t₀ = (0.3, −0.2)
        let t0 = [0.3, -0.2];
        p.add_quadratic(QuadraticConstraint {
            vars: t.clone(),
            quad: DMatrix::identity(2, 2),
            linear: vec![(chi, 1.0), (t[0], -2.0 * t0[0]), (t[1], -2.0 * t0[1])],
            constant: -1.0 + t0[0] * t0[0] + t0[1] * t0[1],
        });
        let r = solve_qcp(&p, &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-6);
        assert!((r.solution[t[0]] - t0[0]).abs() < 1e-3);
        assert!((r.solution[t[1]] - t0[1]).abs() < 1e-3);
    }

    #[test]
    fn general_equalities_are_eliminated() {
        // max y0 + y1 + y2 s.t. y0 + y1 = 1, y1 − y2 = 0, 0 ≤ yᵢ ≤ 2 → 1 + y1 with y1 ≤ 1 → 2.
        let mut p = ConicProgram::new();
        let y = p.add_vars(3);
        for &v in &y {
            p.set_objective(v, 1.0);
            p.add_linear(LinearConstraint::new(vec![(v, 1.0)], Relation::GreaterEq, 0.0));
            p.add_linear(LinearConstraint::new(vec![(v, 1.0)], Relation::LessEq, 2.0));
        }
        p.add_linear(LinearConstraint::new(vec![(y[0], 1.0), (y[1], 1.0)], Relation::Equal, 1.0));
        p.add_linear(LinearConstraint::new(vec![(y[1], 1.0), (y[2], -1.0)], Relation::Equal, 0.0));
        let r = solve_sdp(&p, &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 2.0).abs() < 1e-6, "{}", r.objective);
        assert!(r.max_violation < 1e-6);
    }

    #[test]
    fn embedding_roundtrip() {
        let x = hermitian_from(&[1.0, 2.0, 2.0, 5.0], &[0.0, 1.0, -1.0, 0.0], 2);
        let e = hermitian_to_real_embedding(&x).unwrap();
        assert!((real_embedding_to_hermitian(&e) - &x).norm() < 1e-14);
        assert!((e.trace() - 2.0 * x.trace().re).abs() < 1e-14);
    }

    #[test]
    fn leading_eigvec_rank_one() {
        let v = CVec::from_vec(vec![C64::new(1.0, 1.0), C64::new(0.0, -2.0)]);
        let (lam, u) = leading_eigvec(&(&v * v.adjoint()));
        assert!((lam - v.norm_squared()).abs() < 1e-12);
        assert!(((u.adjoint() * &v)[(0, 0)].norm() - v.norm()).abs() < 1e-12);
        let _ = DVector::<f64>::zeros(1);
    }
}
