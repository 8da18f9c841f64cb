use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::SolverError;
use crate::linalg::min_eigenvalue_real;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    GreaterEq,
    Equal,
}

/// `Σ coeff·y  (≤ | ≥ | =)  rhs`.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<(VarId, f64)>, relation: Relation, rhs: f64) -> Self {
        Self { coeffs, relation, rhs }
    }

    pub fn lhs(&self, y: &DVector<f64>) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * y[v]).sum()
    }

    /// Amount by which `y` violates the constraint (zero when satisfied).
    pub fn violation(&self, y: &DVector<f64>) -> f64 {
        let lhs = self.lhs(y);
        match self.relation {
            Relation::LessEq => (lhs - self.rhs).max(0.0),
            Relation::GreaterEq => (self.rhs - lhs).max(0.0),
            Relation::Equal => (lhs - self.rhs).abs(),
        }
    }
}

/// Linear matrix inequality `F₀ + Σᵢ yᵢ Fᵢ ⪰ 0` over real symmetric matrices.
///
/// Entries are stored once per unordered index pair; `(r, c)` and `(c, r)`
/// address the same symmetric position.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    dim: usize,
    constant: BTreeMap<(usize, usize), f64>,
    terms: BTreeMap<VarId, BTreeMap<(usize, usize), f64>>,
}

impl PsdBlock {
    pub fn new(dim: usize) -> Self {
        Self { dim, constant: BTreeMap::new(), terms: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn key(r: usize, c: usize) -> (usize, usize) {
        if r <= c {
            (r, c)
        } else {
            (c, r)
        }
    }

    /// Adds `value` at the symmetric position `(r, c)` of `F₀`.
    pub fn add_constant(&mut self, r: usize, c: usize, value: f64) {
        *self.constant.entry(Self::key(r, c)).or_insert(0.0) += value;
    }

    /// Adds `value` at the symmetric position `(r, c)` of `F_var`.
    pub fn add_term(&mut self, var: VarId, r: usize, c: usize, value: f64) {
        *self.terms.entry(var).or_default().entry(Self::key(r, c)).or_insert(0.0) += value;
    }

    pub fn constant_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.constant.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    pub fn terms(&self) -> impl Iterator<Item = (VarId, impl Iterator<Item = (usize, usize, f64)> + '_)> + '_ {
        self.terms.iter().map(|(&var, entries)| (var, entries.iter().map(|(&(r, c), &v)| (r, c, v))))
    }

    /// Dense value of the matrix at `y`.
    pub fn evaluate(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let mut put = |r: usize, c: usize, v: f64| {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        };
        for (&(r, c), &v) in &self.constant {
            put(r, c, v);
        }
        for (&var, entries) in &self.terms {
            let yv = y[var];
            if yv == 0.0 {
                continue;
            }
            for (&(r, c), &v) in entries {
                put(r, c, yv * v);
            }
        }
        m
    }

    fn max_index(&self) -> Option<usize> {
        self.constant
            .keys()
            .chain(self.terms.values().flat_map(|e| e.keys()))
            .map(|&(_, c)| c)
            .max()
    }

    fn max_var(&self) -> Option<VarId> {
        self.terms.keys().next_back().copied()
    }
}

/// Convex quadratic constraint `zᵀ Q z + Σ coeff·y + constant ≤ 0` where
/// `z = (y[vars[0]], y[vars[1]], …)` and `Q ⪰ 0`.
#[derive(Debug, Clone)]
pub struct QuadraticConstraint {
    pub vars: Vec<VarId>,
    pub quad: DMatrix<f64>,
    pub linear: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl QuadraticConstraint {
    pub fn value(&self, y: &DVector<f64>) -> f64 {
        let z = DVector::from_iterator(self.vars.len(), self.vars.iter().map(|&v| y[v]));
        let quad = (z.transpose() * &self.quad * &z)[(0, 0)];
        quad + self.linear.iter().map(|&(v, c)| c * y[v]).sum::<f64>() + self.constant
    }
}

/// A maximization problem over a real decision vector with linear,
/// semidefinite and convex-quadratic constraints.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    num_vars: usize,
    objective: Vec<f64>,
    pub(crate) linear: Vec<LinearConstraint>,
    pub(crate) psd: Vec<PsdBlock>,
    pub(crate) quadratic: Vec<QuadraticConstraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> VarId {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    pub fn add_vars(&mut self, count: usize) -> Vec<VarId> {
        (0..count).map(|_| self.add_var()).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Sets the objective coefficient of `var` (the program maximizes).
    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_value(&self, y: &DVector<f64>) -> f64 {
        self.objective.iter().zip(y.iter()).map(|(c, v)| c * v).sum()
    }

    pub fn add_linear(&mut self, constraint: LinearConstraint) {
        self.linear.push(constraint);
    }

    pub fn add_psd(&mut self, block: PsdBlock) {
        self.psd.push(block);
    }

    pub fn add_quadratic(&mut self, constraint: QuadraticConstraint) {
        self.quadratic.push(constraint);
    }

    pub fn linear_constraints(&self) -> &[LinearConstraint] {
        &self.linear
    }

    pub fn psd_blocks(&self) -> &[PsdBlock] {
        &self.psd
    }

    pub fn quadratic_constraints(&self) -> &[QuadraticConstraint] {
        &self.quadratic
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars;
        let bad_var = |v: VarId| v >= n;
        for (i, c) in self.linear.iter().enumerate() {
            if c.coeffs.iter().any(|&(v, x)| bad_var(v) || !x.is_finite()) || !c.rhs.is_finite() {
                return Err(SolverError::Malformed(format!("linear constraint {i}")));
            }
        }
        for (i, b) in self.psd.iter().enumerate() {
            if b.dim == 0 || b.max_index().is_some_and(|c| c >= b.dim) || b.max_var().is_some_and(bad_var) {
                return Err(SolverError::Malformed(format!("psd block {i}")));
            }
        }
        for (i, q) in self.quadratic.iter().enumerate() {
            let k = q.vars.len();
            if q.quad.nrows() != k
                || q.quad.ncols() != k
                || q.vars.iter().any(|&v| bad_var(v))
                || q.linear.iter().any(|&(v, _)| bad_var(v))
                || !q.constant.is_finite()
            {
                return Err(SolverError::Malformed(format!("quadratic constraint {i}")));
            }
            if k > 0 {
                let scale = q.quad.amax().max(1.0);
                if (&q.quad - q.quad.transpose()).amax() > 1e-12 * scale
                    || min_eigenvalue_real(&q.quad) < -1e-10 * scale
                {
                    return Err(SolverError::NotConvex(i));
                }
            }
        }
        Ok(())
    }

    /// Largest absolute violation of any constraint at `y`: linear residuals,
    /// negative LMI eigenvalues, and positive quadratic values.
    pub fn max_violation(&self, y: &DVector<f64>) -> f64 {
        let lin = self.linear.iter().map(|c| c.violation(y)).fold(0.0, f64::max);
        let psd = self
            .psd
            .iter()
            .map(|b| (-min_eigenvalue_real(&b.evaluate(y))).max(0.0))
            .fold(0.0, f64::max);
        let quad = self.quadratic.iter().map(|q| q.value(y).max(0.0)).fold(0.0, f64::max);
        lin.max(psd).max(quad)
    }
}
