use nalgebra::DVector;

use super::program::{ConicProgram, PsdBlock, VarId};
use crate::linalg::{CMat, C64};

/// A Hermitian matrix variable parametrized by its diagonal and the real and
/// imaginary parts of its strict upper triangle.
///
/// Its PSD constraint is the real LMI `[[Re X, −Im X], [Im X, Re X]] ⪰ 0`.
/// Because both diagonal blocks share the same scalar variables, the
/// embedding structure holds identically.
#[derive(Debug, Clone)]
pub struct HermitianVar {
    n: usize,
    diag: Vec<VarId>,
    /// Row-major over `i < j`.
    re: Vec<VarId>,
    im: Option<Vec<VarId>>,
}

impl HermitianVar {
    pub fn new(program: &mut ConicProgram, n: usize) -> Self {
        let diag = program.add_vars(n);
        let re = program.add_vars(n * n.saturating_sub(1) / 2);
        let im = Some(program.add_vars(re.len()));
        Self { n, diag, re, im }
    }

    /// A real symmetric variable (no imaginary part).
    pub fn new_real(program: &mut ConicProgram, n: usize) -> Self {
        let diag = program.add_vars(n);
        let re = program.add_vars(n * n.saturating_sub(1) / 2);
        Self { n, diag, re, im: None }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diag(&self, i: usize) -> VarId {
        self.diag[i]
    }

    fn pair(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Coefficients of `tr(A X)` in the scalar variables, for Hermitian `A`.
    pub fn trace_coeffs(&self, a: &CMat) -> Vec<(VarId, f64)> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            out.push((self.diag[i], a[(i, i)].re));
            for j in i + 1..self.n {
                let k = self.pair(i, j);
                let aij = 0.5 * (a[(i, j)] + a[(j, i)].conj());
                out.push((self.re[k], 2.0 * aij.re));
                if let Some(im) = &self.im {
                    out.push((im[k], 2.0 * aij.im));
                }
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        out
    }

    /// Coefficients of `tr X`.
    pub fn trace_coeffs_identity(&self) -> Vec<(VarId, f64)> {
        self.diag.iter().map(|&v| (v, 1.0)).collect()
    }

    pub fn embedded_dim(&self) -> usize {
        if self.im.is_some() {
            2 * self.n
        } else {
            self.n
        }
    }

    /// Adds `sign · embed(X)` to `block`, which must have [`Self::embedded_dim`] rows.
    pub fn add_to_block(&self, block: &mut PsdBlock, sign: f64) {
        let n = self.n;
        let complex = self.im.is_some();
        for i in 0..n {
            block.add_term(self.diag[i], i, i, sign);
            if complex {
                block.add_term(self.diag[i], i + n, i + n, sign);
            }
            for j in i + 1..n {
                let k = self.pair(i, j);
                block.add_term(self.re[k], i, j, sign);
                if let Some(im) = &self.im {
                    block.add_term(self.re[k], i + n, j + n, sign);
                    block.add_term(im[k], j, i + n, sign);
                    block.add_term(im[k], i, j + n, -sign);
                }
            }
        }
    }

    pub fn psd_block(&self) -> PsdBlock {
        let mut b = PsdBlock::new(self.embedded_dim());
        self.add_to_block(&mut b, 1.0);
        b
    }

    pub fn value(&self, y: &DVector<f64>) -> CMat {
        let n = self.n;
        let mut x = CMat::zeros(n, n);
        for i in 0..n {
            x[(i, i)] = C64::new(y[self.diag[i]], 0.0);
            for j in i + 1..n {
                let k = self.pair(i, j);
                let im = self.im.as_ref().map_or(0.0, |v| y[v[k]]);
                x[(i, j)] = C64::new(y[self.re[k]], im);
                x[(j, i)] = C64::new(y[self.re[k]], -im);
            }
        }
        x
    }
}
