//! Primal–dual interior-point method for the block LMI form
//!
//! ```text
//!   max  bᵀy   s.t.  Z_j = C_j − Σᵢ yᵢ A_{j,i} ⪰ 0,   z = c − Aₗᵀ y ≥ 0
//! ```
//!
//! paired with its standard-form primal `min Σ⟨C_j,X_j⟩ + cᵀx` subject to
//! `Σ_j ⟨A_{j,i},X_j⟩ + (Aₗ x)ᵢ = bᵢ`. Search directions use the HKM scaling
//! with a Mehrotra predictor–corrector; the iteration starts infeasible.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::program::{ConicProgram, PsdBlock, QuadraticConstraint, Relation, VarId};
use super::{SolveStatus, SolverError, SolverReport, SolverSettings};
use crate::linalg::min_eigenvalue_real;

type Sparse = Vec<(usize, usize, f64)>;

struct CoreBlock {
    n: usize,
    c: DMatrix<f64>,
    /// `(var, entries)` with both triangles expanded.
    a: Vec<(usize, Sparse)>,
}

struct CoreProblem {
    m: usize,
    b: DVector<f64>,
    blocks: Vec<CoreBlock>,
    lp_c: DVector<f64>,
    /// `m × n_lp`.
    lp_a: DMatrix<f64>,
}

/// Affine parametrization `y = y0 + N z` of the equality-constrained space.
struct Reduction {
    y0: DVector<f64>,
    /// Column `k` of `N` as sparse `(original var, coefficient)` pairs.
    columns: Vec<Vec<(VarId, f64)>>,
}

impl Reduction {
    fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut y = self.y0.clone();
        for (k, col) in self.columns.iter().enumerate() {
            for &(v, c) in col {
                y[v] += c * z[k];
            }
        }
        y
    }

    /// Per original variable, the reduced columns it feeds.
    fn rows(&self, n: usize) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); n];
        for (k, col) in self.columns.iter().enumerate() {
            for &(v, c) in col {
                rows[v].push((k, c));
            }
        }
        rows
    }
}

enum Compiled {
    Ready(CoreProblem, Reduction, f64),
    Infeasible(DVector<f64>),
}

pub(crate) fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<SolverReport, SolverError> {
    program.validate()?;
    let (core, reduction, objective_scale) = match compile(program, settings)? {
        Compiled::Ready(core, reduction, scale) => (core, reduction, scale),
        Compiled::Infeasible(y) => {
            return Ok(SolverReport {
                status: SolveStatus::Infeasible,
                objective: program.objective_value(&y),
                max_violation: program.max_violation(&y),
                solution: y,
                iterations: 0,
                relative_gap: f64::NAN,
            })
        }
    };
    let result = run(&core, settings);
    let y = reduction.lift(&result.y);
    let _ = objective_scale;
    Ok(SolverReport {
        status: result.status,
        objective: program.objective_value(&y),
        max_violation: program.max_violation(&y),
        solution: y,
        iterations: result.iterations,
        relative_gap: result.relative_gap,
    })
}

fn quadratic_to_block(q: &QuadraticConstraint) -> Option<PsdBlock> {
    let k = q.vars.len();
    if k == 0 {
        return None;
    }
    let sym = (&q.quad + q.quad.transpose()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.amax();
    if top <= 0.0 {
        return None;
    }
    let kept: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > 1e-12 * top).collect();
    let r = kept.len();
    // [[I_r, Lᵀz], [zᵀL, −(linᵀy + c)]] ⪰ 0  with  Q = L Lᵀ.
    let mut block = PsdBlock::new(r + 1);
    for i in 0..r {
        block.add_constant(i, i, 1.0);
    }
    for (col, &e) in kept.iter().enumerate() {
        let s = eig.eigenvalues[e].sqrt();
        for (j, &var) in q.vars.iter().enumerate() {
            let l = eig.eigenvectors[(j, e)] * s;
            if l != 0.0 {
                block.add_term(var, col, r, l);
            }
        }
    }
    block.add_constant(r, r, -q.constant);
    for &(var, c) in &q.linear {
        block.add_term(var, r, r, -c);
    }
    Some(block)
}

fn reduce_equalities(program: &ConicProgram, settings: &SolverSettings) -> Result<Reduction, ()> {
    let n = program.num_vars();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut general = Vec::new();
    for c in program.linear.iter().filter(|c| c.relation == Relation::Equal) {
        let nz: Vec<(VarId, f64)> = c.coeffs.iter().copied().filter(|&(_, x)| x != 0.0).collect();
        match nz.as_slice() {
            [] => {
                if c.rhs.abs() > settings.feasibility_tol {
                    return Err(());
                }
            }
            [(v, x)] => {
                let val = c.rhs / x;
                match fixed[*v] {
                    Some(prev) if (prev - val).abs() > settings.feasibility_tol * (1.0 + val.abs()) => {
                        return Err(());
                    }
                    _ => fixed[*v] = Some(val),
                }
            }
            _ => general.push(c),
        }
    }
    let mut y0 = DVector::from_iterator(n, fixed.iter().map(|f| f.unwrap_or(0.0)));
    let free: Vec<VarId> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    if general.is_empty() {
        let columns = free.iter().map(|&v| vec![(v, 1.0)]).collect();
        return Ok(Reduction { y0, columns });
    }
    let pos: BTreeMap<VarId, usize> = free.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let p = general.len();
    let mut g = DMatrix::zeros(p, free.len());
    let mut h = DVector::zeros(p);
    for (row, c) in general.iter().enumerate() {
        h[row] = c.rhs;
        for &(v, x) in &c.coeffs {
            match pos.get(&v) {
                Some(&col) => g[(row, col)] += x,
                None => h[row] -= x * y0[v],
            }
        }
    }
    if free.is_empty() {
        return if h.amax() > settings.feasibility_tol { Err(()) } else { Ok(Reduction { y0, columns: vec![] }) };
    }
    let svd = g.clone().svd(true, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let smax: f64 = svd.singular_values.max();
    let tol = 1e-12 * smax.max(1.0) * (free.len().max(p) as f64);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let particular = svd.solve(&h, tol).map_err(|_| ())?;
    if (&g * &particular - &h).amax() > settings.feasibility_tol * (1.0 + h.amax()) {
        return Err(());
    }
    for (i, &v) in free.iter().enumerate() {
        y0[v] = particular[i];
    }
    // Rows of Vᵀ past the rank span the null space.
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut null_rows: Vec<DVector<f64>> = Vec::new();
    let full = v_t.nrows();
    let mut basis = v_t.clone();
    if full < free.len() {
        // Thin SVD: complete the basis with a QR of the orthogonal complement.
        let mut ext = DMatrix::zeros(free.len(), free.len());
        ext.view_mut((0, 0), (full, free.len())).copy_from(v_t);
        let comp = DMatrix::<f64>::identity(free.len(), free.len()) - v_t.transpose() * v_t;
        let qr = comp.qr();
        let q = qr.q();
        let mut filled = full;
        for j in 0..free.len() {
            if filled >= free.len() {
                break;
            }
            let col = q.column(j).into_owned();
            let proj = v_t * &col;
            if (col.norm_squared() - proj.norm_squared()) > 0.5 {
                ext.row_mut(filled).copy_from(&col.transpose());
                filled += 1;
            }
        }
        basis = ext;
    }
    for &i in order.iter().skip(rank) {
        null_rows.push(basis.row(i).transpose());
    }
    for i in full..basis.nrows() {
        null_rows.push(basis.row(i).transpose());
    }
    let columns = null_rows
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, &x)| x.abs() > 1e-15)
                .map(|(i, &x)| (free[i], x))
                .collect()
        })
        .collect();
    Ok(Reduction { y0, columns })
}

fn compile(program: &ConicProgram, settings: &SolverSettings) -> Result<Compiled, SolverError> {
    let n = program.num_vars();
    let reduction = match reduce_equalities(program, settings) {
        Ok(r) => r,
        Err(()) => return Ok(Compiled::Infeasible(DVector::zeros(n))),
    };
    let rows = reduction.rows(n);
    let m = reduction.columns.len();
    let y0 = &reduction.y0;

    let mut b = DVector::<f64>::zeros(m);
    for (v, &c) in program.objective().iter().enumerate() {
        for &(k, w) in &rows[v] {
            b[k] += c * w;
        }
    }
    let bnorm = b.norm();
    if bnorm > 0.0 {
        b /= bnorm;
    }

    // Linear inequalities become columns of the LP block (aᵀz ≤ c).
    let mut lp_cols: Vec<(DVector<f64>, f64)> = Vec::new();
    for c in program.linear.iter().filter(|c| c.relation != Relation::Equal) {
        let sign = if c.relation == Relation::LessEq { 1.0 } else { -1.0 };
        let mut a = DVector::<f64>::zeros(m);
        let mut rhs = sign * c.rhs;
        for &(v, x) in &c.coeffs {
            rhs -= sign * x * y0[v];
            for &(k, w) in &rows[v] {
                a[k] += sign * x * w;
            }
        }
        let scale = a.norm();
        let gnorm: f64 = c.coeffs.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt();
        if scale <= 1e-14 * (1.0 + gnorm) {
            if rhs < -settings.feasibility_tol * (1.0 + gnorm) {
                return Ok(Compiled::Infeasible(y0.clone()));
            }
            continue;
        }
        lp_cols.push((a / scale, rhs / scale));
    }
    let n_lp = lp_cols.len();
    let mut lp_a = DMatrix::zeros(m, n_lp);
    let mut lp_c = DVector::zeros(n_lp);
    for (j, (a, c)) in lp_cols.into_iter().enumerate() {
        lp_a.set_column(j, &a);
        lp_c[j] = c;
    }

    let converted: Vec<PsdBlock> = program.quadratic.iter().filter_map(quadratic_to_block).collect();
    for q in program.quadratic.iter().filter(|q| quadratic_to_block(q).is_none()) {
        // Rank-zero quadratic form: a plain linear constraint.
        let lin_val: f64 = q.linear.iter().map(|&(v, c)| c * y0[v]).sum::<f64>() + q.constant;
        let mut a = DVector::<f64>::zeros(m);
        for &(v, c) in &q.linear {
            for &(k, w) in &rows[v] {
                a[k] += c * w;
            }
        }
        let scale = a.norm();
        if scale <= 1e-14 {
            if lin_val > settings.feasibility_tol {
                return Ok(Compiled::Infeasible(y0.clone()));
            }
            continue;
        }
        let old = lp_a.ncols();
        lp_a = lp_a.insert_column(old, 0.0);
        lp_a.set_column(old, &(a / scale));
        lp_c = lp_c.push(-lin_val / scale);
    }

    let mut blocks = Vec::new();
    for block in program.psd.iter().chain(converted.iter()) {
        let dim = block.dim();
        let mut c = DMatrix::zeros(dim, dim);
        let put = |mat: &mut DMatrix<f64>, r: usize, col: usize, v: f64| {
            mat[(r, col)] += v;
            if r != col {
                mat[(col, r)] += v;
            }
        };
        for (r, col, v) in block.constant_entries() {
            put(&mut c, r, col, v);
        }
        let mut reduced: BTreeMap<usize, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
        for (var, entries) in block.terms() {
            let entries: Vec<_> = entries.collect();
            if y0[var] != 0.0 {
                for &(r, col, v) in &entries {
                    put(&mut c, r, col, y0[var] * v);
                }
            }
            for &(k, w) in &rows[var] {
                let target = reduced.entry(k).or_default();
                for &(r, col, v) in &entries {
                    // Z = C − Σ y A  ⇒  A = −F.
                    *target.entry((r, col)).or_insert(0.0) -= w * v;
                }
            }
        }
        let mut a: Vec<(usize, Sparse)> = Vec::new();
        let mut scale: f64 = 0.0;
        for (k, entries) in reduced {
            let mut sparse = Sparse::new();
            let mut norm2 = 0.0;
            for ((r, col), v) in entries {
                if v == 0.0 {
                    continue;
                }
                sparse.push((r, col, v));
                norm2 += v * v;
                if r != col {
                    sparse.push((col, r, v));
                    norm2 += v * v;
                }
            }
            if !sparse.is_empty() {
                scale = scale.max(norm2.sqrt());
                a.push((k, sparse));
            }
        }
        if a.is_empty() {
            if min_eigenvalue_real(&c) < -settings.feasibility_tol * (1.0 + c.norm()) {
                return Ok(Compiled::Infeasible(y0.clone()));
            }
            continue;
        }
        c /= scale;
        for (_, entries) in a.iter_mut() {
            for e in entries.iter_mut() {
                e.2 /= scale;
            }
        }
        blocks.push(CoreBlock { n: dim, c, a });
    }

    Ok(Compiled::Ready(CoreProblem { m, b, blocks, lp_c, lp_a }, reduction, bnorm))
}

struct CoreResult {
    status: SolveStatus,
    y: DVector<f64>,
    iterations: usize,
    relative_gap: f64,
}

fn aop(p: &CoreProblem, xs: &[DMatrix<f64>], x_lp: &DVector<f64>) -> DVector<f64> {
    let mut out = &p.lp_a * x_lp;
    for (blk, x) in p.blocks.iter().zip(xs) {
        for (var, entries) in &blk.a {
            out[*var] += entries.iter().map(|&(r, c, v)| v * x[(r, c)]).sum::<f64>();
        }
    }
    out
}

fn aop_t(p: &CoreProblem, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
    let mats = p
        .blocks
        .iter()
        .map(|blk| {
            let mut m = DMatrix::zeros(blk.n, blk.n);
            for (var, entries) in &blk.a {
                let yv = y[*var];
                if yv == 0.0 {
                    continue;
                }
                for &(r, c, v) in entries {
                    m[(r, c)] += yv * v;
                }
            }
            m
        })
        .collect();
    (mats, p.lp_a.transpose() * y)
}

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t).scale(0.5)
}

/// Largest `α` with `X + α ΔX ⪰ 0`; infinity if the whole ray stays PSD.
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(tmp) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&tmp.transpose()) else {
        return 0.0;
    };
    let lam = SymmetricEigen::new(sym(w)).eigenvalues.min();
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&xi, &d)| -xi / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dx_lp: DVector<f64>,
    dz_lp: DVector<f64>,
    dy: DVector<f64>,
}

struct Iterate<'a> {
    p: &'a CoreProblem,
    xs: Vec<DMatrix<f64>>,
    zs: Vec<DMatrix<f64>>,
    x_lp: DVector<f64>,
    z_lp: DVector<f64>,
}

impl Iterate<'_> {
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        zinv: &[DMatrix<f64>],
        schur: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
        rp: &DVector<f64>,
        rd: &[DMatrix<f64>],
        rd_lp: &DVector<f64>,
        rc: &[DMatrix<f64>],
        rc_lp: &DVector<f64>,
    ) -> Direction {
        let p = self.p;
        let t: Vec<DMatrix<f64>> = (0..p.blocks.len())
            .map(|j| (&rc[j] - &self.xs[j] * &rd[j]) * &zinv[j])
            .collect();
        let t_lp = (rc_lp - self.x_lp.component_mul(rd_lp)).component_div(&self.z_lp);
        let rhs = rp - aop(p, &t, &t_lp);
        let dy = schur.solve(&rhs);
        let (ady, ady_lp) = aop_t(p, &dy);
        let dz: Vec<DMatrix<f64>> = (0..p.blocks.len()).map(|j| &rd[j] - &ady[j]).collect();
        let dz_lp = rd_lp - ady_lp;
        let dx: Vec<DMatrix<f64>> = (0..p.blocks.len())
            .map(|j| sym((&rc[j] - &self.xs[j] * &dz[j]) * &zinv[j]))
            .collect();
        let dx_lp = (rc_lp - self.x_lp.component_mul(&dz_lp)).component_div(&self.z_lp);
        Direction { dx, dz, dx_lp, dz_lp, dy }
    }

    fn step_lengths(&self, d: &Direction) -> (f64, f64) {
        let mut ap = max_step_lp(&self.x_lp, &d.dx_lp);
        let mut ad = max_step_lp(&self.z_lp, &d.dz_lp);
        for j in 0..self.xs.len() {
            ap = ap.min(max_step_psd(&self.xs[j], &d.dx[j]));
            ad = ad.min(max_step_psd(&self.zs[j], &d.dz[j]));
        }
        (ap, ad)
    }
}

fn schur_matrix(p: &CoreProblem, xs: &[DMatrix<f64>], zinv: &[DMatrix<f64>], x_lp: &DVector<f64>, z_lp: &DVector<f64>) -> DMatrix<f64> {
    let m = p.m;
    let mut mat = DMatrix::zeros(m, m);
    for (j, blk) in p.blocks.iter().enumerate() {
        let n = blk.n;
        let x = &xs[j];
        let zi = &zinv[j];
        let mut g = DMatrix::<f64>::zeros(n, n);
        for (ii, (vi, ai)) in blk.a.iter().enumerate() {
            // G = X Aᵢ Z⁻¹
            g.fill(0.0);
            for &(r, c, v) in ai {
                let xr = x.column(r);
                for q in 0..n {
                    let coef = v * zi[(c, q)];
                    if coef == 0.0 {
                        continue;
                    }
                    let mut gq = g.column_mut(q);
                    gq.axpy(coef, &xr, 1.0);
                }
            }
            for (vk, ak) in &blk.a[ii..] {
                let val: f64 = ak.iter().map(|&(r, c, w)| w * g[(c, r)]).sum();
                mat[(*vi, *vk)] += val;
                if vi != vk {
                    mat[(*vk, *vi)] += val;
                }
            }
        }
    }
    if p.lp_a.ncols() > 0 {
        let d = x_lp.component_div(z_lp);
        let mut scaled = p.lp_a.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= d[j];
        }
        mat += &scaled * p.lp_a.transpose();
    }
    mat
}

fn factor_schur(mut mat: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let diag_max = mat.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for _ in 0..6 {
        if let Some(ch) = mat.clone().cholesky() {
            return Some(ch);
        }
        let next = if reg == 0.0 { 1e-14 * diag_max } else { reg * 100.0 };
        for i in 0..mat.nrows() {
            mat[(i, i)] += next - reg;
        }
        reg = next;
    }
    None
}

fn run(p: &CoreProblem, s: &SolverSettings) -> CoreResult {
    let m = p.m;
    let n_lp = p.lp_c.len();
    let mut nu = n_lp as f64;
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for blk in &p.blocks {
        let n = blk.n as f64;
        nu += n;
        let mut xi: f64 = 10f64.max(n.sqrt());
        let mut eta: f64 = 10f64.max(n.sqrt()).max(blk.c.norm());
        for (var, entries) in &blk.a {
            let an: f64 = entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
            xi = xi.max(n * (1.0 + p.b[*var].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        xs.push(DMatrix::identity(blk.n, blk.n) * xi);
        zs.push(DMatrix::identity(blk.n, blk.n) * eta);
    }
    let (x_lp, z_lp) = {
        let nl = n_lp as f64;
        let mut xi: f64 = 10f64.max(nl.sqrt());
        let mut eta: f64 = 10f64.max(nl.sqrt()).max(p.lp_c.norm());
        for (j, col) in p.lp_a.column_iter().enumerate() {
            let an = col.norm();
            let bmax = col.iter().zip(p.b.iter()).filter(|(a, _)| **a != 0.0).map(|(_, b)| b.abs()).fold(0.0, f64::max);
            xi = xi.max((1.0 + bmax) / (1.0 + an));
            eta = eta.max(an).max(p.lp_c[j].abs());
        }
        (DVector::from_element(n_lp, xi), DVector::from_element(n_lp, eta))
    };
    let mut it = Iterate { p, xs, zs, x_lp, z_lp };
    let mut y = DVector::zeros(m);
    let data_norm = (p.blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>() + p.lp_c.norm_squared()).sqrt();
    let b_norm = p.b.norm();
    let mut relgap = f64::INFINITY;
    let mut stalls = 0;

    for iter in 0..s.max_iterations {
        let ax = aop(p, &it.xs, &it.x_lp);
        let rp = &p.b - &ax;
        let (aty, aty_lp) = aop_t(p, &y);
        let rd: Vec<DMatrix<f64>> = (0..p.blocks.len()).map(|j| &p.blocks[j].c - &it.zs[j] - &aty[j]).collect();
        let rd_lp = &p.lp_c - &it.z_lp - &aty_lp;

        let pobj: f64 = p.blocks.iter().zip(&it.xs).map(|(b, x)| frob(&b.c, x)).sum::<f64>() + p.lp_c.dot(&it.x_lp);
        let dobj = p.b.dot(&y);
        let gap: f64 = it.xs.iter().zip(&it.zs).map(|(x, z)| frob(x, z)).sum::<f64>() + it.x_lp.dot(&it.z_lp);
        let mu = gap / nu.max(1.0);
        relgap = gap / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rp.norm() / (1.0 + b_norm);
        let rd_norm = (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rd_lp.norm_squared()).sqrt();
        let dinf = rd_norm / (1.0 + data_norm);
        if s.verbose {
            log::debug!("ipm {iter:3} pobj {pobj:+.6e} dobj {dobj:+.6e} gap {relgap:.2e} pinf {pinf:.2e} dinf {dinf:.2e}");
        }
        if pinf <= s.feasibility_tol && dinf <= s.feasibility_tol && relgap <= s.gap_tol {
            return CoreResult { status: SolveStatus::Optimal, y, iterations: iter, relative_gap: relgap };
        }
        // A primal ray X with A(X) → 0, ⟨C,X⟩ < 0 certifies an empty LMI set.
        if pobj < 0.0 && ax.norm() <= s.infeasibility_tol * (-pobj) {
            return CoreResult { status: SolveStatus::Infeasible, y, iterations: iter, relative_gap: relgap };
        }
        let cert_residual = (p.blocks.iter().zip(&rd).map(|(b, r)| (&b.c - r).norm_squared()).sum::<f64>()
            + (&p.lp_c - &rd_lp).norm_squared())
        .sqrt();
        if dobj > 0.0 && cert_residual <= s.infeasibility_tol * dobj {
            return CoreResult { status: SolveStatus::Unbounded, y, iterations: iter, relative_gap: relgap };
        }

        let mut zinv = Vec::with_capacity(p.blocks.len());
        for z in &it.zs {
            match z.clone().cholesky() {
                Some(ch) => zinv.push(ch.inverse()),
                None => {
                    return CoreResult { status: SolveStatus::NumericalFailure, y, iterations: iter, relative_gap: relgap };
                }
            }
        }
        let Some(schur) = factor_schur(schur_matrix(p, &it.xs, &zinv, &it.x_lp, &it.z_lp)) else {
            return CoreResult { status: SolveStatus::NumericalFailure, y, iterations: iter, relative_gap: relgap };
        };

        // Predictor.
        let rc_aff: Vec<DMatrix<f64>> = it.xs.iter().zip(&it.zs).map(|(x, z)| -(x * z)).collect();
        let rc_aff_lp = -it.x_lp.component_mul(&it.z_lp);
        let aff = it.direction(&zinv, &schur, &rp, &rd, &rd_lp, &rc_aff, &rc_aff_lp);
        let (ap_aff, ad_aff) = it.step_lengths(&aff);
        let ap_aff = ap_aff.min(1.0);
        let ad_aff = ad_aff.min(1.0);
        let gap_aff: f64 = (0..p.blocks.len())
            .map(|j| frob(&(&it.xs[j] + &aff.dx[j] * ap_aff), &(&it.zs[j] + &aff.dz[j] * ad_aff)))
            .sum::<f64>()
            + (&it.x_lp + &aff.dx_lp * ap_aff).dot(&(&it.z_lp + &aff.dz_lp * ad_aff));
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let target = sigma * mu;
        let rc: Vec<DMatrix<f64>> = (0..p.blocks.len())
            .map(|j| {
                let n = p.blocks[j].n;
                DMatrix::identity(n, n) * target - &it.xs[j] * &it.zs[j] - &aff.dx[j] * &aff.dz[j]
            })
            .collect();
        let rc_lp = DVector::from_element(n_lp, target)
            - it.x_lp.component_mul(&it.z_lp)
            - aff.dx_lp.component_mul(&aff.dz_lp);
        let dir = it.direction(&zinv, &schur, &rp, &rd, &rd_lp, &rc, &rc_lp);
        let (ap, ad) = it.step_lengths(&dir);
        let gamma = 0.9 + 0.09 * ap_aff.min(ad_aff);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                return CoreResult { status: SolveStatus::NumericalFailure, y, iterations: iter, relative_gap: relgap };
            }
        } else {
            stalls = 0;
        }

        for j in 0..p.blocks.len() {
            it.xs[j] = sym(&it.xs[j] + &dir.dx[j] * ap);
            it.zs[j] = sym(&it.zs[j] + &dir.dz[j] * ad);
        }
        it.x_lp += &dir.dx_lp * ap;
        it.z_lp += &dir.dz_lp * ad;
        y += &dir.dy * ad;
    }
    CoreResult { status: SolveStatus::IterationLimit, y, iterations: s.max_iterations, relative_gap: relgap }
}
