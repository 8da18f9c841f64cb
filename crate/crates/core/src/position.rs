//! Per-antenna position updates by successive convex approximation.
//!
//! With every other antenna, the covariance and the RIS phases fixed, each
//! user's SINR quadratic and each sensing gain are trigonometric polynomials
//! in the position `t` of the antenna being moved. Both are minorized by
//! concave quadratics anchored at the current position, which yields a small
//! convex QCP in `(t, χ)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{AntennaLayout, ChannelRealization, PhaseSolution, Point};
use crate::linalg::{cis, row_quadratic, CMat, CRow, C64};
use crate::metrics::{sinr_from_row, steering_vector, CovarianceSolution};
use crate::solver::{solve_qcp, ConicProgram, LinearConstraint, QuadraticConstraint, Relation, SolveStatus, SolverSettings};

/// Relative gain change treated as evaluation noise rather than progress.
const ROUNDOFF: f64 = 1e-12;

/// `constant + Σ c·cos(νᵀt + ψ)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SinusoidSum {
    pub constant: f64,
    pub terms: Vec<(f64, Point, f64)>,
}

impl SinusoidSum {
    pub fn value(&self, t: &Point) -> f64 {
        self.constant + self.terms.iter().map(|(c, nu, psi)| c * (nu.dot(t) + psi).cos()).sum::<f64>()
    }

    pub fn gradient(&self, t: &Point) -> Point {
        self.terms.iter().fold(Point::zeros(), |acc, (c, nu, psi)| acc - nu * (c * (nu.dot(t) + psi).sin()))
    }

    pub fn hessian(&self, t: &Point) -> nalgebra::Matrix2<f64> {
        self.terms
            .iter()
            .fold(nalgebra::Matrix2::zeros(), |acc, (c, nu, psi)| acc - nu * nu.transpose() * (c * (nu.dot(t) + psi).cos()))
    }

    /// `Σ |c|·‖ν‖²`, an upper bound on the Hessian spectral norm everywhere.
    pub fn curvature_bound(&self) -> f64 {
        self.terms.iter().map(|(c, nu, _)| c.abs() * nu.norm_squared()).sum()
    }
}

/// Spectral norm of a symmetric 2×2 matrix.
pub fn spectral_norm2(h: &nalgebra::Matrix2<f64>) -> f64 {
    let tr = 0.5 * (h[(0, 0)] + h[(1, 1)]);
    let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
    let disc = (tr * tr - det).max(0.0).sqrt();
    (tr + disc).abs().max((tr - disc).abs())
}

/// Trigonometric polynomial `Σ_j α_j e^{jkωⱼᵀt}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSeries {
    pub coeffs: Vec<C64>,
    /// Wave vectors `(2π/λ)(sinθ cosφ, cosθ)`.
    pub wave: Vec<Point>,
}

impl PathSeries {
    pub fn eval(&self, t: &Point) -> C64 {
        self.coeffs.iter().zip(&self.wave).map(|(a, w)| a * cis(w.dot(t))).sum()
    }

    fn concat(&self, other: &PathSeries) -> PathSeries {
        let mut coeffs = self.coeffs.clone();
        coeffs.extend_from_slice(&other.coeffs);
        let mut wave = self.wave.clone();
        wave.extend_from_slice(&other.wave);
        PathSeries { coeffs, wave }
    }

    /// `r|x(t)|² + 2Re(a·x(t))` as a sinusoid sum.
    pub fn quadratic_form(&self, r: f64, a: C64) -> SinusoidSum {
        let n = self.coeffs.len();
        let mut out = SinusoidSum::default();
        out.constant = r * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
        for i in 0..n {
            for j in i + 1..n {
                let (ci, cj) = (self.coeffs[i], self.coeffs[j]);
                let amp = 2.0 * r * ci.norm() * cj.norm();
                if amp != 0.0 {
                    out.terms.push((amp, self.wave[i] - self.wave[j], ci.arg() - cj.arg()));
                }
            }
        }
        if a != C64::new(0.0, 0.0) {
            for i in 0..n {
                let amp = 2.0 * a.norm() * self.coeffs[i].norm();
                if amp != 0.0 {
                    out.terms.push((amp, self.wave[i], a.arg() + self.coeffs[i].arg()));
                }
            }
        }
        out
    }
}

fn wave_vectors(dirs: &crate::channel::PathAngles, wavelength: f64) -> Vec<Point> {
    let k = 2.0 * PI / wavelength;
    (0..dirs.len()).map(|j| dirs.direction(j) * k).collect()
}

/// SINR quadratic of user `k` as a function of antenna `m`'s position:
/// `h R̃ hᴴ = Ĩ(t) + b̃` with `Ĩ(t) = R̃_mm|x(t)|² + 2Re(ã x(t))` and
/// `x(t) = pᴴg(t) + qᴴg_k(t)`.
#[derive(Debug, Clone)]
pub struct SinrExpansion {
    pub p: CRow,
    pub q: CRow,
    pub x: PathSeries,
    pub r_mm: f64,
    pub a_tilde: C64,
    pub b_tilde: f64,
    pub sum: SinusoidSum,
    pub wavelength: f64,
}

impl SinrExpansion {
    /// `Ĩ(t)` evaluated directly from `x(t)`.
    pub fn i_tilde(&self, t: &Point) -> f64 {
        let x = self.x.eval(t);
        self.r_mm * x.norm_sqr() + 2.0 * (self.a_tilde * x).re
    }
}

pub fn grad_i_tilde(e: &SinrExpansion, t: &Point) -> Point {
    e.sum.gradient(t)
}

pub fn hess_i_tilde(e: &SinrExpansion, t: &Point) -> nalgebra::Matrix2<f64> {
    e.sum.hessian(t)
}

/// Closed-form curvature bound of `Ĩ`.
pub fn delta_tilde(e: &SinrExpansion) -> f64 {
    let lam2 = e.wavelength * e.wavelength;
    let pa: Vec<f64> = e.p.iter().map(|z| z.norm()).collect();
    let qa: Vec<f64> = e.q.iter().map(|z| z.norm()).collect();
    let pairs = |v: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                s += v[i] * v[j];
            }
        }
        s
    };
    let cross: f64 = pa.iter().sum::<f64>() * qa.iter().sum::<f64>();
    let quad = 64.0 * PI * PI / lam2 * e.r_mm.abs() * (pairs(&pa) + pairs(&qa) + cross);
    let lin = 16.0 * PI * PI / lam2 * e.a_tilde.norm() * (pa.iter().sum::<f64>() + qa.iter().sum::<f64>());
    quad + lin
}

/// Sensing gain toward `θ_l` as a function of antenna `m`'s position and its
/// linear minorant `Ī(t) = Re(Σ_j b_j e^{jωⱼᵀt})` anchored at `tⁱ`:
/// `P(t) ≥ Ī(t) + dᴴBd − R_mm|dᴴg(tⁱ)|²` with equality at `tⁱ`.
#[derive(Debug, Clone)]
pub struct SensingExpansion {
    /// `dᴴ g(t)` series.
    pub y: PathSeries,
    pub r_mm: f64,
    /// `Σ_{q≠m} R_mq conj(s_q)`.
    pub a_bar: C64,
    /// `dᴴ B d`, the part of `P` independent of `t_m`.
    pub b_bar: f64,
    pub anchor: Point,
    pub y_anchor: C64,
    /// `b = b₁ + b₂`.
    pub b: Vec<C64>,
    pub sum: SinusoidSum,
    pub wavelength: f64,
}

impl SensingExpansion {
    /// True gain `P(t)` with the other antennas fixed.
    pub fn gain(&self, t: &Point) -> f64 {
        let y = self.y.eval(t);
        self.r_mm * y.norm_sqr() + 2.0 * (self.a_bar * y).re + self.b_bar
    }

    pub fn i_bar(&self, t: &Point) -> f64 {
        self.sum.value(t)
    }

    /// `Ī(t) + dᴴBd − R_mm|dᴴg(tⁱ)|²`.
    pub fn minorant(&self, t: &Point) -> f64 {
        self.i_bar(t) + self.b_bar - self.r_mm * self.y_anchor.norm_sqr()
    }
}

pub fn delta_bar(e: &SensingExpansion) -> f64 {
    8.0 * PI * PI / (e.wavelength * e.wavelength) * e.b.iter().map(|b| b.norm()).sum::<f64>()
}

/// Concave quadratic `f(tⁱ) + ∇f(tⁱ)ᵀ(t − tⁱ) − (δ/2)‖t − tⁱ‖² + offset`.
#[derive(Debug, Clone)]
pub struct QuadraticMinorant {
    pub anchor: Point,
    pub value: f64,
    pub gradient: Point,
    pub delta: f64,
}

impl QuadraticMinorant {
    pub fn eval(&self, t: &Point) -> f64 {
        let d = t - self.anchor;
        self.value + self.gradient.dot(&d) - 0.5 * self.delta * d.norm_squared()
    }
}

/// Surrogate of `Ĩ(t) + b̃` at `tⁱ`.
pub fn sinr_surrogate_constraint(e: &SinrExpansion, anchor: &Point, delta: f64) -> QuadraticMinorant {
    QuadraticMinorant {
        anchor: *anchor,
        value: e.sum.value(anchor) + e.b_tilde,
        gradient: e.sum.gradient(anchor),
        delta,
    }
}

/// Surrogate of the sensing gain at `tⁱ`.
pub fn sensing_surrogate_constraint(e: &SensingExpansion, delta: f64) -> QuadraticMinorant {
    QuadraticMinorant {
        anchor: e.anchor,
        value: e.minorant(&e.anchor),
        gradient: e.sum.gradient(&e.anchor),
        delta,
    }
}

/// Linearized spacing constraints `eᵀ(t − t_q) ≥ D` with
/// `e = (tⁱ − t_q)/‖tⁱ − t_q‖`, returned as `(e, rhs)` meaning `eᵀt ≥ rhs`.
pub fn min_distance_constraints(
    layout: &AntennaLayout,
    m: usize,
    anchor: &Point,
    d: f64,
) -> Result<Vec<(Point, f64)>, PositionError> {
    let mut out = Vec::new();
    for (q, tq) in layout.positions.iter().enumerate() {
        if q == m {
            continue;
        }
        let diff = anchor - tq;
        let n = diff.norm();
        if n == 0.0 {
            return Err(PositionError::CoincidentAnchor(q));
        }
        let e = diff / n;
        out.push((e, d + e.dot(tq)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PositionError {
    #[error("anchor coincides with antenna {0}")]
    CoincidentAnchor(usize),
}

/// Everything the position block needs, with channel entries expressed as
/// path series in each antenna position.
#[derive(Debug, Clone)]
pub struct PositionProblem {
    pub wavelength: f64,
    pub region_side: f64,
    pub min_spacing: f64,
    pub tx_wave: Vec<Point>,
    pub user_wave: Vec<Vec<Point>>,
    /// `a(θ_l)ᴴ Φ Fᴴ Σ` per sensing angle.
    pub sense_coef: Vec<CRow>,
    /// `p_kᴴ = h_{2,k}ᴴ Φ Fᴴ Σ`.
    pub user_p: Vec<CRow>,
    /// `q_kᴴ = 1ᴴ Σ_k`.
    pub user_q: Vec<CRow>,
    pub cov: CovarianceSolution,
    pub gamma: f64,
    pub noise: Vec<f64>,
}

fn series(row: &CRow, wave: &[Point]) -> PathSeries {
    PathSeries { coeffs: row.iter().copied().collect(), wave: wave.to_vec() }
}

impl PositionProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        real: &ChannelRealization,
        phase: &PhaseSolution,
        cov: &CovarianceSolution,
        sensing_angles: &[f64],
        region_side: f64,
        min_spacing: f64,
        gamma: f64,
        noise: Vec<f64>,
    ) -> Self {
        let lambda = real.wavelength;
        let f = real.ris_frm();
        let d = phase.diagonal();
        let fs: CMat = f.adjoint() * &real.sigma;
        let n = real.num_elements();
        let spacing = if n > 1 { real.ris_coords[1].x - real.ris_coords[0].x } else { 0.0 };
        let weighted = |w: &CRow| CRow::from_iterator(n, w.iter().zip(d.iter()).map(|(a, b)| a * b)) * &fs;
        let sense_coef = sensing_angles
            .iter()
            .map(|&th| weighted(&steering_vector(th, n, spacing, lambda).adjoint()))
            .collect();
        let user_p = real.users.iter().map(|u| weighted(&u.h2)).collect();
        let user_q = real
            .users
            .iter()
            .map(|u| CRow::from_element(u.sigma.nrows(), C64::new(1.0, 0.0)) * &u.sigma)
            .collect();
        Self {
            wavelength: lambda,
            region_side,
            min_spacing,
            tx_wave: wave_vectors(&real.tx_paths, lambda),
            user_wave: real.users.iter().map(|u| wave_vectors(&u.tx_paths, lambda)).collect(),
            sense_coef,
            user_p,
            user_q,
            cov: cov.clone(),
            gamma,
            noise,
        }
    }

    fn user_series(&self, k: usize) -> PathSeries {
        series(&self.user_p[k], &self.tx_wave).concat(&series(&self.user_q[k], &self.user_wave[k]))
    }

    pub fn sensing_rows(&self, layout: &AntennaLayout) -> Vec<CRow> {
        self.sense_coef
            .iter()
            .map(|c| {
                let s = series(c, &self.tx_wave);
                CRow::from_iterator(layout.len(), layout.positions.iter().map(|t| s.eval(t)))
            })
            .collect()
    }

    pub fn user_rows(&self, layout: &AntennaLayout) -> Vec<CRow> {
        (0..self.user_p.len())
            .map(|k| {
                let s = self.user_series(k);
                CRow::from_iterator(layout.len(), layout.positions.iter().map(|t| s.eval(t)))
            })
            .collect()
    }

    pub fn gains(&self, layout: &AntennaLayout) -> Vec<f64> {
        self.sensing_rows(layout).iter().map(|s| row_quadratic(s, &self.cov.r)).collect()
    }

    pub fn min_gain(&self, layout: &AntennaLayout) -> f64 {
        self.gains(layout).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn sinrs(&self, layout: &AntennaLayout) -> Vec<f64> {
        self.user_rows(layout)
            .iter()
            .enumerate()
            .map(|(k, h)| sinr_from_row(h, &self.cov, k, self.noise[k]).unwrap_or(0.0))
            .collect()
    }

    pub fn sinr_ok(&self, layout: &AntennaLayout, rel_tol: f64) -> bool {
        self.sinrs(layout).iter().all(|&s| s >= self.gamma * (1.0 - rel_tol))
    }

    /// Region and spacing feasibility of `layout`.
    pub fn layout_ok(&self, layout: &AntennaLayout) -> bool {
        layout.check(self.region_side, self.min_spacing, 1e-9).is_ok()
    }

    /// `R̃_k = (1+1/Γ)R_k − R`.
    pub fn r_tilde(&self, k: usize) -> CMat {
        self.cov.r_k[k].scale(1.0 + 1.0 / self.gamma) - &self.cov.r
    }

    pub fn sinr_expansion(&self, layout: &AntennaLayout, k: usize, m: usize) -> SinrExpansion {
        let rt = self.r_tilde(k);
        let row = &self.user_rows(layout)[k];
        let mut a_tilde = C64::new(0.0, 0.0);
        let mut b_tilde = C64::new(0.0, 0.0);
        for j in 0..layout.len() {
            if j == m {
                continue;
            }
            a_tilde += rt[(m, j)] * row[j].conj();
            for i in 0..layout.len() {
                if i != m {
                    b_tilde += row[i] * rt[(i, j)] * row[j].conj();
                }
            }
        }
        let x = self.user_series(k);
        let r_mm = rt[(m, m)].re;
        let sum = x.quadratic_form(r_mm, a_tilde);
        SinrExpansion {
            p: self.user_p[k].clone(),
            q: self.user_q[k].clone(),
            x,
            r_mm,
            a_tilde,
            b_tilde: b_tilde.re,
            sum,
            wavelength: self.wavelength,
        }
    }

    pub fn sensing_expansion(&self, layout: &AntennaLayout, l: usize, m: usize) -> SensingExpansion {
        let r = &self.cov.r;
        let s = &self.sensing_rows(layout)[l];
        let mut a_bar = C64::new(0.0, 0.0);
        let mut b_bar = C64::new(0.0, 0.0);
        for j in 0..layout.len() {
            if j == m {
                continue;
            }
            a_bar += r[(m, j)] * s[j].conj();
            for i in 0..layout.len() {
                if i != m {
                    b_bar += s[i] * r[(i, j)] * s[j].conj();
                }
            }
        }
        let y = series(&self.sense_coef[l], &self.tx_wave);
        let anchor = layout.positions[m];
        let y_anchor = y.eval(&anchor);
        let r_mm = r[(m, m)].re;
        let c = y_anchor.conj() * r_mm + a_bar;
        let b: Vec<C64> = y.coeffs.iter().map(|beta| c * beta * 2.0).collect();
        let sum = SinusoidSum {
            constant: 0.0,
            terms: b.iter().zip(&y.wave).filter(|(b, _)| b.norm() > 0.0).map(|(b, w)| (b.norm(), *w, b.arg())).collect(),
        };
        SensingExpansion {
            y,
            r_mm,
            a_bar,
            b_bar: b_bar.re,
            anchor,
            y_anchor,
            b,
            sum,
            wavelength: self.wavelength,
        }
    }
}

/// Largest ratio `‖∇²f(t)‖₂ / δ` over `samples` points drawn uniformly from
/// the square of side `side`; values above one mean `δ` is not a valid bound.
pub fn sampled_curvature_ratio(sum: &SinusoidSum, delta: f64, side: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 0.5 * side;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let t = Point::new(rng.random_range(-h..=h), rng.random_range(-h..=h));
        let norm = spectral_norm2(&sum.hessian(&t));
        if norm > 0.0 {
            worst = worst.max(if delta > 0.0 { norm / delta } else { f64::INFINITY });
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaStatus {
    Moved,
    Unchanged,
    /// The QCP could not be solved at the anchor.
    SolverIssue,
}

#[derive(Debug, Clone)]
pub struct AntennaOutcome {
    pub position: Point,
    pub min_gain: f64,
    pub status: AntennaStatus,
    pub sca_iterations: usize,
    /// Curvature bounds that failed the sampled check and were enlarged.
    pub inflations: usize,
}

/// Settings of the per-antenna SCA loop.
#[derive(Debug, Clone)]
pub struct ScaSettings {
    pub inner_eps: f64,
    pub max_iter: usize,
    /// Points used by the sampled curvature check (zero disables it).
    pub curvature_samples: usize,
    /// Side of the restart lattice (below two disables restarts).
    pub seed_grid: usize,
    /// Number of lattice restarts.
    pub seed_starts: usize,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self { inner_eps: 1e-4, max_iter: 200, curvature_samples: 32, seed_grid: 64, seed_starts: 4 }
    }
}

struct Surrogates {
    sensing: Vec<QuadraticMinorant>,
    sinr: Vec<QuadraticMinorant>,
    inflations: usize,
}

impl PositionProblem {
    fn surrogates(&self, layout: &AntennaLayout, m: usize, sca: &ScaSettings) -> Surrogates {
        let mut inflations = 0;
        let mut checked = |sum: &SinusoidSum, delta: f64, salt: u64| -> f64 {
            if sca.curvature_samples == 0 {
                return delta;
            }
            let ratio = sampled_curvature_ratio(sum, delta, self.region_side, sca.curvature_samples, salt);
            if ratio > 1.0 {
                inflations += 1;
                log::warn!("curvature bound violated by factor {ratio:.3}; inflating");
                delta * ratio * (1.0 + 1e-9)
            } else {
                delta
            }
        };
        let mut sensing = Vec::new();
        for l in 0..self.sense_coef.len() {
            let e = self.sensing_expansion(layout, l, m);
            let d = checked(&e.sum, delta_bar(&e), (m * 1000 + l) as u64);
            sensing.push(sensing_surrogate_constraint(&e, d));
        }
        let mut sinr = Vec::new();
        let anchor = layout.positions[m];
        for k in 0..self.user_p.len() {
            let e = self.sinr_expansion(layout, k, m);
            let d = checked(&e.sum, delta_tilde(&e), (m * 1000 + 500 + k) as u64);
            sinr.push(sinr_surrogate_constraint(&e, &anchor, d));
        }
        Surrogates { sensing, sinr, inflations }
    }

    /// Solves the surrogate QCP for antenna `m` at the current layout.
    /// Returns the maximizing position and the surrogate optimum.
    pub fn solve_surrogate(
        &self,
        layout: &AntennaLayout,
        m: usize,
        sca: &ScaSettings,
        settings: &SolverSettings,
    ) -> Result<(Point, f64, usize), SolveStatus> {
        let anchor = layout.positions[m];
        let sur = self.surrogates(layout, m, sca);
        let lam = self.wavelength;
        let scale = sur.sensing.iter().map(|s| s.value.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        let mut p = ConicProgram::new();
        let chi = p.add_var();
        let u = p.add_vars(2);
        p.set_objective(chi, 1.0);
        // Each minorant f̂(tⁱ + λu) ≥ rhs as a convex quadratic in u.
        let mut add = |q: &QuadraticMinorant, norm: f64, with_chi: bool, rhs: f64| {
            let curv = 0.5 * q.delta * lam * lam / norm;
            let mut linear = vec![(u[0], -q.gradient.x * lam / norm), (u[1], -q.gradient.y * lam / norm)];
            if with_chi {
                linear.push((chi, 1.0));
            }
            p.add_quadratic(QuadraticConstraint {
                vars: u.clone(),
                quad: nalgebra::DMatrix::identity(2, 2) * curv,
                linear,
                constant: (rhs - q.value) / norm,
            });
        };
        for s in &sur.sensing {
            add(s, scale, true, 0.0);
        }
        for (k, s) in sur.sinr.iter().enumerate() {
            let norm = self.noise[k];
            add(s, norm, false, self.noise[k]);
        }
        let h = 0.5 * self.region_side;
        for (axis, &var) in u.iter().enumerate() {
            let c = anchor[axis];
            p.add_linear(LinearConstraint::new(vec![(var, lam)], Relation::LessEq, h - c));
            p.add_linear(LinearConstraint::new(vec![(var, lam)], Relation::GreaterEq, -h - c));
        }
        let dist = min_distance_constraints(layout, m, &anchor, self.min_spacing).map_err(|_| SolveStatus::Infeasible)?;
        for (e, rhs) in dist {
            // eᵀ(tⁱ + λu) ≥ rhs
            p.add_linear(LinearConstraint::new(
                vec![(u[0], e.x), (u[1], e.y)],
                Relation::GreaterEq,
                (rhs - e.dot(&anchor)) / lam,
            ));
        }
        let rep = solve_qcp(&p, settings).map_err(|_| SolveStatus::NumericalFailure)?;
        if rep.status != SolveStatus::Optimal {
            return Err(rep.status);
        }
        let t = anchor + Point::new(rep.solution[u[0]], rep.solution[u[1]]) * lam;
        Ok((t, rep.solution[chi] * scale, sur.inflations))
    }

    /// SCA loop for antenna `m`, moving only on measured improvement.
    ///
    /// Besides the current anchor, the loop is restarted from the best
    /// feasible points of a coarse `seed_grid × seed_grid` lattice over the
    /// region; the best measured result wins.
    pub fn optimize_antenna(
        &self,
        layout: &AntennaLayout,
        m: usize,
        sca: &ScaSettings,
        settings: &SolverSettings,
    ) -> AntennaOutcome {
        let start_gain = self.min_gain(layout);
        let mut best = self.climb(layout, start_gain, m, sca, settings);
        for seed in self.seed_points(layout, m, sca) {
            let mut trial = layout.clone();
            trial.positions[m] = seed.0;
            if seed.1 <= best.min_gain {
                continue;
            }
            let mut out = self.climb(&trial, seed.1, m, sca, settings);
            out.sca_iterations += best.sca_iterations;
            out.inflations += best.inflations;
            if out.min_gain > best.min_gain {
                best = out;
            } else {
                best.sca_iterations = out.sca_iterations;
                best.inflations = out.inflations;
            }
        }
        if best.min_gain > start_gain + ROUNDOFF * start_gain.abs() {
            best.status = AntennaStatus::Moved;
        } else {
            best.position = layout.positions[m];
            best.min_gain = start_gain;
            if best.status == AntennaStatus::Moved {
                best.status = AntennaStatus::Unchanged;
            }
        }
        best
    }

    /// Feasible local maxima of the gain on the restart lattice for antenna
    /// `m`, best first, that beat the current gain.
    fn seed_points(&self, layout: &AntennaLayout, m: usize, sca: &ScaSettings) -> Vec<(Point, f64)> {
        let g = sca.seed_grid;
        if g < 2 || sca.seed_starts == 0 {
            return Vec::new();
        }
        let current = self.min_gain(layout);
        let h = 0.5 * self.region_side;
        let step = self.region_side / (g - 1) as f64;
        let point = |i: usize, j: usize| Point::new(-h + step * i as f64, -h + step * j as f64);
        let mut trial = layout.clone();
        let mut values = vec![None; g * g];
        for i in 0..g {
            for j in 0..g {
                trial.positions[m] = point(i, j);
                if self.layout_ok(&trial) && self.sinr_ok(&trial, 1e-6) {
                    values[i * g + j] = Some(self.min_gain(&trial));
                }
            }
        }
        let mut found = Vec::new();
        for i in 0..g {
            for j in 0..g {
                let Some(v) = values[i * g + j] else { continue };
                if v <= current + ROUNDOFF * current.abs() {
                    continue;
                }
                let peak = (i.saturating_sub(1)..(i + 2).min(g))
                    .flat_map(|a| (j.saturating_sub(1)..(j + 2).min(g)).map(move |b| (a, b)))
                    .all(|(a, b)| values[a * g + b].is_none_or(|w| w <= v));
                if peak {
                    found.push((point(i, j), v));
                }
            }
        }
        found.sort_by(|a, b| b.1.total_cmp(&a.1));
        found.truncate(sca.seed_starts);
        found
    }

    fn climb(
        &self,
        layout: &AntennaLayout,
        start_gain: f64,
        m: usize,
        sca: &ScaSettings,
        settings: &SolverSettings,
    ) -> AntennaOutcome {
        let mut current = layout.clone();
        let mut gain = start_gain;
        let mut status = AntennaStatus::Unchanged;
        let mut iterations = 0;
        let mut inflations = 0;
        while iterations < sca.max_iter {
            iterations += 1;
            let (t, _, infl) = match self.solve_surrogate(&current, m, sca, settings) {
                Ok(r) => r,
                Err(s) => {
                    log::debug!("antenna {m}: surrogate QCP returned {s:?}");
                    if status == AntennaStatus::Unchanged {
                        status = AntennaStatus::SolverIssue;
                    }
                    break;
                }
            };
            inflations += infl;
            let mut trial = current.clone();
            trial.positions[m] = self.project(t);
            if !self.layout_ok(&trial) || !self.sinr_ok(&trial, 1e-6) {
                break;
            }
            let new_gain = self.min_gain(&trial);
            if new_gain <= gain + ROUNDOFF * gain.abs() {
                break;
            }
            let improvement = (new_gain - gain) / gain.abs().max(f64::MIN_POSITIVE);
            current = trial;
            gain = new_gain;
            status = AntennaStatus::Moved;
            if improvement <= sca.inner_eps {
                break;
            }
        }
        AntennaOutcome { position: current.positions[m], min_gain: gain, status, sca_iterations: iterations, inflations }
    }

    fn project(&self, t: Point) -> Point {
        let h = 0.5 * self.region_side;
        Point::new(t.x.clamp(-h, h), t.y.clamp(-h, h))
    }
}
