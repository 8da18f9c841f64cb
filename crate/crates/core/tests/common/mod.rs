#![allow(dead_code)]

use maris::ao::{self, AoSettings, Evaluation};
use maris::beamforming::{min_sensing_gain, CovarianceProblem};
use maris::channel::{ChannelRealization, PathAngles, Point};
use maris::config::ScenarioConfig;
use maris::linalg::{CMat, CRow, CVec, C64};
use maris::position::PositionProblem;
use maris::srcr::PhaseProblem;
use maris::metrics::{sinr_from_row, steering_vector, CovarianceSolution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cnum(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn cmat(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| cnum(rng))
}

pub fn cvec(rng: &mut impl Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| cnum(rng))
}

pub fn crow(rng: &mut impl Rng, n: usize) -> CRow {
    CRow::from_fn(n, |_, _| cnum(rng))
}

pub fn hermitian(rng: &mut impl Rng, n: usize) -> CMat {
    let a = cmat(rng, n, n);
    (&a + a.adjoint()).scale(0.5)
}

pub fn psd(rng: &mut impl Rng, n: usize) -> CMat {
    let a = cmat(rng, n, n);
    &a * a.adjoint()
}

pub fn angles(rng: &mut impl Rng, count: usize) -> PathAngles {
    let pi = std::f64::consts::PI;
    PathAngles::new(
        (0..count).map(|_| rng.random_range(0.0..=pi)).collect(),
        (0..count).map(|_| rng.random_range(0.0..=pi)).collect(),
    )
}

pub fn point_in(rng: &mut impl Rng, side: f64) -> Point {
    let h = 0.5 * side;
    Point::new(rng.random_range(-h..=h), rng.random_range(-h..=h))
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Desk scenario with the given sizes.
pub fn desk(m: usize, k: usize, n: usize, l: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.m = m;
    cfg.k = k;
    cfg.n = n;
    cfg.l_t = l;
    cfg.l_r = l;
    cfg.l_tk = l;
    cfg
}

/// Draws with a feasible initial state, starting at `first`.
pub fn feasible_draws(cfg: &ScenarioConfig, first: u64, count: usize) -> Vec<(u64, ChannelRealization, ao::AoState)> {
    let settings = AoSettings::from_config(cfg);
    let mut out = Vec::new();
    let mut seed = first;
    while out.len() < count {
        let real = maris::channel::sample_realization(cfg, seed);
        if let Ok(state) = ao::initialize(cfg, &real, &settings) {
            out.push((seed, real, state));
        }
        seed += 1;
        assert!(seed < first + 50 * count as u64 + 100, "too few feasible draws");
    }
    out
}

pub fn noise(cfg: &ScenarioConfig) -> Vec<f64> {
    (0..cfg.k).map(|k| cfg.noise_power(k)).collect()
}

pub fn phase_problem(cfg: &ScenarioConfig, real: &ChannelRealization, st: &ao::AoState) -> PhaseProblem {
    let ev = Evaluation::new(cfg, real, &st.layout, &st.phase).unwrap();
    PhaseProblem {
        h: ev.links.h.clone(),
        steering: cfg.sensing_angles.iter().map(|&t| steering_vector(t, cfg.n, cfg.ris_spacing, cfg.wavelength)).collect(),
        h2: real.users.iter().map(|u| u.h2.clone()).collect(),
        h1: ev.links.h1.clone(),
        cov: st.cov.clone(),
        gamma: cfg.gamma,
        noise: noise(cfg),
    }
}

pub fn position_problem(cfg: &ScenarioConfig, real: &ChannelRealization, st: &ao::AoState) -> PositionProblem {
    PositionProblem::new(
        real,
        &st.phase,
        &st.cov,
        &cfg.sensing_angles,
        cfg.region_side,
        cfg.min_spacing,
        cfg.gamma,
        noise(cfg),
    )
}

fn complex_normal(rng: &mut impl Rng) -> C64 {
    use rand_distr::{Distribution, StandardNormal};
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    C64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// Sample mean of `|s x|²` for `x = W_r s_r + Σ_k w_k c_k` with unit-power
/// symbols, where `R_k = w_k w_kᴴ` and `W_r W_rᴴ = R − Σ R_k`.
pub fn monte_carlo_gain(row: &CRow, r: &CMat, r_k: &[CMat], draws: usize, seed: u64) -> f64 {
    let m = r.nrows();
    let mut radar = r.clone();
    for rk in r_k {
        radar -= rk;
    }
    let wr = maris::linalg::psd_factor(&radar);
    let wc: Vec<CVec> = r_k
        .iter()
        .map(|rk| {
            let (vals, vecs) = maris::linalg::hermitian_eigen(rk);
            let top = vals.len() - 1;
            vecs.column(top).into_owned() * C64::new(vals[top].max(0.0).sqrt(), 0.0)
        })
        .collect();
    let fr = row * &wr;
    let fc: Vec<C64> = wc.iter().map(|w| (row * w)[(0, 0)]).collect();
    let mut g = rng(seed);
    let mut acc = 0.0;
    for _ in 0..draws {
        let mut y = C64::new(0.0, 0.0);
        for i in 0..m {
            y += fr[i] * complex_normal(&mut g);
        }
        for f in &fc {
            y += f * complex_normal(&mut g);
        }
        acc += y.norm_sqr();
    }
    acc / draws as f64
}

/// Best feasible `(min gain, φ₁, φ₂)` of a two-element phase problem on an
/// `n × n` grid over `[c₁ ± s, c₂ ± s]` (the full circle when `s ≥ π`).
pub fn phase_grid(problem: &PhaseProblem, center: (f64, f64), span: f64, n: usize) -> Option<(f64, f64, f64)> {
    use maris::channel::PhaseSolution;
    let pi = std::f64::consts::PI;
    let (lo1, lo2, step) = if span >= pi {
        (0.0, 0.0, 2.0 * pi / n as f64)
    } else {
        (center.0 - span, center.1 - span, 2.0 * span / (n - 1) as f64)
    };
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..n {
        for j in 0..n {
            let ph = PhaseSolution { phases: vec![lo1 + step * i as f64, lo2 + step * j as f64] };
            if !problem.sinr_ok(&ph, 1e-6) {
                continue;
            }
            let g = problem.min_gain(&ph);
            if best.is_none_or(|b| g > b.0) {
                best = Some((g, ph.phases[0], ph.phases[1]));
            }
        }
    }
    best
}

pub fn fd_gradient(f: impl Fn(&Point) -> f64, t: &Point, h: f64) -> Point {
    let dx = Point::new(h, 0.0);
    let dy = Point::new(0.0, h);
    Point::new((f(&(t + dx)) - f(&(t - dx))) / (2.0 * h), (f(&(t + dy)) - f(&(t - dy))) / (2.0 * h))
}

pub fn fd_hessian(f: impl Fn(&Point) -> f64, t: &Point, h: f64) -> nalgebra::Matrix2<f64> {
    let dx = Point::new(h, 0.0);
    let dy = Point::new(0.0, h);
    let f0 = f(t);
    let xx = (f(&(t + dx)) - 2.0 * f0 + f(&(t - dx))) / (h * h);
    let yy = (f(&(t + dy)) - 2.0 * f0 + f(&(t - dy))) / (h * h);
    let xy = (f(&(t + dx + dy)) - f(&(t + dx - dy)) - f(&(t - dx + dy)) + f(&(t - dx - dy))) / (4.0 * h * h);
    nalgebra::Matrix2::new(xx, xy, xy, yy)
}

/// Random unit beam directions around maximum-ratio transmission and a random
/// radar covariance, with user powers solved so every SINR target holds with
/// equality and the radar part taking the rest of the budget. Returns the
/// min sensing gain, or `None` when no such power split exists.
pub fn random_rank_one(p: &CovarianceProblem, rng: &mut impl Rng) -> Option<f64> {
    let m = p.m();
    let k = p.user_rows.len();
    let dirs: Vec<CVec> = p
        .user_rows
        .iter()
        .map(|h| {
            let w = h.adjoint().unscale(h.norm()) + cvec(rng, m).scale(rng.random_range(0.0..1.0));
            w.unscale(w.norm())
        })
        .collect();
    let radar = psd(rng, m);
    let radar = radar.unscale(radar.trace().re);
    // p_k·a_kk/Γ − Σ_{j≠k} p_j·a_kj = σ_k² + s·c_k, linear in the radar power s.
    let a = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        let g = (&p.user_rows[i] * &dirs[j])[(0, 0)].norm_sqr();
        if i == j { g / p.gamma } else { -g }
    });
    let lu = a.lu();
    let base = lu.solve(&nalgebra::DVector::from_iterator(k, p.noise.iter().copied()))?;
    let per_radar =
        lu.solve(&nalgebra::DVector::from_iterator(k, p.user_rows.iter().map(|h| maris::linalg::row_quadratic(h, &radar))))?;
    let s = (p.p0 - base.sum()) / (1.0 + per_radar.sum());
    let powers = &base + &per_radar * s;
    if s < 0.0 || powers.iter().any(|&x| x < 0.0) {
        return None;
    }
    let r_k: Vec<CMat> = dirs.iter().zip(powers.iter()).map(|(w, &pw)| (w * w.adjoint()).scale(pw)).collect();
    let mut r = radar.scale(s);
    for rk in &r_k {
        r += rk;
    }
    let cov = CovarianceSolution { r, r_k };
    let ok = p
        .user_rows
        .iter()
        .enumerate()
        .all(|(i, h)| sinr_from_row(h, &cov, i, p.noise[i]).unwrap() >= p.gamma * (1.0 - 1e-9));
    ok.then(|| min_sensing_gain(&p.sensing_rows, &cov.r))
}
