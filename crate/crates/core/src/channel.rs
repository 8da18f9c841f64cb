//! Field-response channel model and random channel realizations.

use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::linalg::{cis, CMat, CRow, CVec, C64};

pub type Point = Vector2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("user index {0} out of range")]
    UserOutOfRange(usize),
    #[error("invalid layout: {0}")]
    Layout(String),
}

/// Elevation/azimuth pairs of the paths leaving or reaching one array.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathAngles {
    pub elevation: Vec<f64>,
    pub azimuth: Vec<f64>,
}

impl PathAngles {
    pub fn new(elevation: Vec<f64>, azimuth: Vec<f64>) -> Self {
        assert_eq!(elevation.len(), azimuth.len());
        Self { elevation, azimuth }
    }

    pub fn len(&self) -> usize {
        self.elevation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elevation.is_empty()
    }

    /// Spatial frequency `(sinθ cosφ, cosθ)` of path `j`.
    pub fn direction(&self, j: usize) -> Point {
        let (th, ph) = (self.elevation[j], self.azimuth[j]);
        Point::new(th.sin() * ph.cos(), th.cos())
    }

    fn uniform(rng: &mut impl Rng, count: usize) -> Self {
        let elevation = (0..count).map(|_| rng.random_range(0.0..=PI)).collect();
        let azimuth = (0..count).map(|_| rng.random_range(0.0..=PI)).collect();
        Self { elevation, azimuth }
    }
}

/// Propagation distance difference of path `j` between `t` and the origin.
pub fn path_delay(t: &Point, paths: &PathAngles, j: usize) -> f64 {
    paths.direction(j).dot(t)
}

pub fn field_response_vector(t: &Point, paths: &PathAngles, wavelength: f64) -> CVec {
    let k = 2.0 * PI / wavelength;
    CVec::from_iterator(paths.len(), (0..paths.len()).map(|j| cis(k * path_delay(t, paths, j))))
}

/// Column `m` is the field response vector at `positions[m]`.
pub fn field_response_matrix(positions: &[Point], paths: &PathAngles, wavelength: f64) -> CMat {
    let mut g = CMat::zeros(paths.len(), positions.len());
    for (m, t) in positions.iter().enumerate() {
        g.set_column(m, &field_response_vector(t, paths, wavelength));
    }
    g
}

pub fn ris_field_response_matrix(ris_coords: &[Point], paths: &PathAngles, wavelength: f64) -> CMat {
    field_response_matrix(ris_coords, paths, wavelength)
}

/// Antenna positions `t_1..t_M` (meters, relative to the region center).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntennaLayout {
    pub positions: Vec<Point>,
}

impl AntennaLayout {
    pub fn new(positions: Vec<Point>) -> Self {
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min((self.positions[i] - self.positions[j]).norm());
            }
        }
        best
    }

    /// Checks the region and spacing invariants with relative slack `tol`.
    pub fn check(&self, region_side: f64, min_spacing: f64, tol: f64) -> Result<(), ChannelError> {
        let half = 0.5 * region_side * (1.0 + tol);
        for (m, t) in self.positions.iter().enumerate() {
            if t.x.abs() > half || t.y.abs() > half || !t.x.is_finite() || !t.y.is_finite() {
                return Err(ChannelError::Layout(format!("antenna {m} at ({}, {}) leaves the region", t.x, t.y)));
            }
        }
        if self.len() > 1 && self.min_distance() < min_spacing * (1.0 - tol) {
            return Err(ChannelError::Layout(format!(
                "minimum spacing {} below {min_spacing}",
                self.min_distance()
            )));
        }
        Ok(())
    }

    /// `rows × cols` grid at pitch `spacing` centered on the origin, filled
    /// row by row and truncated to `count` points.
    pub fn grid(count: usize, rows: usize, cols: usize, spacing: f64) -> Self {
        let x0 = -0.5 * (cols as f64 - 1.0) * spacing;
        let y0 = -0.5 * (rows as f64 - 1.0) * spacing;
        let positions = (0..count)
            .map(|i| Point::new(x0 + (i % cols) as f64 * spacing, y0 + (i / cols) as f64 * spacing))
            .collect();
        Self { positions }
    }

    /// Near-square uniform planar array of `count` elements at `spacing`.
    pub fn upa(count: usize, spacing: f64) -> Self {
        let mut rows = (count as f64).sqrt().floor() as usize;
        while rows > 1 && !count.is_multiple_of(rows) {
            rows -= 1;
        }
        let rows = rows.max(1);
        let cols = count.div_ceil(rows);
        let (rows, cols) = if cols > 2 * rows + 1 {
            let c = (count as f64).sqrt().ceil() as usize;
            (count.div_ceil(c), c)
        } else {
            (rows, cols)
        };
        Self::grid(count, rows, cols, spacing)
    }
}

/// RIS element coordinates: a uniform linear array along x.
pub fn ris_coordinates(n: usize, spacing: f64) -> Vec<Point> {
    (0..n).map(|i| Point::new(i as f64 * spacing, 0.0)).collect()
}

/// RIS phase shifts `φ_n`; `Φ = diag(e^{jφ})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSolution {
    pub phases: Vec<f64>,
}

impl PhaseSolution {
    pub fn identity(n: usize) -> Self {
        Self { phases: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Diagonal of `Φ`.
    pub fn diagonal(&self) -> CVec {
        CVec::from_iterator(self.len(), self.phases.iter().map(|&p| cis(p)))
    }

    pub fn matrix(&self) -> CMat {
        CMat::from_diagonal(&self.diagonal())
    }

    /// Lifted vector `v̄ = [vec(Φ*); 1]`.
    pub fn lifted(&self) -> CVec {
        let mut v = CVec::from_element(self.len() + 1, C64::new(1.0, 0.0));
        for (i, &p) in self.phases.iter().enumerate() {
            v[i] = cis(-p);
        }
        v
    }

    /// Inverse of [`Self::lifted`] after normalizing so the last entry is one.
    pub fn from_lifted(v: &CVec) -> Self {
        let n = v.len() - 1;
        let last = v[n].arg();
        Self { phases: (0..n).map(|i| -(v[i].arg() - last)).collect() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UserLink {
    pub position: Point,
    /// Transmit-side paths of the BS–user link.
    pub tx_paths: PathAngles,
    #[serde(skip)]
    pub sigma: CMat,
    /// `h_{2,k}ᴴ` as a row of length `N`.
    #[serde(skip)]
    pub h2: CRow,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelRealization {
    pub wavelength: f64,
    pub tx_paths: PathAngles,
    pub rx_paths: PathAngles,
    /// `L_r × L_t` path-response matrix of the BS–RIS link.
    #[serde(skip)]
    pub sigma: CMat,
    pub users: Vec<UserLink>,
    pub ris_coords: Vec<Point>,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_elements(&self) -> usize {
        self.ris_coords.len()
    }

    /// `F(r)`, the `L_r × N` receive FRM at the RIS.
    pub fn ris_frm(&self) -> CMat {
        ris_field_response_matrix(&self.ris_coords, &self.rx_paths, self.wavelength)
    }
}

/// `H(t̃) = F(r)ᴴ Σ G(t̃)`.
pub fn bs_ris_channel(real: &ChannelRealization, layout: &AntennaLayout) -> Result<CMat, ChannelError> {
    let g = field_response_matrix(&layout.positions, &real.tx_paths, real.wavelength);
    let f = real.ris_frm();
    if real.sigma.nrows() != f.nrows() || real.sigma.ncols() != g.nrows() {
        return Err(ChannelError::Dimension(format!(
            "Σ is {}×{}, expected {}×{}",
            real.sigma.nrows(),
            real.sigma.ncols(),
            f.nrows(),
            g.nrows()
        )));
    }
    Ok(f.adjoint() * &real.sigma * g)
}

/// `h_{1,k}ᴴ = 1ᴴ Σ_k G_k(t̃)`.
pub fn bs_user_channel(real: &ChannelRealization, layout: &AntennaLayout, k: usize) -> Result<CRow, ChannelError> {
    let user = real.users.get(k).ok_or(ChannelError::UserOutOfRange(k))?;
    let g = field_response_matrix(&layout.positions, &user.tx_paths, real.wavelength);
    if user.sigma.ncols() != g.nrows() {
        return Err(ChannelError::Dimension(format!(
            "Σ_{k} has {} columns for {} paths",
            user.sigma.ncols(),
            g.nrows()
        )));
    }
    let ones = CRow::from_element(user.sigma.nrows(), C64::new(1.0, 0.0));
    Ok(ones * &user.sigma * g)
}

/// `h_kᴴ = h_{2,k}ᴴ Φ H + h_{1,k}ᴴ`.
pub fn equivalent_user_channel(
    real: &ChannelRealization,
    layout: &AntennaLayout,
    phase: &PhaseSolution,
    k: usize,
) -> Result<CRow, ChannelError> {
    let h = bs_ris_channel(real, layout)?;
    let h1 = bs_user_channel(real, layout, k)?;
    let user = &real.users[k];
    if phase.len() != h.nrows() || user.h2.len() != h.nrows() {
        return Err(ChannelError::Dimension("RIS size disagrees with Φ or h2".into()));
    }
    Ok(cascade_row(&user.h2, phase, &h) + h1)
}

/// `h2ᴴ Φ H`.
pub fn cascade_row(h2: &CRow, phase: &PhaseSolution, h: &CMat) -> CRow {
    let d = phase.diagonal();
    let scaled = CRow::from_iterator(h2.len(), h2.iter().zip(d.iter()).map(|(a, b)| a * b));
    scaled * h
}

/// All layout-dependent channels for one realization.
#[derive(Debug, Clone)]
pub struct Links {
    pub h: CMat,
    pub h1: Vec<CRow>,
}

impl Links {
    pub fn new(real: &ChannelRealization, layout: &AntennaLayout) -> Result<Self, ChannelError> {
        let h = bs_ris_channel(real, layout)?;
        let h1 = (0..real.num_users())
            .map(|k| bs_user_channel(real, layout, k))
            .collect::<Result<_, _>>()?;
        Ok(Self { h, h1 })
    }

    pub fn user_rows(&self, real: &ChannelRealization, phase: &PhaseSolution) -> Vec<CRow> {
        real.users
            .iter()
            .zip(&self.h1)
            .map(|(u, h1)| cascade_row(&u.h2, phase, &self.h) + h1)
            .collect()
    }
}

fn complex_normal(rng: &mut impl Rng, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

pub fn pathloss(cfg: &ScenarioConfig, distance: f64, alpha: f64) -> f64 {
    cfg.k0 * (distance / cfg.d0).powf(-alpha)
}

/// Variance of diagonal entry `p` (zero-based) of a Rician LoS path-response
/// matrix with `paths` diagonal entries.
pub fn rician_variance(cfg: &ScenarioConfig, gain: f64, p: usize, paths: usize) -> f64 {
    let kappa = cfg.kappa;
    if p == 0 {
        if paths == 1 {
            gain
        } else {
            gain * kappa / (kappa + 1.0)
        }
    } else {
        gain / ((kappa + 1.0) * (paths as f64 - 1.0))
    }
}

fn rician_prm(rng: &mut impl Rng, cfg: &ScenarioConfig, rows: usize, cols: usize, gain: f64) -> CMat {
    let mut s = CMat::zeros(rows, cols);
    let diag = rows.min(cols);
    for p in 0..diag {
        s[(p, p)] = complex_normal(rng, rician_variance(cfg, gain, p, diag));
    }
    s
}

/// Draws one realization. Identical `(cfg, seed)` pairs give identical output.
pub fn sample_realization(cfg: &ScenarioConfig, seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bs = Point::from(cfg.bs_position);
    let ris = Point::from(cfg.ris_position);

    let tx_paths = PathAngles::uniform(&mut rng, cfg.l_t);
    let rx_paths = PathAngles::uniform(&mut rng, cfg.l_r);
    let sigma = rician_prm(&mut rng, cfg, cfg.l_r, cfg.l_t, pathloss(cfg, (ris - bs).norm(), cfg.alpha_bs_ris));
    let ris_coords = ris_coordinates(cfg.n, cfg.ris_spacing);

    let [c0, c1] = cfg.user_area;
    let (xlo, xhi) = (c0[0].min(c1[0]), c0[0].max(c1[0]));
    let (ylo, yhi) = (c0[1].min(c1[1]), c0[1].max(c1[1]));
    let users = (0..cfg.k)
        .map(|_| {
            let position = Point::new(rng.random_range(xlo..=xhi), rng.random_range(ylo..=yhi));
            let tx = PathAngles::uniform(&mut rng, cfg.l_tk);
            let z: f64 = StandardNormal.sample(&mut rng);
            let shadow_db = cfg.shadowing_db * z;
            let direct_gain = pathloss(cfg, (position - bs).norm(), cfg.alpha_bs_user) * 10f64.powf(shadow_db / 10.0);
            let mut sigma = CMat::zeros(cfg.l_tk, cfg.l_tk);
            for p in 0..cfg.l_tk {
                sigma[(p, p)] = complex_normal(&mut rng, direct_gain / cfg.l_tk as f64);
            }
            let ris_paths = PathAngles::uniform(&mut rng, cfg.l_tk);
            let ris_gain = pathloss(cfg, (position - ris).norm(), cfg.alpha_ris_user);
            let sigma2 = rician_prm(&mut rng, cfg, cfg.l_tk, cfg.l_tk, ris_gain);
            let f2 = ris_field_response_matrix(&ris_coords, &ris_paths, cfg.wavelength);
            let ones = CRow::from_element(cfg.l_tk, C64::new(1.0, 0.0));
            let h2 = ones * sigma2 * f2;
            UserLink { position, tx_paths: tx, sigma, h2 }
        })
        .collect();

    ChannelRealization { wavelength: cfg.wavelength, tx_paths, rx_paths, sigma, users, ris_coords, seed }
}
