//! Beampattern gain, SINR and channel diagnostics.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::channel::{AntennaLayout, ChannelError, ChannelRealization, Links, PhaseSolution};
use crate::linalg::{cis, min_eigenvalue, row_quadratic, symmetrize_hermitian, CMat, CRow, CVec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("covariance is not Hermitian")]
    NotHermitian,
    #[error("sensing angle set is empty")]
    EmptyAngles,
    #[error("user {0} has a zero channel")]
    ZeroChannel(usize),
    #[error("cross-correlation needs at least two users")]
    TooFewUsers,
    #[error("interference term for user {0} is negative ({1:e})")]
    NegativeInterference(usize, f64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Transmit covariance `R` and the per-user parts `R_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSolution {
    pub r: CMat,
    pub r_k: Vec<CMat>,
}

impl CovarianceSolution {
    /// `R − Σ_k R_k`, the covariance left for dedicated sensing.
    pub fn radar_part(&self) -> CMat {
        let mut out = self.r.clone();
        for rk in &self.r_k {
            out -= rk;
        }
        out
    }

    /// Largest violation of `R ⪰ 0`, `R_k ⪰ 0`, `R − ΣR_k ⪰ 0`, `tr R ≤ P0`,
    /// measured in absolute units of `P0`.
    pub fn max_violation(&self, p0: f64) -> f64 {
        let mut worst = (-min_eigenvalue(&self.r)).max(0.0);
        for rk in &self.r_k {
            worst = worst.max(-min_eigenvalue(rk));
        }
        worst = worst.max(-min_eigenvalue(&self.radar_part()));
        worst.max(self.r.trace().re - p0) / p0
    }
}

/// `a(θ)` with entries `exp(j2π(n−1)d sinθ/λ)`.
pub fn steering_vector(theta: f64, n: usize, spacing: f64, wavelength: f64) -> CVec {
    let k = 2.0 * PI * spacing * theta.sin() / wavelength;
    CVec::from_iterator(n, (0..n).map(|i| cis(k * i as f64)))
}

/// `a(θ)ᴴ Φ H`, the row through which `R` radiates toward `θ`.
pub fn sensing_row(h: &CMat, phase: &PhaseSolution, a: &CVec) -> CRow {
    let d = phase.diagonal();
    let w = CRow::from_iterator(a.len(), a.iter().zip(d.iter()).map(|(a, p)| a.conj() * p));
    w * h
}

fn checked(r: &CMat) -> Result<CMat, MetricsError> {
    symmetrize_hermitian(r).ok_or(MetricsError::NotHermitian)
}

fn ris_steering(real: &ChannelRealization, theta: f64) -> CVec {
    let n = real.num_elements();
    let spacing = if n > 1 { real.ris_coords[1].x - real.ris_coords[0].x } else { 0.0 };
    steering_vector(theta, n, spacing, real.wavelength)
}

/// `P(θ) = a(θ)ᴴ Φ H R Hᴴ Φᴴ a(θ)`.
pub fn beampattern_gain(
    real: &ChannelRealization,
    layout: &AntennaLayout,
    phase: &PhaseSolution,
    r: &CMat,
    theta: f64,
) -> Result<f64, MetricsError> {
    let r = checked(r)?;
    let links = Links::new(real, layout)?;
    Ok(row_quadratic(&sensing_row(&links.h, phase, &ris_steering(real, theta)), &r))
}

/// Minimum of [`beampattern_gain`] over `angles` and the index attaining it.
pub fn min_beampattern_gain(
    real: &ChannelRealization,
    layout: &AntennaLayout,
    phase: &PhaseSolution,
    r: &CMat,
    angles: &[f64],
) -> Result<(f64, usize), MetricsError> {
    if angles.is_empty() {
        return Err(MetricsError::EmptyAngles);
    }
    let r = checked(r)?;
    let links = Links::new(real, layout)?;
    let gains: Vec<f64> = angles
        .iter()
        .map(|&t| row_quadratic(&sensing_row(&links.h, phase, &ris_steering(real, t)), &r))
        .collect();
    Ok(argmin(&gains))
}

pub fn argmin(values: &[f64]) -> (f64, usize) {
    values
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |(best, bi), (i, &v)| if v < best { (v, i) } else { (best, bi) })
}

/// SINR of a user whose equivalent channel row is `h`.
pub fn sinr_from_row(h: &CRow, cov: &CovarianceSolution, k: usize, noise: f64) -> Result<f64, MetricsError> {
    let signal = row_quadratic(h, &cov.r_k[k]);
    let interference = row_quadratic(h, &cov.r) - signal;
    let scale = row_quadratic(h, &cov.r).abs().max(f64::MIN_POSITIVE);
    if interference < -1e-9 * scale {
        return Err(MetricsError::NegativeInterference(k, interference));
    }
    Ok(signal.max(0.0) / (interference.max(0.0) + noise))
}

/// `SINR_k = h_kᴴ R_k h_k / (h_kᴴ (R − R_k) h_k + σ²_k)`.
pub fn sinr(
    real: &ChannelRealization,
    layout: &AntennaLayout,
    phase: &PhaseSolution,
    cov: &CovarianceSolution,
    k: usize,
    noise: f64,
) -> Result<f64, MetricsError> {
    let h = crate::channel::equivalent_user_channel(real, layout, phase, k)?;
    sinr_from_row(&h, cov, k, noise)
}

/// `‖H‖²_F`.
pub fn channel_power_gain(h: &CMat) -> f64 {
    h.norm_squared()
}

/// Mean normalized inner product magnitude over ordered user pairs.
pub fn user_cross_correlation(rows: &[CRow]) -> Result<f64, MetricsError> {
    let k = rows.len();
    if k < 2 {
        return Err(MetricsError::TooFewUsers);
    }
    let norms: Vec<f64> = rows.iter().map(|r| r.norm()).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(MetricsError::ZeroChannel(i));
    }
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let ip = (&rows[i] * rows[j].adjoint())[(0, 0)].norm();
                acc += ip / (norms[i] * norms[j]);
            }
        }
    }
    Ok(acc / (k * (k - 1)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub theta_deg: f64,
    pub gain: f64,
}

/// Beampattern gain on `points` equally spaced angles over [−90°, 90°].
pub fn beampattern_sweep(
    real: &ChannelRealization,
    layout: &AntennaLayout,
    phase: &PhaseSolution,
    r: &CMat,
    points: usize,
) -> Result<Vec<SweepPoint>, MetricsError> {
    let r = checked(r)?;
    let links = Links::new(real, layout)?;
    let step = if points > 1 { 180.0 / (points - 1) as f64 } else { 0.0 };
    Ok((0..points)
        .map(|i| {
            let theta_deg = if points > 1 { -90.0 + step * i as f64 } else { 0.0 };
            let a = ris_steering(real, theta_deg.to_radians());
            SweepPoint { theta_deg, gain: row_quadratic(&sensing_row(&links.h, phase, &a), &r) }
        })
        .collect())
}
