//! Scenario parameters.
//!
//! [`ScenarioConfig`] holds everything in linear SI units. On disk the same
//! data lives in a JSON document ([`ScenarioFile`]) using the engineering
//! units people actually quote: dBm for powers, dB for ratios, degrees for
//! sensing angles and meters for geometry.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing scenario JSON: {0}")]
    Parse(#[from] serde_json::Error),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// SRCR stopping threshold on `tr(V̄)/λ_max(V̄) − 1`.
    pub srcr_eps: f64,
    pub srcr_tau0: f64,
    pub srcr_max_iter: usize,
    /// Relative min-gain improvement that stops the outer loop.
    pub outer_eps: f64,
    pub outer_max_iter: usize,
    /// Relative min-gain improvement that stops the per-antenna SCA loop.
    pub inner_eps: f64,
    pub inner_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            srcr_eps: 1e-5,
            srcr_tau0: 0.05,
            srcr_max_iter: 60,
            outer_eps: 1e-4,
            outer_max_iter: 50,
            inner_eps: 1e-4,
            inner_max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Number of movable antennas.
    pub m: usize,
    /// Number of users.
    pub k: usize,
    /// Number of RIS elements.
    pub n: usize,
    pub l_t: usize,
    pub l_r: usize,
    /// Transmit (and receive) path count of every BS–user and RIS–user link.
    pub l_tk: usize,
    pub wavelength: f64,
    /// Side of the square transmit region, centered at the origin.
    pub region_side: f64,
    pub min_spacing: f64,
    pub ris_spacing: f64,
    pub p0: f64,
    pub gamma: f64,
    pub noise: f64,
    pub alpha_bs_ris: f64,
    pub alpha_ris_user: f64,
    pub alpha_bs_user: f64,
    pub kappa: f64,
    pub k0: f64,
    pub d0: f64,
    pub shadowing_db: f64,
    pub bs_position: [f64; 2],
    pub ris_position: [f64; 2],
    /// Opposite corners of the user drop rectangle.
    pub user_area: [[f64; 2]; 2],
    /// Sensing angles in radians.
    pub sensing_angles: Vec<f64>,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioFile::default().into_config().expect("defaults are valid")
    }
}

impl ScenarioConfig {
    pub fn noise_power(&self, _user: usize) -> f64 {
        self.noise
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.m == 0 || self.n == 0 {
            return bad("M and N must be at least 1".into());
        }
        if self.l_t == 0 || self.l_r == 0 || self.l_tk == 0 {
            return bad("path counts must be at least 1".into());
        }
        for (name, v) in [
            ("wavelength", self.wavelength),
            ("min_spacing", self.min_spacing),
            ("ris_spacing", self.ris_spacing),
            ("p0", self.p0),
            ("gamma", self.gamma),
            ("noise", self.noise),
            ("k0", self.k0),
            ("d0", self.d0),
            ("kappa", self.kappa),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let side_needed = self.min_spacing * ((self.m as f64).sqrt().ceil() - 1.0);
        if !(self.region_side >= side_needed * (1.0 - 1e-12)) {
            return bad(format!(
                "region side {} cannot host {} antennas at spacing {}",
                self.region_side, self.m, self.min_spacing
            ));
        }
        if self.sensing_angles.is_empty() {
            return bad("at least one sensing angle is required".into());
        }
        if self.sensing_angles.iter().any(|a| !(a.abs() <= PI / 2.0 + 1e-12)) {
            return bad("sensing angles must lie in [-90°, 90°]".into());
        }
        let t = &self.tolerances;
        if !(t.srcr_eps > 0.0 && t.srcr_tau0 > 0.0 && t.outer_eps >= 0.0 && t.inner_eps >= 0.0) {
            return bad("tolerances must be positive".into());
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        ScenarioFile::load(path)?.into_config()
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            antennas: self.m,
            users: self.k,
            ris_elements: self.n,
            paths_tx: self.l_t,
            paths_rx: self.l_r,
            user_paths: Some(self.l_tk),
            wavelength_m: self.wavelength,
            region_side_m: Some(self.region_side),
            min_spacing_m: Some(self.min_spacing),
            ris_spacing_m: Some(self.ris_spacing),
            p0_dbm: watts_to_dbm(self.p0),
            sinr_threshold_db: 10.0 * self.gamma.log10(),
            noise_dbm: watts_to_dbm(self.noise),
            pathloss_exponents: [self.alpha_bs_ris, self.alpha_ris_user, self.alpha_bs_user],
            rician_factor_db: 10.0 * self.kappa.log10(),
            reference_gain_db: 10.0 * self.k0.log10(),
            reference_distance_m: self.d0,
            shadowing_db: self.shadowing_db,
            bs_position_m: self.bs_position,
            ris_position_m: self.ris_position,
            user_area_m: self.user_area,
            sensing_angles_deg: self.sensing_angles.iter().map(|a| a.to_degrees()).collect(),
            tolerances: self.tolerances.clone(),
            seed: self.seed,
        }
    }
}

/// On-disk scenario description. Omitted fields take the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub antennas: usize,
    pub users: usize,
    pub ris_elements: usize,
    pub paths_tx: usize,
    pub paths_rx: usize,
    pub user_paths: Option<usize>,
    pub wavelength_m: f64,
    /// Defaults to four wavelengths.
    pub region_side_m: Option<f64>,
    /// Defaults to half a wavelength.
    pub min_spacing_m: Option<f64>,
    /// Defaults to half a wavelength.
    pub ris_spacing_m: Option<f64>,
    pub p0_dbm: f64,
    pub sinr_threshold_db: f64,
    pub noise_dbm: f64,
    /// BS–RIS, RIS–user, BS–user.
    pub pathloss_exponents: [f64; 3],
    pub rician_factor_db: f64,
    pub reference_gain_db: f64,
    pub reference_distance_m: f64,
    pub shadowing_db: f64,
    pub bs_position_m: [f64; 2],
    pub ris_position_m: [f64; 2],
    pub user_area_m: [[f64; 2]; 2],
    pub sensing_angles_deg: Vec<f64>,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            antennas: 4,
            users: 2,
            ris_elements: 8,
            paths_tx: 2,
            paths_rx: 2,
            user_paths: None,
            wavelength_m: 0.1,
            region_side_m: None,
            min_spacing_m: None,
            ris_spacing_m: None,
            p0_dbm: 40.0,
            sinr_threshold_db: 10.0,
            noise_dbm: -80.0,
            pathloss_exponents: [2.5, 2.5, 3.5],
            rician_factor_db: 10.0,
            reference_gain_db: -40.0,
            reference_distance_m: 1.0,
            shadowing_db: 15.0,
            bs_position_m: [0.0, 0.0],
            ris_position_m: [12.0, 16.0],
            user_area_m: [[20.0, 0.0], [40.0, -20.0]],
            sensing_angles_deg: vec![-30.0, 0.0, 30.0],
            tolerances: Tolerances::default(),
            seed: 1,
        }
    }
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn into_config(self) -> Result<ScenarioConfig, ConfigError> {
        let lambda = self.wavelength_m;
        let cfg = ScenarioConfig {
            m: self.antennas,
            k: self.users,
            n: self.ris_elements,
            l_t: self.paths_tx,
            l_r: self.paths_rx,
            l_tk: self.user_paths.unwrap_or(self.paths_tx),
            wavelength: lambda,
            region_side: self.region_side_m.unwrap_or(4.0 * lambda),
            min_spacing: self.min_spacing_m.unwrap_or(0.5 * lambda),
            ris_spacing: self.ris_spacing_m.unwrap_or(0.5 * lambda),
            p0: dbm_to_watts(self.p0_dbm),
            gamma: db_to_linear(self.sinr_threshold_db),
            noise: dbm_to_watts(self.noise_dbm),
            alpha_bs_ris: self.pathloss_exponents[0],
            alpha_ris_user: self.pathloss_exponents[1],
            alpha_bs_user: self.pathloss_exponents[2],
            kappa: db_to_linear(self.rician_factor_db),
            k0: db_to_linear(self.reference_gain_db),
            d0: self.reference_distance_m,
            shadowing_db: self.shadowing_db,
            bs_position: self.bs_position_m,
            ris_position: self.ris_position_m,
            user_area: self.user_area_m,
            sensing_angles: self.sensing_angles_deg.iter().map(|d| d.to_radians()).collect(),
            tolerances: self.tolerances,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(40.0) - 10.0).abs() < 1e-12);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-24);
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((watts_to_dbm(10.0) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn file_roundtrip() {
        let cfg = ScenarioConfig::default();
        let text = serde_json::to_string(&cfg.to_file()).unwrap();
        let back: ScenarioFile = serde_json::from_str(&text).unwrap();
        let cfg2 = back.into_config().unwrap();
        assert_eq!(cfg.m, cfg2.m);
        assert!((cfg.p0 - cfg2.p0).abs() < 1e-12);
        assert!((cfg.sensing_angles[0] - cfg2.sensing_angles[0]).abs() < 1e-12);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let f: ScenarioFile = serde_json::from_str(r#"{"antennas": 2, "p0_dbm": 30}"#).unwrap();
        let c = f.into_config().unwrap();
        assert_eq!(c.m, 2);
        assert_eq!(c.k, 2);
        assert!((c.p0 - 1.0).abs() < 1e-12);
        assert!((c.region_side - 0.4).abs() < 1e-12);
    }

    #[test]
    fn crowded_region_is_rejected() {
        let f = ScenarioFile { antennas: 100, ..Default::default() };
        assert!(f.into_config().is_err());
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(serde_json::from_str::<ScenarioFile>(r#"{"antenas": 2}"#).is_err());
    }
}
