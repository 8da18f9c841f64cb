//! Alternating optimization over the covariance, RIS phases and antenna
//! positions.

use serde::Serialize;
use thiserror::Error;

use crate::beamforming::{extract_rank_one, solve_covariance, BeamformingError, CovarianceProblem};
use crate::channel::{AntennaLayout, ChannelError, ChannelRealization, Links, PhaseSolution};
use crate::config::ScenarioConfig;
use crate::linalg::{row_quadratic, CRow};
use crate::metrics::{channel_power_gain, sinr_from_row, steering_vector, user_cross_correlation, CovarianceSolution};
use crate::position::{AntennaStatus, PositionProblem, ScaSettings};
use crate::solver::SolverSettings;
use crate::srcr::{optimize_phase, PhaseProblem, PhaseStatus};

/// Wall-clock timer; reads zero where no clock is available.
#[derive(Debug, Clone, Copy)]
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AoError {
    #[error("initial covariance problem: {0}")]
    Initial(BeamformingError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("initial layout: {0}")]
    Layout(String),
}

#[derive(Debug, Clone)]
pub struct AoSettings {
    pub solver: SolverSettings,
    pub sca: ScaSettings,
    /// Skip the position block (fixed-position array).
    pub freeze_layout: bool,
}

impl AoSettings {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            solver: SolverSettings::default(),
            sca: ScaSettings { inner_eps: cfg.tolerances.inner_eps, max_iter: cfg.tolerances.inner_max_iter, ..Default::default() },
            freeze_layout: false,
        }
    }
}

/// Full decision state.
#[derive(Debug, Clone)]
pub struct AoState {
    pub layout: AntennaLayout,
    pub phase: PhaseSolution,
    pub cov: CovarianceSolution,
}

/// Channel views of a state that every block and metric needs.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub links: Links,
    pub sensing_rows: Vec<CRow>,
    pub user_rows: Vec<CRow>,
}

impl Evaluation {
    pub fn new(
        cfg: &ScenarioConfig,
        real: &ChannelRealization,
        layout: &AntennaLayout,
        phase: &PhaseSolution,
    ) -> Result<Self, ChannelError> {
        let links = Links::new(real, layout)?;
        let d = phase.diagonal();
        let n = real.num_elements();
        let sensing_rows = cfg
            .sensing_angles
            .iter()
            .map(|&th| {
                let a = steering_vector(th, n, cfg.ris_spacing, cfg.wavelength);
                CRow::from_iterator(n, a.iter().zip(d.iter()).map(|(a, p)| a.conj() * p)) * &links.h
            })
            .collect();
        let user_rows = links.user_rows(real, phase);
        Ok(Self { links, sensing_rows, user_rows })
    }

    pub fn gains(&self, cov: &CovarianceSolution) -> Vec<f64> {
        self.sensing_rows.iter().map(|s| row_quadratic(s, &cov.r)).collect()
    }

    pub fn min_gain(&self, cov: &CovarianceSolution) -> f64 {
        self.gains(cov).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn sinrs(&self, cfg: &ScenarioConfig, cov: &CovarianceSolution) -> Vec<f64> {
        self.user_rows
            .iter()
            .enumerate()
            .map(|(k, h)| sinr_from_row(h, cov, k, cfg.noise_power(k)).unwrap_or(0.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStatus {
    Accepted,
    Kept,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub min_gain: f64,
    pub sinr: Vec<f64>,
    pub layout: Vec<[f64; 2]>,
    pub phases: Vec<f64>,
    pub covariance: BlockStatus,
    pub phase_status: BlockStatus,
    pub position: BlockStatus,
    /// SRCR iterations whose relaxed objective decreased.
    pub srcr_flags: usize,
    pub channel_gain: f64,
    pub user_gains: Vec<f64>,
    pub correlation: Option<f64>,
    /// Wall time of the covariance, phase and position blocks.
    pub block_s: [f64; 3],
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct AoTrajectory {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub aborted: bool,
    pub state: AoState,
}

impl AoTrajectory {
    pub fn final_gain(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.min_gain)
    }

    /// Outer iterations performed (the initial record is iteration 0).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Largest decrease of the recorded min-gain sequence.
    pub fn worst_decrease(&self) -> f64 {
        self.records.windows(2).map(|w| w[0].min_gain - w[1].min_gain).fold(0.0, f64::max)
    }
}

/// Uniform planar array at pitch `max(λ/2, D)` centered in the region.
pub fn initial_layout(cfg: &ScenarioConfig) -> Result<AntennaLayout, AoError> {
    let spacing = (0.5 * cfg.wavelength).max(cfg.min_spacing);
    let layout = AntennaLayout::upa(cfg.m, spacing);
    layout
        .check(cfg.region_side, cfg.min_spacing, 1e-9)
        .map_err(|e| AoError::Layout(e.to_string()))?;
    Ok(layout)
}

fn covariance_problem(cfg: &ScenarioConfig, ev: &Evaluation) -> CovarianceProblem {
    CovarianceProblem {
        sensing_rows: ev.sensing_rows.clone(),
        user_rows: ev.user_rows.clone(),
        gamma: cfg.gamma,
        noise: (0..ev.user_rows.len()).map(|k| cfg.noise_power(k)).collect(),
        p0: cfg.p0,
    }
}

fn solve_block_covariance(
    cfg: &ScenarioConfig,
    ev: &Evaluation,
    settings: &SolverSettings,
) -> Result<CovarianceSolution, BeamformingError> {
    let problem = covariance_problem(cfg, ev);
    let out = solve_covariance(&problem, settings)?;
    if ev.user_rows.is_empty() {
        return Ok(out.solution);
    }
    extract_rank_one(&out.solution, &ev.user_rows)
}

fn sinr_ok(cfg: &ScenarioConfig, ev: &Evaluation, cov: &CovarianceSolution) -> bool {
    ev.sinrs(cfg, cov).iter().all(|&s| s >= cfg.gamma * (1.0 - 1e-6))
}

/// Initial layout, `Φ = I` and the covariance from one relaxed solve.
pub fn initialize(cfg: &ScenarioConfig, real: &ChannelRealization, settings: &AoSettings) -> Result<AoState, AoError> {
    initialize_with(cfg, real, initial_layout(cfg)?, settings)
}

pub fn initialize_with(
    cfg: &ScenarioConfig,
    real: &ChannelRealization,
    layout: AntennaLayout,
    settings: &AoSettings,
) -> Result<AoState, AoError> {
    let phase = PhaseSolution::identity(cfg.n);
    let ev = Evaluation::new(cfg, real, &layout, &phase)?;
    let cov = solve_block_covariance(cfg, &ev, &settings.solver).map_err(AoError::Initial)?;
    Ok(AoState { layout, phase, cov })
}

fn record(
    cfg: &ScenarioConfig,
    real: &ChannelRealization,
    state: &AoState,
    iteration: usize,
    statuses: [BlockStatus; 3],
    srcr_flags: usize,
    block_s: [f64; 3],
    start: Stopwatch,
) -> Result<IterationRecord, ChannelError> {
    let ev = Evaluation::new(cfg, real, &state.layout, &state.phase)?;
    Ok(IterationRecord {
        iteration,
        min_gain: ev.min_gain(&state.cov),
        sinr: ev.sinrs(cfg, &state.cov),
        layout: state.layout.positions.iter().map(|p| [p.x, p.y]).collect(),
        phases: state.phase.phases.clone(),
        covariance: statuses[0],
        phase_status: statuses[1],
        position: statuses[2],
        srcr_flags,
        channel_gain: channel_power_gain(&ev.links.h),
        user_gains: ev.user_rows.iter().map(|h| h.norm_squared()).collect(),
        correlation: user_cross_correlation(&ev.user_rows).ok(),
        block_s,
        elapsed_s: start.seconds(),
    })
}

/// Runs the alternating loop from the default initialization.
pub fn run(cfg: &ScenarioConfig, real: &ChannelRealization, settings: &AoSettings) -> Result<AoTrajectory, AoError> {
    let state = initialize(cfg, real, settings)?;
    run_from(cfg, real, state, settings)
}

/// Runs the alternating loop from `state`.
pub fn run_from(
    cfg: &ScenarioConfig,
    real: &ChannelRealization,
    mut state: AoState,
    settings: &AoSettings,
) -> Result<AoTrajectory, AoError> {
    let start = Stopwatch::start();
    let tol = &cfg.tolerances;
    let skipped = if settings.freeze_layout { BlockStatus::Skipped } else { BlockStatus::Kept };
    let mut records = vec![record(cfg, real, &state, 0, [BlockStatus::Accepted, BlockStatus::Skipped, skipped], 0, [0.0; 3], start)?];
    let mut gain = records[0].min_gain;
    let mut converged = false;
    let mut aborted = false;
    let mut failures = 0;

    for iteration in 1..=tol.outer_max_iter {
        let mut failed_blocks = 0;

        let mut block_s = [0.0; 3];
        let t0 = Stopwatch::start();
        let ev = Evaluation::new(cfg, real, &state.layout, &state.phase)?;
        let cov_status = match solve_block_covariance(cfg, &ev, &settings.solver) {
            Ok(cov) if ev.min_gain(&cov) >= ev.min_gain(&state.cov) && sinr_ok(cfg, &ev, &cov) => {
                state.cov = cov;
                BlockStatus::Accepted
            }
            Ok(_) => BlockStatus::Kept,
            Err(e) => {
                log::debug!("covariance block failed: {e}");
                failed_blocks += 1;
                BlockStatus::Failed
            }
        };

        block_s[0] = t0.seconds();
        let t0 = Stopwatch::start();
        let problem = PhaseProblem {
            h: ev.links.h.clone(),
            steering: cfg
                .sensing_angles
                .iter()
                .map(|&th| steering_vector(th, cfg.n, cfg.ris_spacing, cfg.wavelength))
                .collect(),
            h2: real.users.iter().map(|u| u.h2.clone()).collect(),
            h1: ev.links.h1.clone(),
            cov: state.cov.clone(),
            gamma: cfg.gamma,
            noise: (0..cfg.k).map(|k| cfg.noise_power(k)).collect(),
        };
        let out = optimize_phase(&problem, &state.phase, tol, &settings.solver);
        let srcr_flags = out.monotonicity_flags;
        let phase_status = match out.status {
            PhaseStatus::KeptIncoming => {
                if out.objective_trace.is_empty() {
                    failed_blocks += 1;
                    BlockStatus::Failed
                } else {
                    BlockStatus::Kept
                }
            }
            _ => {
                state.phase = out.phase;
                BlockStatus::Accepted
            }
        };

        block_s[1] = t0.seconds();
        let t0 = Stopwatch::start();
        let pos_status = if settings.freeze_layout {
            BlockStatus::Skipped
        } else {
            let pp = PositionProblem::new(
                real,
                &state.phase,
                &state.cov,
                &cfg.sensing_angles,
                cfg.region_side,
                cfg.min_spacing,
                cfg.gamma,
                (0..cfg.k).map(|k| cfg.noise_power(k)).collect(),
            );
            let mut moved = false;
            let mut all_failed = true;
            for m in 0..cfg.m {
                let o = pp.optimize_antenna(&state.layout, m, &settings.sca, &settings.solver);
                if o.status != AntennaStatus::SolverIssue {
                    all_failed = false;
                }
                if o.status == AntennaStatus::Moved {
                    state.layout.positions[m] = o.position;
                    moved = true;
                }
            }
            if all_failed {
                failed_blocks += 1;
                BlockStatus::Failed
            } else if moved {
                BlockStatus::Accepted
            } else {
                BlockStatus::Kept
            }
        };

        block_s[2] = t0.seconds();
        let statuses = [cov_status, phase_status, pos_status];
        let rec = record(cfg, real, &state, iteration, statuses, srcr_flags, block_s, start)?;
        let new_gain = rec.min_gain;
        records.push(rec);

        failures = if failed_blocks > 0 && cov_status == BlockStatus::Failed { failures + 1 } else { 0 };
        if failures >= 3 {
            aborted = true;
            break;
        }
        let improvement = (new_gain - gain) / gain.abs().max(f64::MIN_POSITIVE);
        gain = gain.max(new_gain);
        if improvement <= tol.outer_eps {
            converged = true;
            break;
        }
    }
    Ok(AoTrajectory { records, converged, aborted, state })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_a_centered_square() {
        let cfg = ScenarioConfig::default();
        let l = initial_layout(&cfg).unwrap();
        assert_eq!(l.len(), 4);
        assert!((l.min_distance() - 0.5 * cfg.wavelength).abs() < 1e-12);
    }
}
