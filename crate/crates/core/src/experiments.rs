//! Monte-Carlo harness: baselines, parameter sweeps and table output.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::ao::{self, AoError, AoSettings, AoTrajectory};
use crate::beamforming::BeamformingError;
use crate::channel::{
    field_response_vector, sample_realization, AntennaLayout, ChannelRealization, Point,
};
use crate::config::{dbm_to_watts, ConfigError, ScenarioConfig, ScenarioFile};
use crate::metrics::{beampattern_sweep, SweepPoint};

/// Environment variable holding the work-pool size.
pub const THREADS_ENV: &str = "MARIS_THREADS";

/// Largest `M` for which exhaustive antenna selection is attempted.
pub const EAS_MAX_ANTENNAS: usize = 6;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ao(#[from] AoError),
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ma,
    Fpa,
    Eas,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ma => "ma",
            Scheme::Fpa => "fpa",
            Scheme::Eas => "eas",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ma" => Ok(Scheme::Ma),
            "fpa" => Ok(Scheme::Fpa),
            "eas" => Ok(Scheme::Eas),
            other => Err(format!("unknown scheme `{other}` (expected ma, fpa or eas)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Transmit power budget in dBm.
    P0,
    M,
    N,
    /// Path count of every link.
    L,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::P0 => "p0",
            SweepAxis::M => "m",
            SweepAxis::N => "n",
            SweepAxis::L => "l",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::P0 => vec![30.0, 35.0, 40.0, 45.0],
            SweepAxis::M => vec![2.0, 3.0, 4.0],
            SweepAxis::N => vec![4.0, 8.0, 12.0],
            SweepAxis::L => vec![1.0, 2.0, 3.0],
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, ExperimentError> {
        let mut cfg = base.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(ExperimentError::Invalid(format!("{} must be a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweepAxis::P0 => cfg.p0 = dbm_to_watts(value),
            SweepAxis::M => cfg.m = count()?,
            SweepAxis::N => cfg.n = count()?,
            SweepAxis::L => {
                let l = count()?;
                cfg.l_t = l;
                cfg.l_r = l;
                cfg.l_tk = l;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p0" => Ok(SweepAxis::P0),
            "m" => Ok(SweepAxis::M),
            "n" => Ok(SweepAxis::N),
            "l" => Ok(SweepAxis::L),
            other => Err(format!("unknown sweep axis `{other}` (expected p0, m, n or l)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: ScenarioConfig,
    pub axis: Option<SweepAxis>,
    /// Axis values; ignored without an axis.
    pub values: Vec<f64>,
    /// Channel draws per axis value, seeded `seed, seed + 1, …`.
    pub realizations: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    /// Angles in the emitted beampattern sweeps.
    pub beampattern_points: usize,
}

impl ExperimentSpec {
    pub fn new(base: ScenarioConfig) -> Self {
        let seed = base.seed;
        Self {
            base,
            axis: None,
            values: Vec::new(),
            realizations: 1,
            schemes: vec![Scheme::Ma, Scheme::Fpa],
            seed,
            beampattern_points: 361,
        }
    }

    /// `(axis value, config)` for every point of the sweep.
    pub fn points(&self) -> Result<Vec<(Option<f64>, ScenarioConfig)>, ExperimentError> {
        match self.axis {
            None => Ok(vec![(None, self.base.clone())]),
            Some(axis) => self.values.iter().map(|&v| Ok((Some(v), axis.apply(&self.base, v)?))).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.realizations == 0 {
            return Err(ExperimentError::Invalid("realization count must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(ExperimentError::Invalid("no schemes selected".into()));
        }
        if self.axis.is_some() && self.values.is_empty() {
            return Err(ExperimentError::Invalid("sweep axis given without values".into()));
        }
        self.base.validate()?;
        for (_, cfg) in self.points()? {
            if self.schemes.contains(&Scheme::Eas) && cfg.m > EAS_MAX_ANTENNAS {
                return Err(ExperimentError::Invalid(format!(
                    "exhaustive antenna selection needs M ≤ {EAS_MAX_ANTENNAS}, got {}",
                    cfg.m
                )));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.realizations as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }
}

/// AO with the initial array frozen.
pub fn baseline_fpa(
    cfg: &ScenarioConfig,
    real: &ChannelRealization,
    settings: &AoSettings,
) -> Result<AoTrajectory, AoError> {
    let settings = AoSettings { freeze_layout: true, ..settings.clone() };
    ao::run(cfg, real, &settings)
}

/// `2M` candidate slots: the initial array plus a copy shifted by its own
/// height along y, so the fixed array is one of the selectable subsets.
pub fn eas_slots(cfg: &ScenarioConfig) -> Result<AntennaLayout, AoError> {
    let base = ao::initial_layout(cfg)?;
    let spacing = (0.5 * cfg.wavelength).max(cfg.min_spacing);
    let ys = base.positions.iter().map(|p| p.y);
    let height = ys.clone().fold(f64::NEG_INFINITY, f64::max) - ys.fold(f64::INFINITY, f64::min) + spacing;
    let mut positions = base.positions.clone();
    positions.extend(base.positions.iter().map(|p| Point::new(p.x, p.y + height)));
    let slots = AntennaLayout::new(positions);
    slots
        .check(cfg.region_side, cfg.min_spacing, 1e-9)
        .map_err(|e| AoError::Layout(format!("selection grid does not fit: {e}")))?;
    Ok(slots)
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { break };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct EasOutcome {
    pub trajectory: AoTrajectory,
    /// Indices into [`eas_slots`] of the chosen subset.
    pub subset: Vec<usize>,
    pub subsets_tried: usize,
    pub subsets_feasible: usize,
}

/// Best fixed-array AO over all `M`-subsets of the `2M` slots.
pub fn baseline_eas(
    cfg: &ScenarioConfig,
    real: &ChannelRealization,
    settings: &AoSettings,
) -> Result<EasOutcome, ExperimentError> {
    if cfg.m > EAS_MAX_ANTENNAS {
        return Err(ExperimentError::Invalid(format!("exhaustive selection needs M ≤ {EAS_MAX_ANTENNAS}")));
    }
    let slots = eas_slots(cfg)?;
    let settings = AoSettings { freeze_layout: true, ..settings.clone() };
    let subsets = combinations(slots.len(), cfg.m);
    let mut best: Option<(AoTrajectory, Vec<usize>)> = None;
    let mut last_err = None;
    let mut feasible = 0;
    for subset in &subsets {
        let layout = AntennaLayout::new(subset.iter().map(|&i| slots.positions[i]).collect());
        let run = ao::initialize_with(cfg, real, layout, &settings).and_then(|s| ao::run_from(cfg, real, s, &settings));
        match run {
            Ok(t) => {
                feasible += 1;
                if best.as_ref().is_none_or(|(b, _)| t.final_gain() > b.final_gain()) {
                    best = Some((t, subset.clone()));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((trajectory, subset)) => {
            Ok(EasOutcome { trajectory, subset, subsets_tried: subsets.len(), subsets_feasible: feasible })
        }
        None => Err(last_err.map_or_else(|| ExperimentError::Invalid("no subsets".into()), ExperimentError::from)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// The SINR targets could not be met at the initial state.
    Infeasible,
    Failed,
}

/// One scheme on one channel draw.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub point: usize,
    pub axis_value: Option<f64>,
    pub seed: u64,
    pub scheme: Scheme,
    pub status: RunStatus,
    pub message: String,
    pub trajectory: Option<AoTrajectory>,
    pub eas_subset: Option<Vec<usize>>,
}

impl RunRecord {
    pub fn final_gain(&self) -> Option<f64> {
        self.trajectory.as_ref().map(|t| t.final_gain())
    }
}

fn classify(e: &ExperimentError) -> RunStatus {
    match e {
        ExperimentError::Ao(AoError::Initial(BeamformingError::Infeasible { .. })) => RunStatus::Infeasible,
        _ => RunStatus::Failed,
    }
}

/// Runs `scheme` on one draw.
pub fn run_scheme(
    scheme: Scheme,
    cfg: &ScenarioConfig,
    real: &ChannelRealization,
    settings: &AoSettings,
) -> Result<(AoTrajectory, Option<Vec<usize>>), ExperimentError> {
    match scheme {
        Scheme::Ma => Ok((ao::run(cfg, real, settings)?, None)),
        Scheme::Fpa => Ok((baseline_fpa(cfg, real, settings)?, None)),
        Scheme::Eas => baseline_eas(cfg, real, settings).map(|o| (o.trajectory, Some(o.subset))),
    }
}

fn run_draw(point: usize, axis_value: Option<f64>, cfg: &ScenarioConfig, seed: u64, schemes: &[Scheme]) -> Vec<RunRecord> {
    let real = sample_realization(cfg, seed);
    let settings = AoSettings::from_config(cfg);
    schemes
        .iter()
        .map(|&scheme| {
            let base = RunRecord {
                point,
                axis_value,
                seed,
                scheme,
                status: RunStatus::Ok,
                message: String::new(),
                trajectory: None,
                eas_subset: None,
            };
            match run_scheme(scheme, cfg, &real, &settings) {
                Ok((t, subset)) => {
                    let message = if t.aborted { "aborted after repeated subproblem failures".into() } else { String::new() };
                    RunRecord { trajectory: Some(t), eas_subset: subset, message, ..base }
                }
                Err(e) => {
                    log::info!("seed {seed}, {scheme}: {e}");
                    RunRecord { status: classify(&e), message: e.to_string(), ..base }
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub axis_value: Option<f64>,
    pub scheme: Scheme,
    pub draws: usize,
    /// Draws on which every scheme succeeded; the statistics use these.
    pub paired: usize,
    pub infeasible: usize,
    pub failed: usize,
    pub mean_min_gain: Option<f64>,
    pub stderr_min_gain: Option<f64>,
}

/// Sample mean and standard error.
pub fn mean_stderr(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some((mean, se))
}

#[derive(Debug, Clone)]
pub struct BeampatternTable {
    pub axis_value: Option<f64>,
    pub scheme: Scheme,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub axis: Option<SweepAxis>,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub beampatterns: Vec<BeampatternTable>,
    pub k: usize,
}

impl ExperimentResult {
    pub fn summary_for(&self, axis_value: Option<f64>, scheme: Scheme) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.axis_value == axis_value && r.scheme == scheme)
    }
}

#[cfg(feature = "parallel")]
fn map_jobs<T: Sync, R: Send>(jobs: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| jobs.par_iter().map(&f).collect()),
        Err(_) => jobs.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<T, R>(jobs: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    jobs.iter().map(f).collect()
}

/// Runs every scheme on every draw of every sweep point.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let points = spec.points()?;
    let seeds = spec.seeds();
    let jobs: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let mut schemes = spec.schemes.clone();
    schemes.sort();
    schemes.dedup();

    let mut runs: Vec<RunRecord> = map_jobs(&jobs, |&(p, seed)| {
        let (value, cfg) = &points[p];
        run_draw(p, *value, cfg, seed, &schemes)
    })
    .into_iter()
    .flatten()
    .collect();
    runs.sort_by_key(|r| (r.point, r.scheme, r.seed));

    let mut summary = Vec::new();
    let mut beampatterns = Vec::new();
    for (p, (value, cfg)) in points.iter().enumerate() {
        let paired: Vec<u64> = seeds
            .iter()
            .copied()
            .filter(|&s| runs.iter().filter(|r| r.point == p && r.seed == s).all(|r| r.status == RunStatus::Ok))
            .collect();
        for &scheme in &schemes {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.point == p && r.scheme == scheme).collect();
            let gains: Vec<f64> =
                mine.iter().filter(|r| paired.contains(&r.seed)).filter_map(|r| r.final_gain()).collect();
            let stats = mean_stderr(&gains);
            summary.push(SummaryRow {
                axis_value: *value,
                scheme,
                draws: mine.len(),
                paired: gains.len(),
                infeasible: mine.iter().filter(|r| r.status == RunStatus::Infeasible).count(),
                failed: mine.iter().filter(|r| r.status == RunStatus::Failed).count(),
                mean_min_gain: stats.map(|s| s.0),
                stderr_min_gain: stats.map(|s| s.1),
            });
            if let Some(first) = mine.iter().find(|r| r.status == RunStatus::Ok) {
                let t = first.trajectory.as_ref().expect("ok runs carry a trajectory");
                let real = sample_realization(cfg, first.seed);
                let points = beampattern_sweep(&real, &t.state.layout, &t.state.phase, &t.state.cov.r, spec.beampattern_points)
                    .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
                beampatterns.push(BeampatternTable { axis_value: *value, scheme, seed: first.seed, points });
            }
        }
    }
    Ok(ExperimentResult { axis: spec.axis, runs, summary, beampatterns, k: spec.base.k })
}

/// `‖FᴴΣ g(t)‖²` on a `points × points` grid over the transmit region: the
/// BS–RIS channel power seen by a single antenna at `t`.
pub fn channel_gain_landscape(real: &ChannelRealization, region_side: f64, points: usize) -> Vec<(f64, f64, f64)> {
    let f = real.ris_frm();
    let fs = f.adjoint() * &real.sigma;
    let h = 0.5 * region_side;
    let step = if points > 1 { region_side / (points - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(points * points);
    for i in 0..points {
        for j in 0..points {
            let t = Point::new(-h + step * j as f64, -h + step * i as f64);
            let g = field_response_vector(&t, &real.tx_paths, real.wavelength);
            out.push((t.x, t.y, (&fs * g).norm_squared()));
        }
    }
    out
}

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.display().to_string(), source }
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>, ExperimentError> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes `iteration, min_gain, sinr_1..K` for one trajectory.
pub fn write_trajectory_csv(path: &Path, trajectory: &AoTrajectory, k: usize) -> Result<(), ExperimentError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["iteration".to_string(), "min_gain".to_string()];
    header.extend((1..=k).map(|i| format!("sinr_{i}")));
    w.write_record(&header)?;
    for r in &trajectory.records {
        let mut row = vec![r.iteration.to_string(), fmt_f(r.min_gain)];
        row.extend(r.sinr.iter().map(|&s| fmt_f(s)));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes one `theta_deg, gain` table.
pub fn write_beampattern_csv(path: &Path, points: &[SweepPoint]) -> Result<(), ExperimentError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["theta_deg", "gain"])?;
    for p in points {
        w.write_record([fmt_f(p.theta_deg), fmt_f(p.gain)])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_landscape_csv(path: &Path, grid: &[(f64, f64, f64)]) -> Result<(), ExperimentError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["x_m", "y_m", "channel_gain"])?;
    for &(x, y, g) in grid {
        w.write_record([fmt_f(x), fmt_f(y), fmt_f(g)])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Column descriptions of every emitted table.
pub fn schema(k: usize) -> serde_json::Value {
    let sinr: Vec<String> = (1..=k).map(|i| format!("sinr_{i}")).collect();
    let user_gain: Vec<String> = (1..=k).map(|i| format!("user_gain_{i}")).collect();
    serde_json::json!({
        "summary.csv": {
            "axis_value": "value of the swept parameter (dBm for p0, a count otherwise); empty without a sweep",
            "scheme": "ma, fpa or eas",
            "draws": "channel draws attempted",
            "paired": "draws on which every scheme succeeded; statistics use only these",
            "infeasible": "draws whose SINR targets were unattainable at the initial state",
            "failed": "draws that failed for other reasons",
            "mean_min_gain": "mean final minimum beampattern gain (W)",
            "stderr_min_gain": "standard error of that mean (W)"
        },
        "runs.csv": {
            "axis_value": "as in summary.csv",
            "scheme": "as in summary.csv",
            "seed": "channel seed of the draw",
            "status": "ok, infeasible or failed",
            "min_gain": "final minimum beampattern gain (W)",
            "iterations": "outer iterations performed",
            "converged": "whether the relative-improvement test stopped the loop",
            "eas_subset": "selected slot indices separated by spaces (eas only)",
            "message": "error text for unsuccessful draws"
        },
        "trajectories.csv": {
            "axis_value": "as in summary.csv",
            "scheme": "as in summary.csv",
            "seed": "as in runs.csv",
            "iteration": "outer iteration, 0 is the initial state",
            "min_gain": "minimum beampattern gain after the iteration (W)",
            "sinr_k": format!("per-user SINR (linear), columns {}", sinr.join(", "))
        },
        "diagnostics.csv": {
            "axis_value": "as in summary.csv",
            "scheme": "as in summary.csv",
            "seed": "as in runs.csv",
            "iteration": "as in trajectories.csv",
            "channel_gain": "squared Frobenius norm of the BS–RIS channel",
            "user_gain_k": format!("squared norm of each equivalent user channel, columns {}", user_gain.join(", ")),
            "correlation": "mean normalized inner-product magnitude between user channels"
        },
        "trajectory_<scheme>.csv": {
            "iteration": "as in trajectories.csv, first successful draw only (runs without a sweep)",
            "min_gain": "as in trajectories.csv",
            "sinr_k": "as in trajectories.csv"
        },
        "beampattern_<scheme>[_<axis>-<value>].csv": {
            "theta_deg": "angle from broadside of the RIS (degrees)",
            "gain": "beampattern gain at the final solution of the first successful draw (W)"
        },
        "landscape.csv": {
            "x_m": "antenna x coordinate (m)",
            "y_m": "antenna y coordinate (m)",
            "channel_gain": "BS–RIS channel power for a single antenna at (x, y)"
        }
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    config: ScenarioFile,
    axis: Option<&'static str>,
    values: &'a [f64],
    schemes: Vec<&'static str>,
    seeds: Vec<u64>,
    files: Vec<String>,
}

fn beampattern_name(axis: Option<SweepAxis>, t: &BeampatternTable) -> String {
    match (axis, t.axis_value) {
        (Some(a), Some(v)) => format!("beampattern_{}_{}-{}.csv", t.scheme, a.name(), v),
        _ => format!("beampattern_{}.csv", t.scheme),
    }
}

/// Writes all tables, the schema and the manifest into `dir`.
pub fn write_outputs(spec: &ExperimentSpec, result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    let k = result.k;

    let mut w = writer(dir, "summary.csv")?;
    w.write_record(["axis_value", "scheme", "draws", "paired", "infeasible", "failed", "mean_min_gain", "stderr_min_gain"])?;
    for r in &result.summary {
        w.write_record([
            fmt_opt(r.axis_value),
            r.scheme.to_string(),
            r.draws.to_string(),
            r.paired.to_string(),
            r.infeasible.to_string(),
            r.failed.to_string(),
            fmt_opt(r.mean_min_gain),
            fmt_opt(r.stderr_min_gain),
        ])?;
    }
    w.flush().map_err(io_err(dir))?;
    files.push("summary.csv".to_string());

    let mut w = writer(dir, "runs.csv")?;
    w.write_record(["axis_value", "scheme", "seed", "status", "min_gain", "iterations", "converged", "eas_subset", "message"])?;
    for r in &result.runs {
        let status = serde_json::to_value(r.status)?.as_str().unwrap_or_default().to_string();
        w.write_record([
            fmt_opt(r.axis_value),
            r.scheme.to_string(),
            r.seed.to_string(),
            status,
            fmt_opt(r.final_gain()),
            r.trajectory.as_ref().map(|t| t.iterations().to_string()).unwrap_or_default(),
            r.trajectory.as_ref().map(|t| t.converged.to_string()).unwrap_or_default(),
            r.eas_subset
                .as_ref()
                .map(|s| s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "))
                .unwrap_or_default(),
            r.message.clone(),
        ])?;
    }
    w.flush().map_err(io_err(dir))?;
    files.push("runs.csv".to_string());

    let mut tw = writer(dir, "trajectories.csv")?;
    let mut header: Vec<String> = ["axis_value", "scheme", "seed", "iteration", "min_gain"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|i| format!("sinr_{i}")));
    tw.write_record(&header)?;
    let mut dw = writer(dir, "diagnostics.csv")?;
    let mut header: Vec<String> = ["axis_value", "scheme", "seed", "iteration", "channel_gain"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|i| format!("user_gain_{i}")));
    header.push("correlation".into());
    dw.write_record(&header)?;
    for r in &result.runs {
        let Some(t) = &r.trajectory else { continue };
        for rec in &t.records {
            let lead = [fmt_opt(r.axis_value), r.scheme.to_string(), r.seed.to_string(), rec.iteration.to_string()];
            let mut row = lead.to_vec();
            row.push(fmt_f(rec.min_gain));
            row.extend(rec.sinr.iter().map(|&s| fmt_f(s)));
            tw.write_record(&row)?;
            let mut row = lead.to_vec();
            row.push(fmt_f(rec.channel_gain));
            row.extend(rec.user_gains.iter().map(|&s| fmt_f(s)));
            row.push(fmt_opt(rec.correlation));
            dw.write_record(&row)?;
        }
    }
    tw.flush().map_err(io_err(dir))?;
    dw.flush().map_err(io_err(dir))?;
    files.push("trajectories.csv".to_string());
    files.push("diagnostics.csv".to_string());

    if result.axis.is_none() {
        for scheme in result.summary.iter().map(|r| r.scheme) {
            let first = result.runs.iter().find(|r| r.scheme == scheme && r.status == RunStatus::Ok);
            if let Some(t) = first.and_then(|r| r.trajectory.as_ref()) {
                let name = format!("trajectory_{scheme}.csv");
                write_trajectory_csv(&dir.join(&name), t, k)?;
                files.push(name);
            }
        }
    }
    for t in &result.beampatterns {
        let name = beampattern_name(result.axis, t);
        write_beampattern_csv(&dir.join(&name), &t.points)?;
        files.push(name);
    }

    let schema_path = dir.join("schema.json");
    fs::write(&schema_path, serde_json::to_string_pretty(&schema(k))? + "\n").map_err(io_err(&schema_path))?;
    files.push("schema.json".to_string());

    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: spec.base.to_file(),
        axis: spec.axis.map(|a| a.name()),
        values: if spec.axis.is_some() { &spec.values } else { &[] },
        schemes: result.summary.iter().map(|r| r.scheme.name()).fold(Vec::new(), |mut v, s| {
            if !v.contains(&s) {
                v.push(s);
            }
            v
        }),
        seeds: spec.seeds(),
        files: files.clone(),
    };
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&manifest_path))?;
    files.push("manifest.json".to_string());
    Ok(files.into_iter().map(|f| dir.join(f)).collect())
}
