//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every entry point takes the scenario as a JSON document in the same
//! format the CLI reads (an empty string selects the defaults) and returns
//! JSON text.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use maris::ao::{self, AoError, AoSettings, Evaluation};
use maris::beamforming::BeamformingError;
use maris::channel::sample_realization;
use maris::config::{watts_to_dbm, ScenarioConfig, ScenarioFile};
use maris::experiments::{channel_gain_landscape, run_scheme, Scheme};
use maris::metrics::beampattern_sweep;

pub fn parse_config(json: &str) -> Result<ScenarioConfig, String> {
    let file: ScenarioFile = if json.trim().is_empty() {
        ScenarioFile::default()
    } else {
        serde_json::from_str(json).map_err(|e| format!("config: {e}"))?
    };
    let cfg = file.into_config().map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Feasibility {
    feasible: bool,
    reason: Option<String>,
    required_power_dbm: Option<f64>,
    budget_dbm: f64,
    initial_min_gain: Option<f64>,
}

pub fn check_json(config: &str, seed: u64) -> Result<String, String> {
    let cfg = parse_config(config)?;
    let real = sample_realization(&cfg, seed);
    let mut out = Feasibility {
        feasible: false,
        reason: None,
        required_power_dbm: None,
        budget_dbm: watts_to_dbm(cfg.p0),
        initial_min_gain: None,
    };
    match ao::initialize(&cfg, &real, &AoSettings::from_config(&cfg)) {
        Ok(state) => {
            let ev = Evaluation::new(&cfg, &real, &state.layout, &state.phase).map_err(|e| e.to_string())?;
            out.feasible = true;
            out.initial_min_gain = Some(ev.min_gain(&state.cov));
        }
        Err(AoError::Initial(BeamformingError::Infeasible { class, required_power })) => {
            out.reason = Some(format!("{class:?}").to_lowercase());
            out.required_power_dbm = required_power.map(watts_to_dbm);
        }
        Err(e) => return Err(e.to_string()),
    }
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Optimized {
    scheme: String,
    min_gain: f64,
    iterations: usize,
    converged: bool,
    trajectory: Vec<f64>,
    sinr: Vec<f64>,
    layout: Vec<[f64; 2]>,
    region_side: f64,
    phases: Vec<f64>,
    theta_deg: Vec<f64>,
    gain: Vec<f64>,
}

pub fn optimize_json(config: &str, seed: u64, scheme: &str, points: usize) -> Result<String, String> {
    let cfg = parse_config(config)?;
    let scheme: Scheme = scheme.parse()?;
    let real = sample_realization(&cfg, seed);
    let (t, _) = run_scheme(scheme, &cfg, &real, &AoSettings::from_config(&cfg)).map_err(|e| e.to_string())?;
    let sweep = beampattern_sweep(&real, &t.state.layout, &t.state.phase, &t.state.cov.r, points.max(2))
        .map_err(|e| e.to_string())?;
    let last = t.records.last().ok_or("empty trajectory")?;
    let out = Optimized {
        scheme: scheme.to_string(),
        min_gain: last.min_gain,
        iterations: t.iterations(),
        converged: t.converged,
        trajectory: t.records.iter().map(|r| r.min_gain).collect(),
        sinr: last.sinr.clone(),
        layout: last.layout.clone(),
        region_side: cfg.region_side,
        phases: last.phases.clone(),
        theta_deg: sweep.iter().map(|p| p.theta_deg).collect(),
        gain: sweep.iter().map(|p| p.gain).collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Landscape {
    points: usize,
    region_side: f64,
    /// Row-major, rows along y.
    gain: Vec<f64>,
}

pub fn landscape_json(config: &str, seed: u64, points: usize) -> Result<String, String> {
    let cfg = parse_config(config)?;
    let real = sample_realization(&cfg, seed);
    let points = points.clamp(2, 400);
    let grid = channel_gain_landscape(&real, cfg.region_side, points);
    let out = Landscape { points, region_side: cfg.region_side, gain: grid.into_iter().map(|g| g.2).collect() };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Feasibility of the initial state for one channel draw.
#[wasm_bindgen]
pub fn check(config: &str, seed: u64) -> Result<String, JsValue> {
    check_json(config, seed).map_err(|e| JsValue::from_str(&e))
}

/// Runs one scheme (`ma`, `fpa` or `eas`) and returns the final state,
/// its trajectory and a beampattern sweep.
#[wasm_bindgen]
pub fn optimize(config: &str, seed: u64, scheme: &str, points: usize) -> Result<String, JsValue> {
    optimize_json(config, seed, scheme, points).map_err(|e| JsValue::from_str(&e))
}

/// Single-antenna BS–RIS channel power over the transmit region.
#[wasm_bindgen]
pub fn landscape(config: &str, seed: u64, points: usize) -> Result<String, JsValue> {
    landscape_json(config, seed, points).map_err(|e| JsValue::from_str(&e))
}
