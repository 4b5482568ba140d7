//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; errors surface as JS exceptions
//! carrying the error message. The plain Rust functions behind the exports
//! ([`landscape`], [`optimize`], [`ring`]) are usable natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ringmix::landscape::{compute_landscape, NoiseProfile};
use ringmix::mixing::{build_ring_batch, RingPairing};
use ringmix::synth::{synthetic_corpus, Seed, Snr};
use ringmix::toysep::{self, BetaGradient, Init, OptimizeConfig, RunStatus, ToyProblem};
use ringmix::Result;

const DEMO_SAMPLE_RATE: u32 = 8000;
/// Upper bounds that keep a single call interactive in the browser.
const MAX_GRID: usize = 2001;
const MAX_STEPS: usize = 5000;
const MAX_SAMPLES: usize = 16000;
const MAX_RING: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeView {
    pub lambda: Vec<f64>,
    pub pair: Vec<f64>,
    pub scer: Vec<f64>,
    pub combined: Vec<f64>,
    pub pair_minima: Vec<f64>,
    pub combined_minima: Vec<f64>,
    pub combined_argmin: f64,
}

pub fn landscape(e1: f64, e2: f64, alpha: f64, grid: usize) -> Result<LandscapeView> {
    let grid = grid.min(MAX_GRID);
    let l = compute_landscape(&NoiseProfile::new(e1, e2)?, grid, &[alpha], None)?;
    let c = l.combined.into_iter().next().expect("one alpha requested");
    Ok(LandscapeView {
        lambda: l.grid,
        pair: l.analytic_loss,
        scer: l.scer_curve,
        combined: c.values,
        pair_minima: l.minima,
        combined_minima: c.minima,
        combined_argmin: c.argmin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeView {
    pub status: RunStatus,
    pub step: Vec<usize>,
    pub loss: Vec<f64>,
    pub mean_lambda: Vec<f64>,
    pub final_mean_lambda: f64,
    pub occupancy_n_self: f64,
    pub occupancy_n_other: f64,
    pub si_sdr_clean_db: f64,
}

/// Tied-λ descent on a synthetic ring batch of `k` sources at `snr_db`.
pub fn optimize(
    k: usize,
    snr_db: f64,
    alpha: f64,
    steps: usize,
    samples: usize,
    seed: u64,
    frozen_beta: bool,
) -> Result<OptimizeView> {
    let seed = Seed(seed);
    let sources = synthetic_corpus(
        seed,
        k.min(MAX_RING),
        &[Snr::Db(snr_db)],
        samples.min(MAX_SAMPLES),
        DEMO_SAMPLE_RATE,
    )?;
    let batch = build_ring_batch(sources)?;
    let config = OptimizeConfig {
        alpha,
        steps: steps.min(MAX_STEPS),
        init: Init::Constant { lambda: 0.9 },
        tied: true,
        beta_gradient: if frozen_beta {
            BetaGradient::Frozen
        } else {
            BetaGradient::Full
        },
        ..OptimizeConfig::default()
    };
    let run = toysep::optimize(&batch, &config, seed.derive(u64::MAX))?;
    let metrics = ToyProblem::new(&batch)?.metrics(&run.final_model)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(OptimizeView {
        status: run.status,
        step: run.steps.iter().map(|s| s.step).collect(),
        loss: run.steps.iter().map(|s| s.loss).collect(),
        mean_lambda: run.steps.iter().map(|s| mean(&s.lambdas)).collect(),
        final_mean_lambda: run.final_mean_lambda,
        occupancy_n_self: metrics.occupancy_n_self,
        occupancy_n_other: metrics.occupancy_n_other,
        si_sdr_clean_db: metrics.si_sdr_clean_db,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingView {
    /// `(first, second)` sources of each mixture.
    pub mixtures: Vec<(usize, usize)>,
    /// Source order visited by walking mixture to partner source.
    pub walk: Vec<usize>,
    pub single_cycle: bool,
}

pub fn ring(k: usize) -> Result<RingView> {
    let p = RingPairing::new(k.min(MAX_RING))?;
    let mut walk = vec![0];
    let mut s = 0;
    for _ in 1..p.len() {
        let (_, next_mix) = p.mixtures_of(s);
        s = p.partner(s, next_mix).expect("source is in its host mixture");
        walk.push(s);
    }
    Ok(RingView {
        mixtures: (0..p.len()).map(|j| p.sources_of(j)).collect(),
        walk,
        single_cycle: p.is_single_cycle(),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = landscape)]
pub fn landscape_js(e1: f64, e2: f64, alpha: f64, grid: usize) -> std::result::Result<String, JsError> {
    to_js(landscape(e1, e2, alpha, grid))
}

#[wasm_bindgen(js_name = optimize)]
pub fn optimize_js(
    k: usize,
    snr_db: f64,
    alpha: f64,
    steps: usize,
    samples: usize,
    seed: u64,
    frozen_beta: bool,
) -> std::result::Result<String, JsError> {
    to_js(optimize(k, snr_db, alpha, steps, samples, seed, frozen_beta))
}

#[wasm_bindgen(js_name = ring)]
pub fn ring_js(k: usize) -> std::result::Result<String, JsError> {
    to_js(ring(k))
}
