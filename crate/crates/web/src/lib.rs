//! Browser bindings for the partitioning demo. Every exported function takes
//! a JSON config and returns JSON; the plain-Rust versions are public so the
//! logic can be tested natively.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use ssom::evaluate::{
    c2_similarity, cluster_variance, holdout_evaluation, subsample_field, HoldoutPlan,
    SubsampleMode,
};
use ssom::ingest::{generate_synthetic, SyntheticSpec};
use ssom::partition::{check_contiguity, run_traditional_som, SomParams, DEFAULT_TIE_TOLERANCE};
use ssom::{bin_posts, run_ssom, GridField, Partition, SsomParams};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct DemoConfig {
    pub rows: usize,
    pub cols: usize,
    pub block_rows: usize,
    pub block_cols: usize,
    pub proportions: Vec<f64>,
    pub posts_per_cell: u64,
    /// Share of posts kept by a uniform random subsample; 1 keeps all.
    pub keep: f64,
    pub seed: u64,
    pub tau: u32,
    pub cycles: u32,
    pub tie_tolerance: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            rows: 40,
            cols: 40,
            block_rows: 2,
            block_cols: 2,
            proportions: vec![0.02, 0.10, 0.30, 0.50],
            posts_per_cell: 100,
            keep: 1.0,
            seed: 42,
            tau: 3,
            cycles: 50,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }
}

/// A partition laid out on the fixture's row-major grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridView {
    pub rows: usize,
    pub cols: usize,
    /// Cluster id per cell, `None` for cells without posts.
    pub cluster: Vec<Option<u32>>,
    /// Prevalence of the cell's cluster.
    pub prevalence: Vec<Option<f64>>,
    pub clusters: usize,
    pub contiguous: bool,
    pub c2_truth: f64,
    pub mean_variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub ssom: GridView,
    pub som: GridView,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoldoutCurve {
    pub fractions: Vec<f64>,
    pub mspe: Vec<f64>,
    pub c2: Vec<f64>,
}

struct Fixture {
    spec: SyntheticSpec,
    field: GridField,
    truth: Partition,
}

fn fixture(cfg: &DemoConfig) -> Result<Fixture, String> {
    let spec = SyntheticSpec::blocks(
        cfg.rows,
        cfg.cols,
        cfg.block_rows,
        cfg.block_cols,
        &cfg.proportions,
        cfg.posts_per_cell,
        cfg.seed,
    )
    .map_err(|e| e.to_string())?;
    let (posts, truth) = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let mut field = bin_posts(&posts, spec.precision, None).map_err(|e| e.to_string())?;
    if cfg.keep < 1.0 {
        field = subsample_field(&field, cfg.keep, SubsampleMode::Uniform, cfg.seed)
            .map_err(|e| e.to_string())?;
    }
    let truth = truth.restrict(field.keys());
    Ok(Fixture { spec, field, truth })
}

fn params(cfg: &DemoConfig) -> SsomParams {
    SsomParams {
        tau: cfg.tau,
        t_max: cfg.cycles,
        seed: cfg.seed,
        tie_tolerance: cfg.tie_tolerance,
        ..Default::default()
    }
}

fn view(fx: &Fixture, p: &Partition, tau: u32) -> Result<GridView, String> {
    let (rows, cols) = (fx.spec.rows, fx.spec.cols);
    let mut cluster = Vec::with_capacity(rows * cols);
    let mut prevalence = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let id = p.cluster_of(&fx.spec.cell(r, c));
            cluster.push(id);
            prevalence.push(id.and_then(|i| p.prevalence(i)));
        }
    }
    Ok(GridView {
        rows,
        cols,
        cluster,
        prevalence,
        clusters: p.cluster_count(),
        contiguous: check_contiguity(p, tau).ok,
        c2_truth: c2_similarity(p, &fx.truth).map_err(|e| e.to_string())?,
        mean_variance: cluster_variance(p, &fx.field).mean,
    })
}

pub fn partition_view(cfg: &DemoConfig) -> Result<GridView, String> {
    let fx = fixture(cfg)?;
    let p = run_ssom(&fx.field, &params(cfg)).map_err(|e| e.to_string())?;
    view(&fx, &p, cfg.tau)
}

pub fn compare_views(cfg: &DemoConfig) -> Result<Comparison, String> {
    let fx = fixture(cfg)?;
    let ours = run_ssom(&fx.field, &params(cfg)).map_err(|e| e.to_string())?;
    let som = run_traditional_som(
        &fx.field,
        &SomParams {
            t_max: cfg.cycles,
            seed: cfg.seed,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    Ok(Comparison {
        ssom: view(&fx, &ours, cfg.tau)?,
        som: view(&fx, &som, cfg.tau)?,
    })
}

pub fn holdout_curve(
    cfg: &DemoConfig,
    fractions: &[f64],
    folds: usize,
) -> Result<HoldoutCurve, String> {
    let fx = fixture(cfg)?;
    let plan = HoldoutPlan::cells(fractions, folds, cfg.seed);
    plan.validate().map_err(|e| e.to_string())?;
    let r = holdout_evaluation(&fx.field, &params(cfg), &plan).map_err(|e| e.to_string())?;
    Ok(HoldoutCurve {
        fractions: fractions.to_vec(),
        mspe: r.mspe.iter().map(|x| x.mean).collect(),
        c2: r.c2.iter().map(|x| x.mean).collect(),
    })
}

fn parse(config: &str) -> Result<DemoConfig, JsError> {
    if config.trim().is_empty() {
        return Ok(DemoConfig::default());
    }
    serde_json::from_str(config).map_err(|e| JsError::new(&format!("bad config: {e}")))
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Default config as JSON, for populating the form.
#[wasm_bindgen]
pub fn default_config() -> String {
    serde_json::to_string(&DemoConfig::default()).expect("config serializes")
}

#[wasm_bindgen]
pub fn partition(config: &str) -> Result<String, JsError> {
    to_json(partition_view(&parse(config)?))
}

#[wasm_bindgen]
pub fn compare(config: &str) -> Result<String, JsError> {
    to_json(compare_views(&parse(config)?))
}

#[wasm_bindgen]
pub fn holdout(config: &str, fractions: Vec<f64>, folds: usize) -> Result<String, JsError> {
    to_json(holdout_curve(&parse(config)?, &fractions, folds))
}
