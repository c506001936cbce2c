//! Recovery experiments: success rates of the decoders over grids of
//! dimension, dictionary size and set size, with CSV, SVG and JSON output.

mod report;
mod stats;
#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{Atoms, Dictionary, DictionaryError};
use crate::error::ErrorClass;
use crate::linalg;
use crate::recovery::{
    baseline_lasso_fixed, baseline_nn_decompose, decompose, Decomposition, LassoConfig, RecoveryError,
};
use crate::vector::SummedVector;

pub use report::{emit_report, render_svg, summary_csv, to_csv, ReportFormat};
pub use stats::{max_k_50, max_k_first_failure, wilson_interval};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("k = {k} needs {needed} neighbours but the dictionary has {available} other entries")]
    ClusterTooLarge { k: usize, needed: usize, available: usize },
    #[error("dimension {requested} is not available (dictionary has dimension {available})")]
    DimensionUnavailable { requested: usize, available: usize },
    #[error("size {requested} exceeds the {available} dictionary entries")]
    SizeUnavailable { requested: usize, available: usize },
    #[error("experiment kind is {found}, expected {expected}")]
    WrongKind { expected: ExperimentKind, found: ExperimentKind },
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn class(&self) -> ErrorClass {
        match self {
            HarnessError::Dictionary(e) => e.class(),
            HarnessError::Recovery(e) => e.class(),
            HarnessError::Io { .. } | HarnessError::Csv(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RecoveryCurve,
    ClusteredCurve,
    NoiseSweep,
    BaselineTable,
    /// Same cells as a recovery curve; read for the cells whose Wilson
    /// interval straddles one half.
    PhaseProbe,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RecoveryCurve => "recovery_curve",
            ExperimentKind::ClusteredCurve => "clustered_curve",
            ExperimentKind::NoiseSweep => "noise_sweep",
            ExperimentKind::BaselineTable => "baseline_table",
            ExperimentKind::PhaseProbe => "phase_probe",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dictionary used for every cell. Synthetic dictionaries are generated per
/// `(n, N)`; a file is cut to its first `N` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionarySource {
    SyntheticGaussian {
        #[serde(default)]
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

/// Set sizes, as a list or an inclusive stepped range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KRange {
    List(Vec<usize>),
    Range {
        from: usize,
        to: usize,
        #[serde(default = "one")]
        step: usize,
    },
}

fn one() -> usize {
    1
}

impl KRange {
    pub fn values(&self) -> Vec<usize> {
        match self {
            KRange::List(v) => v.clone(),
            KRange::Range { from, to, step } if *step > 0 => (*from..=*to).step_by(*step).collect(),
            KRange::Range { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessCriterion {
    /// Decoded support equals the planted one.
    ExactSupport,
    /// Exact support and every weight within `tol`.
    ExactWeights { tol: f64 },
    /// The `k` best-ranked candidates are the planted members.
    TopKSupport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Independent draws from U[0.5, 1.5].
    #[default]
    Uniform,
    /// Every weight 1.
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NearestNeighbor,
    LassoFixed,
    Screened,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NearestNeighbor => "nearest_neighbor",
            Method::LassoFixed => "lasso_fixed",
            Method::Screened => "screened",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Random,
    Clustered,
}

impl Series {
    pub fn name(self) -> &'static str {
        match self {
            Series::Random => "random",
            Series::Clustered => "clustered",
        }
    }
}

fn default_trials() -> usize {
    20
}

fn default_lambda() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub dictionary: DictionarySource,
    pub dims: Vec<usize>,
    /// Dictionary sizes `N`.
    pub sizes: Vec<usize>,
    pub ks: KRange,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Noise levels relative to the unit-norm sum; noise sweeps only.
    #[serde(default)]
    pub sigmas: Vec<f64>,
    /// Defaults to top-k support for noise sweeps and exact weights to 1e-6
    /// otherwise.
    #[serde(default)]
    pub success: Option<SuccessCriterion>,
    #[serde(default)]
    pub weights: WeightScheme,
    /// Defaults to all three for baseline tables and the screened pipeline
    /// otherwise.
    #[serde(default)]
    pub methods: Vec<Method>,
    /// Member draws to run; defaults to random and clustered for clustered
    /// curves and random otherwise.
    #[serde(default)]
    pub series: Vec<Series>,
    #[serde(default = "default_lambda")]
    pub fixed_lambda: f64,
    #[serde(default)]
    pub lasso: LassoConfig,
}

impl ExperimentSpec {
    /// A spec with defaults for everything but the grid.
    pub fn new(kind: ExperimentKind, dims: Vec<usize>, sizes: Vec<usize>, ks: Vec<usize>) -> Self {
        ExperimentSpec {
            kind,
            dictionary: DictionarySource::SyntheticGaussian { seed: 0 },
            dims,
            sizes,
            ks: KRange::List(ks),
            trials: default_trials(),
            seed: 0,
            sigmas: Vec::new(),
            success: None,
            weights: WeightScheme::Uniform,
            methods: Vec::new(),
            series: Vec::new(),
            fixed_lambda: default_lambda(),
            lasso: LassoConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn success_criterion(&self) -> SuccessCriterion {
        self.success.unwrap_or(match self.kind {
            ExperimentKind::NoiseSweep => SuccessCriterion::TopKSupport,
            _ => SuccessCriterion::ExactWeights { tol: 1e-6 },
        })
    }

    pub fn method_list(&self) -> Vec<Method> {
        if !self.methods.is_empty() {
            return self.methods.clone();
        }
        match self.kind {
            ExperimentKind::BaselineTable => {
                vec![Method::NearestNeighbor, Method::LassoFixed, Method::Screened]
            }
            _ => vec![Method::Screened],
        }
    }

    pub fn series_list(&self) -> Vec<Series> {
        if !self.series.is_empty() {
            return self.series.clone();
        }
        match self.kind {
            ExperimentKind::ClusteredCurve => vec![Series::Random, Series::Clustered],
            _ => vec![Series::Random],
        }
    }

    pub fn sigma_list(&self) -> Vec<f64> {
        match self.kind {
            ExperimentKind::NoiseSweep => self.sigmas.clone(),
            _ => vec![0.0],
        }
    }

    /// Checks everything that can be checked without loading a dictionary.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let ks = self.ks.values();
        if ks.is_empty() {
            return bad("k range is empty".into());
        }
        if ks.contains(&0) {
            return bad("k must be at least 1".into());
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("dims must be a nonempty list of positive dimensions".into());
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be a nonempty list of positive sizes".into());
        }
        match self.kind {
            ExperimentKind::NoiseSweep if self.sigmas.is_empty() => {
                return bad("a noise sweep needs at least one sigma".into());
            }
            ExperimentKind::NoiseSweep => {
                if let Some(s) = self.sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
                    return bad(format!("sigma {s} is not a finite non-negative number"));
                }
            }
            _ if !self.sigmas.is_empty() => {
                return bad(format!("sigmas are only used by noise sweeps, not {}", self.kind));
            }
            _ => {}
        }
        if let SuccessCriterion::ExactWeights { tol } = self.success_criterion() {
            if !(tol > 0.0) {
                return bad(format!("weight tolerance {tol} must be positive"));
            }
        }
        if !(self.fixed_lambda > 0.0 && self.fixed_lambda.is_finite()) {
            return bad(format!("fixed_lambda {} must be positive", self.fixed_lambda));
        }
        let kmax = *ks.iter().max().unwrap();
        for &size in &self.sizes {
            if kmax > size {
                return bad(format!("k = {kmax} exceeds dictionary size {size}"));
            }
            if self.series_list().contains(&Series::Clustered) && 2 * kmax + 1 > size {
                return Err(HarnessError::ClusterTooLarge {
                    k: kmax,
                    needed: 2 * kmax,
                    available: size - 1,
                });
            }
        }
        self.lasso.validate()?;
        Ok(())
    }
}

/// Aggregated trials of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub series: Series,
    pub n: usize,
    #[serde(rename = "N")]
    pub size: usize,
    pub k: usize,
    pub sigma: f64,
    pub trials: usize,
    pub successes: usize,
    /// Trials where the decoder reported a numerical failure (counted as
    /// unsuccessful).
    pub numerical_errors: usize,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Mean over trials of the largest absolute weight error.
    pub mean_weight_error: f64,
    pub mean_wall_ms: f64,
}

impl CellResult {
    pub fn straddles_half(&self) -> bool {
        self.wilson_low <= 0.5 && 0.5 <= self.wilson_high
    }
}

/// Recoverable set size of one curve (fixed method, series, n, N, sigma).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub method: Method,
    pub series: Series,
    pub n: usize,
    #[serde(rename = "N")]
    pub size: usize,
    pub sigma: f64,
    /// Largest k with success rate at least 0.5.
    pub max_k_50: Option<usize>,
    /// Last k before the first cell with any failure.
    pub max_k_first_failure: Option<usize>,
    /// Wilson interval of the success rate at `max_k_50`.
    pub wilson_at_max_k_50: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub version: String,
    pub cells: Vec<CellResult>,
    pub summaries: Vec<CurveSummary>,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method, series: Series, n: usize, size: usize, sigma: f64) -> Option<&CurveSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.series == series && s.n == n && s.size == size && s.sigma == sigma)
    }

    pub fn cell(&self, method: Method, series: Series, n: usize, size: usize, k: usize, sigma: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.method == method && c.series == series && c.n == n && c.size == size && c.k == k && c.sigma == sigma
        })
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One planted instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub target: Vec<f64>,
}

/// Seed of the random stream of one trial: a pure function of the spec seed
/// and the cell coordinates, so cells can run in any order.
pub fn trial_seed(seed: u64, n: usize, size: usize, k: usize, trial: usize) -> u64 {
    let mut h = seed ^ 0x5851_f42d_4c95_7f2d;
    for part in [n as u64, size as u64, k as u64, trial as u64] {
        h = splitmix(h ^ part);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Members of a clustered draw: a random seed entry, its `2k` nearest
/// neighbours (seed excluded), and a random half of those.
pub fn cluster_pool(d: &Dictionary, seed_entry: usize, k: usize) -> Result<Vec<usize>, HarnessError> {
    let needed = 2 * k;
    if needed + 1 > d.len() {
        return Err(HarnessError::ClusterTooLarge {
            k,
            needed,
            available: d.len() - 1,
        });
    }
    Ok(d.nearest_indices(d.column(seed_entry), needed + 1)?
        .into_iter()
        .map(|(j, _)| j)
        .filter(|&j| j != seed_entry)
        .take(needed)
        .collect())
}

/// Draws the planted members, their weights and the (possibly noisy) target.
pub fn draw_trial(
    d: &Dictionary,
    k: usize,
    series: Series,
    scheme: WeightScheme,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Trial, HarnessError> {
    let mut indices: Vec<usize> = match series {
        Series::Random => sample(rng, d.len(), k).into_vec(),
        Series::Clustered => {
            let seed_entry = rng.random_range(0..d.len());
            let pool = cluster_pool(d, seed_entry, k)?;
            sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
        }
    };
    indices.sort_unstable();
    let weights: Vec<f64> = match scheme {
        WeightScheme::Uniform => (0..k).map(|_| rng.random_range(0.5..1.5)).collect(),
        WeightScheme::Equal => vec![1.0; k],
    };
    let mut target = vec![0.0; d.dim()];
    for (&j, &w) in indices.iter().zip(&weights) {
        linalg::axpy(w, d.column(j), &mut target);
    }
    if sigma > 0.0 {
        let per_coord = sigma * linalg::norm(&target) / (d.dim() as f64).sqrt();
        for v in target.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v += per_coord * g;
        }
    }
    Ok(Trial {
        indices,
        weights,
        target,
    })
}

struct Outcome {
    success: bool,
    numerical_error: bool,
    weight_error: f64,
    wall_ms: f64,
}

fn decode(spec: &ExperimentSpec, method: Method, d: &Dictionary, trial: &Trial) -> Result<Decomposition, RecoveryError> {
    let y = SummedVector::new(trial.target.clone());
    match method {
        Method::Screened => decompose(d, &y, &spec.lasso),
        Method::LassoFixed => baseline_lasso_fixed(d, &y, spec.fixed_lambda, &spec.lasso),
        Method::NearestNeighbor => baseline_nn_decompose(d, &y, trial.indices.len(), &spec.lasso),
    }
}

fn max_weight_error(trial: &Trial, dec: &Decomposition) -> f64 {
    let mut err: BTreeMap<usize, f64> = trial.indices.iter().zip(&trial.weights).map(|(&j, &w)| (j, w)).collect();
    for (&j, (_, w)) in dec.indices.iter().zip(&dec.support) {
        *err.entry(j).or_insert(0.0) -= w;
    }
    err.values().fold(0.0, |m, e| m.max(e.abs()))
}

fn top_k(dec: &Decomposition, k: usize) -> Vec<usize> {
    let mut ranked: Vec<(usize, f64)> = if dec.diagnostics.candidate_ranking.is_empty() {
        dec.indices.iter().zip(&dec.support).map(|(&j, (_, w))| (j, *w)).collect()
    } else {
        dec.diagnostics.candidate_ranking.clone()
    };
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    let mut top: Vec<usize> = ranked.into_iter().take(k).map(|(j, _)| j).collect();
    top.sort_unstable();
    top
}

fn score(criterion: SuccessCriterion, trial: &Trial, dec: &Decomposition) -> (bool, f64) {
    let weight_error = max_weight_error(trial, dec);
    let mut support = dec.indices.clone();
    support.sort_unstable();
    let success = match criterion {
        SuccessCriterion::ExactSupport => support == trial.indices,
        SuccessCriterion::ExactWeights { tol } => support == trial.indices && weight_error <= tol,
        SuccessCriterion::TopKSupport => top_k(dec, trial.indices.len()) == trial.indices,
    };
    (success, weight_error)
}

fn run_trial(
    spec: &ExperimentSpec,
    d: &Dictionary,
    (method, series, k, sigma): (Method, Series, usize, f64),
    t: usize,
) -> Result<Outcome, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(spec.seed, d.dim(), d.len(), k, t));
    let trial = draw_trial(d, k, series, spec.weights, sigma, &mut rng)?;
    let start = Instant::now();
    let result = decode(spec, method, d, &trial);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(dec) => {
            let (success, weight_error) = score(spec.success_criterion(), &trial, &dec);
            Ok(Outcome {
                success,
                numerical_error: false,
                weight_error,
                wall_ms,
            })
        }
        Err(e) if e.class() == ErrorClass::Numerical => Ok(Outcome {
            success: false,
            numerical_error: true,
            weight_error: trial.weights.iter().fold(0.0, |m, w| m.max(w.abs())),
            wall_ms,
        }),
        Err(e) => Err(e.into()),
    }
}

fn dictionary_for(
    spec: &ExperimentSpec,
    file: &Option<Dictionary>,
    n: usize,
    size: usize,
) -> Result<Dictionary, HarnessError> {
    match (&spec.dictionary, file) {
        (DictionarySource::SyntheticGaussian { seed }, _) => Ok(Dictionary::generate_synthetic(n, size, *seed)?),
        (DictionarySource::File { .. }, Some(d)) => Ok(d.prefix(size)?),
        (DictionarySource::File { .. }, None) => unreachable!("file dictionary is loaded up front"),
    }
}

fn load_file(spec: &ExperimentSpec) -> Result<Option<Dictionary>, HarnessError> {
    let DictionarySource::File { path } = &spec.dictionary else {
        return Ok(None);
    };
    let d = Dictionary::load_any(path)?;
    if let Some(&n) = spec.dims.iter().find(|&&n| n != d.dim()) {
        return Err(HarnessError::DimensionUnavailable {
            requested: n,
            available: d.dim(),
        });
    }
    if let Some(&size) = spec.sizes.iter().find(|&&s| s > d.len()) {
        return Err(HarnessError::SizeUnavailable {
            requested: size,
            available: d.len(),
        });
    }
    Ok(Some(d))
}

/// Runs every cell of `spec`, calling `progress` after each one.
pub fn run_experiment_with(
    spec: &ExperimentSpec,
    mut progress: impl FnMut(&CellResult),
) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let start = Instant::now();
    let file = load_file(spec)?;
    let ks = spec.ks.values();
    let mut cells = Vec::new();
    for &n in &spec.dims {
        for &size in &spec.sizes {
            let d = dictionary_for(spec, &file, n, size)?;
            for &method in &spec.method_list() {
                for &series in &spec.series_list() {
                    for &sigma in &spec.sigma_list() {
                        for &k in &ks {
                            let outcomes = (0..spec.trials)
                                .into_par_iter()
                                .map(|t| run_trial(spec, &d, (method, series, k, sigma), t))
                                .collect::<Result<Vec<_>, _>>()?;
                            let cell = aggregate(method, series, n, size, k, sigma, &outcomes);
                            progress(&cell);
                            cells.push(cell);
                        }
                    }
                }
            }
        }
    }
    let summaries = summarize(&cells);
    Ok(ExperimentReport {
        spec: spec.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        cells,
        summaries,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_experiment_with(spec, |_| {})
}

fn run_kind(spec: &ExperimentSpec, expected: ExperimentKind) -> Result<ExperimentReport, HarnessError> {
    if spec.kind != expected {
        return Err(HarnessError::WrongKind {
            expected,
            found: spec.kind,
        });
    }
    run_experiment(spec)
}

pub fn run_recovery_curve(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_kind(spec, ExperimentKind::RecoveryCurve)
}

pub fn run_clustered_curve(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_kind(spec, ExperimentKind::ClusteredCurve)
}

pub fn run_noise_sweep(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_kind(spec, ExperimentKind::NoiseSweep)
}

pub fn run_baseline_table(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_kind(spec, ExperimentKind::BaselineTable)
}

pub fn run_phase_probe(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_kind(spec, ExperimentKind::PhaseProbe)
}

fn aggregate(
    method: Method,
    series: Series,
    n: usize,
    size: usize,
    k: usize,
    sigma: f64,
    outcomes: &[Outcome],
) -> CellResult {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.success).count();
    let (wilson_low, wilson_high) = wilson_interval(successes, trials);
    let mean = |f: &dyn Fn(&Outcome) -> f64| outcomes.iter().map(f).sum::<f64>() / trials as f64;
    CellResult {
        method,
        series,
        n,
        size,
        k,
        sigma,
        trials,
        successes,
        numerical_errors: outcomes.iter().filter(|o| o.numerical_error).count(),
        success_rate: successes as f64 / trials as f64,
        wilson_low,
        wilson_high,
        mean_weight_error: mean(&|o| o.weight_error),
        mean_wall_ms: mean(&|o| o.wall_ms),
    }
}

fn summarize(cells: &[CellResult]) -> Vec<CurveSummary> {
    let mut curves: Vec<Vec<&CellResult>> = Vec::new();
    for c in cells {
        match curves.iter_mut().find(|cur| {
            let h = cur[0];
            h.method == c.method && h.series == c.series && h.n == c.n && h.size == c.size && h.sigma == c.sigma
        }) {
            Some(cur) => cur.push(c),
            None => curves.push(vec![c]),
        }
    }
    curves
        .into_iter()
        .map(|mut cur| {
            cur.sort_by_key(|c| c.k);
            let points: Vec<(usize, f64)> = cur.iter().map(|c| (c.k, c.success_rate)).collect();
            let k50 = max_k_50(&points);
            let h = cur[0];
            CurveSummary {
                method: h.method,
                series: h.series,
                n: h.n,
                size: h.size,
                sigma: h.sigma,
                max_k_50: k50,
                max_k_first_failure: max_k_first_failure(&points),
                wilson_at_max_k_50: k50
                    .and_then(|k| cur.iter().find(|c| c.k == k))
                    .map(|c| (c.wilson_low, c.wilson_high)),
            }
        })
        .collect()
}
