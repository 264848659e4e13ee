//! Multi-trial experiment harnesses: the deep-versus-baseline separation
//! runs and the census total-variation decay runs, with deterministic
//! CSV/JSON reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{local_classify, shallow_classify, trivial_classify, LocalKind};
use crate::compress::{compress, CompressionScheme};
use crate::label::LabelId;
use crate::model::{ModelParams, ModelVariant, Regime, Representation};
use crate::par::{map_indexed, Parallelism};
use crate::reconstruct::{
    reconstruct_tree, topology_matches, ReconstructParams, ReconstructionResult,
};
use crate::rng::{derive_seed, stream, StreamTag};
use crate::sample::{
    generate_instance, make_dataset, sample_iidm, sample_model, with_instance, InstanceSpec,
    RootSpec,
};
use crate::tree::TreeTopology;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Sample(#[from] crate::sample::SampleError),
    #[error(transparent)]
    Tree(#[from] crate::tree::TreeError),
    #[error(transparent)]
    Compress(#[from] crate::compress::CompressError),
    #[error("total-variation estimation needs at least 100 samples, got {0}")]
    TooFewSamples(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn default_shallow_s() -> usize {
    2
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub q: u16,
    pub k: usize,
    pub lambda: f64,
    #[serde(default = "default_regime")]
    pub regime: Regime,
}

fn default_regime() -> Regime {
    Regime::Random
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TreeConfig {
    pub d: u64,
    pub h: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub h0: u32,
    pub h1: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReconstructConfig {
    pub r: u32,
}

/// Constants for the reference bound columns. The bound shapes come from
/// the lower-bound statements; the constants are reported as configured,
/// never as derived.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundConstants {
    #[serde(default = "default_one")]
    pub local_c: f64,
    #[serde(default = "default_one")]
    pub shallow_big_c: f64,
    #[serde(default = "default_one")]
    pub shallow_small_c: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants { local_c: 1.0, shallow_big_c: 1.0, shallow_small_c: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub tree: TreeConfig,
    pub instance: InstanceConfig,
    pub trials: u32,
    pub seed: u64,
    pub methods: Vec<String>,
    pub reconstruct: ReconstructConfig,
    #[serde(default = "default_shallow_s")]
    pub shallow_s: usize,
    #[serde(default)]
    pub bound_constants: BoundConstants,
}

pub const KNOWN_METHODS: &[&str] =
    &["deep", "local_nn", "local_ml", "shallow_nb", "shallow_s", "trivial"];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::BadConfig("trial count must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(ExperimentError::BadConfig("methods list is empty".into()));
        }
        for m in &self.methods {
            if !KNOWN_METHODS.contains(&m.as_str()) {
                return Err(ExperimentError::BadConfig(format!("unknown method {m:?}")));
            }
        }
        let tree = TreeTopology::new(self.tree.d, self.tree.h)?;
        InstanceSpec { h0: self.instance.h0, h1: self.instance.h1 }.validate(&tree)?;
        Ok(())
    }
}

/// One aggregated line of the report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub config_id: usize,
    pub model: String,
    pub d: u64,
    pub h: u32,
    pub q: u16,
    pub k: usize,
    pub lambda: f64,
    pub regime: String,
    pub h0: u32,
    pub h1: u32,
    pub trials: u32,
    pub method: String,
    pub scored: u64,
    pub correct: u64,
    pub mean_accuracy: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Fraction of trials with exactly recovered topology (deep only).
    pub tree_recovery_rate: Option<f64>,
    /// The always-available baseline rate `d^-h0`.
    pub trivial_rate: f64,
    /// Reference bound value under the configured constants; only the
    /// bound's shape is meaningful, never its tightness.
    pub bound_reference: Option<f64>,
    pub bound_kind: Option<String>,
    pub failures: u32,
}

/// Per-trial outcomes; failures are recorded, never dropped.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub config_id: usize,
    pub trial: u32,
    pub accuracy: BTreeMap<String, f64>,
    pub topology_exact: Option<bool>,
    pub deep_failure: Option<String>,
    pub quality_trace: Option<Vec<(u32, f64)>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub trials: Vec<TrialRecord>,
}

impl Report {
    pub fn any_failures(&self) -> bool {
        self.trials.iter().any(|t| t.deep_failure.is_some())
    }
}

struct TrialOutcome {
    correct: BTreeMap<String, u64>,
    scored: u64,
    topology_exact: Option<bool>,
    deep_failure: Option<String>,
    quality_trace: Option<Vec<(u32, f64)>>,
}

fn model_params_for_trial(config: &ExperimentConfig, trial_seed: u64, h: u32) -> ModelParams {
    let mut params = ModelParams::new(
        config.model.variant,
        config.model.q,
        config.model.k,
        config.model.lambda,
        trial_seed,
    );
    params.regime = config.model.regime;
    if config.model.variant == ModelVariant::Fim {
        let rewiring = (1..=h)
            .map(|level| {
                let mut rng = stream(trial_seed, StreamTag::Rewiring, level, 0);
                crate::model::random_rewiring(config.model.k, &mut rng)
            })
            .collect();
        params.rewiring = Some(rewiring);
    }
    params
}

fn run_trial(config: &ExperimentConfig, trial: u32) -> Result<TrialOutcome, ExperimentError> {
    let tree = TreeTopology::new(config.tree.d, config.tree.h)?;
    let trial_seed = derive_seed(config.seed, StreamTag::Trial, trial as u64);
    let params = model_params_for_trial(config, trial_seed, tree.height());
    let gt = sample_model(&tree, &params, RootSpec::Uniform, Parallelism::Sequential)?;
    let spec = InstanceSpec { h0: config.instance.h0, h1: config.instance.h1 };
    let (labels, sample_set) = generate_instance(&tree, spec, trial_seed)?;
    let gt = with_instance(gt, labels, sample_set);
    let data = make_dataset(&gt)?;

    // Ground truth over the scored (unlabeled) leaves, in dataset order.
    let truth: Vec<LabelId> = data
        .unlabeled
        .iter()
        .map(|(node, _)| gt.labels.most_specific(*node).expect("instance labels every leaf"))
        .collect();
    let scored = truth.len() as u64;

    let mut outcome = TrialOutcome {
        correct: BTreeMap::new(),
        scored,
        topology_exact: None,
        deep_failure: None,
        quality_trace: None,
    };

    let count_correct = |preds: &[Option<LabelId>]| -> u64 {
        preds.iter().zip(&truth).filter(|(p, t)| **p == Some(**t)).count() as u64
    };

    for method in &config.methods {
        match method.as_str() {
            "deep" => {
                let mut rp = ReconstructParams::new(config.model.lambda, config.reconstruct.r);
                rp.rewiring = params.rewiring.clone();
                rp.par = Parallelism::Sequential;
                match reconstruct_tree(&data, &rp) {
                    Ok(result) => {
                        outcome.topology_exact =
                            Some(topology_matches(&result.tree, &result.leaf_nodes, &tree));
                        outcome.quality_trace = Some(result.diagnostics.quality_trace.clone());
                        let preds = unlabeled_predictions(&data, &result);
                        outcome.correct.insert(method.clone(), count_correct(&preds));
                    }
                    Err(e) => {
                        outcome.topology_exact = Some(false);
                        outcome.deep_failure = Some(e.to_string());
                        outcome.correct.insert(method.clone(), 0);
                    }
                }
            }
            "local_nn" | "local_ml" => {
                let labeled: Vec<(Representation, LabelId)> =
                    data.labeled.iter().map(|(_, r, l)| (r.clone(), *l)).collect();
                let kind = if method == "local_nn" {
                    LocalKind::NearestNeighbor
                } else {
                    LocalKind::MaxLikelihood {
                        lambda: config.model.lambda,
                        depth: 2 * (config.tree.h - config.instance.h1),
                    }
                };
                let preds: Vec<Option<LabelId>> = data
                    .unlabeled
                    .iter()
                    .map(|(_, rep)| local_classify(rep, &labeled, kind, config.model.q))
                    .collect();
                outcome.correct.insert(method.clone(), count_correct(&preds));
            }
            "shallow_nb" => {
                let c = compress(&data, &CompressionScheme::canonical(config.model.k))?;
                outcome.correct.insert(method.clone(), count_correct(&shallow_classify(&c, 1.0)));
            }
            "shallow_s" => {
                let scheme = CompressionScheme::windows(config.model.k, config.shallow_s);
                let c = compress(&data, &scheme)?;
                outcome.correct.insert(method.clone(), count_correct(&shallow_classify(&c, 1.0)));
            }
            "trivial" => {
                let c = compress(&data, &CompressionScheme::canonical(config.model.k))?;
                let label = trivial_classify(&c);
                let preds = vec![label; data.unlabeled.len()];
                outcome.correct.insert(method.clone(), count_correct(&preds));
            }
            other => {
                return Err(ExperimentError::BadConfig(format!("unknown method {other:?}")));
            }
        }
    }
    Ok(outcome)
}

/// Predictions for the dataset's unlabeled rows, in their dataset order.
fn unlabeled_predictions(
    data: &crate::data::Dataset,
    result: &ReconstructionResult,
) -> Vec<Option<LabelId>> {
    let by_node: BTreeMap<crate::tree::NodeRef, Option<LabelId>> = result
        .leaf_nodes
        .iter()
        .zip(&result.labels)
        .map(|(n, l)| (*n, *l))
        .collect();
    data.unlabeled.iter().map(|(node, _)| by_node.get(node).copied().flatten()).collect()
}

/// 95% score interval for a binomial proportion; always contains the
/// sample mean.
pub fn wilson_interval(correct: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = total as f64;
    let p = correct as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // The score interval contains the sample mean analytically; keep that
    // true under floating-point rounding as well.
    (((center - half).max(0.0)).min(p), ((center + half).min(1.0)).max(p))
}

/// Run every configuration for its full trial count; trials are the unit
/// of parallelism and each trial is single-threaded end to end.
pub fn run_separation_experiment(
    configs: &[ExperimentConfig],
    par: Parallelism,
) -> Result<Report, ExperimentError> {
    if configs.is_empty() {
        return Err(ExperimentError::BadConfig("no configurations given".into()));
    }
    for config in configs {
        config.validate()?;
    }
    let mut rows = Vec::new();
    let mut trial_records = Vec::new();
    for (config_id, config) in configs.iter().enumerate() {
        let outcomes: Vec<Result<TrialOutcome, ExperimentError>> =
            map_indexed(par, config.trials as usize, |t| run_trial(config, t as u32));
        let mut per_method_correct: BTreeMap<String, u64> = BTreeMap::new();
        let mut scored_total = 0u64;
        let mut failures = 0u32;
        let mut recovered = 0u32;
        for (t, outcome) in outcomes.into_iter().enumerate() {
            let outcome = outcome?;
            scored_total += outcome.scored;
            if outcome.deep_failure.is_some() {
                failures += 1;
            }
            if outcome.topology_exact == Some(true) {
                recovered += 1;
            }
            let mut accuracy = BTreeMap::new();
            for (method, correct) in &outcome.correct {
                *per_method_correct.entry(method.clone()).or_insert(0) += correct;
                accuracy.insert(
                    method.clone(),
                    if outcome.scored == 0 { 0.0 } else { *correct as f64 / outcome.scored as f64 },
                );
            }
            trial_records.push(TrialRecord {
                config_id,
                trial: t as u32,
                accuracy,
                topology_exact: outcome.topology_exact,
                deep_failure: outcome.deep_failure,
                quality_trace: outcome.quality_trace,
            });
        }
        let trivial_rate = (config.tree.d as f64).powi(-(config.instance.h0 as i32));
        for method in &config.methods {
            let correct = per_method_correct.get(method).copied().unwrap_or(0);
            let (ci_lo, ci_hi) = wilson_interval(correct, scored_total);
            let mean = if scored_total == 0 { 0.0 } else { correct as f64 / scored_total as f64 };
            let (bound_reference, bound_kind) = bound_reference(config, method);
            rows.push(ReportRow {
                config_id,
                model: config.model.variant.as_str().to_string(),
                d: config.tree.d,
                h: config.tree.h,
                q: config.model.q,
                k: config.model.k,
                lambda: config.model.lambda,
                regime: config.model.regime.as_str().to_string(),
                h0: config.instance.h0,
                h1: config.instance.h1,
                trials: config.trials,
                method: method.clone(),
                scored: scored_total,
                correct,
                mean_accuracy: mean,
                ci_lo,
                ci_hi,
                tree_recovery_rate: (method == "deep")
                    .then(|| recovered as f64 / config.trials as f64),
                trivial_rate,
                bound_reference,
                bound_kind,
                failures,
            });
        }
    }
    Ok(Report { rows, trials: trial_records })
}

/// The lower-bound shapes with configured constants, marked as reference
/// values only.
fn bound_reference(config: &ExperimentConfig, method: &str) -> (Option<f64>, Option<String>) {
    let d = config.tree.d as f64;
    let h0 = config.instance.h0 as f64;
    let gap = (config.tree.h - config.instance.h1) as f64;
    let base = d.powf(-h0);
    let c = config.bound_constants;
    match method {
        "local_nn" | "local_ml" => {
            let v = base
                * (1.0
                    + c.local_c
                        * config.model.k as f64
                        * config.model.lambda.powf(gap)
                        * config.model.q as f64);
            (Some(v.min(1.0)), Some("reference".into()))
        }
        "shallow_nb" | "shallow_s" => {
            let m = config.model.k as f64;
            let v = base
                + c.shallow_big_c * m * d.powf(h0) * (-c.shallow_small_c * gap).exp();
            (Some(v.min(1.0)), Some("reference".into()))
        }
        _ => (None, None),
    }
}

pub fn write_report_csv(path: &Path, report: &Report) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "config_id",
        "model",
        "d",
        "h",
        "q",
        "k",
        "lambda",
        "regime",
        "h0",
        "h1",
        "trials",
        "method",
        "scored",
        "correct",
        "mean_accuracy",
        "ci_lo",
        "ci_hi",
        "tree_recovery_rate",
        "trivial_rate",
        "bound_reference",
        "bound_kind",
        "failures",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.config_id.to_string(),
            r.model.clone(),
            r.d.to_string(),
            r.h.to_string(),
            r.q.to_string(),
            r.k.to_string(),
            r.lambda.to_string(),
            r.regime.clone(),
            r.h0.to_string(),
            r.h1.to_string(),
            r.trials.to_string(),
            r.method.clone(),
            r.scored.to_string(),
            r.correct.to_string(),
            r.mean_accuracy.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
            r.tree_recovery_rate.map(|v| v.to_string()).unwrap_or_default(),
            r.trivial_rate.to_string(),
            r.bound_reference.map(|v| v.to_string()).unwrap_or_default(),
            r.bound_kind.clone().unwrap_or_default(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_json(path: &Path, report: &Report) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Plug-in total-variation estimate between two samplers over a common
/// discrete census statistic, with a bootstrap standard error.
pub struct TvEstimate {
    pub tv: f64,
    pub se: f64,
}

pub fn estimate_tv_distance<A, B>(
    sampler_a: A,
    sampler_b: B,
    n_samples: u32,
    bootstrap_resamples: u32,
    bootstrap_seed: u64,
    par: Parallelism,
) -> Result<TvEstimate, ExperimentError>
where
    A: Fn(u64) -> Vec<u8> + Sync + Send,
    B: Fn(u64) -> Vec<u8> + Sync + Send,
{
    if n_samples < 100 {
        return Err(ExperimentError::TooFewSamples(n_samples));
    }
    let n = n_samples as usize;
    let keys_a = map_indexed(par, n, |i| sampler_a(i as u64));
    let keys_b = map_indexed(par, n, |i| sampler_b(i as u64));
    let mut support: BTreeMap<Vec<u8>, (u64, u64)> = BTreeMap::new();
    for k in keys_a {
        support.entry(k).or_insert((0, 0)).0 += 1;
    }
    for k in keys_b {
        support.entry(k).or_insert((0, 0)).1 += 1;
    }
    let counts: Vec<(u64, u64)> = support.values().copied().collect();
    let tv = plugin_tv(&counts, n as u64, n as u64);

    // Bootstrap: resample both empirical distributions and track the
    // spread of the recomputed estimate.
    let mut rng = stream(bootstrap_seed, StreamTag::Bootstrap, 0, 0);
    let cum_a = cumulative(counts.iter().map(|c| c.0));
    let cum_b = cumulative(counts.iter().map(|c| c.1));
    let mut tvs = Vec::with_capacity(bootstrap_resamples as usize);
    for _ in 0..bootstrap_resamples {
        let ra = multinomial_resample(&cum_a, n as u64, &mut rng);
        let rb = multinomial_resample(&cum_b, n as u64, &mut rng);
        let resampled: Vec<(u64, u64)> =
            ra.into_iter().zip(rb).collect();
        tvs.push(plugin_tv(&resampled, n as u64, n as u64));
    }
    let mean = tvs.iter().sum::<f64>() / tvs.len().max(1) as f64;
    let var = if tvs.len() > 1 {
        tvs.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (tvs.len() - 1) as f64
    } else {
        0.0
    };
    Ok(TvEstimate { tv, se: var.sqrt() })
}

fn plugin_tv(counts: &[(u64, u64)], total_a: u64, total_b: u64) -> f64 {
    0.5 * counts
        .iter()
        .map(|&(a, b)| (a as f64 / total_a as f64 - b as f64 / total_b as f64).abs())
        .sum::<f64>()
}

fn cumulative(counts: impl Iterator<Item = u64>) -> Vec<u64> {
    let mut acc = 0u64;
    counts
        .map(|c| {
            acc += c;
            acc
        })
        .collect()
}

fn multinomial_resample<R: rand::Rng>(cum: &[u64], n: u64, rng: &mut R) -> Vec<u64> {
    let total = *cum.last().unwrap_or(&0);
    let mut out = vec![0u64; cum.len()];
    for _ in 0..n {
        let u = rng.gen_range(0..total);
        let idx = cum.partition_point(|&c| c <= u);
        out[idx] += 1;
    }
    out
}

/// One row of the census-decay run.
#[derive(Debug, Clone, Serialize)]
pub struct CountTvRow {
    pub h: u32,
    pub tv: f64,
    pub se: f64,
    pub d: u64,
    pub q: u16,
    pub k: usize,
    pub lambda: f64,
    /// The reconstruction-threshold ratio `d * lambda^2` this run sits at.
    pub ks_ratio: f64,
    pub samples: u32,
}

/// Census key: the multiset of leaf representations, canonically sorted.
fn census_key(gt: &crate::sample::GroundTruth) -> Vec<u8> {
    let tree = &gt.tree;
    let mut rows: Vec<&[u8]> =
        tree.leaves().map(|leaf| gt.rep(leaf).letters()).collect();
    rows.sort_unstable();
    rows.concat()
}

/// Total variation between leaf-census distributions conditioned on two
/// fixed distinct root representations, for each height in `h_list`.
pub fn run_count_tv_experiment(
    d: u64,
    lambda: f64,
    q: u16,
    k: usize,
    h_list: &[u32],
    n_samples: u32,
    seed: u64,
    par: Parallelism,
) -> Result<Vec<CountTvRow>, ExperimentError> {
    let mut rows = Vec::new();
    for &h in h_list {
        let tree = TreeTopology::new(d, h)?;
        let root_a = Representation::new(vec![0; k]);
        let root_b = Representation::new(vec![1; k]);
        let sampler = |root: Representation, salt: u64| {
            move |i: u64| {
                let sample_seed =
                    derive_seed(seed ^ (u64::from(h) << 32) ^ salt, StreamTag::TvSample, i);
                let params = ModelParams::new(ModelVariant::Iidm, q, k, lambda, sample_seed);
                let gt = sample_iidm(&tree, &params, RootSpec::Fixed(root.clone()), Parallelism::Sequential)
                    .expect("valid sampling parameters");
                census_key(&gt)
            }
        };
        let est = estimate_tv_distance(
            sampler(root_a, 1),
            sampler(root_b, 2),
            n_samples,
            200,
            seed ^ u64::from(h),
            par,
        )?;
        rows.push(CountTvRow {
            h,
            tv: est.tv,
            se: est.se,
            d,
            q,
            k,
            lambda,
            ks_ratio: d as f64 * lambda * lambda,
            samples: n_samples,
        });
    }
    Ok(rows)
}

pub fn write_count_tv_csv(path: &Path, rows: &[CountTvRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["h", "tv", "se", "d", "q", "k", "lambda", "ks_ratio", "samples"])?;
    for r in rows {
        w.write_record([
            r.h.to_string(),
            r.tv.to_string(),
            r.se.to_string(),
            r.d.to_string(),
            r.q.to_string(),
            r.k.to_string(),
            r.lambda.to_string(),
            r.ks_ratio.to_string(),
            r.samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_mean() {
        for (c, n) in [(0u64, 10u64), (10, 10), (7, 10), (250, 1000)] {
            let (lo, hi) = wilson_interval(c, n);
            let p = c as f64 / n as f64;
            assert!(lo <= p && p <= hi, "({c}, {n})");
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let config = ExperimentConfig {
            model: ModelConfig {
                variant: ModelVariant::Iidm,
                q: 4,
                k: 16,
                lambda: 0.8,
                regime: Regime::Random,
            },
            tree: TreeConfig { d: 2, h: 4 },
            instance: InstanceConfig { h0: 1, h1: 2 },
            trials: 0,
            seed: 1,
            methods: vec!["trivial".into()],
            reconstruct: ReconstructConfig { r: 2 },
            shallow_s: 2,
            bound_constants: BoundConstants::default(),
        };
        assert!(run_separation_experiment(&[config], Parallelism::Sequential).is_err());
    }

    #[test]
    fn identical_samplers_give_near_zero_tv() {
        let f = |i: u64| vec![(i % 7) as u8];
        let est =
            estimate_tv_distance(f, f, 2000, 100, 3, Parallelism::Sequential).unwrap();
        assert!(est.tv <= 3.0 * est.se.max(1e-9), "tv={} se={}", est.tv, est.se);
    }

    #[test]
    fn disjoint_samplers_give_tv_one() {
        let a = |_: u64| vec![0u8];
        let b = |_: u64| vec![1u8];
        let est = estimate_tv_distance(a, b, 500, 50, 4, Parallelism::Sequential).unwrap();
        assert_eq!(est.tv, 1.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        let f = |_: u64| vec![0u8];
        assert!(matches!(
            estimate_tv_distance(f, f, 99, 10, 1, Parallelism::Sequential),
            Err(ExperimentError::TooFewSamples(99))
        ));
    }
}
