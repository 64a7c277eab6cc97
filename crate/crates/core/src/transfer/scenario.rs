//! Zero-shot and few-shot transfer scenarios, plus the JSON-driven
//! experiment harness behind the CLI.

use serde::{Deserialize, Serialize};

use super::{
    fine_tune, metadata_similarity, when_to_transfer, FineTuneConfig, FineTuneReport, GateReport,
    GateThresholds, TaskDescriptor, TransferReport,
};
use crate::embednet::{self, EmbedNetConfig, FeatureEmbeddingModel};
use crate::synthdata::{generate_task_family, FamilyConfig, TaskSpec};
use crate::{Error, Result};

/// Picks the source with the highest metadata cosine similarity to the
/// target. Exact ties go to the lexicographically smallest task name.
pub fn select_source(sources: &[TaskDescriptor], target: &TaskDescriptor) -> Result<usize> {
    if sources.is_empty() {
        return Err(Error::Contract("no source tasks to select from".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in sources.iter().enumerate() {
        let sim = metadata_similarity(&s.metadata, &target.metadata)?;
        let better = match best {
            None => true,
            Some((j, best_sim)) => {
                sim > best_sim || (sim == best_sim && s.name < sources[j].name)
            }
        };
        if better {
            best = Some((i, sim));
        }
    }
    Ok(best.expect("sources non-empty").0)
}

/// What a zero-shot run produced.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroShotOutcome {
    pub chosen_index: usize,
    pub chosen_source: String,
    /// `(source name, metadata similarity)` for every candidate.
    pub similarities: Vec<(String, f64)>,
    /// The chosen source model applied unchanged to every target sample.
    pub predictions: Vec<f64>,
}

/// Applies the metadata-nearest source's model unchanged to the target's
/// samples. Target labels are never touched.
pub fn zero_shot(
    sources: &[(TaskDescriptor, FeatureEmbeddingModel)],
    target: &TaskDescriptor,
) -> Result<ZeroShotOutcome> {
    if sources.is_empty() {
        return Err(Error::Contract("zero_shot needs at least one source".into()));
    }
    let descriptors: Vec<TaskDescriptor> = sources.iter().map(|(d, _)| d.clone()).collect();
    let chosen_index = select_source(&descriptors, target)?;
    let similarities = descriptors
        .iter()
        .map(|d| Ok((d.name.clone(), metadata_similarity(&d.metadata, &target.metadata)?)))
        .collect::<Result<Vec<_>>>()?;
    let model = &sources[chosen_index].1;
    let predictions = target
        .dataset
        .samples
        .iter()
        .map(|s| model.predict(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ZeroShotOutcome {
        chosen_index,
        chosen_source: descriptors[chosen_index].name.clone(),
        similarities,
        predictions,
    })
}

/// Settings for [`few_shot`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FewShotConfig {
    /// How many labeled target samples the scenario grants.
    pub n_labeled: usize,
    pub fine_tune: FineTuneConfig,
    pub thresholds: GateThresholds,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        Self {
            n_labeled: 25,
            fine_tune: FineTuneConfig::default(),
            thresholds: GateThresholds::default(),
        }
    }
}

/// Zero-shot source selection followed by fine-tuning on the first
/// `n_labeled` target samples. Losses are evaluated on the remaining target
/// samples (or an internal split when none remain). The report's
/// negative-transfer flag compares against a from-scratch model trained on
/// the same few samples.
pub fn few_shot(
    sources: &[(TaskDescriptor, FeatureEmbeddingModel)],
    target: &TaskDescriptor,
    config: &FewShotConfig,
) -> Result<(FeatureEmbeddingModel, TransferReport)> {
    if sources.is_empty() {
        return Err(Error::Contract("few_shot needs at least one source".into()));
    }
    let n = config.n_labeled;
    if n == 0 || n > target.dataset.len() {
        return Err(Error::Contract(format!(
            "n_labeled {} must lie in [1, {}]",
            n,
            target.dataset.len()
        )));
    }
    let descriptors: Vec<TaskDescriptor> = sources.iter().map(|(d, _)| d.clone()).collect();
    let chosen = select_source(&descriptors, target)?;
    let (source_desc, source_model) = &sources[chosen];

    let gate = when_to_transfer(source_desc, target, &config.thresholds, Some(source_model))?;

    let labeled_idx: Vec<usize> = (0..n).collect();
    let labeled = target.dataset.select(&labeled_idx);
    let eval = if n < target.dataset.len() {
        let rest: Vec<usize> = (n..target.dataset.len()).collect();
        Some(target.dataset.select(&rest))
    } else {
        None
    };

    let (model, outcome) = fine_tune(source_model, &labeled, eval.as_ref(), &config.fine_tune)?;
    let report = TransferReport {
        source_name: source_desc.name.clone(),
        target_name: target.name.clone(),
        gate,
        outcome,
    };
    Ok((model, report))
}

/// Scenario selector for experiment specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    ZeroShot,
    FewShot,
}

/// JSON experiment description consumed by the harness (and the CLI).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub family: FamilyConfig,
    pub mode: ScenarioMode,
    #[serde(default)]
    pub n_target_samples: Option<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub thresholds: GateThresholds,
    #[serde(default)]
    pub model: EmbedNetConfig,
    #[serde(default)]
    pub fine_tune: FineTuneConfig,
}

/// One seed's results.
#[derive(Debug, Clone, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub chosen_source: String,
    pub similarities: Vec<(String, f64)>,
    pub gate: GateReport,
    /// True when the gate said no and adaptation was skipped.
    pub skipped: bool,
    /// Fine-tune outcome (few-shot runs that passed the gate).
    pub outcome: Option<FineTuneReport>,
    /// Zero-shot evaluation MSE of the transferred predictions against the
    /// target's labels (labels are used for evaluation only).
    pub zero_shot_mse: Option<f64>,
}

/// Aggregates across seeds.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentAggregate {
    pub seeds_run: usize,
    pub gate_pass_rate: f64,
    /// Median of `transferred / baseline` validation loss over non-skipped
    /// few-shot seeds; below 1 means transfer helped.
    pub median_improvement_ratio: Option<f64>,
    pub negative_transfer_rate: Option<f64>,
    pub median_zero_shot_mse: Option<f64>,
}

/// Everything the harness produced, JSON-serializable.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub seeds: Vec<SeedReport>,
    pub aggregate: ExperimentAggregate,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

/// Runs the experiment: per seed, a fresh task family is generated (the last
/// task is the target), the metadata-nearest source is trained, and the
/// scenario plays out. Only the selected source is ever trained; selection
/// itself needs no models.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.seeds.is_empty() {
        return Err(Error::InvalidConfig("experiment needs at least one seed".into()));
    }
    if spec.mode == ScenarioMode::FewShot && spec.n_target_samples.is_none() {
        return Err(Error::InvalidConfig(
            "few_shot experiments need n_target_samples".into(),
        ));
    }
    let base = TaskSpec::reference();
    let mut seed_reports = Vec::with_capacity(spec.seeds.len());

    for &seed in &spec.seeds {
        let family = generate_task_family(&base, &spec.family, seed)?;
        let (target_pair, source_pairs) = family.split_last().expect("n_tasks >= 2");
        let target = TaskDescriptor::new("target", &target_pair.0, target_pair.1.clone())?;
        let sources: Vec<TaskDescriptor> = source_pairs
            .iter()
            .enumerate()
            .map(|(i, (ts, ds))| TaskDescriptor::new(format!("task_{i:02}"), ts, ds.clone()))
            .collect::<Result<_>>()?;

        let chosen = select_source(&sources, &target)?;
        let similarities = sources
            .iter()
            .map(|d| Ok((d.name.clone(), metadata_similarity(&d.metadata, &target.metadata)?)))
            .collect::<Result<Vec<_>>>()?;

        // Train only the selected source.
        let model_config = EmbedNetConfig {
            seed,
            ..spec.model.clone()
        };
        let mut source_model =
            FeatureEmbeddingModel::new(sources[chosen].dataset.feature_count, model_config.clone())?;
        embednet::train(&mut source_model, &sources[chosen].dataset, &model_config)?;

        let gate = when_to_transfer(&sources[chosen], &target, &spec.thresholds, Some(&source_model))?;

        let mut report = SeedReport {
            seed,
            chosen_source: sources[chosen].name.clone(),
            similarities,
            gate: gate.clone(),
            skipped: false,
            outcome: None,
            zero_shot_mse: None,
        };

        match spec.mode {
            ScenarioMode::ZeroShot => {
                if gate.gate_decision {
                    let pair = vec![(sources[chosen].clone(), source_model)];
                    let outcome = zero_shot(&pair, &target)?;
                    let mse = outcome
                        .predictions
                        .iter()
                        .zip(target.dataset.targets())
                        .map(|(p, y)| (p - y) * (p - y))
                        .sum::<f64>()
                        / target.dataset.len() as f64;
                    report.zero_shot_mse = Some(mse);
                } else {
                    report.skipped = true;
                }
            }
            ScenarioMode::FewShot => {
                if gate.gate_decision {
                    let fs = FewShotConfig {
                        n_labeled: spec.n_target_samples.expect("validated above"),
                        fine_tune: FineTuneConfig {
                            seed,
                            ..spec.fine_tune
                        },
                        thresholds: spec.thresholds,
                    };
                    let pair = vec![(sources[chosen].clone(), source_model)];
                    let (_, transfer_report) = few_shot(&pair, &target, &fs)?;
                    report.gate = transfer_report.gate.clone();
                    report.outcome = Some(transfer_report.outcome);
                } else {
                    report.skipped = true;
                }
            }
        }
        seed_reports.push(report);
    }

    let passed: Vec<&SeedReport> = seed_reports.iter().filter(|r| !r.skipped).collect();
    let ratios: Vec<f64> = passed
        .iter()
        .filter_map(|r| r.outcome.as_ref())
        .map(|o| o.transferred_val_loss / o.baseline_val_loss)
        .collect();
    let neg_rate = {
        let outcomes: Vec<bool> = passed
            .iter()
            .filter_map(|r| r.outcome.as_ref())
            .map(|o| o.negative_transfer)
            .collect();
        if outcomes.is_empty() {
            None
        } else {
            Some(outcomes.iter().filter(|&&b| b).count() as f64 / outcomes.len() as f64)
        }
    };
    let aggregate = ExperimentAggregate {
        seeds_run: seed_reports.len(),
        gate_pass_rate: passed.len() as f64 / seed_reports.len() as f64,
        median_improvement_ratio: median(ratios),
        negative_transfer_rate: neg_rate,
        median_zero_shot_mse: median(
            seed_reports.iter().filter_map(|r| r.zero_shot_mse).collect(),
        ),
    };
    Ok(ExperimentReport {
        spec: spec.clone(),
        seeds: seed_reports,
        aggregate,
    })
}
