//! Run configuration: a sectioned `key = value` file. Every key has a
//! default and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semnav::a3c::TrainConfig;
use semnav::evalharness::{ActionSelection, EvalConfig, ExperimentConfig, Inventory, Model, TargetPlan};
use semnav::featurizer::ViewConfig;
use semnav::gridscene::{GoalMatch, TargetMode};
use semnav::observation::PerceptionConfig;
use semnav::policynet::Variant;

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenes: ScenesSection,
    pub targets: TargetsSection,
    pub train: TrainSection,
    pub perception: PerceptionSection,
    pub semantics: SemanticsSection,
    pub eval: EvalSection,
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenesSection {
    pub dir: PathBuf,
    pub count_per_type: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for ScenesSection {
    fn default() -> Self {
        let inv = Inventory::default();
        ScenesSection {
            dir: PathBuf::from("scenes"),
            count_per_type: inv.per_type,
            width: inv.width,
            height: inv.height,
            seed: inv.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetsSection {
    /// `random`, `object` or `top-semantic`.
    pub mode: String,
    pub per_scene: usize,
    pub seed: u64,
}

impl Default for TargetsSection {
    fn default() -> Self {
        TargetsSection { mode: "object".into(), per_scene: 5, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub variant: String,
    pub workers: usize,
    pub total_frames: u64,
    pub t_max: usize,
    pub gamma: f64,
    pub beta: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    pub seed: u64,
    pub embed: usize,
    pub cap: u32,
    /// `exact` or `position`.
    pub goal: String,
    /// Leave the first instance of each scene type out (the T2 split).
    pub exclude_held_out: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            variant: t.variant.to_string(),
            workers: t.workers,
            total_frames: t.total_frames,
            t_max: t.t_max,
            gamma: t.gamma,
            beta: t.beta,
            value_coef: t.value_coef,
            lr: t.lr,
            rmsprop_decay: t.rmsprop_decay,
            rmsprop_eps: t.rmsprop_eps,
            seed: t.seed,
            embed: t.embed,
            cap: t.cap,
            goal: "exact".into(),
            exclude_held_out: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionSection {
    pub feature_dim: usize,
    pub feature_seed: u64,
    pub fov_degrees: f64,
    pub range: f64,
    pub confidence_slope: f64,
    pub min_confidence: f64,
}

impl Default for PerceptionSection {
    fn default() -> Self {
        let p = PerceptionConfig::default();
        PerceptionSection {
            feature_dim: p.feature_dim,
            feature_seed: p.feature_seed,
            fov_degrees: p.view.fov_degrees,
            range: p.view.range,
            confidence_slope: p.view.confidence_slope,
            min_confidence: p.view.min_confidence,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemanticsSection {
    /// Encoder checkpoint; its vocabulary sits next to it with a
    /// `.vocab` extension.
    pub encoder: Option<PathBuf>,
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SemanticsSection {
    fn default() -> Self {
        let a = semnav::semantics::AutoencoderConfig::default();
        SemanticsSection { encoder: None, dim: a.dim, epochs: a.epochs, lr: a.lr, seed: a.seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
    pub cap: u32,
    pub seed: u64,
    pub workers: usize,
    /// `greedy` or `sample`.
    pub selection: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EvalConfig::default();
        EvalSection {
            episodes: e.episodes_per_target,
            cap: e.cap,
            seed: e.seed,
            workers: e.workers,
            selection: "greedy".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub models: Vec<String>,
    /// Per-model frame budgets; `[train] total_frames` is not used here.
    pub t1_frames: u64,
    pub t2_frames: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = ExperimentConfig::default();
        ExperimentSection {
            models: Model::ALL.iter().map(|m| m.name().to_owned()).collect(),
            t1_frames: d.t1_frames,
            t2_frames: d.t2_frames,
        }
    }
}

pub fn parse_variant(s: &str) -> Result<Variant, CliError> {
    s.parse().map_err(|_| CliError::config(format!("unknown variant {s:?} (expected sn or ssn)")))
}

pub fn parse_target_mode(s: &str) -> Result<TargetMode, CliError> {
    s.parse()
        .map_err(|_| CliError::config(format!("unknown target mode {s:?} (expected random, object or top-semantic)")))
}

pub fn parse_goal(s: &str) -> Result<GoalMatch, CliError> {
    match s {
        "exact" => Ok(GoalMatch::Exact),
        "position" | "position_only" => Ok(GoalMatch::PositionOnly),
        _ => Err(CliError::config(format!("unknown goal {s:?} (expected exact or position)"))),
    }
}

pub fn parse_selection(s: &str) -> Result<ActionSelection, CliError> {
    match s {
        "greedy" => Ok(ActionSelection::Greedy),
        "sample" => Ok(ActionSelection::Sample),
        _ => Err(CliError::config(format!("unknown action selection {s:?} (expected greedy or sample)"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::from(e).context(path.display()))?;
        RunConfig::parse(&text).map_err(|e| e.context(path.display()))
    }

    /// Rejects enumerated values that do not parse.
    pub fn check(&self) -> Result<(), CliError> {
        parse_variant(&self.train.variant)?;
        parse_target_mode(&self.targets.mode)?;
        parse_goal(&self.train.goal)?;
        parse_selection(&self.eval.selection)?;
        self.models()?;
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        parse_variant(&self.train.variant).expect("checked")
    }

    pub fn target_mode(&self) -> TargetMode {
        parse_target_mode(&self.targets.mode).expect("checked")
    }

    pub fn models(&self) -> Result<Vec<Model>, CliError> {
        self.experiment
            .models
            .iter()
            .map(|m| m.parse::<Model>().map_err(|e| CliError::config(e.to_string())))
            .collect()
    }

    pub fn perception(&self) -> PerceptionConfig {
        let p = &self.perception;
        PerceptionConfig {
            feature_dim: p.feature_dim,
            feature_seed: p.feature_seed,
            view: ViewConfig {
                fov_degrees: p.fov_degrees,
                range: p.range,
                confidence_slope: p.confidence_slope,
                min_confidence: p.min_confidence,
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            workers: t.workers,
            total_frames: t.total_frames,
            t_max: t.t_max,
            gamma: t.gamma,
            beta: t.beta,
            value_coef: t.value_coef,
            lr: t.lr,
            rmsprop_decay: t.rmsprop_decay,
            rmsprop_eps: t.rmsprop_eps,
            variant: self.variant(),
            target_mode: self.target_mode(),
            seed: t.seed,
            embed: t.embed,
            cap: t.cap,
            goal: parse_goal(&t.goal).expect("checked"),
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        let e = &self.eval;
        EvalConfig {
            episodes_per_target: e.episodes,
            cap: e.cap,
            seed: e.seed,
            workers: e.workers,
            goal: parse_goal(&self.train.goal).expect("checked"),
            selection: parse_selection(&e.selection).expect("checked"),
        }
    }

    pub fn target_plan(&self) -> TargetPlan {
        TargetPlan { per_scene: self.targets.per_scene, seed: self.targets.seed, perception: self.perception() }
    }

    pub fn inventory(&self) -> Inventory {
        let s = &self.scenes;
        Inventory { per_type: s.count_per_type, width: s.width, height: s.height, seed: s.seed }
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        Ok(ExperimentConfig {
            inventory: self.inventory(),
            targets_per_scene: self.targets.per_scene,
            target_seed: self.targets.seed,
            train: self.train_config(),
            t1_frames: self.experiment.t1_frames,
            t2_frames: self.experiment.t2_frames,
            perception: self.perception(),
            sentence_dim: self.semantics.dim,
            autoencoder_epochs: self.semantics.epochs,
            eval: self.eval_config(),
            models: self.models()?,
        })
    }
}
