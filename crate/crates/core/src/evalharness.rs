//! Evaluation protocol and the two generalization experiments.
//!
//! T1 trains on every scene instance and tests on fresh targets inside one
//! instance per scene type. T2 holds one whole instance per scene type out
//! of training and tests on its targets.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::a3c::{self, TrainConfig, TrainError, TrainTask, Trainer};
use crate::gridscene::{
    self, Action, GoalMatch, Pose, SceneError, SceneSpec, SceneType, TargetMode, TargetSelector,
};
use crate::observation::{PerceptionConfig, PoseHistory, SceneTable};
use crate::policynet::{self, NetError, NetworkParams, Variant, HISTORY};
use crate::seeding;
use crate::semantics::{self, AutoencoderConfig, SemanticsError, SentenceEncoder};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// How a network picks actions during evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSelection {
    /// Highest-probability action, ties to the lowest index.
    #[default]
    Greedy,
    /// Draw from the policy with the episode's seeded stream.
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub episodes_per_target: usize,
    pub cap: u32,
    pub seed: u64,
    /// Scheduling only; left out of serialized reports since results do
    /// not depend on it.
    #[serde(skip_serializing, default = "one_worker")]
    pub workers: usize,
    pub goal: GoalMatch,
    pub selection: ActionSelection,
}

fn one_worker() -> usize {
    1
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes_per_target: 100,
            cap: gridscene::DEFAULT_CAP,
            seed: 0,
            workers: 1,
            goal: GoalMatch::Exact,
            selection: ActionSelection::Greedy,
        }
    }
}

/// Who acts during an evaluation episode.
#[derive(Clone, Copy)]
pub enum Agent<'a> {
    Network(&'a NetworkParams),
    /// Uniform over the four actions.
    Random,
    /// Follows BFS shortest paths.
    Oracle,
}

/// Scenes with the targets to evaluate on.
#[derive(Clone)]
pub struct EvalTask {
    pub table: Arc<SceneTable>,
    pub targets: Vec<Pose>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub scene_id: String,
    pub scene_type: SceneType,
    pub target: Pose,
    pub episodes: usize,
    pub successes: usize,
    /// Sum of episode lengths; failures count as the cap.
    pub total_length: u64,
    /// Sum of BFS distances from the episodes' start poses.
    pub total_shortest: u64,
}

impl TargetStats {
    pub fn success_pct(&self) -> f64 {
        100.0 * self.successes as f64 / self.episodes as f64
    }

    pub fn mean_length(&self) -> f64 {
        self.total_length as f64 / self.episodes as f64
    }

    pub fn mean_shortest(&self) -> f64 {
        self.total_shortest as f64 / self.episodes as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTypeStats {
    pub scene_type: SceneType,
    pub episodes: usize,
    pub successes: usize,
    pub total_length: u64,
}

impl SceneTypeStats {
    pub fn success_pct(&self) -> f64 {
        100.0 * self.successes as f64 / self.episodes as f64
    }

    /// Mean episode length (E.L.).
    pub fn mean_length(&self) -> f64 {
        self.total_length as f64 / self.episodes as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub config: EvalConfig,
    /// Scene types in canonical order; absent types are omitted.
    pub per_type: Vec<SceneTypeStats>,
    pub per_target: Vec<TargetStats>,
}

impl EvalReport {
    pub fn episodes(&self) -> usize {
        self.per_type.iter().map(|t| t.episodes).sum()
    }

    pub fn successes(&self) -> usize {
        self.per_type.iter().map(|t| t.successes).sum()
    }

    pub fn success_pct(&self) -> f64 {
        100.0 * self.successes() as f64 / self.episodes() as f64
    }

    pub fn mean_length(&self) -> f64 {
        self.per_type.iter().map(|t| t.total_length).sum::<u64>() as f64 / self.episodes() as f64
    }

    pub fn scene_type(&self, t: SceneType) -> Option<&SceneTypeStats> {
        self.per_type.iter().find(|s| s.scene_type == t)
    }

    /// Unweighted mean of the per-scene-type success rates.
    pub fn mean_type_success(&self) -> f64 {
        self.per_type.iter().map(|t| t.success_pct()).sum::<f64>() / self.per_type.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeResult {
    pub success: bool,
    pub length: u32,
    pub shortest: u32,
}

fn episode_rng(seed: u64, scene_id: &str, target_idx: usize, episode: usize) -> rand_chacha::ChaCha8Rng {
    seeding::rng_for(
        "eval/episode",
        &[seed, seeding::fnv1a(scene_id.as_bytes()), target_idx as u64, episode as u64],
    )
}

/// Runs one episode. Its randomness comes only from its own identifiers,
/// so results do not depend on scheduling.
pub fn run_episode(
    agent: Agent<'_>,
    table: &SceneTable,
    target: Pose,
    target_idx: usize,
    episode: usize,
    dist: &[u32],
    config: &EvalConfig,
) -> Result<EpisodeResult, EvalError> {
    let scene = &*table.scene;
    let mut rng = episode_rng(config.seed, &scene.id, target_idx, episode);
    let start = a3c::random_start(scene, target, &mut rng);
    let shortest = dist[scene.pose_index(start)];
    let mut history = PoseHistory::start(start);
    let mut seen: HashSet<[Pose; HISTORY]> = HashSet::new();
    let mut steps = 0;
    loop {
        let pose = history.current();
        let action = match agent {
            Agent::Random => rng.random_range(0..Action::COUNT),
            Agent::Oracle => oracle_action(scene, pose, dist),
            Agent::Network(params) => {
                // A repeated history under a deterministic policy is a
                // cycle that can never reach the target.
                if config.selection == ActionSelection::Greedy && !seen.insert(history.0) {
                    return Ok(EpisodeResult { success: false, length: config.cap, shortest });
                }
                let out = policynet::forward(params, &table.state(&history.0, target).view())?;
                match config.selection {
                    ActionSelection::Greedy => out.greedy_action(),
                    ActionSelection::Sample => a3c::sample_action(&out.policy, &mut rng),
                }
            }
        };
        let r = gridscene::step_with(scene, pose, target, action, steps, config.cap, config.goal)?;
        steps = r.steps_taken;
        history.push(r.next_pose);
        if r.done {
            return Ok(EpisodeResult { success: r.success, length: steps, shortest });
        }
    }
}

/// First action, in index order, that lowers the distance to the target.
pub fn oracle_action(scene: &SceneSpec, pose: Pose, dist: &[u32]) -> usize {
    let here = dist[scene.pose_index(pose)];
    Action::ALL
        .iter()
        .find(|a| dist[scene.pose_index(scene.apply(pose, **a))] < here)
        .map_or(0, |a| a.index())
}

/// Evaluates `agent` on every target for `episodes_per_target` episodes.
pub fn evaluate(
    agent: Agent<'_>,
    model: &str,
    tasks: &[EvalTask],
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if config.episodes_per_target == 0 || config.cap == 0 || config.workers == 0 {
        return Err(EvalError::Config("episodes_per_target, cap and workers must be positive".into()));
    }
    if let Agent::Network(params) = agent {
        let wants = params.variant == Variant::Ssn;
        if let Some(t) = tasks.iter().find(|t| t.table.has_semantics() != wants) {
            return Err(EvalError::Config(format!(
                "variant {} does not match the semantic tables of scene {}",
                params.variant, t.table.scene.id
            )));
        }
    }

    let mut per_target = Vec::new();
    let mut fields = Vec::new();
    for task in tasks {
        for &target in &task.targets {
            task.table.scene.check_pose(target)?;
            fields.push(gridscene::distance_field(&task.table.scene, target, config.goal));
            per_target.push(TargetStats {
                scene_id: task.table.scene.id.clone(),
                scene_type: task.table.scene.scene_type,
                target,
                episodes: 0,
                successes: 0,
                total_length: 0,
                total_shortest: 0,
            });
        }
    }

    // (task, target within task, flat target slot, episode)
    let jobs: Vec<(usize, usize, usize, usize)> = {
        let mut slot = 0;
        let mut jobs = Vec::new();
        for (ti, task) in tasks.iter().enumerate() {
            for k in 0..task.targets.len() {
                for e in 0..config.episodes_per_target {
                    jobs.push((ti, k, slot, e));
                }
                slot += 1;
            }
        }
        jobs
    };

    let run = |chunk: &[(usize, usize, usize, usize)]| -> Result<Vec<(usize, EpisodeResult)>, EvalError> {
        chunk
            .iter()
            .map(|&(ti, k, slot, e)| {
                let task = &tasks[ti];
                run_episode(agent, &task.table, task.targets[k], k, e, &fields[slot], config).map(|r| (slot, r))
            })
            .collect()
    };
    let chunk_len = jobs.len().div_ceil(config.workers).max(1);
    let results: Vec<Result<Vec<(usize, EpisodeResult)>, EvalError>> = if config.workers == 1 {
        vec![run(&jobs)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs.chunks(chunk_len).map(|c| s.spawn(move || run(c))).collect();
            handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
        })
    };
    for chunk in results {
        for (slot, r) in chunk? {
            let t = &mut per_target[slot];
            t.episodes += 1;
            t.successes += usize::from(r.success);
            t.total_length += u64::from(r.length);
            t.total_shortest += u64::from(r.shortest);
        }
    }

    let per_type = SceneType::ALL
        .iter()
        .filter_map(|&st| {
            let rows: Vec<&TargetStats> = per_target.iter().filter(|t| t.scene_type == st).collect();
            (!rows.is_empty()).then(|| SceneTypeStats {
                scene_type: st,
                episodes: rows.iter().map(|t| t.episodes).sum(),
                successes: rows.iter().map(|t| t.successes).sum(),
                total_length: rows.iter().map(|t| t.total_length).sum(),
            })
        })
        .collect();
    Ok(EvalReport { model: model.to_owned(), config: *config, per_type, per_target })
}

/// Rows of a T1/T2 table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    Random,
    Sn,
    Ssn,
    /// Semantic network trained on top-semantic targets.
    SsnS,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Random, Model::Sn, Model::Ssn, Model::SsnS];

    pub fn name(self) -> &'static str {
        match self {
            Model::Random => "Random",
            Model::Sn => "SN",
            Model::Ssn => "SSN",
            Model::SsnS => "SSN_S",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Model::Random => None,
            Model::Sn => Some(Variant::Sn),
            Model::Ssn | Model::SsnS => Some(Variant::Ssn),
        }
    }

    pub fn training_targets(self) -> TargetMode {
        match self {
            Model::SsnS => TargetMode::TopSemantic,
            _ => TargetMode::ObjectOriented,
        }
    }
}

impl std::str::FromStr for Model {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Model::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("ssn-s") && *m == Model::SsnS))
            .ok_or_else(|| EvalError::Config(format!("unknown model {s:?}")))
    }
}

/// Table-1-shaped comparison of several models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub task: String,
    pub reports: Vec<EvalReport>,
    /// Scene ids used for evaluation.
    pub eval_scenes: Vec<String>,
}

pub const TABLE_CSV_HEADER: &str = "scene_type,model,el,success_pct";

impl ComparisonTable {
    pub fn report(&self, model: Model) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.model == model.name())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{TABLE_CSV_HEADER}\n");
        for r in &self.reports {
            for t in &r.per_type {
                let _ = writeln!(out, "{},{},{:.2},{:.2}", t.scene_type, r.model, t.mean_length(), t.success_pct());
            }
        }
        out
    }

    /// Plain-text table: one row per model, an E.L./% column pair per
    /// scene type.
    pub fn to_text(&self) -> String {
        let types: Vec<SceneType> = SceneType::ALL
            .into_iter()
            .filter(|t| self.reports.iter().any(|r| r.scene_type(*t).is_some()))
            .collect();
        let name_w = self.reports.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{}\n", self.task);
        let _ = write!(out, "{:name_w$}", "");
        for t in &types {
            let _ = write!(out, " | {:^14}", t.token());
        }
        out.push('\n');
        let _ = write!(out, "{:name_w$}", "model");
        for _ in &types {
            let _ = write!(out, " | {:>6} {:>7}", "E.L.", "%");
        }
        out.push('\n');
        for r in &self.reports {
            let _ = write!(out, "{:name_w$}", r.model);
            for t in &types {
                match r.scene_type(*t) {
                    Some(s) => {
                        let _ = write!(out, " | {:>6.0} {:>7.1}", s.mean_length(), s.success_pct());
                    }
                    None => {
                        let _ = write!(out, " | {:>6} {:>7}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Scene inventory: `per_type` instances of each scene type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    pub per_type: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for Inventory {
    fn default() -> Self {
        Inventory { per_type: 5, width: 24, height: 24, seed: 0 }
    }
}

impl Inventory {
    /// Scenes grouped by type in canonical order; instance `i` of every
    /// type uses seed `seed + i`.
    pub fn generate(&self) -> Result<Vec<SceneSpec>, SceneError> {
        let mut scenes = Vec::with_capacity(4 * self.per_type);
        for t in SceneType::ALL {
            for i in 0..self.per_type {
                scenes.push(gridscene::generate_scene(self.seed.wrapping_add(i as u64), t, self.width, self.height)?);
            }
        }
        Ok(scenes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub inventory: Inventory,
    pub targets_per_scene: usize,
    pub target_seed: u64,
    /// Base training config; `variant`, `target_mode` and `total_frames`
    /// are set per model and task.
    pub train: TrainConfig,
    /// Frame budget of each trained model in T1.
    pub t1_frames: u64,
    /// Frame budget of each trained model in T2.
    pub t2_frames: u64,
    pub perception: PerceptionConfig,
    pub sentence_dim: usize,
    pub autoencoder_epochs: usize,
    pub eval: EvalConfig,
    pub models: Vec<Model>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            inventory: Inventory::default(),
            targets_per_scene: 5,
            target_seed: 0,
            train: TrainConfig::default(),
            t1_frames: 500_000,
            t2_frames: 1_000_000,
            perception: PerceptionConfig::default(),
            sentence_dim: semantics::DEFAULT_SENTENCE_DIM,
            autoencoder_epochs: AutoencoderConfig::default().epochs,
            eval: EvalConfig::default(),
            models: Model::ALL.to_vec(),
        }
    }
}

pub struct ExperimentOutcome {
    pub table: ComparisonTable,
    pub trained: Vec<(Model, NetworkParams)>,
    pub held_out: Vec<String>,
    pub encoder: Option<SentenceEncoder>,
}

fn target_seed(seed: u64, scene: &SceneSpec) -> u64 {
    seeding::combine(&[seed, seeding::fnv1a(scene.id.as_bytes())])
}

/// Per-scene target sets of one selection mode. Each scene's set depends
/// only on the scene and `seed`.
pub fn training_targets(
    scenes: &[SceneSpec],
    mode: TargetMode,
    k: usize,
    seed: u64,
    perception: &PerceptionConfig,
) -> Result<Vec<Vec<Pose>>, SceneError> {
    let scorer = |s: &SceneSpec, p: Pose| {
        semantics::top_confidence_sum(&crate::featurizer::annotate_with(s, p, &perception.view))
    };
    scenes
        .iter()
        .map(|s| {
            let sel = TargetSelector::new(mode, k, target_seed(seed, s)).view(perception.view);
            let sel = if mode == TargetMode::TopSemantic { sel.scorer(&scorer) } else { sel };
            Ok(sel.select(s)?.into_iter().map(|t| t.pose).collect())
        })
        .collect()
}

struct Prepared {
    scenes: Vec<SceneSpec>,
    encoder: Option<SentenceEncoder>,
    plain: Vec<Arc<SceneTable>>,
    semantic: Vec<Arc<SceneTable>>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, EvalError> {
    if cfg.models.is_empty() {
        return Err(EvalError::Config("no models to compare".into()));
    }
    if cfg.inventory.per_type < 2 {
        return Err(EvalError::Config("need at least two instances per scene type".into()));
    }
    let scenes = cfg.inventory.generate()?;
    let needs_sem = cfg.models.iter().any(|m| m.variant() == Some(Variant::Ssn));
    let encoder = if needs_sem {
        let corpus = semantics::build_corpus_with(&scenes, &cfg.perception.view)?;
        let ae = AutoencoderConfig {
            dim: cfg.sentence_dim,
            epochs: cfg.autoencoder_epochs,
            seed: cfg.train.seed,
            ..Default::default()
        };
        Some(semantics::train_autoencoder(&corpus, &ae)?)
    } else {
        None
    };
    let tables = |enc: Option<&SentenceEncoder>| -> Vec<Arc<SceneTable>> {
        scenes
            .iter()
            .map(|s| Arc::new(SceneTable::build(Arc::new(s.clone()), &cfg.perception, enc)))
            .collect()
    };
    let needs_plain = cfg.models.iter().any(|m| m.variant() != Some(Variant::Ssn));
    let plain = if needs_plain { tables(None) } else { Vec::new() };
    let semantic = match &encoder {
        Some(e) => tables(Some(e)),
        None => Vec::new(),
    };
    Ok(Prepared { scenes, encoder, plain, semantic })
}

impl Prepared {
    fn tables_for(&self, model: Model) -> &[Arc<SceneTable>] {
        if model.variant() == Some(Variant::Ssn) {
            &self.semantic
        } else {
            &self.plain
        }
    }
}

fn train_and_evaluate(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    task: &str,
    frames: u64,
    train_idx: &[usize],
    eval: &[(usize, Vec<Pose>)],
) -> Result<ExperimentOutcome, EvalError> {
    let mut reports = Vec::new();
    let mut trained = Vec::new();
    for &model in &cfg.models {
        let tables = prep.tables_for(model);
        let eval_tasks: Vec<EvalTask> = eval
            .iter()
            .map(|(i, t)| EvalTask { table: tables[*i].clone(), targets: t.clone() })
            .collect();
        let report = match model.variant() {
            None => evaluate(Agent::Random, model.name(), &eval_tasks, &cfg.eval)?,
            Some(variant) => {
                let scenes: Vec<SceneSpec> = train_idx.iter().map(|&i| prep.scenes[i].clone()).collect();
                let targets = training_targets(
                    &scenes,
                    model.training_targets(),
                    cfg.targets_per_scene,
                    cfg.target_seed,
                    &cfg.perception,
                )?;
                let tasks = train_idx
                    .iter()
                    .zip(targets)
                    .map(|(&i, targets)| TrainTask { table: tables[i].clone(), targets })
                    .collect();
                let tc = TrainConfig {
                    variant,
                    target_mode: model.training_targets(),
                    total_frames: frames,
                    ..cfg.train.clone()
                };
                let out = Trainer::new(tc, tasks).run()?;
                let report = evaluate(Agent::Network(&out.params), model.name(), &eval_tasks, &cfg.eval)?;
                trained.push((model, out.params));
                report
            }
        };
        reports.push(report);
    }
    let eval_scenes = eval.iter().map(|(i, _)| prep.scenes[*i].id.clone()).collect();
    Ok(ExperimentOutcome {
        table: ComparisonTable { task: task.to_owned(), reports, eval_scenes },
        trained,
        held_out: Vec::new(),
        encoder: prep.encoder.clone(),
    })
}

/// Target-selection parameters shared by training and evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetPlan {
    pub per_scene: usize,
    pub seed: u64,
    pub perception: PerceptionConfig,
}

impl ExperimentConfig {
    pub fn target_plan(&self) -> TargetPlan {
        TargetPlan { per_scene: self.targets_per_scene, seed: self.target_seed, perception: self.perception }
    }
}

/// The first instance of each scene type, in slice order. These are the
/// evaluation scenes of both tasks.
pub fn held_instances(scenes: &[SceneSpec]) -> Vec<usize> {
    SceneType::ALL
        .iter()
        .filter_map(|&t| scenes.iter().position(|s| s.scene_type == t))
        .collect()
}

/// T1 evaluation targets: object-oriented poses of each held instance
/// that are in neither of its training target sets.
pub fn t1_eval_targets(scenes: &[SceneSpec], plan: &TargetPlan) -> Result<Vec<(usize, Vec<Pose>)>, SceneError> {
    held_instances(scenes)
        .into_iter()
        .map(|i| {
            let scene = std::slice::from_ref(&scenes[i]);
            let mut used = Vec::new();
            for mode in [TargetMode::ObjectOriented, TargetMode::TopSemantic] {
                used.extend(training_targets(scene, mode, plan.per_scene, plan.seed, &plan.perception)?.remove(0));
            }
            let fresh = TargetSelector::new(
                TargetMode::ObjectOriented,
                plan.per_scene,
                seeding::combine(&[target_seed(plan.seed, &scene[0]), 0x71]),
            )
            .view(plan.perception.view)
            .excluding(&used)
            .select(&scene[0])?;
            Ok((i, fresh.into_iter().map(|t| t.pose).collect()))
        })
        .collect()
}

/// T2 evaluation targets: object-oriented poses of each held-out scene.
pub fn t2_eval_targets(scenes: &[SceneSpec], plan: &TargetPlan) -> Result<Vec<(usize, Vec<Pose>)>, SceneError> {
    held_instances(scenes)
        .into_iter()
        .map(|i| {
            let t = TargetSelector::new(
                TargetMode::ObjectOriented,
                plan.per_scene,
                seeding::combine(&[target_seed(plan.seed, &scenes[i]), 0x72]),
            )
            .view(plan.perception.view)
            .select(&scenes[i])?;
            Ok((i, t.into_iter().map(|t| t.pose).collect()))
        })
        .collect()
}

/// T1: unseen targets in seen scenes.
pub fn run_t1(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, EvalError> {
    let prep = prepare(cfg)?;
    let all: Vec<usize> = (0..prep.scenes.len()).collect();
    let eval = t1_eval_targets(&prep.scenes, &cfg.target_plan())?;
    train_and_evaluate(cfg, &prep, "T1: unseen targets, seen scenes", cfg.t1_frames, &all, &eval)
}

/// T2: unseen scenes.
pub fn run_t2(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, EvalError> {
    let prep = prepare(cfg)?;
    let held = held_instances(&prep.scenes);
    let train_idx: Vec<usize> = (0..prep.scenes.len()).filter(|i| !held.contains(i)).collect();
    let eval = t2_eval_targets(&prep.scenes, &cfg.target_plan())?;
    let mut out = train_and_evaluate(cfg, &prep, "T2: unseen scenes", cfg.t2_frames, &train_idx, &eval)?;
    out.held_out = held.iter().map(|&i| prep.scenes[i].id.clone()).collect();
    Ok(out)
}
