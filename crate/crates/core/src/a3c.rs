//! Asynchronous advantage actor-critic training.
//!
//! Workers share one [`SharedStore`]: they snapshot the parameters, roll out
//! at most `t_max` steps on an assigned (scene, target) pair, compute the
//! segment's gradient against their snapshot and push it through the shared
//! RMSProp update. Episodes are handed out round-robin over every pair, so
//! all scene-type heads keep training.

use std::io::{self, Write};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridscene::{self, GoalMatch, Pose, SceneError, SceneSpec, Target, TargetMode};
use crate::observation::{PerceptionConfig, PoseHistory, SceneTable};
use crate::policynet::{
    self, Dims, ForwardOutput, LossConfig, NetError, NetworkParams, Trajectory, Transition, Variant,
};
use crate::seeding;
use crate::semantics::SentenceEncoder;

pub const REWARD_LOG_HEADER: &str = "frames,scene_id,target_idx,episode_return,episode_len,success";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite parameter update in block {0}")]
    NonFiniteUpdate(String),
    #[error("worker {worker} panicked: {message}")]
    WorkerPanic { worker: usize, message: String },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("reward log: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub workers: usize,
    pub total_frames: u64,
    pub t_max: usize,
    pub gamma: f64,
    pub beta: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    pub variant: Variant,
    pub target_mode: TargetMode,
    pub seed: u64,
    pub embed: usize,
    pub cap: u32,
    pub goal: GoalMatch,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            workers: 4,
            total_frames: 100_000,
            t_max: 5,
            gamma: 0.99,
            beta: 0.01,
            value_coef: 0.5,
            lr: 7e-4,
            rmsprop_decay: 0.99,
            rmsprop_eps: 1e-8,
            variant: Variant::Sn,
            target_mode: TargetMode::ObjectOriented,
            seed: 0,
            embed: 64,
            cap: gridscene::DEFAULT_CAP,
            goal: GoalMatch::Exact,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_owned()));
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.t_max == 0 {
            return bad("t_max must be at least 1");
        }
        if self.total_frames < self.t_max as u64 {
            return bad("total_frames must be at least t_max");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) || self.rmsprop_eps <= 0.0 || self.lr < 0.0 {
            return bad("need 0 <= rmsprop_decay < 1, rmsprop_eps > 0, lr >= 0");
        }
        if self.cap == 0 || self.embed == 0 {
            return bad("cap and embed must be positive");
        }
        Ok(())
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig { gamma: self.gamma, beta: self.beta, value_coef: self.value_coef }
    }
}

/// Parameters plus per-parameter RMSProp accumulators, swapped atomically.
struct StoreState {
    params: Arc<NetworkParams>,
    square_avg: NetworkParams,
    generation: u64,
}

/// A consistent, immutable view of the parameters.
#[derive(Clone)]
pub struct Snapshot {
    pub params: Arc<NetworkParams>,
    pub generation: u64,
}

/// The single mutation point of training. Updates hold the write lock for
/// their whole duration, so no reader ever sees a half-applied step.
pub struct SharedStore {
    state: RwLock<StoreState>,
    frames: AtomicU64,
}

impl SharedStore {
    pub fn new(params: NetworkParams) -> SharedStore {
        let square_avg = params.zeros_like();
        SharedStore {
            state: RwLock::new(StoreState { params: Arc::new(params), square_avg, generation: 0 }),
            frames: AtomicU64::new(0),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let s = self.state.read().expect("store lock poisoned");
        Snapshot { params: s.params.clone(), generation: s.generation }
    }

    pub fn frames(&self) -> u64 {
        self.frames.load(Ordering::SeqCst)
    }

    /// Adds `n` frames; returns the new total.
    pub fn add_frames(&self, n: u64) -> u64 {
        self.frames.fetch_add(n, Ordering::SeqCst) + n
    }

    pub fn generation(&self) -> u64 {
        self.state.read().expect("store lock poisoned").generation
    }

    /// Shared RMSProp step:
    /// `acc ← decay·acc + (1−decay)·g²`, `p ← p − lr·g/(√acc + eps)`.
    /// Nothing is committed if any resulting value is non-finite.
    pub fn apply_update(&self, grads: &NetworkParams, lr: f64, decay: f64, eps: f64) -> Result<(), TrainError> {
        let mut guard = self.state.write().expect("store lock poisoned");
        let state = &mut *guard;
        let mut next_params = (*state.params).clone();
        let mut next_acc = state.square_avg.clone();
        let names = next_params.block_names();
        for (((p, acc), g), name) in next_params
            .blocks_mut()
            .into_iter()
            .zip(next_acc.blocks_mut())
            .zip(grads.blocks())
            .zip(names)
        {
            for ((w, a), &d) in p.as_mut_slice().iter_mut().zip(acc.as_mut_slice()).zip(g.as_slice()) {
                *a = decay * *a + (1.0 - decay) * d * d;
                *w -= lr * d / (a.sqrt() + eps);
                if !w.is_finite() || !a.is_finite() {
                    return Err(TrainError::NonFiniteUpdate(name));
                }
            }
        }
        state.params = Arc::new(next_params);
        state.square_avg = next_acc;
        state.generation += 1;
        Ok(())
    }

    pub fn into_params(self) -> NetworkParams {
        let state = self.state.into_inner().expect("store lock poisoned");
        Arc::try_unwrap(state.params).unwrap_or_else(|a| (*a).clone())
    }
}

/// Free-function form of [`SharedStore::apply_update`].
pub fn apply_update(store: &SharedStore, grads: &NetworkParams, lr: f64, decay: f64, eps: f64) -> Result<(), TrainError> {
    store.apply_update(grads, lr, decay, eps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Global frame counter right after the episode's last update.
    pub frames: u64,
    pub scene_id: String,
    pub target_idx: usize,
    pub episode_return: f64,
    pub episode_len: u32,
    pub success: bool,
}

impl EpisodeRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.frames,
            self.scene_id,
            self.target_idx,
            self.episode_return,
            self.episode_len,
            u8::from(self.success)
        )
    }

    pub fn parse_csv_line(line: &str) -> Option<EpisodeRecord> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(EpisodeRecord {
            frames: f[0].parse().ok()?,
            scene_id: f[1].to_owned(),
            target_idx: f[2].parse().ok()?,
            episode_return: f[3].parse().ok()?,
            episode_len: f[4].parse().ok()?,
            success: match f[5] {
                "1" | "true" => true,
                "0" | "false" => false,
                _ => return None,
            },
        })
    }
}

/// One scene with its targets, ready for rollouts.
#[derive(Clone)]
pub struct TrainTask {
    pub table: Arc<SceneTable>,
    pub targets: Vec<Pose>,
}

pub struct TrainOutcome {
    pub params: NetworkParams,
    pub log: Vec<EpisodeRecord>,
    pub frames: u64,
    pub updates: u64,
}

/// Decision returned by a training monitor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

type MonitorFn<'a> = dyn Fn(u64, &NetworkParams) -> Control + Sync + 'a;

struct RewardLog {
    records: Vec<EpisodeRecord>,
    sink: Option<Box<dyn Write + Send>>,
    unflushed: usize,
}

impl RewardLog {
    fn push(&mut self, r: EpisodeRecord) -> io::Result<()> {
        if let Some(w) = self.sink.as_mut() {
            writeln!(w, "{}", r.csv_line())?;
            self.unflushed += 1;
            if self.unflushed >= 100 {
                w.flush()?;
                self.unflushed = 0;
            }
        }
        self.records.push(r);
        Ok(())
    }
}

/// Training run builder.
pub struct Trainer<'a> {
    config: TrainConfig,
    tasks: Vec<TrainTask>,
    initial: Option<NetworkParams>,
    monitor: Option<(u64, &'a MonitorFn<'a>)>,
    sink: Option<Box<dyn Write + Send>>,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, tasks: Vec<TrainTask>) -> Trainer<'a> {
        Trainer { config, tasks, initial: None, monitor: None, sink: None }
    }

    /// Start from these parameters instead of a fresh initialization.
    pub fn initial_params(mut self, params: NetworkParams) -> Self {
        self.initial = Some(params);
        self
    }

    /// Calls `f` with a fresh snapshot each time the frame counter crosses
    /// a multiple of `every`; returning [`Control::Stop`] ends training.
    pub fn monitor(mut self, every: u64, f: &'a MonitorFn<'a>) -> Self {
        self.monitor = Some((every.max(1), f));
        self
    }

    /// Streams the reward log as CSV (header included).
    pub fn log_to(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.sink = Some(sink);
        self
    }

    fn fresh_params(&self) -> Result<NetworkParams, TrainError> {
        let first = self.tasks.first().ok_or_else(|| TrainError::Config("no training tasks".into()))?;
        let dims = Dims {
            feature: first.table.visual(first.table.scene.valid_poses()[0]).len(),
            embed: self.config.embed,
            semantic: first
                .table
                .semantic(first.table.scene.valid_poses()[0])
                .map_or(0, |s| s.len()),
        };
        Ok(NetworkParams::init(self.config.variant, dims, self.config.seed))
    }

    pub fn run(mut self) -> Result<TrainOutcome, TrainError> {
        self.config.validate()?;
        if self.tasks.is_empty() {
            return Err(TrainError::Config("no training tasks".into()));
        }
        let wants_sem = self.config.variant == Variant::Ssn;
        for t in &self.tasks {
            if t.targets.is_empty() {
                return Err(TrainError::Config(format!("scene {} has no targets", t.table.scene.id)));
            }
            if wants_sem != t.table.has_semantics() {
                return Err(TrainError::Config(format!(
                    "variant {} {} semantic tables (scene {})",
                    self.config.variant,
                    if wants_sem { "requires" } else { "forbids" },
                    t.table.scene.id
                )));
            }
            for p in &t.targets {
                t.table.scene.check_pose(*p)?;
            }
        }
        let params = match self.initial.take() {
            Some(p) => p,
            None => self.fresh_params()?,
        };
        let mut sink = self.sink.take();
        if let Some(w) = sink.as_mut() {
            writeln!(w, "{REWARD_LOG_HEADER}")?;
        }

        let pairs: Vec<(usize, usize)> = self
            .tasks
            .iter()
            .enumerate()
            .flat_map(|(s, t)| (0..t.targets.len()).map(move |k| (s, k)))
            .collect();
        let shared = Shared {
            config: &self.config,
            tasks: &self.tasks,
            pairs: &pairs,
            store: SharedStore::new(params),
            next_pair: AtomicUsize::new(0),
            stop: AtomicBool::new(false),
            log: Mutex::new(RewardLog { records: Vec::new(), sink, unflushed: 0 }),
            monitor: self.monitor,
        };

        let results: Vec<Result<(), TrainError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..self.config.workers)
                .map(|w| {
                    let shared = &shared;
                    scope.spawn(move || {
                        let r = shared.worker(w);
                        if r.is_err() {
                            shared.stop.store(true, Ordering::SeqCst);
                        }
                        r
                    })
                })
                .collect();
            handles
                .into_iter()
                .enumerate()
                .map(|(worker, h)| {
                    h.join().unwrap_or_else(|e| {
                        shared.stop.store(true, Ordering::SeqCst);
                        let message = e
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| e.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "unknown panic".into());
                        Err(TrainError::WorkerPanic { worker, message })
                    })
                })
                .collect()
        });
        for r in results {
            r?;
        }

        let frames = shared.store.frames();
        let updates = shared.store.generation();
        let mut log = shared.log.into_inner().expect("log lock poisoned");
        if let Some(w) = log.sink.as_mut() {
            w.flush()?;
        }
        Ok(TrainOutcome { params: shared.store.into_params(), log: log.records, frames, updates })
    }
}

struct Shared<'s> {
    config: &'s TrainConfig,
    tasks: &'s [TrainTask],
    pairs: &'s [(usize, usize)],
    store: SharedStore,
    next_pair: AtomicUsize,
    stop: AtomicBool,
    log: Mutex<RewardLog>,
    monitor: Option<(u64, &'s MonitorFn<'s>)>,
}

struct Episode {
    task: usize,
    target_idx: usize,
    target: Pose,
    history: PoseHistory,
    steps: u32,
    ret: f64,
}

impl Shared<'_> {
    fn start_episode(&self, rng: &mut ChaCha8Rng) -> Episode {
        let (task, target_idx) =
            self.pairs[self.next_pair.fetch_add(1, Ordering::SeqCst) % self.pairs.len()];
        let table = &self.tasks[task].table;
        let target = self.tasks[task].targets[target_idx];
        let start = random_start(&table.scene, target, rng);
        Episode { task, target_idx, target, history: PoseHistory::start(start), steps: 0, ret: 0.0 }
    }

    fn worker(&self, id: usize) -> Result<(), TrainError> {
        let cfg = self.config;
        let loss_cfg = cfg.loss();
        let mut rng = seeding::rng_for("a3c/worker", &[cfg.seed, id as u64]);
        let mut episode: Option<Episode> = None;
        let mut grads: Option<NetworkParams> = None;
        while !self.stop.load(Ordering::SeqCst) && self.store.frames() < cfg.total_frames {
            let ep = match episode.as_mut() {
                Some(ep) => ep,
                None => episode.insert(self.start_episode(&mut rng)),
            };
            let table = &self.tasks[ep.task].table;
            let snap = self.store.snapshot();
            let params = &*snap.params;

            let mut traj = Trajectory::default();
            let mut outputs: Vec<ForwardOutput> = Vec::with_capacity(cfg.t_max);
            let mut finished = None;
            for _ in 0..cfg.t_max {
                let state = table.state(&ep.history.0, ep.target);
                let out = policynet::forward(params, &state.view())?;
                let action = sample_action(&out.policy, &mut rng);
                let r = gridscene::step_with(
                    &table.scene,
                    ep.history.current(),
                    ep.target,
                    action,
                    ep.steps,
                    cfg.cap,
                    cfg.goal,
                )?;
                ep.history.push(r.next_pose);
                ep.steps = r.steps_taken;
                ep.ret += r.reward;
                traj.steps.push(Transition { state, action, reward: r.reward });
                outputs.push(out);
                if r.done {
                    finished = Some(r.success);
                    break;
                }
            }
            traj.terminal = finished.is_some();
            if !traj.terminal {
                let next = table.state(&ep.history.0, ep.target);
                traj.bootstrap = policynet::forward(params, &next.view())?.value;
            }

            let g = grads.get_or_insert_with(|| params.zeros_like());
            for b in g.blocks_mut() {
                b.fill_zero();
            }
            policynet::accumulate_a3c_grads_cached(params, &traj, &outputs, &loss_cfg, g)?;
            self.store.apply_update(g, cfg.lr, cfg.rmsprop_decay, cfg.rmsprop_eps)?;
            let steps = traj.steps.len() as u64;
            let frames = self.store.add_frames(steps);

            if let Some(success) = finished {
                self.record(frames, ep, success)?;
                episode = None;
            }
            if let Some((every, monitor)) = self.monitor {
                if (frames - steps) / every != frames / every {
                    let snap = self.store.snapshot();
                    if monitor(frames, &snap.params) == Control::Stop {
                        self.stop.store(true, Ordering::SeqCst);
                    }
                }
            }
        }
        // An episode cut off by the end of training is logged as a failure,
        // keeping logged lengths in step with the frame counter.
        if let Some(ep) = episode.filter(|ep| ep.steps > 0) {
            self.record(self.store.frames(), &ep, false)?;
        }
        Ok(())
    }

    fn record(&self, frames: u64, ep: &Episode, success: bool) -> Result<(), TrainError> {
        let rec = EpisodeRecord {
            frames,
            scene_id: self.tasks[ep.task].table.scene.id.clone(),
            target_idx: ep.target_idx,
            episode_return: ep.ret,
            episode_len: ep.steps,
            success,
        };
        self.log.lock().expect("log lock poisoned").push(rec)?;
        Ok(())
    }
}

/// Uniform valid pose other than `target`.
pub fn random_start(scene: &SceneSpec, target: Pose, rng: &mut impl Rng) -> Pose {
    let poses = scene.valid_poses();
    loop {
        let p = poses[rng.random_range(0..poses.len())];
        if p != target {
            return p;
        }
    }
}

/// Draws an action index from a categorical distribution.
pub fn sample_action(policy: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in policy.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    policy.len() - 1
}

/// Builds per-scene tables and runs training, the all-in-one entry point.
pub fn train(
    config: &TrainConfig,
    scenes: &[SceneSpec],
    targets: &[Vec<Target>],
    encoder: Option<&SentenceEncoder>,
    perception: &PerceptionConfig,
) -> Result<TrainOutcome, TrainError> {
    if config.variant == Variant::Ssn && encoder.is_none() {
        return Err(TrainError::Config("the semantic variant requires a sentence encoder".into()));
    }
    if scenes.len() != targets.len() {
        return Err(TrainError::Config(format!(
            "{} scenes but {} target lists",
            scenes.len(),
            targets.len()
        )));
    }
    let encoder = if config.variant == Variant::Ssn { encoder } else { None };
    let tasks = scenes
        .iter()
        .zip(targets)
        .map(|(s, t)| TrainTask {
            table: Arc::new(SceneTable::build(Arc::new(s.clone()), perception, encoder)),
            targets: t.iter().map(|t| t.pose).collect(),
        })
        .collect();
    Trainer::new(config.clone(), tasks).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridscene::{generate_scene, select_targets, SceneType};
    use crate::policynet::init_params;

    fn small_config() -> TrainConfig {
        TrainConfig { workers: 1, total_frames: 2_000, embed: 16, cap: 200, seed: 3, ..Default::default() }
    }

    fn small_task(feature_dim: usize) -> TrainTask {
        let scene = Arc::new(generate_scene(7, SceneType::Bathroom, 8, 8).unwrap());
        let targets = select_targets(&scene, TargetMode::ObjectOriented, 2, 0, None).unwrap();
        let perception = PerceptionConfig { feature_dim, ..Default::default() };
        TrainTask {
            table: Arc::new(SceneTable::build(scene, &perception, None)),
            targets: targets.iter().map(|t| t.pose).collect(),
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let p = init_params(Variant::Sn, 4, 4, 0, 1);
        let store = SharedStore::new(p.clone());
        store.apply_update(&p.zeros_like(), 0.01, 0.99, 1e-8).unwrap();
        assert!(store.snapshot().params.bit_identical(&p));
        assert_eq!(store.generation(), 1);
    }

    fn scalar_store(value: f64) -> (SharedStore, NetworkParams) {
        let mut p = init_params(Variant::Sn, 1, 1, 0, 0);
        for b in p.blocks_mut() {
            b.fill_zero();
        }
        p.b1.as_mut_slice()[0] = value;
        let mut g = p.zeros_like();
        g.b1.as_mut_slice()[0] = 1.0;
        (SharedStore::new(p), g)
    }

    #[test]
    fn single_rmsprop_step_value() {
        let (store, g) = scalar_store(0.0);
        store.apply_update(&g, 0.01, 0.99, 1e-8).unwrap();
        let delta = store.snapshot().params.b1.as_slice()[0];
        assert!((delta + 0.1).abs() < 1e-6, "{delta:.12}");
        assert_eq!(delta, -0.01 / ((1.0f64 - 0.99).sqrt() + 1e-8));
    }

    #[test]
    fn two_steps_differ_from_one_double_step() {
        let (twice, g) = scalar_store(0.0);
        twice.apply_update(&g, 0.01, 0.99, 1e-8).unwrap();
        twice.apply_update(&g, 0.01, 0.99, 1e-8).unwrap();
        let (once, g) = scalar_store(0.0);
        once.apply_update(&g, 0.02, 0.99, 1e-8).unwrap();
        let a = twice.snapshot().params.b1.as_slice()[0];
        let b = once.snapshot().params.b1.as_slice()[0];
        // Second step sees acc = 0.0199, so Δ₂ = 0.01/√0.0199 ≈ 0.0709.
        assert!((a - (-0.01 / (0.01f64.sqrt() + 1e-8) - 0.01 / (0.0199f64.sqrt() + 1e-8))).abs() < 1e-9);
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn non_finite_update_is_rejected_atomically() {
        let (store, mut g) = scalar_store(1.0);
        g.b1.as_mut_slice()[0] = f64::NAN;
        assert!(matches!(store.apply_update(&g, 0.01, 0.99, 1e-8), Err(TrainError::NonFiniteUpdate(_))));
        assert_eq!(store.snapshot().params.b1.as_slice()[0], 1.0);
        assert_eq!(store.generation(), 0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { workers: 0, ..small_config() }.validate().is_err());
        assert!(TrainConfig { total_frames: 3, t_max: 5, ..small_config() }.validate().is_err());
        assert!(small_config().validate().is_ok());
    }

    #[test]
    fn single_worker_runs_are_identical() {
        let run = || Trainer::new(small_config(), vec![small_task(8)]).run().unwrap();
        let a = run();
        let b = run();
        assert_eq!(a.log, b.log);
        assert!(a.params.bit_identical(&b.params));
        assert!(a.frames >= 2_000);
    }

    #[test]
    fn multi_worker_loop_contract() {
        let cfg = TrainConfig { workers: 4, ..small_config() };
        let out = Trainer::new(cfg.clone(), vec![small_task(8)]).run().unwrap();
        assert!(out.frames >= cfg.total_frames);
        assert!(!out.log.is_empty());
        let logged: u64 = out.log.iter().map(|r| r.episode_len as u64).sum();
        assert!(logged <= out.frames);
        assert!(out.frames <= logged + (cfg.workers * cfg.t_max) as u64);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let cfg = TrainConfig { workers: 3, lr: 0.0, ..small_config() };
        let task = small_task(8);
        let init = init_params(Variant::Sn, 8, 16, 0, 3);
        let out = Trainer::new(cfg, vec![task]).initial_params(init.clone()).run().unwrap();
        assert!(out.params.bit_identical(&init));
    }

    #[test]
    fn monitor_can_stop_training() {
        let cfg = TrainConfig { total_frames: 1_000_000, ..small_config() };
        let stop_at = |frames: u64, _: &NetworkParams| if frames >= 500 { Control::Stop } else { Control::Continue };
        let out = Trainer::new(cfg, vec![small_task(8)]).monitor(100, &stop_at).run().unwrap();
        assert!(out.frames >= 500 && out.frames < 600);
    }

    #[test]
    fn semantic_variant_requires_encoder() {
        let scene = generate_scene(7, SceneType::Bathroom, 8, 8).unwrap();
        let t = select_targets(&scene, TargetMode::Random, 1, 0, None).unwrap();
        let cfg = TrainConfig { variant: Variant::Ssn, ..small_config() };
        let err = train(&cfg, &[scene], &[t], None, &PerceptionConfig::default()).err().unwrap();
        assert!(err.to_string().contains("encoder"));
    }

    #[test]
    fn csv_line_round_trip() {
        let r = EpisodeRecord {
            frames: 10,
            scene_id: "kitchen-1-8x8".into(),
            target_idx: 2,
            episode_return: 9.95,
            episode_len: 5,
            success: true,
        };
        assert_eq!(EpisodeRecord::parse_csv_line(&r.csv_line()), Some(r));
    }
}
