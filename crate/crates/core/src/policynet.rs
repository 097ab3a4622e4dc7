//! Siamese actor-critic networks.
//!
//! Both variants project the four history frames and the target frame
//! (tiled four times) through one shared matrix `W1`, fuse the two
//! embeddings with `W2`, and finish with a scene-type specific head that
//! emits four action logits and a value.
//!
//! The semantic variant adds a second shared projection `W1'` for the
//! history and target semantic vectors; its fusion layer takes all four
//! embeddings (`4E` inputs).
//!
//! ```text
//! history (4F) ──W1──ReLU──┐
//! target ×4  (4F) ──W1──ReLU──┤
//! sem history (4S) ──W1'──ReLU──┤ (semantic variant only)
//! sem target ×4 (4S) ──W1'──ReLU──┤
//!                               └─concat──W2──ReLU──head[scene type]
//! head: ReLU(W_s1) → W_s2 → [4 logits | value]
//! ```

use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::{self, Matrix};
use crate::gridscene::{Action, SceneType};
use crate::seeding;

/// History length, and the number of times the target is tiled.
pub const HISTORY: usize = 4;
/// Four action logits and one value.
pub const HEAD_OUTPUTS: usize = Action::COUNT + 1;
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SNPARAM1";

#[derive(Debug, Error)]
pub enum NetError {
    #[error("input width mismatch for {what}: expected {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("semantic inputs {0} for this network variant")]
    SemanticInputs(&'static str),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("gamma {0} outside [0, 1]")]
    BadGamma(f64),
    #[error("action index {0} out of range")]
    BadAction(usize),
    #[error("non-finite loss")]
    NonFinite,
    #[error("bad parameter checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Siamese network: visual streams only.
    Sn,
    /// Semantic siamese network: visual and caption streams.
    Ssn,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Sn => "sn",
            Variant::Ssn => "ssn",
        })
    }
}

impl FromStr for Variant {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sn" | "SN" => Ok(Variant::Sn),
            "ssn" | "SSN" => Ok(Variant::Ssn),
            _ => Err(NetError::UnknownVariant(s.to_owned())),
        }
    }
}

/// Layer widths: visual feature `F`, embedding `E`, frame semantics `S_f`
/// (zero for the visual-only variant).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub feature: usize,
    pub embed: usize,
    pub semantic: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticProjection {
    pub w: Matrix,
    pub b: Matrix,
}

/// All weights of one network. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub variant: Variant,
    pub dims: Dims,
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub semantic: Option<SemanticProjection>,
    /// Indexed by [`SceneType::index`].
    pub heads: [Head; 4],
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(variant: Variant, dims: Dims, seed: u64) -> NetworkParams {
        let Dims { feature: f, embed: e, semantic: s } = dims;
        let mut rng = seeding::rng_for("policynet/init", &[seed, f as u64, e as u64, s as u64]);
        let streams = match variant {
            Variant::Sn => 2,
            Variant::Ssn => 4,
        };
        let w1 = Matrix::glorot(HISTORY * f, e, &mut rng);
        let w2 = Matrix::glorot(streams * e, e, &mut rng);
        let semantic = (variant == Variant::Ssn).then(|| SemanticProjection {
            w: Matrix::glorot(HISTORY * s, e, &mut rng),
            b: Matrix::zeros(1, e),
        });
        let heads = std::array::from_fn(|_| Head {
            w1: Matrix::glorot(e, e, &mut rng),
            b1: Matrix::zeros(1, e),
            w2: Matrix::glorot(e, HEAD_OUTPUTS, &mut rng),
            b2: Matrix::zeros(1, HEAD_OUTPUTS),
        });
        let dims = Dims { semantic: if variant == Variant::Ssn { s } else { 0 }, ..dims };
        NetworkParams {
            variant,
            dims,
            w1,
            b1: Matrix::zeros(1, e),
            w2,
            b2: Matrix::zeros(1, e),
            semantic,
            heads,
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> NetworkParams {
        let mut z = self.clone();
        for b in z.blocks_mut() {
            b.fill_zero();
        }
        z
    }

    /// Parameter blocks in checkpoint order.
    pub fn blocks(&self) -> Vec<&Matrix> {
        let mut out = vec![&self.w1, &self.b1, &self.w2, &self.b2];
        if let Some(s) = &self.semantic {
            out.extend([&s.w, &s.b]);
        }
        for h in &self.heads {
            out.extend([&h.w1, &h.b1, &h.w2, &h.b2]);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2];
        if let Some(s) = &mut self.semantic {
            out.extend([&mut s.w, &mut s.b]);
        }
        for h in &mut self.heads {
            out.extend([&mut h.w1, &mut h.b1, &mut h.w2, &mut h.b2]);
        }
        out
    }

    /// Names matching [`NetworkParams::blocks`].
    pub fn block_names(&self) -> Vec<String> {
        let mut out: Vec<String> = ["W1", "b1", "W2", "b2"].map(String::from).to_vec();
        if self.semantic.is_some() {
            out.extend(["W1'", "b1'"].map(String::from));
        }
        for t in SceneType::ALL {
            out.extend(["Ws1", "bs1", "Ws2", "bs2"].map(|n| format!("{t}.{n}")));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.as_slice().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.is_finite())
    }

    pub fn head(&self, t: SceneType) -> &Head {
        &self.heads[t.index()]
    }

    /// Bitwise equality of every weight.
    pub fn bit_identical(&self, other: &NetworkParams) -> bool {
        self.variant == other.variant
            && self.dims == other.dims
            && self.blocks().len() == other.blocks().len()
            && self.blocks().iter().zip(other.blocks()).all(|(a, b)| {
                a.shape() == b.shape()
                    && a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    /// Checkpoint: magic, one variant byte (0 visual-only, 1 semantic),
    /// `u32` F, E and S_f, then every block of [`NetworkParams::blocks`]
    /// row-major as little-endian `f64`.
    pub fn write_checkpoint(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&[match self.variant {
            Variant::Sn => 0,
            Variant::Ssn => 1,
        }])?;
        dense::write_u32(w, self.dims.feature as u32)?;
        dense::write_u32(w, self.dims.embed as u32)?;
        dense::write_u32(w, self.dims.semantic as u32)?;
        for b in self.blocks() {
            b.write_le(w)?;
        }
        Ok(())
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<NetworkParams, NetError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(NetError::BadCheckpoint("wrong magic bytes".into()));
        }
        let mut variant = [0u8; 1];
        r.read_exact(&mut variant)?;
        let variant = match variant[0] {
            0 => Variant::Sn,
            1 => Variant::Ssn,
            v => return Err(NetError::BadCheckpoint(format!("variant byte {v}"))),
        };
        let dims = Dims {
            feature: dense::read_u32(r)? as usize,
            embed: dense::read_u32(r)? as usize,
            semantic: dense::read_u32(r)? as usize,
        };
        if dims.feature == 0 || dims.embed == 0 || (variant == Variant::Ssn && dims.semantic == 0) {
            return Err(NetError::BadCheckpoint(format!("zero dimension in {dims:?}")));
        }
        let mut params = NetworkParams::init(variant, dims, 0);
        for b in params.blocks_mut() {
            let (rows, cols) = b.shape();
            *b = Matrix::read_le(rows, cols, r)?;
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(NetError::BadCheckpoint(format!("{} trailing bytes", rest.len())));
        }
        Ok(params)
    }
}

/// Convenience wrapper matching the initialization contract.
pub fn init_params(
    variant: Variant,
    feature: usize,
    embed: usize,
    semantic: usize,
    seed: u64,
) -> NetworkParams {
    NetworkParams::init(variant, Dims { feature, embed, semantic }, seed)
}

/// Borrowed network input for one time step. History frames run oldest
/// to newest.
#[derive(Clone, Copy, Debug)]
pub struct NetInput<'a> {
    pub history: [&'a [f64]; HISTORY],
    pub target: &'a [f64],
    pub history_sem: Option<[&'a [f64]; HISTORY]>,
    pub target_sem: Option<&'a [f64]>,
    pub scene_type: SceneType,
}

/// Owned network input; frames are reference-counted so histories can
/// share them.
#[derive(Clone, Debug)]
pub struct StateInput {
    pub history: [Arc<[f64]>; HISTORY],
    pub target: Arc<[f64]>,
    pub history_sem: Option<[Arc<[f64]>; HISTORY]>,
    pub target_sem: Option<Arc<[f64]>>,
    pub scene_type: SceneType,
}

impl StateInput {
    pub fn view(&self) -> NetInput<'_> {
        NetInput {
            history: std::array::from_fn(|i| &*self.history[i]),
            target: &self.target,
            history_sem: self.history_sem.as_ref().map(|h| std::array::from_fn(|i| &*h[i])),
            target_sem: self.target_sem.as_deref(),
            scene_type: self.scene_type,
        }
    }
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    h_hist: Vec<f64>,
    h_targ: Vec<f64>,
    s_hist: Vec<f64>,
    s_targ: Vec<f64>,
    joint: Vec<f64>,
    head_hidden: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub policy: [f64; Action::COUNT],
    pub value: f64,
    pub cache: ForwardCache,
}

impl ForwardOutput {
    pub fn greedy_action(&self) -> usize {
        let mut best = 0;
        for a in 1..Action::COUNT {
            if self.policy[a] > self.policy[best] {
                best = a;
            }
        }
        best
    }
}

fn check(what: &'static str, expected: usize, got: usize) -> Result<(), NetError> {
    if expected == got {
        Ok(())
    } else {
        Err(NetError::Shape { what, expected, got })
    }
}

/// `ReLU(Σ_k x_k · W[k-th block] + b)`.
fn project(w: &Matrix, b: &Matrix, frames: &[&[f64]; HISTORY]) -> Vec<f64> {
    let width = frames[0].len();
    let mut z = b.as_slice().to_vec();
    for (k, f) in frames.iter().enumerate() {
        w.accumulate_rows_into(k * width, f, &mut z);
    }
    dense::relu_in_place(&mut z);
    z
}

fn project_backward(
    gw: &mut Matrix,
    gb: &mut Matrix,
    frames: &[&[f64]; HISTORY],
    activation: &[f64],
    dout: &[f64],
) {
    let mut dz = dout.to_vec();
    dense::relu_backward(activation, &mut dz);
    if dz.iter().all(|v| *v == 0.0) {
        return;
    }
    let width = frames[0].len();
    for (k, f) in frames.iter().enumerate() {
        gw.add_outer_rows(k * width, f, &dz);
    }
    gb.add_row(&dz);
}

pub fn forward(params: &NetworkParams, input: &NetInput<'_>) -> Result<ForwardOutput, NetError> {
    let Dims { feature, embed, semantic } = params.dims;
    for h in &input.history {
        check("history frame", feature, h.len())?;
    }
    check("target frame", feature, input.target.len())?;
    match (&params.semantic, input.history_sem, input.target_sem) {
        (None, None, None) => {}
        (None, _, _) => return Err(NetError::SemanticInputs("forbidden")),
        (Some(_), Some(hs), Some(ts)) => {
            for h in &hs {
                check("history semantics", semantic, h.len())?;
            }
            check("target semantics", semantic, ts.len())?;
        }
        (Some(_), _, _) => return Err(NetError::SemanticInputs("required")),
    }

    let h_hist = project(&params.w1, &params.b1, &input.history);
    let tiled = [input.target; HISTORY];
    let h_targ = project(&params.w1, &params.b1, &tiled);

    let mut joint = params.b2.as_slice().to_vec();
    params.w2.accumulate_rows_into(0, &h_hist, &mut joint);
    params.w2.accumulate_rows_into(embed, &h_targ, &mut joint);
    let (s_hist, s_targ) = match (&params.semantic, input.history_sem, input.target_sem) {
        (Some(sp), Some(hs), Some(ts)) => {
            let s_hist = project(&sp.w, &sp.b, &hs);
            let s_targ = project(&sp.w, &sp.b, &[ts; HISTORY]);
            params.w2.accumulate_rows_into(2 * embed, &s_hist, &mut joint);
            params.w2.accumulate_rows_into(3 * embed, &s_targ, &mut joint);
            (s_hist, s_targ)
        }
        _ => (Vec::new(), Vec::new()),
    };
    dense::relu_in_place(&mut joint);

    let head = params.head(input.scene_type);
    let mut head_hidden = head.b1.as_slice().to_vec();
    head.w1.accumulate_into(&joint, &mut head_hidden);
    dense::relu_in_place(&mut head_hidden);
    let mut out = head.b2.as_slice().to_vec();
    head.w2.accumulate_into(&head_hidden, &mut out);

    let probs = dense::softmax(&out[..Action::COUNT]);
    Ok(ForwardOutput {
        policy: [probs[0], probs[1], probs[2], probs[3]],
        value: out[Action::COUNT],
        cache: ForwardCache { h_hist, h_targ, s_hist, s_targ, joint, head_hidden },
    })
}

/// Accumulates into `grads` the gradient of a scalar whose derivatives with
/// respect to the four logits and the value are `dlogits` and `dvalue`.
pub fn backward(
    params: &NetworkParams,
    input: &NetInput<'_>,
    cache: &ForwardCache,
    dlogits: &[f64; Action::COUNT],
    dvalue: f64,
    grads: &mut NetworkParams,
) {
    let embed = params.dims.embed;
    let t = input.scene_type.index();
    let head = &params.heads[t];
    let dout = [dlogits[0], dlogits[1], dlogits[2], dlogits[3], dvalue];

    let gh = &mut grads.heads[t];
    gh.w2.add_outer_rows(0, &cache.head_hidden, &dout);
    gh.b2.add_row(&dout);
    let mut dhidden = vec![0.0; embed];
    head.w2.backprop_rows_into(0, &dout, &mut dhidden);
    dense::relu_backward(&cache.head_hidden, &mut dhidden);
    gh.w1.add_outer_rows(0, &cache.joint, &dhidden);
    gh.b1.add_row(&dhidden);

    let mut djoint = vec![0.0; embed];
    head.w1.backprop_rows_into(0, &dhidden, &mut djoint);
    dense::relu_backward(&cache.joint, &mut djoint);
    grads.w2.add_outer_rows(0, &cache.h_hist, &djoint);
    grads.w2.add_outer_rows(embed, &cache.h_targ, &djoint);
    grads.b2.add_row(&djoint);

    let mut dh_hist = vec![0.0; embed];
    let mut dh_targ = vec![0.0; embed];
    params.w2.backprop_rows_into(0, &djoint, &mut dh_hist);
    params.w2.backprop_rows_into(embed, &djoint, &mut dh_targ);
    project_backward(&mut grads.w1, &mut grads.b1, &input.history, &cache.h_hist, &dh_hist);
    project_backward(&mut grads.w1, &mut grads.b1, &[input.target; HISTORY], &cache.h_targ, &dh_targ);

    if let (Some(_), Some(gs), Some(hs), Some(ts)) =
        (&params.semantic, grads.semantic.as_mut(), input.history_sem, input.target_sem)
    {
        grads.w2.add_outer_rows(2 * embed, &cache.s_hist, &djoint);
        grads.w2.add_outer_rows(3 * embed, &cache.s_targ, &djoint);
        let mut ds_hist = vec![0.0; embed];
        let mut ds_targ = vec![0.0; embed];
        params.w2.backprop_rows_into(2 * embed, &djoint, &mut ds_hist);
        params.w2.backprop_rows_into(3 * embed, &djoint, &mut ds_targ);
        project_backward(&mut gs.w, &mut gs.b, &hs, &cache.s_hist, &ds_hist);
        project_backward(&mut gs.w, &mut gs.b, &[ts; HISTORY], &cache.s_targ, &ds_targ);
    }
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub state: StateInput,
    pub action: usize,
    pub reward: f64,
}

/// A rollout segment of at most `t_max` steps.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    /// The segment ended the episode (goal or cap); no bootstrap.
    pub terminal: bool,
    /// Critic value of the state after the last step, used when not terminal.
    pub bootstrap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub gamma: f64,
    pub beta: f64,
    pub value_coef: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { gamma: 0.99, beta: 0.01, value_coef: 0.5 }
    }
}

/// Discounted n-step returns `R_t = r_t + γ·R_{t+1}`, seeded with 0 on a
/// terminal segment and with `bootstrap` otherwise.
pub fn n_step_returns(rewards: &[f64], terminal: bool, bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut running = if terminal { 0.0 } else { bootstrap };
    for (t, r) in rewards.iter().enumerate().rev() {
        running = r + gamma * running;
        out[t] = running;
    }
    out
}

/// Shannon entropy in nats.
pub fn entropy(policy: &[f64]) -> f64 {
    -policy.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Derivative of the per-step actor-critic loss with respect to the logits
/// and the value, for a fixed advantage.
pub fn head_gradients(
    policy: &[f64; Action::COUNT],
    action: usize,
    advantage: f64,
    ret: f64,
    value: f64,
    cfg: &LossConfig,
) -> ([f64; Action::COUNT], f64) {
    let h = entropy(policy);
    let dlogits = std::array::from_fn(|j| {
        let onehot = if j == action { 1.0 } else { 0.0 };
        let p = policy[j];
        let ent = if p > 0.0 { cfg.beta * p * (p.ln() + h) } else { 0.0 };
        advantage * (p - onehot) + ent
    });
    (dlogits, -2.0 * cfg.value_coef * (ret - value))
}

/// Actor-critic loss of a segment and its gradient:
/// `Σ_t −log π(a_t|s_t)·A_t + c_v·(R_t − V(s_t))² − β·H(π(·|s_t))`,
/// with the advantage `A_t = R_t − V(s_t)` held constant in the policy term.
pub fn a3c_loss_and_grads(
    params: &NetworkParams,
    traj: &Trajectory,
    cfg: &LossConfig,
) -> Result<(f64, NetworkParams), NetError> {
    let mut grads = params.zeros_like();
    let loss = accumulate_a3c_grads(params, traj, cfg, &mut grads)?;
    Ok((loss, grads))
}

/// As [`a3c_loss_and_grads`], adding into an existing gradient buffer.
pub fn accumulate_a3c_grads(
    params: &NetworkParams,
    traj: &Trajectory,
    cfg: &LossConfig,
    grads: &mut NetworkParams,
) -> Result<f64, NetError> {
    let outputs = traj
        .steps
        .iter()
        .map(|s| forward(params, &s.state.view()))
        .collect::<Result<Vec<_>, _>>()?;
    accumulate_a3c_grads_cached(params, traj, &outputs, cfg, grads)
}

/// Gradient accumulation reusing forward passes already computed with
/// `params` during the rollout (one output per step).
pub fn accumulate_a3c_grads_cached(
    params: &NetworkParams,
    traj: &Trajectory,
    outputs: &[ForwardOutput],
    cfg: &LossConfig,
    grads: &mut NetworkParams,
) -> Result<f64, NetError> {
    if traj.steps.is_empty() {
        return Err(NetError::EmptyTrajectory);
    }
    if !(0.0..=1.0).contains(&cfg.gamma) {
        return Err(NetError::BadGamma(cfg.gamma));
    }
    debug_assert_eq!(outputs.len(), traj.steps.len());
    let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward).collect();
    let returns = n_step_returns(&rewards, traj.terminal, traj.bootstrap, cfg.gamma);
    let mut loss = 0.0;
    for ((step, out), &ret) in traj.steps.iter().zip(outputs).zip(&returns) {
        if step.action >= Action::COUNT {
            return Err(NetError::BadAction(step.action));
        }
        let advantage = ret - out.value;
        loss += -out.policy[step.action].ln() * advantage
            + cfg.value_coef * advantage * advantage
            - cfg.beta * entropy(&out.policy);
        let (dlogits, dvalue) =
            head_gradients(&out.policy, step.action, advantage, ret, out.value, cfg);
        backward(params, &step.state.view(), &out.cache, &dlogits, dvalue, grads);
    }
    if !loss.is_finite() {
        return Err(NetError::NonFinite);
    }
    Ok(loss)
}
