//! Precomputed per-pose network inputs for one scene, and the rolling
//! four-frame history an agent carries through an episode.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::featurizer::{self, FeatureExtractor, ViewConfig, DEFAULT_FEATURE_DIM};
use crate::gridscene::{Pose, SceneSpec};
use crate::policynet::{StateInput, HISTORY};
use crate::semantics::{self, SentenceEncoder};

/// Everything that determines what the agent perceives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    pub feature_dim: usize,
    pub feature_seed: u64,
    pub view: ViewConfig,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig { feature_dim: DEFAULT_FEATURE_DIM, feature_seed: 0, view: ViewConfig::default() }
    }
}

/// Visual features (and optionally frame semantics) of every valid pose.
#[derive(Debug)]
pub struct SceneTable {
    pub scene: Arc<SceneSpec>,
    visual: Vec<Option<Arc<[f64]>>>,
    semantic: Option<Vec<Option<Arc<[f64]>>>>,
    confidence_sum: Vec<f64>,
}

impl SceneTable {
    pub fn build(
        scene: Arc<SceneSpec>,
        perception: &PerceptionConfig,
        encoder: Option<&SentenceEncoder>,
    ) -> SceneTable {
        let fx = FeatureExtractor::with_view(perception.feature_seed, perception.feature_dim, perception.view);
        let slots = scene.pose_slots();
        let mut visual = vec![None; slots];
        let mut semantic = encoder.map(|_| vec![None; slots]);
        let mut confidence_sum = vec![0.0; slots];
        for pose in scene.valid_poses() {
            let i = scene.pose_index(pose);
            visual[i] = Some(Arc::from(fx.features(&scene, pose)));
            let annotations = featurizer::annotate_with(&scene, pose, &perception.view);
            confidence_sum[i] = semantics::top_confidence_sum(&annotations);
            if let (Some(sem), Some(enc)) = (semantic.as_mut(), encoder) {
                sem[i] = Some(Arc::from(semantics::frame_semantics(&annotations, enc).0));
            }
        }
        SceneTable { scene, visual, semantic, confidence_sum }
    }

    pub fn has_semantics(&self) -> bool {
        self.semantic.is_some()
    }

    pub fn visual(&self, pose: Pose) -> &Arc<[f64]> {
        self.visual[self.scene.pose_index(pose)].as_ref().expect("pose is valid")
    }

    pub fn semantic(&self, pose: Pose) -> Option<&Arc<[f64]>> {
        self.semantic
            .as_ref()
            .map(|s| s[self.scene.pose_index(pose)].as_ref().expect("pose is valid"))
    }

    /// Summed confidence of the kept annotations at `pose`.
    pub fn confidence_sum(&self, pose: Pose) -> f64 {
        self.confidence_sum[self.scene.pose_index(pose)]
    }

    /// Network input for a history (oldest first) and a target.
    pub fn state(&self, history: &[Pose; HISTORY], target: Pose) -> StateInput {
        StateInput {
            history: std::array::from_fn(|i| self.visual(history[i]).clone()),
            target: self.visual(target).clone(),
            history_sem: self
                .semantic
                .as_ref()
                .map(|_| std::array::from_fn(|i| self.semantic(history[i]).unwrap().clone())),
            target_sem: self.semantic(target).cloned(),
            scene_type: self.scene.scene_type,
        }
    }
}

/// The last four poses, oldest first. A fresh history repeats the start
/// pose four times.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoseHistory(pub [Pose; HISTORY]);

impl PoseHistory {
    pub fn start(pose: Pose) -> PoseHistory {
        PoseHistory([pose; HISTORY])
    }

    pub fn push(&mut self, pose: Pose) {
        self.0.rotate_left(1);
        self.0[HISTORY - 1] = pose;
    }

    pub fn current(&self) -> Pose {
        self.0[HISTORY - 1]
    }
}
