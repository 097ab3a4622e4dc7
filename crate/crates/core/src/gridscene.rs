//! Discrete room simulator: scenes, poses, actions, rewards and targets.
//!
//! A scene is a rectangular grid with interior wall cells and a handful of
//! typed objects. The agent occupies one free cell and faces one of four
//! headings. Objects do not block movement; they only matter for what the
//! agent sees (see [`crate::featurizer`]).

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurizer::{self, ViewConfig};
use crate::seeding;

/// Reward added on the step that reaches the target.
pub const GOAL_REWARD: f64 = 10.0;
/// Reward of every action, including the final one.
pub const STEP_PENALTY: f64 = -0.01;
/// Default episode cap, in actions.
pub const DEFAULT_CAP: u32 = 1000;
/// Smallest accepted grid side.
pub const MIN_SIDE: usize = 6;
/// Largest accepted grid side.
pub const MAX_SIDE: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("scene dimensions {width}x{height} below minimum {MIN_SIDE}x{MIN_SIDE} or above {MAX_SIDE}")]
    BadDimensions { width: usize, height: usize },
    #[error("invalid action index {0} (expected 0..4)")]
    InvalidAction(usize),
    #[error("pose ({x}, {y}) is outside the grid or on a wall")]
    InvalidPose { x: usize, y: usize },
    #[error("step called with steps_taken {steps_taken} >= cap {cap}")]
    EpisodeOver { steps_taken: u32, cap: u32 },
    #[error("target mode {mode}: only {available} qualifying poses, {requested} requested")]
    NotEnoughTargets { mode: TargetMode, available: usize, requested: usize },
    #[error("target mode top_semantic requires a semantics scorer")]
    MissingScorer,
    #[error("unknown {kind} token {token:?}")]
    UnknownToken { kind: &'static str, token: String },
    #[error("malformed scene: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneType {
    Bathroom,
    Bedroom,
    Kitchen,
    #[serde(rename = "livingroom")]
    LivingRoom,
}

impl SceneType {
    pub const ALL: [SceneType; 4] = [
        SceneType::Bathroom,
        SceneType::Bedroom,
        SceneType::Kitchen,
        SceneType::LivingRoom,
    ];

    /// Position in [`SceneType::ALL`]; also the policy head index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        match self {
            SceneType::Bathroom => "bathroom",
            SceneType::Bedroom => "bedroom",
            SceneType::Kitchen => "kitchen",
            SceneType::LivingRoom => "livingroom",
        }
    }

    /// Object classes that may appear in a room of this type.
    pub fn object_vocabulary(self) -> &'static [&'static str] {
        match self {
            SceneType::Bathroom => &[
                "sink", "toilet", "bathtub", "mirror", "towel", "shower", "cabinet", "toothbrush",
                "soap",
            ],
            SceneType::Bedroom => &[
                "bed", "pillow", "lamp", "wardrobe", "nightstand", "desk", "blanket", "dresser",
                "alarmclock",
            ],
            SceneType::Kitchen => &[
                "stove", "fridge", "sink", "microwave", "counter", "kettle", "toaster", "pan",
                "cupboard",
            ],
            SceneType::LivingRoom => &[
                "sofa", "television", "armchair", "bookshelf", "table", "plant", "lamp", "rug",
                "fireplace",
            ],
        }
    }
}

impl fmt::Display for SceneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SceneType {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SceneType::ALL
            .into_iter()
            .find(|t| t.token() == s)
            .ok_or_else(|| SceneError::UnknownToken { kind: "scene type", token: s.to_owned() })
    }
}

/// Attribute tokens shared by every scene type.
pub const ATTRIBUTES: &[&str] = &[
    "white", "black", "wooden", "metal", "red", "blue", "green", "large", "small", "old", "shiny",
    "grey",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Heading {
        Heading::ALL[i % 4]
    }

    /// Unit step `(dx, dy)`; `y` grows southwards.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    pub fn left(self) -> Heading {
        Heading::from_index(self.index() + 3)
    }

    pub fn right(self) -> Heading {
        Heading::from_index(self.index() + 1)
    }

    pub fn letter(self) -> char {
        ['N', 'E', 'S', 'W'][self.index()]
    }

    pub fn from_letter(c: char) -> Option<Heading> {
        Heading::ALL.into_iter().find(|h| h.letter() == c)
    }
}

/// Cell coordinates `[x, y]`; serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell(pub usize, pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pose {
    pub x: usize,
    pub y: usize,
    pub heading: Heading,
}

impl Pose {
    pub fn new(x: usize, y: usize, heading: Heading) -> Pose {
        Pose { x, y, heading }
    }

    pub fn cell(&self) -> Cell {
        Cell(self.x, self.y)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.heading.letter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    MoveForward,
    MoveBackward,
    RotateLeft,
    RotateRight,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] =
        [Action::MoveForward, Action::MoveBackward, Action::RotateLeft, Action::RotateRight];

    pub fn from_index(i: usize) -> Result<Action, SceneError> {
        Action::ALL.get(i).copied().ok_or(SceneError::InvalidAction(i))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn inverse(self) -> Action {
        match self {
            Action::MoveForward => Action::MoveBackward,
            Action::MoveBackward => Action::MoveForward,
            Action::RotateLeft => Action::RotateRight,
            Action::RotateRight => Action::RotateLeft,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    #[serde(rename = "class")]
    pub object_class: String,
    pub attributes: Vec<String>,
    pub cell: Cell,
    pub relations: Vec<(String, usize)>,
}

/// A generated room. Immutable once built; share it freely between threads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct SceneSpec {
    pub id: String,
    pub scene_type: SceneType,
    pub width: usize,
    pub height: usize,
    /// Blocked cells, sorted by `(x, y)`.
    pub walls: Vec<Cell>,
    pub objects: Vec<ObjectInstance>,
    pub seed: u64,
    blocked: Vec<bool>,
}

/// On-disk layout of a scene.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    id: String,
    scene_type: SceneType,
    width: usize,
    height: usize,
    walls: Vec<Cell>,
    objects: Vec<ObjectInstance>,
    seed: u64,
}

impl From<SceneSpec> for SceneFile {
    fn from(s: SceneSpec) -> Self {
        SceneFile {
            id: s.id,
            scene_type: s.scene_type,
            width: s.width,
            height: s.height,
            walls: s.walls,
            objects: s.objects,
            seed: s.seed,
        }
    }
}

impl TryFrom<SceneFile> for SceneSpec {
    type Error = SceneError;

    fn try_from(f: SceneFile) -> Result<Self, Self::Error> {
        let scene = SceneSpec::assemble(
            f.id,
            f.scene_type,
            f.width,
            f.height,
            f.walls,
            f.objects,
            f.seed,
        )?;
        scene.validate()?;
        Ok(scene)
    }
}

impl SceneSpec {
    fn assemble(
        id: String,
        scene_type: SceneType,
        width: usize,
        height: usize,
        mut walls: Vec<Cell>,
        objects: Vec<ObjectInstance>,
        seed: u64,
    ) -> Result<SceneSpec, SceneError> {
        if !(MIN_SIDE..=MAX_SIDE).contains(&width) || !(MIN_SIDE..=MAX_SIDE).contains(&height) {
            return Err(SceneError::BadDimensions { width, height });
        }
        walls.sort();
        walls.dedup();
        let mut blocked = vec![false; width * height];
        for &Cell(x, y) in &walls {
            if x >= width || y >= height {
                return Err(SceneError::Malformed(format!("wall [{x}, {y}] outside grid")));
            }
            blocked[y * width + x] = true;
        }
        Ok(SceneSpec { id, scene_type, width, height, walls, objects, seed, blocked })
    }

    /// Checks every structural invariant of a scene.
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.objects.len() < 5 {
            return Err(SceneError::Malformed(format!(
                "{} objects, at least 5 required",
                self.objects.len()
            )));
        }
        let vocab = self.scene_type.object_vocabulary();
        for (i, o) in self.objects.iter().enumerate() {
            if !self.is_free(o.cell.0, o.cell.1) {
                return Err(SceneError::Malformed(format!("object {i} on a wall or outside")));
            }
            if !vocab.contains(&o.object_class.as_str()) {
                return Err(SceneError::Malformed(format!(
                    "object class {:?} not in {} vocabulary",
                    o.object_class, self.scene_type
                )));
            }
            if o.attributes.is_empty() {
                return Err(SceneError::Malformed(format!("object {i} has no attributes")));
            }
            if let Some((_, j)) = o.relations.iter().find(|(_, j)| *j >= self.objects.len()) {
                return Err(SceneError::Malformed(format!("object {i} relates to missing {j}")));
            }
        }
        if self.free_cell_count() == 0 || !self.is_connected() {
            return Err(SceneError::Malformed("free cells are not connected".into()));
        }
        Ok(())
    }

    pub fn is_free(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && !self.blocked[y * self.width + x]
    }

    /// Free cell in direction `(dx, dy)` from `(x, y)`, if any.
    pub fn neighbour(&self, x: usize, y: usize, dx: i64, dy: i64) -> Option<(usize, usize)> {
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 {
            return None;
        }
        let (nx, ny) = (nx as usize, ny as usize);
        self.is_free(nx, ny).then_some((nx, ny))
    }

    pub fn is_valid_pose(&self, pose: Pose) -> bool {
        self.is_free(pose.x, pose.y)
    }

    pub fn check_pose(&self, pose: Pose) -> Result<(), SceneError> {
        if self.is_valid_pose(pose) {
            Ok(())
        } else {
            Err(SceneError::InvalidPose { x: pose.x, y: pose.y })
        }
    }

    pub fn free_cell_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    /// Every valid pose, ordered by `(y, x, heading)`.
    pub fn valid_poses(&self) -> Vec<Pose> {
        let mut out = Vec::with_capacity(self.free_cell_count() * 4);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_free(x, y) {
                    out.extend(Heading::ALL.iter().map(|&h| Pose::new(x, y, h)));
                }
            }
        }
        out
    }

    /// Dense index of a pose in `0..width*height*4`.
    pub fn pose_index(&self, pose: Pose) -> usize {
        (pose.y * self.width + pose.x) * 4 + pose.heading.index()
    }

    pub fn pose_from_index(&self, i: usize) -> Pose {
        let cell = i / 4;
        Pose::new(cell % self.width, cell / self.width, Heading::from_index(i % 4))
    }

    pub fn pose_slots(&self) -> usize {
        self.width * self.height * 4
    }

    /// Movement dynamics without reward bookkeeping.
    pub fn apply(&self, pose: Pose, action: Action) -> Pose {
        match action {
            Action::RotateLeft => Pose { heading: pose.heading.left(), ..pose },
            Action::RotateRight => Pose { heading: pose.heading.right(), ..pose },
            Action::MoveForward | Action::MoveBackward => {
                let (mut dx, mut dy) = pose.heading.delta();
                if action == Action::MoveBackward {
                    dx = -dx;
                    dy = -dy;
                }
                match self.neighbour(pose.x, pose.y, dx, dy) {
                    Some((x, y)) => Pose { x, y, ..pose },
                    None => pose,
                }
            }
        }
    }

    fn is_connected(&self) -> bool {
        let Some(start) = (0..self.width * self.height).find(|&i| !self.blocked[i]) else {
            return false;
        };
        let mut seen = vec![false; self.blocked.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % self.width, i / self.width);
            for h in Heading::ALL {
                let (dx, dy) = h.delta();
                if let Some((nx, ny)) = self.neighbour(x, y, dx, dy) {
                    let j = ny * self.width + nx;
                    if !seen[j] {
                        seen[j] = true;
                        count += 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        count == self.free_cell_count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<SceneSpec, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::Malformed(e.to_string()))
    }
}

/// Builds a room deterministically from its arguments.
///
/// Layouts that leave the free cells disconnected are discarded and
/// regenerated from the next derived stream.
pub fn generate_scene(
    seed: u64,
    scene_type: SceneType,
    width: usize,
    height: usize,
) -> Result<SceneSpec, SceneError> {
    if !(MIN_SIDE..=MAX_SIDE).contains(&width) || !(MIN_SIDE..=MAX_SIDE).contains(&height) {
        return Err(SceneError::BadDimensions { width, height });
    }
    let id = format!("{}-{}-{}x{}", scene_type, seed, width, height);
    for attempt in 0u64.. {
        let mut rng = seeding::rng_for(
            "scene",
            &[seed, scene_type.index() as u64, width as u64, height as u64, attempt],
        );
        // Past a few hundred failures fall back to an open room, which is
        // always connected.
        let walls = if attempt < 256 { draw_walls(&mut rng, width, height) } else { Vec::new() };
        let scene =
            SceneSpec::assemble(id.clone(), scene_type, width, height, walls, Vec::new(), seed)?;
        if !scene.is_connected() {
            continue;
        }
        let objects = place_objects(&mut rng, &scene);
        let scene = SceneSpec { objects, ..scene };
        debug_assert!(scene.validate().is_ok());
        return Ok(scene);
    }
    unreachable!("open rooms are always connected")
}

/// Straight partition segments plus a few pillars, covering at most a
/// fifth of the grid.
fn draw_walls(rng: &mut impl Rng, width: usize, height: usize) -> Vec<Cell> {
    let area = width * height;
    let budget = area / 5;
    let mut walls = BTreeSet::new();
    let segments = 1 + area / 28;
    for _ in 0..segments {
        let horizontal = rng.random_bool(0.5);
        let len = rng.random_range(2..=(width.max(height) / 2).max(2));
        let x0 = rng.random_range(1..width - 1);
        let y0 = rng.random_range(1..height - 1);
        for k in 0..len {
            let (x, y) = if horizontal { (x0 + k, y0) } else { (x0, y0 + k) };
            if x >= width - 1 || y >= height - 1 || walls.len() >= budget {
                break;
            }
            walls.insert(Cell(x, y));
        }
    }
    let pillars = area / 40;
    for _ in 0..pillars {
        if walls.len() >= budget {
            break;
        }
        walls.insert(Cell(rng.random_range(0..width), rng.random_range(0..height)));
    }
    walls.into_iter().collect()
}

fn place_objects(rng: &mut impl Rng, scene: &SceneSpec) -> Vec<ObjectInstance> {
    let vocab = scene.scene_type.object_vocabulary();
    let free: Vec<Cell> = (0..scene.height)
        .flat_map(|y| (0..scene.width).map(move |x| Cell(x, y)))
        .filter(|c| scene.is_free(c.0, c.1))
        .collect();
    let count = rng.random_range(5..=7).min(free.len()).min(vocab.len());

    // Furniture tends to stand against walls: weight cells by blocked
    // neighbours (grid edges included).
    let weight = |c: &Cell| -> f64 {
        let touching = Heading::ALL
            .iter()
            .filter(|h| {
                let (dx, dy) = h.delta();
                scene.neighbour(c.0, c.1, dx, dy).is_none()
            })
            .count();
        1.0 + 2.0 * touching as f64
    };
    let cells: Vec<Cell> = free
        .choose_multiple_weighted(&mut *rng, count, weight)
        .expect("weights are positive")
        .copied()
        .collect();
    let classes: Vec<&str> = vocab.choose_multiple(&mut *rng, count).copied().collect();

    let mut objects: Vec<ObjectInstance> = cells
        .iter()
        .zip(&classes)
        .map(|(&cell, &class)| {
            let n_attr = rng.random_range(1..=2);
            let attributes =
                ATTRIBUTES.choose_multiple(&mut *rng, n_attr).map(|s| s.to_string()).collect();
            ObjectInstance { object_class: class.to_owned(), attributes, cell, relations: Vec::new() }
        })
        .collect();

    for i in 0..objects.len() {
        let here = objects[i].cell;
        let nearest = (0..objects.len()).filter(|&j| j != i).min_by(|&a, &b| {
            let da = cell_distance(here, objects[a].cell);
            let db = cell_distance(here, objects[b].cell);
            da.total_cmp(&db).then(a.cmp(&b))
        });
        if let Some(j) = nearest {
            let d = cell_distance(here, objects[j].cell);
            let token = if d <= 1.5 {
                "beside"
            } else if d <= 3.0 {
                "near"
            } else {
                "across"
            };
            objects[i].relations.push((token.to_owned(), j));
        }
    }
    objects
}

fn cell_distance(a: Cell, b: Cell) -> f64 {
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Whether reaching a target requires the heading to match too.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalMatch {
    #[default]
    Exact,
    PositionOnly,
}

impl GoalMatch {
    pub fn reached(self, pose: Pose, target: Pose) -> bool {
        match self {
            GoalMatch::Exact => pose == target,
            GoalMatch::PositionOnly => pose.x == target.x && pose.y == target.y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub next_pose: Pose,
    pub reward: f64,
    pub done: bool,
    /// Set when the target was reached on this step.
    pub success: bool,
    pub steps_taken: u32,
}

/// One environment transition with exact-pose goal matching.
pub fn step(
    scene: &SceneSpec,
    pose: Pose,
    target: Pose,
    action: usize,
    steps_taken: u32,
    cap: u32,
) -> Result<StepResult, SceneError> {
    step_with(scene, pose, target, action, steps_taken, cap, GoalMatch::Exact)
}

pub fn step_with(
    scene: &SceneSpec,
    pose: Pose,
    target: Pose,
    action: usize,
    steps_taken: u32,
    cap: u32,
    goal: GoalMatch,
) -> Result<StepResult, SceneError> {
    let action = Action::from_index(action)?;
    scene.check_pose(pose)?;
    if steps_taken >= cap {
        return Err(SceneError::EpisodeOver { steps_taken, cap });
    }
    let next_pose = scene.apply(pose, action);
    let steps_taken = steps_taken + 1;
    let success = goal.reached(next_pose, target);
    let reward = if success { STEP_PENALTY + GOAL_REWARD } else { STEP_PENALTY };
    Ok(StepResult { next_pose, reward, done: success || steps_taken == cap, success, steps_taken })
}

/// Minimum number of actions from `from` to `to`, by breadth-first search
/// over the pose graph.
pub fn shortest_path_length(scene: &SceneSpec, from: Pose, to: Pose) -> Result<usize, SceneError> {
    scene.check_pose(from)?;
    scene.check_pose(to)?;
    let mut dist = vec![usize::MAX; scene.pose_slots()];
    let mut queue = VecDeque::from([from]);
    dist[scene.pose_index(from)] = 0;
    while let Some(p) = queue.pop_front() {
        let d = dist[scene.pose_index(p)];
        if p == to {
            return Ok(d);
        }
        for a in Action::ALL {
            let q = scene.apply(p, a);
            let qi = scene.pose_index(q);
            if dist[qi] == usize::MAX {
                dist[qi] = d + 1;
                queue.push_back(q);
            }
        }
    }
    unreachable!("scene connectivity guarantees every pose is reachable")
}

/// Distance-to-go from every pose to `target` (indexed by
/// [`SceneSpec::pose_index`]); `u32::MAX` marks wall slots.
pub fn distance_field(scene: &SceneSpec, target: Pose, goal: GoalMatch) -> Vec<u32> {
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); scene.pose_slots()];
    for p in scene.valid_poses() {
        for a in Action::ALL {
            let q = scene.apply(p, a);
            preds[scene.pose_index(q)].push(scene.pose_index(p));
        }
    }
    let mut dist = vec![u32::MAX; scene.pose_slots()];
    let mut queue = VecDeque::new();
    for p in scene.valid_poses() {
        if goal.reached(p, target) {
            dist[scene.pose_index(p)] = 0;
            queue.push_back(scene.pose_index(p));
        }
    }
    while let Some(i) = queue.pop_front() {
        for &j in &preds[i] {
            if dist[j] == u32::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    dist
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    Random,
    ObjectOriented,
    TopSemantic,
}

impl fmt::Display for TargetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetMode::Random => "random",
            TargetMode::ObjectOriented => "object_oriented",
            TargetMode::TopSemantic => "top_semantic",
        })
    }
}

impl FromStr for TargetMode {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(TargetMode::Random),
            "object" | "object_oriented" | "object-oriented" => Ok(TargetMode::ObjectOriented),
            "top-semantic" | "top_semantic" => Ok(TargetMode::TopSemantic),
            _ => Err(SceneError::UnknownToken { kind: "target mode", token: s.to_owned() }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Target {
    pub pose: Pose,
    pub mode: TargetMode,
}

/// Scores a pose by the semantic content of its frame.
pub type PoseScorer<'a> = dyn Fn(&SceneSpec, Pose) -> f64 + 'a;

/// Target selection with optional exclusions and a custom view model.
pub struct TargetSelector<'a> {
    mode: TargetMode,
    k: usize,
    seed: u64,
    scorer: Option<&'a PoseScorer<'a>>,
    exclude: Vec<Pose>,
    view: ViewConfig,
}

impl<'a> TargetSelector<'a> {
    pub fn new(mode: TargetMode, k: usize, seed: u64) -> Self {
        TargetSelector { mode, k, seed, scorer: None, exclude: Vec::new(), view: ViewConfig::default() }
    }

    pub fn scorer(mut self, scorer: &'a PoseScorer<'a>) -> Self {
        self.scorer = Some(scorer);
        self
    }

    pub fn excluding(mut self, poses: &[Pose]) -> Self {
        self.exclude.extend_from_slice(poses);
        self
    }

    pub fn view(mut self, view: ViewConfig) -> Self {
        self.view = view;
        self
    }

    pub fn select(&self, scene: &SceneSpec) -> Result<Vec<Target>, SceneError> {
        let candidates: Vec<Pose> =
            scene.valid_poses().into_iter().filter(|p| !self.exclude.contains(p)).collect();
        let poses = match self.mode {
            TargetMode::Random => {
                self.require(candidates.len())?;
                let mut rng = seeding::rng_for("targets/random", &[self.seed]);
                candidates.choose_multiple(&mut rng, self.k).copied().collect()
            }
            TargetMode::ObjectOriented => self.object_oriented(scene, candidates)?,
            TargetMode::TopSemantic => {
                let scorer = self.scorer.ok_or(SceneError::MissingScorer)?;
                let mut scored: Vec<(f64, Pose)> = candidates
                    .into_iter()
                    .map(|p| (scorer(scene, p), p))
                    .filter(|(s, _)| *s > 0.0)
                    .collect();
                self.require(scored.len())?;
                // Highest score first; ties keep pose order.
                scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                scored.into_iter().take(self.k).map(|(_, p)| p).collect()
            }
        };
        Ok(poses.into_iter().map(|pose| Target { pose, mode: self.mode }).collect())
    }

    fn require(&self, available: usize) -> Result<(), SceneError> {
        if available < self.k {
            Err(SceneError::NotEnoughTargets { mode: self.mode, available, requested: self.k })
        } else {
            Ok(())
        }
    }

    /// Poses that see at least one object, drawn without replacement with
    /// weight growing in how many other candidates see the same objects.
    fn object_oriented(
        &self,
        scene: &SceneSpec,
        candidates: Vec<Pose>,
    ) -> Result<Vec<Pose>, SceneError> {
        let seen: Vec<(Pose, Vec<usize>)> = candidates
            .into_iter()
            .filter_map(|p| {
                let objs: Vec<usize> = featurizer::visible_objects_with(scene, p, &self.view)
                    .into_iter()
                    .map(|v| v.object)
                    .collect();
                (!objs.is_empty()).then_some((p, objs))
            })
            .collect();
        self.require(seen.len())?;
        let mut viewers = vec![0usize; scene.objects.len()];
        for (_, objs) in &seen {
            for &o in objs {
                viewers[o] += 1;
            }
        }
        let mut rng = seeding::rng_for("targets/object", &[self.seed]);
        let picked = seen
            .choose_multiple_weighted(&mut rng, self.k, |(_, objs)| {
                let shared = objs.iter().map(|&o| viewers[o] - 1).max().unwrap_or(0);
                1.0 + shared as f64
            })
            .expect("weights are positive");
        let mut poses: Vec<Pose> = picked.map(|(p, _)| *p).collect();
        poses.sort();
        Ok(poses)
    }
}

/// Selects `k` targets with the default view model and no exclusions.
pub fn select_targets(
    scene: &SceneSpec,
    mode: TargetMode,
    k: usize,
    seed: u64,
    semantics_oracle: Option<&PoseScorer<'_>>,
) -> Result<Vec<Target>, SceneError> {
    let mut selector = TargetSelector::new(mode, k, seed);
    if let Some(s) = semantics_oracle {
        selector = selector.scorer(s);
    }
    selector.select(scene)
}
