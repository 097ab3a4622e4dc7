//! Synthetic perception: per-pose visual feature vectors and caption
//! annotations.
//!
//! The visual features play the role of a frozen image backbone. They are a
//! deterministic function of the scene and pose: low-frequency random
//! projections of the point the agent is looking at, damped when the agent
//! faces a nearby wall, plus a signature for every visible object class.
//! Nearby viewpoints therefore produce correlated vectors, and blank wall
//! views look alike regardless of where they are.
//!
//! Annotations play the role of a dense captioner: one box, confidence and
//! templated caption per visible object.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::gridscene::{Pose, SceneSpec};
use crate::seeding;

/// Feature width used at desk scale.
pub const DEFAULT_FEATURE_DIM: usize = 128;
/// Wavelength, in cells, of the unit spatial frequency.
const WAVELENGTH: f64 = 8.0;
/// How far ahead of the agent the "looked-at" point sits.
const GAZE_DISTANCE: f64 = 2.0;
/// Longest caption any template produces.
pub const MAX_CAPTION_TOKENS: usize = 12;

/// Visibility model: field of view, range and confidence falloff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    pub fov_degrees: f64,
    pub range: f64,
    pub confidence_slope: f64,
    pub min_confidence: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig { fov_degrees: 90.0, range: 5.0, confidence_slope: 0.7, min_confidence: 0.05 }
    }
}

impl ViewConfig {
    pub fn confidence(&self, distance: f64) -> f64 {
        (1.0 - distance / self.range * self.confidence_slope).clamp(self.min_confidence, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisibleObject {
    /// Index into `scene.objects`.
    pub object: usize,
    /// `[x_min, y_min, x_max, y_max]` in normalized image coordinates.
    pub bbox: [f64; 4],
    pub confidence: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub bbox: [f64; 4],
    pub confidence: f64,
    pub tokens: Vec<String>,
}

impl Annotation {
    pub fn area(&self) -> f64 {
        (self.bbox[2] - self.bbox[0]) * (self.bbox[3] - self.bbox[1])
    }
}

/// Objects in the forward view cone with a clear line of sight, ordered by
/// object index.
pub fn visible_objects(scene: &SceneSpec, pose: Pose) -> Vec<VisibleObject> {
    visible_objects_with(scene, pose, &ViewConfig::default())
}

pub fn visible_objects_with(scene: &SceneSpec, pose: Pose, view: &ViewConfig) -> Vec<VisibleObject> {
    let (hx, hy) = pose.heading.delta();
    let (rx, ry) = pose.heading.right().delta();
    let half_fov = (view.fov_degrees / 2.0).to_radians();
    let mut out = Vec::new();
    for (i, obj) in scene.objects.iter().enumerate() {
        let dx = obj.cell.0 as f64 - pose.x as f64;
        let dy = obj.cell.1 as f64 - pose.y as f64;
        let ahead = dx * hx as f64 + dy * hy as f64;
        let lateral = dx * rx as f64 + dy * ry as f64;
        if ahead <= 0.0 {
            continue;
        }
        let distance = (ahead * ahead + lateral * lateral).sqrt();
        if distance > view.range || lateral.abs().atan2(ahead) > half_fov + 1e-12 {
            continue;
        }
        if !line_of_sight(scene, pose.x, pose.y, obj.cell.0, obj.cell.1) {
            continue;
        }
        out.push(VisibleObject {
            object: i,
            bbox: project_box(ahead, lateral, distance, half_fov),
            confidence: view.confidence(distance),
            distance,
        });
    }
    out
}

/// Samples the segment between cell centres; any wall cell strictly between
/// the endpoints blocks the view.
fn line_of_sight(scene: &SceneSpec, x0: usize, y0: usize, x1: usize, y1: usize) -> bool {
    let (ax, ay) = (x0 as f64 + 0.5, y0 as f64 + 0.5);
    let (bx, by) = (x1 as f64 + 0.5, y1 as f64 + 0.5);
    let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
    let samples = (len * 20.0).ceil() as usize;
    for s in 1..samples {
        let t = s as f64 / samples as f64;
        let (cx, cy) = ((ax + t * (bx - ax)).floor(), (ay + t * (by - ay)).floor());
        let (cx, cy) = (cx as usize, cy as usize);
        if (cx, cy) == (x0, y0) || (cx, cy) == (x1, y1) {
            continue;
        }
        if !scene.is_free(cx, cy) {
            return false;
        }
    }
    true
}

fn project_box(ahead: f64, lateral: f64, distance: f64, half_fov: f64) -> [f64; 4] {
    let u = 0.5 + 0.5 * (lateral / ahead) / half_fov.tan();
    let v = 0.5 + 0.25 / distance;
    let half = 0.35 / distance;
    let x_min = (u - half).clamp(0.0, 0.98);
    let x_max = (u + half).clamp(x_min + 0.02, 1.0);
    let y_min = (v - half).clamp(0.0, 0.98);
    let y_max = (v + half).clamp(y_min + 0.02, 1.0);
    [x_min, y_min, x_max, y_max]
}

/// One annotation per visible object, in the same order as
/// [`visible_objects`].
pub fn annotate(scene: &SceneSpec, pose: Pose) -> Vec<Annotation> {
    annotate_with(scene, pose, &ViewConfig::default())
}

pub fn annotate_with(scene: &SceneSpec, pose: Pose, view: &ViewConfig) -> Vec<Annotation> {
    visible_objects_with(scene, pose, view)
        .into_iter()
        .map(|v| Annotation {
            bbox: v.bbox,
            confidence: v.confidence,
            tokens: caption(scene, v.object),
        })
        .collect()
}

/// Templated caption for one object, fixed per (scene seed, object index).
pub fn caption(scene: &SceneSpec, object: usize) -> Vec<String> {
    let obj = &scene.objects[object];
    let attr = obj.attributes[0].as_str();
    let class = obj.object_class.as_str();
    let template = seeding::combine(&[scene.seed, object as u64, 0xca9]) % 4;
    let words: Vec<&str> = match (template, obj.relations.first()) {
        (1, Some((rel, j))) => vec!["the", class, rel, "the", &scene.objects[*j].object_class],
        (2, Some((rel, j))) => {
            let other = &scene.objects[*j];
            vec!["a", attr, class, rel, "a", &other.attributes[0], &other.object_class]
        }
        (3, _) => vec!["the", class, "is", attr],
        _ => vec!["a", attr, class],
    };
    debug_assert!(words.len() <= MAX_CAPTION_TOKENS);
    words.into_iter().map(str::to_owned).collect()
}

/// Frozen random projections standing in for a pretrained image backbone.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    dim: usize,
    seed: u64,
    freq: Vec<(f64, f64)>,
    heading_phase: Vec<[f64; 4]>,
    wall: Vec<f64>,
    view: ViewConfig,
}

impl FeatureExtractor {
    pub fn new(seed: u64, dim: usize) -> FeatureExtractor {
        FeatureExtractor::with_view(seed, dim, ViewConfig::default())
    }

    pub fn with_view(seed: u64, dim: usize, view: ViewConfig) -> FeatureExtractor {
        let mut rng = seeding::rng_for("features/backbone", &[seed, dim as u64]);
        let freq = (0..dim).map(|_| (rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2))).collect();
        let heading_phase = (0..dim)
            .map(|_| std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI)))
            .collect();
        let wall = gaussian_vector(&mut rng, dim);
        FeatureExtractor { dim, seed, freq, heading_phase, wall, view }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, scene: &SceneSpec, pose: Pose) -> Vec<f64> {
        let (hx, hy) = pose.heading.delta();
        let gaze_x = pose.x as f64 + GAZE_DISTANCE * hx as f64;
        let gaze_y = pose.y as f64 + GAZE_DISTANCE * hy as f64;
        let openness = free_run(scene, pose, self.view.range.floor() as usize) as f64
            / self.view.range.floor().max(1.0);
        let smooth_gain = 0.1 + 0.9 * openness * openness;
        let wall_gain = 0.8 * (1.0 - openness);
        let h = pose.heading.index();

        let mut out: Vec<f64> = (0..self.dim)
            .map(|i| {
                let (kx, ky) = self.freq[i];
                let phase = 2.0 * PI * (kx * gaze_x + ky * gaze_y) / WAVELENGTH;
                smooth_gain * (phase + self.heading_phase[i][h]).cos() + wall_gain * self.wall[i]
            })
            .collect();

        // Room texture: a faint per-scene offset.
        let mut rng = seeding::rng_for("features/scene", &[self.seed, seeding::fnv1a(scene.id.as_bytes())]);
        for (o, t) in out.iter_mut().zip(gaussian_vector(&mut rng, self.dim)) {
            *o += 0.15 * t;
        }

        for v in visible_objects_with(scene, pose, &self.view) {
            let obj = &scene.objects[v.object];
            let class_sig = self.signature("class", &obj.object_class);
            let attr_sig = self.signature("attribute", &obj.attributes[0]);
            for i in 0..self.dim {
                out[i] += v.confidence * (0.5 * class_sig[i] + 0.2 * attr_sig[i]);
            }
        }

        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 0.5 {
            // Only reachable at tiny widths; keep the vector inside the
            // documented norm band.
            let scale = 0.5 / norm.max(1e-12);
            out.iter_mut().for_each(|x| *x *= scale);
        } else if norm > 50.0 {
            let scale = 50.0 / norm;
            out.iter_mut().for_each(|x| *x *= scale);
        }
        out
    }

    fn signature(&self, kind: &str, token: &str) -> Vec<f64> {
        let mut rng = seeding::rng_for(kind, &[self.seed, self.dim as u64, seeding::fnv1a(token.as_bytes())]);
        gaussian_vector(&mut rng, self.dim)
    }
}

fn gaussian_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Free cells straight ahead before the first wall or edge, capped.
fn free_run(scene: &SceneSpec, pose: Pose, cap: usize) -> usize {
    let (dx, dy) = pose.heading.delta();
    let (mut x, mut y) = (pose.x, pose.y);
    let mut n = 0;
    while n < cap {
        match scene.neighbour(x, y, dx, dy) {
            Some((nx, ny)) => {
                x = nx;
                y = ny;
                n += 1;
            }
            None => break,
        }
    }
    n
}

/// Visual feature vector of one pose.
pub fn visual_features(scene: &SceneSpec, pose: Pose, feature_seed: u64, dim: usize) -> Vec<f64> {
    FeatureExtractor::new(feature_seed, dim).features(scene, pose)
}

/// One `dump-annotations` line: scene id, x, y, heading letter, then one
/// `conf:x_min,y_min,x_max,y_max:tokens` field per annotation.
pub fn annotation_line(scene: &SceneSpec, pose: Pose, annotations: &[Annotation]) -> String {
    let mut line = format!("{}\t{}\t{}\t{}", scene.id, pose.x, pose.y, pose.heading.letter());
    for a in annotations {
        line.push_str(&format!(
            "\t{:.6}:{:.6},{:.6},{:.6},{:.6}:{}",
            a.confidence,
            a.bbox[0],
            a.bbox[1],
            a.bbox[2],
            a.bbox[3],
            a.tokens.join(" ")
        ));
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridscene::{generate_scene, Cell, Heading, ObjectInstance, SceneType};

    fn room_with(objects: &[(usize, usize)], walls: Vec<Cell>) -> SceneSpec {
        let mut v = serde_json::json!({
            "id": "hand", "scene_type": "bathroom", "width": 9, "height": 9,
            "walls": walls, "objects": [], "seed": 3
        });
        let mut objs: Vec<ObjectInstance> = objects
            .iter()
            .map(|&(x, y)| ObjectInstance {
                object_class: "sink".into(),
                attributes: vec!["white".into()],
                cell: Cell(x, y),
                relations: vec![],
            })
            .collect();
        while objs.len() < 5 {
            objs.push(ObjectInstance {
                object_class: "towel".into(),
                attributes: vec!["blue".into()],
                cell: Cell(8, 8),
                relations: vec![],
            });
        }
        v["objects"] = serde_json::to_value(objs).unwrap();
        SceneSpec::from_json(&v.to_string()).unwrap()
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn behind_is_invisible() {
        let s = room_with(&[(4, 6)], vec![]);
        let facing_away = Pose::new(4, 4, Heading::North);
        assert!(visible_objects(&s, facing_away).iter().all(|v| v.object != 0));
        let facing = Pose::new(4, 4, Heading::South);
        assert!(visible_objects(&s, facing).iter().any(|v| v.object == 0));
    }

    #[test]
    fn confidence_falls_with_distance() {
        let s = room_with(&[(4, 3), (4, 6)], vec![]);
        let v = visible_objects(&s, Pose::new(4, 2, Heading::South));
        let near = v.iter().find(|v| v.object == 0).unwrap();
        let far = v.iter().find(|v| v.object == 1).unwrap();
        assert_eq!(near.distance, 1.0);
        assert_eq!(far.distance, 4.0);
        assert!(near.confidence > far.confidence);
        assert!((near.confidence - (1.0 - 0.7 / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn wall_blocks_line_of_sight() {
        let s = room_with(&[(4, 6)], vec![Cell(4, 5)]);
        assert!(visible_objects(&s, Pose::new(4, 3, Heading::South)).iter().all(|v| v.object != 0));
        let open = room_with(&[(4, 6)], vec![Cell(3, 5)]);
        assert!(visible_objects(&open, Pose::new(4, 3, Heading::South)).iter().any(|v| v.object == 0));
    }

    #[test]
    fn boxes_and_confidences_valid() {
        for seed in 0..10 {
            let s = generate_scene(seed, SceneType::ALL[seed as usize % 4], 10, 9).unwrap();
            for p in s.valid_poses() {
                for v in visible_objects(&s, p) {
                    let [x0, y0, x1, y1] = v.bbox;
                    assert!(0.0 <= x0 && x0 < x1 && x1 <= 1.0, "{:?}", v.bbox);
                    assert!(0.0 <= y0 && y0 < y1 && y1 <= 1.0, "{:?}", v.bbox);
                    assert!(v.confidence > 0.0 && v.confidence <= 1.0);
                }
            }
        }
    }

    #[test]
    fn annotate_matches_visibility() {
        let s = generate_scene(4, SceneType::Kitchen, 9, 9).unwrap();
        for p in s.valid_poses() {
            let a = annotate(&s, p);
            assert_eq!(a.len(), visible_objects(&s, p).len());
            assert!(a.iter().all(|a| !a.tokens.is_empty() && a.tokens.len() <= MAX_CAPTION_TOKENS));
        }
    }

    #[test]
    fn caption_instantiates_template() {
        let s = room_with(&[(4, 6)], vec![]);
        let found = (0..s.objects.len()).any(|i| {
            let c = caption(&s, i);
            c == ["a", "white", "sink"] || c == ["the", "sink", "is", "white"]
        });
        assert!(found);
    }

    #[test]
    fn empty_view_gives_no_annotations() {
        let s = room_with(&[(4, 6)], vec![]);
        assert!(annotate(&s, Pose::new(0, 0, Heading::North)).is_empty());
    }

    #[test]
    fn features_are_deterministic_with_requested_width() {
        let s = generate_scene(1, SceneType::Bedroom, 8, 8).unwrap();
        let p = s.valid_poses()[9];
        let a = visual_features(&s, p, 5, 128);
        assert_eq!(a.len(), 128);
        assert_eq!(a, visual_features(&s, p, 5, 128));
        assert_eq!(visual_features(&s, p, 5, 2048).len(), 2048);
        assert_ne!(a, visual_features(&s, p, 6, 128));
    }

    #[test]
    fn feature_norms_in_band() {
        let s = generate_scene(9, SceneType::LivingRoom, 10, 10).unwrap();
        let fx = FeatureExtractor::new(0, 128);
        for p in s.valid_poses() {
            let f = fx.features(&s, p);
            let n = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(f.iter().all(|x| x.is_finite()));
            assert!((0.5..=50.0).contains(&n), "{n}");
        }
    }

    #[test]
    fn adjacent_poses_more_similar_than_distant() {
        // Open room, no objects in view along row 1 facing east.
        let s = room_with(&[(0, 8)], vec![]);
        let fx = FeatureExtractor::new(0, 128);
        let mut wins = 0;
        let mut total = 0;
        for y in 1..4 {
            for x in 0..3 {
                let base = fx.features(&s, Pose::new(x, y, Heading::South));
                let near = fx.features(&s, Pose::new(x + 1, y, Heading::South));
                let far = fx.features(&s, Pose::new(x + 5, y, Heading::South));
                total += 1;
                if cosine(&base, &near) > cosine(&base, &far) {
                    wins += 1;
                }
            }
        }
        assert_eq!(wins, total);
    }

    #[test]
    fn annotation_line_format() {
        let s = room_with(&[(4, 6)], vec![]);
        let p = Pose::new(4, 4, Heading::South);
        let line = annotation_line(&s, p, &annotate(&s, p));
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(&fields[..4], &["hand", "4", "4", "S"]);
        let ann: Vec<&str> = fields[4].splitn(3, ':').collect();
        assert_eq!(ann.len(), 3);
        assert_eq!(ann[1].split(',').count(), 4);
    }
}
