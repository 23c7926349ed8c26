//! Reproducible synthetic scenes with a simulated spinning LiDAR and a
//! Lambert-shaded camera render.
//!
//! World frame: x forward, y left, z up, ground plane at z = 0. The camera
//! frame is the usual vision convention (x right, y down, z along the
//! optical axis); poses map sensor-frame coordinates into the world.
//! Scenes are boxes with per-face RGB albedo scattered on a checkered
//! ground plane, everything generated deterministically from a seed.

mod lidar;
mod render;

pub use lidar::{simulate_lidar, LidarModel};
pub use render::{render_camera, DepthImage};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PoseSpec, RigidTransform};
use crate::projection::CameraIntrinsics;
use crate::rng::{derive_seed, DetRng};

/// Minimum ray parameter; hits closer than this are ignored.
const RAY_EPS: f64 = 1e-9;

/// Axis-aligned box with one RGB albedo per face.
///
/// Face order: -x, +x, -y, +y, -z, +z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub face_albedo: [[f64; 3]; 6],
}

/// Infinite ground plane at `z` with a two-tone checker texture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ground {
    pub z: f64,
    pub albedo_a: [f64; 3],
    pub albedo_b: [f64; 3],
    pub checker_m: f64,
}

/// A generated scene: primitives plus the seed that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub boxes: Vec<Aabb>,
    pub ground: Ground,
    pub seed: u64,
}

/// Primitive id of the ground plane in hit records.
pub const GROUND_ID: usize = usize::MAX;

/// First intersection along a ray.
#[derive(Clone, Copy, Debug)]
pub struct Hit {
    /// Ray parameter; the distance if `dir` is unit length.
    pub t: f64,
    pub normal: Vector3<f64>,
    pub albedo: [f64; 3],
    pub prim_id: usize,
}

fn intersect_aabb(b: &Aabb, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, usize)> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut enter_axis = 0usize;
    let mut enter_sign_neg = false;
    for axis in 0..3 {
        let (o, d) = (origin[axis], dir[axis]);
        let (lo, hi) = (b.min[axis], b.max[axis]);
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (mut t0, mut t1) = ((lo - o) * inv, (hi - o) * inv);
        let mut entered_low = true;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            entered_low = false;
        }
        if t0 > t_enter {
            t_enter = t0;
            enter_axis = axis;
            enter_sign_neg = entered_low;
        }
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return None;
        }
    }
    if t_enter <= RAY_EPS || !t_enter.is_finite() {
        return None;
    }
    // Face index: axis * 2 + (0 for the low face, 1 for the high face).
    let face = enter_axis * 2 + usize::from(!enter_sign_neg);
    Some((t_enter, face))
}

impl Scene {
    /// Nearest intersection over every primitive; ground is checked last so
    /// equal-distance ties resolve to the box (deterministic).
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (id, b) in self.boxes.iter().enumerate() {
            if let Some((t, face)) = intersect_aabb(b, origin, dir) {
                if best.as_ref().map_or(true, |h| t < h.t) {
                    let axis = face / 2;
                    let mut normal = Vector3::zeros();
                    normal[axis] = if face % 2 == 0 { -1.0 } else { 1.0 };
                    best = Some(Hit {
                        t,
                        normal,
                        albedo: b.face_albedo[face],
                        prim_id: id,
                    });
                }
            }
        }
        if dir.z != 0.0 {
            let t = (self.ground.z - origin.z) / dir.z;
            if t > RAY_EPS && best.as_ref().map_or(true, |h| t < h.t) {
                let p = origin + dir * t;
                let m = self.ground.checker_m;
                let cell = (p.x / m).floor() as i64 + (p.y / m).floor() as i64;
                let albedo = if cell.rem_euclid(2) == 0 {
                    self.ground.albedo_a
                } else {
                    self.ground.albedo_b
                };
                best = Some(Hit {
                    t,
                    normal: Vector3::new(0.0, 0.0, if origin.z > self.ground.z { 1.0 } else { -1.0 }),
                    albedo,
                    prim_id: GROUND_ID,
                });
            }
        }
        best
    }
}

/// Camera placement and pinhole model for synthetic frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub intrinsics: CameraIntrinsics,
    pub pose: PoseSpec,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            intrinsics: CameraIntrinsics::new(150.0, 150.0, 128.0, 48.0, 256, 96)
                .expect("valid default intrinsics"),
            // Optical axis along world +x, up along world +z.
            pose: PoseSpec {
                yaw_deg: -90.0,
                pitch_deg: 0.0,
                roll_deg: -90.0,
                x: 0.0,
                y: 0.0,
                z: 1.4,
            },
        }
    }
}

/// Scene generator settings. Defaults give a desk-scale street-like layout
/// that keeps every primitive inside a 40 m x 40 m x 10 m volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub n_boxes_min: usize,
    pub n_boxes_max: usize,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub footprint_range: [f64; 2],
    pub height_range: [f64; 2],
    pub albedo_range: [f64; 2],
    /// Directional light (direction the light travels, world frame).
    pub light_dir: [f64; 3],
    pub ambient: f64,
    pub background: [f64; 3],
    /// Minimum number of boxes that must be visible from the camera.
    pub min_visible: usize,
    pub camera: CameraConfig,
    pub lidar: LidarModel,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            n_boxes_min: 6,
            n_boxes_max: 10,
            x_range: [4.5, 18.0],
            y_range: [-9.0, 9.0],
            footprint_range: [0.6, 3.5],
            height_range: [0.8, 5.0],
            albedo_range: [0.08, 0.95],
            light_dir: [0.45, -0.25, -0.86],
            ambient: 0.25,
            background: [0.55, 0.69, 0.86],
            min_visible: 3,
            camera: CameraConfig::default(),
            lidar: LidarModel::default(),
        }
    }
}

impl SceneConfig {
    /// Ground-truth extrinsic: LiDAR frame to camera frame.
    pub fn h_gt(&self) -> RigidTransform {
        self.camera
            .pose
            .to_transform()
            .inverse()
            .compose(&self.lidar.pose.to_transform())
    }
}

fn sample_box(cfg: &SceneConfig, rng: &mut DetRng) -> Aabb {
    let cx = rng.uniform_in(cfg.x_range[0], cfg.x_range[1]);
    let cy = rng.uniform_in(cfg.y_range[0], cfg.y_range[1]);
    let half_x = 0.5 * rng.uniform_in(cfg.footprint_range[0], cfg.footprint_range[1]);
    let half_y = 0.5 * rng.uniform_in(cfg.footprint_range[0], cfg.footprint_range[1]);
    let height = rng.uniform_in(cfg.height_range[0], cfg.height_range[1]);
    let mut face_albedo = [[0.0; 3]; 6];
    for face in &mut face_albedo {
        for ch in face.iter_mut() {
            *ch = rng.uniform_in(cfg.albedo_range[0], cfg.albedo_range[1]);
        }
    }
    Aabb {
        min: [cx - half_x, cy - half_y, 0.0],
        max: [cx + half_x, cy + half_y, height],
        face_albedo,
    }
}

fn build_candidate(cfg: &SceneConfig, seed: u64) -> Scene {
    let mut rng = DetRng::seed_from_u64(seed);
    let n = cfg.n_boxes_min + rng.uniform_usize(cfg.n_boxes_max - cfg.n_boxes_min + 1);
    let boxes = (0..n).map(|_| sample_box(cfg, &mut rng)).collect();
    let mut shade = |lo: f64, hi: f64| {
        let g = rng.uniform_in(lo, hi);
        [g, g * rng.uniform_in(0.85, 1.0), g * rng.uniform_in(0.8, 1.0)]
    };
    Scene {
        boxes,
        ground: Ground {
            z: 0.0,
            albedo_a: shade(0.25, 0.45),
            albedo_b: shade(0.5, 0.75),
            checker_m: 2.0,
        },
        seed,
    }
}

/// Counts distinct boxes hit on a coarse pixel grid from the camera pose.
fn visible_boxes(scene: &Scene, cam: &CameraConfig) -> usize {
    let pose = cam.pose.to_transform();
    let k = &cam.intrinsics;
    let origin = *pose.translation();
    let mut seen = vec![false; scene.boxes.len()];
    let mut count = 0;
    for v in (0..k.height).step_by(3) {
        for u in (0..k.width).step_by(3) {
            let dir_cam = Vector3::new(
                (u as f64 - k.cx) / k.fx,
                (v as f64 - k.cy) / k.fy,
                1.0,
            );
            let dir = pose.rotation() * dir_cam;
            if let Some(hit) = scene.intersect(&origin, &dir) {
                if hit.prim_id != GROUND_ID && !seen[hit.prim_id] {
                    seen[hit.prim_id] = true;
                    count += 1;
                }
            }
        }
    }
    count
}

/// Deterministic scene for `seed`, regenerating with perturbed seeds until
/// the visibility invariant holds (bounded retries).
pub fn generate_scene(cfg: &SceneConfig, seed: u64) -> Result<Scene> {
    const MAX_ATTEMPTS: usize = 100;
    for attempt in 0..MAX_ATTEMPTS {
        let candidate_seed = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, 0x5eed_0000 + attempt as u64)
        };
        let scene = build_candidate(cfg, candidate_seed);
        if visible_boxes(&scene, &cfg.camera) >= cfg.min_visible {
            return Ok(scene);
        }
    }
    Err(Error::DegenerateScene {
        attempts: MAX_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_byte_identical() {
        let cfg = SceneConfig::default();
        let a = generate_scene(&cfg, 7).unwrap();
        let b = generate_scene(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            toml::to_string(&a).unwrap(),
            toml::to_string(&b).unwrap()
        );
    }

    #[test]
    fn hundred_seeds_satisfy_visibility() {
        let cfg = SceneConfig::default();
        for seed in 0..100 {
            let scene = generate_scene(&cfg, seed).unwrap();
            assert!(visible_boxes(&scene, &cfg.camera) >= cfg.min_visible, "seed {seed}");
        }
    }

    #[test]
    fn boxes_stay_inside_bounding_volume() {
        let cfg = SceneConfig::default();
        for seed in 0..50 {
            let scene = generate_scene(&cfg, seed).unwrap();
            for b in &scene.boxes {
                assert!(b.min[0] >= -20.0 && b.max[0] <= 20.0);
                assert!(b.min[1] >= -20.0 && b.max[1] <= 20.0);
                assert!(b.min[2] >= 0.0 && b.max[2] <= 10.0);
                for a in 0..3 {
                    assert!(b.min[a] < b.max[a]);
                }
            }
        }
    }

    #[test]
    fn aabb_slab_intersection_basics() {
        let b = Aabb {
            min: [2.0, -1.0, -1.0],
            max: [4.0, 1.0, 1.0],
            face_albedo: [[0.5; 3]; 6],
        };
        // Ray along +x hits the -x face at t = 2.
        let (t, face) = intersect_aabb(
            &b,
            &Vector3::zeros(),
            &Vector3::new(1.0, 0.0, 0.0),
        )
        .unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert_eq!(face, 0);
        // Ray pointing away misses.
        assert!(intersect_aabb(&b, &Vector3::zeros(), &Vector3::new(-1.0, 0.0, 0.0)).is_none());
        // Ray starting inside reports the exit-side entry? No: slab entry is
        // behind the origin, so no hit.
        assert!(intersect_aabb(
            &b,
            &Vector3::new(3.0, 0.0, 0.0),
            &Vector3::new(1.0, 0.0, 0.0)
        )
        .is_none());
    }

    #[test]
    fn ground_checker_alternates() {
        let scene = Scene {
            boxes: vec![],
            ground: Ground {
                z: 0.0,
                albedo_a: [0.3; 3],
                albedo_b: [0.7; 3],
                checker_m: 1.0,
            },
            seed: 0,
        };
        let down = Vector3::new(0.0, 0.0, -1.0);
        let a = scene
            .intersect(&Vector3::new(0.5, 0.5, 1.0), &down)
            .unwrap();
        let b = scene
            .intersect(&Vector3::new(1.5, 0.5, 1.0), &down)
            .unwrap();
        assert_ne!(a.albedo, b.albedo);
        assert_eq!(a.prim_id, GROUND_ID);
    }

    #[test]
    fn empty_scene_has_no_hits_above_ground_looking_up() {
        let scene = Scene {
            boxes: vec![],
            ground: Ground {
                z: 0.0,
                albedo_a: [0.3; 3],
                albedo_b: [0.7; 3],
                checker_m: 1.0,
            },
            seed: 0,
        };
        assert!(scene
            .intersect(&Vector3::new(0.0, 0.0, 1.0), &Vector3::new(0.0, 0.0, 1.0))
            .is_none());
    }

    #[test]
    fn default_extrinsic_is_close_to_lateral_offset() {
        let cfg = SceneConfig::default();
        let h = cfg.h_gt();
        // LiDAR sits slightly left of and above the camera; the extrinsic
        // translation magnitude mirrors that offset.
        let t = h.translation().norm();
        assert!(t > 0.1 && t < 1.0, "offset {t}");
    }
}
