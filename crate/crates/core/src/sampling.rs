//! Random decalibration sampling and training-pair construction.
//!
//! Instead of collecting many calibrated sensor rigs, the ground-truth
//! extrinsic `H_gt` is perturbed by a random in-range decalibration `phi`,
//! giving `H_init = H_gt * phi`. The regressor learns `phi` from the
//! mismatch between the RGB image and the depth projection under `H_init`;
//! the refinement law `H = H_init * phi_hat^-1` then recovers `H_gt`
//! exactly when the estimate is exact. The right-multiplication convention
//! is pinned by the algebra tests below and relied on everywhere else.

use crate::error::Result;
use crate::geometry::{
    decode_decalib, encode_decalib, euler_to_transform, DecalibRange, DecalibVector, EulerPose,
    Representation, RigidTransform,
};
use crate::projection::{
    maxpool_densify, mean_adjust, project_points, CameraIntrinsics, ImageTensor, PointCloud,
};
use crate::rng::DetRng;
use crate::scene::{generate_scene, render_camera, simulate_lidar, SceneConfig};

/// Everything one synthetic frame provides: the rendered camera image, the
/// LiDAR scan in its own frame, and the pinhole model.
#[derive(Clone, Debug)]
pub struct FrameData {
    pub rgb: ImageTensor,
    pub cloud: PointCloud,
    pub intrinsics: CameraIntrinsics,
    pub scene_seed: u64,
}

/// Generates one frame: scene, scan, and render, all from `seed`.
pub fn make_frame(cfg: &SceneConfig, seed: u64) -> Result<FrameData> {
    let scene = generate_scene(cfg, seed)?;
    let cloud = simulate_lidar(&scene, &cfg.lidar)?;
    let (rgb, _) = render_camera(
        &scene,
        cfg,
        &cfg.camera.pose.to_transform(),
        &cfg.camera.intrinsics,
    );
    Ok(FrameData {
        rgb,
        cloud,
        intrinsics: cfg.camera.intrinsics,
        scene_seed: seed,
    })
}

/// Uniform per-component decalibration within the range. Draw order is
/// pinned: yaw, pitch, roll, tx, ty, tz.
pub fn sample_decalib(rng: &mut DetRng, range: &DecalibRange) -> RigidTransform {
    let y = range.y_max_rad();
    let x = range.x_max_m;
    let yaw = rng.uniform_in(-y, y);
    let pitch = rng.uniform_in(-y, y);
    let roll = rng.uniform_in(-y, y);
    let tx = rng.uniform_in(-x, x);
    let ty = rng.uniform_in(-x, x);
    let tz = rng.uniform_in(-x, x);
    euler_to_transform(&EulerPose::new(yaw, pitch, roll, [tx, ty, tz]))
}

/// `H_init = H_gt * phi`, so a perfect estimate recovers `H_gt` through the
/// refinement law.
pub fn make_initial(h_gt: &RigidTransform, phi: &RigidTransform) -> RigidTransform {
    h_gt.compose(phi)
}

/// Encoding and preprocessing knobs shared by training and inference.
#[derive(Clone, Copy, Debug)]
pub struct SampleParams {
    pub range: DecalibRange,
    pub representation: Representation,
    pub balance_factor: f64,
    pub densify_kernel: usize,
}

/// One training pair: preprocessed inputs plus the encoded target and the
/// transforms that produced them.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    /// Mean-adjusted RGB input.
    pub rgb: ImageTensor,
    /// Inverse depth projected with `h_init`, densified, mean-adjusted.
    pub depth: ImageTensor,
    pub target: DecalibVector,
    pub phi: RigidTransform,
    pub h_init: RigidTransform,
    pub h_gt: RigidTransform,
    pub rgb_means: Vec<f64>,
    pub depth_mean: f64,
    /// Pixels that carried a depth measurement before mean adjustment.
    pub depth_occupancy: usize,
}

/// Builds the network inputs for an arbitrary calibration guess; shared by
/// training-sample construction and the inference-side refinement loop.
pub fn project_inputs(
    cloud: &PointCloud,
    h: &RigidTransform,
    k: &CameraIntrinsics,
    densify_kernel: usize,
) -> Result<(ImageTensor, f64, usize)> {
    let sparse = project_points(cloud, h, k);
    let dense = maxpool_densify(&sparse, densify_kernel)?;
    let occupancy = dense.occupancy();
    let (depth, means) = mean_adjust(&dense.to_image());
    Ok((depth, means[0], occupancy))
}

/// Samples a decalibration and assembles the full training pair.
///
/// Samples are never rejected: a large `phi` may push most points outside
/// the image, leaving a near-empty depth map, and the pair is produced all
/// the same.
pub fn make_sample(
    frame: &FrameData,
    h_gt: &RigidTransform,
    params: &SampleParams,
    seed: u64,
) -> Result<TrainingSample> {
    let mut rng = DetRng::seed_from_u64(seed);
    let phi = sample_decalib(&mut rng, &params.range);
    let h_init = make_initial(h_gt, &phi);
    let target = encode_decalib(&phi, params.representation, &params.range, params.balance_factor)?;
    let (depth, depth_mean, depth_occupancy) =
        project_inputs(&frame.cloud, &h_init, &frame.intrinsics, params.densify_kernel)?;
    let (rgb, rgb_means) = mean_adjust(&frame.rgb);
    Ok(TrainingSample {
        rgb,
        depth,
        target,
        phi,
        h_init,
        h_gt: *h_gt,
        rgb_means,
        depth_mean,
        depth_occupancy,
    })
}

impl TrainingSample {
    /// The round-trip law every sample must satisfy: decoding the target
    /// and applying the refinement recovers `h_gt`.
    pub fn roundtrip_error(&self, params: &SampleParams) -> Result<f64> {
        let decoded = decode_decalib(&self.target, &params.range, params.balance_factor)?;
        let recovered = self.h_init.compose(&decoded.inverse());
        Ok(recovered.max_abs_diff(&self.h_gt))
    }
}
