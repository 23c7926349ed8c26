//! Inference-side calibration: iterative expert refinement, temporal
//! filtering, and evaluation metrics.

mod filter;
pub mod metrics;

pub use filter::{FilterMode, TemporalFilter, Window};
pub use metrics::{evaluate, MetricRecord};

use crate::error::{Error, Result};
use crate::geometry::{decode_decalib, DecalibRange, DecalibVector, RigidTransform};
use crate::model::Model;
use crate::projection::{CameraIntrinsics, ImageTensor, PointCloud};
use crate::sampling::project_inputs;
use crate::tensor::Tensor;

/// Everything a regressor may look at for one refinement step. Stub
/// regressors used in tests also see the current calibration.
pub struct RefineContext<'a> {
    pub rgb_adj: &'a Tensor,
    pub depth_adj: &'a Tensor,
    pub h_current: &'a RigidTransform,
}

/// Produces a decalibration estimate from the projected inputs.
pub trait Regressor {
    fn regress(&self, ctx: &RefineContext<'_>) -> Result<RigidTransform>;
}

/// A trained expert: model plus the encoding range it was trained with.
pub struct Expert {
    pub model: Model,
    pub range: DecalibRange,
}

impl Regressor for Expert {
    fn regress(&self, ctx: &RefineContext<'_>) -> Result<RigidTransform> {
        let trace = self.model.forward(ctx.rgb_adj, ctx.depth_adj)?;
        let cfg = self.model.config();
        let vector = DecalibVector::from_raw(trace.output.data(), cfg.representation)?;
        decode_decalib(&vector, &self.range, cfg.balance_factor)
    }
}

/// Test stub: always reports "no decalibration".
pub struct IdentityRegressor;

impl Regressor for IdentityRegressor {
    fn regress(&self, _ctx: &RefineContext<'_>) -> Result<RigidTransform> {
        Ok(RigidTransform::identity())
    }
}

/// Test stub: returns the exact decalibration separating the current guess
/// from the ground truth it was built with.
pub struct OracleRegressor {
    pub h_gt: RigidTransform,
}

impl Regressor for OracleRegressor {
    fn regress(&self, ctx: &RefineContext<'_>) -> Result<RigidTransform> {
        Ok(self.h_gt.inverse().compose(ctx.h_current))
    }
}

/// One refinement step: the updated calibration and the decalibration
/// estimate it applied.
#[derive(Clone, Copy, Debug)]
pub struct RefineStep {
    pub h: RigidTransform,
    pub phi_hat: RigidTransform,
}

/// Projects the cloud under the current calibration, runs the regressor,
/// and applies `H = H_current * phi_hat^-1`.
///
/// An empty projection still runs: the regressor sees an all-zero depth
/// image and typically still nudges the calibration back toward overlap.
pub fn refine_once(
    regressor: &dyn Regressor,
    h_current: &RigidTransform,
    cloud: &PointCloud,
    rgb_adj: &Tensor,
    intrinsics: &CameraIntrinsics,
    densify_kernel: usize,
) -> Result<RefineStep> {
    let (depth, _, _) = project_inputs(cloud, h_current, intrinsics, densify_kernel)?;
    let depth_adj = Model::to_input(&depth)?;
    let ctx = RefineContext {
        rgb_adj,
        depth_adj: &depth_adj,
        h_current,
    };
    let phi_hat = regressor.regress(&ctx)?;
    Ok(RefineStep {
        h: h_current.compose(&phi_hat.inverse()),
        phi_hat,
    })
}

/// Ordered experts, coarsest range first; ranges strictly decrease.
pub struct ExpertRegistry {
    stages: Vec<(DecalibRange, Box<dyn Regressor>)>,
}

impl ExpertRegistry {
    pub fn new(stages: Vec<(DecalibRange, Box<dyn Regressor>)>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidConfig("expert registry is empty".to_string()));
        }
        for pair in stages.windows(2) {
            if !pair[1].0.strictly_finer_than(&pair[0].0) {
                return Err(Error::InvalidConfig(format!(
                    "expert ranges must strictly decrease: {:?} then {:?}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        Ok(ExpertRegistry { stages })
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Per-stage residual captured when ground truth is available.
#[derive(Clone, Debug)]
pub struct StageRecord {
    pub stage: usize,
    pub h: RigidTransform,
    pub metrics: Option<MetricRecord>,
}

/// Result of a cascade run.
#[derive(Clone, Debug)]
pub struct CalibrationEstimate {
    pub h: RigidTransform,
    pub per_stage: Vec<StageRecord>,
    pub stages: usize,
}

/// Runs every expert in order (`passes_per_stage` forward passes each),
/// re-projecting the cloud with the latest estimate before each pass.
/// Supplying `h_gt` records per-stage residuals for evaluation.
pub fn cascade(
    registry: &ExpertRegistry,
    h_init: &RigidTransform,
    cloud: &PointCloud,
    rgb: &ImageTensor,
    intrinsics: &CameraIntrinsics,
    densify_kernel: usize,
    passes_per_stage: usize,
    h_gt: Option<&RigidTransform>,
) -> Result<CalibrationEstimate> {
    let passes = passes_per_stage.max(1);
    let (rgb_adj_img, _) = crate::projection::mean_adjust(rgb);
    let rgb_adj = Model::to_input(&rgb_adj_img)?;
    let mut h = *h_init;
    let mut per_stage = Vec::with_capacity(registry.stages.len());
    for (stage, (_, regressor)) in registry.stages.iter().enumerate() {
        for _ in 0..passes {
            h = refine_once(regressor.as_ref(), &h, cloud, &rgb_adj, intrinsics, densify_kernel)?.h;
        }
        per_stage.push(StageRecord {
            stage,
            h,
            metrics: h_gt.map(|gt| evaluate(&h, gt)),
        });
    }
    Ok(CalibrationEstimate {
        h,
        per_stage,
        stages: registry.stages.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random_transform;
    use crate::rng::DetRng;
    use crate::sampling::{make_frame, make_initial, sample_decalib};
    use crate::scene::SceneConfig;

    fn test_setup() -> (crate::sampling::FrameData, RigidTransform) {
        let mut cfg = SceneConfig::default();
        // Small frame keeps these tests quick.
        cfg.camera.intrinsics =
            crate::projection::CameraIntrinsics::new(60.0, 60.0, 48.0, 24.0, 96, 48).unwrap();
        cfg.lidar.azimuth_step_deg = 2.0;
        let frame = make_frame(&cfg, 5).unwrap();
        (frame, cfg.h_gt())
    }

    #[test]
    fn oracle_regressor_recovers_ground_truth_exactly() {
        let (frame, h_gt) = test_setup();
        let mut rng = DetRng::seed_from_u64(100);
        let range = DecalibRange::new(1.5, 20.0).unwrap();
        let (rgb_adj_img, _) = crate::projection::mean_adjust(&frame.rgb);
        let rgb_adj = Model::to_input(&rgb_adj_img).unwrap();
        for _ in 0..20 {
            let phi = sample_decalib(&mut rng, &range);
            let h_init = make_initial(&h_gt, &phi);
            let oracle = OracleRegressor { h_gt };
            let step = refine_once(&oracle, &h_init, &frame.cloud, &rgb_adj, &frame.intrinsics, 5)
                .unwrap();
            assert!(step.h.max_abs_diff(&h_gt) < 1e-12);
        }
    }

    #[test]
    fn identity_regressor_changes_nothing() {
        let (frame, h_gt) = test_setup();
        let mut rng = DetRng::seed_from_u64(101);
        let h_init = make_initial(&h_gt, &random_transform(&mut rng, 0.1, 0.2));
        let registry = ExpertRegistry::new(vec![
            (
                DecalibRange::new(1.5, 20.0).unwrap(),
                Box::new(IdentityRegressor) as Box<dyn Regressor>,
            ),
            (
                DecalibRange::new(0.5, 5.0).unwrap(),
                Box::new(IdentityRegressor),
            ),
        ])
        .unwrap();
        let est = cascade(
            &registry,
            &h_init,
            &frame.cloud,
            &frame.rgb,
            &frame.intrinsics,
            5,
            3,
            None,
        )
        .unwrap();
        assert!(est.h.max_abs_diff(&h_init) < 1e-12);
        assert_eq!(est.stages, 2);
    }

    #[test]
    fn oracle_cascade_is_a_fixed_point() {
        let (frame, h_gt) = test_setup();
        let mut rng = DetRng::seed_from_u64(102);
        let range = DecalibRange::new(1.5, 20.0).unwrap();
        let registry = ExpertRegistry::new(vec![
            (
                range,
                Box::new(OracleRegressor { h_gt }) as Box<dyn Regressor>,
            ),
            (
                DecalibRange::new(0.5, 5.0).unwrap(),
                Box::new(OracleRegressor { h_gt }),
            ),
        ])
        .unwrap();
        for _ in 0..10 {
            let phi = sample_decalib(&mut rng, &range);
            let h_init = make_initial(&h_gt, &phi);
            let est = cascade(
                &registry,
                &h_init,
                &frame.cloud,
                &frame.rgb,
                &frame.intrinsics,
                5,
                1,
                Some(&h_gt),
            )
            .unwrap();
            // Exact after stage 1, stable thereafter.
            assert!(est.per_stage[0].h.max_abs_diff(&h_gt) < 1e-12);
            assert!(est.h.max_abs_diff(&h_gt) < 1e-12);
            let m = est.per_stage[1].metrics.unwrap();
            assert!(m.mean_angle_err_deg < 1e-9);
        }
    }

    #[test]
    fn registry_rejects_non_decreasing_ranges() {
        let make = |x, y| {
            (
                DecalibRange::new(x, y).unwrap(),
                Box::new(IdentityRegressor) as Box<dyn Regressor>,
            )
        };
        assert!(ExpertRegistry::new(vec![make(1.5, 20.0), make(1.5, 10.0)]).is_err());
        assert!(ExpertRegistry::new(vec![make(1.0, 10.0), make(1.5, 5.0)]).is_err());
        assert!(ExpertRegistry::new(vec![make(1.5, 20.0), make(1.0, 10.0)]).is_ok());
        assert!(ExpertRegistry::new(vec![]).is_err());
    }

    #[test]
    fn empty_projection_still_refines() {
        let (frame, h_gt) = test_setup();
        // A calibration pointing the camera away from every point.
        let broken = make_initial(
            &h_gt,
            &crate::geometry::euler_to_transform(&crate::geometry::EulerPose::new(
                3.0, 0.0, 0.0,
                [0.0; 3],
            )),
        );
        let (rgb_adj_img, _) = crate::projection::mean_adjust(&frame.rgb);
        let rgb_adj = Model::to_input(&rgb_adj_img).unwrap();
        let sparse = crate::projection::project_points(&frame.cloud, &broken, &frame.intrinsics);
        assert_eq!(sparse.occupancy(), 0);
        let oracle = OracleRegressor { h_gt };
        let step =
            refine_once(&oracle, &broken, &frame.cloud, &rgb_adj, &frame.intrinsics, 5).unwrap();
        assert!(step.h.max_abs_diff(&h_gt) < 1e-12);
    }
}
