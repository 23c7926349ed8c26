//! LiDAR-to-camera projection and depth-image preparation.
//!
//! Points are mapped into the camera frame, projected through a pinhole
//! model, and stored as a sparse inverse-depth image (zero = no
//! measurement). Collisions keep the nearest point. The sparse image is
//! densified by max pooling and the network inputs are mean adjusted.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

/// Near-plane clip: camera-frame points with `z <= Z_MIN` are discarded.
pub const Z_MIN: f64 = 0.1;

/// Pinhole intrinsics (pixels).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(Error::InvalidConfig(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }
}

/// Points in the sensor frame, with optional per-point intensity in [0, 1].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub intensity: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        PointCloud {
            points,
            intensity: None,
        }
    }

    pub fn with_intensity(points: Vec<Vector3<f64>>, intensity: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), intensity.len());
        PointCloud {
            points,
            intensity: Some(intensity),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Image-shaped grid of inverse depth (1/meters); zero marks "no
/// measurement". Stored nonzero values are always positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SparseDepthMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        SparseDepthMap {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, inv_depth: f64) {
        self.values[v * self.width + u] = inv_depth;
    }

    /// Number of pixels carrying a measurement.
    pub fn occupancy(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    /// One-channel image tensor view of the map.
    pub fn to_image(&self) -> ImageTensor {
        ImageTensor {
            channels: 1,
            height: self.height,
            width: self.width,
            data: self.values.clone(),
            kind: ImageKind::Depth,
        }
    }
}

/// Semantic tag for image tensors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImageKind {
    Rgb,
    Depth,
}

/// Channels-first image of real values.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
    pub kind: ImageKind,
}

impl ImageTensor {
    pub fn zeros(channels: usize, height: usize, width: usize, kind: ImageKind) -> Self {
        ImageTensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
            kind,
        }
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f64) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Projects a point cloud through `h` (sensor frame to camera frame) and the
/// pinhole `k`, storing inverse depth at the nearest integer pixel.
/// Collisions keep the nearest point (largest inverse depth).
pub fn project_points(
    cloud: &PointCloud,
    h: &RigidTransform,
    k: &CameraIntrinsics,
) -> SparseDepthMap {
    let mut map = SparseDepthMap::zeros(k.width, k.height);
    let (w, hgt) = (k.width as i64, k.height as i64);
    for p in &cloud.points {
        let pc = h.apply_point(p);
        if pc.z <= Z_MIN {
            continue;
        }
        let u = (k.fx * pc.x / pc.z + k.cx).round() as i64;
        let v = (k.fy * pc.y / pc.z + k.cy).round() as i64;
        if u < 0 || u >= w || v < 0 || v >= hgt {
            continue;
        }
        let idx = v as usize * k.width + u as usize;
        let inv = 1.0 / pc.z;
        if inv > map.values[idx] {
            map.values[idx] = inv;
        }
    }
    map
}

/// Dilates the sparse map: each output pixel takes the maximum over the
/// `k x k` input neighborhood (stride 1, zero border). `k` must be odd.
pub fn maxpool_densify(map: &SparseDepthMap, k: usize) -> Result<SparseDepthMap> {
    if k % 2 == 0 || k == 0 {
        return Err(Error::EvenKernel(k));
    }
    if k == 1 {
        return Ok(map.clone());
    }
    let r = (k / 2) as i64;
    let (w, h) = (map.width as i64, map.height as i64);
    let mut out = SparseDepthMap::zeros(map.width, map.height);
    for y in 0..h {
        for x in 0..w {
            let mut best = 0.0f64;
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                let row = (yy * w) as usize;
                let x0 = (x - r).max(0) as usize;
                let x1 = (x + r).min(w - 1) as usize;
                for xx in x0..=x1 {
                    let v = map.values[row + xx];
                    if v > best {
                        best = v;
                    }
                }
            }
            out.values[(y * w + x) as usize] = best;
        }
    }
    Ok(out)
}

/// Subtracts the per-channel mean; returns the adjusted copy and the means
/// that were removed.
pub fn mean_adjust(img: &ImageTensor) -> (ImageTensor, Vec<f64>) {
    let plane = img.height * img.width;
    let mut out = img.clone();
    let mut means = Vec::with_capacity(img.channels);
    for c in 0..img.channels {
        let slice = &mut out.data[c * plane..(c + 1) * plane];
        let mean = slice.iter().sum::<f64>() / plane as f64;
        for v in slice.iter_mut() {
            *v -= mean;
        }
        means.push(mean);
    }
    (out, means)
}
