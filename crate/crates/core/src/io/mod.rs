//! File formats, dataset readers, and artifact writers.
//!
//! - Velodyne binary scans: 16 bytes per point, little-endian `f32`
//!   `x, y, z, reflectance`.
//! - KITTI-raw calibration text files, re-orthonormalized on load.
//! - Weight checkpoints: versioned binary container, see [`checkpoint`].
//! - Project configuration: TOML with full defaults, see [`config`].
//! - Depth-over-RGB overlay images (lossless PNG) and line-delimited JSON
//!   metric records.

pub mod checkpoint;
pub mod config;
pub mod kitti;
pub mod overlay;
pub mod records;
pub mod velodyne;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use config::ProjectConfig;
pub use kitti::{read_kitti_calib, KittiCalib, KittiFrame};
pub use overlay::emit_overlay;
pub use velodyne::{read_velodyne, write_velodyne};
