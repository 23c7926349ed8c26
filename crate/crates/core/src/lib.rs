//! LiDAR-camera extrinsic calibration by learned decalibration regression.
//!
//! The crate covers the full loop: rigid-transform algebra with Euler,
//! quaternion and dual-quaternion pose representations ([`geometry`]),
//! pinhole projection of LiDAR clouds into sparse inverse-depth images
//! ([`projection`]), random decalibration sampling ([`sampling`]), a
//! reproducible synthetic scene generator with a simulated spinning LiDAR
//! ([`scene`]), a dense f64 tensor engine with the layers and solver the
//! regressor needs ([`tensor`]), the two-stream convolutional regressor and
//! its trainer ([`model`]), the iterative expert cascade with temporal
//! filtering ([`pipeline`]), and file formats plus dataset readers ([`io`]).
//!
//! Everything is deterministic: all randomness flows through seeded
//! [`rng::DetRng`] streams, and identical configs reproduce identical
//! samples, weights, and metric records byte for byte.

pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod projection;
pub mod rng;
pub mod sampling;
pub mod scene;
pub mod tensor;

pub use error::{Error, Result};
