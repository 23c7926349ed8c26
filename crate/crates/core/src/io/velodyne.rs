//! Velodyne raw binary scans: little-endian `f32` records of
//! `x, y, z, reflectance`, 16 bytes per point.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::projection::PointCloud;

const RECORD_BYTES: usize = 16;

pub fn read_velodyne(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() % RECORD_BYTES != 0 {
        let offset = (bytes.len() / RECORD_BYTES * RECORD_BYTES) as u64;
        return Err(Error::TruncatedFile {
            path: path.display().to_string(),
            len: bytes.len() as u64,
            record: RECORD_BYTES as u64,
            offset,
        });
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(RECORD_BYTES) {
        let x = LittleEndian::read_f32(&rec[0..4]) as f64;
        let y = LittleEndian::read_f32(&rec[4..8]) as f64;
        let z = LittleEndian::read_f32(&rec[8..12]) as f64;
        let r = LittleEndian::read_f32(&rec[12..16]) as f64;
        points.push(Vector3::new(x, y, z));
        intensity.push(r);
    }
    Ok(PointCloud::with_intensity(points, intensity))
}

/// Writes a cloud in the same 16-byte record format (reflectance 0 when the
/// cloud carries no intensity). Coordinates are narrowed to `f32`.
pub fn write_velodyne(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(cloud.len() * RECORD_BYTES);
    let mut rec = [0u8; RECORD_BYTES];
    for (i, p) in cloud.points.iter().enumerate() {
        let r = cloud.intensity.as_ref().map_or(0.0, |v| v[i]);
        LittleEndian::write_f32(&mut rec[0..4], p.x as f32);
        LittleEndian::write_f32(&mut rec[4..8], p.y as f32);
        LittleEndian::write_f32(&mut rec[8..12], p.z as f32);
        LittleEndian::write_f32(&mut rec[12..16], r as f32);
        bytes.extend_from_slice(&rec);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}
