//! KITTI-raw calibration parsing and frame loading.
//!
//! The rectified projection `P_rect = K [I | b]` is split into intrinsics
//! `K` and a translation `b = K^-1 p_4` that is absorbed into the extrinsic
//! chain: `H = Trans(b) * R_rect * Tr_velo_to_cam`, mapping Velodyne points
//! into the rectified camera frame that `K` projects. Rotations in the text
//! files carry limited precision and are re-orthonormalized by polar
//! decomposition on load.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;
use crate::projection::{CameraIntrinsics, ImageKind, ImageTensor, PointCloud};

/// Parsed calibration: rectified intrinsics plus the Velodyne-to-camera
/// extrinsic.
#[derive(Clone, Debug)]
pub struct KittiCalib {
    pub intrinsics: CameraIntrinsics,
    pub velo_to_cam: RigidTransform,
}

fn parse_kv_file(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut map = HashMap::new();
    for line in text.lines() {
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let values: std::result::Result<Vec<f64>, _> =
            rest.split_whitespace().map(str::parse::<f64>).collect();
        if let Ok(values) = values {
            map.insert(key.trim().to_string(), values);
        }
    }
    Ok(map)
}

fn get<'a>(
    map: &'a HashMap<String, Vec<f64>>,
    key: &str,
    len: usize,
    path: &Path,
) -> Result<&'a [f64]> {
    let vals = map.get(key).ok_or_else(|| Error::MissingCalibKey {
        key: key.to_string(),
        path: path.display().to_string(),
    })?;
    if vals.len() != len {
        return Err(Error::MalformedCalib {
            key: key.to_string(),
            path: path.display().to_string(),
            detail: format!("expected {len} values, got {}", vals.len()),
        });
    }
    Ok(vals)
}

/// Reads `calib_cam_to_cam.txt` and `calib_velo_to_cam.txt` for one
/// rectified camera.
pub fn read_kitti_calib(
    cam_to_cam: &Path,
    velo_to_cam: &Path,
    cam_index: usize,
) -> Result<KittiCalib> {
    let cam_map = parse_kv_file(cam_to_cam)?;
    let velo_map = parse_kv_file(velo_to_cam)?;

    let p_key = format!("P_rect_{cam_index:02}");
    let p = get(&cam_map, &p_key, 12, cam_to_cam)?;
    let s_key = format!("S_rect_{cam_index:02}");
    let s = get(&cam_map, &s_key, 2, cam_to_cam)?;
    let r_rect = get(&cam_map, "R_rect_00", 9, cam_to_cam)?;
    let r = get(&velo_map, "R", 9, velo_to_cam)?;
    let t = get(&velo_map, "T", 3, velo_to_cam)?;

    let (fx, fy, cx, cy) = (p[0], p[5], p[2], p[6]);
    if fx <= 0.0 || fy <= 0.0 {
        return Err(Error::MalformedCalib {
            key: p_key,
            path: cam_to_cam.display().to_string(),
            detail: format!("non-positive focal lengths {fx}, {fy}"),
        });
    }
    let intrinsics =
        CameraIntrinsics::new(fx, fy, cx, cy, s[0].round() as usize, s[1].round() as usize)?;

    // b = K^-1 p4: the rectified projection's translation column expressed
    // in camera coordinates.
    let b = Vector3::new((p[3] - cx * p[11]) / fx, (p[7] - cy * p[11]) / fy, p[11]);

    let r_velo = Matrix3::from_row_slice(r);
    let t_velo = Vector3::new(t[0], t[1], t[2]);
    let velo = RigidTransform::from_parts_orthonormalized(r_velo, t_velo)?;
    let rect =
        RigidTransform::from_parts_orthonormalized(Matrix3::from_row_slice(r_rect), Vector3::zeros())?;
    let shift = RigidTransform::from_translation(b);
    Ok(KittiCalib {
        intrinsics,
        velo_to_cam: shift.compose(&rect).compose(&velo),
    })
}

/// One KITTI-raw frame: paths plus the calibration that applies to them.
#[derive(Clone, Debug)]
pub struct KittiFrame {
    pub image_path: PathBuf,
    pub scan_path: PathBuf,
    pub calib: KittiCalib,
}

impl KittiFrame {
    /// Loads the RGB image (scaled to [0, 1]) and the Velodyne scan.
    pub fn load(&self) -> Result<(ImageTensor, PointCloud)> {
        let img = image::open(&self.image_path)
            .map_err(|e| Error::Other(format!("{}: {e}", self.image_path.display())))?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut rgb = ImageTensor::zeros(3, h, w, ImageKind::Rgb);
        for (x, y, px) in img.enumerate_pixels() {
            for c in 0..3 {
                rgb.set(c, y as usize, x as usize, px.0[c] as f64 / 255.0);
            }
        }
        let cloud = super::velodyne::read_velodyne(&self.scan_path)?;
        Ok((rgb, cloud))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_transform, transform_to_euler};
    use crate::rng::DetRng;
    use std::fmt::Write as _;

    fn write_calib_pair(
        dir: &Path,
        k: &CameraIntrinsics,
        p4: [f64; 3],
        r_rect: &Matrix3<f64>,
        velo: &RigidTransform,
    ) -> (PathBuf, PathBuf) {
        let mut cam = String::new();
        write!(
            cam,
            "S_rect_02: {} {}\nR_rect_00:",
            k.width as f64, k.height as f64
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                write!(cam, " {:.12e}", r_rect[(i, j)]).unwrap();
            }
        }
        write!(
            cam,
            "\nP_rect_02: {:.12e} 0.0 {:.12e} {:.12e} 0.0 {:.12e} {:.12e} {:.12e} 0.0 0.0 1.0 {:.12e}\n",
            k.fx, k.cx, p4[0], k.fy, k.cy, p4[1], p4[2]
        )
        .unwrap();
        let mut vc = String::new();
        vc.push_str("calib_time: 09-Jan-2012 13:57:47\nR:");
        for i in 0..3 {
            for j in 0..3 {
                write!(vc, " {:.12e}", velo.rotation()[(i, j)]).unwrap();
            }
        }
        vc.push_str("\nT:");
        for i in 0..3 {
            write!(vc, " {:.12e}", velo.translation()[i]).unwrap();
        }
        vc.push('\n');
        let cam_path = dir.join("calib_cam_to_cam.txt");
        let velo_path = dir.join("calib_velo_to_cam.txt");
        fs::write(&cam_path, cam).unwrap();
        fs::write(&velo_path, vc).unwrap();
        (cam_path, velo_path)
    }

    #[test]
    fn identity_extrinsics_parse_to_identity() {
        let dir = tempfile::tempdir().unwrap();
        let k = CameraIntrinsics::new(700.0, 710.0, 600.0, 180.0, 1242, 375).unwrap();
        let (cam, velo) = write_calib_pair(
            dir.path(),
            &k,
            [0.0; 3],
            &Matrix3::identity(),
            &RigidTransform::identity(),
        );
        let calib = read_kitti_calib(&cam, &velo, 2).unwrap();
        assert!(calib
            .velo_to_cam
            .max_abs_diff(&RigidTransform::identity())
            < 1e-12);
        assert_eq!(calib.intrinsics.width, 1242);
        assert!((calib.intrinsics.fx - 700.0).abs() < 1e-9);
    }

    #[test]
    fn roundtrip_is_lossless_at_stated_precision() {
        let mut rng = DetRng::seed_from_u64(90);
        let dir = tempfile::tempdir().unwrap();
        let k = CameraIntrinsics::new(721.5377, 721.5377, 609.5593, 172.854, 1242, 375).unwrap();
        for _ in 0..20 {
            let velo = random_transform(&mut rng, 1.5, 2.0);
            let rect = random_transform(&mut rng, 0.02, 0.0);
            // P_rect fourth column = K * b.
            let b = Vector3::new(
                rng.uniform_in(-0.5, 0.5),
                rng.uniform_in(-0.05, 0.05),
                rng.uniform_in(-0.05, 0.05),
            );
            let p4 = [
                k.fx * b.x + k.cx * b.z,
                k.fy * b.y + k.cy * b.z,
                b.z,
            ];
            let (cam, velo_path) = write_calib_pair(dir.path(), &k, p4, rect.rotation(), &velo);
            let calib = read_kitti_calib(&cam, &velo_path, 2).unwrap();
            let expected = RigidTransform::from_translation(b)
                .compose(&rect)
                .compose(&velo);
            assert!(
                calib.velo_to_cam.max_abs_diff(&expected) < 1e-9,
                "diff {:.3e}",
                calib.velo_to_cam.max_abs_diff(&expected)
            );
        }
    }

    #[test]
    fn limited_precision_rotation_is_orthonormalized() {
        let mut rng = DetRng::seed_from_u64(91);
        let dir = tempfile::tempdir().unwrap();
        let k = CameraIntrinsics::new(700.0, 700.0, 620.0, 187.0, 1242, 375).unwrap();
        let velo = random_transform(&mut rng, 1.5, 2.0);
        // Corrupt the rotation the way 1e-4-precision text would.
        let mut noisy = *velo.rotation();
        for i in 0..3 {
            for j in 0..3 {
                noisy[(i, j)] += rng.uniform_in(-5e-5, 5e-5);
            }
        }
        let noisy_t = RigidTransform::from_parts_orthonormalized(noisy, *velo.translation()).unwrap();
        let (cam, velo_path) =
            write_calib_pair(dir.path(), &k, [0.0; 3], &Matrix3::identity(), &noisy_t);
        let calib = read_kitti_calib(&cam, &velo_path, 2).unwrap();
        // Orthonormal within much better than the 1e-4 the file carries.
        let gram = calib.velo_to_cam.rotation().transpose() * calib.velo_to_cam.rotation();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - target).abs() < 1e-12);
            }
        }
        // And still close to the original.
        let e = transform_to_euler(&velo.inverse().compose(&calib.velo_to_cam));
        assert!(e.yaw.abs() < 1e-3);
    }

    #[test]
    fn missing_key_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cam = dir.path().join("calib_cam_to_cam.txt");
        let velo = dir.path().join("calib_velo_to_cam.txt");
        fs::write(&cam, "S_rect_02: 100 100\n").unwrap();
        fs::write(&velo, "R: 1 0 0 0 1 0 0 0 1\nT: 0 0 0\n").unwrap();
        match read_kitti_calib(&cam, &velo, 2).unwrap_err() {
            Error::MissingCalibKey { key, .. } => assert_eq!(key, "P_rect_02"),
            other => panic!("unexpected error {other}"),
        }
    }
}
