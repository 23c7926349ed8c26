//! Line-delimited JSON metric records.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PoseSpec;
use crate::pipeline::MetricRecord;

/// One evaluated frame of a sequence run: per-stage residuals, the raw and
/// filtered estimates, and their errors against ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub run: u64,
    pub frame: u64,
    pub stage_rot_err_deg: Vec<f64>,
    pub estimate: PoseSpec,
    pub filtered: PoseSpec,
    pub error: MetricRecord,
    pub filtered_error: MetricRecord,
}

/// Aggregate of one run (one fixed decalibration over a sequence).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub frames: u64,
    pub per_frame_median_rot_deg: f64,
    pub per_frame_median_trans_m: f64,
    pub filtered_error: MetricRecord,
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| Error::Other(e.to_string()))?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn append_jsonl<T: Serialize>(file: &mut fs::File, item: &T) -> Result<()> {
    let mut line = serde_json::to_vec(item).map_err(|e| Error::Other(e.to_string()))?;
    line.push(b'\n');
    file.write_all(&line)
        .map_err(|e| Error::io("jsonl stream".to_string(), e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Other(format!("jsonl: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let runs = vec![
            RunRecord {
                run: 0,
                frames: 10,
                per_frame_median_rot_deg: 0.5,
                per_frame_median_trans_m: 0.01,
                filtered_error: MetricRecord {
                    rot_err_deg: [0.1, 0.2, 0.3],
                    trans_err_m: [0.01, 0.02, 0.03],
                    mean_angle_err_deg: 0.2,
                    mean_trans_err_m: 0.02,
                    rot_angle_deg: 0.4,
                },
            },
            RunRecord {
                run: 1,
                frames: 10,
                per_frame_median_rot_deg: 0.25,
                per_frame_median_trans_m: 0.005,
                filtered_error: MetricRecord {
                    rot_err_deg: [0.0; 3],
                    trans_err_m: [0.0; 3],
                    mean_angle_err_deg: 0.0,
                    mean_trans_err_m: 0.0,
                    rot_angle_deg: 0.0,
                },
            },
        ];
        write_jsonl(&a, &runs).unwrap();
        write_jsonl(&b, &runs).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let back: Vec<RunRecord> = read_jsonl(&a).unwrap();
        assert_eq!(back, runs);
    }
}
