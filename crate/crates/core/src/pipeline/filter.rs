//! Temporal filtering of per-frame calibration estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euler_to_transform, transform_to_euler, EulerPose, RigidTransform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    Median,
    MovingAverage,
}

/// Filter horizon: a fixed frame count or everything seen so far.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Frames(usize),
    WholeSequence,
}

/// Aggregates estimates per component (yaw, pitch, roll, tx, ty, tz).
///
/// Component-wise statistics are valid here because decalibrations stay far
/// from the angle wrap-around; this filter is not meant for rotations near
/// +-pi.
#[derive(Clone, Debug)]
pub struct TemporalFilter {
    mode: FilterMode,
    window: Window,
    history: Vec<[f64; 6]>,
}

impl TemporalFilter {
    pub fn new(mode: FilterMode, window: Window) -> Result<Self> {
        if let Window::Frames(0) = window {
            return Err(Error::InvalidConfig(
                "filter window must cover at least one frame".to_string(),
            ));
        }
        Ok(TemporalFilter {
            mode,
            window,
            history: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Appends an estimate and returns the filtered transform over the
    /// current window.
    pub fn update(&mut self, estimate: &RigidTransform) -> RigidTransform {
        let e = transform_to_euler(estimate);
        self.history.push([
            e.yaw,
            e.pitch,
            e.roll,
            e.translation[0],
            e.translation[1],
            e.translation[2],
        ]);
        let start = match self.window {
            Window::WholeSequence => 0,
            Window::Frames(n) => self.history.len().saturating_sub(n),
        };
        let slice = &self.history[start..];
        let mut components = [0.0f64; 6];
        for (i, comp) in components.iter_mut().enumerate() {
            let mut values: Vec<f64> = slice.iter().map(|h| h[i]).collect();
            *comp = match self.mode {
                FilterMode::MovingAverage => values.iter().sum::<f64>() / values.len() as f64,
                FilterMode::Median => {
                    values.sort_by(|a, b| a.partial_cmp(b).expect("finite components"));
                    let n = values.len();
                    if n % 2 == 1 {
                        values[n / 2]
                    } else {
                        0.5 * (values[n / 2 - 1] + values[n / 2])
                    }
                }
            };
        }
        euler_to_transform(&EulerPose::new(
            components[0],
            components[1],
            components[2],
            [components[3], components[4], components[5]],
        ))
    }
}
