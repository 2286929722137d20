use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Thresholds for turning a play record into the three play labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    /// Seconds at or below which a view counts as a skip.
    pub skip_threshold: f64,
    /// Upper bound on the completion ratio.
    pub cmpl_cap: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            skip_threshold: 3.0,
            cmpl_cap: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayLabels {
    pub cmpl: f64,
    pub finish: f64,
    pub skip: f64,
}

/// Completion ratio (capped), finish flag and quick-skip flag of one view.
pub fn derive_labels(watch_time: f64, video_length: f64, skip_threshold: f64, cmpl_cap: f64) -> Result<PlayLabels> {
    if !(video_length > 0.0) || !video_length.is_finite() {
        bail!(Data, "video length must be positive, got {}", video_length);
    }
    if !(watch_time >= 0.0) || !watch_time.is_finite() {
        bail!(Data, "watch time must be non-negative, got {}", watch_time);
    }
    Ok(PlayLabels {
        cmpl: (watch_time / video_length).min(cmpl_cap),
        finish: if watch_time >= video_length { 1.0 } else { 0.0 },
        skip: if watch_time <= skip_threshold { 1.0 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        let l = derive_labels(30.0, 30.0, 3.0, 5.0).unwrap();
        assert_eq!((l.cmpl, l.finish, l.skip), (1.0, 1.0, 0.0));
        let l = derive_labels(2.0, 60.0, 3.0, 5.0).unwrap();
        assert_eq!((l.cmpl, l.finish, l.skip), (2.0 / 60.0, 0.0, 1.0));
        let l = derive_labels(3.0, 60.0, 3.0, 5.0).unwrap();
        assert_eq!(l.skip, 1.0);
        let l = derive_labels(200.0, 20.0, 3.0, 5.0).unwrap();
        assert_eq!((l.cmpl, l.finish, l.skip), (5.0, 1.0, 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(derive_labels(1.0, 0.0, 3.0, 5.0).is_err());
        assert!(derive_labels(-1.0, 10.0, 3.0, 5.0).is_err());
        assert!(derive_labels(f64::NAN, 10.0, 3.0, 5.0).is_err());
    }
}
