//! Fixed-rate frame sampling grid.

use thiserror::Error;

use crate::event::{TimeSpan, VideoMeta};

/// Default sampling rate in frames per second, matching real-time tracker
/// throughput.
pub const DEFAULT_SAMPLE_FPS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SampleRate {
    #[default]
    Default,
    Fps(f64),
}

impl SampleRate {
    pub fn fps(self) -> f64 {
        match self {
            SampleRate::Default => DEFAULT_SAMPLE_FPS,
            SampleRate::Fps(f) => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("NONPOSITIVE_RATE: sample rate must be finite and > 0, got {0}")]
    NonpositiveRate(String),
}

/// Frame timestamps `k / fps` strictly below the video duration.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    timestamps: Vec<f64>,
    fps: f64,
    duration: f64,
}

impl FrameGrid {
    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn interval(&self) -> f64 {
        1.0 / self.fps
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Half-open span of frame `k`; the last one ends at the video duration.
    pub fn segment_span(&self, k: usize) -> TimeSpan {
        let end = self.timestamps.get(k + 1).copied().unwrap_or(self.duration);
        TimeSpan::new(self.timestamps[k], end)
    }

    /// Index of the frame whose half-open span holds `t`, clamped to the
    /// last frame for `t >= duration`. `None` on an empty grid or negative `t`.
    pub fn frame_of(&self, t: f64) -> Option<usize> {
        if self.timestamps.is_empty() || t < 0.0 || t.is_nan() {
            return None;
        }
        let k = self.timestamps.partition_point(|&ts| ts <= t);
        Some(k.saturating_sub(1))
    }
}

pub fn sample_frame_grid(meta: &VideoMeta, rate: SampleRate) -> Result<FrameGrid, GridError> {
    let fps = rate.fps();
    if !(fps.is_finite() && fps > 0.0) {
        return Err(GridError::NonpositiveRate(fps.to_string()));
    }
    let duration = meta.duration;
    let ts = |k: usize| k as f64 / fps;

    let mut n = (duration * fps).ceil().max(0.0) as usize;
    // The product may round across an integer boundary; settle on the exact count.
    while n > 0 && ts(n - 1) >= duration {
        n -= 1;
    }
    while ts(n) < duration {
        n += 1;
    }

    Ok(FrameGrid { timestamps: (0..n).map(ts).collect(), fps, duration })
}
