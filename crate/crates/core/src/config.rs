//! Run configuration: one flat TOML file, unknown keys rejected.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Environment variables are never consulted.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::document::{AblationFlags, DEFAULT_GROUP_N};
use crate::enhance::{EnhanceConfig, Pass};
use crate::event::VideoMeta;
use crate::grid::{SampleRate, DEFAULT_SAMPLE_FPS};
use crate::ingest::InputChannel;
use crate::timeline::DEFAULT_DEDUPE_THRESHOLD;
use crate::tracker::TrackerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    duration: f64,
    fps: f64,
    width: u32,
    height: u32,
    title: Option<String>,
    #[serde(default)]
    source_uri: String,

    #[serde(default)]
    streams: Vec<String>,
    vocabulary: Option<String>,
    output_dir: Option<String>,

    sample_fps: Option<f64>,
    group_n: Option<i64>,
    dedupe: Option<bool>,
    dedupe_threshold: Option<f64>,

    tau_high: Option<f64>,
    tau_low: Option<f64>,
    iou_match: Option<f64>,
    patience: Option<u32>,
    min_hits: Option<u32>,

    ocr_asr_sim: Option<f64>,
    token_edit_max: Option<usize>,
    tag_conf_min: Option<f64>,
    det_suppress_conf: Option<f64>,
    min_token_len: Option<usize>,
    passes: Option<Vec<Pass>>,

    asr: Option<bool>,
    ocr: Option<bool>,
    tags: Option<bool>,
    captions: Option<bool>,
    tracking: Option<bool>,

    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub meta: VideoMeta,
    pub inputs: Vec<InputChannel>,
    pub vocabulary: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub sample_rate: SampleRate,
    pub group_n: usize,
    /// `None` disables same-modality deduplication.
    pub dedupe_threshold: Option<f64>,
    pub tracker: TrackerConfig,
    pub enhance: EnhanceConfig,
    pub flags: AblationFlags,
    pub seed: u64,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_owned()
    } else {
        base.join(path)
    }
}

fn resolve_channel(base: &Path, spec: &str) -> InputChannel {
    match InputChannel::parse(spec) {
        InputChannel::File(p) => InputChannel::File(resolve(base, &p.to_string_lossy())),
        #[cfg(unix)]
        InputChannel::UnixSocket(p) => InputChannel::UnixSocket(resolve(base, &p.to_string_lossy())),
        other => other,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let invalid = |m: String| ConfigError::Invalid(m);

        let meta = VideoMeta {
            duration: raw.duration,
            fps: raw.fps,
            width: raw.width,
            height: raw.height,
            title: raw.title,
            source_uri: raw.source_uri,
        };
        meta.validate().map_err(|e| invalid(e.to_string()))?;

        let sample_fps = raw.sample_fps.unwrap_or(DEFAULT_SAMPLE_FPS);
        if !(sample_fps.is_finite() && sample_fps > 0.0) {
            return Err(invalid(format!("NONPOSITIVE_RATE: sample_fps must be > 0, got {sample_fps}")));
        }

        let group_n = raw.group_n.unwrap_or(DEFAULT_GROUP_N as i64);
        if group_n < 1 {
            return Err(invalid(format!("GROUP_SIZE_NONPOSITIVE: group_n must be >= 1, got {group_n}")));
        }

        let threshold = raw.dedupe_threshold.unwrap_or(DEFAULT_DEDUPE_THRESHOLD);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(invalid(format!("dedupe_threshold must lie in [0, 1], got {threshold}")));
        }

        let td = TrackerConfig::default();
        let tracker = TrackerConfig {
            tau_high: raw.tau_high.unwrap_or(td.tau_high),
            tau_low: raw.tau_low.unwrap_or(td.tau_low),
            iou_match: raw.iou_match.unwrap_or(td.iou_match),
            patience: raw.patience.unwrap_or(td.patience),
            min_hits: raw.min_hits.unwrap_or(td.min_hits),
        };
        tracker.validate().map_err(|e| invalid(e.to_string()))?;

        let ed = EnhanceConfig::default();
        let enhance = EnhanceConfig {
            ocr_asr_sim: raw.ocr_asr_sim.unwrap_or(ed.ocr_asr_sim),
            token_edit_max: raw.token_edit_max.unwrap_or(ed.token_edit_max),
            tag_conf_min: raw.tag_conf_min.unwrap_or(ed.tag_conf_min),
            det_suppress_conf: raw.det_suppress_conf.unwrap_or(ed.det_suppress_conf),
            min_token_len: raw.min_token_len.unwrap_or(ed.min_token_len),
            enabled_passes: raw.passes.map(|p| p.into_iter().collect::<BTreeSet<_>>()).unwrap_or(ed.enabled_passes),
        };
        enhance.validate().map_err(|e| invalid(e.to_string()))?;

        let fd = AblationFlags::default();
        let flags = AblationFlags {
            asr: raw.asr.unwrap_or(fd.asr),
            ocr: raw.ocr.unwrap_or(fd.ocr),
            tags: raw.tags.unwrap_or(fd.tags),
            captions: raw.captions.unwrap_or(fd.captions),
            tracking: raw.tracking.unwrap_or(fd.tracking),
        };

        Ok(RunConfig {
            meta,
            inputs: raw.streams.iter().map(|s| resolve_channel(base, s)).collect(),
            vocabulary: raw.vocabulary.map(|v| resolve(base, &v)),
            output_dir: resolve(base, raw.output_dir.as_deref().unwrap_or("out")),
            sample_rate: SampleRate::Fps(sample_fps),
            group_n: group_n as usize,
            dedupe_threshold: raw.dedupe.unwrap_or(true).then_some(threshold),
            tracker,
            enhance,
            flags,
            seed: raw.seed.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "duration = 2.0\nfps = 25.0\nwidth = 640\nheight = 480\n";

    #[test]
    fn defaults_apply() {
        let c = RunConfig::from_toml(MINIMAL, Path::new("/cfg")).unwrap();
        assert_eq!(c.sample_rate.fps(), 20.0);
        assert_eq!(c.group_n, 20);
        assert_eq!(c.dedupe_threshold, Some(0.9));
        assert_eq!(c.tracker, TrackerConfig::default());
        assert_eq!(c.enhance, EnhanceConfig::default());
        assert_eq!(c.flags, AblationFlags::default());
        assert_eq!(c.output_dir, PathBuf::from("/cfg/out"));
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}colour = 3\n"), Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn zero_rate_rejected() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}sample_fps = 0\n"), Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("NONPOSITIVE_RATE"));
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let text = format!("{MINIMAL}streams = [\"a.jsonl\", \"-\", \"tcp:127.0.0.1:7\"]\nvocabulary = \"v.tsv\"\n");
        let c = RunConfig::from_toml(&text, Path::new("/data")).unwrap();
        assert_eq!(
            c.inputs,
            vec![
                InputChannel::File("/data/a.jsonl".into()),
                InputChannel::Stdin,
                InputChannel::Tcp("127.0.0.1:7".into())
            ]
        );
        assert_eq!(c.vocabulary, Some(PathBuf::from("/data/v.tsv")));
    }

    #[test]
    fn passes_and_flags() {
        let text = format!("{MINIMAL}passes = [\"DET_FILTER\"]\nasr = false\ndedupe = false\n");
        let c = RunConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(c.enhance.enabled_passes, [Pass::DetFilter].into());
        assert!(!c.flags.asr);
        assert_eq!(c.dedupe_threshold, None);
    }
}
