//! End-to-end flow: ablate → track → align → dedupe → enhance → compose.

use std::fmt;

use thiserror::Error;

use crate::config::RunConfig;
use crate::document::{compose, AblationFlags, ComposedDocument, DEFAULT_GROUP_N};
use crate::enhance::{enhance, EnhanceConfig, EnhanceReport};
use crate::grid::{sample_frame_grid, SampleRate};
use crate::ingest::EventStream;
use crate::timeline::{build_timeline, Timeline, DEFAULT_DEDUPE_THRESHOLD};
use crate::tracker::{track_stream, Track, TrackerConfig};
use crate::vocab::TagVocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Vocabulary,
    Grid,
    Track,
    Align,
    Enhance,
    Compose,
    Write,
    Extract,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Vocabulary => "vocabulary",
            Stage::Grid => "grid",
            Stage::Track => "track",
            Stage::Align => "align",
            Stage::Enhance => "enhance",
            Stage::Compose => "compose",
            Stage::Write => "write",
            Stage::Extract => "extract",
        })
    }
}

#[derive(Debug, Error)]
#[error("stage {stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, err: impl fmt::Display) -> Self {
        Self { stage, message: err.to_string() }
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub sample_rate: SampleRate,
    pub tracker: TrackerConfig,
    pub enhance: EnhanceConfig,
    pub group_n: usize,
    pub dedupe_threshold: Option<f64>,
    pub vocabulary: TagVocabulary,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            sample_rate: SampleRate::Default,
            tracker: TrackerConfig::default(),
            enhance: EnhanceConfig::default(),
            group_n: DEFAULT_GROUP_N,
            dedupe_threshold: Some(DEFAULT_DEDUPE_THRESHOLD),
            vocabulary: TagVocabulary::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub tracks: Vec<Track>,
    /// The enhanced timeline the document was composed from.
    pub timeline: Timeline,
    pub report: EnhanceReport,
    pub document: ComposedDocument,
}

impl Pipeline {
    pub fn from_config(cfg: &RunConfig, vocabulary: TagVocabulary) -> Self {
        Self {
            sample_rate: cfg.sample_rate,
            tracker: cfg.tracker,
            enhance: cfg.enhance.clone(),
            group_n: cfg.group_n,
            dedupe_threshold: cfg.dedupe_threshold,
            vocabulary,
        }
    }

    /// Builds the deduplicated, not yet enhanced timeline. Ablated
    /// modalities are removed here so enhancement never sees them.
    pub fn align(&self, stream: &EventStream, flags: &AblationFlags) -> Result<(Timeline, Vec<Track>), PipelineError> {
        let mut stream = stream.clone();
        stream.retain(|e| flags.allows(e.modality));

        let grid = sample_frame_grid(&stream.meta, self.sample_rate).map_err(|e| PipelineError::new(Stage::Grid, e))?;

        let (stream, tracks) = if flags.tracking {
            track_stream(&stream, &grid, &self.tracker).map_err(|e| PipelineError::new(Stage::Track, e))?
        } else {
            (stream, Vec::new())
        };

        let mut timeline = build_timeline(&stream, &grid).map_err(|e| PipelineError::new(Stage::Align, e))?;
        if let Some(th) = self.dedupe_threshold {
            timeline.dedupe(th);
        }
        Ok((timeline, tracks))
    }

    pub fn run(&self, stream: &EventStream, flags: &AblationFlags) -> Result<PipelineOutput, PipelineError> {
        let (timeline, tracks) = self.align(stream, flags)?;
        let (timeline, report) = enhance(&timeline, &self.vocabulary, &self.enhance);
        let document = compose(&timeline, flags, self.group_n).map_err(|e| PipelineError::new(Stage::Compose, e))?;
        Ok(PipelineOutput { tracks, timeline, report, document })
    }
}
