//! Frame-anchored timeline: every event bucketed onto the sampling grid.
//!
//! Segments are the grid's half-open intervals `[t_k, t_{k+1})`, the last one
//! closing at the video duration. A span event lands in every segment it
//! overlaps with positive length; an instant lands in the segment holding it
//! (the last segment when it sits exactly on the video end).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventId, Modality, ModalityEvent, TimeSpan, VideoMeta};
use crate::grid::FrameGrid;
use crate::ingest::EventStream;
use crate::similarity::normalized_similarity;

/// Default similarity at or above which same-modality text repeats are dropped.
pub const DEFAULT_DEDUPE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("GRID_META_MISMATCH: grid spans {grid}s but the stream's video lasts {meta}s")]
    GridMetaMismatch { grid: String, meta: String },
    #[error("stream must be sealed before alignment")]
    Unsealed,
}

/// Whether an event is rendered. Hidden events stay stored for provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Visibility {
    Visible,
    /// An OCR line folded into the transcript of `into`.
    Absorbed { into: EventId },
    Suppressed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCorrection {
    pub original: String,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEvent {
    pub event: ModalityEvent,
    pub visibility: Visibility,
    /// For ASR events: the OCR event merged into this transcript.
    pub merged_with: Option<EventId>,
    pub corrections: Vec<TokenCorrection>,
}

impl TimelineEvent {
    fn new(event: ModalityEvent) -> Self {
        Self { event, visibility: Visibility::Visible, merged_with: None, corrections: Vec::new() }
    }

    pub fn is_visible(&self) -> bool {
        self.visibility == Visibility::Visible
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub span: TimeSpan,
    /// Indices into [`Timeline::events`], ordered by (modality, start, id).
    pub events: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub meta: VideoMeta,
    pub grid: FrameGrid,
    events: Vec<TimelineEvent>,
    segments: Vec<Segment>,
    by_id: BTreeMap<EventId, usize>,
}

impl Timeline {
    pub fn events(&self) -> &[TimelineEvent] {
        &self.events
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn event(&self, idx: usize) -> &TimelineEvent {
        &self.events[idx]
    }

    pub(crate) fn event_mut(&mut self, idx: usize) -> &mut TimelineEvent {
        &mut self.events[idx]
    }

    pub fn index_of(&self, id: &EventId) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &EventId) -> Option<&TimelineEvent> {
        self.index_of(id).map(|i| &self.events[i])
    }

    /// Segment indices of every event, ascending.
    pub fn memberships(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.events.len()];
        for seg in &self.segments {
            for &e in &seg.events {
                out[e].push(seg.index);
            }
        }
        out
    }

    /// Drops same-modality text repeats in every segment.
    pub fn dedupe(&mut self, similarity_threshold: f64) {
        let segments = std::mem::take(&mut self.segments);
        self.segments =
            segments.iter().map(|s| dedupe_segment_events(s, &self.events, similarity_threshold)).collect();
    }
}

fn segment_range(grid: &FrameGrid, span: &TimeSpan) -> Option<(usize, usize)> {
    let ts = grid.timestamps();
    if ts.is_empty() {
        return None;
    }
    let first = grid.frame_of(span.start)?;
    if span.is_instant() {
        return Some((first, first));
    }
    let last = ts.partition_point(|&t| t < span.end).checked_sub(1)?;
    (first <= last).then_some((first, last))
}

pub fn build_timeline(stream: &EventStream, grid: &FrameGrid) -> Result<Timeline, AlignError> {
    if !stream.is_sealed() {
        return Err(AlignError::Unsealed);
    }
    if grid.duration() != stream.meta.duration {
        return Err(AlignError::GridMetaMismatch {
            grid: grid.duration().to_string(),
            meta: stream.meta.duration.to_string(),
        });
    }

    let mut segments: Vec<Segment> = (0..grid.len())
        .map(|k| Segment { index: k, span: grid.segment_span(k), events: Vec::new() })
        .collect();
    let events: Vec<TimelineEvent> = stream.events().iter().cloned().map(TimelineEvent::new).collect();

    for (i, te) in events.iter().enumerate() {
        if let Some((first, last)) = segment_range(grid, &te.event.span) {
            for seg in &mut segments[first..=last] {
                seg.events.push(i);
            }
        }
    }
    for seg in &mut segments {
        seg.events.sort_by(|&a, &b| segment_order(&events[a].event, &events[b].event));
    }

    let by_id = events.iter().enumerate().map(|(i, te)| (te.event.id.clone(), i)).collect();
    Ok(Timeline { meta: stream.meta.clone(), grid: grid.clone(), events, segments, by_id })
}

fn segment_order(a: &ModalityEvent, b: &ModalityEvent) -> std::cmp::Ordering {
    a.modality
        .cmp(&b.modality)
        .then(a.span.start.total_cmp(&b.span.start))
        .then_with(|| a.id.cmp(&b.id))
}

fn text_bearing(m: Modality) -> bool {
    matches!(m, Modality::Caption | Modality::DenseCaption | Modality::Ocr | Modality::Asr)
}

/// Drops any text-bearing event whose text is at least `similarity_threshold`
/// similar to an earlier kept event of the same modality. Other modalities
/// pass through untouched.
pub fn dedupe_segment_events(seg: &Segment, events: &[TimelineEvent], similarity_threshold: f64) -> Segment {
    let mut kept: Vec<usize> = Vec::with_capacity(seg.events.len());
    for &idx in &seg.events {
        let ev = &events[idx].event;
        let duplicate = text_bearing(ev.modality)
            && kept.iter().any(|&k| {
                let other = &events[k].event;
                other.modality == ev.modality
                    && normalized_similarity(
                        other.payload.text().unwrap_or_default(),
                        ev.payload.text().unwrap_or_default(),
                    ) >= similarity_threshold
            });
        if !duplicate {
            kept.push(idx);
        }
    }
    Segment { index: seg.index, span: seg.span, events: kept }
}
