//! Unified annotation types shared by every stage of the fusion pipeline.
//!
//! A [`ModalityEvent`] is one annotation produced by one extractor (caption
//! model, OCR, ASR, tagger, detector) for a span of the video. Events carry
//! times and regions only; no pixel data is ever stored.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::TagCategory;

/// A closed time interval in seconds. Instants have `start == end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: f64,
    pub end: f64,
}

impl TimeSpan {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn instant(t: f64) -> Self {
        Self { start: t, end: t }
    }

    pub fn is_instant(&self) -> bool {
        self.start == self.end
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    /// Well-formed on its own: finite, non-negative and ordered.
    pub fn is_well_formed(&self) -> bool {
        self.start.is_finite() && self.end.is_finite() && self.start >= 0.0 && self.start <= self.end
    }

    /// Closed-interval intersection test.
    pub fn touches(&self, other: &TimeSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Axis-aligned pixel rectangle with a top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn is_well_formed(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w >= 0.0 && self.h >= 0.0
    }

    pub fn within_frame(&self, width: u32, height: u32) -> bool {
        self.is_well_formed()
            && self.x >= 0.0
            && self.y >= 0.0
            && self.right() <= f64::from(width)
            && self.bottom() <= f64::from(height)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub duration: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub title: Option<String>,
    pub source_uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetaError {
    #[error("duration must be finite and >= 0, got {0}")]
    BadDuration(String),
    #[error("fps must be finite and > 0, got {0}")]
    BadFps(String),
    #[error("frame size must be positive, got {0}x{1}")]
    BadFrameSize(u32, u32),
}

impl VideoMeta {
    pub fn new(duration: f64, fps: f64, width: u32, height: u32, source_uri: impl Into<String>) -> Self {
        Self { duration, fps, width, height, title: None, source_uri: source_uri.into() }
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }

    pub fn validate(&self) -> Result<(), MetaError> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(MetaError::BadDuration(self.duration.to_string()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(MetaError::BadFps(self.fps.to_string()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(MetaError::BadFrameSize(self.width, self.height));
        }
        Ok(())
    }
}

/// Annotation channel. Declaration order is the tie-break order used when
/// sealing streams: scene context, then objects, then text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Modality {
    Caption,
    DenseCaption,
    Detection,
    Tag,
    Ocr,
    Asr,
}

impl Modality {
    pub const ALL: [Modality; 6] =
        [Modality::Caption, Modality::DenseCaption, Modality::Detection, Modality::Tag, Modality::Ocr, Modality::Asr];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Caption => "CAPTION",
            Modality::DenseCaption => "DENSE_CAPTION",
            Modality::Detection => "DETECTION",
            Modality::Tag => "TAG",
            Modality::Ocr => "OCR",
            Modality::Asr => "ASR",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        Modality::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub String);

impl EventId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EventId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Modality-specific content of an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Caption { text: String },
    DenseCaption { text: String, bbox: BBox },
    Ocr { text: String, bbox: BBox, lang: String },
    Asr { text: String, audio_tags: Vec<String> },
    Tag { label: String, category: TagCategory },
    Detection { label: String, bbox: BBox, score: f64, track_id: Option<u64> },
}

impl Payload {
    pub fn modality(&self) -> Modality {
        match self {
            Payload::Caption { .. } => Modality::Caption,
            Payload::DenseCaption { .. } => Modality::DenseCaption,
            Payload::Ocr { .. } => Modality::Ocr,
            Payload::Asr { .. } => Modality::Asr,
            Payload::Tag { .. } => Modality::Tag,
            Payload::Detection { .. } => Modality::Detection,
        }
    }

    /// The free text carried by captions, OCR and ASR.
    pub fn text(&self) -> Option<&str> {
        match self {
            Payload::Caption { text }
            | Payload::DenseCaption { text, .. }
            | Payload::Ocr { text, .. }
            | Payload::Asr { text, .. } => Some(text),
            _ => None,
        }
    }

    pub fn text_mut(&mut self) -> Option<&mut String> {
        match self {
            Payload::Caption { text }
            | Payload::DenseCaption { text, .. }
            | Payload::Ocr { text, .. }
            | Payload::Asr { text, .. } => Some(text),
            _ => None,
        }
    }

    pub fn bbox(&self) -> Option<&BBox> {
        match self {
            Payload::DenseCaption { bbox, .. } | Payload::Ocr { bbox, .. } | Payload::Detection { bbox, .. } => {
                Some(bbox)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityEvent {
    pub id: EventId,
    pub modality: Modality,
    pub span: TimeSpan,
    pub payload: Payload,
    pub source: String,
    pub confidence: f64,
}

impl ModalityEvent {
    pub fn new(
        id: impl Into<String>,
        span: TimeSpan,
        payload: Payload,
        source: impl Into<String>,
        confidence: f64,
    ) -> Self {
        Self {
            id: EventId::new(id),
            modality: payload.modality(),
            span,
            payload,
            source: source.into(),
            confidence,
        }
    }

    /// Sealed-stream order: start time, modality, id.
    pub fn stream_order(&self, other: &Self) -> std::cmp::Ordering {
        self.span
            .start
            .total_cmp(&other.span.start)
            .then(self.modality.cmp(&other.modality))
            .then_with(|| self.id.cmp(&other.id))
    }

    pub fn track_id(&self) -> Option<u64> {
        match &self.payload {
            Payload::Detection { track_id, .. } => *track_id,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Violation {
    SpanOutOfRange,
    BadConfidence,
    BoxOutOfFrame,
    PayloadMismatch,
}

impl Violation {
    pub fn code(self) -> &'static str {
        match self {
            Violation::SpanOutOfRange => "SPAN_OUT_OF_RANGE",
            Violation::BadConfidence => "BAD_CONFIDENCE",
            Violation::BoxOutOfFrame => "BOX_OUT_OF_FRAME",
            Violation::PayloadMismatch => "PAYLOAD_MISMATCH",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

fn unit_interval(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Checks every event invariant that does not depend on a video.
pub fn validate_event_intrinsic(event: &ModalityEvent) -> Result<(), Vec<Violation>> {
    check(event, None)
}

/// Checks every event invariant against `meta`. Never aborts: all violations
/// found are returned, each code at most once.
pub fn validate_event(event: &ModalityEvent, meta: &VideoMeta) -> Result<(), Vec<Violation>> {
    check(event, Some(meta))
}

fn check(event: &ModalityEvent, meta: Option<&VideoMeta>) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();

    let span_ok = event.span.is_well_formed() && meta.is_none_or(|m| event.span.end <= m.duration);
    if !span_ok {
        out.push(Violation::SpanOutOfRange);
    }

    let score_ok = match &event.payload {
        Payload::Detection { score, .. } => unit_interval(*score),
        _ => true,
    };
    if !unit_interval(event.confidence) || !score_ok {
        out.push(Violation::BadConfidence);
    }

    let box_ok = match &event.payload {
        Payload::DenseCaption { bbox, .. } | Payload::Ocr { bbox, .. } => match meta {
            Some(m) => bbox.within_frame(m.width, m.height),
            None => bbox.is_well_formed(),
        },
        // Detector boxes may legitimately extend past the frame edge.
        Payload::Detection { bbox, .. } => bbox.is_well_formed(),
        _ => true,
    };
    if !box_ok {
        out.push(Violation::BoxOutOfFrame);
    }

    if event.payload.modality() != event.modality {
        out.push(Violation::PayloadMismatch);
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
