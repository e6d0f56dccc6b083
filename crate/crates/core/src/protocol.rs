//! Line-oriented wire format spoken by extractors.
//!
//! One UTF-8 JSON object per line:
//!
//! ```text
//! {"id":"e1","modality":"CAPTION","span":[0.0,0.5],"payload":{"text":"a man cooking"},"source":"captioner","confidence":0.9}
//! ```
//!
//! Unknown keys are ignored. See `docs/protocol.md` for the per-modality
//! payload keys.

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::event::{BBox, EventId, Modality, ModalityEvent, Payload, TimeSpan};
use crate::vocab::{normalize_label, TagCategory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("MALFORMED_RECORD: {0}")]
    Malformed(String),
    #[error("UNKNOWN_MODALITY: {0}")]
    UnknownModality(String),
    #[error("MISSING_FIELD: {0}")]
    MissingField(String),
    #[error("INVALID_FIELD: {field}: {reason}")]
    InvalidField { field: String, reason: String },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Malformed(_) => "MALFORMED_RECORD",
            ParseError::UnknownModality(_) => "UNKNOWN_MODALITY",
            ParseError::MissingField(_) => "MISSING_FIELD",
            ParseError::InvalidField { .. } => "INVALID_FIELD",
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ParseError {
    ParseError::InvalidField { field: field.to_owned(), reason: reason.into() }
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
    prefix: &'static str,
}

impl<'a> Fields<'a> {
    fn name(&self, key: &str) -> String {
        format!("{}{}", self.prefix, key)
    }

    fn get(&self, key: &str) -> Result<&'a Value, ParseError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Err(ParseError::MissingField(self.name(key))),
            Some(v) => Ok(v),
        }
    }

    fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn str(&self, key: &str) -> Result<&'a str, ParseError> {
        self.get(key)?.as_str().ok_or_else(|| invalid(&self.name(key), "expected a string"))
    }

    fn num(&self, key: &str) -> Result<f64, ParseError> {
        self.get(key)?.as_f64().ok_or_else(|| invalid(&self.name(key), "expected a number"))
    }

    fn label(&self, key: &str) -> Result<String, ParseError> {
        normalize_label(self.str(key)?).map_err(|e| invalid(&self.name(key), e.to_string()))
    }

    fn numbers<const N: usize>(&self, key: &str) -> Result<[f64; N], ParseError> {
        let field = self.name(key);
        let arr = self
            .get(key)?
            .as_array()
            .filter(|a| a.len() == N)
            .ok_or_else(|| invalid(&field, format!("expected an array of {N} numbers")))?;
        let mut out = [0.0; N];
        for (slot, v) in out.iter_mut().zip(arr) {
            *slot = v.as_f64().ok_or_else(|| invalid(&field, format!("expected an array of {N} numbers")))?;
        }
        Ok(out)
    }

    fn bbox(&self) -> Result<BBox, ParseError> {
        let [x, y, w, h] = self.numbers::<4>("box")?;
        Ok(BBox::new(x, y, w, h))
    }
}

/// Parses one wire record. Labels (tags, detector classes, audio tags) are
/// normalized; free text is kept verbatim.
pub fn parse_event_line(line: &str) -> Result<ModalityEvent, ParseError> {
    let value: Value = serde_json::from_str(line).map_err(|e| ParseError::Malformed(e.to_string()))?;
    let map = value.as_object().ok_or_else(|| ParseError::Malformed("record is not an object".into()))?;
    let top = Fields { map, prefix: "" };

    let id = top.str("id")?;
    if id.is_empty() {
        return Err(invalid("id", "must be non-empty"));
    }
    let modality_name = top.str("modality")?;
    let modality =
        Modality::parse(modality_name).ok_or_else(|| ParseError::UnknownModality(modality_name.to_owned()))?;
    let [start, end] = top.numbers::<2>("span")?;
    let payload_map = top
        .get("payload")?
        .as_object()
        .ok_or_else(|| invalid("payload", "expected an object"))?;
    let source = top.str("source")?.to_owned();
    let confidence = top.num("confidence")?;

    let p = Fields { map: payload_map, prefix: "payload." };
    let payload = match modality {
        Modality::Caption => Payload::Caption { text: p.str("text")?.to_owned() },
        Modality::DenseCaption => Payload::DenseCaption { text: p.str("text")?.to_owned(), bbox: p.bbox()? },
        Modality::Ocr => Payload::Ocr {
            text: p.str("text")?.to_owned(),
            bbox: p.bbox()?,
            lang: p.str("lang")?.to_owned(),
        },
        Modality::Asr => {
            let audio_tags = match p.opt("audio_tags") {
                None => Vec::new(),
                Some(v) => v
                    .as_array()
                    .ok_or_else(|| invalid("payload.audio_tags", "expected an array of strings"))?
                    .iter()
                    .map(|t| {
                        let s = t.as_str().ok_or_else(|| invalid("payload.audio_tags", "expected strings"))?;
                        normalize_label(s).map_err(|e| invalid("payload.audio_tags", e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            };
            Payload::Asr { text: p.str("text")?.to_owned(), audio_tags }
        }
        Modality::Tag => {
            let category = match p.opt("category") {
                None => TagCategory::Object,
                Some(v) => v
                    .as_str()
                    .ok_or_else(|| invalid("payload.category", "expected a string"))?
                    .parse()
                    .map_err(|e: crate::vocab::UnknownCategory| invalid("payload.category", e.to_string()))?,
            };
            Payload::Tag { label: p.label("label")?, category }
        }
        Modality::Detection => {
            let track_id = match p.opt("track_id") {
                None => None,
                Some(v) => Some(v.as_u64().ok_or_else(|| invalid("payload.track_id", "expected a positive integer"))?),
            };
            Payload::Detection { label: p.label("label")?, bbox: p.bbox()?, score: p.num("score")?, track_id }
        }
    };

    Ok(ModalityEvent {
        id: EventId::new(id),
        modality,
        span: TimeSpan::new(start, end),
        payload,
        source,
        confidence,
    })
}

#[derive(Serialize)]
struct WireRecord<'a> {
    id: &'a str,
    modality: &'static str,
    span: [f64; 2],
    payload: WirePayload<'a>,
    source: &'a str,
    confidence: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum WirePayload<'a> {
    Caption {
        text: &'a str,
    },
    DenseCaption {
        text: &'a str,
        #[serde(rename = "box")]
        bbox: [f64; 4],
    },
    Ocr {
        text: &'a str,
        #[serde(rename = "box")]
        bbox: [f64; 4],
        lang: &'a str,
    },
    Asr {
        text: &'a str,
        audio_tags: &'a [String],
    },
    Tag {
        label: &'a str,
        category: &'static str,
    },
    Detection {
        label: &'a str,
        #[serde(rename = "box")]
        bbox: [f64; 4],
        score: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        track_id: Option<u64>,
    },
}

fn arr(b: &BBox) -> [f64; 4] {
    [b.x, b.y, b.w, b.h]
}

/// Serializes an event as one wire record (no trailing newline).
pub fn event_to_line(event: &ModalityEvent) -> String {
    let payload = match &event.payload {
        Payload::Caption { text } => WirePayload::Caption { text },
        Payload::DenseCaption { text, bbox } => WirePayload::DenseCaption { text, bbox: arr(bbox) },
        Payload::Ocr { text, bbox, lang } => WirePayload::Ocr { text, bbox: arr(bbox), lang },
        Payload::Asr { text, audio_tags } => WirePayload::Asr { text, audio_tags },
        Payload::Tag { label, category } => WirePayload::Tag { label, category: category.as_str() },
        Payload::Detection { label, bbox, score, track_id } => {
            WirePayload::Detection { label, bbox: arr(bbox), score: *score, track_id: *track_id }
        }
    };
    let record = WireRecord {
        id: event.id.as_str(),
        modality: event.modality.as_str(),
        span: [event.span.start, event.span.end],
        payload,
        source: &event.source,
        confidence: event.confidence,
    };
    serde_json::to_string(&record).expect("wire record serialization is infallible")
}
