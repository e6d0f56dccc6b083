//! Multimodal video annotation fusion.
//!
//! Extractors (captioners, OCR, ASR, taggers, detectors) emit one JSON
//! record per line. This crate ingests those streams, links detections into
//! tracks, aligns everything onto a fixed frame grid, lets the modalities
//! correct each other, and renders a sequential document in which every
//! line cites the events it came from.
//!
//! ```
//! use mmfuse::prelude::*;
//!
//! let meta = VideoMeta::new(1.0, 30.0, 640, 360, "file:///clip.mp4");
//! let lines = [
//!     r#"{"id":"c1","modality":"CAPTION","span":[0.0,1.0],"payload":{"text":"a cat on a sofa"},"source":"cap","confidence":0.9}"#,
//! ];
//! let ingested = ingest_stream(lines, &meta);
//! let out = Pipeline::default().run(&ingested.stream, &AblationFlags::default()).unwrap();
//! assert!(render_text(&out.document).contains("[SCENE] a cat on a sofa"));
//! ```

pub mod cli;
pub mod config;
pub mod document;
pub mod enhance;
pub mod event;
pub mod grid;
pub mod ingest;
pub mod pipeline;
pub mod protocol;
pub mod similarity;
pub mod synthetic;
pub mod timeline;
pub mod tracker;
pub mod vocab;

pub mod prelude {
    pub use crate::config::RunConfig;
    pub use crate::document::{
        compose, export_structured, import_structured, render_text, Ablation, AblationFlags, ComposedDocument,
        DocLine, LineKind,
    };
    pub use crate::enhance::{enhance, EnhanceConfig, EnhanceReport, Pass};
    pub use crate::event::{BBox, EventId, Modality, ModalityEvent, Payload, TimeSpan, VideoMeta};
    pub use crate::grid::{sample_frame_grid, FrameGrid, SampleRate};
    pub use crate::ingest::{ingest_stream, EventStream, Ingestor, InputChannel};
    pub use crate::pipeline::{Pipeline, PipelineError, PipelineOutput};
    pub use crate::protocol::{event_to_line, parse_event_line};
    pub use crate::similarity::{levenshtein, normalized_similarity};
    pub use crate::timeline::{build_timeline, Timeline};
    pub use crate::tracker::{iou, track_stream, Detection, Tracker, TrackerConfig};
    pub use crate::vocab::{TagCategory, TagVocabulary};
}
