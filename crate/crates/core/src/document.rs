//! Sequential narrative document with per-line provenance.
//!
//! Consecutive runs of `group_n` timeline segments become one block. Every
//! render-visible event contributes to exactly one block, the one holding
//! its first segment. Lines inside a block are ordered by kind and then by
//! the smallest event id they cite.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{BBox, EventId, Modality, Payload, VideoMeta};
use crate::timeline::{Timeline, Visibility};

pub const DEFAULT_GROUP_N: usize = 20;
pub const EXPORT_FORMAT: &str = "mmfuse-document/1";

/// Per-modality switches. `captions` covers scene and region captions;
/// `tracking = false` renders detections without track ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationFlags {
    pub asr: bool,
    pub ocr: bool,
    pub tags: bool,
    pub captions: bool,
    pub tracking: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self { asr: true, ocr: true, tags: true, captions: true, tracking: true }
    }
}

/// The four single-component removals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ablation {
    Asr,
    Ocr,
    Tags,
    Captions,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Asr, Ablation::Ocr, Ablation::Tags, Ablation::Captions];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Asr => "asr",
            Ablation::Ocr => "ocr",
            Ablation::Tags => "tags",
            Ablation::Captions => "captions",
        }
    }

    pub fn modalities(self) -> &'static [Modality] {
        match self {
            Ablation::Asr => &[Modality::Asr],
            Ablation::Ocr => &[Modality::Ocr],
            Ablation::Tags => &[Modality::Tag],
            Ablation::Captions => &[Modality::Caption, Modality::DenseCaption],
        }
    }
}

impl AblationFlags {
    pub fn without(self, ablation: Ablation) -> Self {
        let mut f = self;
        match ablation {
            Ablation::Asr => f.asr = false,
            Ablation::Ocr => f.ocr = false,
            Ablation::Tags => f.tags = false,
            Ablation::Captions => f.captions = false,
        }
        f
    }

    pub fn allows(&self, modality: Modality) -> bool {
        match modality {
            Modality::Caption | Modality::DenseCaption => self.captions,
            Modality::Ocr => self.ocr,
            Modality::Asr => self.asr,
            Modality::Tag => self.tags,
            Modality::Detection => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LineKind {
    SceneCaption,
    Tags,
    Object,
    Region,
    OnscreenText,
    Transcript,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub modality: Modality,
    pub id: EventId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocLine {
    pub kind: LineKind,
    pub text: String,
    pub provenance: BTreeSet<SourceRef>,
}

impl DocLine {
    fn sort_key(&self) -> (LineKind, &EventId) {
        let min_id = self.provenance.iter().map(|s| &s.id).min().expect("provenance is never empty");
        (self.kind, min_id)
    }

    pub fn cites(&self, modality: Modality) -> bool {
        self.provenance.iter().any(|s| s.modality == modality)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub start: f64,
    pub end: f64,
    pub lines: Vec<DocLine>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnhanceSummary {
    pub merges: usize,
    pub corrections: usize,
    pub suppressions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedDocument {
    pub meta: VideoMeta,
    pub blocks: Vec<Block>,
    pub footer: EnhanceSummary,
}

impl ComposedDocument {
    pub fn lines(&self) -> impl Iterator<Item = &DocLine> {
        self.blocks.iter().flat_map(|b| b.lines.iter())
    }

    pub fn line_count(&self) -> usize {
        self.blocks.iter().map(|b| b.lines.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error("GROUP_SIZE_NONPOSITIVE: group_n must be at least 1")]
    GroupSizeNonpositive,
    #[error("MALFORMED_DOCUMENT: {0}")]
    Malformed(String),
}

fn source(modality: Modality, id: &EventId) -> SourceRef {
    SourceRef { modality, id: id.clone() }
}

#[derive(Default)]
struct BlockBuilder {
    lines: Vec<DocLine>,
    tags: Option<(BTreeSet<String>, BTreeSet<SourceRef>)>,
    // (track id or class label) -> (first box, class, provenance)
    objects: BTreeMap<ObjectKey, (BBox, String, BTreeSet<SourceRef>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum ObjectKey {
    Track(u64),
    Class(String),
}

/// Builds the document from a (possibly enhanced) timeline.
pub fn compose(timeline: &Timeline, flags: &AblationFlags, group_n: usize) -> Result<ComposedDocument, DocumentError> {
    if group_n == 0 {
        return Err(DocumentError::GroupSizeNonpositive);
    }
    let segments = timeline.segments();
    let n_blocks = segments.len().div_ceil(group_n);
    let mut builders: Vec<BlockBuilder> = (0..n_blocks).map(|_| BlockBuilder::default()).collect();

    let memberships = timeline.memberships();
    for (idx, te) in timeline.events().iter().enumerate() {
        let ev = &te.event;
        if !te.is_visible() || !flags.allows(ev.modality) {
            continue;
        }
        let Some(&first_seg) = memberships[idx].first() else { continue };
        let b = &mut builders[first_seg / group_n];
        let me = source(ev.modality, &ev.id);
        match &ev.payload {
            Payload::Caption { text } => b.lines.push(DocLine {
                kind: LineKind::SceneCaption,
                text: format!("[SCENE] {text}"),
                provenance: [me].into(),
            }),
            Payload::DenseCaption { text, bbox } => b.lines.push(DocLine {
                kind: LineKind::Region,
                text: format!("[REGION] {text} at {bbox}"),
                provenance: [me].into(),
            }),
            Payload::Ocr { text, lang, .. } => b.lines.push(DocLine {
                kind: LineKind::OnscreenText,
                text: format!("[TEXT:{lang}] \"{text}\""),
                provenance: [me].into(),
            }),
            Payload::Asr { text, audio_tags } => {
                let mut provenance: BTreeSet<SourceRef> = [me].into();
                if let Some(ocr) = &te.merged_with {
                    provenance.insert(source(Modality::Ocr, ocr));
                }
                let mut line = format!("[SPEECH] \"{text}\"");
                if !audio_tags.is_empty() {
                    let _ = write!(line, " (audio: {})", audio_tags.join(", "));
                }
                b.lines.push(DocLine { kind: LineKind::Transcript, text: line, provenance });
            }
            Payload::Tag { label, .. } => {
                let (labels, prov) = b.tags.get_or_insert_with(Default::default);
                labels.insert(label.clone());
                prov.insert(me);
            }
            Payload::Detection { label, bbox, track_id, .. } => {
                let key = match track_id {
                    Some(tid) if flags.tracking => ObjectKey::Track(*tid),
                    _ => ObjectKey::Class(label.clone()),
                };
                // Events arrive in time order, so the first insert holds the earliest state.
                b.objects.entry(key).or_insert_with(|| (*bbox, label.clone(), BTreeSet::new())).2.insert(me);
            }
        }
    }

    let mut blocks = Vec::new();
    for (bi, mut b) in builders.into_iter().enumerate() {
        if let Some((labels, provenance)) = b.tags.take() {
            let text = format!("[TAGS] {}", labels.into_iter().collect::<Vec<_>>().join(", "));
            b.lines.push(DocLine { kind: LineKind::Tags, text, provenance });
        }
        for (key, (bbox, label, provenance)) in std::mem::take(&mut b.objects) {
            let text = match key {
                ObjectKey::Track(tid) => format!("[OBJ#{tid}] {label} at {bbox}"),
                ObjectKey::Class(_) => format!("[OBJ] {label} at {bbox} n={}", provenance.len()),
            };
            b.lines.push(DocLine { kind: LineKind::Object, text, provenance });
        }
        if b.lines.is_empty() {
            continue;
        }
        b.lines.sort_by(|x, y| x.sort_key().cmp(&y.sort_key()));
        let first = bi * group_n;
        let last = ((bi + 1) * group_n).min(segments.len()) - 1;
        blocks.push(Block { start: segments[first].span.start, end: segments[last].span.end, lines: b.lines });
    }

    let mut footer = EnhanceSummary::default();
    for te in timeline.events().iter().filter(|te| flags.allows(te.event.modality)) {
        footer.merges += usize::from(te.merged_with.is_some());
        footer.corrections += te.corrections.len();
        footer.suppressions += usize::from(matches!(te.visibility, Visibility::Suppressed { .. }));
    }

    Ok(ComposedDocument { meta: timeline.meta.clone(), blocks, footer })
}

/// `HH:MM:SS.mmm`, rounded to the millisecond.
pub fn format_timestamp(seconds: f64) -> String {
    let ms = (seconds.max(0.0) * 1000.0).round() as u64;
    format!("{:02}:{:02}:{:02}.{:03}", ms / 3_600_000, ms / 60_000 % 60, ms / 1000 % 60, ms % 1000)
}

fn render_provenance(p: &BTreeSet<SourceRef>) -> String {
    p.iter().map(|s| format!("{}:{}", s.modality, s.id)).collect::<Vec<_>>().join(" ")
}

/// Renders the human-readable narrative. Output is a pure function of the
/// document.
pub fn render_text(doc: &ComposedDocument) -> String {
    let m = &doc.meta;
    let mut out = String::new();
    let _ = writeln!(out, "# {}", m.title.as_deref().unwrap_or("untitled"));
    let _ = writeln!(out, "source: {}", m.source_uri);
    let _ = writeln!(out, "duration: {} | fps: {} | frame: {}x{}", format_timestamp(m.duration), m.fps, m.width, m.height);
    for b in &doc.blocks {
        let _ = writeln!(out);
        let _ = writeln!(out, "[{} - {}]", format_timestamp(b.start), format_timestamp(b.end));
        for l in &b.lines {
            let _ = writeln!(out, "{}  <{}>", l.text, render_provenance(&l.provenance));
        }
    }
    let _ = writeln!(out);
    let f = &doc.footer;
    let _ = writeln!(
        out,
        "-- enhancement: merges={} corrections={} suppressions={}",
        f.merges, f.corrections, f.suppressions
    );
    out
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case", deny_unknown_fields)]
enum ExportRecord {
    Header { format: String, meta: VideoMeta },
    Block { start: f64, end: f64, lines: Vec<DocLine> },
    Footer { blocks: usize, merges: usize, corrections: usize, suppressions: usize },
}

/// Lossless JSON-lines export: a header record, one record per block, and a
/// footer that also carries the block count so truncation is detectable.
pub fn export_structured(doc: &ComposedDocument) -> String {
    let mut out = String::new();
    let mut push = |r: &ExportRecord| {
        out.push_str(&serde_json::to_string(r).expect("document records serialize"));
        out.push('\n');
    };
    push(&ExportRecord::Header { format: EXPORT_FORMAT.to_owned(), meta: doc.meta.clone() });
    for b in &doc.blocks {
        push(&ExportRecord::Block { start: b.start, end: b.end, lines: b.lines.clone() });
    }
    let f = doc.footer;
    push(&ExportRecord::Footer {
        blocks: doc.blocks.len(),
        merges: f.merges,
        corrections: f.corrections,
        suppressions: f.suppressions,
    });
    out
}

pub fn import_structured(text: &str) -> Result<ComposedDocument, DocumentError> {
    let bad = |m: String| DocumentError::Malformed(m);
    let mut meta = None;
    let mut blocks = Vec::new();
    let mut footer = None;
    for (idx, line) in text.lines().enumerate() {
        let n = idx + 1;
        if footer.is_some() {
            return Err(bad(format!("line {n}: content after footer")));
        }
        let rec: ExportRecord = serde_json::from_str(line).map_err(|e| bad(format!("line {n}: {e}")))?;
        match (rec, meta.is_some()) {
            (ExportRecord::Header { format, meta: m }, false) => {
                if format != EXPORT_FORMAT {
                    return Err(bad(format!("unsupported format `{format}`")));
                }
                meta = Some(m);
            }
            (ExportRecord::Header { .. }, true) => return Err(bad(format!("line {n}: duplicate header"))),
            (_, false) => return Err(bad("first record must be the header".into())),
            (ExportRecord::Block { start, end, lines }, true) => {
                if lines.iter().any(|l| l.provenance.is_empty()) {
                    return Err(bad(format!("line {n}: line without provenance")));
                }
                blocks.push(Block { start, end, lines });
            }
            (ExportRecord::Footer { blocks: count, merges, corrections, suppressions }, true) => {
                if count != blocks.len() {
                    return Err(bad(format!("footer announces {count} blocks, found {}", blocks.len())));
                }
                footer = Some(EnhanceSummary { merges, corrections, suppressions });
            }
        }
    }
    let meta = meta.ok_or_else(|| bad("missing header".into()))?;
    let footer = footer.ok_or_else(|| bad("missing footer (truncated export?)".into()))?;
    Ok(ComposedDocument { meta, blocks, footer })
}
