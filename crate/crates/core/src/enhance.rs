//! Cross-modal correction over an aligned timeline.
//!
//! Three deterministic passes, always applied in this order:
//!
//! 1. `OCR_ASR`: an on-screen text line and an overlapping transcript that
//!    agree are merged into one transcript; the OCR event is absorbed.
//! 2. `CAPTION_FIX`: caption tokens outside the vocabulary are rewritten to
//!    the single nearby label that a confident tag in the same segment
//!    supports. Several candidates flag the token instead.
//! 3. `DET_FILTER`: low-score detections whose class no tag in the segment
//!    mentions are suppressed.
//!
//! Nothing is deleted: absorbed and suppressed events are only hidden, and
//! every change is recorded in the [`EnhanceReport`] so it can be replayed.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventId, Modality, Payload};
use crate::similarity::{levenshtein, normalized_similarity};
use crate::timeline::{Timeline, TokenCorrection, Visibility};
use crate::vocab::{normalize_text, TagVocabulary};

pub const SUPPRESS_REASON: &str = "unsupported_low_score";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Pass {
    OcrAsr,
    CaptionFix,
    DetFilter,
}

impl Pass {
    pub const ALL: [Pass; 3] = [Pass::OcrAsr, Pass::CaptionFix, Pass::DetFilter];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhanceConfig {
    pub ocr_asr_sim: f64,
    pub token_edit_max: usize,
    pub tag_conf_min: f64,
    pub det_suppress_conf: f64,
    /// Caption tokens shorter than this (in characters) are never rewritten.
    pub min_token_len: usize,
    pub enabled_passes: BTreeSet<Pass>,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            ocr_asr_sim: 0.8,
            token_edit_max: 1,
            tag_conf_min: 0.5,
            det_suppress_conf: 0.5,
            min_token_len: 3,
            enabled_passes: Pass::ALL.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid enhance config: {0}")]
pub struct EnhanceConfigError(pub String);

impl EnhanceConfig {
    pub fn none() -> Self {
        Self { enabled_passes: BTreeSet::new(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EnhanceConfigError> {
        for (name, v) in [
            ("ocr_asr_sim", self.ocr_asr_sim),
            ("tag_conf_min", self.tag_conf_min),
            ("det_suppress_conf", self.det_suppress_conf),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(EnhanceConfigError(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    fn enabled(&self, pass: Pass) -> bool {
        self.enabled_passes.contains(&pass)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub ocr: EventId,
    pub asr: EventId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub event: EventId,
    pub original: String,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suppression {
    pub event: EventId,
    pub reason: String,
}

/// A token with several equally admissible replacements; left unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub event: EventId,
    pub token: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnhanceReport {
    pub merges: Vec<Merge>,
    pub corrections: Vec<Correction>,
    pub suppressions: Vec<Suppression>,
    pub ambiguities: Vec<Ambiguity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ReportRecord {
    Merge(Merge),
    Correction(Correction),
    Suppression(Suppression),
    Ambiguity(Ambiguity),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("MALFORMED_REPORT: line {line}: {reason}")]
pub struct ReportParseError {
    pub line: usize,
    pub reason: String,
}

impl EnhanceReport {
    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
            && self.corrections.is_empty()
            && self.suppressions.is_empty()
            && self.ambiguities.is_empty()
    }

    /// Number of recorded changes (ambiguity flags are not changes).
    pub fn change_count(&self) -> usize {
        self.merges.len() + self.corrections.len() + self.suppressions.len()
    }

    pub fn extend(&mut self, other: EnhanceReport) {
        self.merges.extend(other.merges);
        self.corrections.extend(other.corrections);
        self.suppressions.extend(other.suppressions);
        self.ambiguities.extend(other.ambiguities);
    }

    /// One JSON record per line: merges, then corrections, suppressions and
    /// ambiguities, each group in pass order.
    pub fn to_lines(&self) -> String {
        let records = self
            .merges
            .iter()
            .cloned()
            .map(ReportRecord::Merge)
            .chain(self.corrections.iter().cloned().map(ReportRecord::Correction))
            .chain(self.suppressions.iter().cloned().map(ReportRecord::Suppression))
            .chain(self.ambiguities.iter().cloned().map(ReportRecord::Ambiguity));
        let mut out = String::new();
        for r in records {
            out.push_str(&serde_json::to_string(&r).expect("report records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self, ReportParseError> {
        let mut report = Self::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReportRecord = serde_json::from_str(line)
                .map_err(|e| ReportParseError { line: idx + 1, reason: e.to_string() })?;
            match rec {
                ReportRecord::Merge(m) => report.merges.push(m),
                ReportRecord::Correction(c) => report.corrections.push(c),
                ReportRecord::Suppression(s) => report.suppressions.push(s),
                ReportRecord::Ambiguity(a) => report.ambiguities.push(a),
            }
        }
        Ok(report)
    }

    /// Applies the recorded changes to `input`. Replaying the report of
    /// `enhance(input)` reproduces its output exactly.
    pub fn replay(&self, input: &Timeline) -> Result<Timeline, ReplayError> {
        let mut t = input.clone();
        let lookup = |t: &Timeline, id: &EventId| t.index_of(id).ok_or_else(|| ReplayError(id.clone()));
        for m in &self.merges {
            let oi = lookup(&t, &m.ocr)?;
            let ai = lookup(&t, &m.asr)?;
            apply_merge(&mut t, oi, ai, &m.text);
        }
        for c in &self.corrections {
            let i = lookup(&t, &c.event)?;
            let te = t.event_mut(i);
            if let Some(text) = te.event.payload.text_mut() {
                let normalized = normalize_text(text);
                let rewritten: Vec<&str> = normalized
                    .split(' ')
                    .map(|tok| if tok == c.original { c.replacement.as_str() } else { tok })
                    .collect();
                *text = rewritten.join(" ");
            }
            te.corrections.push(TokenCorrection { original: c.original.clone(), replacement: c.replacement.clone() });
        }
        for s in &self.suppressions {
            let i = lookup(&t, &s.event)?;
            t.event_mut(i).visibility = Visibility::Suppressed { reason: s.reason.clone() };
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("report references unknown event `{0}`")]
pub struct ReplayError(pub EventId);

fn apply_merge(t: &mut Timeline, ocr_idx: usize, asr_idx: usize, text: &str) {
    let ocr_conf = t.event(ocr_idx).event.confidence;
    let ocr_id = t.event(ocr_idx).event.id.clone();
    let asr_id = t.event(asr_idx).event.id.clone();
    let asr = t.event_mut(asr_idx);
    if let Some(slot) = asr.event.payload.text_mut() {
        *slot = text.to_owned();
    }
    asr.event.confidence = asr.event.confidence.max(ocr_conf);
    asr.merged_with = Some(ocr_id);
    t.event_mut(ocr_idx).visibility = Visibility::Absorbed { into: asr_id };
}

fn visible_in_segment(t: &Timeline, seg: usize, modality: Modality) -> Vec<usize> {
    t.segments()[seg]
        .events
        .iter()
        .copied()
        .filter(|&i| t.event(i).event.modality == modality && t.event(i).is_visible())
        .collect()
}

fn merge_in_place(t: &mut Timeline, cfg: &EnhanceConfig) -> EnhanceReport {
    let mut report = EnhanceReport::default();
    for seg in 0..t.segments().len() {
        let by_id = |t: &Timeline, mut v: Vec<usize>| {
            v.sort_by(|&a, &b| t.event(a).event.id.cmp(&t.event(b).event.id));
            v
        };
        let ocrs = by_id(t, visible_in_segment(t, seg, Modality::Ocr));
        let asrs = by_id(t, visible_in_segment(t, seg, Modality::Asr));
        for &oi in &ocrs {
            for &ai in &asrs {
                if !t.event(oi).is_visible() {
                    break;
                }
                if t.event(ai).merged_with.is_some() {
                    continue;
                }
                let (o, a) = (&t.event(oi).event, &t.event(ai).event);
                if !o.span.touches(&a.span) {
                    continue;
                }
                let (ot, at) = (o.payload.text().unwrap_or_default(), a.payload.text().unwrap_or_default());
                if normalized_similarity(ot, at) < cfg.ocr_asr_sim {
                    continue;
                }
                let text = if ot.chars().count() > at.chars().count() { ot } else { at }.to_owned();
                report.merges.push(Merge { ocr: o.id.clone(), asr: a.id.clone(), text: text.clone() });
                apply_merge(t, oi, ai, &text);
            }
        }
    }
    report
}

fn correct_in_place(t: &mut Timeline, vocabulary: &TagVocabulary, cfg: &EnhanceConfig) -> EnhanceReport {
    let mut report = EnhanceReport::default();

    let mut known: HashSet<String> = vocabulary.labels().map(str::to_owned).collect();
    for te in t.events().iter().filter(|te| te.is_visible()) {
        match &te.event.payload {
            Payload::Tag { label, .. } => {
                known.insert(normalize_text(label));
            }
            Payload::Detection { label, track_id: Some(_), .. } => {
                known.insert(normalize_text(label));
            }
            _ => {}
        }
    }

    let memberships = t.memberships();
    let mut done = vec![false; t.events().len()];
    for seg in 0..t.segments().len() {
        let captions: Vec<usize> = t.segments()[seg]
            .events
            .iter()
            .copied()
            .filter(|&i| {
                let te = t.event(i);
                te.is_visible() && matches!(te.event.modality, Modality::Caption | Modality::DenseCaption)
            })
            .collect();
        for ci in captions {
            if std::mem::replace(&mut done[ci], true) {
                continue;
            }
            let support: BTreeSet<String> = memberships[ci]
                .iter()
                .flat_map(|&s| visible_in_segment(t, s, Modality::Tag))
                .filter(|&i| t.event(i).event.confidence >= cfg.tag_conf_min)
                .filter_map(|i| match &t.event(i).event.payload {
                    Payload::Tag { label, .. } => Some(normalize_text(label)),
                    _ => None,
                })
                .collect();

            let te = t.event(ci);
            let id = te.event.id.clone();
            let normalized = normalize_text(te.event.payload.text().unwrap_or_default());
            let mut tokens: Vec<String> = normalized.split(' ').map(str::to_owned).collect();
            let mut seen = HashSet::new();
            let mut fixes = Vec::new();
            for tok in tokens.clone() {
                if tok.is_empty() || !seen.insert(tok.clone()) {
                    continue;
                }
                if known.contains(&tok) || tok.chars().count() < cfg.min_token_len {
                    continue;
                }
                // Multi-word labels would re-split into new tokens on a second pass.
                let candidates: Vec<String> = support
                    .iter()
                    .filter(|l| !l.contains(' ') && levenshtein(&tok, l) <= cfg.token_edit_max)
                    .cloned()
                    .collect();
                match candidates.len() {
                    0 => {}
                    1 => fixes.push((tok, candidates.into_iter().next().unwrap())),
                    _ => report.ambiguities.push(Ambiguity { event: id.clone(), token: tok, candidates }),
                }
            }
            if fixes.is_empty() {
                continue;
            }
            for tok in tokens.iter_mut() {
                if let Some((_, rep)) = fixes.iter().find(|(orig, _)| orig == tok) {
                    *tok = rep.clone();
                }
            }
            let te = t.event_mut(ci);
            if let Some(text) = te.event.payload.text_mut() {
                *text = tokens.join(" ");
            }
            for (original, replacement) in fixes {
                te.corrections.push(TokenCorrection { original: original.clone(), replacement: replacement.clone() });
                report.corrections.push(Correction { event: id.clone(), original, replacement });
            }
        }
    }
    report
}

fn filter_in_place(t: &mut Timeline, cfg: &EnhanceConfig) -> EnhanceReport {
    let mut report = EnhanceReport::default();
    let memberships = t.memberships();
    let mut done = vec![false; t.events().len()];
    for seg in 0..t.segments().len() {
        for di in visible_in_segment(t, seg, Modality::Detection) {
            if std::mem::replace(&mut done[di], true) {
                continue;
            }
            let (label, score) = match &t.event(di).event.payload {
                Payload::Detection { label, score, .. } => (normalize_text(label), *score),
                _ => continue,
            };
            if score >= cfg.det_suppress_conf {
                continue;
            }
            let supported = memberships[di].iter().flat_map(|&s| visible_in_segment(t, s, Modality::Tag)).any(|i| {
                matches!(&t.event(i).event.payload, Payload::Tag { label: tag, .. } if normalize_text(tag) == label)
            });
            if supported {
                continue;
            }
            let id = t.event(di).event.id.clone();
            t.event_mut(di).visibility = Visibility::Suppressed { reason: SUPPRESS_REASON.to_owned() };
            report.suppressions.push(Suppression { event: id, reason: SUPPRESS_REASON.to_owned() });
        }
    }
    report
}

/// Merges agreeing OCR and ASR text.
pub fn merge_ocr_asr(timeline: &Timeline, cfg: &EnhanceConfig) -> (Timeline, EnhanceReport) {
    let mut t = timeline.clone();
    let r = merge_in_place(&mut t, cfg);
    (t, r)
}

/// Rewrites caption tokens against the vocabulary, track classes and tags.
pub fn correct_caption_tokens(
    timeline: &Timeline,
    vocabulary: &TagVocabulary,
    cfg: &EnhanceConfig,
) -> (Timeline, EnhanceReport) {
    let mut t = timeline.clone();
    let r = correct_in_place(&mut t, vocabulary, cfg);
    (t, r)
}

/// Suppresses low-score detections no tag supports.
pub fn filter_detections(timeline: &Timeline, cfg: &EnhanceConfig) -> (Timeline, EnhanceReport) {
    let mut t = timeline.clone();
    let r = filter_in_place(&mut t, cfg);
    (t, r)
}

/// Runs the enabled passes in their fixed order.
pub fn enhance(timeline: &Timeline, vocabulary: &TagVocabulary, cfg: &EnhanceConfig) -> (Timeline, EnhanceReport) {
    let mut t = timeline.clone();
    let mut report = EnhanceReport::default();
    if cfg.enabled(Pass::OcrAsr) {
        report.extend(merge_in_place(&mut t, cfg));
    }
    if cfg.enabled(Pass::CaptionFix) {
        report.extend(correct_in_place(&mut t, vocabulary, cfg));
    }
    if cfg.enabled(Pass::DetFilter) {
        report.extend(filter_in_place(&mut t, cfg));
    }
    (t, report)
}
