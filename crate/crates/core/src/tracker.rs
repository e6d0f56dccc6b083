//! Persistent object identities from per-frame detections.
//!
//! Two-stage, score-partitioned association:
//! confident detections are matched first, then the leftover tracks get a
//! second chance against low-score detections. Matching is greedy on
//! descending IoU with deterministic tie-breaks. There is no motion model;
//! a track's position is its last matched box.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{BBox, EventId, ModalityEvent, Payload, TimeSpan};
use crate::grid::FrameGrid;
use crate::ingest::EventStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub tau_high: f64,
    pub tau_low: f64,
    pub iou_match: f64,
    /// Frames a track may stay lost before removal.
    pub patience: u32,
    /// Consecutive matches before a tentative track is confirmed.
    pub min_hits: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { tau_high: 0.6, tau_low: 0.1, iou_match: 0.3, patience: 3, min_hits: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("FRAME_ORDER_VIOLATION: frame {got} is not after frame {last}")]
    FrameOrder { last: u64, got: u64 },
    #[error("invalid tracker config: {0}")]
    Config(String),
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |m: &str| Err(TrackerError::Config(m.to_owned()));
        if !(0.0 <= self.tau_low && self.tau_low <= self.tau_high && self.tau_high <= 1.0) {
            return bad("require 0 <= tau_low <= tau_high <= 1");
        }
        if !(self.iou_match > 0.0 && self.iou_match <= 1.0) {
            return bad("require 0 < iou_match <= 1");
        }
        if self.min_hits < 1 {
            return bad("require min_hits >= 1");
        }
        Ok(())
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrackStatus {
    Tentative,
    Active,
    Lost,
    Removed,
}

/// Where a detection came from, kept so tracked events keep their identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOrigin {
    pub id: EventId,
    pub source: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: String,
    pub bbox: BBox,
    pub score: f64,
    pub origin: Option<DetectionOrigin>,
}

impl Detection {
    pub fn new(label: impl Into<String>, bbox: BBox, score: f64) -> Self {
        Self { label: label.into(), bbox, score, origin: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub frame: u64,
    pub bbox: BBox,
    pub score: f64,
    pub origin: Option<DetectionOrigin>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u64,
    pub class_label: String,
    pub states: Vec<TrackState>,
    pub status: TrackStatus,
    /// Set once the track has been confirmed; confirmed tracks are reported.
    pub confirmed: bool,
    hits: u32,
}

impl Track {
    pub fn last_state(&self) -> &TrackState {
        self.states.last().expect("tracks are created with one state")
    }

    pub fn last_frame(&self) -> u64 {
        self.last_state().frame
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    /// (track id, detection index), sorted by track id.
    pub matches: Vec<(u64, usize)>,
    pub unmatched_tracks: Vec<u64>,
    pub unmatched_detections: Vec<usize>,
}

fn greedy_stage(
    tracks: &[&Track],
    detections: &[Detection],
    det_ids: &[usize],
    cfg: &TrackerConfig,
    track_used: &mut [bool],
    det_used: &mut [bool],
    matches: &mut Vec<(u64, usize)>,
) {
    let mut pairs = Vec::new();
    for (ti, track) in tracks.iter().enumerate() {
        if track_used[ti] {
            continue;
        }
        let pos = &track.last_state().bbox;
        for &di in det_ids {
            let det = &detections[di];
            if det_used[di] || det.label != track.class_label {
                continue;
            }
            let overlap = iou(pos, &det.bbox);
            if overlap >= cfg.iou_match {
                pairs.push((overlap, ti, di));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(tracks[a.1].track_id.cmp(&tracks[b.1].track_id))
            .then(a.2.cmp(&b.2))
    });
    for (_, ti, di) in pairs {
        if !track_used[ti] && !det_used[di] {
            track_used[ti] = true;
            det_used[di] = true;
            matches.push((tracks[ti].track_id, di));
        }
    }
}

/// Matches one frame's detections to the non-removed tracks.
pub fn associate_frame(tracks: &[Track], detections: &[Detection], cfg: &TrackerConfig) -> Association {
    let live: Vec<&Track> = tracks.iter().filter(|t| t.status != TrackStatus::Removed).collect();
    let mut track_used = vec![false; live.len()];
    let mut det_used = vec![false; detections.len()];
    let mut matches = Vec::new();

    let high: Vec<usize> = (0..detections.len()).filter(|&i| detections[i].score >= cfg.tau_high).collect();
    let low: Vec<usize> = (0..detections.len())
        .filter(|&i| detections[i].score >= cfg.tau_low && detections[i].score < cfg.tau_high)
        .collect();

    greedy_stage(&live, detections, &high, cfg, &mut track_used, &mut det_used, &mut matches);
    greedy_stage(&live, detections, &low, cfg, &mut track_used, &mut det_used, &mut matches);

    matches.sort_unstable();
    let mut unmatched_tracks: Vec<u64> =
        live.iter().zip(&track_used).filter(|(_, &u)| !u).map(|(t, _)| t.track_id).collect();
    unmatched_tracks.sort_unstable();
    let unmatched_detections = (0..detections.len()).filter(|&i| !det_used[i]).collect();
    Association { matches, unmatched_tracks, unmatched_detections }
}

/// Frame-by-frame tracker state for one video.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self, TrackerError> {
        cfg.validate()?;
        Ok(Self { cfg, tracks: Vec::new(), next_id: 1, last_frame: None })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }

    /// Advances to `frame`. Frames must be strictly increasing; skipped
    /// frames count as misses.
    pub fn step(&mut self, frame: u64, detections: &[Detection]) -> Result<Association, TrackerError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackerError::FrameOrder { last, got: frame });
            }
        }
        self.last_frame = Some(frame);
        let cfg = self.cfg;

        // Expire tracks that went stale across frames that were never stepped.
        for t in self.tracks.iter_mut() {
            let missed_between = frame - t.last_frame() - 1;
            match t.status {
                TrackStatus::Tentative if missed_between > 0 => t.status = TrackStatus::Removed,
                TrackStatus::Active | TrackStatus::Lost if missed_between > u64::from(cfg.patience) => {
                    t.status = TrackStatus::Removed
                }
                _ => {}
            }
        }

        let assoc = associate_frame(&self.tracks, detections, &cfg);

        let by_id: BTreeMap<u64, usize> = assoc.matches.iter().copied().collect();
        for t in self.tracks.iter_mut().filter(|t| t.status != TrackStatus::Removed) {
            match by_id.get(&t.track_id) {
                Some(&di) => {
                    let d = &detections[di];
                    t.states.push(TrackState { frame, bbox: d.bbox, score: d.score, origin: d.origin.clone() });
                    match t.status {
                        TrackStatus::Tentative => {
                            t.hits += 1;
                            if t.hits >= cfg.min_hits {
                                t.status = TrackStatus::Active;
                                t.confirmed = true;
                            }
                        }
                        TrackStatus::Lost => t.status = TrackStatus::Active,
                        _ => {}
                    }
                }
                None => {
                    let missed = frame - t.last_frame();
                    t.status = match t.status {
                        TrackStatus::Tentative => TrackStatus::Removed,
                        _ if missed > u64::from(cfg.patience) => TrackStatus::Removed,
                        _ => TrackStatus::Lost,
                    };
                }
            }
        }

        for &di in &assoc.unmatched_detections {
            let d = &detections[di];
            if d.score < cfg.tau_high {
                continue;
            }
            let confirmed = cfg.min_hits <= 1;
            self.tracks.push(Track {
                track_id: self.next_id,
                class_label: d.label.clone(),
                states: vec![TrackState { frame, bbox: d.bbox, score: d.score, origin: d.origin.clone() }],
                status: if confirmed { TrackStatus::Active } else { TrackStatus::Tentative },
                confirmed,
                hits: 1,
            });
            self.next_id += 1;
        }

        Ok(assoc)
    }
}

/// One DETECTION event per state of every confirmed track, stamped with the
/// track id at the frame's instant. Tracks never confirmed emit nothing.
pub fn tracks_to_events(tracks: &[Track], frame_time: impl Fn(u64) -> f64) -> Vec<ModalityEvent> {
    let mut out = Vec::new();
    for t in tracks.iter().filter(|t| t.confirmed) {
        for s in &t.states {
            let (id, source, confidence) = match &s.origin {
                Some(o) => (o.id.clone(), o.source.clone(), o.confidence),
                None => (EventId::new(format!("track{}@{}", t.track_id, s.frame)), "tracker".to_owned(), 1.0),
            };
            let payload = Payload::Detection {
                label: t.class_label.clone(),
                bbox: s.bbox,
                score: s.score,
                track_id: Some(t.track_id),
            };
            out.push(ModalityEvent {
                id,
                modality: payload.modality(),
                span: TimeSpan::instant(frame_time(s.frame)),
                payload,
                source,
                confidence,
            });
        }
    }
    out
}

/// Replaces the stream's DETECTION events with tracked ones.
///
/// Detections are binned to grid frames by start time and the tracker is
/// stepped on every frame of the grid, so absences count toward patience.
pub fn track_stream(
    stream: &EventStream,
    grid: &FrameGrid,
    cfg: &TrackerConfig,
) -> Result<(EventStream, Vec<Track>), TrackerError> {
    let mut per_frame: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    let mut others = Vec::new();
    for ev in stream.events() {
        match &ev.payload {
            Payload::Detection { label, bbox, score, .. } => {
                if let Some(f) = grid.frame_of(ev.span.start) {
                    per_frame.entry(f).or_default().push(Detection {
                        label: label.clone(),
                        bbox: *bbox,
                        score: *score,
                        origin: Some(DetectionOrigin {
                            id: ev.id.clone(),
                            source: ev.source.clone(),
                            confidence: ev.confidence,
                        }),
                    });
                }
            }
            _ => others.push(ev.clone()),
        }
    }

    let mut tracker = Tracker::new(*cfg)?;
    if let Some(&last) = per_frame.keys().next_back() {
        // Past the final detection nothing can change the reported states.
        for f in 0..=last {
            let dets = per_frame.get(&f).map(Vec::as_slice).unwrap_or(&[]);
            tracker.step(f as u64, dets)?;
        }
    }
    let tracks = tracker.into_tracks();
    let ts = grid.timestamps();
    others.extend(tracks_to_events(&tracks, |f| ts[f as usize]));
    Ok((EventStream::from_events(stream.meta.clone(), others), tracks))
}
