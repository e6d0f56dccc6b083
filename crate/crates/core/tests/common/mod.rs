//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles deliberately avoid the library's own helpers: they recompute
//! each quantity the slow, obvious way.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use mmfuse::event::{BBox, Modality, ModalityEvent, VideoMeta};
use mmfuse::grid::{sample_frame_grid, SampleRate};
use mmfuse::ingest::EventStream;
use mmfuse::timeline::{build_timeline, Timeline};
use mmfuse::tracker::{Track, TrackStatus, TrackerConfig};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Copies fixture config `name.toml` into `dir` with every path made
/// absolute and the output directory pointed at `dir/out`.
pub fn relocated_config(name: &str, dir: &Path) -> PathBuf {
    let src = fixtures().join(format!("{name}.toml"));
    let mut table: toml::Table = std::fs::read_to_string(&src).unwrap().parse().unwrap();
    let abs = |v: &toml::Value| toml::Value::String(fixtures().join(v.as_str().unwrap()).display().to_string());
    if let Some(toml::Value::Array(streams)) = table.get_mut("streams") {
        for s in streams.iter_mut() {
            *s = abs(s);
        }
    }
    if let Some(v) = table.get("vocabulary").map(abs) {
        table.insert("vocabulary".into(), v);
    }
    table.insert("output_dir".into(), toml::Value::String(dir.join("out").display().to_string()));
    let dst = dir.join(format!("{name}.toml"));
    std::fs::write(&dst, toml::to_string(&table).unwrap()).unwrap();
    dst
}

pub fn timeline_at(meta: &VideoMeta, fps: f64, events: Vec<ModalityEvent>) -> Timeline {
    let grid = sample_frame_grid(meta, SampleRate::Fps(fps)).unwrap();
    build_timeline(&EventStream::from_events(meta.clone(), events), &grid).unwrap()
}

/// Segment membership by checking every (event, segment) pair.
pub fn membership_oracle(events: &[ModalityEvent], duration: f64, fps: f64) -> Vec<Vec<usize>> {
    let mut starts = Vec::new();
    let mut k = 0usize;
    while (k as f64) / fps < duration {
        starts.push(k as f64 / fps);
        k += 1;
    }
    let n = starts.len();
    events
        .iter()
        .map(|e| {
            (0..n)
                .filter(|&s| {
                    let a = starts[s];
                    let b = if s + 1 < n { starts[s + 1] } else { duration };
                    if e.span.start == e.span.end {
                        let t = e.span.start;
                        (a <= t && t < b) || (s == n - 1 && t == duration)
                    } else {
                        e.span.start.max(a) < e.span.end.min(b)
                    }
                })
                .collect()
        })
        .collect()
}

/// Full-matrix Levenshtein distance over chars.
pub fn levenshtein_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

pub fn normalize_oracle(s: &str) -> String {
    let mut out = String::new();
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

pub fn similarity_oracle(a: &str, b: &str) -> f64 {
    let (a, b) = (normalize_oracle(a), normalize_oracle(b));
    let m = a.chars().count().max(b.chars().count());
    if m == 0 {
        1.0
    } else {
        1.0 - levenshtein_oracle(&a, &b) as f64 / m as f64
    }
}

/// IoU of integer-aligned boxes by counting unit pixels.
pub fn raster_iou(a: (i64, i64, i64, i64), b: (i64, i64, i64, i64)) -> f64 {
    let inside = |r: (i64, i64, i64, i64), x: i64, y: i64| x >= r.0 && x < r.0 + r.2 && y >= r.1 && y < r.1 + r.3;
    let (x0, y0) = (a.0.min(b.0), a.1.min(b.1));
    let (x1, y1) = ((a.0 + a.2).max(b.0 + b.2), (a.1 + a.3).max(b.1 + b.3));
    let (mut inter, mut union) = (0u64, 0u64);
    for x in x0..x1 {
        for y in y0..y1 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn bbox(r: (i64, i64, i64, i64)) -> BBox {
    BBox::new(r.0 as f64, r.1 as f64, r.2 as f64, r.3 as f64)
}

fn area_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    let inter = iw.max(0.0) * ih.max(0.0);
    let union = a.w * a.h + b.w * b.h - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// The greedy association rule replayed by scanning every remaining pair
/// for the best one, one match at a time: high-score detections first,
/// then low-score ones.
pub fn greedy_oracle(tracks: &[Track], dets: &[mmfuse::tracker::Detection], cfg: &TrackerConfig) -> Vec<(u64, usize)> {
    let live: Vec<&Track> = tracks.iter().filter(|t| t.status != TrackStatus::Removed).collect();
    let mut used_t = vec![false; live.len()];
    let mut used_d = vec![false; dets.len()];
    let mut out = Vec::new();
    let stages: [Box<dyn Fn(f64) -> bool>; 2] =
        [Box::new(|s| s >= cfg.tau_high), Box::new(|s| s >= cfg.tau_low && s < cfg.tau_high)];
    for in_stage in stages.iter() {
        loop {
            let mut best: Option<(f64, u64, usize, usize)> = None;
            for (ti, t) in live.iter().enumerate() {
                for (di, d) in dets.iter().enumerate() {
                    if used_t[ti] || used_d[di] || !in_stage(d.score) || d.label != t.class_label {
                        continue;
                    }
                    let v = area_iou(&t.states.last().unwrap().bbox, &d.bbox);
                    if v < cfg.iou_match {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bv, bt, bd, _)) => match v.partial_cmp(&bv).unwrap() {
                            Ordering::Greater => true,
                            Ordering::Less => false,
                            Ordering::Equal => (t.track_id, di) < (bt, bd),
                        },
                    };
                    if better {
                        best = Some((v, t.track_id, di, ti));
                    }
                }
            }
            let Some((_, tid, di, ti)) = best else { break };
            used_t[ti] = true;
            used_d[di] = true;
            out.push((tid, di));
        }
    }
    out.sort_unstable();
    out
}

pub fn modality_rank(m: Modality) -> usize {
    ["CAPTION", "DENSE_CAPTION", "DETECTION", "TAG", "OCR", "ASR"].iter().position(|s| *s == m.as_str()).unwrap()
}

/// Reference sealed-stream comparator: start, modality tie order, id.
pub fn reference_order(a: &ModalityEvent, b: &ModalityEvent) -> Ordering {
    a.span
        .start
        .partial_cmp(&b.span.start)
        .unwrap()
        .then(modality_rank(a.modality).cmp(&modality_rank(b.modality)))
        .then(a.id.as_str().cmp(b.id.as_str()))
}
