//! Seeded synthetic annotation streams for tests, examples and fixtures.
//!
//! Objects move on piecewise-linear paths in private horizontal lanes, so
//! they never overlap and the tracker's identity checks have a ground truth.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::event::{BBox, Modality, ModalityEvent, Payload, TimeSpan, VideoMeta};
use crate::protocol::event_to_line;
use crate::tracker::Detection;
use crate::vocab::{TagCategory, TagVocabulary};

pub const MAX_VOCAB: usize = 6400;

/// Default detector class list.
pub const COCO_CLASSES: [&str; 80] = [
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat", "traffic light",
    "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat", "dog", "horse", "sheep", "cow",
    "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella", "handbag", "tie", "suitcase", "frisbee",
    "skis", "snowboard", "sports ball", "kite", "baseball bat", "baseball glove", "skateboard", "surfboard",
    "tennis racket", "bottle", "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple",
    "sandwich", "orange", "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair", "couch",
    "potted plant", "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote", "keyboard",
    "cell phone", "microwave", "oven", "toaster", "sink", "refrigerator", "book", "clock", "vase", "scissors",
    "teddy bear", "hair drier", "toothbrush",
];

const COLORS: [&str; 8] = ["red", "green", "blue", "yellow", "white", "black", "brown", "gray"];
const SCENES: [&str; 6] = ["kitchen", "living room", "street", "office", "garden", "bedroom"];
const ACTIVITIES: [&str; 6] = ["cooking", "walking", "reading", "talking", "eating", "watering"];
const AUDIO_TAGS: [&str; 4] = ["speech", "music", "noise", "animal"];
const SIGNS: [(&str, &str); 4] = [("EXIT", "en"), ("OPEN 24 HOURS", "en"), ("欢迎光临", "zh"), ("FRESH BREAD", "en")];
const PHRASES: [&str; 5] =
    ["let's get started", "this is the kitchen", "open twenty four hours", "fresh bread today", "look at that"];

/// A vocabulary of `n` distinct labels (at most [`MAX_VOCAB`]): detector
/// classes, colors, scenes and activities first, then numbered fillers.
pub fn synthetic_vocabulary(n: usize) -> TagVocabulary {
    let mut v = TagVocabulary::new();
    let named = COCO_CLASSES
        .iter()
        .map(|l| (l.to_string(), TagCategory::Object))
        .chain(COLORS.iter().map(|l| (l.to_string(), TagCategory::Color)))
        .chain(SCENES.iter().map(|l| (l.to_string(), TagCategory::Scene)))
        .chain(ACTIVITIES.iter().map(|l| (l.to_string(), TagCategory::Activity)));
    let fillers = (0..).map(|k| (format!("item {k:04}"), TagCategory::Object));
    for (label, cat) in named.chain(fillers) {
        if v.len() >= n.min(MAX_VOCAB) {
            break;
        }
        v.insert(&label, cat).expect("synthetic labels are non-empty");
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockScenario {
    pub seed: u64,
    pub duration: f64,
    pub width: u32,
    pub height: u32,
    pub n_objects: usize,
    pub vocab_size: usize,
    /// Detection sampling rate in frames per second.
    pub detection_fps: f64,
}

impl Default for MockScenario {
    fn default() -> Self {
        Self { seed: 0, duration: 4.0, width: 640, height: 360, n_objects: 2, vocab_size: MAX_VOCAB, detection_fps: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid scenario: {0}")]
pub struct ScenarioError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct MockStream {
    pub meta: VideoMeta,
    pub lines: Vec<String>,
    /// Events emitted per modality, as counted by the generator.
    pub tallies: BTreeMap<Modality, usize>,
}

#[derive(Debug, Clone)]
struct Mover {
    class: &'static str,
    x0: f64,
    y: f64,
    w: f64,
    h: f64,
    vx: f64,
    x_max: f64,
}

impl Mover {
    /// Triangle-wave bounce between 0 and `x_max`.
    fn bbox(&self, t: f64) -> BBox {
        let span = self.x_max.max(1e-9);
        let p = (self.x0 + self.vx * t).rem_euclid(2.0 * span);
        let x = if p <= span { p } else { 2.0 * span - p };
        BBox::new(round1(x), round1(self.y), round1(self.w), round1(self.h))
    }
}

/// Replaces one interior character of the longest word with a vowel
/// (one edit). Short words come back unchanged.
fn misspell(rng: &mut ChaCha8Rng, text: &str) -> String {
    let mut words: Vec<Vec<char>> = text.split(' ').map(|w| w.chars().collect()).collect();
    let Some(longest) = words.iter_mut().max_by_key(|w| w.len()) else { return text.to_owned() };
    if longest.len() >= 4 {
        let i = rng.gen_range(1..longest.len() - 1);
        let vowel = ['a', 'e', 'i', 'o', 'u'][rng.gen_range(0..5)];
        if longest[i] != vowel {
            longest[i] = vowel;
        }
    }
    words.iter().map(|w| w.iter().collect::<String>()).collect::<Vec<_>>().join(" ")
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn lanes(rng: &mut ChaCha8Rng, n: usize, width: f64, height: f64) -> Vec<Mover> {
    let lane_h = height / n.max(1) as f64;
    let mut classes: Vec<&'static str> = COCO_CLASSES.to_vec();
    classes.shuffle(rng);
    (0..n)
        .map(|i| {
            let h = (lane_h * 0.6).floor();
            let w = (width / 8.0).floor();
            let x_max = (width - w - 1.0).max(0.0);
            let speed = rng.gen_range(20.0..80.0);
            Mover {
                class: classes[i % classes.len()],
                x0: rng.gen_range(0.0..=x_max),
                y: lane_h * i as f64 + (lane_h - h) / 2.0,
                w,
                h,
                vx: if rng.gen_bool(0.5) { speed } else { -speed },
                x_max,
            }
        })
        .collect()
}

impl MockScenario {
    pub fn meta(&self) -> VideoMeta {
        VideoMeta::new(self.duration, 30.0, self.width, self.height, format!("mock://seed/{}", self.seed))
            .with_title(format!("mock scene {}", self.seed))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError(m.to_owned()));
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return bad("duration must be finite and >= 0");
        }
        if self.width < 16 || self.height < 16 {
            return bad("frame must be at least 16x16");
        }
        if self.vocab_size > MAX_VOCAB {
            return bad("vocab_size must be <= 6400");
        }
        if !(self.detection_fps.is_finite() && self.detection_fps > 0.0) {
            return bad("detection_fps must be > 0");
        }
        if self.n_objects as f64 > f64::from(self.height) / 8.0 {
            return bad("too many objects for the frame height");
        }
        Ok(())
    }

    /// Generates the wire lines. Identical scenarios give identical bytes.
    pub fn generate(&self) -> Result<MockStream, ScenarioError> {
        self.validate()?;
        let meta = self.meta();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let vocab: Vec<String> = synthetic_vocabulary(self.vocab_size).labels().map(str::to_owned).collect();
        let movers = lanes(&mut rng, self.n_objects, f64::from(self.width), f64::from(self.height));
        let d = self.duration;
        let mut events = Vec::new();

        let ticks = |step: f64| (0..).map(move |k| k as f64 * step).take_while(move |&t| t < d);
        // A window clipped to the video; None when it would start at or past the end.
        let window = |t: f64, len: f64| (t < d).then(|| TimeSpan::new(round3(t), round3((t + len).min(d))));

        for (k, t) in ticks(1.0).enumerate() {
            let activity = ACTIVITIES[rng.gen_range(0..ACTIVITIES.len())];
            let scene = SCENES[rng.gen_range(0..SCENES.len())];
            let subject = movers.first().map_or_else(|| "nobody".to_owned(), |m| m.class.to_owned());
            // Occasionally misspell the subject so caption correction has work.
            let subject = if rng.gen_bool(0.3) { misspell(&mut rng, &subject) } else { subject };
            events.push(ModalityEvent::new(
                format!("cap-{k:03}"),
                window(t, 1.0).expect("tick lies inside the video"),
                Payload::Caption { text: format!("a {subject} {activity} in the {scene}") },
                "mock-captioner",
                round3(rng.gen_range(0.6..1.0)),
            ));
            for (i, m) in movers.iter().enumerate() {
                let color = COLORS[rng.gen_range(0..COLORS.len())];
                events.push(ModalityEvent::new(
                    format!("dc-{i}-{k:03}"),
                    window(t, 1.0).expect("tick lies inside the video"),
                    Payload::DenseCaption { text: format!("{color} {}", m.class), bbox: m.bbox(t) },
                    "mock-dense",
                    round3(rng.gen_range(0.5..1.0)),
                ));
            }
        }

        for (k, t) in ticks(0.5).enumerate() {
            // The tagger sometimes misses a moving object entirely.
            let mut labels: Vec<String> =
                movers.iter().filter(|_| rng.gen_bool(0.8)).map(|m| m.class.to_owned()).collect();
            for _ in 0..2 {
                if let Some(l) = vocab.choose(&mut rng) {
                    labels.push(l.clone());
                }
            }
            for (j, label) in labels.into_iter().enumerate() {
                events.push(ModalityEvent::new(
                    format!("tag-{k:03}-{j}"),
                    window(t, 0.5).expect("tick lies inside the video"),
                    Payload::Tag { label, category: TagCategory::Object },
                    "mock-tagger",
                    round3(rng.gen_range(0.3..1.0)),
                ));
            }
        }

        for (k, t) in ticks(2.0).enumerate() {
            let (sign, lang) = SIGNS[rng.gen_range(0..SIGNS.len())];
            let w = f64::from(self.width) / 4.0;
            let conf = round3(rng.gen_range(0.5..1.0));
            let echo = rng.gen_bool(0.5);
            let Some(span) = window(t + 0.25, 1.0) else { continue };
            events.push(ModalityEvent::new(
                format!("ocr-{k:03}"),
                span,
                Payload::Ocr { text: sign.to_owned(), bbox: BBox::new(8.0, 8.0, round1(w), 16.0), lang: lang.to_owned() },
                "mock-ocr",
                conf,
            ));
            // Someone reads the sign aloud, with the odd recognition slip.
            if echo {
                let spoken = misspell(&mut rng, &sign.to_lowercase());
                events.push(ModalityEvent::new(
                    format!("asr-echo-{k:03}"),
                    span,
                    Payload::Asr { text: spoken, audio_tags: vec!["speech".to_owned()] },
                    "mock-asr",
                    round3(rng.gen_range(0.5..1.0)),
                ));
            }
        }

        for (k, t) in ticks(1.5).enumerate() {
            let n_tags = rng.gen_range(1..=2);
            let mut tags: Vec<String> = AUDIO_TAGS.choose_multiple(&mut rng, n_tags).map(|s| s.to_string()).collect();
            tags.sort();
            let text = PHRASES[rng.gen_range(0..PHRASES.len())].to_owned();
            let conf = round3(rng.gen_range(0.5..1.0));
            let Some(span) = window(t + 0.1, 1.2) else { continue };
            events.push(ModalityEvent::new(
                format!("asr-{k:03}"),
                span,
                Payload::Asr { text, audio_tags: tags },
                "mock-asr",
                conf,
            ));
        }

        for k in 0..ticks(1.0 / self.detection_fps).count() {
            // Exact division keeps detection times on the default grid.
            let t = k as f64 / self.detection_fps;
            for (i, m) in movers.iter().enumerate() {
                let score = if rng.gen_bool(0.1) { 0.35 } else { 0.9 };
                events.push(ModalityEvent::new(
                    format!("det-{i}-{k:05}"),
                    TimeSpan::instant(t),
                    Payload::Detection { label: m.class.to_owned(), bbox: m.bbox(t), score, track_id: None },
                    "mock-detector",
                    1.0,
                ));
            }
        }

        // Emit in a seeded interleaving rather than grouped by modality.
        events.shuffle(&mut rng);
        let mut tallies = BTreeMap::new();
        for e in &events {
            *tallies.entry(e.modality).or_insert(0) += 1;
        }
        let lines = events.iter().map(event_to_line).collect();
        Ok(MockStream { meta, lines, tallies })
    }
}

/// Per-frame detections of `n_objects` constant-velocity objects in
/// separate lanes, paired with their ground-truth object index. Frames in
/// `dropout` carry no detections.
pub fn constant_velocity_scene(
    seed: u64,
    n_objects: usize,
    frames: u64,
    dropout: Option<Range<u64>>,
) -> Vec<Vec<(usize, Detection)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (width, height) = (1280.0, 720.0);
    let lane_h = height / n_objects.max(1) as f64;
    let (w, h) = (60.0, (lane_h * 0.6).floor());
    let objects: Vec<(f64, f64, f64, &str)> = (0..n_objects)
        .map(|i| {
            let x0 = rng.gen_range(0.0..200.0);
            // Slow enough that a few missed frames still overlap the last box.
            let v_max = ((width - w - x0) / frames.max(1) as f64).clamp(1.0, 5.0);
            let v = rng.gen_range(0.5..v_max);
            (x0, lane_h * i as f64 + (lane_h - h) / 2.0, v, COCO_CLASSES[i % 3])
        })
        .collect();
    (0..frames)
        .map(|f| {
            if dropout.as_ref().is_some_and(|r| r.contains(&f)) {
                return Vec::new();
            }
            objects
                .iter()
                .enumerate()
                .map(|(i, &(x0, y, v, class))| (i, Detection::new(class, BBox::new(x0 + v * f as f64, y, w, h), 0.9)))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ingest_stream;

    #[test]
    fn vocabulary_sizes() {
        assert_eq!(synthetic_vocabulary(6400).len(), 6400);
        assert_eq!(synthetic_vocabulary(10).len(), 10);
        assert_eq!(synthetic_vocabulary(99_999).len(), MAX_VOCAB);
    }

    #[test]
    fn same_seed_same_bytes() {
        let s = MockScenario { seed: 3, duration: 1.0, ..Default::default() };
        assert_eq!(s.generate().unwrap().lines, s.generate().unwrap().lines);
        let other = MockScenario { seed: 4, ..s.clone() };
        assert_ne!(s.generate().unwrap().lines, other.generate().unwrap().lines);
    }

    #[test]
    fn zero_duration_is_empty() {
        let s = MockScenario { duration: 0.0, ..Default::default() };
        assert!(s.generate().unwrap().lines.is_empty());
    }

    #[test]
    fn streams_are_valid() {
        for seed in 0..10 {
            // Durations just past a tick catch windows that would start after the end.
            let duration = [0.05, 1.0, 2.1, 2.3, 3.3, 4.15, 7.9, 0.5, 6.05, 10.0][seed as usize];
            let s = MockScenario { seed, duration, n_objects: 3, ..Default::default() };
            let out = s.generate().unwrap();
            let ing = ingest_stream(&out.lines, &out.meta);
            assert!(ing.rejections.is_empty(), "{:?}", ing.rejections.first());
            assert_eq!(ing.stream.len(), out.lines.len());
        }
    }

    #[test]
    fn rejects_oversized_vocab() {
        assert!(MockScenario { vocab_size: 6401, ..Default::default() }.generate().is_err());
    }
}
