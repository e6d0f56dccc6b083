//! Two boxes crossing paths, one detection dropped, tracked frame by frame.

use mmfuse::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut tracker = Tracker::new(TrackerConfig::default())?;
    for frame in 0..12u64 {
        let x = frame as f64 * 8.0;
        let mut dets = vec![Detection::new("person", BBox::new(40.0 + x, 50.0, 60.0, 120.0), 0.9)];
        // The car vanishes for frames 5 and 6, within patience.
        if !(5..7).contains(&frame) {
            dets.push(Detection::new("car", BBox::new(400.0 - x, 200.0, 120.0, 60.0), 0.8));
        }
        // Low-confidence duplicates only ever extend existing tracks.
        if frame % 4 == 3 {
            dets.push(Detection::new("person", BBox::new(44.0 + x, 52.0, 58.0, 118.0), 0.3));
        }
        let assoc = tracker.step(frame, &dets)?;
        println!("frame {frame:2}: matched {:?}", assoc.matches);
    }
    for t in tracker.tracks() {
        let frames: Vec<u64> = t.states.iter().map(|s| s.frame).collect();
        println!("track {} {} {:?} confirmed={} frames={frames:?}", t.track_id, t.class_label, t.status, t.confirmed);
    }
    Ok(())
}
