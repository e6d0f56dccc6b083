//! Sample a frame grid and show which events land in which segment.

use mmfuse::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let meta = VideoMeta::new(0.25, 30.0, 640, 360, "mock://align");
    let lines = [
        r#"{"id":"cap","modality":"CAPTION","span":[0.0,0.25],"payload":{"text":"a dog in a park"},"source":"s","confidence":0.9}"#,
        r#"{"id":"ocr","modality":"OCR","span":[0.1,0.15],"payload":{"text":"EXIT","box":[0,0,40,20]},"source":"s","confidence":0.8}"#,
        r#"{"id":"det","modality":"DETECTION","span":[0.2,0.2],"payload":{"label":"dog","box":[10,10,50,50],"score":0.9},"source":"s","confidence":1.0}"#,
        r#"{"id":"end","modality":"TAG","span":[0.25,0.25],"payload":{"label":"park"},"source":"s","confidence":0.7}"#,
    ];
    let stream = ingest_stream(lines, &meta).stream;

    let grid = sample_frame_grid(&meta, SampleRate::Fps(10.0))?;
    println!("grid at {} fps: {:?}", grid.fps(), grid.timestamps());

    let timeline = build_timeline(&stream, &grid)?;
    for seg in timeline.segments() {
        let ids: Vec<&str> = seg.events.iter().map(|&i| timeline.event(i).event.id.as_str()).collect();
        println!("[{:.2}, {:.2}) {ids:?}", seg.span.start, seg.span.end);
    }
    Ok(())
}
