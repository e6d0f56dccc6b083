//! Ingest a JSON-lines stream and print what was accepted and rejected.
//!
//! ```text
//! cargo run --example ingest_stream -- tests/fixtures/mini.jsonl
//! ```

use std::fs::File;

use mmfuse::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "tests/fixtures/mini.jsonl".into());
    let meta = VideoMeta::new(4.0, 30.0, 640, 360, format!("file://{path}"));

    let mut ingestor = Ingestor::new(Some(meta.clone()));
    ingestor.feed_reader(&path, File::open(&path)?)?;
    // A line that fails both parsing and validation, to show the report.
    ingestor.feed_line("inline", 1, r#"{"id":"x","modality":"SMELL"}"#);
    let outcome = ingestor.finish(meta);

    println!("accepted {} events", outcome.stream.len());
    for ev in outcome.stream.events().iter().take(5) {
        println!("  {}", event_to_line(ev));
    }
    for r in &outcome.rejections {
        println!("rejected {r}");
    }
    Ok(())
}
