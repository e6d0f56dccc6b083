//! Read a stream from a TCP socket instead of a file.
//!
//! A background thread plays the extractor and writes a few lines to a
//! loopback listener; the ingestor reads until the peer closes.

use std::io::Write;
use std::net::TcpListener;

use mmfuse::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let channel = InputChannel::parse(&format!("tcp:{}", listener.local_addr()?));
    let producer = std::thread::spawn(move || -> std::io::Result<()> {
        let (mut conn, _) = listener.accept()?;
        for k in 0..3 {
            writeln!(
                conn,
                r#"{{"id":"asr-{k}","modality":"ASR","span":[{k}.0,{}.5],"payload":{{"text":"line {k}"}},"source":"asr","confidence":0.9}}"#,
                k
            )?;
        }
        Ok(())
    });

    let meta = VideoMeta::new(3.0, 30.0, 640, 360, "mock://socket");
    let mut ingestor = Ingestor::new(Some(meta.clone()));
    ingestor.feed_reader(&channel.label(), channel.open()?)?;
    producer.join().expect("producer thread")?;

    let outcome = ingestor.finish(meta);
    println!("{}: {} events, {} rejected", channel.label(), outcome.stream.len(), outcome.rejections.len());
    let out = Pipeline::default().run(&outcome.stream, &AblationFlags::default())?;
    print!("{}", render_text(&out.document));
    Ok(())
}
