//! Cross-modal correction: an OCR/ASR merge, a caption typo fixed from
//! tags, an ambiguous token left alone, and an unsupported detection hidden.

use mmfuse::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let meta = VideoMeta::new(1.0, 30.0, 640, 360, "mock://enhance");
    let lines = [
        r#"{"id":"o1","modality":"OCR","span":[0.0,1.0],"payload":{"text":"FRESH BREAD","box":[0,0,100,20],"lang":"en"},"source":"ocr","confidence":0.6}"#,
        r#"{"id":"a1","modality":"ASR","span":[0.0,1.0],"payload":{"text":"fresh brad"},"source":"asr","confidence":0.8}"#,
        r#"{"id":"c1","modality":"CAPTION","span":[0.0,1.0],"payload":{"text":"a dig near a cap"},"source":"cap","confidence":0.9}"#,
        r#"{"id":"t1","modality":"TAG","span":[0.0,1.0],"payload":{"label":"dog"},"source":"tag","confidence":0.9}"#,
        r#"{"id":"t2","modality":"TAG","span":[0.0,1.0],"payload":{"label":"cat"},"source":"tag","confidence":0.9}"#,
        r#"{"id":"t3","modality":"TAG","span":[0.0,1.0],"payload":{"label":"cup"},"source":"tag","confidence":0.9}"#,
        r#"{"id":"d1","modality":"DETECTION","span":[0.0,0.0],"payload":{"label":"kite","box":[0,0,10,10],"score":0.9},"source":"det","confidence":1.0}"#,
        r#"{"id":"d2","modality":"DETECTION","span":[0.05,0.05],"payload":{"label":"kite","box":[1,0,10,10],"score":0.4},"source":"det","confidence":1.0}"#,
    ];
    let ingested = ingest_stream(lines, &meta);
    for r in &ingested.rejections {
        println!("rejected {r}");
    }
    let stream = ingested.stream;
    let (timeline, _) = Pipeline::default().align(&stream, &AblationFlags::default())?;

    let (enhanced, report) = enhance(&timeline, &TagVocabulary::new(), &EnhanceConfig::default());
    print!("{}", report.to_lines());
    for ev in enhanced.events() {
        println!("{:>3} {:?} {:?}", ev.event.id.as_str(), ev.visibility, ev.event.payload.text());
    }

    let replayed = report.replay(&timeline)?;
    assert_eq!(replayed, enhanced);
    let (again, second) = enhance(&enhanced, &TagVocabulary::new(), &EnhanceConfig::default());
    // Ambiguities are reported again, but nothing changes.
    assert!(second.change_count() == 0 && again == enhanced);
    println!("replay matches, second run changes nothing");
    Ok(())
}
