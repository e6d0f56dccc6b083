//! Drop each modality in turn from a mock scene and count what disappears.

use mmfuse::prelude::*;
use mmfuse::synthetic::MockScenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let scenario = MockScenario { seed, duration: 6.0, n_objects: 3, ..MockScenario::default() };
    let mock = scenario.generate()?;
    let stream = ingest_stream(&mock.lines, &mock.meta).stream;
    let pipeline = Pipeline::default();

    let full = pipeline.run(&stream, &AblationFlags::default())?.document;
    println!("full: {} lines", full.line_count());
    for ablation in Ablation::ALL {
        let doc = pipeline.run(&stream, &AblationFlags::default().without(ablation))?.document;
        let leaks = doc.lines().filter(|l| ablation.modalities().iter().any(|&m| l.cites(m))).count();
        assert_eq!(leaks, 0);
        println!("{:>8}: {} lines", ablation.name(), doc.line_count());
    }
    Ok(())
}
