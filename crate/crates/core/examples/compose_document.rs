//! Run a fixture config end to end and print the document and its export.
//!
//! ```text
//! cargo run --example compose_document -- tests/fixtures/mini.toml
//! ```

use mmfuse::cli::compose_artifacts;
use mmfuse::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "tests/fixtures/mini.toml".into());
    let cfg = RunConfig::load(path.as_ref())?;
    let a = compose_artifacts(&cfg, &cfg.flags)?;
    print!("{}", a.document);
    println!();

    let doc = import_structured(&a.export)?;
    assert_eq!(doc, a.output.document);
    println!("export: {} records, round-trips", a.export.lines().count());
    Ok(())
}
