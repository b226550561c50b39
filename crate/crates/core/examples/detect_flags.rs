//! Runs the three-model ensemble over a paragraph and prints the flag
//! payload.
//!
//!     cargo run --release --example detect_flags -- "Some text."

use std::sync::Arc;

use personaflag::classifier::synthetic::reference_models;
use personaflag::ensemble::{to_wire, Detector};
use personaflag::generation::StubClient;

fn main() -> personaflag::Result<()> {
    let text = std::env::args().nth(1).unwrap_or_else(|| {
        "I work at the bakery on weekdays. People with Down syndrome are always happy. \
         Women belong in the kitchen."
            .into()
    });
    let detector = Detector::from_models(reference_models(1 << 14, 42)?, Arc::new(StubClient::new(0)))?;
    let flags = detector.detect(&text);
    for f in &flags {
        let labels: Vec<_> = f.decision.labels.iter().map(|l| l.as_str()).collect();
        println!("{:<50} {labels:?}", f.sentence.text);
    }
    println!("{}", serde_json::to_string_pretty(&to_wire(&flags))?);
    Ok(())
}
