//! Imports MGSD-style rows, expands a few Down-syndrome seeds and assembles a
//! train/test split.
//!
//!     cargo run --example build_dataset

use personaflag::dataset::{assemble, augment, import_mgsd, AugmentationJob};
use personaflag::generation::StubClient;
use personaflag::label::label_stats;
use personaflag::{LabeledExample, Provenance, StereotypeLabel, Theme};

const MGSD: &str = "text,category
The nurse checked the chart.,unrelated
Women are bad at math.,stereotype_gender
Engineers have no social skills.,stereotype_profession
Men should never cry.,stereotype_gender
The Italians all love pasta.,stereotype_race
Some lawyers volunteer on weekends.,anti-stereotype_profession
The train left on time.,unrelated
";

fn main() -> personaflag::Result<()> {
    let (imported, report) = import_mgsd(MGSD.as_bytes(), b',')?;
    println!("import: {}", serde_json::to_string(&report)?);

    let seeds = vec![
        LabeledExample::new(
            "People with Down syndrome can never live on their own.",
            StereotypeLabel::StereotypeDownsyndrome,
            Some(Theme::Family),
            Provenance::Seed,
        )?,
        LabeledExample::new(
            "My brother with Down syndrome cooks dinner for us on Fridays.",
            StereotypeLabel::Neutral,
            Some(Theme::Family),
            Provenance::Seed,
        )?,
    ];
    let generated = augment(&AugmentationJob::new(seeds.clone(), 10, Theme::Family), &StubClient::new(3))?;
    for g in generated.iter().take(4) {
        println!("generated: {} ({})", g.text, g.label);
    }

    let (dataset, report) = assemble(&imported, &seeds, &generated, 0.2, 11)?;
    println!("assembly: {}", serde_json::to_string(&report)?);
    for (split, counts) in label_stats(&dataset) {
        println!("{split:?}: {}", serde_json::to_string(&counts)?);
    }
    let mut out = Vec::new();
    dataset.write_jsonl(&mut out)?;
    println!("{}", String::from_utf8_lossy(&out).lines().next().unwrap_or_default());
    Ok(())
}
