//! Trains one hashed n-gram softmax model on the synthetic corpus and prints
//! held-out metrics.
//!
//!     cargo run --release --example train_classifier

use personaflag::classifier::synthetic::keyword_corpus;
use personaflag::classifier::{evaluate, train, ModelSpec, TrainingConfig};
use personaflag::StereotypeLabel;

fn main() -> personaflag::Result<()> {
    let (train_set, test_set) = keyword_corpus(500, 200, 1);
    let spec = ModelSpec::new("demo", 17).with_dim(1 << 16);
    let outcome = train(&spec, &train_set, &[], &TrainingConfig::default())?;
    for e in &outcome.history {
        println!("{e:?}");
    }
    println!("selected epoch {}", outcome.selected_epoch);

    let m = evaluate(&outcome.model, &test_set)?;
    println!("accuracy {:.4}", m.accuracy);
    for l in StereotypeLabel::ALL {
        let s = m.label(l);
        println!("{:<24} {s:?}", l.as_str());
    }
    println!("macro {:?}", m.macro_avg);

    let path = std::env::temp_dir().join("personaflag-demo.bin");
    outcome.model.save(&path)?;
    println!("saved to {}", path.display());
    Ok(())
}
