//! Runs the grounded-versus-ungrounded comparison with stub generators and
//! prints the t-test table.
//!
//!     cargo run --release --example compare_grounding -- [out_dir]

use std::sync::Arc;

use personaflag::classifier::synthetic::reference_models;
use personaflag::ensemble::Detector;
use personaflag::eval::{run_comparison, ExperimentGrid, ExperimentOptions};
use personaflag::generation::StubClient;
use personaflag::persona::KnowledgeBase;

fn main() -> personaflag::Result<()> {
    let out_dir = std::env::args().nth(1);
    let kb = KnowledgeBase::load_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/data/kb"))?;
    let stub = Arc::new(StubClient::new(7));
    let detector = Detector::from_models(reference_models(1 << 14, 42)?, stub.clone())?;

    let grid = ExperimentGrid::default();
    println!("{} cells", grid.size());
    let outcome = run_comparison(&grid, stub.as_ref(), stub.as_ref(), &detector, &kb, &ExperimentOptions::default())?;
    print!("{}", outcome.table);
    println!("excluded pairs: {}", outcome.excluded.len());
    if let Some(dir) = out_dir {
        outcome.archive(&dir)?;
        println!("archived to {dir}");
    }
    Ok(())
}
