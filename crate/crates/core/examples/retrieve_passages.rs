//! Ranks knowledge-base passages for a query.
//!
//!     cargo run --example retrieve_passages -- "job coach at work"

use personaflag::persona::KnowledgeBase;

fn main() -> personaflag::Result<()> {
    let query = std::env::args().nth(1).unwrap_or_else(|| "reading in inclusive classrooms".into());
    let kb = KnowledgeBase::load_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/data/kb"))?;
    for (p, score) in kb.retrieve(&query, 5) {
        println!("{score:.4} {:<14} [{}] {}", p.id, p.theme, p.text);
    }
    Ok(())
}
