//! Splits text into sentences with character offsets.
//!
//!     cargo run --example segment_text -- "Dr. Lee arrived. She said \"Hi!\" Then left..."

use personaflag::segment::segment;

fn main() {
    let text = std::env::args().nth(1).unwrap_or_else(|| {
        "Mr. Smith works at the bakery. He said \"I love it!\" Every day... well, most days.\nNew line here".into()
    });
    for s in segment(&text) {
        println!("[{:>3}, {:>3}) {}", s.start, s.end, s.text);
    }
}
